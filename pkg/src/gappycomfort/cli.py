"""``gappycomfort`` command line.

Subcommands run one pipeline stage each and only write below
``output_dir``::

    gen-data        simulate the 50 acquisition scenarios, write train/validation CSVs
    build-basis     POD basis from the training CSV
    validate        reconstruct every validation column, write per-label errors
    pmv-map         per-cell PMV of a field, heatmap CSV + summary
    run-experiment  closed-loop group-PMV control run(s)
    aggregate       group PMV of given values, or satisfaction ratios of a TSV log

Exit codes: 0 success, 1 runtime/numeric failure, 2 usage or configuration.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import comfort, control, gappy_pod, sim, snapshots
from .config import ConfigError, CliConfig
from .group_pmv import GroupMethod, aggregate, load_tsv_log, satisfaction_ratios

log = logging.getLogger("gappycomfort")


class UsageError(Exception):
    pass


def _paths(cfg: CliConfig) -> dict[str, Path]:
    out = cfg.output_dir
    return {
        "data": out / "data",
        "train": out / "data" / "train.csv",
        "validation": out / "data" / "validation.csv",
        "basis": out / "basis",
        "errors": out / "validation_errors.csv",
        "experiments": out / "experiments",
    }


def _write_manifest(path: Path, entries: dict) -> None:
    lines = []
    for k, v in entries.items():
        if isinstance(v, str):
            lines.append(f'{k} = "{v}"')
        elif isinstance(v, (list, tuple)):
            lines.append(f"{k} = [{', '.join(repr(x) if not isinstance(x, str) else chr(34) + x + chr(34) for x in v)}]")
        else:
            lines.append(f"{k} = {v}")
    path.write_text("\n".join(lines) + "\n")


def cmd_gen_data(cfg: CliConfig, args) -> int:
    p = _paths(cfg)
    specs = cfg.scenarios
    val_specs = cfg.validation_specs
    model = cfg.model
    data = sim.generate_snapshot_dataset(model, specs, seed=cfg.seed)
    train, val = snapshots.split_train_validation(data, val_specs)
    p["data"].mkdir(parents=True, exist_ok=True)
    snapshots.save_snapshots(train, p["train"])
    snapshots.save_snapshots(val, p["validation"])
    _write_manifest(
        p["data"] / "manifest.toml",
        {
            "seed": cfg.seed,
            "noise_std": model.noise_std,
            "n_train_scenarios": len(train.scenarios()),
            "n_validation_scenarios": len(val.scenarios()),
            "n_train_columns": train.n_columns,
            "n_validation_columns": val.n_columns,
            "rows": cfg.grid.rows,
            "cols": cfg.grid.cols,
        },
    )
    print(f"wrote {train.n_columns} train columns ({len(train.scenarios())} scenarios) to {p['train']}")
    print(f"wrote {val.n_columns} validation columns ({len(val.scenarios())} scenarios) to {p['validation']}")
    return 0


def _load_split(cfg: CliConfig, which: str) -> snapshots.SnapshotMatrix:
    path = _paths(cfg)[which]
    if not path.exists():
        raise FileNotFoundError(f"{path} missing; run gen-data first")
    return snapshots.load_snapshots(path, cfg.grid)


def _plan(cfg: CliConfig) -> gappy_pod.SamplingPlan:
    pod = cfg.raw["pod"]
    if pod["sensors"]:
        return gappy_pod.make_sampling_plan(cfg.grid, "explicit", indices=pod["sensors"])
    return gappy_pod.make_sampling_plan(cfg.grid, "boundary_uniform", int(pod["n_meas"]))


def _load_basis(cfg: CliConfig) -> gappy_pod.PodBasis:
    d = _paths(cfg)["basis"]
    if not (d / "manifest.toml").exists():
        raise FileNotFoundError(f"no basis in {d}; run build-basis first")
    basis, grid = gappy_pod.load_basis(d)
    if grid != cfg.grid:
        raise ValueError("stored basis was built on a different grid")
    return basis


def cmd_build_basis(cfg: CliConfig, args) -> int:
    train = _load_split(cfg, "train")
    n_modes = int(cfg.raw["pod"]["n_modes"])
    basis = gappy_pod.build_basis(train, n_modes, cfg.raw["pod"]["reference"])
    gappy_pod.save_basis(basis, _paths(cfg)["basis"], cfg.grid)
    energy = basis.singular_values**2
    print(f"basis: {basis.n_modes} modes over {basis.n_space} points from {train.n_columns} snapshots")
    print("singular values: " + " ".join(f"{s:.4g}" for s in basis.singular_values))
    log.debug("mode energy %s", energy)
    return 0


def cmd_validate(cfg: CliConfig, args) -> int:
    basis = _load_basis(cfg)
    val = _load_split(cfg, "validation")
    recon = gappy_pod.GappyReconstructor(basis, _plan(cfg))
    errors = [
        gappy_pod.reconstruction_error(val.data[:, j], recon(recon.plan.sample(val.data[:, j])).field)
        for j in range(val.n_columns)
    ]
    summary = gappy_pod.write_error_report(_paths(cfg)["errors"], val.labels, errors)
    print(f"validation columns: {len(errors)}, condition number {recon.condition_number:.3g}")
    print(f"mean error {summary['mean']:.4f}%")
    print(f"min  error {summary['min']:.4f}% at {summary['min_label']}")
    print(f"max  error {summary['max']:.4f}% at {summary['max_label']}")
    return 0


def preheat_state(model: sim.RoomModel, setpoint: float, schedule: control.ControlSchedule | None = None,
                  seed: int = 0) -> np.ndarray:
    """Field after the initial period followed by ``schedule.preheat`` seconds at ``setpoint``."""
    schedule = schedule or control.ControlSchedule()
    s = sim.Simulator(model, seed=seed)
    s.command(schedule.initial_temp)
    s.run(schedule.initial_on)
    s.command(None)
    s.run(schedule.initial_off)
    s.command(setpoint)
    s.run(schedule.preheat)
    return s.field.copy()


def _field_from_source(cfg: CliConfig, source: str) -> np.ndarray:
    kind, _, arg = source.partition(":")
    model = cfg.model
    if kind == "steady":
        return sim.steady_state(model, float(arg))
    if kind == "preheat":
        return preheat_state(model.with_(noise_std=0.0), float(arg), cfg.schedule)
    if kind == "snapshot":
        val = _load_split(cfg, "validation")
        try:
            j = val.labels.index(arg)
        except ValueError:
            raise UsageError(f"label {arg!r} not in the validation file") from None
        return val.data[:, j]
    if kind == "file":
        path = Path(arg)
        values = np.loadtxt(path, delimiter=",", ndmin=1)
        if values.size != cfg.grid.size:
            raise UsageError(f"{path} holds {values.size} values, grid has {cfg.grid.size}")
        return values
    raise UsageError(f"unknown field source {source!r}; use steady:<sp>, preheat:<sp>, snapshot:<label> or file:<csv>")


def cmd_pmv_map(cfg: CliConfig, args) -> int:
    field = _field_from_source(cfg, args.source)
    if args.reconstruct:
        plan = _plan(cfg)
        field = gappy_pod.reconstruct(_load_basis(cfg), plan, plan.sample(field)).field
    personal = comfort.PersonalFactors(args.met, args.clo)
    pmap = comfort.spatial_pmv_map(field, cfg.env_rest, personal)
    out = cfg.output_dir / (args.name or "pmv_map.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    comfort.write_pmv_map(out, cfg.grid, field, pmap)
    classes = {c: sum(r.comfort_class is c for r in pmap.results) for c in comfort.ComfortClass}
    print(f"wrote {out}")
    print(f"pmv min {pmap.min:.3f} max {pmap.max:.3f} spread {pmap.spread:.3f}")
    print("cells: " + ", ".join(f"{c.value} {n}" for c, n in classes.items()))
    return 0


def _predictor(cfg: CliConfig, model: sim.RoomModel):
    if cfg.raw["control"]["predictor"] == "snapshot-mean":
        return control.SnapshotMeanPredictor(_load_split(cfg, "train"))
    return control.SteadyStatePredictor(model.with_(noise_std=0.0))


def cmd_run_experiment(cfg: CliConfig, args) -> int:
    methods = list(GroupMethod) if args.method == "all" else [GroupMethod.parse(args.method or cfg.method.value)]
    scenario = args.scenario
    occupants = cfg.occupants(scenario)
    label = scenario or (cfg.raw["control"]["scenario"] if not cfg.raw["control"]["roster"] else "roster")
    basis = _load_basis(cfg)
    plan = _plan(cfg)
    model = cfg.model
    val_points = cfg.raw["pod"]["validation_points"]
    status = 0
    for method in methods:
        out = _paths(cfg)["experiments"] / f"{label}_{method.value}"
        out.mkdir(parents=True, exist_ok=True)
        simulator = sim.Simulator(model, seed=cfg.seed)
        try:
            trace = control.run_control_experiment(
                simulator, occupants, method, cfg.schedule, cfg.bounds, basis, plan, cfg.env_rest,
                predictor=_predictor(cfg, model), validation_indices=val_points,
                sensor_noise_std=float(cfg.raw["control"]["sensor_noise_std"]),
            )
        except control.ExperimentAborted as exc:
            trace = exc.trace
            print(f"{method.value}: aborted: {exc}", file=sys.stderr)
            status = 1
        control.write_trace(trace, out / "trace.csv")
        control.write_temperature_log(trace, out / "temperature_log.csv")
        control.write_field_dumps(trace, cfg.grid, out / "fields")
        if trace.points:
            final = trace.points[-1].group[method]
            sps = ", ".join(f"{s:g}" for s in trace.chosen_setpoints)
            print(f"{label} {method.value}: setpoints [{sps}] final group PMV {final:.3f} -> {out}")
        else:
            print(f"{label} {method.value}: no occupants, no control actions -> {out}")
    return status


def cmd_aggregate(cfg: CliConfig, args) -> int:
    if args.tsv_log:
        records = load_tsv_log(args.tsv_log)
        neutral, comfort_ratio = satisfaction_ratios([r.tsv for r in records])
        print(f"votes {len(records)}: TSV=0 {neutral:.1f}%, -1<=TSV<=+1 {comfort_ratio:.1f}%")
        for sid in sorted({r.subject_id for r in records}):
            n, c = satisfaction_ratios([r.tsv for r in records if r.subject_id == sid])
            print(f"  {sid}: TSV=0 {n:.1f}%, -1<=TSV<=+1 {c:.1f}%")
        return 0
    if not args.values:
        raise UsageError("aggregate needs PMV values or --tsv-log")
    methods = list(GroupMethod) if args.method == "all" else [GroupMethod.parse(args.method)]
    for m in methods:
        print(f"{m.value} {aggregate(args.values, m).value:.4f}")
    return 0


COMMANDS = {
    "gen-data": cmd_gen_data,
    "build-basis": cmd_build_basis,
    "validate": cmd_validate,
    "pmv-map": cmd_pmv_map,
    "run-experiment": cmd_run_experiment,
    "aggregate": cmd_aggregate,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML experiment configuration")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry, e.g. control.method=MAD")
    common.add_argument("--seed", type=int, help="shortcut for --set seed=N")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="gappycomfort", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("gen-data", "build-basis", "validate"):
        sub.add_parser(name, parents=[common])
    p = sub.add_parser("pmv-map", parents=[common])
    p.add_argument("--source", default="steady:26", help="steady:<sp> | preheat:<sp> | snapshot:<label> | file:<csv>")
    p.add_argument("--reconstruct", action="store_true", help="sample the field at the sensors and reconstruct it")
    p.add_argument("--met", type=float, default=1.2)
    p.add_argument("--clo", type=float, default=0.5)
    p.add_argument("--name", help="output file name inside output_dir")
    p = sub.add_parser("run-experiment", parents=[common])
    p.add_argument("--method", choices=["MEDIAN", "WA", "MAD", "all"])
    p.add_argument("--scenario", choices=["A", "B", "C", "D"])
    p = sub.add_parser("aggregate", parents=[common])
    p.add_argument("values", nargs="*", type=float)
    p.add_argument("--method", choices=["MEDIAN", "WA", "MAD", "all"], default="all")
    p.add_argument("--tsv-log")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = list(args.set) + ([f"seed={args.seed}"] if args.seed is not None else [])
    try:
        cfg = CliConfig.load(args.config, overrides)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, ArithmeticError, LookupError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
