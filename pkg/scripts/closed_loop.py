"""Closed-loop setpoint control for the four occupant scenarios and three group methods.

Prints chosen setpoints and group PMV at each control point, and online
errors at the held-out internal sensors.

Usage: python scripts/closed_loop.py [--noise 0.02] [--sensor-noise 0.1] [--seed 0]
"""

import argparse

import numpy as np

from gappycomfort import gappy_pod, sim, snapshots
from gappycomfort.config import DEFAULT_VALIDATION_POINTS, CliConfig, scenario_roster
from gappycomfort.control import SteadyStatePredictor, run_control_experiment
from gappycomfort.group_pmv import GroupMethod


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--noise", type=float, default=0.02, help="process noise, degC per step")
    ap.add_argument("--sensor-noise", type=float, default=0.1)
    ap.add_argument("--modes", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    cfg = CliConfig.load()
    model = cfg.model.with_(noise_std=args.noise)
    data = sim.generate_snapshot_dataset(model, cfg.scenarios, seed=args.seed)
    train, _ = snapshots.split_train_validation(data, cfg.validation_specs)
    basis = gappy_pod.build_basis(train, args.modes)
    plan = gappy_pod.make_sampling_plan(cfg.grid, "boundary_uniform", 12)

    errs = []
    print(f"{'run':<10} {'setpoints':<12} group PMV at 10 / 25 / 40 min")
    for scen in "ABCD":
        for m in GroupMethod:
            trace = run_control_experiment(
                sim.Simulator(model, seed=args.seed), scenario_roster(scen), m, cfg.schedule, cfg.bounds, basis,
                plan, cfg.env_rest, predictor=SteadyStatePredictor(model.with_(noise_std=0.0)),
                validation_indices=DEFAULT_VALIDATION_POINTS, sensor_noise_std=args.sensor_noise,
            )
            for p in trace.points:
                errs.extend(np.abs(gappy_pod.pointwise_relative_error(p.validation_truth, p.validation_recon)))
            sps = ",".join(f"{s:g}" for s in trace.chosen_setpoints)
            g = " / ".join(f"{v:+.3f}" for v in trace.group_values())
            print(f"{scen + '/' + m.value:<10} {sps:<12} {g}")
    errs = np.array(errs)
    print(f"internal sensors {list(DEFAULT_VALIDATION_POINTS)}: mean |error| {errs.mean():.3f}%, "
          f"max {errs.max():.3f}% over {errs.size} samples")


if __name__ == "__main__":
    main()
