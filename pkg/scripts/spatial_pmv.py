"""Spatial PMV over the room grid for steady-state and pre-heated fields.

Prints a coarse text map of PMV and the spread for each setpoint.

Usage: python scripts/spatial_pmv.py [--setpoints 22 24 26] [--preheat 23] [--met 1.2] [--clo 0.5]
"""

import argparse

import numpy as np

from gappycomfort import sim
from gappycomfort.cli import preheat_state
from gappycomfort.comfort import PersonalFactors, spatial_pmv_map
from gappycomfort.config import CliConfig


def show(name, field, cfg, personal):
    m = spatial_pmv_map(field, cfg.env_rest, personal)
    grid = m.values.reshape(cfg.grid.rows, cfg.grid.cols)
    classes = [r.comfort_class.value for r in m.results]
    counts = {c: classes.count(c) for c in sorted(set(classes))}
    print(f"{name}: PMV {m.min:+.3f}..{m.max:+.3f}, spread {m.spread:.3f}, {counts}")
    for row in grid:
        print("  " + " ".join(f"{v:+.1f}" for v in row))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--setpoints", type=float, nargs="+", default=[22.0, 24.0, 26.0])
    ap.add_argument("--preheat", type=float, default=23.0)
    ap.add_argument("--met", type=float, default=1.2)
    ap.add_argument("--clo", type=float, default=0.5)
    args = ap.parse_args()
    cfg = CliConfig.load()
    personal = PersonalFactors(args.met, args.clo)
    quiet = cfg.model.with_(noise_std=0.0)
    for sp in args.setpoints:
        show(f"steady {sp:g} degC", sim.steady_state(quiet, sp), cfg, personal)
    show(f"preheat {args.preheat:g} degC", preheat_state(quiet, args.preheat, cfg.schedule), cfg, personal)


if __name__ == "__main__":
    main()
