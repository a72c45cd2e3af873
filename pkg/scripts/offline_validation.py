"""Offline reconstruction accuracy on the 42/8 scenario split.

Sweeps process noise and mode count; prints mean and max errors per setting.

Usage: python scripts/offline_validation.py [--noise 0 0.02 0.1] [--modes 3 5 8] [--sensors 12]
"""

import argparse
import time

import numpy as np

from gappycomfort import gappy_pod, sim, snapshots
from gappycomfort.config import CliConfig


def run(cfg, noise, n_modes, n_sensors, seed):
    data = sim.generate_snapshot_dataset(cfg.model.with_(noise_std=noise), cfg.scenarios, seed=seed)
    train, val = snapshots.split_train_validation(data, cfg.validation_specs)
    basis = gappy_pod.build_basis(train, n_modes)
    plan = gappy_pod.make_sampling_plan(cfg.grid, "boundary_uniform", n_sensors)
    rec = gappy_pod.GappyReconstructor(basis, plan)
    return np.array([gappy_pod.reconstruction_error(val.data[:, j], rec(plan.sample(val.data[:, j])).field)
                     for j in range(val.n_columns)])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--noise", type=float, nargs="+", default=[0.0, 0.02, 0.1])
    ap.add_argument("--modes", type=int, nargs="+", default=[3, 5, 6])
    ap.add_argument("--sensors", type=int, default=12)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    cfg = CliConfig.load()
    print(f"{'noise':>6} {'modes':>5} {'mean %':>9} {'max %':>9} {'time s':>7}")
    for noise in args.noise:
        for k in args.modes:
            if k > args.sensors // 2:
                print(f"{noise:6.3f} {k:5d}   skipped: more than half the sensor count")
                continue
            t0 = time.perf_counter()
            e = run(cfg, noise, k, args.sensors, args.seed)
            print(f"{noise:6.3f} {k:5d} {e.mean():9.4f} {e.max():9.4f} {time.perf_counter() - t0:7.2f}")


if __name__ == "__main__":
    main()
