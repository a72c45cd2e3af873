"""POD basis construction and Gappy POD reconstruction.

A field is approximated as ``x ~ x_ref + Phi @ a``.  Given values at a subset
of grid points, ``a`` is the least-squares fit of the sampled rows of ``Phi``
to the sampled, reference-subtracted measurements.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

from .snapshots import Grid, SnapshotMatrix

PINV_RCOND = 1e-10
MAX_CONDITION = 1e12


class IllPosedSamplingError(np.linalg.LinAlgError):
    """The sampled basis ``Z^T Phi`` is (numerically) rank deficient."""


@dataclass(frozen=True)
class PodBasis:
    reference: np.ndarray
    modes: np.ndarray
    singular_values: np.ndarray

    def __post_init__(self):
        for name in ("reference", "modes", "singular_values"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.modes.ndim != 2 or self.modes.shape[0] != self.reference.size:
            raise ValueError("modes must have shape (n_space, n_modes) matching the reference")
        if self.singular_values.size != self.modes.shape[1]:
            raise ValueError("one singular value per mode is required")
        if self.n_modes < 1:
            raise ValueError("a basis needs at least one mode")

    @property
    def n_modes(self) -> int:
        return self.modes.shape[1]

    @property
    def n_space(self) -> int:
        return self.modes.shape[0]

    def truncate(self, n_modes: int) -> "PodBasis":
        if not 1 <= n_modes <= self.n_modes:
            raise ValueError(f"cannot truncate {self.n_modes} modes to {n_modes}")
        return PodBasis(self.reference, self.modes[:, :n_modes], self.singular_values[:n_modes])

    def expand(self, coefficients: np.ndarray) -> np.ndarray:
        return self.reference + self.modes @ np.asarray(coefficients, dtype=float)


def build_basis(
    train: SnapshotMatrix | np.ndarray,
    n_modes: int,
    reference_mode: Literal["mean", "zero"] = "mean",
) -> PodBasis:
    """Leading left singular vectors of the reference-subtracted snapshots."""
    X = train.data if isinstance(train, SnapshotMatrix) else np.asarray(train, dtype=float)
    if X.ndim != 2 or X.shape[1] == 0:
        raise ValueError("training snapshots must be a non-empty 2-D array")
    n_space, n_snap = X.shape
    if not 1 <= n_modes <= min(n_space, n_snap):
        raise ValueError(f"n_modes={n_modes} must lie in [1, {min(n_space, n_snap)}]")
    if not np.all(np.isfinite(X)):
        raise FloatingPointError("training snapshots contain non-finite values")
    if reference_mode == "mean":
        ref = X.mean(axis=1)
    elif reference_mode == "zero":
        ref = np.zeros(n_space)
    else:
        raise ValueError(f"unknown reference_mode {reference_mode!r}")
    U, s, _ = np.linalg.svd(X - ref[:, None], full_matrices=False)
    return PodBasis(ref, U[:, :n_modes], s[:n_modes])


@dataclass(frozen=True)
class SamplingPlan:
    indices: tuple[int, ...]

    @property
    def n_meas(self) -> int:
        return len(self.indices)

    def sample(self, field: np.ndarray) -> np.ndarray:
        return np.asarray(field, dtype=float)[list(self.indices)]


def _validate_indices(indices: Sequence[int], size: int) -> tuple[int, ...]:
    out = tuple(int(i) for i in indices)
    if len(set(out)) != len(out):
        raise ValueError(f"duplicate sampling indices in {list(out)}")
    bad = [i for i in out if not 0 <= i < size]
    if bad:
        raise ValueError(f"sampling indices {bad} outside [0, {size})")
    return out


def make_sampling_plan(
    grid: Grid,
    strategy: Literal["boundary_uniform", "explicit"] = "boundary_uniform",
    n_meas: int | None = None,
    indices: Sequence[int] | None = None,
) -> SamplingPlan:
    """Choose measurement locations.

    ``boundary_uniform`` spreads ``n_meas`` points evenly along the clockwise
    perimeter walk starting at flat index 0: point ``k`` sits at walk position
    ``round(k * P / n_meas)`` for a perimeter of ``P`` cells.
    """
    if strategy == "explicit":
        if indices is None:
            raise ValueError("explicit strategy needs an index list")
        plan = _validate_indices(indices, grid.size)
        if n_meas is not None and n_meas != len(plan):
            raise ValueError(f"n_meas={n_meas} disagrees with {len(plan)} explicit indices")
        return SamplingPlan(plan)
    if strategy != "boundary_uniform":
        raise ValueError(f"unknown strategy {strategy!r}")
    walk = grid.boundary_walk()
    if n_meas is None or not 1 <= n_meas <= len(walk):
        raise ValueError(f"n_meas must lie in [1, {len(walk)}] boundary points")
    # floor(x + 1/2) keeps the placement independent of banker's rounding
    pos = [int(np.floor(k * len(walk) / n_meas + 0.5)) % len(walk) for k in range(n_meas)]
    return SamplingPlan(tuple(walk[p] for p in pos))


@dataclass(frozen=True)
class Reconstruction:
    field: np.ndarray
    coefficients: np.ndarray
    residual_norm: float


@dataclass(frozen=True)
class GappyReconstructor:
    """A (basis, plan) pair with the sampled pseudo-inverse precomputed."""

    basis: PodBasis
    plan: SamplingPlan
    pinv: np.ndarray = field(init=False, repr=False)
    condition_number: float = field(init=False)

    def __post_init__(self):
        if any(not 0 <= i < self.basis.n_space for i in self.plan.indices):
            raise ValueError("sampling plan does not fit the basis dimension")
        if self.basis.n_modes > self.plan.n_meas // 2:
            raise ValueError(
                f"{self.basis.n_modes} modes need at least {2 * self.basis.n_modes} measurements, "
                f"plan has {self.plan.n_meas}"
            )
        sampled = self.basis.modes[list(self.plan.indices), :]
        U, s, Vt = np.linalg.svd(sampled, full_matrices=False)
        cond = np.inf if s[-1] == 0 else s[0] / s[-1]
        if not cond <= MAX_CONDITION:
            raise IllPosedSamplingError(
                f"sampled basis has condition number {cond:.3g} > {MAX_CONDITION:.0e}"
            )
        keep = s > PINV_RCOND * s[0]
        pinv = (Vt[keep].T / s[keep]) @ U[:, keep].T
        pinv.setflags(write=False)
        object.__setattr__(self, "pinv", pinv)
        object.__setattr__(self, "condition_number", float(cond))

    def __call__(self, measurements: np.ndarray) -> Reconstruction:
        y = np.asarray(measurements, dtype=float)
        if y.shape != (self.plan.n_meas,):
            raise ValueError(f"expected {self.plan.n_meas} measurements, got shape {y.shape}")
        if not np.all(np.isfinite(y)):
            raise ValueError("measurements must be finite")
        ref_s = self.basis.reference[list(self.plan.indices)]
        coef = self.pinv @ (y - ref_s)
        recon = self.basis.expand(coef)
        resid = float(np.linalg.norm(y - recon[list(self.plan.indices)]))
        return Reconstruction(recon, coef, resid)


def reconstruct(basis: PodBasis, plan: SamplingPlan, measurements: np.ndarray) -> Reconstruction:
    """One-shot reconstruction; build a :class:`GappyReconstructor` to reuse the pseudo-inverse."""
    return GappyReconstructor(basis, plan)(measurements)


def reconstruction_error(truth: np.ndarray, recon: np.ndarray) -> float:
    """Squared-norm relative error in percent: ``|x - x~|^2 / |x|^2 * 100``."""
    truth = np.asarray(truth, dtype=float)
    recon = np.asarray(recon, dtype=float)
    if truth.shape != recon.shape:
        raise ValueError(f"shape mismatch {truth.shape} vs {recon.shape}")
    denom = float(truth @ truth)
    if denom == 0:
        raise ZeroDivisionError("truth field has zero norm")
    diff = truth - recon
    return float(diff @ diff) / denom * 100.0


def pointwise_relative_error(measured, reconstructed):
    """Signed ``(measured - reconstructed) / measured * 100``; works on arrays."""
    measured = np.asarray(measured, dtype=float)
    if np.any(measured == 0):
        raise ZeroDivisionError("measured value is zero")
    out = (measured - np.asarray(reconstructed, dtype=float)) / measured * 100.0
    return float(out) if out.ndim == 0 else out


def save_basis(basis: PodBasis, directory: str | Path, grid: Grid) -> None:
    """Write ``reference.csv``, ``modes.csv``, ``singular_values.csv`` and ``manifest.toml``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    np.savetxt(d / "reference.csv", basis.reference, delimiter=",", fmt="%.17g")
    np.savetxt(d / "modes.csv", basis.modes, delimiter=",", fmt="%.17g")
    np.savetxt(d / "singular_values.csv", basis.singular_values, delimiter=",", fmt="%.17g")
    lines = [
        f"n_modes = {basis.n_modes}",
        f"n_space = {basis.n_space}",
        "",
        "[grid]",
    ] + [f"{k} = {v}" for k, v in grid.to_mapping().items()]
    (d / "manifest.toml").write_text("\n".join(lines) + "\n")


def load_basis(directory: str | Path) -> tuple[PodBasis, Grid]:
    from .snapshots import tomllib

    d = Path(directory)
    manifest = d / "manifest.toml"
    if not manifest.exists():
        raise FileNotFoundError(f"no basis manifest in {d}")
    with manifest.open("rb") as f:
        meta = tomllib.load(f)
    grid = Grid.from_mapping(meta["grid"])
    ref = np.loadtxt(d / "reference.csv", delimiter=",", ndmin=1)
    modes = np.loadtxt(d / "modes.csv", delimiter=",", ndmin=2)
    sv = np.loadtxt(d / "singular_values.csv", delimiter=",", ndmin=1)
    if modes.shape != (meta["n_space"], meta["n_modes"]):
        # a single-mode basis is written as one value per line
        modes = modes.reshape(meta["n_space"], meta["n_modes"])
    if ref.size != grid.size:
        raise ValueError("basis reference does not match manifest grid")
    return PodBasis(ref, modes, sv), grid


def write_error_report(path: str | Path, labels: Sequence[str], errors: Sequence[float]) -> dict:
    """Per-column errors in label order followed by a summary block."""
    errors = np.asarray(errors, dtype=float)
    i_min, i_max = int(np.argmin(errors)), int(np.argmax(errors))
    summary = {
        "mean": float(errors.mean()),
        "min": float(errors[i_min]),
        "min_label": labels[i_min],
        "max": float(errors[i_max]),
        "max_label": labels[i_max],
    }
    with Path(path).open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["label", "error_pct"])
        for lab, e in zip(labels, errors):
            w.writerow([lab, f"{e:.6f}"])
        w.writerow([])
        w.writerow(["summary", "value", "label"])
        w.writerow(["mean", f"{summary['mean']:.6f}", ""])
        w.writerow(["min", f"{summary['min']:.6f}", summary["min_label"]])
        w.writerow(["max", f"{summary['max']:.6f}", summary["max_label"]])
    return summary
