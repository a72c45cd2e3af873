"""Grid geometry, scenario bookkeeping and snapshot matrices.

A snapshot matrix stores one full-field temperature state per column.  Every
column carries provenance ``(ScenarioSpec, t)`` where ``t`` is the index of the
moving-average window that produced it.  On disk this is the ``i-j-k-t`` label.
"""

from __future__ import annotations

import csv
import itertools
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

#: Decimal places used when writing temperatures.
DECIMALS = 4

#: Accepted temperature range for stored snapshots, in degC.
TEMP_SANITY = (0.0, 60.0)

REFERENCE_INITIAL_TEMPS = (22, 23)
REFERENCE_SETPOINTS = (22, 23, 24, 25, 26)

_LABEL_RE = re.compile(r"^(-?\d+(?:\.\d+)?)-(-?\d+(?:\.\d+)?)-(-?\d+(?:\.\d+)?)$")


class SnapshotFormatError(ValueError):
    """A snapshot file does not follow the expected CSV layout."""


class ProvenanceError(ValueError):
    """A column label is not of the form ``i-j-k-t``."""


class InsufficientDataError(ValueError):
    """Not enough samples to form the requested window."""


@dataclass(frozen=True)
class Grid:
    """Rectangular measurement grid.

    Flat indices run row-major: ``flat = row * cols + col``.  Row 0 is the top
    row; rows are lettered A, B, ... and columns numbered from 1 in labels such
    as ``"G9"``.
    """

    rows: int = 9
    cols: int = 22
    row_spacing: float = 0.40
    col_spacing: float = 0.45

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"grid needs rows, cols >= 1, got {self.rows}x{self.cols}")
        if self.row_spacing <= 0 or self.col_spacing <= 0:
            raise ValueError("grid spacings must be positive")

    @property
    def size(self) -> int:
        return self.rows * self.cols

    def flat_index(self, row: int, col: int) -> int:
        if not (0 <= row < self.rows and 0 <= col < self.cols):
            raise IndexError(f"({row}, {col}) outside {self.rows}x{self.cols} grid")
        return row * self.cols + col

    def row_col(self, index: int) -> tuple[int, int]:
        if not 0 <= index < self.size:
            raise IndexError(f"flat index {index} outside [0, {self.size})")
        return divmod(int(index), self.cols)

    def from_label(self, label: str) -> int:
        """Flat index of a label like ``"F5"`` (row letter, 1-based column)."""
        m = re.fullmatch(r"([A-Za-z])(\d+)", label.strip())
        if m is None:
            raise ValueError(f"bad grid label {label!r}")
        row = ord(m.group(1).upper()) - ord("A")
        return self.flat_index(row, int(m.group(2)) - 1)

    def label(self, index: int) -> str:
        r, c = self.row_col(index)
        return f"{chr(ord('A') + r)}{c + 1}"

    def coordinates(self) -> np.ndarray:
        """Physical ``(y, x)`` position of every grid point, shape ``(size, 2)``."""
        r, c = np.divmod(np.arange(self.size), self.cols)
        return np.column_stack([r * self.row_spacing, c * self.col_spacing])

    def boundary_walk(self) -> list[int]:
        """Perimeter indices clockwise from flat index 0.

        Top row left to right, right column downwards, bottom row right to
        left, left column upwards.  Each point appears once.
        """
        R, C = self.rows, self.cols
        if R == 1:
            return list(range(C))
        if C == 1:
            return [r * C for r in range(R)]
        walk = [self.flat_index(0, c) for c in range(C)]
        walk += [self.flat_index(r, C - 1) for r in range(1, R)]
        walk += [self.flat_index(R - 1, c) for c in range(C - 2, -1, -1)]
        walk += [self.flat_index(r, 0) for r in range(R - 2, 0, -1)]
        return walk

    @classmethod
    def from_mapping(cls, m: dict) -> "Grid":
        known = {"rows", "cols", "row_spacing_m", "col_spacing_m"}
        unknown = set(m) - known
        if unknown:
            raise ValueError(f"unknown grid keys: {sorted(unknown)}")
        return cls(
            rows=int(m.get("rows", 9)),
            cols=int(m.get("cols", 22)),
            row_spacing=float(m.get("row_spacing_m", 0.40)),
            col_spacing=float(m.get("col_spacing_m", 0.45)),
        )

    def to_mapping(self) -> dict:
        return {
            "rows": self.rows,
            "cols": self.cols,
            "row_spacing_m": self.row_spacing,
            "col_spacing_m": self.col_spacing,
        }


def load_grid(path: str | Path) -> Grid:
    """Read grid geometry from a TOML file (top level or a ``[grid]`` table)."""
    with open(path, "rb") as f:
        data = tomllib.load(f)
    return Grid.from_mapping(data.get("grid", data))


def _fmt_temp(value: float) -> str:
    return f"{value:g}" if float(value).is_integer() else repr(float(value))


@dataclass(frozen=True, order=True)
class ScenarioSpec:
    """One snapshot-acquisition scenario: initial, first and second setpoint."""

    initial_temp: float
    setpoint1: float
    setpoint2: float

    @property
    def label(self) -> str:
        return "-".join(_fmt_temp(v) for v in (self.initial_temp, self.setpoint1, self.setpoint2))

    @classmethod
    def parse(cls, label: str) -> "ScenarioSpec":
        m = _LABEL_RE.match(label.strip())
        if m is None:
            raise ProvenanceError(f"scenario label {label!r} is not of the form i-j-k")
        return cls(*(float(g) for g in m.groups()))

    def validate_reference(self) -> None:
        """Raise unless this spec lies on the reference 2 x 5 x 5 design."""
        if self.initial_temp not in REFERENCE_INITIAL_TEMPS:
            raise ValueError(f"initial temperature {self.initial_temp} not in {REFERENCE_INITIAL_TEMPS}")
        for sp in (self.setpoint1, self.setpoint2):
            if sp not in REFERENCE_SETPOINTS:
                raise ValueError(f"setpoint {sp} not in {REFERENCE_SETPOINTS}")


def reference_scenarios(
    initial_temps: Iterable[float] = REFERENCE_INITIAL_TEMPS,
    setpoints: Iterable[float] = REFERENCE_SETPOINTS,
) -> list[ScenarioSpec]:
    """Full factorial scenario design (50 specs for the reference values)."""
    setpoints = list(setpoints)
    return [
        ScenarioSpec(float(i), float(j), float(k))
        for i, j, k in itertools.product(initial_temps, setpoints, setpoints)
    ]


def reference_validation_specs() -> set[ScenarioSpec]:
    """The 8 held-out combinations: {22,23} x {23,25} x {23,25}."""
    return {
        ScenarioSpec(float(i), float(j), float(k))
        for i, j, k in itertools.product((22, 23), (23, 25), (23, 25))
    }


@dataclass(frozen=True)
class Provenance:
    spec: ScenarioSpec
    t: int

    @property
    def label(self) -> str:
        return f"{self.spec.label}-{self.t}"


@dataclass
class SnapshotMatrix:
    """Full-field states stored column-wise, shape ``(grid.size, n_columns)``."""

    grid: Grid
    data: np.ndarray
    provenance: list[Provenance] = field(default_factory=list)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim == 1:
            data = data.reshape(-1, 1) if data.size else np.empty((self.grid.size, 0))
        if data.shape[0] != self.grid.size:
            raise ValueError(
                f"snapshot columns have length {data.shape[0]}, grid has {self.grid.size} points"
            )
        if len(self.provenance) != data.shape[1]:
            raise ValueError("provenance length must match column count")
        if data.size:
            if not np.all(np.isfinite(data)):
                raise ValueError("snapshot data contain non-finite values")
            lo, hi = TEMP_SANITY
            if data.min() < lo or data.max() > hi:
                raise ValueError(f"snapshot temperatures outside sanity bound [{lo}, {hi}] degC")
        data.setflags(write=False)
        self.data = data

    @property
    def n_columns(self) -> int:
        return self.data.shape[1]

    @property
    def labels(self) -> list[str]:
        return [p.label for p in self.provenance]

    def scenarios(self) -> list[ScenarioSpec]:
        """Distinct scenarios in order of first appearance."""
        return list(dict.fromkeys(p.spec for p in self.provenance))

    def select(self, mask: Sequence[bool]) -> "SnapshotMatrix":
        mask = np.asarray(mask, dtype=bool)
        prov = [p for p, keep in zip(self.provenance, mask) if keep]
        return SnapshotMatrix(self.grid, self.data[:, mask], prov)

    def for_scenario(self, spec: ScenarioSpec) -> "SnapshotMatrix":
        return self.select([p.spec == spec for p in self.provenance])

    @classmethod
    def concatenate(cls, parts: Sequence["SnapshotMatrix"]) -> "SnapshotMatrix":
        if not parts:
            raise ValueError("nothing to concatenate")
        grid = parts[0].grid
        if any(p.grid != grid for p in parts):
            raise ValueError("cannot concatenate snapshots on different grids")
        data = np.hstack([p.data for p in parts])
        prov = [q for p in parts for q in p.provenance]
        return cls(grid, data, prov)


def _parse_label(label: str, lineno: int) -> Provenance:
    parts = label.strip().rsplit("-", 1)
    if len(parts) != 2:
        raise ProvenanceError(f"line {lineno}: label {label!r} is not of the form i-j-k-t")
    try:
        spec = ScenarioSpec.parse(parts[0])
        t = int(parts[1])
    except (ProvenanceError, ValueError) as exc:
        raise ProvenanceError(f"line {lineno}: label {label!r} is not of the form i-j-k-t") from exc
    return Provenance(spec, t)


def load_snapshots(path: str | Path, grid: Grid) -> SnapshotMatrix:
    """Read a snapshot CSV (``label,t,p000,...``); one row per column."""
    path = Path(path)
    n = grid.size
    columns, prov = [], []
    with path.open(newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise SnapshotFormatError(f"{path}: empty file") from None
        if header[:2] != ["label", "t"] or len(header) != n + 2:
            raise SnapshotFormatError(
                f"{path}: line 1: header must be label,t plus {n} point columns, got {len(header) - 2}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != n + 2:
                raise SnapshotFormatError(
                    f"{path}: line {lineno}: expected {n} values, got {len(row) - 2}"
                )
            p = _parse_label(row[0], lineno)
            try:
                t = int(row[1])
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: non-integer window index {row[1]!r}") from None
            if t != p.t:
                raise ProvenanceError(f"{path}: line {lineno}: t={t} disagrees with label {row[0]!r}")
            try:
                values = [float(v) for v in row[2:]]
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from None
            columns.append(values)
            prov.append(p)
    data = np.array(columns, dtype=float).T if columns else np.empty((n, 0))
    return SnapshotMatrix(grid, data, prov)


def save_snapshots(snapshots: SnapshotMatrix, path: str | Path) -> None:
    n = snapshots.grid.size
    width = max(3, len(str(n - 1)))
    header = ["label", "t"] + [f"p{i:0{width}d}" for i in range(n)]
    with Path(path).open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for j, p in enumerate(snapshots.provenance):
            col = snapshots.data[:, j]
            w.writerow([p.label, p.t] + [f"{v:.{DECIMALS}f}" for v in col])


def moving_window_average(
    series: np.ndarray,
    window: float = 60.0,
    stride: float = 2.0,
    dt: float = 2.0,
) -> np.ndarray:
    """Sliding means over equally spaced samples.

    ``series`` is time-ordered along axis 0 (extra axes are averaged
    independently, e.g. one column per sensor).  Window ``k`` covers samples
    in ``[t_k, t_k + window)``.  With ``N`` samples the output has
    ``floor((N*dt - window) / stride) + 1`` rows.
    """
    series = np.asarray(series, dtype=float)
    w = int(round(window / dt))
    s = int(round(stride / dt))
    if w < 1 or s < 1 or not math.isclose(w * dt, window) or not math.isclose(s * dt, stride):
        raise ValueError("window and stride must be positive multiples of dt")
    n = series.shape[0]
    if n < w:
        raise InsufficientDataError(f"{n} samples span {n * dt:g} s, shorter than the {window:g} s window")
    csum = np.concatenate([np.zeros((1,) + series.shape[1:]), np.cumsum(series, axis=0)])
    starts = np.arange(0, n - w + 1, s)
    return (csum[starts + w] - csum[starts]) / w


def split_train_validation(
    snapshots: SnapshotMatrix, validation_specs: Iterable[ScenarioSpec]
) -> tuple[SnapshotMatrix, SnapshotMatrix]:
    """Partition columns by scenario into (train, validation)."""
    validation_specs = set(validation_specs)
    present = {p.spec for p in snapshots.provenance}
    missing = validation_specs - present
    if missing:
        labels = ", ".join(sorted(s.label for s in missing))
        raise LookupError(f"validation scenarios not present in snapshots: {labels}")
    is_val = [p.spec in validation_specs for p in snapshots.provenance]
    train = snapshots.select([not v for v in is_val])
    val = snapshots.select(is_val)
    return train, val
