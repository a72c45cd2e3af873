"""Fanger PMV / PPD and spatial comfort maps.

The heat balance follows the ISO 7730 formulation with zero external work.
The clothing surface temperature is found by damped fixed-point iteration in
which the convective term is treated implicitly, which keeps the iteration a
contraction even at high air speed and heavy clothing.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .snapshots import Grid

MET_TO_WM2 = 58.15
CLO_TO_M2KW = 0.155
SIGMA_FCL = 3.96e-8  # emissivity * Stefan-Boltzmann * effective radiating fraction

TCL_TOLERANCE = 1e-5
MAX_ITERATIONS = 300
DAMPING = 0.5


class ComfortNumericError(ArithmeticError):
    """The surface-temperature iteration did not converge."""

    def __init__(self, message: str, last_iterate: float | None = None):
        super().__init__(message)
        self.last_iterate = last_iterate


class ComfortClass(str, enum.Enum):
    COMFORTABLE = "comfortable"
    WARM = "warm-discomfort"
    COOL = "cool-discomfort"


@dataclass(frozen=True)
class EnvironmentSample:
    t_air: float
    rh: float
    t_mrt: float
    v_air: float

    def __post_init__(self):
        if not -10.0 <= self.t_air <= 50.0:
            raise ValueError(f"t_air={self.t_air} outside [-10, 50] degC")
        if not 0.0 <= self.rh <= 100.0:
            raise ValueError(f"rh={self.rh} outside [0, 100] %")
        if self.v_air < 0:
            raise ValueError(f"v_air={self.v_air} must be >= 0")
        if not math.isfinite(self.t_mrt):
            raise ValueError("t_mrt must be finite")


@dataclass(frozen=True)
class PersonalFactors:
    met: float
    clo: float

    def __post_init__(self):
        if not 0.8 <= self.met <= 4.0:
            raise ValueError(f"met={self.met} outside [0.8, 4.0]")
        if not 0.0 <= self.clo <= 2.0:
            raise ValueError(f"clo={self.clo} outside [0, 2.0]")


#: Personal-factor cases used in the multi-occupant experiments.
CASES = {
    1: PersonalFactors(1.0, 0.5),
    2: PersonalFactors(1.2, 0.5),
    3: PersonalFactors(1.0, 1.0),
    4: PersonalFactors(1.2, 1.0),
}


@dataclass(frozen=True)
class OccupantState:
    id: str
    location: int
    personal: PersonalFactors

    def validate(self, grid: Grid) -> None:
        if not 0 <= self.location < grid.size:
            raise ValueError(f"occupant {self.id}: location {self.location} outside grid")


@dataclass(frozen=True)
class PmvResult:
    raw_pmv: float
    ppd: float

    @property
    def pmv(self) -> float:
        """PMV clipped to the 7-point scale."""
        return min(3.0, max(-3.0, self.raw_pmv))

    @property
    def comfort_class(self) -> ComfortClass:
        if -0.5 < self.raw_pmv < 0.5:
            return ComfortClass.COMFORTABLE
        return ComfortClass.WARM if self.raw_pmv >= 0.5 else ComfortClass.COOL


@dataclass(frozen=True)
class EnvRest:
    """Everything a comfort evaluation needs besides the local air temperature.

    ``t_mrt=None`` means the mean radiant temperature is taken equal to the
    local air temperature.
    """

    rh: float = 40.0
    v_air: float = 0.10
    t_mrt: float | None = None

    def at(self, t_air: float) -> EnvironmentSample:
        t_mrt = t_air if self.t_mrt is None else self.t_mrt
        return EnvironmentSample(float(t_air), self.rh, float(t_mrt), self.v_air)


def ppd(pmv_value: float) -> float:
    return 100.0 - 95.0 * math.exp(-0.03353 * pmv_value**4 - 0.2179 * pmv_value**2)


def vapour_pressure(t_air: float, rh: float) -> float:
    """Partial water vapour pressure in Pa."""
    return rh * 10.0 * math.exp(16.6536 - 4030.183 / (t_air + 235.0))


def clothing_area_factor(icl: float) -> float:
    return 1.0 + 1.29 * icl if icl <= 0.078 else 1.05 + 0.645 * icl


def clothing_surface_temperature(env: EnvironmentSample, personal: PersonalFactors) -> tuple[float, float]:
    """Return ``(t_cl, h_c)`` in degC and W/m2K."""
    mw = personal.met * MET_TO_WM2
    icl = CLO_TO_M2KW * personal.clo
    fcl = clothing_area_factor(icl)
    ta, tra = env.t_air, env.t_mrt + 273.0
    hcf = 12.1 * math.sqrt(env.v_air)
    core = 35.7 - 0.028 * mw

    tcl = ta + (35.5 - ta) / (3.5 * icl + 0.1)
    for _ in range(MAX_ITERATIONS):
        hc = max(hcf, 2.38 * abs(tcl - ta) ** 0.25)
        rad = SIGMA_FCL * fcl * ((tcl + 273.0) ** 4 - tra**4)
        new = (core - icl * rad + icl * fcl * hc * ta) / (1.0 + icl * fcl * hc)
        if abs(new - tcl) < TCL_TOLERANCE:
            tcl = new
            return tcl, max(hcf, 2.38 * abs(tcl - ta) ** 0.25)
        tcl = DAMPING * tcl + (1.0 - DAMPING) * new
    raise ComfortNumericError(
        f"clothing temperature did not converge in {MAX_ITERATIONS} iterations", last_iterate=tcl
    )


def pmv(env: EnvironmentSample, personal: PersonalFactors) -> PmvResult:
    m = personal.met * MET_TO_WM2
    mw = m  # external work is zero
    icl = CLO_TO_M2KW * personal.clo
    fcl = clothing_area_factor(icl)
    ta = env.t_air
    pa = vapour_pressure(ta, env.rh)
    tcl, hc = clothing_surface_temperature(env, personal)

    skin_diffusion = 3.05e-3 * (5733.0 - 6.99 * mw - pa)
    sweating = 0.42 * (mw - MET_TO_WM2)
    latent_resp = 1.7e-5 * m * (5867.0 - pa)
    dry_resp = 0.0014 * m * (34.0 - ta)
    radiation = SIGMA_FCL * fcl * ((tcl + 273.0) ** 4 - (env.t_mrt + 273.0) ** 4)
    convection = fcl * hc * (tcl - ta)
    load = mw - skin_diffusion - sweating - latent_resp - dry_resp - radiation - convection

    value = (0.303 * math.exp(-0.036 * m) + 0.028) * load
    return PmvResult(raw_pmv=value, ppd=min(100.0, ppd(value)))


@dataclass(frozen=True)
class SpatialPmv:
    results: list[PmvResult]

    @property
    def values(self) -> np.ndarray:
        return np.array([r.pmv for r in self.results])

    @property
    def min(self) -> float:
        return float(self.values.min())

    @property
    def max(self) -> float:
        return float(self.values.max())

    @property
    def spread(self) -> float:
        return self.max - self.min


def _pmv_at(index: int, t_air: float, env_rest: EnvRest, personal: PersonalFactors) -> PmvResult:
    try:
        return pmv(env_rest.at(t_air), personal)
    except (ComfortNumericError, ValueError) as exc:
        raise type(exc)(f"grid index {index}: {exc}") from exc


def spatial_pmv_map(field: np.ndarray, env_rest: EnvRest, personal: PersonalFactors) -> SpatialPmv:
    field = np.asarray(field, dtype=float)
    return SpatialPmv([_pmv_at(i, t, env_rest, personal) for i, t in enumerate(field)])


def occupant_pmv(
    occupants: Sequence[OccupantState], field: np.ndarray, env_rest: EnvRest
) -> list[tuple[str, PmvResult]]:
    field = np.asarray(field, dtype=float)
    out = []
    for occ in occupants:
        if not 0 <= occ.location < field.size:
            raise ValueError(f"occupant {occ.id}: location {occ.location} outside field of {field.size}")
        out.append((occ.id, _pmv_at(occ.location, field[occ.location], env_rest, occ.personal)))
    return out


def load_roster(path: str | Path, grid: Grid) -> list[OccupantState]:
    """Read ``id,row,col,met,clo`` rows."""
    occupants = []
    with Path(path).open(newline="") as f:
        reader = csv.DictReader(f)
        expected = ["id", "row", "col", "met", "clo"]
        if reader.fieldnames != expected:
            raise ValueError(f"{path}: roster header must be {','.join(expected)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                loc = grid.flat_index(int(row["row"]), int(row["col"]))
                pf = PersonalFactors(float(row["met"]), float(row["clo"]))
            except (ValueError, IndexError) as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from exc
            occupants.append(OccupantState(row["id"], loc, pf))
    ids = [o.id for o in occupants]
    if len(set(ids)) != len(ids):
        raise ValueError(f"{path}: duplicate occupant ids")
    return occupants


def save_roster(occupants: Iterable[OccupantState], grid: Grid, path: str | Path) -> None:
    with Path(path).open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["id", "row", "col", "met", "clo"])
        for o in occupants:
            r, c = grid.row_col(o.location)
            w.writerow([o.id, r, c, o.personal.met, o.personal.clo])


def write_pmv_map(path: str | Path, grid: Grid, field: np.ndarray, pmv_map: SpatialPmv) -> None:
    """Heatmap-ready export: ``row,col,t_air,pmv,ppd,class``."""
    with Path(path).open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["row", "col", "t_air", "pmv", "ppd", "class"])
        for i, (t, res) in enumerate(zip(field, pmv_map.results)):
            r, c = grid.row_col(i)
            w.writerow([r, c, f"{t:.4f}", f"{res.pmv:.4f}", f"{res.ppd:.2f}", res.comfort_class.value])
