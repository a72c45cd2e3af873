"""Group-PMV setpoint control and the closed-loop experiment driver."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .comfort import EnvRest, OccupantState, PmvResult, occupant_pmv
from .gappy_pod import GappyReconstructor, PodBasis, SamplingPlan
from .group_pmv import GroupMethod, aggregate
from .sim import SAMPLE_DT, RoomModel, Simulator, steady_state
from .snapshots import Grid, InsufficientDataError, SnapshotMatrix

log = logging.getLogger(__name__)

Predictor = Callable[[float, np.ndarray], np.ndarray]


class ControlStepError(RuntimeError):
    def __init__(self, message: str, candidate: float | None = None):
        super().__init__(message)
        self.candidate = candidate


class ExperimentAborted(RuntimeError):
    """A control point failed; ``trace`` holds everything recorded before it."""

    def __init__(self, message: str, trace: "ControlTrace"):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class ControlSchedule:
    """Experiment timeline in seconds.

    ``control1_at``, ``control2_at`` and ``end_at`` count from the start of the
    thermal control period, which begins with the preheat.
    """

    initial_temp: float = 22.0
    initial_on: float = 600.0
    initial_off: float = 600.0
    preheat_temp: float = 23.0
    preheat: float = 600.0
    control1_at: float = 600.0
    control2_at: float = 1500.0
    end_at: float = 2400.0
    lookback: float = 120.0

    def __post_init__(self):
        if not 0 < self.control1_at < self.control2_at < self.end_at:
            raise ValueError("need 0 < control1_at < control2_at < end_at")
        intervals = (self.control1_at, self.control2_at - self.control1_at, self.end_at - self.control2_at)
        if not 0 < self.lookback <= min(intervals):
            raise ValueError("lookback must be positive and no longer than any control interval")
        if self.initial_on < 0 or self.initial_off < 0 or self.preheat < 0:
            raise ValueError("durations must be non-negative")

    @property
    def control_start(self) -> float:
        return self.initial_on + self.initial_off

    @property
    def control_points(self) -> tuple[float, float]:
        return (self.control1_at, self.control2_at)


@dataclass(frozen=True)
class SetpointBounds:
    min: float = 22.0
    max: float = 26.0
    step: float = 1.0

    def __post_init__(self):
        if self.min > self.max:
            raise ValueError("setpoint min exceeds max")
        if self.step <= 0:
            raise ValueError("setpoint step must be > 0")

    def candidates(self) -> list[float]:
        n = int(np.floor((self.max - self.min) / self.step + 1e-9))
        return [self.min + k * self.step for k in range(n + 1)]

    def clamp(self, value: float) -> float:
        return min(self.max, max(self.min, value))


class SteadyStatePredictor:
    """Noise-free steady-state field of the room model at each setpoint."""

    def __init__(self, model: RoomModel):
        self.model = model

    def __call__(self, setpoint: float, current_field: np.ndarray | None = None) -> np.ndarray:
        return steady_state(self.model, setpoint)


class SnapshotMeanPredictor:
    """Mean of training columns recorded at the end of a matching second setpoint."""

    def __init__(self, train: SnapshotMatrix, min_t: int = 60):
        self._fields: dict[float, np.ndarray] = {}
        for sp in {p.spec.setpoint2 for p in train.provenance}:
            mask = [p.spec.setpoint2 == sp and p.t >= min_t for p in train.provenance]
            if any(mask):
                self._fields[sp] = train.data[:, np.asarray(mask)].mean(axis=1)

    def __call__(self, setpoint: float, current_field: np.ndarray | None = None) -> np.ndarray:
        try:
            return self._fields[float(setpoint)]
        except KeyError:
            raise KeyError(f"no training snapshots with second setpoint {setpoint}") from None


def evaluate_candidates(
    current_field: np.ndarray,
    occupants: Sequence[OccupantState],
    env_rest: EnvRest,
    method: GroupMethod,
    bounds: SetpointBounds,
    predictor: Predictor,
) -> list[tuple[float, float]]:
    """``(candidate, predicted group PMV)`` for every candidate setpoint."""
    out = []
    for sp in bounds.candidates():
        try:
            predicted = predictor(sp, current_field)
            pmvs = [r.pmv for _, r in occupant_pmv(occupants, predicted, env_rest)]
        except Exception as exc:
            raise ControlStepError(f"prediction failed for candidate {sp}: {exc}", candidate=sp) from exc
        out.append((sp, aggregate(pmvs, method).value))
    return out


def select_setpoint(
    current_field: np.ndarray,
    occupants: Sequence[OccupantState],
    env_rest: EnvRest,
    method: GroupMethod,
    bounds: SetpointBounds,
    predictor: Predictor,
) -> float:
    """Candidate whose predicted group PMV is closest to zero; ties go to the lower setpoint."""
    best_sp, best = None, np.inf
    for sp, value in evaluate_candidates(current_field, occupants, env_rest, method, bounds, predictor):
        if abs(value) < best - 1e-12:
            best_sp, best = sp, abs(value)
    return bounds.clamp(best_sp)


@dataclass
class MeasurementLog:
    """Timestamped sensor readings; NaN marks a missing value."""

    n_sensors: int
    times: list[float] = field(default_factory=list)
    values: list[np.ndarray] = field(default_factory=list)

    def append(self, t: float, readings: np.ndarray) -> None:
        readings = np.asarray(readings, dtype=float)
        if readings.shape != (self.n_sensors,):
            raise ValueError(f"expected {self.n_sensors} readings, got {readings.shape}")
        self.times.append(float(t))
        self.values.append(readings)


def trailing_average_measurements(log: MeasurementLog, at: float, lookback: float) -> np.ndarray:
    """Per-sensor mean over readings with ``at - lookback <= t < at``."""
    times = np.asarray(log.times)
    sel = (times >= at - lookback - 1e-9) & (times < at - 1e-9)
    if not sel.any():
        raise InsufficientDataError(f"no readings in [{at - lookback:g}, {at:g})")
    window = np.vstack([log.values[i] for i in np.flatnonzero(sel)])
    counts = np.isfinite(window).sum(axis=0)
    silent = np.flatnonzero(counts == 0)
    if silent.size:
        raise InsufficientDataError(f"sensor {int(silent[0])} has no readings in [{at - lookback:g}, {at:g})")
    return np.nanmean(window, axis=0)


@dataclass
class ControlPoint:
    time: float  # seconds since the start of the control period
    measurements: np.ndarray
    reconstructed: np.ndarray
    true_field: np.ndarray
    individual: list[tuple[str, PmvResult]]
    group: dict[GroupMethod, float]
    setpoint: float | None  # None at the end-of-control evaluation
    validation_truth: np.ndarray = field(default_factory=lambda: np.empty(0))
    validation_recon: np.ndarray = field(default_factory=lambda: np.empty(0))


@dataclass
class ControlTrace:
    method: GroupMethod
    points: list[ControlPoint] = field(default_factory=list)
    times: list[float] = field(default_factory=list)
    setpoints: list[float | None] = field(default_factory=list)
    mean_temps: list[float] = field(default_factory=list)

    @property
    def chosen_setpoints(self) -> list[float]:
        return [p.setpoint for p in self.points if p.setpoint is not None]

    def group_values(self, method: GroupMethod | None = None) -> list[float]:
        m = method or self.method
        return [p.group[m] for p in self.points]


def run_control_experiment(
    sim: Simulator,
    occupants: Sequence[OccupantState],
    method: GroupMethod,
    schedule: ControlSchedule,
    bounds: SetpointBounds,
    basis: PodBasis,
    plan: SamplingPlan,
    env_rest: EnvRest,
    predictor: Predictor | None = None,
    validation_indices: Sequence[int] = (),
    sensor_noise_std: float = 0.0,
    dt: float = SAMPLE_DT,
) -> ControlTrace:
    """Run the full experiment timeline against ``sim`` and return the trace."""
    grid = sim.model.grid
    if basis.n_space != grid.size:
        raise ValueError("basis dimension does not match the simulator grid")
    for occ in occupants:
        occ.validate(grid)
    predictor = predictor or SteadyStatePredictor(sim.model)
    recon = GappyReconstructor(basis, plan)
    trace = ControlTrace(method=method)

    sim.command(schedule.initial_temp)
    sim.run(schedule.initial_on, dt)
    sim.command(None)
    sim.run(schedule.initial_off, dt)

    t0 = sim.time
    sensors = list(plan.indices) + list(validation_indices)
    mlog = MeasurementLog(len(sensors))
    occupied = len(occupants) > 0
    sim.command(schedule.preheat_temp)
    evaluations = [schedule.control1_at, schedule.control2_at, schedule.end_at] if occupied else []
    n_ticks = int(round(schedule.end_at / dt))
    due = {int(round(t / dt)): t for t in evaluations}

    for k in range(n_ticks + 1):
        t_rel = k * dt
        if k in due:
            at = due[k]
            try:
                point = _control_point(
                    at, mlog, schedule, recon, occupants, env_rest, method, bounds,
                    predictor, sim.field, validation_indices, act=at != schedule.end_at,
                )
            except Exception as exc:
                raise ExperimentAborted(f"control point at {at / 60:g} min failed: {exc}", trace) from exc
            trace.points.append(point)
            if point.setpoint is not None:
                sim.command(point.setpoint)
                log.info("t=%g min: %s group PMV %.3f -> setpoint %g", at / 60, method.value,
                         point.group[method], point.setpoint)
        trace.times.append(t_rel)
        trace.setpoints.append(sim.state.setpoint)
        trace.mean_temps.append(float(sim.field.mean()))
        if k == n_ticks:
            break
        mlog.append(t_rel, sim.read(sensors, sensor_noise_std))
        sim.advance(dt)
    assert abs(sim.time - t0 - schedule.end_at) < 1e-6
    return trace


def _control_point(
    at, mlog, schedule, recon, occupants, env_rest, method, bounds, predictor, true_field,
    validation_indices, act,
) -> ControlPoint:
    averaged = trailing_average_measurements(mlog, at, schedule.lookback)
    n_meas = recon.plan.n_meas
    meas, val_truth = averaged[:n_meas], averaged[n_meas:]
    r = recon(meas)
    individual = occupant_pmv(occupants, r.field, env_rest)
    pmvs = [res.pmv for _, res in individual]
    group = {m: aggregate(pmvs, m).value for m in GroupMethod}
    sp = select_setpoint(r.field, occupants, env_rest, method, bounds, predictor) if act else None
    return ControlPoint(
        time=at,
        measurements=meas,
        reconstructed=r.field,
        true_field=np.array(true_field, copy=True),
        individual=individual,
        group=group,
        setpoint=sp,
        validation_truth=val_truth,
        validation_recon=r.field[list(validation_indices)],
    )


def write_trace(trace: ControlTrace, path: str | Path) -> None:
    """One row per control point: ``t,setpoint,group_pmv,method,pmv_<id>...``.

    ``t`` is in minutes from the start of the control period; the end-of-control
    row has an empty setpoint.
    """
    ids = [oid for oid, _ in trace.points[0].individual] if trace.points else []
    with Path(path).open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["t", "setpoint", "group_pmv", "method"] + [f"pmv_{i}" for i in ids])
        for p in trace.points:
            sp = "" if p.setpoint is None else f"{p.setpoint:g}"
            w.writerow(
                [f"{p.time / 60:g}", sp, f"{p.group[trace.method]:.4f}", trace.method.value]
                + [f"{r.pmv:.4f}" for _, r in p.individual]
            )


def write_temperature_log(trace: ControlTrace, path: str | Path) -> None:
    with Path(path).open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["t_s", "setpoint", "mean_temp"])
        for t, sp, temp in zip(trace.times, trace.setpoints, trace.mean_temps):
            w.writerow([f"{t:g}", "off" if sp is None else f"{sp:g}", f"{temp:.4f}"])


def write_field_dumps(trace: ControlTrace, grid: Grid, directory: str | Path) -> list[Path]:
    """Per-control-point ``row,col,reconstructed,truth`` CSVs for heatmaps."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    written = []
    for p in trace.points:
        path = d / f"field_t{p.time / 60:05.1f}.csv"
        with path.open("w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["row", "col", "reconstructed", "truth"])
            for i, (rv, tv) in enumerate(zip(p.reconstructed, p.true_field)):
                r, c = grid.row_col(i)
                w.writerow([r, c, f"{rv:.4f}", f"{tv:.4f}"])
        written.append(path)
    return written
