"""Surrogate living lab.

Each grid cell relaxes with a first-order lag toward a target temperature.
With the heater on, the target is an exponential plume around the heater
cells, normalized so the spatial mean of the target equals the setpoint.
With the heater off every cell drifts toward ambient at ``leakage_rate``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .snapshots import (
    Grid,
    Provenance,
    ScenarioSpec,
    SnapshotMatrix,
    moving_window_average,
)

SAMPLE_DT = 2.0

#: Heater cells H7, H8, I7, I8 on the reference 9 x 22 grid.
REFERENCE_HEATER_LABELS = ("H7", "H8", "I7", "I8")


class SimulationError(ArithmeticError):
    pass


def _default_heaters() -> frozenset[int]:
    g = Grid()
    return frozenset(g.from_label(lab) for lab in REFERENCE_HEATER_LABELS)


@dataclass(frozen=True)
class RoomModel:
    grid: Grid = field(default_factory=Grid)
    heater_cells: frozenset[int] = field(default_factory=_default_heaters)
    plume_length_scale: float = 8.0  # m
    time_constant: float = 300.0  # s, heater on
    ambient_temp: float = 18.0  # degC
    leakage_rate: float = 1.0 / 900.0  # 1/s, heater off
    noise_std: float = 0.02  # degC per cell per step
    # plume width grows as exp(plume_gain * (setpoint - ambient)); 0 keeps one fixed shape
    plume_gain: float = 0.0  # 1/degC

    def __post_init__(self):
        object.__setattr__(self, "heater_cells", frozenset(int(c) for c in self.heater_cells))
        if self.time_constant <= 0:
            raise ValueError("time_constant must be > 0")
        if self.leakage_rate < 0:
            raise ValueError("leakage_rate must be >= 0")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        if self.plume_length_scale <= 0:
            raise ValueError("plume_length_scale must be > 0")
        if not self.heater_cells:
            raise ValueError("heater_cells must be non-empty")
        if any(not 0 <= c < self.grid.size for c in self.heater_cells):
            raise ValueError("heater cell outside grid")

    def heater_distance(self) -> np.ndarray:
        """Distance in metres from every cell to its nearest heater cell."""
        xy = self.grid.coordinates()
        heaters = xy[sorted(self.heater_cells)]
        d = np.linalg.norm(xy[:, None, :] - heaters[None, :, :], axis=-1)
        return d.min(axis=1)

    def plume(self, setpoint: float | None = None) -> np.ndarray:
        """Kernel ``exp(-d / L)`` rescaled to unit spatial mean."""
        L = self.plume_length_scale
        if self.plume_gain and setpoint is not None:
            L *= np.exp(self.plume_gain * (setpoint - self.ambient_temp))
        g = np.exp(-self.heater_distance() / L)
        return g / g.mean()

    def target(self, setpoint: float | None) -> np.ndarray:
        if setpoint is None:
            return np.full(self.grid.size, self.ambient_temp)
        return self.ambient_temp + (setpoint - self.ambient_temp) * self.plume(setpoint)

    def rate(self, setpoint: float | None) -> float:
        return self.leakage_rate if setpoint is None else 1.0 / self.time_constant

    def with_(self, **changes) -> "RoomModel":
        return replace(self, **changes)


@dataclass(frozen=True)
class SimState:
    time: float
    field: np.ndarray
    setpoint: float | None = None


def initial_state(model: RoomModel, temp: float | None = None) -> SimState:
    t0 = model.ambient_temp if temp is None else temp
    return SimState(0.0, np.full(model.grid.size, float(t0)), None)


def step(
    state: SimState,
    dt: float,
    model: RoomModel,
    rng: np.random.Generator | None = None,
    target: np.ndarray | None = None,
) -> SimState:
    """Advance ``dt`` seconds under ``state.setpoint``.

    The lag is integrated exactly over the step, so the result does not
    depend on how a duration is cut into steps (noise excepted).
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if not np.all(np.isfinite(state.field)):
        raise SimulationError(f"non-finite simulator state at t={state.time}")
    if target is None:
        target = model.target(state.setpoint)
    decay = math.exp(-model.rate(state.setpoint) * dt)
    new = target + (state.field - target) * decay
    if model.noise_std > 0:
        if rng is None:
            raise ValueError("an rng is required when noise_std > 0")
        new = new + rng.normal(0.0, model.noise_std, size=new.shape)
    return SimState(state.time + dt, new, state.setpoint)


def steady_state(model: RoomModel, setpoint: float | None) -> np.ndarray:
    """Noise-free fixed point for a constant setpoint."""
    return model.target(setpoint)


class Simulator:
    """Mutable single-owner wrapper around model, state and noise stream."""

    def __init__(self, model: RoomModel, seed: int = 0, state: SimState | None = None):
        self.model = model
        self.rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
        self.sensor_rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
        self.state = state if state is not None else initial_state(model)
        self._targets: dict[float | None, np.ndarray] = {}

    @property
    def time(self) -> float:
        return self.state.time

    @property
    def field(self) -> np.ndarray:
        return self.state.field

    def command(self, setpoint: float | None) -> None:
        self.state = replace(self.state, setpoint=None if setpoint is None else float(setpoint))

    def advance(self, dt: float = SAMPLE_DT) -> SimState:
        sp = self.state.setpoint
        if sp not in self._targets:
            self._targets[sp] = self.model.target(sp)
        self.state = step(self.state, dt, self.model, self.rng, target=self._targets[sp])
        return self.state

    def run(self, duration: float, dt: float = SAMPLE_DT) -> None:
        n = int(round(duration / dt))
        for _ in range(n):
            self.advance(dt)

    def read(self, indices: Sequence[int], sensor_noise_std: float = 0.0) -> np.ndarray:
        return _sample(self.state.field, indices, sensor_noise_std, self.sensor_rng)


def _sample(field: np.ndarray, indices: Sequence[int], noise_std: float, rng) -> np.ndarray:
    idx = np.asarray(indices, dtype=int)
    if idx.size and (idx.min() < 0 or idx.max() >= field.size):
        raise IndexError("sensor index outside grid")
    values = field[idx].astype(float)
    if noise_std > 0:
        values = values + rng.normal(0.0, noise_std, size=values.shape)
    return values


def read_sensors(state: SimState, plan, sensor_noise_std: float = 0.0, seed: int = 0) -> np.ndarray:
    """Field values at ``plan.indices`` plus independent Gaussian noise."""
    indices = getattr(plan, "indices", plan)
    rng = np.random.default_rng(seed)
    return _sample(state.field, indices, sensor_noise_std, rng)


# Acquisition protocol, in minutes: initial on, off, setpoint 1, setpoint 2, off.
PROTOCOL_PHASES = (("initial", 10.0), ("off", 10.0), ("setpoint1", 15.0), ("setpoint2", 15.0), ("off", 10.0))
#: Ends (minutes) of the 2-minute key periods: before the first setpoint
#: change, before the second setpoint change, before the final switch-off.
KEY_PERIOD_ENDS = (20.0, 35.0, 50.0)
KEY_SPAN_S = 120.0
WINDOW_S = 60.0
WINDOWS_PER_PERIOD = 30


def scenario_schedule(spec: ScenarioSpec) -> list[tuple[float, float, float | None]]:
    """``(start_min, end_min, setpoint)`` segments of one acquisition run."""
    values = {"initial": spec.initial_temp, "off": None, "setpoint1": spec.setpoint1, "setpoint2": spec.setpoint2}
    out, t = [], 0.0
    for name, dur in PROTOCOL_PHASES:
        out.append((t, t + dur, values[name]))
        t += dur
    return out


def simulate_protocol(model: RoomModel, spec: ScenarioSpec, seed: int, dt: float = SAMPLE_DT) -> np.ndarray:
    """Fields at times ``0, dt, 2 dt, ...`` over one acquisition run, shape ``(steps, n)``."""
    sim = Simulator(model, seed=seed)
    frames = []
    for start, end, sp in scenario_schedule(spec):
        sim.command(sp)
        for _ in range(int(round((end - start) * 60.0 / dt))):
            frames.append(sim.field)
            sim.advance(dt)
    frames.append(sim.field)
    return np.array(frames)


def run_scenario(model: RoomModel, spec: ScenarioSpec, seed: int, dt: float = SAMPLE_DT) -> np.ndarray:
    """Simulate one scenario and return its 90 averaged columns, shape ``(n, 90)``."""
    frames = simulate_protocol(model, spec, seed, dt)
    n_span = int(round(KEY_SPAN_S / dt))
    blocks = []
    for end in KEY_PERIOD_ENDS:
        stop = int(round(end * 60.0 / dt))
        windows = moving_window_average(frames[stop - n_span : stop], window=WINDOW_S, stride=dt, dt=dt)
        blocks.append(windows[:WINDOWS_PER_PERIOD])
    return np.vstack(blocks).T


def generate_snapshot_dataset(
    model: RoomModel, specs: Iterable[ScenarioSpec], seed: int = 0, dt: float = SAMPLE_DT
) -> SnapshotMatrix:
    """Emulate the acquisition protocol for every scenario.

    Columns within a scenario are in key-period order then window order, and
    ``t`` counts 0..89 across the three periods.
    """
    cols, prov = [], []
    for n, spec in enumerate(specs):
        block = run_scenario(model, spec, seed=_scenario_seed(seed, n), dt=dt)
        cols.append(block)
        prov.extend(Provenance(spec, t) for t in range(block.shape[1]))
    return SnapshotMatrix(model.grid, np.hstack(cols), prov)


def _scenario_seed(seed: int, n: int) -> int:
    return int(np.random.SeedSequence([seed, 1000 + n]).generate_state(1)[0])
