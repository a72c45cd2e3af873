"""Experiment configuration: TOML file plus ``key=value`` overrides."""

from __future__ import annotations

import copy
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .comfort import CASES, EnvRest, OccupantState, load_roster
from .control import ControlSchedule, SetpointBounds
from .group_pmv import GroupMethod
from .sim import REFERENCE_HEATER_LABELS, RoomModel
from .snapshots import (
    Grid,
    ScenarioSpec,
    reference_scenarios,
    reference_validation_specs,
    tomllib,
)


class ConfigError(ValueError):
    pass


#: Occupant locations F5, G9, G16, E19 and the personal-factor case per
#: subject for the four multi-occupant scenarios.
OCCUPANT_LABELS = ("F5", "G9", "G16", "E19")
SCENARIO_CASES = {"A": (2, 3, 4, 1), "B": (1, 4, 1, 4), "C": (2, 1, 1, 4), "D": (3, 4, 4, 1)}

#: Internal online-validation points (rows E, columns 6, 12, 17).
DEFAULT_VALIDATION_POINTS = (93, 99, 104)

DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "output_dir": "out",
    "grid": {"rows": 9, "cols": 22, "row_spacing_m": 0.40, "col_spacing_m": 0.45},
    "model": {
        "heater_cells": list(REFERENCE_HEATER_LABELS),
        "plume_length_scale": 8.0,
        "plume_gain": 0.0,
        "time_constant": 300.0,
        "ambient_temp": 18.0,
        "leakage_rate": 1.0 / 900.0,
        "noise_std": 0.02,
    },
    "data": {
        "initial_temps": [22, 23],
        "setpoints": [22, 23, 24, 25, 26],
        "validation": sorted(s.label for s in reference_validation_specs()),
    },
    "pod": {
        "n_modes": 5,
        "reference": "mean",
        "n_meas": 12,
        "sensors": [],
        "validation_points": list(DEFAULT_VALIDATION_POINTS),
    },
    "comfort": {"rh": 30.0, "v_air": 0.15, "t_mrt": 21.0},
    "control": {
        "method": "WA",
        "scenario": "A",
        "roster": "",
        "predictor": "steady-state",
        "sensor_noise_std": 0.0,
        "schedule": {
            "initial_temp": 22.0,
            "initial_on_min": 10.0,
            "initial_off_min": 10.0,
            "preheat_temp": 23.0,
            "preheat_min": 10.0,
            "control1_min": 10.0,
            "control2_min": 25.0,
            "end_min": 40.0,
            "lookback_min": 2.0,
        },
        "bounds": {"min": 22.0, "max": 26.0, "step": 1.0},
    },
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {where!r} must be a table")
            out[key] = _merge(base[key], value, where + ".")
        else:
            out[key] = value
    return out


def _parse_value(text: str) -> Any:
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def parse_override(item: str) -> dict:
    """``"control.method=MAD"`` -> ``{"control": {"method": "MAD"}}``."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not key=value")
    key, text = item.split("=", 1)
    parts = key.strip().split(".")
    tree: dict = {parts[-1]: _parse_value(text.strip())}
    for p in reversed(parts[:-1]):
        tree = {p: tree}
    return tree


@dataclass(frozen=True)
class CliConfig:
    raw: dict
    base_dir: Path

    @classmethod
    def load(cls, path: str | Path | None = None, overrides: list[str] = ()) -> "CliConfig":
        raw = copy.deepcopy(DEFAULTS)
        base_dir = Path.cwd()
        if path is not None:
            path = Path(path)
            try:
                with path.open("rb") as f:
                    raw = _merge(raw, tomllib.load(f))
            except FileNotFoundError:
                raise ConfigError(f"config file {path} not found") from None
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from None
            base_dir = path.resolve().parent
        for item in overrides:
            raw = _merge(raw, parse_override(item))
        cfg = cls(raw, base_dir)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        """Resolve every section once so errors surface before any work starts."""
        try:
            self.grid
            self.model
            self.scenarios
            self.validation_specs
            self.env_rest
            self.schedule
            self.bounds
            self.method
            if self.raw["pod"]["n_modes"] < 1:
                raise ValueError("pod.n_modes must be >= 1")
            if self.raw["pod"]["reference"] not in ("mean", "zero"):
                raise ValueError("pod.reference must be 'mean' or 'zero'")
            if self.raw["control"]["predictor"] not in ("steady-state", "snapshot-mean"):
                raise ValueError("control.predictor must be 'steady-state' or 'snapshot-mean'")
            if self.raw["control"]["scenario"] not in SCENARIO_CASES and not self.raw["control"]["roster"]:
                raise ValueError(f"control.scenario must be one of {sorted(SCENARIO_CASES)}")
        except ConfigError:
            raise
        except (ValueError, TypeError, KeyError, IndexError) as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def output_dir(self) -> Path:
        p = Path(self.raw["output_dir"])
        return p if p.is_absolute() else self.base_dir / p

    @property
    def grid(self) -> Grid:
        return Grid.from_mapping(self.raw["grid"])

    @property
    def model(self) -> RoomModel:
        m = dict(self.raw["model"])
        grid = self.grid
        cells = [grid.from_label(c) if isinstance(c, str) else int(c) for c in m.pop("heater_cells")]
        return RoomModel(grid=grid, heater_cells=frozenset(cells), **{k: float(v) for k, v in m.items()})

    @property
    def scenarios(self) -> list[ScenarioSpec]:
        specs = reference_scenarios(self.raw["data"]["initial_temps"], self.raw["data"]["setpoints"])
        for s in specs:
            s.validate_reference()
        return specs

    @property
    def validation_specs(self) -> set[ScenarioSpec]:
        specs = {ScenarioSpec.parse(lab) for lab in self.raw["data"]["validation"]}
        unknown = specs - set(self.scenarios)
        if unknown:
            raise ValueError(f"validation scenarios not in the design: {sorted(s.label for s in unknown)}")
        return specs

    @property
    def env_rest(self) -> EnvRest:
        c = self.raw["comfort"]
        t_mrt = c["t_mrt"]
        if isinstance(t_mrt, str):
            if t_mrt != "equal-to-air":
                raise ValueError("comfort.t_mrt must be a number or 'equal-to-air'")
            t_mrt = None
        return EnvRest(rh=float(c["rh"]), v_air=float(c["v_air"]), t_mrt=None if t_mrt is None else float(t_mrt))

    @property
    def schedule(self) -> ControlSchedule:
        s = self.raw["control"]["schedule"]
        return ControlSchedule(
            initial_temp=float(s["initial_temp"]),
            initial_on=60.0 * s["initial_on_min"],
            initial_off=60.0 * s["initial_off_min"],
            preheat_temp=float(s["preheat_temp"]),
            preheat=60.0 * s["preheat_min"],
            control1_at=60.0 * s["control1_min"],
            control2_at=60.0 * s["control2_min"],
            end_at=60.0 * s["end_min"],
            lookback=60.0 * s["lookback_min"],
        )

    @property
    def bounds(self) -> SetpointBounds:
        b = self.raw["control"]["bounds"]
        return SetpointBounds(float(b["min"]), float(b["max"]), float(b["step"]))

    @property
    def method(self) -> GroupMethod:
        return GroupMethod.parse(self.raw["control"]["method"])

    def occupants(self, scenario: str | None = None) -> list[OccupantState]:
        ctl = self.raw["control"]
        if ctl["roster"] and scenario is None:
            path = Path(ctl["roster"])
            return load_roster(path if path.is_absolute() else self.base_dir / path, self.grid)
        return scenario_roster(scenario or ctl["scenario"], self.grid)


def scenario_roster(scenario: str, grid: Grid | None = None) -> list[OccupantState]:
    """Four subjects at F5, G9, G16, E19 with the scenario's personal-factor cases."""
    grid = grid or Grid()
    try:
        cases = SCENARIO_CASES[scenario.upper()]
    except KeyError:
        raise ValueError(f"unknown scenario {scenario!r}") from None
    return [
        OccupantState(f"S{i + 1}", grid.from_label(lab), CASES[c])
        for i, (lab, c) in enumerate(zip(OCCUPANT_LABELS, cases))
    ]


def reference_env() -> EnvRest:
    return CliConfig.load().env_rest
