"""Scenario configuration with JSON round-tripping and validation."""

from __future__ import annotations

import dataclasses
import enum
import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

from ..baseline import LaneChangeParams
from ..core import RoadLayout
from ..errors import ConfigError
from ..safety import SafetyParams


class Strategy(str, enum.Enum):
    UNCONTROLLED = "uncontrolled"
    PREEMPTIVE = "preemptive"


@dataclass(frozen=True)
class ErrorInjection:
    """Bounded tracking error applied to plan-following vehicles.

    Each step the offset moves by a uniform draw in ``[-pos_bound, pos_bound]``
    and is clamped to ``[-trk_bound, trk_bound]``.
    """

    enabled: bool = False
    pos_bound: float = 0.02
    trk_bound: float = 0.6


@dataclass(frozen=True)
class IdmSettings:
    s0: float = 2.0
    T: float = 1.0
    delta: float = 4.0


@dataclass(frozen=True)
class ControlLaw:
    """Gains of the connected following law used by controlled vehicles without a plan.

    The law tracks the desired speed with gain ``k_v`` and holds the safe
    spacing (plus ``h * v``) behind its leader with a critically damped
    spring when ``k_d = 2 * sqrt(k_p)``.
    """

    k_v: float = 0.4
    k_p: float = 0.45
    k_d: float = 2.0 * math.sqrt(0.45)
    h: float = 0.0


@dataclass(frozen=True)
class ScenarioConfig:
    mainline_flow: float = 1400.0
    ramp_flow: float = 600.0
    duration: float = 3600.0
    dt: float = 0.1
    seed: int = 1
    strategy: Strategy = Strategy.PREEMPTIVE
    cat_share: float = 0.2
    ramp_speed: float = 60.0 / 3.6
    a_r_default: float | None = None
    error_injection: ErrorInjection = field(default_factory=ErrorInjection)
    layout: RoadLayout = field(default_factory=RoadLayout)
    safety: SafetyParams = field(default_factory=SafetyParams)
    idm: IdmSettings = field(default_factory=IdmSettings)
    lane_change: LaneChangeParams = field(default_factory=LaneChangeParams)
    control: ControlLaw = field(default_factory=ControlLaw)
    min_headway: float = 1.0
    warmup: float = 300.0
    heavy_threshold: float = 1400.0
    candidate_limit: int = 5
    replan_interval: float = 1.0
    literal_gap_fix: bool = False

    def __post_init__(self):
        if isinstance(self.strategy, str) and not isinstance(self.strategy, Strategy):
            try:
                object.__setattr__(self, "strategy", Strategy(self.strategy.lower()))
            except ValueError as exc:
                raise ConfigError(f"unknown strategy {self.strategy!r}") from exc
        self.validate()

    def validate(self) -> None:
        if self.mainline_flow < 0 or self.ramp_flow < 0:
            raise ConfigError("flows must be non-negative")
        if self.duration < 0:
            raise ConfigError("duration must be non-negative")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if not 0.0 <= self.cat_share <= 1.0:
            raise ConfigError("cat_share must lie in [0, 1]")
        if not 0 < self.ramp_speed <= self.layout.v_lim_max:
            raise ConfigError("ramp_speed must lie in (0, v_lim_max]")
        if self.a_r_default is not None and self.a_r_default <= 0:
            raise ConfigError("a_r_default must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.candidate_limit < 1:
            raise ConfigError("candidate_limit must be at least 1")

    @property
    def steps(self) -> int:
        return int(round(self.duration / self.dt))

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        def conv(obj):
            if dataclasses.is_dataclass(obj):
                return {f.name: conv(getattr(obj, f.name)) for f in fields(obj) if f.init}
            if isinstance(obj, enum.Enum):
                return obj.value
            return obj

        return conv(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        nested = {
            "error_injection": ErrorInjection,
            "layout": RoadLayout,
            "safety": SafetyParams,
            "idm": IdmSettings,
            "lane_change": LaneChangeParams,
            "control": ControlLaw,
        }
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        try:
            for key, value in data.items():
                if key in nested and isinstance(value, dict):
                    sub = nested[key]
                    sub_known = {f.name for f in fields(sub) if f.init}
                    bad = set(value) - sub_known
                    if bad:
                        raise ConfigError(f"unknown keys in {key}: {sorted(bad)}")
                    kwargs[key] = sub(**value)
                else:
                    kwargs[key] = value
            return cls(**kwargs)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json_file(cls, path: str | Path) -> "ScenarioConfig":
        text = Path(path).read_text()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        return cls.from_dict(data)
