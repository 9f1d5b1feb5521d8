"""Scenario configuration: every knob of a run, with JSON load/dump.

A scenario fully determines a run together with its seed. Loading from JSON
rejects unknown keys with the offending key path so typos never silently
fall back to defaults. `to_dict` materializes *all* values, defaults
included, which is what run summaries embed so each result file is
self-describing.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, fields
from typing import Any

from .trust import BehaviorWeights, DomainError, TrustWeights

METHODS = ("dtsam", "cte", "sbst")
TOPOLOGIES = ("mesh", "star")
ONSET_MODES = ("staggered", "immediate")
AGGREGATIONS = ("trust_weighted", "fedavg")


class ConfigError(ValueError):
    """A scenario value or key was rejected; the message names the key path."""


@dataclass(frozen=True)
class TrustParams:
    alpha: float = 0.5
    beta: float = 0.3
    gamma: float = 0.2
    w1: float = 0.6
    w2: float = 0.4
    rt_max_ms: float = 100.0
    rogue_threshold: float = 0.4
    initial_trust: float = 0.5
    neutral_behavior: float = 0.5

    def trust_weights(self) -> TrustWeights:
        return TrustWeights(self.alpha, self.beta, self.gamma)

    def behavior_weights(self) -> BehaviorWeights:
        return BehaviorWeights(self.w1, self.w2)


@dataclass(frozen=True)
class ProfileParams:
    """Behavior envelopes; the rogue side is the scenario's threat model."""

    honest_pdr: tuple[float, float] = (0.85, 1.0)
    honest_rt_ms: tuple[float, float] = (5.0, 60.0)
    honest_probes: tuple[int, int] = (40, 60)
    rogue_pdr: tuple[float, float] = (0.2, 0.6)
    rogue_rt_ms: tuple[float, float] = (60.0, 200.0)
    rogue_probes: tuple[int, int] = (15, 45)
    poison_updates: bool = True
    onset_mode: str = "staggered"
    onset_span_fraction: float = 0.7


@dataclass(frozen=True)
class EnergyParams:
    capacity: float = 100.0
    base_drain: float = 0.5
    transmission_cost_per_kb: float = 0.001
    validation_cost: float = 2.0
    validation_cost_per_kb: float = 0.005
    central_upload_cost: float = 0.6
    units_to_joules: float = 1.0


@dataclass(frozen=True)
class CommParams:
    envelope_bytes: int = 256
    record_wire_bytes: int = 64  # raw record shipped to the central server
    packed_record_bytes: int = 16  # record as packed on the static chain
    report_entry_bytes: int = 24  # per-subject aggregate in a trust report


@dataclass(frozen=True)
class FlParams:
    learning_rate: float = 0.8
    epochs: int = 30
    class_balance: bool = True
    epsilon: float = 0.01
    max_fl_rounds: int = 50
    convergence_warmup_rounds: int = 8  # rounds before the stop rule may fire
    aggregation: str = "trust_weighted"
    holdout_stride: int = 5  # every k-th audited sample goes to validation


@dataclass(frozen=True)
class DetectionParams:
    """How each method turns its evidence into per-UAV rogue flags."""

    model_flag_threshold: float = 0.6  # mean rogue probability the FL arm needs
    central_flag_threshold: float = 0.5
    flag_window: int = 5  # rounds of observations behind a flag decision
    flag_memory: int = 3  # a raised flag persists this many rounds
    central_uplink_lag: int = 4  # rounds before uploads reach the server
    static_pdr_threshold: float = 0.7
    eval_window_fraction: float = 0.5  # trailing share of rounds in the scalars


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "desk-default"
    uav_count: int = 20
    rogue_fraction: float = 0.2
    user_count: int = 40
    area_side_km: float = 2.0
    topology: str = "mesh"
    mesh_radius_km: float = 0.8
    star_hub: int = 0
    rounds: int = 100
    max_speed_km_per_round: float = 0.15
    audit_delay: int = 2
    method: str = "dtsam"
    seed: int = 0
    export_trace: bool = False
    trust: TrustParams = field(default_factory=TrustParams)
    profiles: ProfileParams = field(default_factory=ProfileParams)
    energy: EnergyParams = field(default_factory=EnergyParams)
    comm: CommParams = field(default_factory=CommParams)
    fl: FlParams = field(default_factory=FlParams)
    detection: DetectionParams = field(default_factory=DetectionParams)

    def __post_init__(self):
        if not 0.0 <= self.rogue_fraction < 1.0:
            raise ConfigError(f"rogue_fraction={self.rogue_fraction!r} outside [0, 1)")
        if self.uav_count < 1:
            raise ConfigError(f"uav_count={self.uav_count!r} must be >= 1")
        if self.rounds < 1:
            raise ConfigError(f"rounds={self.rounds!r} must be >= 1")
        if self.area_side_km <= 0:
            raise ConfigError(f"area_side_km={self.area_side_km!r} must be > 0")
        if self.topology not in TOPOLOGIES:
            raise ConfigError(f"topology={self.topology!r} not one of {TOPOLOGIES}")
        if self.method not in METHODS:
            raise ConfigError(f"method={self.method!r} not one of {METHODS}")
        if self.profiles.onset_mode not in ONSET_MODES:
            raise ConfigError(
                f"profiles.onset_mode={self.profiles.onset_mode!r} not one of {ONSET_MODES}"
            )
        if self.fl.aggregation not in AGGREGATIONS:
            raise ConfigError(
                f"fl.aggregation={self.fl.aggregation!r} not one of {AGGREGATIONS}"
            )
        if self.audit_delay < 0:
            raise ConfigError(f"audit_delay={self.audit_delay!r} negative")
        try:
            self.trust.trust_weights()
            self.trust.behavior_weights()
        except DomainError as exc:
            raise ConfigError(f"trust: {exc}") from exc

    @property
    def rogue_count(self) -> int:
        return round(self.uav_count * self.rogue_fraction)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)


_NESTED = {
    "trust": TrustParams,
    "profiles": ProfileParams,
    "energy": EnergyParams,
    "comm": CommParams,
    "fl": FlParams,
    "detection": DetectionParams,
}

_TUPLE_FIELDS = {
    "honest_pdr",
    "honest_rt_ms",
    "honest_probes",
    "rogue_pdr",
    "rogue_rt_ms",
    "rogue_probes",
}


def _build_section(cls, data: dict, path: str):
    known = {f.name for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown key: {path}.{key}")
        if key in _TUPLE_FIELDS:
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, DomainError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def config_from_dict(data: dict[str, Any]) -> ScenarioConfig:
    """Build a scenario from plain JSON data, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    data = dict(data)
    base = None
    preset_name = data.pop("preset", None)
    if preset_name is not None:
        base = preset(preset_name)
    known = {f.name for f in fields(ScenarioConfig)}
    kwargs: dict[str, Any] = base.to_dict() if base else {}
    for section, cls in _NESTED.items():
        if isinstance(kwargs.get(section), dict):
            kwargs[section] = _build_section(cls, kwargs[section], section)
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown key: {key}")
        if key in _NESTED:
            if not isinstance(value, dict):
                raise ConfigError(f"{key} must be an object")
            merged = dataclasses.asdict(kwargs[key]) if key in kwargs else {}
            merged.update(value)
            kwargs[key] = _build_section(_NESTED[key], merged, key)
        else:
            kwargs[key] = value
    try:
        return ScenarioConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def config_from_json(text: str) -> ScenarioConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    return config_from_dict(data)


def load_config(path: str) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return config_from_json(fh.read())


def preset(name: str) -> ScenarioConfig:
    try:
        factory = _PRESETS[name]
    except KeyError:
        raise ConfigError(
            f"unknown preset {name!r}; available: {', '.join(sorted(_PRESETS))}"
        ) from None
    return factory()


def preset_names() -> list[str]:
    return sorted(_PRESETS)


_PRESETS = {
    "desk-default": lambda: ScenarioConfig(name="desk-default"),
    "paper-scale": lambda: ScenarioConfig(
        name="paper-scale",
        uav_count=50,
        user_count=100,
        area_side_km=5.0,
        mesh_radius_km=1.2,
    ),
    "star-sparse": lambda: ScenarioConfig(
        name="star-sparse",
        uav_count=12,
        user_count=24,
        area_side_km=3.0,
        topology="star",
        star_hub=0,
    ),
    "mesh-dense": lambda: ScenarioConfig(
        name="mesh-dense",
        uav_count=30,
        user_count=60,
        area_side_km=2.0,
        mesh_radius_km=1.2,
    ),
}
