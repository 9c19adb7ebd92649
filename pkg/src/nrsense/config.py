"""Scenario configuration and the flat ``section.key = value`` file format.

Example::

    # UMa-AV baseline
    prs.comb_size = 2
    noise.si_power_dbm = -inf
    rx.architecture = "hybrid"
    scenario.trp_position = [0, 0, 25]

Values are numbers, ``true``/``false``, ``inf``/``-inf``, quoted or bare
strings, or bracketed lists of those. ``#`` starts a comment.
"""

from __future__ import annotations

import ast
import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from nrsense.array import ARCHITECTURES, ArrayConfig
from nrsense.channel import ChannelConfig, NoiseModel
from nrsense.prs import PrsConfig
from nrsense.receiver import CfarConfig, RxConfig


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


@dataclass(frozen=True)
class ScenarioConfig:
    prs: PrsConfig = field(default_factory=PrsConfig)
    array: ArrayConfig = field(default_factory=ArrayConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    noise: NoiseModel = field(default_factory=NoiseModel)
    cfar: CfarConfig = field(default_factory=CfarConfig)
    rx: RxConfig = field(default_factory=RxConfig)
    n_targets: int = 5
    trp_position: tuple[float, float, float] = (0.0, 0.0, 25.0)
    sector_half_width_deg: float = 60.0
    sector_radius_m: float = 500.0
    n_drops: int = 100
    master_seed: int = 0
    association_gate_m: float = 20.0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.n_targets < 0:
            raise ConfigError("scenario.n_targets must be >= 0")
        if self.n_drops < 1:
            raise ConfigError("scenario.n_drops must be >= 1")
        if self.master_seed < 0:
            raise ConfigError("scenario.master_seed must be >= 0")
        if self.association_gate_m <= 0:
            raise ConfigError("scenario.association_gate_m must be positive")
        if not 0 < self.sector_half_width_deg <= 180:
            raise ConfigError("scenario.sector_half_width_deg must lie in (0, 180]")
        if self.rx.architecture not in ARCHITECTURES:
            raise ConfigError(f"rx.architecture must be one of {ARCHITECTURES}")
        try:
            self.noise.validate(self.prs.tx_power_dbm)
        except ValueError as e:
            raise ConfigError(f"noise.si_power_dbm: {e}") from None
        if self.rx.architecture == "hybrid" and self.array.n_rows % 2:
            raise ConfigError("rx.architecture: hybrid needs an even array.n_rows")
        if self.rx.aoa_method == "fft" and self.rx.architecture != "analog":
            dv = self.array.dv * (2 if self.rx.architecture == "hybrid" else 1)
            if not (np.isclose(dv, 0.5) and np.isclose(self.array.dh, 0.5)):
                raise ConfigError(
                    f"rx.aoa_method: beamspace FFT needs a half-wavelength effective aperture "
                    f"(got dh={self.array.dh}, effective dv={dv}); use bartlett"
                )

    def replace(self, **changes) -> ScenarioConfig:
        """Copy with dotted-key overrides, e.g. ``replace(**{"prs.n_cpi": 64})``."""
        return from_flat({**to_flat(self), **changes})


SECTIONS = {
    "prs": PrsConfig,
    "array": ArrayConfig,
    "channel": ChannelConfig,
    "noise": NoiseModel,
    "cfar": CfarConfig,
    "rx": RxConfig,
}
_SCENARIO_FIELDS = [f.name for f in dataclasses.fields(ScenarioConfig) if f.name not in SECTIONS]


def _section_fields(section: str) -> dict[str, dataclasses.Field]:
    cls = ScenarioConfig if section == "scenario" else SECTIONS[section]
    return {f.name: f for f in dataclasses.fields(cls) if f.name not in SECTIONS}


def parse_value(raw: str) -> Any:
    raw = raw.strip()
    low = raw.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("inf", "+inf", "-inf", "nan"):
        return float(low)
    if raw.startswith("[") and raw.endswith("]"):
        inner = raw[1:-1].strip()
        return [parse_value(p) for p in inner.split(",")] if inner else []
    try:
        return ast.literal_eval(raw)
    except (ValueError, SyntaxError):
        return raw


def parse_flat(text: str) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = parse_value(value)
    return out


def _coerce(key: str, typ: str, value: Any) -> Any:
    try:
        if typ.startswith("tuple"):
            inner = typ[typ.index("[") + 1:-1].split(",")[0].strip()
            return tuple(_coerce(key, inner, v) for v in value)
        if typ == "bool":
            if not isinstance(value, bool):
                raise TypeError
            return value
        if typ == "int":
            if isinstance(value, bool) or float(value) != int(float(value)):
                raise TypeError
            return int(float(value))
        if typ == "float":
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if typ == "str":
            return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"config key {key!r}: cannot interpret {value!r} as {typ}") from None
    raise ConfigError(f"config key {key!r}: unsupported field type {typ}")


def from_flat(flat: dict[str, Any]) -> ScenarioConfig:
    grouped: dict[str, dict[str, Any]] = {s: {} for s in (*SECTIONS, "scenario")}
    for key, value in flat.items():
        section, _, name = key.partition(".")
        if section not in grouped or not name:
            raise ConfigError(f"unknown config key {key!r}")
        fields = _section_fields(section)
        if name not in fields:
            raise ConfigError(f"unknown config key {key!r}")
        grouped[section][name] = _coerce(key, str(fields[name].type), value)
    try:
        parts = {}
        for s, cls in SECTIONS.items():
            try:
                parts[s] = cls(**grouped[s])
            except ValueError as e:
                raise ConfigError(f"{s}: {e}") from None
        return ScenarioConfig(**parts, **grouped["scenario"])
    except TypeError as e:
        raise ConfigError(str(e)) from None


def to_flat(cfg: ScenarioConfig) -> dict[str, Any]:
    flat: dict[str, Any] = {}
    for s in SECTIONS:
        for k, v in dataclasses.asdict(getattr(cfg, s)).items():
            flat[f"{s}.{k}"] = v
    for k in _SCENARIO_FIELDS:
        flat[f"scenario.{k}"] = getattr(cfg, k)
    return flat


def _fmt(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (tuple, list)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dump_flat(cfg: ScenarioConfig) -> str:
    return "\n".join(f"{k} = {_fmt(v)}" for k, v in to_flat(cfg).items()) + "\n"


def json_safe(flat: dict[str, Any]) -> dict[str, Any]:
    """Flat config with non-finite floats spelled as strings (strict JSON)."""
    def conv(v):
        if isinstance(v, float) and not np.isfinite(v):
            return repr(v)
        if isinstance(v, (tuple, list)):
            return [conv(x) for x in v]
        return v
    return {k: conv(v) for k, v in flat.items()}


def _from_json_value(v):
    if isinstance(v, str) and v in ("inf", "-inf", "nan"):
        return float(v)
    if isinstance(v, list):
        return [_from_json_value(x) for x in v]
    return v


def parse_overrides(items) -> dict[str, Any]:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key=value")
        k, v = item.split("=", 1)
        out[k.strip()] = parse_value(v)
    return out


def load_config(path, overrides=None) -> ScenarioConfig:
    """Read a flat config file, or the ``config`` block of a run manifest (.json)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {str(path)!r}: {e.strerror}") from None
    if path.suffix == ".json":
        try:
            flat = {k: _from_json_value(v) for k, v in json.loads(text)["config"].items()}
        except (json.JSONDecodeError, KeyError, AttributeError) as e:
            raise ConfigError(f"{path}: not a run manifest ({e})") from None
    else:
        flat = parse_flat(text)
    if isinstance(overrides, dict):
        flat.update(overrides)
    else:
        flat.update(parse_overrides(overrides))
    return from_flat(flat)
