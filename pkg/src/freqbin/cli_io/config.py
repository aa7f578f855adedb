"""Experiment configuration: one flat file of dotted ``key = value`` lines.

The file is parsed as TOML, so dotted keys, numbers, strings and lists
follow TOML syntax.  Missing keys fall back to the built-in profile;
unknown keys and out-of-range values are rejected with the offending line.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..counting import CoincidenceConfig, SourceModel, car_point
from ..beating import BeatingParams
from ..errors import ConfigError, ValidationError
from ..statekit import PhotonFrequencies, branch_probabilities_from_pump, frequency_difference

PAPER_PROFILE = "paper-profile"


def _positive(v):
    return v > 0


def _nonneg(v):
    return v >= 0


def _unit(v):
    return 0 < v <= 1


def _closed_unit(v):
    return 0 <= v <= 1


def _finite(v):
    return math.isfinite(v)


def _auto_or_nonneg(v):
    return v == "auto" or (isinstance(v, (int, float)) and v >= 0)


def _power_list(v):
    return isinstance(v, list) and len(v) >= 4 and all(isinstance(x, (int, float)) and x >= 0 for x in v)


# dotted key -> (kind, predicate, description of the valid range)
SCHEMA = {
    "seed": ("int", _nonneg, ">= 0"),
    "pump.lambda_nm": ("float", _positive, "> 0"),
    "pump.power_mw": ("float", _nonneg, ">= 0"),
    "pump.phi_p_rad": ("float", _finite, "finite"),
    "channels.lambda_idler_nm": ("float", _positive, "> 0"),
    "source.pair_coefficient": ("float", _nonneg, ">= 0"),
    "source.noise_coefficient": ("float", _nonneg, ">= 0"),
    "source.collection_efficiency_signal": ("float", _unit, "in (0, 1]"),
    "source.collection_efficiency_idler": ("float", _unit, "in (0, 1]"),
    "source.dark_rate": ("float", _nonneg, ">= 0"),
    "coincidence.window_ps": ("float", _positive, "> 0"),
    "coincidence.integration_time_s": ("float", _positive, "> 0"),
    "branch.total_pairs": ("float", _nonneg, ">= 0"),
    "branch.efficiency_d": ("float", _unit, "in (0, 1]"),
    "branch.efficiency_e": ("float", _unit, "in (0, 1]"),
    "branch.efficiency_f": ("float", _unit, "in (0, 1]"),
    "branch.efficiency_g": ("float", _unit, "in (0, 1]"),
    "branch.floor_aa": ("float", _nonneg, ">= 0"),
    "branch.floor_bb": ("float", _nonneg, ">= 0"),
    "branch.floor_ab": ("float", _nonneg, ">= 0"),
    "branch.floor_ba": ("float", _nonneg, ">= 0"),
    "beating.span_ps": ("float", _positive, "> 0"),
    "beating.step_ps": ("float", _positive, "> 0"),
    "beating.counts_scale": ("float", _positive, "> 0"),
    "beating.visibility": ("float", _closed_unit, "in [0, 1]"),
    "beating.envelope_omega": ("float", _positive, "> 0"),
    "beating.phase_rad": ("float", _finite, "finite"),
    "beating.integration_time_s": ("float", _positive, "> 0"),
    "beating.accidentals_per_point": ("any", _auto_or_nonneg, '"auto" or >= 0'),
    "scan.powers_mw": ("list", _power_list, "list of >= 4 powers >= 0"),
    "scan.integration_time_s": ("float", _positive, "> 0"),
    "scan.arm": ("str", lambda v: v in ("signal", "idler"), '"signal" or "idler"'),
}


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _line_of(text: str, key: str):
    last = key.rsplit(".", 1)[-1]
    for pattern in (rf"^\s*{re.escape(key)}\s*=", rf"^\s*{re.escape(last)}\s*="):
        for i, line in enumerate(text.splitlines(), start=1):
            if re.match(pattern, line):
                return i
    return None


def _coerce(key, value, text):
    kind, ok, desc = SCHEMA[key]
    line = _line_of(text, key)
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", key, line)
        value = float(value)
    elif kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected an integer, got {value!r}", key, line)
    elif kind == "str" and not isinstance(value, str):
        raise ConfigError(f"expected a string, got {value!r}", key, line)
    if not ok(value):
        raise ConfigError(f"value {value!r} out of range, must be {desc}", key, line)
    if kind == "list":
        value = tuple(float(x) for x in value)
    return value


def _profile_text() -> str:
    return resources.files(__package__).joinpath("profiles", "paper-profile.toml").read_text()


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved configuration indexed by dotted key, e.g. ``cfg["pump.power_mw"]``."""

    values: dict
    source_text: str = ""

    def __getitem__(self, key):
        return self.values[key]

    @property
    def seed(self) -> int:
        return self.values["seed"]

    def with_seed(self, seed: int) -> "ExperimentConfig":
        vals = dict(self.values)
        vals["seed"] = int(seed)
        return ExperimentConfig(vals, self.source_text)

    def config_hash(self) -> str:
        canon = json.dumps(self.values, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    # domain objects
    def frequencies(self) -> PhotonFrequencies:
        return PhotonFrequencies.from_pump_and_idler(self["pump.lambda_nm"], self["channels.lambda_idler_nm"])

    def source_model(self) -> SourceModel:
        v = self.values
        return SourceModel(
            v["source.pair_coefficient"],
            v["source.noise_coefficient"],
            v["source.collection_efficiency_signal"],
            v["source.collection_efficiency_idler"],
            v["source.dark_rate"],
        )

    def coincidence(self) -> CoincidenceConfig:
        return CoincidenceConfig(self["coincidence.window_ps"], self["coincidence.integration_time_s"])

    def branch_probabilities(self):
        return branch_probabilities_from_pump(self["pump.phi_p_rad"])

    def port_efficiencies(self) -> dict[str, float]:
        return {port: self[f"branch.efficiency_{port}"] for port in "defg"}

    def branch_floor(self) -> tuple[float, float, float, float]:
        return tuple(self[f"branch.floor_{b}"] for b in ("aa", "bb", "ab", "ba"))

    def beating_params(self) -> BeatingParams:
        return BeatingParams(
            self["beating.counts_scale"],
            self["beating.visibility"],
            self["beating.envelope_omega"],
            frequency_difference(self.frequencies()),
            self["beating.phase_rad"],
        ).validate()

    def accidentals_per_point(self) -> float:
        v = self["beating.accidentals_per_point"]
        if v != "auto":
            return float(v)
        point = car_point(self.source_model(), self["pump.power_mw"], self.coincidence())
        return self["beating.counts_scale"] / point.car if math.isfinite(point.car) else 0.0


def _validate_domain(cfg: ExperimentConfig, text: str):
    checks = [
        ("channels.lambda_idler_nm", cfg.frequencies),
        ("source.pair_coefficient", cfg.source_model),
        ("coincidence.window_ps", cfg.coincidence),
        ("beating.visibility", cfg.beating_params),
    ]
    for key, build in checks:
        try:
            build()
        except ValidationError as exc:
            raise ConfigError(str(exc), key, _line_of(text, key)) from exc
    if cfg["beating.step_ps"] > cfg["beating.span_ps"]:
        raise ConfigError("step must not exceed span", "beating.step_ps", _line_of(text, "beating.step_ps"))


def parse_config(text: str, base: dict | None = None) -> ExperimentConfig:
    """Parse config text; keys absent from ``text`` come from ``base``."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"syntax error: {exc}") from exc
    flat = _flatten(raw)
    for key in flat:
        if key not in SCHEMA:
            raise ConfigError("unknown key", key, _line_of(text, key))
    values = dict(base or {})
    for key, value in flat.items():
        values[key] = _coerce(key, value, text)
    missing = [k for k in SCHEMA if k not in values]
    if missing:
        raise ConfigError(f"missing keys: {', '.join(missing)}")
    cfg = ExperimentConfig(values, text)
    _validate_domain(cfg, text)
    return cfg


def paper_profile() -> ExperimentConfig:
    return parse_config(_profile_text())


def load_config(path: str | Path | None) -> ExperimentConfig:
    """Load a config file layered over the built-in profile.

    ``None`` or the literal name ``paper-profile`` return the built-in
    profile.
    """
    base = paper_profile()
    if path is None or str(path) == PAPER_PROFILE:
        return base
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, base.values)


def config_fields() -> list[str]:
    return list(SCHEMA)

