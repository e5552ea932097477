"""Plain-text config file handling (INI-style key/value sections).

Recognized sections and keys:

    [grbp]     beta, gamma, tau, max_tries, min_size, s_min, s_max, seed
    [scoring]  thresholds            (comma-separated IoU thresholds)
    [types]    vocabulary            (comma-separated type labels)

Unknown sections or keys are rejected so typos cannot silently change runs.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

from .errors import ConfigError, InputError
from .grbp import GrbpConfig
from .scoring import DEFAULT_ACC_THRESHOLDS

_GRBP_FLOAT_KEYS = ("beta", "gamma", "tau", "min_size", "s_min", "s_max")
_KNOWN = {
    "grbp": set(_GRBP_FLOAT_KEYS) | {"max_tries", "seed"},
    "scoring": {"thresholds"},
    "types": {"vocabulary"},
}


@dataclass(frozen=True)
class ToolkitConfig:
    grbp: GrbpConfig = field(default_factory=GrbpConfig)
    seed: int = 0
    thresholds: tuple[float, ...] = DEFAULT_ACC_THRESHOLDS
    type_vocabulary: tuple[str, ...] | None = None


def _parse_float(section: str, key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError as e:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a number") from e


def _parse_int(section: str, key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError as e:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not an integer") from e


def read_config(path: str) -> ToolkitConfig:
    parser = configparser.ConfigParser()
    try:
        with open(path, "r", encoding="utf-8") as f:
            parser.read_file(f)
    except OSError as e:
        raise InputError(f"cannot open config {path}: {e}") from e
    except configparser.Error as e:
        raise ConfigError(f"config {path} is not valid INI: {e}") from e

    for section in parser.sections():
        if section not in _KNOWN:
            raise ConfigError(f"config {path}: unknown section [{section}]")
        for key in parser[section]:
            if key not in _KNOWN[section]:
                raise ConfigError(f"config {path}: unknown key {key!r} in [{section}]")

    grbp_kwargs: dict = {}
    seed = 0
    if parser.has_section("grbp"):
        sec = parser["grbp"]
        for key in _GRBP_FLOAT_KEYS:
            if key in sec:
                grbp_kwargs[key] = _parse_float("grbp", key, sec[key])
        if "max_tries" in sec:
            grbp_kwargs["max_tries"] = _parse_int("grbp", "max_tries", sec["max_tries"])
        if "seed" in sec:
            seed = _parse_int("grbp", "seed", sec["seed"])

    thresholds = DEFAULT_ACC_THRESHOLDS
    if parser.has_section("scoring") and "thresholds" in parser["scoring"]:
        raw = parser["scoring"]["thresholds"]
        thresholds = tuple(
            _parse_float("scoring", "thresholds", item.strip())
            for item in raw.split(",")
            if item.strip()
        )
        if not thresholds:
            raise ConfigError(f"config {path}: [scoring] thresholds is empty")

    vocabulary = None
    if parser.has_section("types") and "vocabulary" in parser["types"]:
        vocabulary = tuple(
            item.strip() for item in parser["types"]["vocabulary"].split(",") if item.strip()
        )

    return ToolkitConfig(
        grbp=GrbpConfig(**grbp_kwargs),
        seed=seed,
        thresholds=thresholds,
        type_vocabulary=vocabulary,
    )
