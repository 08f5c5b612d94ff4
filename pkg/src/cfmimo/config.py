"""Plain ``key = value`` experiment configuration files.

One setting per line; ``#`` starts a comment. Values are JSON literals
(``16``, ``1.5``, ``true``, ``"zf"``, ``[0, 10, 20]``) or bare words, and
lists may hold bare words: ``methods = [zfs, exhaustive]``. Keys not given
take their defaults (the 400 m / 64 AP / 16 user setup). If ``M`` is omitted
it follows ``L * N_t``; if ``K_s`` is omitted it is ``K / 2``.
"""

from __future__ import annotations

import json
import os
from dataclasses import fields

from .harness import ExperimentConfig
from .scenario import ConfigurationError, ScenarioConfig

ENV_PREFIX = "CFMIMO_"


class ConfigError(ConfigurationError):
    def __init__(self, message, key=None, line=None):
        where = []
        if key is not None:
            where.append(f"key {key!r}")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.key = key
        self.line = line


SCENARIO_KEYS = {
    "area_side": float,
    "K": int,
    "L": int,
    "N_t": int,
    "M": int,
    "carrier_freq": float,
    "h_ap": float,
    "h_user": float,
    "d0": float,
    "d1": float,
    "sigma_sh": float,
    "rng_seed": int,
    "cell_layout": str,
    "coupling": float,
    "multicell_pathloss": bool,
    "ref_distance": float,
}
EXPERIMENT_KEYS = {
    "snr_points_db": [float],
    "n_trials": int,
    "methods": [str],
    "networks": [str],
    "precoders": [str],
    "K_s": int,
    "clusters": int,
    "clustering": bool,
    "master_seed": int,
    "symbol_energy": float,
    "exhaustive_cap": int,
}
SCHEMA = {**SCENARIO_KEYS, **EXPERIMENT_KEYS}
_FOLDED = {k.lower(): k for k in SCHEMA}


def _literal(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    if text.startswith("[") and text.endswith("]"):
        inner = text[1:-1].strip()
        return [_literal(part.strip()) for part in inner.split(",")] if inner else []
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    return text


def _coerce(key: str, value, line=None):
    kind = SCHEMA[key]
    if isinstance(kind, list):
        if not isinstance(value, list):
            value = [value]
        return [_coerce_scalar(key, kind[0], v, line) for v in value]
    return _coerce_scalar(key, kind, value, line)


def _coerce_scalar(key, kind, value, line):
    if kind is bool:
        if isinstance(value, bool):
            return value
    elif kind is int:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
        if isinstance(value, float) and value.is_integer():
            return int(value)
    elif kind is float:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    elif kind is str:
        if isinstance(value, str):
            return value
    raise ConfigError(f"expected {kind.__name__}, got {value!r}", key, line)


def parse_text(text: str) -> tuple[dict, dict]:
    """Return ``(values, line_of_key)`` from config text."""
    values, lines = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, _, rhs = line.partition("=")
        key = key.strip()
        canon = _FOLDED.get(key.lower())
        if canon is None:
            raise ConfigError("unknown key", key, lineno)
        if canon in values:
            raise ConfigError("duplicate key", key, lineno)
        values[canon] = _coerce(canon, _literal(rhs.strip()), lineno)
        lines[canon] = lineno
    return values, lines


def env_overrides(environ=None) -> dict:
    """Settings from ``CFMIMO_<KEY>`` environment variables."""
    environ = os.environ if environ is None else environ
    out = {}
    for name, raw in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        key = _FOLDED.get(name[len(ENV_PREFIX) :].lower())
        if key is None:
            raise ConfigError(f"unknown override {name}")
        out[key] = _coerce(key, _literal(raw.strip()))
    return out


def build_config(values: dict, lines: dict | None = None) -> ExperimentConfig:
    lines = lines or {}
    sc = {k: v for k, v in values.items() if k in SCENARIO_KEYS}
    if "M" not in sc:
        sc["M"] = sc.get("L", 4) * sc.get("N_t", 16)
    ex = {k: v for k, v in values.items() if k in EXPERIMENT_KEYS}
    for k in ("snr_points_db", "methods", "networks", "precoders"):
        if k in ex:
            ex[k] = tuple(ex[k])
    try:
        scenario = ScenarioConfig(**sc)
        return ExperimentConfig(scenario=scenario, **ex)
    except ConfigError:
        raise
    except ConfigurationError as exc:
        key = next((k for k in values if k in str(exc)), None)
        raise ConfigError(str(exc), key, lines.get(key)) from exc


def parse_config(path=None, overrides: dict | None = None, environ=None) -> ExperimentConfig:
    """Resolve defaults <- file <- environment <- explicit overrides."""
    values, lines = {}, {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            values, lines = parse_text(fh.read())
    values.update(env_overrides(environ))
    for key, value in (overrides or {}).items():
        values[key] = _coerce(key, value)
    return build_config(values, lines)


def _render(value) -> str:
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_render(v) for v in value) + "]"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return json.dumps(value)
    return repr(value)


def format_config(config: ExperimentConfig) -> str:
    """Render a fully resolved config; ``parse_text`` of the result rebuilds it."""
    out = ["# scenario"]
    for f in fields(ScenarioConfig):
        out.append(f"{f.name} = {_render(getattr(config.scenario, f.name))}")
    out.append("# experiment")
    for key in EXPERIMENT_KEYS:
        out.append(f"{key} = {_render(getattr(config, key))}")
    return "\n".join(out) + "\n"
