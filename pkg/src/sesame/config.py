"""Pipeline configuration: a dataclass loaded from a ``key=value`` file.

Every field can be overridden on the command line by a flag of the same
name (``--min_domains 30`` or ``--min-domains 30``).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping

from sesame.ingest import MIN_DOMAINS, MIN_NX_RATIO
from sesame.reconstructors import DEFAULT_BUDGET, DEFAULT_REQUIRED_MATCH


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    model: str = "artifacts/model.bin"
    index: str = "artifacts/known.tsv"
    registry: str = "artifacts/registry.tsv"
    allowlist: str = ""
    allowlist_limit: int = 500_000
    workers: int = 1
    min_domains: int = MIN_DOMAINS
    min_nx_ratio: float = MIN_NX_RATIO
    regex_min_fraction: float = 0.05
    default_threshold: float = 5.0
    reconstruct: bool = True
    budget: int = DEFAULT_BUDGET
    input_cap: int = 0  # 0 means the per-family default
    required_match: float = DEFAULT_REQUIRED_MATCH
    seed: int = 0

    def replace(self, **kw) -> "PipelineConfig":
        return dataclasses.replace(self, **kw)


_TYPES = {f.name: f.type for f in fields(PipelineConfig)}


def _coerce(key: str, value: Any) -> Any:
    kind = _TYPES[key]
    if not isinstance(value, str):
        return value
    value = value.strip()
    try:
        if kind == "bool":
            low = value.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if kind == "int":
            return int(value)
        if kind == "float":
            return float(value)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {value!r} as {kind}") from None
    return value


def from_mapping(values: Mapping[str, Any], base: PipelineConfig | None = None) -> PipelineConfig:
    base = base or PipelineConfig()
    updates = {}
    for key, value in values.items():
        key = key.replace("-", "_")
        if key not in _TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        if value is None:
            continue
        updates[key] = _coerce(key, value)
    return base.replace(**updates)


def parse_config_text(text: str) -> dict[str, str]:
    out = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key=value")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load_config(path: str | Path | None = None, overrides: Mapping[str, Any] | None = None) -> PipelineConfig:
    cfg = PipelineConfig()
    if path:
        cfg = from_mapping(parse_config_text(Path(path).read_text(encoding="utf-8")), cfg)
    if overrides:
        cfg = from_mapping(overrides, cfg)
    return cfg


def dump_config(cfg: PipelineConfig) -> str:
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        lines.append(f"{f.name}={str(v).lower() if isinstance(v, bool) else v}")
    return "\n".join(lines) + "\n"
