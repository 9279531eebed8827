"""Run configuration and its line-oriented ``key = value`` file format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Config:
    segment_length: int = 10
    beta1: float = 1.0
    beta2: float = 5.0
    n_sp: int = 2000
    compactness: float = 10.0
    gmm_fg_k: int = 10
    gmm_bg_k: int = 50
    gmm_iters: int = 30
    bg_samples: int = 20000
    c_start: float = 10.0
    c_end: float = 10.0
    delta: float = 15.0
    agreement_overlap: float = 0.8
    max_iters: int = 50
    h_rounds: int = 2
    cand_radius: Optional[float] = None   # None: max(w, h) of the previous box
    cand_stride: float = 4.0
    phi0: float = 0.05
    couple_weight: float = 0.1
    svm_C: float = 10.0
    pa_C: float = 0.1
    learn_radius_factor: float = 2.0
    learn_stride: float = 2.0
    flow_block: int = 8
    flow_search: int = 8
    grabcut_iters: int = 5
    seed: int = 0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name in ("seed", "couple_weight") or v is None:
                continue
            if not v > 0:
                raise ConfigError(f"{f.name} must be positive, got {v}")
        if self.couple_weight < 0:
            raise ConfigError("couple_weight must be non-negative")
        if self.segment_length < 2:
            raise ConfigError("segment_length must be at least 2")
        if not 0 < self.agreement_overlap <= 1:
            raise ConfigError("agreement_overlap must lie in (0, 1]")

    def replace(self, **kw) -> "Config":
        return dataclasses.replace(self, **kw)


def _coerce(name: str, raw: str):
    field = {f.name: f for f in fields(Config)}.get(name)
    if field is None:
        raise ConfigError(f"unknown config key {name!r}")
    default = field.default
    if name == "cand_radius":
        return None if raw.lower() in ("auto", "none", "") else float(raw)
    try:
        if isinstance(default, int):
            return int(raw)
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc


def parse_config(text: str, base: Config = Config()) -> Config:
    updates = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        updates[key] = _coerce(key, val)
    return base.replace(**updates)


def load_config(path, base: Config = Config()) -> Config:
    return parse_config(Path(path).read_text(), base)


def format_config(cfg: Config) -> str:
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        lines.append(f"{f.name} = {'auto' if v is None else v}")
    return "\n".join(lines) + "\n"
