"""Run configuration: defaults, key-value config files, CLI overrides.

The config file is plain "key = value" lines with '#' comments; list values
are comma separated.  Unknown keys are rejected.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields

from .determinants import PAPER_SIGNLESS, SECOND_QUANTIZED

FIXTURE_ROOT_ENV = "CCSTAB_FIXTURE_ROOT"

CONVENTION_ALIASES = {
    "paper": PAPER_SIGNLESS,
    "paper_signless": PAPER_SIGNLESS,
    "second-quantized": SECOND_QUANTIZED,
    "second_quantized": SECOND_QUANTIZED,
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    inputs: list[str] = field(default_factory=list)
    eigenpair: str | int = "lowest"
    rank: int | None = None                  # None means the full index set
    convention: str = PAPER_SIGNLESS
    shift: float = 1.0
    tol: float = 1e-10
    max_iter: int = 50
    seed_mode: str = "zero"                  # "zero" | "mp"
    sample_seed: int = 42
    sandwich_radii: tuple = (1e-3, 1e-2)
    sandwich_samples: int = 100
    lipschitz_deltas: tuple = (1e-3, 1e-2, 1e-1)
    lipschitz_samples: int = 2
    lipschitz_max_dim: int = 600             # skip the L-hat scan above this
    omega: float = 1.0
    sector: str = "file"                     # "file" | "full" | explicit ms2
    occupation: tuple = ()
    z_total: float | None = None
    out_dir: str = "runs"
    workers: int = 1
    dense_limit: int = 2000

    def resolved_convention(self) -> str:
        conv = CONVENTION_ALIASES.get(self.convention, self.convention)
        if conv not in (PAPER_SIGNLESS, SECOND_QUANTIZED):
            raise ConfigError(f"unknown convention {self.convention!r}")
        return conv

    def resolved_eigenpair(self):
        if self.eigenpair == "lowest":
            return "lowest"
        try:
            return int(self.eigenpair)
        except (TypeError, ValueError):
            raise ConfigError(f"eigenpair must be 'lowest' or an index, got {self.eigenpair!r}")

    def resolved_sector(self, file_ms2: int) -> int | None:
        if self.sector == "file":
            return file_ms2
        if self.sector == "full":
            return None
        try:
            return int(self.sector)
        except (TypeError, ValueError):
            raise ConfigError(f"sector must be 'file', 'full' or an MS2 value, got {self.sector!r}")

    def validate(self) -> "RunConfig":
        self.resolved_convention()
        self.resolved_eigenpair()
        if self.rank is not None and self.rank < 1:
            raise ConfigError(f"rank must be >= 1, got {self.rank}")
        if self.shift <= 0:
            raise ConfigError("shift must be positive")
        if not 0 < self.omega <= 1:
            raise ConfigError(f"omega must be in (0, 1], got {self.omega}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        return self


_FIELD_TYPES = {f.name: f for f in fields(RunConfig)}

_LIST_KEYS = {"inputs", "sandwich_radii", "lipschitz_deltas", "occupation"}
_INT_KEYS = {"max_iter", "sample_seed", "sandwich_samples", "lipschitz_samples",
             "lipschitz_max_dim", "workers", "dense_limit"}
_FLOAT_KEYS = {"shift", "tol", "omega", "z_total"}


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    if key in _LIST_KEYS:
        items = [x.strip() for x in raw.split(",") if x.strip()]
        if key == "inputs":
            return items
        if key == "occupation":
            return tuple(int(x) for x in items)
        return tuple(float(x) for x in items)
    if key in _INT_KEYS:
        return int(raw)
    if key in _FLOAT_KEYS:
        return float(raw)
    if key == "rank":
        return None if raw.lower() in ("full", "none") else int(raw)
    if key == "eigenpair":
        return raw if raw == "lowest" else int(raw)
    return raw


def load_config_file(path: str, base: RunConfig | None = None) -> RunConfig:
    """Apply "key = value" lines from `path` on top of `base` (or defaults)."""
    cfg = base or RunConfig()
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in _FIELD_TYPES:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            setattr(cfg, key, _parse_value(key, value))
    return cfg


def fixture_root() -> str | None:
    return os.environ.get(FIXTURE_ROOT_ENV)
