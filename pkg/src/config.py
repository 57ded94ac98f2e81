"""Experiment configuration and settings."""

import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from .errors import ConfigError
from .model import Variant, Weights
from .solver import SolverConfig
from .synthgen import TEXTURE_KINDS
from .utils import parse_seed_range

THREADS_ENV = "SPSU_THREADS"


@dataclass
class ExperimentConfig:
    """Configuration of scene generation, the unmixing problem, the solver and the run."""

    # scene
    height: int = 100
    width: int = 100
    n_bands: int = 100
    n_regions: int = 2
    potts_beta: float = 1.0
    potts_sweeps: int = 200
    psi_concentration: float = 1.0
    texture_kinds: Tuple[str, ...] = TEXTURE_KINDS
    quantize_pan: bool = False
    library_path: Optional[Path] = None

    # problem
    R1: int = 4
    R2: int = 20
    K: int = 30
    patch_size: int = 11
    lambda0_tilde: float = 1.0
    lambda1_tilde: float = 1.0
    lambda2: float = 1.0
    lambda_z: float = 0.1
    sum_to_one_on_A: bool = True

    # solver
    alpha: float = 2.0
    rel_tol: float = 1e-4
    max_iters: int = 10_000
    trace_every: int = 100

    # run
    method: str = "sp2u"
    seed: int = 0
    seeds: List[int] = field(default_factory=list)
    log_dir: Path = field(default_factory=lambda: Path.cwd() / "logs")

    @classmethod
    def create_default(cls, **overrides) -> "ExperimentConfig":
        """Create default configuration.

        Args:
            **overrides: Field values replacing the defaults.

        Returns:
            ExperimentConfig instance with default settings.
        """
        config = cls(**overrides)
        config.validate()
        return config

    @classmethod
    def from_file(cls, path: Path) -> "ExperimentConfig":
        """Load a flat ``key=value`` file; ``#`` starts a comment.

        Raises:
            ConfigError: On unreadable files, malformed lines or unknown keys.
        """
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read config file {path}: {e}")

        pairs = []
        for number, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{number}: expected key=value, got {raw.strip()!r}")
            pairs.append(line)

        config = cls()
        config.apply_overrides(pairs)
        return config

    def apply_overrides(self, pairs: Iterable[str]) -> "ExperimentConfig":
        """Set fields from ``key=value`` strings, then validate.

        Raises:
            ConfigError: On unknown keys or values that do not parse.
        """
        known = {f.name: f for f in fields(self)}
        for pair in pairs:
            if "=" not in pair:
                raise ConfigError(f"override must be key=value, got {pair!r}")
            key, value = (s.strip() for s in pair.split("=", 1))
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            setattr(self, key, self._parse_value(key, value))
        self.validate()
        return self

    def _parse_value(self, key: str, value: str):
        current = getattr(type(self)(), key)
        try:
            if key in ("library_path", "log_dir"):
                return Path(value) if value else None
            if key == "texture_kinds":
                return tuple(v.strip() for v in value.split(",") if v.strip())
            if key == "seeds":
                return parse_seed_range(value)
            if isinstance(current, bool):
                lowered = value.lower()
                if lowered in ("1", "true", "yes", "on"):
                    return True
                if lowered in ("0", "false", "no", "off"):
                    return False
                raise ValueError(f"not a boolean: {value!r}")
            if isinstance(current, int):
                return int(value)
            if isinstance(current, float):
                return float(value)
            return value
        except ValueError as e:
            raise ConfigError(f"invalid value for {key}: {e}")

    def validate(self) -> bool:
        """Validate configuration.

        Returns:
            True if configuration is valid.

        Raises:
            ConfigError: If a value is out of range.
        """
        for name in ("height", "width", "n_bands", "n_regions", "potts_sweeps", "R1", "R2",
                     "K", "max_iters"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.R1 >= self.n_bands and self.library_path is None:
            raise ConfigError(f"R1 must be smaller than n_bands ({self.R1} >= {self.n_bands})")
        if self.patch_size < 1 or self.patch_size % 2 == 0:
            raise ConfigError(f"patch_size must be an odd integer >= 1, got {self.patch_size}")
        for name in ("lambda0_tilde", "lambda1_tilde", "lambda2", "lambda_z", "potts_beta"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ConfigError(f"{name} must be a finite non-negative number, got {value}")
        if self.psi_concentration <= 0:
            raise ConfigError(f"psi_concentration must be > 0, got {self.psi_concentration}")
        for kind in self.texture_kinds:
            if kind not in TEXTURE_KINDS:
                raise ConfigError(f"unknown texture kind {kind!r}")
        if not self.texture_kinds:
            raise ConfigError("texture_kinds must name at least one texture")
        if self.trace_every < 0:
            raise ConfigError(f"trace_every must be >= 0, got {self.trace_every}")
        try:
            Variant.from_name(self.method)
        except ValueError as e:
            raise ConfigError(str(e))
        self.solver_config()
        return True

    @property
    def variant(self) -> Variant:
        return Variant.from_name(self.method)

    @property
    def seed_list(self) -> List[int]:
        """Seeds of a multi-trial run; the single ``seed`` when ``seeds`` is empty."""
        return list(self.seeds) if self.seeds else [self.seed]

    def solver_config(self) -> SolverConfig:
        return SolverConfig(alpha=self.alpha, rel_tol=self.rel_tol, max_iters=self.max_iters,
                            trace_every=self.trace_every)

    def renormalized_weights(self, Y: np.ndarray, S: Optional[np.ndarray] = None) -> Weights:
        """Scale the data-fit weights by the data size and dynamic range.

        ``lambda0 = lambda0_tilde / (d1 * max|Y|^2)`` and
        ``lambda1 = lambda1_tilde / (d2 * max|S|^2)``; ``lambda2`` and
        ``lambda_z`` are used as given.
        """
        y_max = float(np.max(np.abs(Y)))
        if y_max == 0:
            raise ConfigError("cannot renormalize weights: Y is identically zero")
        lambda0 = self.lambda0_tilde / (Y.shape[0] * y_max ** 2)
        lambda1 = 0.0
        if S is not None:
            s_max = float(np.max(np.abs(S)))
            lambda1 = self.lambda1_tilde / (S.shape[0] * s_max ** 2) if s_max > 0 else 0.0
        return Weights(lambda0=lambda0, lambda1=lambda1, lambda2=self.lambda2,
                       lambda_z=self.lambda_z)

    def as_dict(self) -> Dict[str, object]:
        """JSON-friendly snapshot of every field except ``log_dir``."""
        snapshot = {}
        for f in fields(self):
            if f.name == "log_dir":
                continue
            value = getattr(self, f.name)
            if isinstance(value, Path):
                value = str(value)
            elif isinstance(value, tuple):
                value = list(value)
            snapshot[f.name] = value
        return snapshot

    def __str__(self) -> str:
        """String representation of config."""
        return (
            f"ExperimentConfig(\n"
            f"  scene: {self.height}x{self.width}, {self.n_bands} bands, "
            f"{self.n_regions} regions, beta={self.potts_beta}\n"
            f"  problem: R1={self.R1} R2={self.R2} K={self.K} w={self.patch_size}\n"
            f"  weights: l0~={self.lambda0_tilde} l1~={self.lambda1_tilde} "
            f"l2={self.lambda2} lz={self.lambda_z}\n"
            f"  solver: alpha={self.alpha} rel_tol={self.rel_tol} max_iters={self.max_iters}\n"
            f"  run: method={self.method} seeds={self.seed_list}\n"
            f"  logs: {self.log_dir}\n"
            f")"
        )


def get_thread_count() -> int:
    """Parallel seeds allowed by ``SPSU_THREADS`` (default 1).

    Raises:
        ConfigError: If the variable is set to something other than a positive integer.
    """
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return 1
    try:
        count = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    if count < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return count
