"""Sectioned ``key = value`` configuration for the steering pipelines."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError
from .saturation import GeneratorSet, is_generator
from .spectral import GridSpec, ScalarField, VectorField2, biot_savart, curl

FIELD_PRESETS = {
    "zero": lambda x1, x2: 0.0 * x1,
    "low-mode": lambda x1, x2: np.cos(x1) + np.sin(x2),
    "two-vortex": lambda x1, x2: 0.5 * (np.cos(x1) + np.cos(2.0 * x2)),
    "sin-diag": lambda x1, x2: np.sin(x1 + x2),
}

PRESETS = {
    "low-mode": {"w0": "zero", "w1": "low-mode", "modes": "1,0; 0,1"},
    "two-vortex": {"w0": "zero", "w1": "two-vortex", "modes": "1,0; 0,1"},
    "mean-only": {"w0": "zero", "w1": "zero", "modes": "1,0; 0,1",
                  "u0_mean": "0, 0", "u1_mean": "1, 0"},
}

DEFAULT_DELTAS = (0.4, 0.2, 0.1, 0.05, 0.025)


@dataclass(frozen=True)
class SteeringConfig:
    """All inputs of one steering run.

    Fields named after TSF1 files (``w0``, ``w1``, ``forcing``) hold either a
    preset name from :data:`FIELD_PRESETS` or a path.
    """

    nu: float = 1e-2
    T_ctrl: float = 1.0
    eps: float = 0.05
    n: int = 128
    modes: GeneratorSet = field(default_factory=lambda: GeneratorSet.parse("1,0; 0,1"))
    K: int = 36
    omega: tuple[float, float, float, float] = (0.5, 4.7, 0.5, 4.7)
    cut1: str = "straight:2:5.4"
    cut2: str = "straight:1:5.4"
    cut_width: float = 0.8
    w0: str = "zero"
    w1: str = "low-mode"
    forcing: str = "zero"
    u0_mean: tuple[float, float] = (0.0, 0.0)
    u1_mean: tuple[float, float] = (0.0, 0.0)
    M_t: int = 64
    substeps: int = 1
    strength: float = 1.0
    deltas: tuple[float, ...] = DEFAULT_DELTAS
    sigma_min: float = 1.0
    sigma_max: float = 1e3
    target: float = 0.25
    norm_order: int = 0
    cfl: float = 0.5
    dt_max: float = 1e-2
    lift_n: int = 2048
    lift_samples: int = 10
    seed: int = 0
    output: str = "tsteer-out"
    base_dir: str = "."

    def __post_init__(self):
        problems = []
        if not self.nu > 0:
            problems.append("nu must be positive")
        if not self.eps > 0:
            problems.append("eps must be positive")
        if not self.T_ctrl > 0:
            problems.append("T_ctrl must be positive")
        if self.sigma_min * self.T_ctrl < 1.0 - 1e-12:
            problems.append("sigma_min * T_ctrl must be at least 1")
        if self.sigma_max < self.sigma_min:
            problems.append("sigma_max must not be below sigma_min")
        if self.n < 32 or self.n & (self.n - 1):
            problems.append("n must be a power of two and at least 32")
        if not is_generator(self.modes):
            problems.append("modes must generate Z^2")
        if not self.deltas or any(d <= 0 for d in self.deltas):
            problems.append("deltas must be positive")
        if not 0 <= self.norm_order <= 3:
            problems.append("norm_order must lie in 0..3")
        if self.M_t < 1 or self.substeps < 1:
            problems.append("M_t and substeps must be positive")
        if problems:
            raise ConfigError("; ".join(problems))

    # -- derived values --------------------------------------------------------

    @property
    def sweep(self) -> list[float]:
        """Admissible ``delta`` values: the configured list scaled by ``min(1, T_ctrl)``."""
        scale = min(1.0, self.T_ctrl)
        out = []
        for d in self.deltas:
            delta = d * scale
            if 1.0 / self.sigma_max - 1e-15 <= delta <= 1.0 / self.sigma_min + 1e-15:
                out.append(delta)
        return out

    def _path(self, name: str) -> Path:
        p = Path(name)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def scalar_field(self, name: str, grid: GridSpec) -> ScalarField:
        from .tsf import read_tsf

        if name in FIELD_PRESETS:
            return ScalarField.from_function(grid, FIELD_PRESETS[name], average_free=True)
        stored, _ = read_tsf(self._path(name))
        if isinstance(stored, VectorField2):
            stored = curl(stored)
        if stored.grid.n != grid.n:
            raise ConfigError(f"{name} is stored on n = {stored.grid.n}, expected {grid.n}")
        return ScalarField(grid, stored.values, average_free=True)

    def initial_vorticity(self, grid: GridSpec) -> ScalarField:
        return self.scalar_field(self.w0, grid)

    def target_vorticity(self, grid: GridSpec) -> ScalarField:
        return self.scalar_field(self.w1, grid)

    def velocity_forcing(self, grid: GridSpec) -> Optional[VectorField2]:
        """Time-independent external velocity force ``f`` (``None`` for zero).

        A scalar file is read as ``h = curl f`` and lifted with zero mean.
        """
        from .tsf import read_tsf

        if self.forcing == "zero":
            return None
        if self.forcing in FIELD_PRESETS:
            return biot_savart(self.scalar_field(self.forcing, grid))
        stored, _ = read_tsf(self._path(self.forcing))
        if stored.grid.n != grid.n:
            raise ConfigError(f"forcing is stored on n = {stored.grid.n}, expected {grid.n}")
        if isinstance(stored, ScalarField):
            return biot_savart(ScalarField(grid, stored.values, average_free=True))
        return stored


def _floats(text: str, count: Optional[int] = None) -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError(f"cannot parse numbers from {text!r}") from exc
    if count is not None and len(vals) != count:
        raise ConfigError(f"expected {count} numbers, got {text!r}")
    return vals


_CONVERTERS = {
    "nu": float, "T_ctrl": float, "eps": float, "n": int, "K": int, "cut_width": float,
    "M_t": int, "substeps": int, "strength": float, "sigma_min": float, "sigma_max": float,
    "target": float, "norm_order": int, "cfl": float, "dt_max": float, "lift_n": int,
    "lift_samples": int, "seed": int,
    "omega": lambda s: _floats(s, 4),
    "u0_mean": lambda s: _floats(s, 2),
    "u1_mean": lambda s: _floats(s, 2),
    "deltas": _floats,
    "modes": GeneratorSet.parse,
}


def config_from_mapping(values: dict, base_dir: str = ".") -> SteeringConfig:
    """Build a config from string values; a ``preset`` key supplies defaults."""
    merged = {}
    preset = values.get("preset")
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        merged.update(PRESETS[preset])
    merged.update({k: v for k, v in values.items() if k != "preset"})
    known = set(SteeringConfig.__dataclass_fields__)
    kwargs = {"base_dir": base_dir}
    for key, raw in merged.items():
        if key not in known or key == "base_dir":
            raise ConfigError(f"unknown configuration key {key!r}")
        convert = _CONVERTERS.get(key, str)
        try:
            kwargs[key] = convert(raw) if isinstance(raw, str) else raw
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return SteeringConfig(**kwargs)


def load_config(path) -> SteeringConfig:
    """Read a sectioned ``key = value`` file; section names only group keys."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.optionxform = str
    path = Path(path)
    try:
        with path.open() as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    values = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            if key in values:
                raise ConfigError(f"key {key!r} appears in more than one section")
            values[key] = raw
    return config_from_mapping(values, str(path.parent))


def preset_config(name: str, **overrides) -> SteeringConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    base = config_from_mapping({"preset": name})
    return replace(base, **overrides)
