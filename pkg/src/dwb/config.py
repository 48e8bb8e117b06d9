"""JSON scenario configuration.

Angles are given in degrees in the file and converted to radians when the
physical objects are built. Unknown keys anywhere are rejected.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import List, Optional

import numpy as np

from .signal_model import ArrayGeometry, Bearings, OfdmGrid, QamConstellation, SpoofProfile


class ConfigError(ValueError):
    pass


@dataclass
class SweepConfig:
    n_t: List[int] = field(default_factory=lambda: [16])
    n_c: List[int] = field(default_factory=lambda: [2, 4])
    n_e: List[int] = field(default_factory=lambda: [1, 2, 3, 4, 5, 6])


@dataclass
class SolverConfig:
    tol: float = 1e-8
    max_iter: int = 5000
    resolve_after_rounding: bool = True


@dataclass
class TargetConfig:
    """True geometry of the designated eavesdropper (deception demos only)."""

    range_m: float = 20.0
    velocity_mps: float = 10.0
    path_gain: float = 1.0
    noise_var: float = 0.0


@dataclass
class RadarConfig:
    pad_range: int = 4
    pad_doppler: int = 4
    blind_equalization: str = "none"


@dataclass
class GridConfig:
    n_subcarriers: int = 64
    subcarrier_spacing_hz: float = 312.5e3
    n_symbols: int = 32
    carrier_hz: float = 5.9e9
    cp_len: int = 16


@dataclass
class SpoofConfig:
    fake_range_m: float = 30.0
    fake_doppler_hz: float = 500.0


@dataclass
class ScenarioConfig:
    n_antennas: int = 16
    spacing_over_wavelength: float = 0.5
    grid: GridConfig = field(default_factory=GridConfig)
    qam_order: int = 64
    noise_var: float = 1.0
    spoof: SpoofConfig = field(default_factory=SpoofConfig)
    # None means: draw a random topology
    comm_angles_deg: Optional[List[float]] = field(default_factory=lambda: [80.0])
    eve_angles_deg: Optional[List[float]] = field(default_factory=lambda: [70.0, 90.0])
    snr_sweep: List[float] = field(default_factory=lambda: [10.0])
    sweep: SweepConfig = field(default_factory=SweepConfig)
    n_trials: int = 100
    seed: int = 0
    output_dir: str = "out"
    solver: SolverConfig = field(default_factory=SolverConfig)
    target: TargetConfig = field(default_factory=TargetConfig)
    radar: RadarConfig = field(default_factory=RadarConfig)

    def __post_init__(self):
        self.validate()

    def validate(self):
        try:
            self.geometry()
            self.ofdm_grid()
            self.constellation()
            self.spoof_profile()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not self.noise_var > 0:
            raise ConfigError("noise_var must be positive")
        if self.n_trials < 1:
            raise ConfigError("n_trials must be >= 1")
        if not self.snr_sweep:
            raise ConfigError("snr_sweep must not be empty")
        for name in ("n_t", "n_c", "n_e"):
            vals = getattr(self.sweep, name)
            if not vals or any(int(v) != v or v < 0 for v in vals):
                raise ConfigError(f"sweep.{name} must be a non-empty list of non-negative integers")
        if min(self.sweep.n_t) < 1:
            raise ConfigError("sweep.n_t entries must be >= 1")
        for key in ("comm_angles_deg", "eve_angles_deg"):
            vals = getattr(self, key)
            if vals is not None and any(not 0.0 <= a <= 180.0 for a in vals):
                raise ConfigError(f"{key} entries must lie in [0, 180]")
        if (self.comm_angles_deg is None) != (self.eve_angles_deg is None):
            raise ConfigError("give both comm_angles_deg and eve_angles_deg, or neither")
        if self.radar.pad_range < 1 or self.radar.pad_doppler < 1:
            raise ConfigError("radar padding must be >= 1")
        if self.radar.blind_equalization not in ("none", "phase-only"):
            raise ConfigError("radar.blind_equalization must be 'none' or 'phase-only'")
        if self.solver.tol <= 0 or self.solver.max_iter < 1:
            raise ConfigError("solver tol must be positive and max_iter >= 1")

    def geometry(self, n_antennas: Optional[int] = None) -> ArrayGeometry:
        return ArrayGeometry(int(n_antennas or self.n_antennas), float(self.spacing_over_wavelength))

    def ofdm_grid(self) -> OfdmGrid:
        return OfdmGrid(**asdict(self.grid))

    def constellation(self) -> QamConstellation:
        return QamConstellation(int(self.qam_order))

    def spoof_profile(self) -> SpoofProfile:
        return SpoofProfile(float(self.spoof.fake_range_m), float(self.spoof.fake_doppler_hz))

    def fixed_bearings(self) -> Optional[Bearings]:
        if self.comm_angles_deg is None:
            return None
        return Bearings.from_degrees(self.comm_angles_deg, self.eve_angles_deg)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        return _build(cls, data, "")

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        try:
            text = Path(path).read_text()
        except OSError:
            raise
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(data)


_NESTED = {
    "grid": GridConfig, "spoof": SpoofConfig, "sweep": SweepConfig,
    "solver": SolverConfig, "target": TargetConfig, "radar": RadarConfig,
}


def _build(cls, data: dict, prefix: str):
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(prefix + k for k in unknown)}")
    kwargs = {}
    for key, value in data.items():
        if cls is ScenarioConfig and key in _NESTED:
            if not isinstance(value, dict):
                raise ConfigError(f"{prefix}{key} must be an object")
            value = _build(_NESTED[key], value, f"{prefix}{key}.")
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def trial_rng(seed: int, trial_id: int) -> np.random.Generator:
    """Per-trial stream that does not depend on execution order."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(trial_id)]))
