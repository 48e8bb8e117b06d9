"""Deceptive wireless beamforming (DWB) simulation library."""
from .signal_model import (ArrayGeometry, Bearings, ChannelRealization, OfdmGrid, QamConstellation,
                           SpoofProfile, SPEED_OF_LIGHT)
from .beamformer import DwbProblem, DwbSolution, NullingSolution, solve_dwb, solve_nulling
from .config import ScenarioConfig

__all__ = [
    "ArrayGeometry", "Bearings", "ChannelRealization", "OfdmGrid", "QamConstellation", "SpoofProfile",
    "SPEED_OF_LIGHT", "DwbProblem", "DwbSolution", "NullingSolution", "solve_dwb", "solve_nulling",
    "ScenarioConfig",
]
