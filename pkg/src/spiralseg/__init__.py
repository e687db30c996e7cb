"""Strongly competing systems near a multiple point: solver and spiral diagnostics."""

from .grid import Field, StripGrid, build_grid, from_cartesian, to_cartesian
from .solver import CompetitionMatrix, SystemState, continuation_sweep, relax_system, solve_screened
from .spectral import SpectralConstants, alpha_of, lambda_of, predicted_nu, weights_U
from .traces import TraceSpec, make_sector_traces

__all__ = [
    "CompetitionMatrix", "Field", "SpectralConstants", "StripGrid", "SystemState", "TraceSpec",
    "alpha_of", "build_grid", "continuation_sweep", "from_cartesian", "lambda_of",
    "make_sector_traces", "predicted_nu", "relax_system", "solve_screened", "to_cartesian",
    "weights_U",
]
