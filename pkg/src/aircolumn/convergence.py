"""Pointwise convergence-rate estimation from three nested-grid solutions.

With fields C^N, C^2N, C^4N computed on nested uniform grids (identical
time step, horizon, and source regularization), the observed order at a
coarse node is

    n(xi) = log2( |C^N(xi) - C^2N(xi)| / |C^2N(xi) - C^4N(xi)| ).

Nodes where either difference sits at round-off level carry no information
and are flagged undefined instead of reported.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import SpatialGrid

# Differences below this fraction of the field magnitude are round-off.
_FLOOR_FRACTION = 1e-14


@dataclass(frozen=True)
class RateTable:
    """Per-species observed orders at the coarse-grid nodes; rates[s, i] is
    NaN wherever defined[s, i] is False."""

    xi: np.ndarray
    rates: np.ndarray
    defined: np.ndarray

    def __post_init__(self):
        for name in ("xi", "rates", "defined"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def species_count(self) -> int:
        return self.rates.shape[0]


def runge_rates(
    field_coarse: np.ndarray,
    field_mid: np.ndarray,
    field_fine: np.ndarray,
    grid_coarse: SpatialGrid,
) -> RateTable:
    """Observed convergence orders at every coarse node from final-time
    fields on grids with N, 2N, and 4N intervals."""
    field_coarse = np.asarray(field_coarse, dtype=float)
    field_mid = np.asarray(field_mid, dtype=float)
    field_fine = np.asarray(field_fine, dtype=float)
    if not (field_coarse.shape[0] == field_mid.shape[0] == field_fine.shape[0]):
        raise ValueError("species counts differ between the three solutions")
    n = grid_coarse.n_intervals
    if field_coarse.shape[1] != n + 1:
        raise ValueError(
            f"coarse field has {field_coarse.shape[1]} nodes, grid has {n + 1}"
        )
    if field_mid.shape[1] != 2 * n + 1 or field_fine.shape[1] != 4 * n + 1:
        raise ValueError(
            "grids are not nested: expected 2N and 4N intervals for the finer solutions"
        )
    on_mid = field_mid[:, ::2]
    on_fine = field_fine[:, ::4]
    S = field_coarse.shape[0]
    rates = np.full((S, n + 1), np.nan)
    defined = np.zeros((S, n + 1), dtype=bool)
    for s in range(S):
        floor = _FLOOR_FRACTION * max(
            np.abs(field_coarse[s]).max(),
            np.abs(field_mid[s]).max(),
            np.abs(field_fine[s]).max(),
        )
        num = np.abs(field_coarse[s] - on_mid[s])
        den = np.abs(on_mid[s] - on_fine[s])
        ok = (num > floor) & (den > floor)
        rates[s, ok] = np.log2(num[ok] / den[ok])
        defined[s] = ok
    return RateTable(xi=grid_coarse.nodes.copy(), rates=rates, defined=defined)
