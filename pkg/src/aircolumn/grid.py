"""Spatial meshes on [0, 1] and the time mesh.

Node numbering follows the scheme convention: N intervals give N + 1
nodes with the first at 0 and the last at 1; the last node is the pinned
(degenerate) boundary.  Dual cells are bounded by interval midpoints; the
first node owns the half cell [0, mid_1] and interior node i owns
[mid_{i-1}, mid_i].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SpatialGrid:
    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 4:
            raise ValueError("need at least 3 intervals (4 nodes)")
        if nodes[0] != 0.0 or nodes[-1] != 1.0:
            raise ValueError("grid must span [0, 1] exactly")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("grid nodes must be strictly increasing")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def uniform(cls, n_intervals: int) -> "SpatialGrid":
        if n_intervals < 3:
            raise ValueError(f"need at least 3 intervals, got {n_intervals}")
        return cls(np.arange(n_intervals + 1) / n_intervals)

    @classmethod
    def from_nodes(cls, nodes) -> "SpatialGrid":
        return cls(np.asarray(nodes, dtype=float))

    @property
    def n_intervals(self) -> int:
        return self.nodes.size - 1

    @property
    def n_nodes(self) -> int:
        return self.nodes.size

    @property
    def widths(self) -> np.ndarray:
        """Interval widths h_i, length N."""
        return np.diff(self.nodes)

    @property
    def midpoints(self) -> np.ndarray:
        """Interval midpoints (the dual-cell faces), length N."""
        return 0.5 * (self.nodes[:-1] + self.nodes[1:])

    @property
    def dual_widths(self) -> np.ndarray:
        """Interior dual-cell widths (h_{i-1} + h_i)/2, length N - 1."""
        h = self.widths
        return 0.5 * (h[:-1] + h[1:])

    @property
    def cell_weights(self) -> np.ndarray:
        """Dual-cell weights of the N active nodes: h_1/2 for the boundary
        node, then the interior dual widths."""
        h = self.widths
        return np.concatenate(([0.5 * h[0]], self.dual_widths))


def build_uniform_grid(n_intervals: int) -> SpatialGrid:
    return SpatialGrid.uniform(n_intervals)


@dataclass(frozen=True)
class TimeGrid:
    levels: np.ndarray

    def __post_init__(self):
        levels = np.asarray(self.levels, dtype=float)
        if levels.ndim != 1 or levels.size < 2 or levels[0] != 0.0:
            raise ValueError("time grid must start at 0 and contain at least one step")
        if np.any(np.diff(levels) <= 0):
            raise ValueError("time levels must be strictly increasing")
        levels.setflags(write=False)
        object.__setattr__(self, "levels", levels)

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.levels)

    @property
    def n_steps(self) -> int:
        return self.levels.size - 1

    @property
    def final_time(self) -> float:
        return float(self.levels[-1])


def build_time_grid(T: float, dt: float) -> TimeGrid:
    """Constant-step time grid on [0, T]; a shortened final step absorbs
    any remainder when T/dt is not integral."""
    if dt <= 0:
        raise ValueError(f"time step must be positive, got {dt}")
    if dt > T:
        raise ValueError(f"time step {dt} exceeds the final time {T}")
    n_full = int(np.floor(T / dt + 1e-9))
    levels = dt * np.arange(n_full + 1)
    # Guard against a remainder that is pure floating-point dust.
    if T - levels[-1] > 1e-12 * T:
        levels = np.append(levels, T)
    else:
        levels[-1] = T
    return TimeGrid(levels)
