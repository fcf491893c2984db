"""Truncated-domain cross-check solver.

Solves the untransformed column model on [0, z_max] with plain
second-order central differences and the same backward-Euler + Newton
machinery as the fitted solver, replacing the decay condition at infinity
by a homogeneous Dirichlet condition at z_max.  It exists to validate the
fitted solver against an independent discretization, not to be fast or
pretty; its only subtlety is matching the source regularization widths so
that both solvers see the same continuous problem.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .fvm import CoefficientTable
from .solver import SolverConfig, Solution, march_table
from .source import SourceConfig, delta_hat
from .transform import xi_to_z

if TYPE_CHECKING:
    from .problem import PhysicalProblem, TransformedProblem


@dataclass(frozen=True)
class TruncatedConfig:
    """z_max is the truncation height, Nz the interval count, dt the step;
    source_half_widths gives the per-species hat half-width in z units
    (scalar broadcasts; may be omitted when no species emits)."""

    z_max: float
    Nz: int
    dt: float
    source_half_widths: object = None

    def __post_init__(self):
        if self.z_max <= 0:
            raise ValueError("z_max must be positive")
        if self.Nz < 10:
            raise ValueError(f"need at least 10 intervals, got {self.Nz}")
        if self.dt <= 0:
            raise ValueError("dt must be positive")


def matched_source_half_widths(tp: "TransformedProblem", cfg: SourceConfig) -> np.ndarray:
    """Hat half-widths in z units that regularize comparably to the fitted
    solver's xi-space hats: h_z = h / (a (1 - xi_star^2)), the local stretch
    of the transform at each source."""
    return cfg.h / (tp.a * (1.0 - tp.xi_star**2))


def _assemble_truncated(p: "PhysicalProblem", cfg: TruncatedConfig):
    dz = cfg.z_max / cfg.Nz
    nodes = dz * np.arange(cfg.Nz + 1)
    nodes[-1] = cfg.z_max
    mids = 0.5 * (nodes[:-1] + nodes[1:])
    S = p.species_count
    n = cfg.Nz  # active nodes 0..Nz-1; the top node is pinned

    lower = np.zeros((S, n))
    diag = np.zeros((S, n))
    upper = np.zeros((S, n))
    face_lo = np.zeros((S, n))
    face_hi = np.zeros((S, n))
    bottom = np.zeros(S)

    worst_peclet = 0.0
    for s, spec in enumerate(p.species):
        k_mid = np.atleast_1d(spec.K.value(mids))
        worst_peclet = max(worst_peclet, float(np.max(abs(p.w) * dz / (2.0 * k_mid))))
        # Face transport in the outflow-positive convention used by the
        # fitted table: F = K c' - w c at each midpoint.
        face_hi[s] = k_mid / dz - 0.5 * p.w
        face_lo[s] = k_mid / dz + 0.5 * p.w
        bottom[s] = spec.K.value(0.0) * spec.delta - p.w
        upper[s] = face_hi[s]
        lower[s, 1:] = face_lo[s, :-1]
        diag[s] = face_lo[s]
        diag[s, 1:] += face_hi[s, :-1]
        diag[s, 0] += bottom[s]
    if worst_peclet > 1.0:
        warnings.warn(
            f"cell Peclet number {worst_peclet:.3g} exceeds 1; the central scheme "
            "may oscillate — refine the truncated grid",
            stacklevel=3,
        )
    weights = np.full(n, dz)
    weights[0] = 0.5 * dz
    table = CoefficientTable(
        weights=weights,
        lower=lower,
        diag=diag,
        upper=upper,
        zero_order=np.zeros((S, n)),
        face_lo=face_lo,
        face_hi=face_hi,
        bottom=bottom,
    )
    return table, nodes


def solve_truncated(
    p: "PhysicalProblem", cfg: TruncatedConfig, solver_cfg: SolverConfig | None = None
) -> Solution:
    """March the central-difference discretization of the z-space model on
    [0, z_max] with Dirichlet zero at the top and the same Robin condition
    at the ground."""
    from .grid import build_time_grid  # local import to avoid cycles at module load
    from .problem import validate_problem

    validate_problem(p)
    half_widths = np.broadcast_to(
        np.asarray(
            cfg.source_half_widths if cfg.source_half_widths is not None else 0.0, dtype=float
        ),
        (p.species_count,),
    )
    z_stars = np.array([spec.z_star for spec in p.species])
    emitting = [s for s, spec in enumerate(p.species) if spec.has_source]
    for s in emitting:
        if half_widths[s] <= 0:
            raise ValueError(f"species {s + 1} emits but has no positive source half-width")
        if z_stars[s] + 2 * half_widths[s] >= cfg.z_max:
            raise ValueError(
                f"species {s + 1}: source support reaches the truncation height {cfg.z_max}"
            )
    table, nodes = _assemble_truncated(p, cfg)
    time_grid = build_time_grid(p.T, cfg.dt)
    solver_cfg = solver_cfg or SolverConfig()

    def source_fn(t: float) -> np.ndarray:
        f = np.zeros((p.species_count, nodes.size))
        for s in emitting:
            f[s] = p.species[s].source_rate(t) * delta_hat(nodes, z_stars[s], half_widths[s])
        return f

    C0 = np.stack([spec.c0.value(nodes) for spec in p.species])
    C0[:, -1] = 0.0
    return march_table(table, p.reactions, C0, time_grid, solver_cfg, source_fn, nodes)


@dataclass(frozen=True)
class CompareReport:
    """Per-species error norms of the fitted solution against the
    truncated-domain reference over a height window."""

    z_window: tuple
    n_points: int
    rel_l2: np.ndarray
    rel_max: np.ndarray


def compare(
    fitted: Solution,
    tp: "TransformedProblem",
    reference: Solution,
    z_window: tuple = (0.0, 300.0),
) -> CompareReport:
    """Map the fitted nodes to heights, interpolate the reference there,
    and report relative L2 and max differences per species at the final
    snapshot of each solution."""
    z_lo, z_hi = float(z_window[0]), float(z_window[1])
    if z_hi <= z_lo:
        raise ValueError("empty comparison window")
    t_fit, t_ref = float(fitted.times[-1]), float(reference.times[-1])
    if abs(t_fit - t_ref) > 1e-12 * max(1.0, abs(t_fit)):
        raise ValueError(
            f"solutions end at different times ({t_fit} vs {t_ref}); "
            "compare requires a common final time"
        )
    xi = fitted.nodes[:-1]  # the pinned node is at infinite height
    z_fit = xi_to_z(tp.a, xi)
    inside = (z_fit >= z_lo) & (z_fit <= z_hi) & (z_fit <= reference.nodes[-1])
    if not np.any(inside):
        raise ValueError(
            f"comparison window [{z_lo}, {z_hi}] contains no overlapping fitted nodes"
        )
    z_pts = z_fit[inside]
    S = fitted.final.shape[0]
    if reference.final.shape[0] != S:
        raise ValueError("species counts differ between the two solutions")
    rel_l2 = np.zeros(S)
    rel_max = np.zeros(S)
    for s in range(S):
        fit = fitted.final[s, :-1][inside]
        ref = np.interp(z_pts, reference.nodes, reference.final[s])
        denom_l2 = float(np.linalg.norm(ref))
        denom_max = float(np.max(np.abs(ref)))
        diff = fit - ref
        rel_l2[s] = float(np.linalg.norm(diff)) / denom_l2 if denom_l2 > 0 else 0.0
        rel_max[s] = float(np.max(np.abs(diff))) / denom_max if denom_max > 0 else 0.0
    return CompareReport(
        z_window=(z_lo, z_hi), n_points=int(inside.sum()), rel_l2=rel_l2, rel_max=rel_max
    )
