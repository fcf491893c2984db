"""Fully implicit time stepping with Newton's method.

Each backward-Euler step solves, for the active nodes of every species,

    G_{s,i} = weight_i (C_new - C_old)_{s,i} / dt
              - [stencil C_new]_{s,i}
              - weight_i (r_s(C_new_i) - d_{s,i} C_new_{s,i} + f_{s,i}(t_new))
            = 0,

with full (undamped) Newton iterations from the previous time level.  The
unknowns are ordered node-major with the S species contiguous per node, so
the Jacobian is block tridiagonal with dense S x S diagonal blocks (the
reaction coupling) and diagonal off-blocks (the per-species fluxes); the
linear solves go through LAPACK's banded factorization with bandwidth S.

The marcher works on any assembled `CoefficientTable`, which is how the
truncated-domain reference solver reuses this machinery unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable

import numpy as np
from scipy.linalg import lapack

from . import transform
from .fvm import CoefficientTable, assemble_coefficients
from .source import SourceConfig, source_field

if TYPE_CHECKING:
    from .grid import SpatialGrid, TimeGrid
    from .problem import ReactionNetwork, TransformedProblem


class SingularBlockError(RuntimeError):
    """A diagonal block of the Newton system was singular."""

    def __init__(self, node: int):
        self.node = node
        super().__init__(f"singular diagonal block in the Newton system at node {node + 1}")


class NewtonConvergenceError(RuntimeError):
    """Newton failed to meet the residual tolerance within the iteration cap."""

    def __init__(self, iterations: int, residual_norm: float, node: int, species: int):
        self.iterations = iterations
        self.residual_norm = residual_norm
        self.node = node
        self.species = species
        super().__init__(
            f"Newton did not converge in {iterations} iterations: "
            f"residual {residual_norm:.3e} (worst at node {node + 1}, species {species + 1})"
        )


@dataclass(frozen=True)
class SolverConfig:
    newton_tol: float = 1e-10
    newton_max_iter: int = 25
    nonneg_monitor: bool = True
    snapshot_every: int = 1

    def __post_init__(self):
        if self.newton_tol <= 0:
            raise ValueError("newton_tol must be positive")
        if self.newton_max_iter < 1:
            raise ValueError("newton_max_iter must be at least 1")
        if self.snapshot_every < 1:
            raise ValueError("snapshot_every must be at least 1")


@dataclass
class Solution:
    """Snapshots plus per-step monitors of one march.

    fields[k] has shape (S, n_nodes) and belongs to times[k]; the pinned
    node is zero in every snapshot.  mass_residuals[j, s] is the relative
    defect of the discrete per-species balance (weighted field change =
    boundary fluxes + volumetric terms) at step j.
    """

    nodes: np.ndarray
    times: np.ndarray
    fields: list
    newton_iterations: np.ndarray
    min_values: np.ndarray
    mass_residuals: np.ndarray

    @property
    def final(self) -> np.ndarray:
        return self.fields[-1]


def residual(
    table: CoefficientTable,
    net: "ReactionNetwork",
    C_new: np.ndarray,
    C_old: np.ndarray,
    dt: float,
    f_new: np.ndarray,
) -> np.ndarray:
    """Implicit-step residual G on the active nodes, shape (S, N).

    C_new and C_old are full (S, N+1) fields with the pinned node zero;
    f_new is the source field at the new time level on the active nodes.
    """
    n = table.n_active
    if C_new.shape != C_old.shape or C_new.shape[1] != n + 1:
        raise ValueError("field shapes do not match the table")
    rates = transform.reaction_rates(net, C_new[:, :n])
    volumetric = rates - table.zero_order * C_new[:, :n]
    return (
        table.weights * (C_new[:, :n] - C_old[:, :n]) / dt
        - table.apply_stencil(C_new)
        - table.weights * (volumetric + f_new[:, :n])
    )


@dataclass(frozen=True)
class BlockTridiagonalJacobian:
    """Newton matrix in block form: dense (N, S, S) diagonal blocks and
    diagonal off-blocks stored as their (N-1, S) diagonals."""

    dblocks: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.dblocks.shape[0]

    @property
    def species_count(self) -> int:
        return self.dblocks.shape[1]


def step_jacobian(
    table: CoefficientTable, net: "ReactionNetwork", C_new: np.ndarray, dt: float
) -> BlockTridiagonalJacobian:
    """Analytic Jacobian of `residual` with respect to the active unknowns."""
    n = table.n_active
    S = table.species_count
    jr = transform.reaction_jacobian_field(net, C_new[:, :n])  # (n, S, S)
    dblocks = -table.weights[:, None, None] * jr
    rng = np.arange(S)
    # weight/dt mass term, flux diagonal, and the +weight*d part of -dB/dC.
    dblocks[:, rng, rng] += (
        table.weights[:, None] / dt + table.diag.T + table.weights[:, None] * table.zero_order.T
    )
    lower = -table.lower[:, 1:].T.copy()  # (n-1, S): row i+1 coupling to node i
    upper = -table.upper[:, : n - 1].T.copy()  # (n-1, S): row i coupling to node i+1
    return BlockTridiagonalJacobian(dblocks=dblocks, lower=lower, upper=upper)


def solve_block_tridiagonal(jac: BlockTridiagonalJacobian, rhs: np.ndarray) -> np.ndarray:
    """Solve jac @ x = rhs for rhs of shape (S, N); returns x with the same
    shape.  Uses the LAPACK banded solver on the node-major ordering
    (bandwidth S), which reports the failing node on a singular pivot."""
    n = jac.n_nodes
    S = jac.species_count
    if rhs.shape != (S, n):
        raise ValueError(f"expected right side of shape {(S, n)}, got {rhs.shape}")
    kl = ku = S
    ab = np.zeros((2 * kl + ku + 1, n * S))
    row0 = kl + ku
    for dr in range(S):
        for ds in range(S):
            ab[row0 + dr - ds, ds::S] = jac.dblocks[:, dr, ds]
    for s in range(S):
        ab[row0 - S, S + s :: S] = jac.upper[:, s]
        ab[row0 + S, s::S][: n - 1] = jac.lower[:, s]
    b = rhs.T.ravel()
    _, _, x, info = lapack.dgbsv(kl, ku, ab, b)
    if info > 0:
        raise SingularBlockError(node=(info - 1) // S)
    if info < 0:
        raise RuntimeError(f"banded solver rejected argument {-info}")
    return x.reshape(n, S).T


def newton_solve(
    table: CoefficientTable,
    net: "ReactionNetwork",
    C_old: np.ndarray,
    dt: float,
    f_new: np.ndarray,
    cfg: SolverConfig,
) -> tuple[np.ndarray, int]:
    """One implicit step: full Newton from C_old until the residual
    infinity norm meets cfg.newton_tol.  Returns (C_new, iterations)."""
    n = table.n_active
    C = C_old.copy()
    for iteration in range(cfg.newton_max_iter + 1):
        G = residual(table, net, C, C_old, dt, f_new)
        norm = float(np.max(np.abs(G)))
        if norm <= cfg.newton_tol:
            return C, iteration
        if iteration == cfg.newton_max_iter:
            s, i = np.unravel_index(int(np.argmax(np.abs(G))), G.shape)
            raise NewtonConvergenceError(iteration, norm, node=int(i), species=int(s))
        jac = step_jacobian(table, net, C, dt)
        C[:, :n] += solve_block_tridiagonal(jac, -G)
    raise AssertionError("unreachable")


def _mass_balance_residuals(
    table: CoefficientTable,
    net: "ReactionNetwork",
    C_new: np.ndarray,
    C_old: np.ndarray,
    dt: float,
    f_new: np.ndarray,
) -> np.ndarray:
    """Relative defect of the per-species discrete balance at one step.

    The defect is a backward error: it is normalized by the largest gross
    contribution, with the volumetric integral measured at the level of
    the individual rate terms before any cancellation.  Stiff chemistry
    evaluates r(C) as a difference of large terms, and that pre-cancellation
    magnitude, not the net rate, is what bounds the round-off the balance
    legitimately carries.
    """
    n = table.n_active
    change = table.weights * (C_new[:, :n] - C_old[:, :n]) / dt
    rates = transform.reaction_rates(net, C_new[:, :n])
    volumetric = rates - table.zero_order * C_new[:, :n]
    gross_vol = transform.reaction_gross_magnitude(net, C_new[:, :n]) + np.abs(
        table.zero_order * C_new[:, :n]
    )
    top = table.face_hi[:, -1] * C_new[:, n] - table.face_lo[:, -1] * C_new[:, n - 1]
    bot = table.bottom * C_new[:, 0]
    lhs = change.sum(axis=1)
    reacted = (table.weights * volumetric).sum(axis=1)
    injected = (table.weights * f_new[:, :n]).sum(axis=1)
    rhs = top - bot + reacted + injected
    scale = np.maximum.reduce(
        [
            np.abs(lhs),
            np.abs(top),
            np.abs(bot),
            (table.weights * gross_vol).sum(axis=1),
            (table.weights * np.abs(f_new[:, :n])).sum(axis=1),
        ]
    )
    return np.abs(lhs - rhs) / np.maximum(scale, 1e-300)


def march_table(
    table: CoefficientTable,
    net: "ReactionNetwork",
    C0: np.ndarray,
    time_grid: "TimeGrid",
    cfg: SolverConfig,
    source_fn: Callable[[float], np.ndarray],
    nodes: np.ndarray,
) -> Solution:
    """Backward-Euler march of an assembled table from the initial field.

    source_fn(t) must return the (S, n_nodes) source field at time t.
    Monitors (Newton iterations, field minimum, mass-balance defect) are
    recorded every step; snapshots every cfg.snapshot_every steps and at
    the final time.
    """
    levels = time_grid.levels
    n_steps = time_grid.n_steps
    C = C0.copy()
    C[:, -1] = 0.0
    times = [levels[0]]
    fields = [C.copy()]
    iters = np.zeros(n_steps, dtype=int)
    mins = np.zeros(n_steps)
    balance = np.zeros((n_steps, table.species_count))
    for j in range(n_steps):
        t_new = float(levels[j + 1])
        dt = float(levels[j + 1] - levels[j])
        f_new = source_fn(t_new)
        try:
            C_new, iters[j] = newton_solve(table, net, C, dt, f_new, cfg)
        except NewtonConvergenceError as err:
            raise NewtonConvergenceError(
                err.iterations, err.residual_norm, err.node, err.species
            ) from RuntimeError(f"time step {j + 1} (t = {t_new:.6g}) failed")
        mins[j] = float(C_new.min()) if cfg.nonneg_monitor else np.nan
        balance[j] = _mass_balance_residuals(table, net, C_new, C, dt, f_new)
        C = C_new
        if (j + 1) % cfg.snapshot_every == 0 or j + 1 == n_steps:
            times.append(t_new)
            fields.append(C.copy())
    return Solution(
        nodes=np.asarray(nodes, dtype=float),
        times=np.asarray(times),
        fields=fields,
        newton_iterations=iters,
        min_values=mins,
        mass_residuals=balance,
    )


def march(
    tp: "TransformedProblem",
    grid: "SpatialGrid",
    time_grid: "TimeGrid",
    cfg: SolverConfig,
    source_cfg: SourceConfig,
) -> Solution:
    """Assemble the fitted discretization and march it over the time grid."""
    table = assemble_coefficients(tp, grid)
    C0 = tp.initial_field(grid.nodes)
    C0[:, -1] = 0.0  # the pinned boundary value wins over the initial profile
    source_fn = lambda t: source_field(tp, source_cfg, t, grid)
    return march_table(table, tp.base.reactions, C0, time_grid, cfg, source_fn, grid.nodes)


@dataclass
class PositivityReport:
    """Sampled check of the sufficient conditions for solution bounds.

    Condition "zero floor": the volumetric term of species s with C_s = 0
    must be non-negative on the non-negative orthant (this is what keeps
    concentrations from crossing zero).  Condition "upper bound": with
    C_s = M_s it must be non-positive (this is what would cap the solution
    at M).  Violations carry (species, xi, concentrations, value).
    """

    bounds: np.ndarray
    samples_per_axis: int
    points_checked: int
    floor_violations: list = field(default_factory=list)
    bound_violations: list = field(default_factory=list)

    @property
    def floor_ok(self) -> bool:
        return not self.floor_violations

    @property
    def bound_ok(self) -> bool:
        return not self.bound_violations


def check_positivity_conditions(
    tp: "TransformedProblem",
    bounds,
    samples_per_axis: int,
    grid: "SpatialGrid",
) -> PositivityReport:
    """Sample both conditions on the lattice [0, M_1] x ... x [0, M_S]
    (samples_per_axis points per axis) with xi running over the grid nodes.
    Report-only: violations are collected with witnesses, never raised."""
    bounds = np.asarray(bounds, dtype=float)
    S = tp.species_count
    if bounds.shape != (S,) or np.any(bounds < 0):
        raise ValueError(f"need {S} non-negative box bounds")
    if samples_per_axis < 1:
        raise ValueError("samples_per_axis must be at least 1")
    net = tp.base.reactions
    axes = [np.linspace(0.0, float(b), samples_per_axis) if b > 0 else np.zeros(1) for b in bounds]
    mesh = np.meshgrid(*axes, indexing="ij")
    lattice = np.stack([m.ravel() for m in mesh])  # (S, n_points)
    n_points = lattice.shape[1]
    # Tolerance floor for calling a sampled value a violation: round-off in
    # the rate sums must not produce spurious witnesses.
    mmax = float(bounds.max(initial=0.0))
    rate_scale = float(np.abs(net.gamma).sum()) * mmax
    rate_scale += sum(abs(v) for *_ijk, v in net.beta) * mmax * mmax
    tol = 1e-12 * max(1.0, rate_scale)

    report = PositivityReport(
        bounds=bounds, samples_per_axis=samples_per_axis, points_checked=n_points
    )
    d_min = np.empty(S)
    d_argmin = np.empty(S)
    for s in range(S):
        d = transform.zero_order_coefficients(tp, s, grid.nodes)
        d_min[s] = d.min()
        d_argmin[s] = grid.nodes[int(d.argmin())]
    for s in range(S):
        pinned = lattice.copy()
        pinned[s] = 0.0
        values = transform.reaction_rates(net, pinned)[s]
        for idx in np.nonzero(values < -tol)[0]:
            report.floor_violations.append(
                (s, float(grid.nodes[0]), tuple(pinned[:, idx]), float(values[idx]))
            )
        capped = lattice.copy()
        capped[s] = bounds[s]
        # The xi dependence enters only through -d_s(xi) M_s, so the worst
        # grid point is the one minimizing d_s.
        worst = transform.reaction_rates(net, capped)[s] - d_min[s] * bounds[s]
        for idx in np.nonzero(worst > tol)[0]:
            report.bound_violations.append(
                (s, float(d_argmin[s]), tuple(capped[:, idx]), float(worst[idx]))
            )
    return report
