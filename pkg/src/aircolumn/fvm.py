"""Fitted finite volume spatial discretization.

Face fluxes come from a local two-point boundary value problem with
frozen coefficients l = a^2 k and m = 2 a^2 xi k - a w on each interval:

    (l (1 - xi^2) V' + m V)' = 0,   V(xi_lo) = C_lo,  V(xi_hi) = C_hi.

Its constant flux is

    rho = m * (D(xi_hi) C_hi - D(xi_lo) C_lo) / (D(xi_hi) - D(xi_lo)),
    D(xi) = ((1 + xi)/(1 - xi))^(alpha/2),   alpha = m / l,

which is exact for the local exponential solution and hence robust under
advection dominance.  D overflows double precision already for moderate
alpha * atanh spans, so the implementation factors out the larger D and
works with e^(-|g|), g = alpha * (atanh(xi_hi) - atanh(xi_lo)).  As m -> 0
the flux tends to the pure-diffusion limit l (C_hi - C_lo) / (atanh(xi_hi)
- atanh(xi_lo)).

The last interval touches the degenerate boundary xi = 1, where the fitted
weight lbar = a^2 (1 + xi) k with the explicit (1 - xi) factor yields the
closed-form face flux 0.5 [(lbar + m) C_hi - (lbar - m) C_lo].

Assembly produces one tridiagonal stencil per species plus the dual-cell
weights; the semi-discrete system for the active nodes i = 1..N reads

    weight_i dC_i/dt = lower_i C_{i-1} - diag_i C_i + upper_i C_{i+1}
                       + weight_i (B_i + f_i)

with C_{N+1} pinned to zero.  Face coefficients are kept alongside the
stencil so that flux telescoping (the discrete mass balance) is an exact
algebraic identity of the stored numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from . import transform
from .source import SourceConfig, source_field

if TYPE_CHECKING:
    from .grid import SpatialGrid
    from .problem import TransformedProblem

# Below this |g| the exponential weights are evaluated by their series,
# whose truncation error is far below double precision there.
_SMALL_G = 1e-8


def stable_flux_weights(alpha: float, xi_lo: float, xi_hi: float) -> tuple[float, float]:
    """Overflow-safe weights (w_lo, w_hi) of the fitted face flux
    rho = m * (w_hi * C_hi - w_lo * C_lo) on the interval [xi_lo, xi_hi].

    alpha is the ratio m/l of the frozen face coefficients and must be
    nonzero here: the weight representation scales with 1/m, so the exact
    m = 0 flux has no finite weights.  `face_flux_coefficients` handles
    that limit in product form.
    """
    if not (0.0 <= xi_lo < xi_hi):
        raise ValueError(f"need 0 <= xi_lo < xi_hi, got [{xi_lo}, {xi_hi}]")
    if xi_hi >= 1.0:
        raise ValueError("degenerate interval: xi_hi must be below 1")
    g = alpha * (math.atanh(xi_hi) - math.atanh(xi_lo))
    if g == 0.0:
        raise ValueError(
            "alpha = 0 has no finite weight representation; "
            "use face_flux_coefficients for the pure-diffusion limit"
        )
    if abs(g) < _SMALL_G:
        # Series of 1/(1 - e^-g) and e^-g/(1 - e^-g); the dropped g/12 term
        # is O(g^2) relative to 1/g.
        return 1.0 / g - 0.5, 1.0 / g + 0.5
    if g > 0:
        denom = -math.expm1(-g)  # 1 - e^-g without cancellation
        return math.exp(-g) / denom, 1.0 / denom
    denom = math.expm1(g)  # e^g - 1, negative
    return 1.0 / denom, math.exp(g) / denom


def face_flux_coefficients(l: float, m: float, xi_lo: float, xi_hi: float) -> tuple[float, float]:
    """Flux coefficients (A_lo, A_hi) with rho = A_hi * C_hi - A_lo * C_lo
    for a fitted (non-degenerate) face; total also at m = 0, where the flux
    is the pure-diffusion limit l (C_hi - C_lo) / (atanh hi - atanh lo)."""
    if l <= 0:
        raise ValueError(f"fitted diffusion weight must be positive, got {l}")
    if not (0.0 <= xi_lo < xi_hi) or xi_hi >= 1.0:
        raise ValueError(f"invalid interval [{xi_lo}, {xi_hi}]")
    span = math.atanh(xi_hi) - math.atanh(xi_lo)
    g = (m / l) * span
    if abs(g) < _SMALL_G:
        base = l / span  # m * (1/g) in exact arithmetic
        return base - 0.5 * m, base + 0.5 * m
    w_lo, w_hi = stable_flux_weights(m / l, xi_lo, xi_hi)
    return m * w_lo, m * w_hi


def _face_flux_coefficients_vec(l, m, xi_lo, xi_hi):
    """Vectorized `face_flux_coefficients` over face arrays."""
    span = np.arctanh(xi_hi) - np.arctanh(xi_lo)
    g = (m / l) * span
    small = np.abs(g) < _SMALL_G
    base = l / span
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        dpos = -np.expm1(-g)
        dneg = np.expm1(g)
        a_lo = np.where(
            small,
            base - 0.5 * m,
            np.where(g > 0, m * np.exp(-np.abs(g)) / dpos, m / dneg),
        )
        a_hi = np.where(
            small,
            base + 0.5 * m,
            np.where(g > 0, m / dpos, m * np.exp(-np.abs(g)) / dneg),
        )
    return a_lo, a_hi


def degenerate_face_flux_weights(lbar: float, m: float) -> tuple[float, float]:
    """Coefficients (w_lo, w_hi) of the last-interval face flux
    rho = w_hi * C_{N+1} - w_lo * C_N = 0.5 [(lbar + m) C_{N+1} - (lbar - m) C_N]."""
    if lbar <= 0:
        raise ValueError(f"degenerate diffusion weight must be positive, got {lbar}")
    return 0.5 * (lbar - m), 0.5 * (lbar + m)


def robin_boundary_flux_coefficient(tp: "TransformedProblem", s: int) -> float:
    """Ground-face flux coefficient: the boundary condition folds the flux
    at xi = 0 into a(delta_s k_s(0) - w) * C_1."""
    spec = tp.base.species[s]
    return tp.a * (spec.delta * tp.k_value(s, 0.0) - tp.base.w)


@dataclass(frozen=True)
class CoefficientTable:
    """Immutable spatial discretization of one problem on one grid.

    Arrays are indexed by species s and active node i = 0..N-1 (grid node
    i; grid node N is pinned).  face_lo/face_hi hold the scaled per-face
    transport coefficients: the face between active nodes i and i+1 carries
    flux F_i = face_hi[s, i] C_{i+1} - face_lo[s, i] C_i, and the stencil is
    exactly the telescoped face differences plus the ground term
    bottom[s] * C_0 subtracted from row 0.
    """

    weights: np.ndarray  # (N,) dual-cell weights
    lower: np.ndarray  # (S, N) sub-diagonal stencil entries
    diag: np.ndarray  # (S, N) diagonal stencil entries
    upper: np.ndarray  # (S, N) super-diagonal entries; [:, -1] couples to the pinned node
    zero_order: np.ndarray  # (S, N) correction d at the active nodes
    face_lo: np.ndarray  # (S, N) scaled face coefficient on the lower node
    face_hi: np.ndarray  # (S, N) scaled face coefficient on the upper node
    bottom: np.ndarray  # (S,) ground-face coefficient on C_0

    def __post_init__(self):
        for name in ("weights", "lower", "diag", "upper", "zero_order", "face_lo", "face_hi", "bottom"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_active(self) -> int:
        return self.weights.size

    @property
    def species_count(self) -> int:
        return self.diag.shape[0]

    def apply_stencil(self, C: np.ndarray) -> np.ndarray:
        """Tridiagonal stencil applied to a full (S, N+1) field; returns the
        (S, N) flux-difference part of the semi-discrete right side."""
        n = self.n_active
        out = -self.diag * C[:, :n] + self.upper * C[:, 1 : n + 1]
        out[:, 1:] += self.lower[:, 1:] * C[:, : n - 1]
        return out

    def face_fluxes(self, C: np.ndarray) -> np.ndarray:
        """Scaled transport through each of the N faces for a full field."""
        n = self.n_active
        return self.face_hi * C[:, 1 : n + 1] - self.face_lo * C[:, :n]


def assemble_coefficients(tp: "TransformedProblem", grid: "SpatialGrid") -> CoefficientTable:
    """Build the full coefficient table for every species on a grid.

    All interior faces use the stabilized fitted weights; the last face
    uses the degenerate closed form; row 0 absorbs the ground (Robin) flux.
    """
    nodes = grid.nodes
    n = grid.n_intervals  # active nodes
    mids = grid.midpoints
    scale = 1.0 - mids * mids
    a = tp.a
    w = tp.base.w
    S = tp.species_count

    lower = np.zeros((S, n))
    diag = np.zeros((S, n))
    upper = np.zeros((S, n))
    face_lo = np.zeros((S, n))
    face_hi = np.zeros((S, n))
    bottom = np.zeros(S)
    zero_order = np.zeros((S, n))

    for s in range(S):
        k_mid = np.atleast_1d(tp.k_value(s, mids))
        l = a * a * k_mid
        m = 2.0 * a * a * mids * k_mid - a * w

        a_lo = np.empty(n)
        a_hi = np.empty(n)
        a_lo[:-1], a_hi[:-1] = _face_flux_coefficients_vec(
            l[:-1], m[:-1], nodes[:-2], nodes[1:-1]
        )
        lbar = a * a * (1.0 + mids[-1]) * k_mid[-1]
        a_lo[-1], a_hi[-1] = degenerate_face_flux_weights(lbar, m[-1])

        face_lo[s] = scale * a_lo
        face_hi[s] = scale * a_hi
        bottom[s] = robin_boundary_flux_coefficient(tp, s)

        upper[s] = face_hi[s]
        lower[s, 1:] = face_lo[s, :-1]
        diag[s] = face_lo[s]
        diag[s, 1:] += face_hi[s, :-1]
        diag[s, 0] += bottom[s]

        zero_order[s] = transform.zero_order_coefficients(tp, s, nodes[:n])

    return CoefficientTable(
        weights=grid.cell_weights,
        lower=lower,
        diag=diag,
        upper=upper,
        zero_order=zero_order,
        face_lo=face_lo,
        face_hi=face_hi,
        bottom=bottom,
    )


def apply_spatial_operator(
    table: CoefficientTable,
    tp: "TransformedProblem",
    grid: "SpatialGrid",
    source_cfg: SourceConfig,
    t: float,
    C: np.ndarray,
) -> np.ndarray:
    """Semi-discrete right side dC/dt for a full (S, N+1) field with the
    pinned node already zero; the pinned row of the output is zero."""
    n = table.n_active
    C = np.asarray(C, dtype=float)
    if C.shape != (table.species_count, n + 1):
        raise ValueError(f"expected field of shape {(table.species_count, n + 1)}, got {C.shape}")
    if np.any(C[:, -1] != 0.0):
        raise ValueError("the last node is pinned: C[:, -1] must be zero")
    rates = transform.reaction_rates(tp.base.reactions, C[:, :n])
    volumetric = rates - table.zero_order * C[:, :n]
    f = source_field(tp, source_cfg, t, grid)[:, :n]
    out = np.zeros_like(C)
    out[:, :n] = table.apply_stencil(C) / table.weights + volumetric + f
    return out
