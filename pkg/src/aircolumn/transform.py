"""Coordinate maps between the half-line and the unit interval, and point
evaluation of the transformed PDE coefficients.

The height coordinate z in [0, inf) maps to xi in [0, 1) through
xi = tanh(a*z), with inverse z = atanh(xi)/a; a is the stretching factor.
Under this map the column model

    dc/dt = d/dz(K dc/dz) - w dc/dz + r(c) + sources

becomes, in conservative form on (0, 1),

    dC/dt = d/dxi(p C' + q C) + (r(C) - d C) + sources

with

    p(xi) = a^2 (1 - xi^2)^2 k(xi)
    q(xi) = a (1 - xi^2) (2 a xi k(xi) - w)
    d(xi) = 2 a^2 (1 - 3 xi^2) k(xi) + 2 a xi K'(z(xi)) + 2 a w xi

where k(xi) = K(z(xi)) and K' is the height derivative of the diffusion
profile.  The fitted face fluxes additionally use the frozen-coefficient
weights l = a^2 k and m = 2 a^2 xi k - a w, and, on the last (degenerate)
interval, lbar = a^2 (1 + xi) k.

Everything here is a pure function of immutable inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .problem import ReactionNetwork, TransformedProblem


def z_to_xi(a: float, z):
    """Map height z >= 0 to xi = tanh(a*z) in [0, 1).

    Overflow-safe for arbitrarily large z (tanh saturates at 1).
    Accepts scalars or arrays.
    """
    if a <= 0:
        raise ValueError(f"stretching factor must be positive, got {a}")
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise ValueError("height must be non-negative")
    out = np.tanh(a * z)
    return float(out) if out.ndim == 0 else out


def xi_to_z(a: float, xi):
    """Map xi in [0, 1) back to height z = atanh(xi)/a.

    xi >= 1 corresponds to infinite height and is rejected.
    """
    if a <= 0:
        raise ValueError(f"stretching factor must be positive, got {a}")
    xi = np.asarray(xi, dtype=float)
    if np.any(xi < 0):
        raise ValueError("xi must be non-negative")
    if np.any(xi >= 1):
        raise ValueError("xi must be below 1 (xi = 1 is infinite height)")
    out = np.arctanh(xi) / a
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class CoefficientSample:
    """All transformed coefficients of one species at one point.

    diffusion and advection are the conservative-form flux coefficients
    p and q; fitted_diffusion and fitted_advection are the frozen weights
    l, m used by the two-point face problem; degenerate_diffusion is the
    last-interval weight lbar; zero_order is the correction d that the
    divergence form subtracts from the reaction term.
    """

    diffusion: float
    advection: float
    fitted_diffusion: float
    fitted_advection: float
    degenerate_diffusion: float
    zero_order: float


def eval_coefficients(tp: "TransformedProblem", s: int, xi: float) -> CoefficientSample:
    """Evaluate every transformed coefficient of species s at xi in [0, 1].

    At xi = 1 the diffusion profile is taken at its limiting (extrapolated)
    value; the degeneracy factor (1 - xi^2) then makes p and q vanish
    exactly.
    """
    if not 0.0 <= xi <= 1.0:
        raise ValueError(f"xi must lie in [0, 1], got {xi}")
    a = tp.a
    w = tp.base.w
    k = tp.k_value(s, xi)
    kz = tp.k_slope(s, xi)
    one_m = 1.0 - xi * xi
    return CoefficientSample(
        diffusion=a * a * one_m * one_m * k,
        advection=a * one_m * (2.0 * a * xi * k - w),
        fitted_diffusion=a * a * k,
        fitted_advection=2.0 * a * a * xi * k - a * w,
        degenerate_diffusion=a * a * (1.0 + xi) * k,
        # (1 - xi^2) dk/dxi collapses to K'(z)/a by the chain rule, which
        # avoids the 1/(1 - xi^2) singularity at xi = 1.
        zero_order=2.0 * a * a * (1.0 - 3.0 * xi * xi) * k + 2.0 * a * xi * kz + 2.0 * a * w * xi,
    )


def zero_order_coefficients(tp: "TransformedProblem", s: int, xi: np.ndarray) -> np.ndarray:
    """Vectorized zero-order correction d(xi) for species s."""
    xi = np.asarray(xi, dtype=float)
    a = tp.a
    w = tp.base.w
    k = tp.k_value(s, xi)
    kz = tp.k_slope(s, xi)
    return 2.0 * a * a * (1.0 - 3.0 * xi * xi) * k + 2.0 * a * xi * kz + 2.0 * a * w * xi


def reaction_rates(net: "ReactionNetwork", C: np.ndarray) -> np.ndarray:
    """Reaction rate vector r(C).

    r_s = sum_i gamma[s, i] C_i + sum over bilinear entries (s, i, j) of
    beta_value * C_i * C_j.  C may be a length-S vector or an (S, n) field;
    the result has the same shape.
    """
    C = np.asarray(C, dtype=float)
    if C.shape[0] != net.species_count:
        raise ValueError(
            f"concentration vector has {C.shape[0]} species, network has {net.species_count}"
        )
    r = net.gamma @ C
    for s, i, j, value in net.beta:
        r[s] += value * C[i] * C[j]
    return r


def reaction_gross_magnitude(net: "ReactionNetwork", C: np.ndarray) -> np.ndarray:
    """Sum of the absolute values of every term entering r(C): the
    cancellation scale of the rate evaluation, used to normalize
    round-off-sensitive audits.  Same shapes as `reaction_rates`."""
    C = np.asarray(C, dtype=float)
    if C.shape[0] != net.species_count:
        raise ValueError(
            f"concentration vector has {C.shape[0]} species, network has {net.species_count}"
        )
    gross = np.abs(net.gamma) @ np.abs(C)
    for s, i, j, value in net.beta:
        gross[s] += abs(value) * np.abs(C[i]) * np.abs(C[j])
    return gross


def reaction_jacobian(net: "ReactionNetwork", C: np.ndarray) -> np.ndarray:
    """Analytic Jacobian dr_s/dC_m of the reaction rates at a single point.

    Entry (s, m) = gamma[s, m] + sum_j (beta[s, m, j] + beta[s, j, m]) C_j.
    """
    C = np.asarray(C, dtype=float)
    if C.shape != (net.species_count,):
        raise ValueError(
            f"expected concentration vector of length {net.species_count}, got shape {C.shape}"
        )
    jac = net.gamma.copy()
    for s, i, j, value in net.beta:
        jac[s, i] += value * C[j]
        jac[s, j] += value * C[i]
    return jac


def reaction_jacobian_field(net: "ReactionNetwork", C: np.ndarray) -> np.ndarray:
    """Reaction Jacobians at every node of an (S, n) field, shape (n, S, S)."""
    C = np.asarray(C, dtype=float)
    if C.shape[0] != net.species_count:
        raise ValueError(
            f"concentration field has {C.shape[0]} species, network has {net.species_count}"
        )
    n = C.shape[1]
    jac = np.broadcast_to(net.gamma, (n,) + net.gamma.shape).copy()
    for s, i, j, value in net.beta:
        jac[:, s, i] += value * C[j]
        jac[:, s, j] += value * C[i]
    return jac


def zero_order_term(tp: "TransformedProblem", s: int, xi: float, C: np.ndarray) -> float:
    """Volumetric (non-flux) term of species s at one point:
    r_s(C) - d_s(xi) * C_s."""
    rates = reaction_rates(tp.base.reactions, C)
    d = eval_coefficients(tp, s, xi).zero_order
    return float(rates[s] - d * C[s])
