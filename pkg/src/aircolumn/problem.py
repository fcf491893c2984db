"""Physical column model definition, validation, and its transformed
counterpart on the unit interval.

A problem holds S chemical species, each with a diffusion profile K(z),
a ground-level Robin constant, a point-source emission rate polynomial in
time, a source height, and an initial profile, plus a shared vertical wind
speed and a reaction network with linear (gamma) and bilinear (beta) rate
constants.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import transform


class ProblemValidationError(ValueError):
    """Raised with the full list of invariant violations found."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("invalid problem:\n  " + "\n  ".join(self.violations))


@dataclass(frozen=True)
class Profile:
    """Scalar profile of height: either constant or a piecewise-linear
    table with constant extrapolation beyond its endpoints.

    `value` handles z = inf (returns the upper extrapolation value), which
    is how coefficients at xi = 1 get their limiting diffusion value.
    """

    points: np.ndarray | None
    values: np.ndarray

    @classmethod
    def constant(cls, c: float) -> "Profile":
        return cls(points=None, values=np.array([float(c)]))

    @classmethod
    def table(cls, z: Sequence[float], v: Sequence[float]) -> "Profile":
        z = np.asarray(z, dtype=float)
        v = np.asarray(v, dtype=float)
        if z.ndim != 1 or z.shape != v.shape or z.size < 2:
            raise ValueError("profile table needs matching 1-d arrays of length >= 2")
        if np.any(np.diff(z) <= 0):
            raise ValueError("profile table heights must be strictly increasing")
        z.setflags(write=False)
        v.setflags(write=False)
        return cls(points=z, values=v)

    @property
    def is_constant(self) -> bool:
        return self.points is None

    def value(self, z):
        z = np.asarray(z, dtype=float)
        if self.points is None:
            out = np.full(z.shape, self.values[0])
        else:
            out = np.interp(z, self.points, self.values)
        return float(out) if out.ndim == 0 else out

    def slope(self, z):
        """Piecewise-constant derivative; zero outside the table (and for
        constant profiles)."""
        z = np.asarray(z, dtype=float)
        if self.points is None:
            out = np.zeros(z.shape)
        else:
            seg = np.diff(self.values) / np.diff(self.points)
            idx = np.clip(np.searchsorted(self.points, z, side="right") - 1, 0, seg.size - 1)
            inside = (z >= self.points[0]) & (z < self.points[-1])
            out = np.where(inside, seg[idx], 0.0)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ReactionNetwork:
    """Linear + bilinear reaction rates.

    gamma is the (S, S) matrix of linear rate constants; beta is a sparse
    list of (s, i, j, value) bilinear entries, r_s += value * C_i * C_j.
    Species indices are 0-based.
    """

    gamma: np.ndarray
    beta: tuple = ()

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=float)
        g.setflags(write=False)
        object.__setattr__(self, "gamma", g)
        object.__setattr__(
            self, "beta", tuple((int(s), int(i), int(j), float(v)) for s, i, j, v in self.beta)
        )

    @property
    def species_count(self) -> int:
        return self.gamma.shape[0]

    def violations(self) -> list[str]:
        out = []
        if self.gamma.ndim != 2 or self.gamma.shape[0] != self.gamma.shape[1]:
            out.append(f"gamma must be square, got shape {self.gamma.shape}")
            return out
        S = self.species_count
        if S < 1:
            out.append("need at least one species")
        seen = set()
        for s, i, j, _ in self.beta:
            if not (0 <= s < S and 0 <= i < S and 0 <= j < S):
                out.append(f"bilinear entry ({s}, {i}, {j}) has an index outside [0, {S - 1}]")
            if (s, i, j) in seen:
                out.append(f"duplicate bilinear entry ({s}, {i}, {j})")
            seen.add((s, i, j))
        return out


@dataclass(frozen=True)
class SpeciesSpec:
    """One species: diffusion K(z) > 0, Robin constant delta >= 0, emission
    rate polynomial Q(t) (ascending coefficients), source height z_star,
    and initial profile c0(z).

    dKdz overrides the derivative of K; when omitted it is derived from the
    K profile (zero for constant K, segment slopes for tables).
    """

    K: Profile
    delta: float = 0.0
    Q: np.ndarray = field(default_factory=lambda: np.zeros(1))
    z_star: float = 0.0
    c0: Profile = field(default_factory=lambda: Profile.constant(0.0))
    dKdz: Profile | None = None

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.Q, dtype=float))
        q.setflags(write=False)
        object.__setattr__(self, "Q", q)

    def source_rate(self, t) -> float | np.ndarray:
        return np.polynomial.polynomial.polyval(t, self.Q)

    @property
    def has_source(self) -> bool:
        return bool(np.any(self.Q != 0.0))

    def diffusion_slope(self, z):
        return self.dKdz.value(z) if self.dKdz is not None else self.K.slope(z)


@dataclass(frozen=True)
class PhysicalProblem:
    """The z-space column model: species list, wind speed, reaction
    network, and final time."""

    species: tuple
    w: float
    reactions: ReactionNetwork
    T: float

    def __post_init__(self):
        object.__setattr__(self, "species", tuple(self.species))

    @property
    def species_count(self) -> int:
        return len(self.species)


def validate_problem(p: PhysicalProblem) -> PhysicalProblem:
    """Check every model invariant and return the problem unchanged.

    All violations are collected and reported together.
    """
    violations: list[str] = []
    if p.T <= 0:
        violations.append(f"final time must be positive, got {p.T}")
    violations.extend(p.reactions.violations())
    if p.reactions.gamma.ndim == 2 and p.reactions.gamma.shape[0] == p.reactions.gamma.shape[1]:
        if len(p.species) != p.reactions.species_count:
            violations.append(
                f"species list has {len(p.species)} entries but the reaction network "
                f"is sized for {p.reactions.species_count}"
            )
    for s, spec in enumerate(p.species, start=1):
        if np.any(spec.K.values <= 0):
            violations.append(f"species {s}: diffusion profile must be positive everywhere")
        if spec.delta < 0:
            violations.append(f"species {s}: Robin constant must be non-negative, got {spec.delta}")
        if spec.z_star < 0:
            violations.append(f"species {s}: source height must be non-negative, got {spec.z_star}")
    if violations:
        raise ProblemValidationError(violations)
    return p


@dataclass(frozen=True)
class TransformedProblem:
    """The model mapped onto xi in [0, 1]: stretching factor, the source
    locations in xi, and closures for the transformed coefficients."""

    a: float
    base: PhysicalProblem
    xi_star: np.ndarray
    include_jacobian_factor: bool = False

    def __post_init__(self):
        xs = np.asarray(self.xi_star, dtype=float)
        xs.setflags(write=False)
        object.__setattr__(self, "xi_star", xs)

    @property
    def species_count(self) -> int:
        return self.base.species_count

    def _heights(self, xi):
        xi = np.asarray(xi, dtype=float)
        out = np.full(xi.shape, np.inf)
        below = xi < 1.0
        out[below] = np.arctanh(xi[below]) / self.a
        return out

    def k_value(self, s: int, xi):
        """K_s at the height corresponding to xi (limiting value at xi = 1)."""
        scalar = np.ndim(xi) == 0
        out = self.base.species[s].K.value(self._heights(np.atleast_1d(xi)))
        return float(out[0]) if scalar else out

    def k_slope(self, s: int, xi):
        """dK_s/dz at the height corresponding to xi (zero at xi = 1)."""
        scalar = np.ndim(xi) == 0
        z = self._heights(np.atleast_1d(xi))
        out = np.where(np.isinf(z), 0.0, self.base.species[s].diffusion_slope(z))
        return float(out[0]) if scalar else out

    def initial_field(self, nodes: np.ndarray) -> np.ndarray:
        """Initial concentrations c0 mapped through the transform,
        shape (S, len(nodes)).  Values at xi = 1 use the profile's upper
        extrapolation; callers pin that node separately."""
        z = self._heights(np.asarray(nodes, dtype=float))
        return np.stack([spec.c0.value(z) for spec in self.base.species])


def transform_problem(
    p: PhysicalProblem, a: float, include_jacobian_factor: bool = False
) -> TransformedProblem:
    """Validate p and map it onto the unit interval with stretching factor a."""
    validate_problem(p)
    if a <= 0:
        raise ValueError(f"stretching factor must be positive, got {a}")
    xi_star = np.array([transform.z_to_xi(a, spec.z_star) for spec in p.species])
    return TransformedProblem(
        a=a, base=p, xi_star=xi_star, include_jacobian_factor=include_jacobian_factor
    )
