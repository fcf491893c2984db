import numpy as np
import pytest
from scipy.integrate import solve_ivp

import aircolumn as ac
from aircolumn import fvm
from aircolumn.source import source_field

from _oracles import (
    mp_naive_flux,
    mp_single_species_table,
    single_species_problem,
    three_species_problem,
)


def stabilized_flux(l, m, xi_lo, xi_hi, c_lo, c_hi):
    a_lo, a_hi = fvm.face_flux_coefficients(l, m, xi_lo, xi_hi)
    return a_hi * c_hi - a_lo * c_lo


class TestStableFluxWeights:
    def test_constant_state_carries_pure_advection(self):
        w_lo, w_hi = fvm.stable_flux_weights(37.5, 0.2, 0.45)
        assert w_hi - w_lo == pytest.approx(1.0, rel=1e-12)
        # so rho = m * (w_hi - w_lo) * c = m * c for C_lo = C_hi = c

    def test_printed_example(self):
        # alpha = 1 on [0.4, 0.6] with l = m = 2.5e-5, C = (1, 0):
        # frozen 50-digit evaluation of the printed formula
        rho = stabilized_flux(2.5e-5, 2.5e-5, 0.4, 0.6, 1.0, 0.0)
        assert rho == pytest.approx(-8.08257569495584e-5, rel=1e-13)

    def test_strong_advection_regime(self):
        # alpha = -199 (the fitted solver's own operating point): no
        # overflow and agreement with the naive mp evaluation
        l, m = 2.5e-5, -4.975e-3
        rho = stabilized_flux(l, m, 0.5, 0.51, 0.8, 0.3)
        expected = float(mp_naive_flux(l, m, 0.5, 0.51, 0.8, 0.3))
        assert np.isfinite(rho)
        assert rho == pytest.approx(expected, rel=1e-10)

    def test_random_samples_match_extended_precision(self):
        rng = np.random.default_rng(42)
        for _ in range(1000):
            alpha = rng.uniform(-1e3, 1e3)
            xi_lo = rng.uniform(0.0, 0.97)
            xi_hi = xi_lo + rng.uniform(1e-4, 0.98 - xi_lo)
            l = 10.0 ** rng.uniform(-6, 0)
            m = alpha * l
            c_lo, c_hi = rng.uniform(-2, 2, 2)
            got = stabilized_flux(l, m, xi_lo, xi_hi, c_lo, c_hi)
            want = float(mp_naive_flux(l, m, xi_lo, xi_hi, c_lo, c_hi))
            assert got == pytest.approx(want, rel=1e-10, abs=1e-300)

    def test_small_alpha_continuity(self):
        l, xi_lo, xi_hi, c_lo, c_hi = 0.7, 0.3, 0.5, 1.0, 2.0
        span = np.arctanh(xi_hi) - np.arctanh(xi_lo)
        limit = l * (c_hi - c_lo) / span
        for alpha in (1e-9, -1e-9):
            rho = stabilized_flux(l, alpha * l, xi_lo, xi_hi, c_lo, c_hi)
            assert rho == pytest.approx(limit, rel=1e-8)

    def test_exact_zero_advection_uses_diffusion_limit(self):
        l, xi_lo, xi_hi = 0.7, 0.3, 0.5
        a_lo, a_hi = fvm.face_flux_coefficients(l, 0.0, xi_lo, xi_hi)
        span = np.arctanh(xi_hi) - np.arctanh(xi_lo)
        assert a_lo == a_hi == pytest.approx(l / span, rel=1e-14)
        with pytest.raises(ValueError):
            fvm.stable_flux_weights(0.0, xi_lo, xi_hi)

    def test_flux_matches_local_bvp_integration(self):
        # independent route: integrate the frozen-coefficient two-point
        # problem with an ODE solver and read off its constant flux
        l, m, xi_lo, xi_hi = 3e-4, -2.1e-3, 0.35, 0.42
        c_lo, c_hi = 1.3, 0.4

        def rhs(_, v, rho):
            xi = _
            return [(rho - m * v[0]) / (l * (1 - xi * xi))]

        def shoot(rho):
            sol = solve_ivp(
                rhs, (xi_lo, xi_hi), [c_lo], args=(rho,), rtol=1e-12, atol=1e-14
            )
            return sol.y[0, -1] - c_hi

        lo, hi = -1.0, 1.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if shoot(lo) * shoot(mid) <= 0:
                hi = mid
            else:
                lo = mid
        rho_bvp = 0.5 * (lo + hi)
        rho = stabilized_flux(l, m, xi_lo, xi_hi, c_lo, c_hi)
        assert rho == pytest.approx(rho_bvp, rel=1e-8)

    def test_degenerate_interval_rejected(self):
        with pytest.raises(ValueError):
            fvm.stable_flux_weights(1.0, 0.5, 1.0)
        with pytest.raises(ValueError):
            fvm.stable_flux_weights(1.0, 0.5, 0.4)


class TestDegenerateFace:
    def test_zero_state(self):
        w_n, w_n1 = fvm.degenerate_face_flux_weights(2.0, 0.5)
        assert w_n1 * 0.0 - w_n * 0.0 == 0.0

    def test_matching_weights_drop_lower_node(self):
        w_n, w_n1 = fvm.degenerate_face_flux_weights(0.7, 0.7)
        assert w_n == 0.0

    def test_direct_formula(self):
        lbar, m = 2.475e-4, -4.9875e-3
        w_n, w_n1 = fvm.degenerate_face_flux_weights(lbar, m)
        assert w_n == pytest.approx(0.5 * (lbar - m), rel=1e-14)
        assert w_n1 == pytest.approx(0.5 * (lbar + m), rel=1e-14)

    def test_requires_positive_weight(self):
        with pytest.raises(ValueError):
            fvm.degenerate_face_flux_weights(0.0, 1.0)


class TestRobinCoefficient:
    def test_three_species_values(self):
        tp = ac.transform_problem(three_species_problem(), 0.005)
        for s in range(3):
            assert fvm.robin_boundary_flux_coefficient(tp, s) == pytest.approx(-0.005)

    def test_cancellation(self):
        p = single_species_problem(K=3.0, w=6.0, delta=2.0)
        tp = ac.transform_problem(p, 0.1)
        assert fvm.robin_boundary_flux_coefficient(tp, 0) == pytest.approx(0.0, abs=1e-18)

    def test_no_wind_case(self):
        p = single_species_problem(K=3.0, w=0.0, delta=2.0)
        tp = ac.transform_problem(p, 0.1)
        assert fvm.robin_boundary_flux_coefficient(tp, 0) == pytest.approx(0.6, rel=1e-14)


@pytest.fixture(scope="module")
def table4():
    tp = ac.transform_problem(single_species_problem(), 0.005)
    return ac.assemble_coefficients(tp, ac.build_uniform_grid(4))


class TestAssembly:
    def test_every_entry_matches_extended_precision(self, table4):
        rows, bottom = mp_single_species_table(4, "0.005", 1, 1, 0)
        assert table4.bottom[0] == pytest.approx(float(bottom), rel=1e-12)
        for i, row in enumerate(rows):
            for key, want in row.items():
                got = getattr(table4, key)[0, i]
                assert got == pytest.approx(float(want), rel=1e-12), (key, i)

    def test_zero_state_maps_to_zero(self, table4):
        assert np.all(table4.apply_stencil(np.zeros((1, 5))) == 0.0)

    def test_interior_offdiagonal_positivity_n100(self):
        tp = ac.transform_problem(three_species_problem(), 0.005)
        table = ac.assemble_coefficients(tp, ac.build_uniform_grid(100))
        # rows 2..N-1 in scheme numbering: indices 1..98
        assert np.all(table.upper[:, 1:99] > 0.0)
        assert np.all(table.lower[:, 1:99] > 0.0)
        assert np.all(table.diag[:, 1:99] > 0.0)

    def test_telescoping_is_exact(self):
        tp = ac.transform_problem(three_species_problem(), 0.005)
        table = ac.assemble_coefficients(tp, ac.build_uniform_grid(30))
        n = table.n_active
        # face coefficients and stencil entries are the same stored numbers
        assert np.array_equal(table.upper, table.face_hi)
        assert np.array_equal(table.lower[:, 1:], table.face_lo[:, :-1])
        rng = np.random.default_rng(0)
        C = rng.uniform(0, 1, (3, n + 1))
        C[:, -1] = 0.0
        fluxes = table.face_fluxes(C)
        stencil = table.apply_stencil(C)
        diff = np.empty_like(fluxes)
        diff[:, 0] = fluxes[:, 0] - table.bottom * C[:, 0]
        diff[:, 1:] = fluxes[:, 1:] - fluxes[:, :-1]
        # identical up to one rounding of the shared coefficients, measured
        # against the face-flux magnitude
        scale = np.abs(fluxes).max()
        assert np.allclose(stencil, diff, rtol=0, atol=1e-14 * scale)

    def test_immutability(self, table4):
        with pytest.raises(ValueError):
            table4.diag[0, 0] = 1.0


@pytest.fixture(scope="module")
def setup():
    p = three_species_problem()
    tp = ac.transform_problem(p, 0.005)
    grid = ac.build_uniform_grid(100)
    table = ac.assemble_coefficients(tp, grid)
    return p, tp, grid, table


class TestApplySpatialOperator:
    def test_zero_everything(self):
        # zero state and no emissions anywhere
        p = single_species_problem(Q=(0.0,))
        tp = ac.transform_problem(p, 0.005)
        grid = ac.build_uniform_grid(20)
        table = ac.assemble_coefficients(tp, grid)
        out = fvm.apply_spatial_operator(table, tp, grid, ac.SourceConfig(), 0.3, np.zeros((1, 21)))
        assert np.all(out == 0.0)

    def test_mass_compatible_bump_telescopes(self):
        p = single_species_problem(w=0.4)
        tp = ac.transform_problem(p, 0.01)
        grid = ac.build_uniform_grid(50)
        table = ac.assemble_coefficients(tp, grid)
        C = np.zeros((1, 51))
        C[0, 10:30] = np.sin(np.linspace(0, np.pi, 20)) ** 2
        out = fvm.apply_spatial_operator(table, tp, grid, ac.SourceConfig(), 0.0, C)
        # interior-supported field: the weighted total reduces to boundary
        # fluxes plus the zero-order part (no reactions, no source here)
        total = float(np.sum(table.weights * out[0, :50]))
        top = table.face_hi[0, -1] * C[0, 50] - table.face_lo[0, -1] * C[0, 49]
        bottom = table.bottom[0] * C[0, 0]
        volumetric = float(np.sum(table.weights * (-table.zero_order[0] * C[0, :50])))
        scale = float(np.abs(table.face_fluxes(C)).max())
        assert total - (top - bottom + volumetric) == pytest.approx(0.0, abs=1e-13 * scale)

    def test_initial_state_rates(self, setup):
        p, tp, grid, table = setup
        C = tp.initial_field(grid.nodes)
        C[:, -1] = 0.0
        out = fvm.apply_spatial_operator(table, tp, grid, ac.SourceConfig(h=0.01), 0.0, C)
        # species 1: zero field, zero rate at t = 0 (its emission is t-proportional)
        assert np.all(out[0] == 0.0)
        # species 3: flux differences of the constant-2 state plus -2 d(xi)
        n = table.n_active
        fluxes = table.face_fluxes(C)
        expected = np.empty(n)
        expected[0] = fluxes[2, 0] - table.bottom[2] * C[2, 0]
        expected[1:] = fluxes[2, 1:] - fluxes[2, :-1]
        expected = expected / table.weights - 2.0 * table.zero_order[2]
        assert np.allclose(out[2, :n], expected, rtol=1e-12)
        assert np.any(out[2, :n] != 0.0)

    def test_pinned_violation_rejected(self, setup):
        _, tp, grid, table = setup
        C = np.ones((3, 101))
        with pytest.raises(ValueError, match="pinned"):
            fvm.apply_spatial_operator(table, tp, grid, ac.SourceConfig(), 0.0, C)

    def test_shape_mismatch_rejected(self, setup):
        _, tp, grid, table = setup
        with pytest.raises(ValueError):
            fvm.apply_spatial_operator(table, tp, grid, ac.SourceConfig(), 0.0, np.zeros((3, 60)))
