import numpy as np
import pytest

import aircolumn as ac
from aircolumn.source import source_field

from _oracles import three_species_problem


class TestDeltaHat:
    def test_peak_value(self):
        assert ac.delta_hat(0.3, 0.3, 0.01) == pytest.approx(50.0)

    def test_outside_support(self):
        assert ac.delta_hat(0.5, 0.3, 0.01) == 0.0
        assert ac.delta_hat(0.3 + 0.02, 0.3, 0.01) == 0.0  # boundary is open

    def test_unit_mass_by_quadrature(self):
        xi = np.linspace(0.0, 1.0, 2_000_001)
        mass = np.trapezoid(ac.delta_hat(xi, 0.37, 0.01), xi)
        assert mass == pytest.approx(1.0, abs=1e-6)

    def test_symmetry_and_nonnegativity(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            star = rng.uniform(0.1, 0.9)
            h = rng.uniform(0.001, 0.05)
            off = rng.uniform(0, 3 * h)
            left = ac.delta_hat(star - off, star, h)
            right = ac.delta_hat(star + off, star, h)
            assert left == pytest.approx(right, abs=1e-12)
            assert left >= 0.0

    def test_bad_width(self):
        with pytest.raises(ValueError):
            ac.delta_hat(0.3, 0.3, 0.0)

    def test_discrete_mass_refines_to_one(self):
        # weighted nodal sums converge to the unit mass (first order)
        star, h = 0.3712, 0.01
        g = ac.build_uniform_grid(400)
        mass = float(np.sum(g.cell_weights * ac.delta_hat(g.nodes[:-1], star, h)))
        assert mass == pytest.approx(1.0, abs=0.02)
        g2 = ac.build_uniform_grid(1600)
        mass2 = float(np.sum(g2.cell_weights * ac.delta_hat(g2.nodes[:-1], star, h)))
        assert abs(mass2 - 1.0) <= abs(mass - 1.0) + 1e-12


@pytest.fixture(scope="module")
def tp():
    return ac.transform_problem(three_species_problem(), 0.005)


class TestSourceValues:
    def test_silent_species_is_zero(self, tp):
        grid = ac.build_uniform_grid(100)
        cfg = ac.SourceConfig(h=0.01)
        for t in (0.0, 0.5, 1.0):
            assert np.all(ac.source_values(tp, cfg, 2, t, grid) == 0.0)

    def test_zero_rate_time(self, tp):
        grid = ac.build_uniform_grid(100)
        f = ac.source_values(tp, ac.SourceConfig(h=0.01), 0, 0.0, grid)
        assert np.all(f == 0.0)  # Q_1(0) = 0

    def test_composition_matches_direct_evaluation(self, tp):
        grid = ac.build_uniform_grid(100)
        cfg = ac.SourceConfig(h=0.01)
        f = ac.source_values(tp, cfg, 0, 1.0, grid)
        star = float(np.tanh(0.005 * 20.0))
        nearest = int(np.argmin(np.abs(grid.nodes - star)))
        expected = 1.0 * (2 * 0.01 - abs(star - grid.nodes[nearest])) / (4 * 0.01**2)
        assert f[nearest] == pytest.approx(expected, rel=1e-13)
        assert f[nearest] == f.max()

    def test_jacobian_factor_scaling(self, tp):
        grid = ac.build_uniform_grid(100)
        plain = ac.source_values(tp, ac.SourceConfig(h=0.01), 1, 0.25, grid)
        scaled = ac.source_values(
            tp, ac.SourceConfig(h=0.01, include_jacobian_factor=True), 1, 0.25, grid
        )
        star = tp.xi_star[1]
        assert np.allclose(scaled, plain * 0.005 * (1 - star**2), rtol=1e-14)

    def test_support_violation(self, tp):
        grid = ac.build_uniform_grid(100)
        with pytest.raises(ValueError, match="support"):
            ac.source_values(tp, ac.SourceConfig(h=0.06), 0, 1.0, grid)

    def test_field_stacks_all_species(self, tp):
        grid = ac.build_uniform_grid(50)
        f = source_field(tp, ac.SourceConfig(h=0.01), 0.5, grid)
        assert f.shape == (3, 51)
        assert np.all(f[2] == 0.0)
        assert f[0].max() > 0 and f[1].max() > 0
