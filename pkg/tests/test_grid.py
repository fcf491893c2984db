import numpy as np
import pytest

import aircolumn as ac


class TestSpatialGrid:
    def test_small_uniform(self):
        g = ac.build_uniform_grid(4)
        assert np.array_equal(g.nodes, [0.0, 0.25, 0.5, 0.75, 1.0])
        assert g.dual_widths[0] == 0.25
        assert np.array_equal(g.cell_weights, [0.125, 0.25, 0.25, 0.25])

    def test_uniform_100(self):
        g = ac.build_uniform_grid(100)
        assert g.n_intervals == 100
        assert np.allclose(g.widths, 0.01)
        assert g.nodes[-1] == 1.0

    def test_width_sum_and_dual_identity(self):
        g = ac.SpatialGrid.from_nodes([0.0, 0.1, 0.25, 0.6, 0.7, 1.0])
        assert g.widths.sum() == pytest.approx(1.0, abs=1e-15)
        h = g.widths
        assert np.allclose(g.dual_widths, 0.5 * (h[:-1] + h[1:]))
        assert np.all(g.widths > 0)

    def test_too_coarse(self):
        with pytest.raises(ValueError):
            ac.build_uniform_grid(2)

    def test_from_nodes_validation(self):
        with pytest.raises(ValueError):
            ac.SpatialGrid.from_nodes([0.0, 0.5, 0.4, 0.8, 1.0])
        with pytest.raises(ValueError):
            ac.SpatialGrid.from_nodes([0.1, 0.4, 0.6, 1.0])
        with pytest.raises(ValueError):
            ac.SpatialGrid.from_nodes([0.0, 0.4, 0.6, 0.9])

    def test_nested_grids_share_nodes_exactly(self):
        for n in (10, 100, 200):
            coarse = ac.build_uniform_grid(n)
            fine = ac.build_uniform_grid(2 * n)
            assert np.array_equal(coarse.nodes, fine.nodes[::2])

    def test_immutable(self):
        g = ac.build_uniform_grid(5)
        with pytest.raises(ValueError):
            g.nodes[0] = 0.5


class TestTimeGrid:
    def test_exact_division(self):
        tg = ac.build_time_grid(1.0, 0.001)
        assert tg.n_steps == 1000
        assert tg.final_time == 1.0
        assert np.allclose(tg.steps, 0.001)

    def test_single_step(self):
        tg = ac.build_time_grid(1.0, 1.0)
        assert tg.n_steps == 1
        assert np.array_equal(tg.levels, [0.0, 1.0])

    def test_remainder_step(self):
        tg = ac.build_time_grid(1.0, 0.3)
        assert tg.n_steps == 4
        assert tg.steps[:3] == pytest.approx([0.3, 0.3, 0.3])
        assert tg.steps[3] == pytest.approx(0.1)
        assert tg.levels[-1] == 1.0

    def test_step_sum_is_final_time(self):
        for T, dt in ((1.0, 0.001), (2.5, 0.7), (0.3, 0.3)):
            tg = ac.build_time_grid(T, dt)
            assert tg.steps.sum() == pytest.approx(T, rel=1e-12)
            assert np.all(tg.steps > 0)

    def test_bad_steps(self):
        with pytest.raises(ValueError):
            ac.build_time_grid(1.0, 0.0)
        with pytest.raises(ValueError):
            ac.build_time_grid(1.0, 2.0)
