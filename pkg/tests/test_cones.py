from __future__ import annotations

import numpy as np
import pytest

from mokkt.cones import active_set, is_critical, linearize, sample_critical_directions
from mokkt.problem import InfeasiblePointError, Problem


class TestActiveSet:
    def test_boundary_point(self, p1):
        assert active_set(p1, [2, 0]) == (0,)

    def test_interior_point(self, p1):
        assert active_set(p1, [0.5, 0]) == ()

    def test_reverse_norm_origin(self, example1):
        assert active_set(example1, [0, 0]) == (0,)

    def test_infeasible_point(self, p1):
        with pytest.raises(InfeasiblePointError, match=r"g1 = \+0.5"):
            active_set(p1, [2, 0.5])


class TestCritical:
    def test_vertical_direction_is_critical(self, p1):
        assert is_critical(p1, [0.5, 0], [0, 1]) == (True, (0, 1), ())

    def test_horizontal_direction_is_not(self, p1):
        assert is_critical(p1, [0.5, 0], [1, 0])[0] is False

    def test_zero_direction(self, p1):
        assert is_critical(p1, [2, 0], [0, 0]) == (True, (0, 1), (0,))

    @pytest.mark.parametrize("c", [1e-3, 1.0, 1e4])
    def test_scaling_invariance(self, p1, c):
        assert is_critical(p1, [2, 0], c * np.array([-1.0, 0.3])) == is_critical(p1, [2, 0], [-1.0, 0.3])


class TestSampling:
    def test_thin_cone_contains_both_axis_directions(self, p1):
        ds = [tuple(c.d) for c in sample_critical_directions(p1, [0.5, 0], 10)]
        assert (0.0, 1.0) in ds and (0.0, -1.0) in ds
        assert all(d[0] == 0.0 for d in ds)

    def test_contains_negative_axis_at_boundary(self, p1):
        ds = [tuple(c.d) for c in sample_critical_directions(p1, [2, 0], 20)]
        assert (-1.0, 0.0) in ds

    def test_unconstrained_stationary_point_gives_sphere(self):
        p = Problem.build(["x1", "x2", "x3"], ["x1^2 + x2^2 + x3^2"], [], [[-1, 1]] * 3)
        dirs = sample_critical_directions(p, [0, 0, 0], 50, seed=4)
        assert len(dirs) == 50
        assert all(c.I == (0,) for c in dirs)

    def test_every_sample_is_critical_with_matching_index_sets(self, p1):
        lin = linearize(p1, [2, 0])
        for c in sample_critical_directions(p1, [2, 0], 100, lin=lin):
            assert np.max(np.abs(c.d)) == pytest.approx(1.0)
            assert is_critical(p1, [2, 0], c.d, lin=lin) == (True, c.I, c.J)

    def test_deterministic(self, p1):
        a = sample_critical_directions(p1, [2, 0], 30, seed=9)
        b = sample_critical_directions(p1, [2, 0], 30, seed=9)
        assert [c.d.tolist() for c in a] == [c.d.tolist() for c in b]

    def test_constraint_only_directions(self, example1):
        dirs = sample_critical_directions(example1, [0, 0], 64, objectives=False)
        assert len(dirs) == 64
        assert all(c.I == () and c.J == (0,) for c in dirs)
