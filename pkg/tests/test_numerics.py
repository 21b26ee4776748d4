import math

import numpy as np
import pytest

from mixgeo.utils.errors import PencilSingular
from mixgeo.utils.numerics import (extrapolate_limit, halving_offsets, interval_integrals,
                                   negative_directions, ordered_map, pencil_eigenvalues, refine_minimum,
                                   segment_integrals)


class TestExtrapolateLimit:
    def test_first_order_sequence(self):
        eps = halving_offsets(1e-2, 7)
        assert extrapolate_limit(1.0 + 3.0 * eps) == pytest.approx(1.0, abs=1e-12)

    def test_quadratic_error_terms(self):
        eps = halving_offsets(1e-2, 7)
        assert extrapolate_limit(2.0 - eps + 5.0 * eps ** 2) == pytest.approx(2.0, abs=1e-9)

    def test_divergent(self):
        eps = halving_offsets(1e-4, 7)
        assert extrapolate_limit(-np.log(eps)) == math.inf

    def test_blow_up(self):
        eps = halving_offsets(1e-4, 7)
        assert extrapolate_limit(-1.0 / eps) == -math.inf

    def test_vanishing(self):
        eps = halving_offsets(1e-4, 7)
        assert extrapolate_limit(eps) == 0.0

    def test_non_finite_samples(self):
        assert extrapolate_limit([1.0, 2.0, np.inf]) == math.inf

    def test_needs_two_samples(self):
        with pytest.raises(ValueError):
            extrapolate_limit([1.0])


class TestRefineMinimum:
    def test_moves_off_the_grid(self):
        ts = np.linspace(0.0, 1.0, 11)
        fn = lambda t: (t - 0.537) ** 2
        best = refine_minimum(fn, ts, fn(ts))
        assert best.refined
        assert best.t == pytest.approx(0.537, abs=1e-8)
        assert best.value <= best.grid_value

    def test_edge_minimum(self):
        ts = np.linspace(0.0, 1.0, 11)
        best = refine_minimum(lambda t: t, ts, ts)
        assert best.at_edge and not best.refined
        assert best.index == 0

    def test_flat_minimum_is_not_refined(self):
        ts = np.linspace(0.0, 1.0, 11)
        best = refine_minimum(lambda t: 1.0, ts, np.ones(11))
        assert not best.refined
        assert best.value == 1.0


class TestPencil:
    def test_diagonal(self):
        a = np.array([[[2.0, 0.0], [0.0, 6.0]]])
        b = np.array([[[1.0, 0.0], [0.0, 2.0]]])
        assert pencil_eigenvalues(a, b)[0] == pytest.approx([2.0, 3.0])

    def test_same_form(self):
        a = np.array([[[6.0, 3.0], [3.0, 6.0]]])
        assert pencil_eigenvalues(a, a)[0] == pytest.approx([1.0, 1.0])

    def test_singular_reference(self):
        with pytest.raises(PencilSingular):
            pencil_eigenvalues(np.eye(2)[None], np.array([[[1.0, 0.0], [0.0, -1.0]]]))


class TestQuadrature:
    def test_segments(self):
        integrals, error = segment_integrals(lambda x: 2.0 * x, [0.0, 1.0], [1.0, 3.0])
        assert integrals == pytest.approx([1.0, 8.0])
        assert np.all(error >= 0)

    def test_reversed_segment_is_signed(self):
        integrals, _ = segment_integrals(np.cos, [math.pi / 2], [0.0])
        assert integrals[0] == pytest.approx(-1.0)

    def test_knot_intervals(self):
        knots = np.array([0.25, 0.5, 0.75])
        integrals, _ = interval_integrals(lambda t: 1.0 / (t * (1.0 - t)), knots)
        assert integrals.sum() == pytest.approx(2.0 * math.log(3.0))


class TestHelpers:
    def test_negative_directions(self):
        u = negative_directions(np.random.default_rng(0), 30, 4)
        assert u.shape == (30, 4)
        assert np.all(u < 0)

    def test_ordered_map_keeps_order(self):
        assert ordered_map(lambda x: x * x, list(range(20)), threads=4) == [x * x for x in range(20)]

    def test_ordered_map_serial(self):
        assert ordered_map(str, [3, 1, 2], threads=1) == ['3', '1', '2']
