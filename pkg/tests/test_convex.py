import math

import numpy as np
import pytest

from mixgeo.engine import convex, geom2, geomn
from mixgeo.engine.losses import add, log_loss, scale, translate
from mixgeo.models.simplex import SimplexPoint
from mixgeo.utils.errors import BadDirection, BadParams, DimMismatch, NotASummand, NotProper
from mixgeo.utils.numerics import negative_directions

LADDER = (0.5, 0.9, 0.99, 1.01, 1.1, 1.5)


class TestBayesRisk:
    def test_log_entropy(self, log2):
        risk = convex.bayes_risk(log2, (0.5, 0.5))
        assert risk.bayes == pytest.approx(math.log(2))
        assert risk.L == pytest.approx(math.log(2))
        assert risk.hess_bayes == pytest.approx(np.array([[-4.0]]))

    def test_brier(self, brier2):
        assert convex.bayes_risk(brier2, SimplexPoint((0.5, 0.5))).bayes == pytest.approx(0.5)

    def test_conditional_risk_exceeds_bayes(self, log2):
        risk = convex.bayes_risk(log2, (0.3, 0.7), q=(0.6, 0.4))
        assert risk.L > risk.bayes

    @pytest.mark.parametrize("p", [(0.3, 0.7), (0.81, 0.19)])
    def test_brute_force_finds_p(self, spherical2, config, p):
        risk = convex.bayes_risk(spherical2, p, brute_force=True, config=config)
        assert risk.brute_force
        assert risk.q[0] == pytest.approx(p[0], abs=2 / 500)
        assert risk.bayes == pytest.approx(convex.bayes_risk(spherical2, p).bayes, abs=1e-5)

    def test_brute_force_multi(self, brier3, config):
        risk = convex.bayes_risk(brier3, (0.2, 0.3, 0.5), brute_force=True, config=config)
        assert risk.q == pytest.approx((0.2, 0.3, 0.5), abs=2 / 30)

    def test_bayes_hessian_is_minus_risk_hessian(self, spherical3):
        points = np.array([[0.2, 0.3], [0.5, 0.25]])
        _, hess = convex.bayes_risk_profile(spherical3, points)
        for point, expected in zip(points, hess):
            assert expected == pytest.approx(-geomn.conditional_risk_hessian(spherical3, point), rel=1e-9)

    def test_wrong_length(self, log2):
        with pytest.raises(DimMismatch):
            convex.bayes_risk(log2, (0.2, 0.3, 0.5))


class TestSupport:
    def test_log(self, log2):
        assert convex.support(log2, (-0.5, -0.5)) == pytest.approx(-math.log(2))
        assert convex.support(log2, (-1.0, -1.0)) == pytest.approx(-2 * math.log(2))

    def test_brier(self, brier2):
        assert convex.support(brier2, (-0.5, -0.5)) == pytest.approx(-0.5)

    @pytest.mark.parametrize("u", [(0.0, -1.0), (1.0, -1.0), (-1.0, np.nan)])
    def test_bad_direction(self, log2, u):
        with pytest.raises(BadDirection):
            convex.support(log2, u)

    def test_additivity(self, spherical3, config):
        u = negative_directions(np.random.default_rng(config.SEED), 50, 3)
        total = convex.SupportField.of(add(spherical3, log_loss(3)))(u)
        parts = convex.SupportField.of(spherical3)(u) + convex.SupportField.of(log_loss(3))(u)
        assert np.max(np.abs(total - parts)) <= 1e-12

    def test_translation(self, brier3, config):
        c = np.array([0.3, 0.1, 0.7])
        u = negative_directions(np.random.default_rng(config.SEED), 50, 3)
        shifted = convex.SupportField.of(translate(brier3, c))(u)
        assert np.max(np.abs(shifted - convex.SupportField.of(brier3)(u) - u @ c)) <= 1e-12

    def test_field_returns_float_for_one_direction(self, log2):
        field = convex.SupportField.of(log2)
        assert isinstance(field([-0.5, -0.5]), float)

    def test_boundary_points(self, log2):
        points = convex.SupportField.of(log2).boundary_points([[-1.0, -1.0]])
        assert points[0] == pytest.approx([math.log(2), math.log(2)])

    def test_contains(self, log2, config):
        u = negative_directions(np.random.default_rng(config.SEED), 50, 2)
        field = convex.SupportField.of(log2)
        assert field.contains((1.0, 1.0), u)
        assert not field.contains((0.1, 0.1), u)

    def test_terms_must_share_outcomes(self, log2, log3):
        with pytest.raises(DimMismatch):
            convex.SupportField([(1.0, log2), (1.0, log3)])


class TestSlidesFreely:
    def test_brier_at_one(self, brier2, config):
        assert convex.slides_freely(brier2, eta=1.0, config=config).slides_freely

    def test_brier_above_one(self, brier2, config):
        verdict = convex.slides_freely(brier2, eta=1.1, config=config)
        assert not verdict.slides_freely
        assert verdict.worst_point == pytest.approx((0.5, 0.5), abs=1e-2)

    def test_log_in_itself(self, log2, config):
        verdict = convex.slides_freely(log2, log2, 1.0, config=config)
        assert verdict.slides_freely
        assert abs(verdict.convexity_margin) <= 1e-6

    def test_improper_inner(self, swapped_log, config):
        with pytest.raises(NotProper):
            convex.slides_freely(swapped_log, eta=1.0, config=config)

    def test_eta_must_be_positive(self, log2, config):
        with pytest.raises(BadParams):
            convex.slides_freely(log2, eta=-1.0, config=config)


class TestLadder:
    @pytest.mark.parametrize("name", ['brier2', 'spherical2', 'brier3'])
    def test_bridge_matches_pencil(self, request, config, name):
        h = request.getfixturevalue(name)
        eta_star = geomn.mixability_constant_multi(h, config=config).eta_star
        for factor in LADDER:
            verdict = convex.slides_freely(h, eta=factor * eta_star, config=config)
            assert verdict.slides_freely is (factor < 1.0), factor

    def test_scaled_log(self, log2, config):
        h = scale(log2, 0.5)
        assert convex.slides_freely(h, eta=1.9, config=config).slides_freely
        assert not convex.slides_freely(h, eta=2.1, config=config).slides_freely


class TestSummandResidual:
    def test_scaled_log_residual(self, log2, config):
        field = convex.summand_residual(log2, log2, 0.4, config=config)
        u = negative_directions(np.random.default_rng(1), 10, 2)
        assert field(u) == pytest.approx(0.6 * convex.SupportField.of(log2)(u), rel=1e-12)
        assert field.checks['homogeneity'] <= 1e-12

    def test_spherical_inside_log(self, spherical2, log2, config):
        field = convex.summand_residual(log2, spherical2, 1.0, config=config)
        assert field.checks['convexity'] >= -1e-12
        assert field.checks['segments'] > 0

    def test_brier_too_large(self, brier2, log2, config):
        with pytest.raises(NotASummand):
            convex.summand_residual(log2, brier2, 1.2, config=config)

    def test_seed_is_reproducible(self, spherical2, log2, config):
        first = convex.summand_residual(log2, spherical2, 1.0, config=config, seed=5).checks
        second = convex.summand_residual(log2, spherical2, 1.0, config=config, seed=5).checks
        assert first == second


class TestDecompose:
    def test_half_log_is_degenerate(self, log2, config):
        report = convex.decompose_log(scale(log2, 0.5), config=config)
        assert report.eta_star == pytest.approx(2.0, rel=1e-9)
        assert report.degenerate
        assert report.semidefinite_points == []

    def test_spherical(self, spherical2, config):
        report = convex.decompose_log(spherical2, config=config)
        assert report.eta_star == pytest.approx(math.sqrt(2), abs=1e-4)
        assert report.nonnegative and report.aligned
        assert not report.degenerate

    def test_brier(self, brier2, config):
        report = convex.decompose_log(brier2, config=config)
        assert report.nonnegative
        assert report.min_curvature >= -1e-6
        values = report.residual.values(geom2.binary_grid(config))
        assert np.all(values >= -1e-8)

    def test_linear_loss_is_rejected(self, linear_loss, config):
        with pytest.raises(NotProper):
            convex.decompose_log(linear_loss, config=config)


class TestMembership:
    def test_boundary_point(self, log2, config):
        verdict = convex.spr_membership(log2, (math.log(2), math.log(2)), config=config)
        assert verdict.member
        assert verdict.witness == pytest.approx((0.5, 0.5), abs=1e-4)

    def test_below_curve(self, log2, config):
        verdict = convex.spr_membership(log2, (0.1, 0.1), config=config)
        assert not verdict.member
        assert verdict.gap > 0

    def test_recession_cone(self, spherical3, config):
        y = spherical3.values((0.2, 0.5))[0] + 1.0
        assert convex.spr_membership(spherical3, y, config=config).member

    def test_wrong_length(self, log2, config):
        with pytest.raises(DimMismatch):
            convex.spr_membership(log2, (1.0, 1.0, 1.0), config=config)


class TestInverseLoss:
    def test_log(self, log2, config):
        assert convex.inverse_loss(log2, 0.5, config=config).coords == pytest.approx((0.5, 0.5))

    def test_brier_barycenter(self, brier3, config):
        p = convex.inverse_loss(brier3, (1 / 3, 1 / 3), config=config)
        assert p.coords == pytest.approx((1 / 3, 1 / 3, 1 / 3), abs=1e-8)

    def test_round_trip_off_center(self, spherical3, config):
        p = convex.inverse_loss(spherical3, (0.15, 0.6), config=config)
        assert p.coords == pytest.approx((0.15, 0.6, 0.25), abs=1e-8)

    def test_swapped_log(self, swapped_log, config):
        with pytest.raises(NotProper):
            convex.inverse_loss(swapped_log, 0.3, config=config)


class TestSandwich:
    def test_half_log_against_log(self, log2):
        verdict = convex.fundamentality_sandwich(scale(log2, 0.5), 2.0, 2.0, seed=3)
        assert verdict.holds
        assert verdict.points == 10 and verdict.directions == 100

    def test_inner_fails_beyond_the_constant(self, log2):
        verdict = convex.fundamentality_sandwich(scale(log2, 0.5), 2.5, 2.5, seed=3)
        assert not verdict.holds
        assert verdict.worst_inner_gap < 0

    def test_three_outcomes(self, log3):
        assert convex.fundamentality_sandwich(scale(log3, 0.5), 2.0, 2.0, seed=3).holds

    def test_parameters_must_be_positive(self, log2):
        with pytest.raises(BadParams):
            convex.fundamentality_sandwich(log2, 0.0, 1.0)
