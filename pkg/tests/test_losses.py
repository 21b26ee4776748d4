import math

import numpy as np
import pytest

from mixgeo.engine.losses import (add, builtin, check_proper, fairness_check, from_dsl, from_spec,
                                  log_loss, require_proper, scale, subtract, translate)
from mixgeo.models.simplex import ChartPoint, lattice
from mixgeo.utils.errors import BadParams, DimMismatch, NotProper, ParseError, UnknownLoss


class TestBuiltins:
    def test_log_values(self, log2):
        assert log2.values(0.5)[0] == pytest.approx([math.log(2), math.log(2)])

    def test_brier_values(self, brier2):
        assert brier2.values(0.5)[0] == pytest.approx([0.5, 0.5])

    def test_spherical_values(self, spherical2):
        assert spherical2.values(0.5)[0] == pytest.approx([1 - 1 / math.sqrt(2)] * 2)

    def test_partials_are_jet2_for_binary(self, log2):
        first, second = log2.partials(0.5)
        assert first.as_tuple() == pytest.approx((math.log(2), -2.0, 4.0))
        assert second.d1 == pytest.approx(2.0)

    def test_unknown_name(self):
        with pytest.raises(UnknownLoss):
            builtin('hinge')

    @pytest.mark.parametrize("params", [{'n': 1}, {'n': 11}, {'n': 2.5}, {'a': 1}])
    def test_bad_params(self, params):
        with pytest.raises(BadParams):
            builtin('log', params)


class TestAlgebra:
    def test_scale(self, log2):
        assert scale(log2, 0.5).values(0.5)[0] == pytest.approx([0.346574, 0.346574], abs=1e-6)

    def test_scale_must_be_positive(self, log2):
        with pytest.raises(BadParams):
            scale(log2, 0.0)

    def test_translate(self, log2):
        assert translate(log2, (1, 0)).values(0.5)[0] == pytest.approx([1 + math.log(2), math.log(2)])

    def test_translate_length(self, log2):
        with pytest.raises(DimMismatch):
            translate(log2, (1, 0, 0))

    def test_add_and_subtract(self, log2, brier2):
        t = np.array([[0.3]])
        assert add(log2, brier2).values(t) == pytest.approx(log2.values(t) + brier2.values(t))
        assert subtract(log2, brier2).values(t) == pytest.approx(log2.values(t) - brier2.values(t))

    def test_add_mismatched_outcomes(self, log2, log3):
        with pytest.raises(DimMismatch):
            add(log2, log3)

    def test_provenance_is_derived(self, log2):
        provenance = scale(log2, 2.0).provenance
        assert provenance['kind'] == 'derived' and provenance['op'] == 'scale'
        assert provenance['operands'][0]['kind'] == 'builtin'


class TestDsl:
    def test_matches_builtin_log(self, log2):
        h = from_dsl(["-ln(t1)", "-ln(1-t1)"], 2)
        grid = lattice(2, 401, 1e-4)
        assert np.max(np.abs(h.values(grid) - log2.values(grid))) <= 1e-14

    def test_expression_count(self):
        with pytest.raises(DimMismatch):
            from_dsl(["-ln(t1)"], 2)

    def test_linear_partials_are_a_valid_handle(self, linear_loss):
        assert linear_loss.values(0.25)[0] == pytest.approx([0.25, 0.75])


class TestSpecs:
    def test_builtin_spec(self):
        h = from_spec({'name': 'brier', 'kind': 'builtin', 'n': 3})
        assert h.n == 3 and h.name == 'brier'

    def test_derived_spec(self, log2):
        h = from_spec({'name': 'half_log', 'kind': 'derived', 'op': 'scale', 'params': {'a': 0.5},
                       'operands': [{'name': 'log', 'kind': 'builtin'}]})
        assert h.values(0.5)[0] == pytest.approx(0.5 * log2.values(0.5)[0])

    def test_unknown_keys_are_ignored(self):
        h = from_spec({'name': 'log', 'kind': 'builtin', 'comment': 'ignored'})
        assert h.n == 2

    @pytest.mark.parametrize("spec", [
        {'name': 'x', 'kind': 'dsl', 'exprs': ['t1']},
        {'name': 'x', 'kind': 'derived', 'op': 'add', 'operands': [{'name': 'log', 'kind': 'builtin'}]},
        {'name': 'x', 'kind': 'derived', 'op': 'scale', 'operands': [{'name': 'log', 'kind': 'builtin'}]},
        {'name': 'x', 'kind': 'other'},
        {'kind': 'builtin'},
    ])
    def test_invalid_specs(self, spec):
        with pytest.raises(BadParams):
            from_spec(spec)

    def test_dsl_parse_errors_pass_through(self):
        with pytest.raises(ParseError):
            from_spec({'name': 'x', 'kind': 'dsl', 'exprs': ['-ln(t1', '-ln(1-t1)']})


class TestProperness:
    @pytest.mark.parametrize("name", ['log', 'brier', 'spherical'])
    @pytest.mark.parametrize("n", [2, 3])
    def test_builtins_are_proper(self, name, n, config):
        verdict = check_proper(builtin(name, {'n': n}), config=config)
        assert verdict.proper
        assert verdict.witness is None

    def test_swapped_log_fails_alignment(self, swapped_log, config):
        verdict = check_proper(swapped_log, grid=[ChartPoint((0.25,), 2)], config=config)
        assert not verdict.proper
        assert verdict.failure == 'alignment'
        assert verdict.witness == (0.25,)

    def test_swapped_log_fails_on_default_grid(self, swapped_log, config):
        first = check_proper(swapped_log, config=config)
        second = check_proper(swapped_log, config=config)
        assert not first.proper
        assert first.witness == second.witness

    def test_linear_loss_fails_second_order(self, linear_loss, config):
        verdict = check_proper(linear_loss, config=config)
        assert not verdict.proper
        assert verdict.failure in ('alignment', 'second_order')

    def test_brier_brute_force_minimizer(self, brier3):
        rng = np.random.default_rng(3)
        q = lattice(3, 61, 1e-4)
        values = brier3.values(q)
        for p in rng.dirichlet(np.ones(3), size=20):
            risks = values @ p
            best = q[int(np.argmin(risks))]
            assert np.max(np.abs(best - p[:2])) <= 0.05

    @pytest.mark.parametrize("name", ['log', 'brier', 'spherical', 'swapped_log', 'linear_loss'])
    def test_verdict_stable_across_grids(self, name, request, config):
        h = builtin(name) if name in ('log', 'brier', 'spherical') else request.getfixturevalue(name)
        coarse = check_proper(h, grid=lattice(2, 101, 1e-4), config=config)
        fine = check_proper(h, grid=lattice(2, 1001, 1e-4), config=config)
        assert coarse.proper == fine.proper

    @pytest.mark.parametrize("name", ['log', 'brier', 'spherical'])
    def test_binary_builtins_strictly_proper_by_brute_force(self, name):
        h = builtin(name)
        q = lattice(2, 2001, 1e-4)
        values = h.values(q)
        for p in np.linspace(0.05, 0.95, 19):
            risks = values @ np.array([p, 1 - p])
            best = int(np.argmin(risks))
            assert abs(q[best, 0] - p) <= 1e-3
            far = np.abs(q[:, 0] - p) > 0.01
            assert np.all(risks[far] > risks[best])

    def test_require_proper_raises(self, swapped_log, config):
        with pytest.raises(NotProper) as info:
            require_proper(swapped_log, config)
        assert info.value.details['witness'] is not None


class TestFairness:
    def test_log_is_fair(self, log2, config):
        verdict = fairness_check(log2, config)
        assert verdict.fair
        assert abs(verdict.limit_first) <= 1e-6 and abs(verdict.limit_second) <= 1e-6

    def test_shift_breaks_fairness(self, log2, config):
        verdict = fairness_check(translate(log2, (1, 0)), config)
        assert not verdict.fair
        assert verdict.limit_first == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("name", ['brier', 'spherical'])
    def test_other_builtins_are_fair(self, name, config):
        assert fairness_check(builtin(name), config).fair

    def test_binary_only(self, log3, config):
        with pytest.raises(DimMismatch):
            fairness_check(log3, config)

    def test_log_loss_helper(self):
        assert log_loss(3) is builtin('log', {'n': 3})
