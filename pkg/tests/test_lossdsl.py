import math

import numpy as np
import pytest

from mixgeo.engine.lossdsl import Call, Neg, Var, compile_exprs, eval_jet2, eval_jetN, parse
from mixgeo.engine.losses import BUILTINS, builtin
from mixgeo.utils.errors import EvalError, ParseError


class TestParse:
    def test_negated_log(self):
        e = parse("-ln(t1)", 2)
        assert isinstance(e.root, Neg)
        assert isinstance(e.root.arg, Call) and e.root.arg.func == 'ln'
        assert e.root.arg.arg == Var(1)

    def test_brier_partial(self):
        e = parse("2*(1-t1)^2", 2)
        assert eval_jet2(e, 0.25).v == pytest.approx(2 * 0.75 ** 2)

    def test_unclosed_parenthesis(self):
        with pytest.raises(ParseError) as info:
            parse("ln(t2", 3)
        assert info.value.position == 6

    def test_variable_out_of_range(self):
        with pytest.raises(ParseError) as info:
            parse("t2", 2)
        assert info.value.position == 1

    @pytest.mark.parametrize("text", ["", "t1 +", "foo(t1)", "t1^t1", "2 $ t1", "(t1))"])
    def test_malformed(self, text):
        with pytest.raises(ParseError):
            parse(text, 2)

    def test_unary_minus_binds_looser_than_power(self):
        assert eval_jet2(parse("-t1^2", 2), 0.5).v == pytest.approx(-0.25)

    def test_power_is_right_associative(self):
        assert eval_jet2(parse("t1^2^2", 2), 0.5).v == pytest.approx(0.5 ** 4)

    @pytest.mark.parametrize("text", [
        "-ln(t1)",
        "2*(1-t1)^2",
        "-t1^2 + 3/t2",
        "exp(-2.5*t1)/sqrt(t1+t2)",
        "t1^(-1)",
        "1e-3*ln(1-t1-t2)",
    ])
    def test_printing_is_a_fixed_point(self, text):
        printed = str(parse(text, 3))
        assert str(parse(printed, 3)) == printed

    def test_compile_tags_partial_index(self):
        with pytest.raises(ParseError) as info:
            compile_exprs(["-ln(t1)", "-ln(1-t1"], 2)
        assert info.value.details['partial'] == 2


class TestJets:
    def test_log_partial(self):
        jet = eval_jet2(parse("-ln(t1)", 2), 0.5)
        assert jet.as_tuple() == pytest.approx((math.log(2), -2.0, 4.0))

    def test_brier_partial(self):
        jet = eval_jet2(parse("2*(1-t1)^2", 2), 0.5)
        assert jet.as_tuple() == pytest.approx((0.5, -2.0, 4.0))

    def test_identity(self):
        assert eval_jet2(parse("t1", 2), 0.3).as_tuple() == pytest.approx((0.3, 1.0, 0.0))

    def test_multivariate_log(self):
        jet = eval_jetN(parse("-ln(t1)", 3), (1 / 3, 1 / 3))
        assert jet.v == pytest.approx(1.098612, abs=1e-6)
        assert jet.grad == pytest.approx([-3.0, 0.0])
        assert jet.hess == pytest.approx(np.array([[9.0, 0.0], [0.0, 0.0]]))

    def test_linear(self):
        jet = eval_jetN(parse("t1+t2", 3), (0.2, 0.5))
        assert jet.grad == pytest.approx([1.0, 1.0])
        assert np.all(jet.hess == 0.0)

    def test_mixed_second_derivatives(self):
        jet = eval_jetN(parse("-ln(1-t1-t2)", 3), (1 / 3, 1 / 3))
        assert jet.grad == pytest.approx([3.0, 3.0])
        assert jet.hess == pytest.approx(np.full((2, 2), 9.0))

    @pytest.mark.parametrize("t", [0.1, 0.5, 0.83])
    def test_multivariate_agrees_with_binary(self, t):
        e = parse("exp(-t1)*ln(1-t1) + t1^3", 2)
        jet2 = eval_jet2(e, t)
        jetn = eval_jetN(e, (t,))
        assert jetn.v == pytest.approx(jet2.v, rel=1e-14)
        assert jetn.grad == pytest.approx([jet2.d1], rel=1e-14)
        assert jetn.hess == pytest.approx(np.array([[jet2.d2]]), rel=1e-14)

    def test_domain_fault(self):
        with pytest.raises(EvalError):
            eval_jet2(parse("ln(t1 - 0.5)", 2), 0.25)

    def test_point_outside_domain(self):
        with pytest.raises(EvalError):
            eval_jet2(parse("t1", 2), 1.5)


@pytest.mark.parametrize("name", BUILTINS)
@pytest.mark.parametrize("n", [2, 3])
def test_jets_match_central_differences(name, n):
    h = builtin(name, {'n': n})
    rng = np.random.default_rng(7)
    points = rng.dirichlet(np.ones(n), size=100)[:, :-1] * 0.9 + 0.1 / n
    step = 1e-5
    jets = h.jets(points)
    m = n - 1
    for i in range(m):
        shift = np.zeros(m)
        shift[i] = step
        up, down = h.jets(points + shift), h.jets(points - shift)
        fd_grad = (up.value - down.value) / (2 * step)
        fd_hess = (up.grad - down.grad) / (2 * step)
        assert jets.grad[:, :, i] == pytest.approx(fd_grad, rel=1e-6, abs=1e-6)
        assert jets.hess[:, :, :, i] == pytest.approx(fd_hess, rel=1e-6, abs=1e-6)
