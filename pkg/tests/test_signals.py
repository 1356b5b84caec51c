import math

import numpy as np
import pytest

from l1adapt import signals
from l1adapt.signals import (ArityError, BinOp, Call, Neg, Num, PiConst,
                             SignalSpec, SignalSyntaxError, StateVar, TimeVar,
                             UnknownIdentifier)


class TestParse:
    def test_precedence(self):
        node = signals.parse("1 + 2 * 3", 0)
        assert node == BinOp("+", Num(1.0), BinOp("*", Num(2.0), Num(3.0)))

    def test_left_associativity(self):
        node = signals.parse("8 - 3 - 2", 0)
        assert signals.evaluate(node, 0.0) == 3.0
        node = signals.parse("8 / 2 / 2", 0)
        assert signals.evaluate(node, 0.0) == 2.0

    def test_unary_minus_binds_tighter_than_mul(self):
        node = signals.parse("-t * 2", 0)
        assert node == BinOp("*", Neg(TimeVar()), Num(2.0))

    def test_parentheses_and_functions(self):
        node = signals.parse("sin(pi * (t + 1))", 0)
        assert node == Call("sin", BinOp("*", PiConst(),
                                        BinOp("+", TimeVar(), Num(1.0))))

    def test_state_variables_bounded_by_n(self):
        node = signals.parse("x1 + x2", 2)
        assert node == BinOp("+", StateVar(0), StateVar(1))
        with pytest.raises(UnknownIdentifier):
            signals.parse("x3", 2)

    def test_scientific_notation(self):
        assert signals.parse("1.5e-2", 0) == Num(0.015)

    def test_syntax_error_carries_offset(self):
        with pytest.raises(SignalSyntaxError) as exc:
            signals.parse("1 + # 2", 0)
        assert exc.value.offset == 4

    def test_trailing_input_rejected(self):
        with pytest.raises(SignalSyntaxError):
            signals.parse("1 2", 0)

    def test_unknown_function(self):
        with pytest.raises(UnknownIdentifier):
            signals.parse("tan(t)", 0)

    def test_arity(self):
        with pytest.raises(ArityError):
            signals.parse("sin(t, 1)", 0)

    def test_empty(self):
        with pytest.raises(SignalSyntaxError):
            signals.parse("   ", 0)

    def test_depth_limit(self):
        deep = "(" * 70 + "t" + ")" * 70
        with pytest.raises(SignalSyntaxError):
            signals.parse(deep, 0)


class TestEvaluate:
    def test_time_and_state(self):
        node = signals.parse("2*t + x1 - x2", 2)
        assert signals.evaluate(node, 3.0, (10.0, 1.0)) == 15.0

    def test_functions_in_radians(self):
        node = signals.parse("cos(pi)", 0)
        assert signals.evaluate(node, 0.0) == -1.0

    def test_division_by_zero(self):
        node = signals.parse("1 / t", 0)
        with pytest.raises(signals.NonFinite):
            signals.evaluate(node, 0.0)

    def test_overflow(self):
        node = signals.parse("exp(t)", 0)
        with pytest.raises(signals.NonFinite):
            signals.evaluate(node, 1e6)


class TestPrinting:
    CASES = ["2 + cos(pi*t)", "cos(x1) + 2*sin(100*t) + cos(150*t)",
             "-(t + 1) * 2", "1 - (2 - 3)", "t / (2 * pi)", "-t", "abs(-t)"]

    @pytest.mark.parametrize("text", CASES)
    def test_pretty_round_trip(self, text):
        node = signals.parse(text, 2)
        assert signals.parse(signals.pretty(node), 2) == node

    @pytest.mark.parametrize("text", CASES)
    def test_to_python_matches_evaluate(self, text):
        node = signals.parse(text, 2)
        env = {"sin": math.sin, "cos": math.cos, "exp": math.exp,
               "fabs": math.fabs}
        for t in (0.0, 0.37, 2.5):
            x = (0.3, -1.2)
            env.update(t=t, x1=x[0], x2=x[1])
            assert eval(signals.to_python(node), env) == \
                pytest.approx(signals.evaluate(node, t, x), abs=0.0)


class TestIntrospection:
    def test_state_vars_used(self):
        node = signals.parse("cos(x1) + x3*t", 3)
        assert signals.state_vars_used(node) == {0, 2}
        assert signals.state_vars_used(signals.parse("sin(t)", 3)) == set()

    def test_uses_time(self):
        assert signals.uses_time(signals.parse("sin(t)", 0))
        assert not signals.uses_time(signals.parse("2 + pi", 0))


class TestDeclaredBounds:
    def test_accepts_valid_declaration(self):
        spec = SignalSpec(signals.parse("sin(pi*t)", 0), 1.0, math.pi)
        assert signals.verify_declared_bounds(spec, 10.0)

    def test_rejects_bound_violation(self):
        spec = SignalSpec(signals.parse("2*sin(t)", 0), 1.0, 10.0)
        assert not signals.verify_declared_bounds(spec, 10.0)

    def test_rejects_rate_violation(self):
        spec = SignalSpec(signals.parse("sin(10*t)", 0), 1.0, 5.0)
        assert not signals.verify_declared_bounds(spec, 10.0)

    def test_state_dependent_along_trajectory(self):
        spec = SignalSpec(signals.parse("cos(x1)", 1), 1.0, 1.0)
        assert signals.verify_declared_bounds(
            spec, 10.0, n_states=1, state_of_t=lambda t: (np.sin(t),))
