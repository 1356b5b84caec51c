"""Arithmetic expression language for scenario-defined signals.

Reference inputs r(t), parameter trajectories theta_i(t) and disturbances
sigma(t, x) are written as small arithmetic expressions over the time variable
`t`, state variables `x1..xn`, the constant `pi` and the functions sin, cos,
exp, abs.  Expressions are parsed by recursive descent with the usual
precedence (unary minus > * / > + -) and evaluated in IEEE double precision.
Angles are radians everywhere.
"""

import math


class SignalSyntaxError(Exception):
    """Malformed expression text; `offset` is the byte position."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class UnknownIdentifier(Exception):
    def __init__(self, name, offset=None):
        super().__init__(f"unknown identifier '{name}'")
        self.name = name
        self.offset = offset


class ArityError(Exception):
    pass


class NonFinite(Exception):
    """Evaluation produced NaN or infinity."""


MAX_DEPTH = 64
FUNCTIONS = {"sin": math.sin, "cos": math.cos, "exp": math.exp, "abs": abs}


# ---------------------------------------------------------------------------
# AST nodes


class Num:
    __slots__ = ("value",)

    def __init__(self, value):
        self.value = float(value)

    def __eq__(self, other):
        return isinstance(other, Num) and self.value == other.value


class TimeVar:
    __slots__ = ()

    def __eq__(self, other):
        return isinstance(other, TimeVar)


class StateVar:
    """x1..xn; `index` is zero-based."""

    __slots__ = ("index",)

    def __init__(self, index):
        self.index = index

    def __eq__(self, other):
        return isinstance(other, StateVar) and self.index == other.index


class PiConst:
    __slots__ = ()

    def __eq__(self, other):
        return isinstance(other, PiConst)


class Neg:
    __slots__ = ("operand",)

    def __init__(self, operand):
        self.operand = operand

    def __eq__(self, other):
        return isinstance(other, Neg) and self.operand == other.operand


class BinOp:
    __slots__ = ("op", "left", "right")

    def __init__(self, op, left, right):
        self.op = op
        self.left = left
        self.right = right

    def __eq__(self, other):
        return (isinstance(other, BinOp) and self.op == other.op
                and self.left == other.left and self.right == other.right)


class Call:
    __slots__ = ("fn", "arg")

    def __init__(self, fn, arg):
        self.fn = fn
        self.arg = arg

    def __eq__(self, other):
        return (isinstance(other, Call) and self.fn == other.fn
                and self.arg == other.arg)


class SignalSpec:
    """Expression plus user-declared sup and rate bounds over the horizon."""

    __slots__ = ("expr", "declared_bound", "declared_rate_bound")

    def __init__(self, expr, declared_bound, declared_rate_bound):
        self.expr = expr
        self.declared_bound = float(declared_bound)
        self.declared_rate_bound = float(declared_rate_bound)


# ---------------------------------------------------------------------------
# tokenizer / parser


def _tokenize(text):
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "+-*/(),":
            tokens.append((ch, ch, i))
            i += 1
            continue
        if ch.isdigit() or ch == ".":
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            # exponent part
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    while k < n and text[k].isdigit():
                        k += 1
                    j = k
            try:
                val = float(text[i:j])
            except ValueError:
                raise SignalSyntaxError(f"bad number '{text[i:j]}'", i) from None
            tokens.append(("num", val, i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("ident", text[i:j], i))
            i = j
            continue
        raise SignalSyntaxError(f"unexpected character '{ch}'", i)
    tokens.append(("end", None, n))
    return tokens


class _Parser:
    def __init__(self, tokens, n_states):
        self.tokens = tokens
        self.pos = 0
        self.n_states = n_states

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind):
        tok = self.advance()
        if tok[0] != kind:
            raise SignalSyntaxError(f"expected '{kind}', got '{tok[1]}'", tok[2])
        return tok

    def parse_expr(self, depth=0):
        if depth > MAX_DEPTH:
            raise SignalSyntaxError("expression too deeply nested",
                                    self.peek()[2])
        node = self.parse_term(depth + 1)
        while self.peek()[0] in ("+", "-"):
            op = self.advance()[0]
            rhs = self.parse_term(depth + 1)
            node = BinOp(op, node, rhs)
        return node

    def parse_term(self, depth):
        if depth > MAX_DEPTH:
            raise SignalSyntaxError("expression too deeply nested",
                                    self.peek()[2])
        node = self.parse_unary(depth + 1)
        while self.peek()[0] in ("*", "/"):
            op = self.advance()[0]
            rhs = self.parse_unary(depth + 1)
            node = BinOp(op, node, rhs)
        return node

    def parse_unary(self, depth):
        if depth > MAX_DEPTH:
            raise SignalSyntaxError("expression too deeply nested",
                                    self.peek()[2])
        if self.peek()[0] == "-":
            self.advance()
            return Neg(self.parse_unary(depth + 1))
        return self.parse_atom(depth + 1)

    def parse_atom(self, depth):
        kind, value, offset = self.advance()
        if kind == "num":
            return Num(value)
        if kind == "(":
            node = self.parse_expr(depth + 1)
            self.expect(")")
            return node
        if kind == "ident":
            if self.peek()[0] == "(":
                if value not in FUNCTIONS:
                    raise UnknownIdentifier(value, offset)
                self.advance()
                arg = self.parse_expr(depth + 1)
                if self.peek()[0] == ",":
                    raise ArityError(f"function '{value}' takes one argument")
                self.expect(")")
                return Call(value, arg)
            if value == "t":
                return TimeVar()
            if value == "pi":
                return PiConst()
            if len(value) >= 2 and value[0] == "x" and value[1:].isdigit():
                idx = int(value[1:])
                if not 1 <= idx <= self.n_states:
                    raise UnknownIdentifier(value, offset)
                return StateVar(idx - 1)
            raise UnknownIdentifier(value, offset)
        raise SignalSyntaxError(f"unexpected token '{value}'", offset)


def parse(text, n_states):
    """Parse expression text into an AST; n_states bounds the x variables."""
    if not text or not text.strip():
        raise SignalSyntaxError("empty expression", 0)
    parser = _Parser(_tokenize(text), n_states)
    node = parser.parse_expr()
    kind, value, offset = parser.peek()
    if kind != "end":
        raise SignalSyntaxError(f"trailing input '{value}'", offset)
    return node


# ---------------------------------------------------------------------------
# evaluation / printing


def _eval_node(node, t, x):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, TimeVar):
        return t
    if isinstance(node, PiConst):
        return math.pi
    if isinstance(node, StateVar):
        return x[node.index]
    if isinstance(node, Neg):
        return -_eval_node(node.operand, t, x)
    if isinstance(node, Call):
        return FUNCTIONS[node.fn](_eval_node(node.arg, t, x))
    a = _eval_node(node.left, t, x)
    b = _eval_node(node.right, t, x)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    try:
        return a / b
    except ZeroDivisionError:
        raise NonFinite("division by zero") from None


def evaluate(expr, t, x=()):
    """Evaluate the AST at time t with state vector x.

    Raises NonFinite when the result is NaN or infinite.
    """
    try:
        v = _eval_node(expr, float(t), x)
    except (OverflowError, ValueError) as exc:
        raise NonFinite(str(exc)) from exc
    if not math.isfinite(v):
        raise NonFinite(f"non-finite value {v!r}")
    return v


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def pretty(node, parent_prec=0, right_side=False):
    """Canonical text form; parse(pretty(parse(s))) reproduces the AST."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, TimeVar):
        return "t"
    if isinstance(node, PiConst):
        return "pi"
    if isinstance(node, StateVar):
        return f"x{node.index + 1}"
    if isinstance(node, Call):
        return f"{node.fn}({pretty(node.arg)})"
    if isinstance(node, Neg):
        inner = pretty(node.operand, 3)
        s = f"-{inner}"
        return f"({s})" if parent_prec >= 2 or right_side else s
    prec = _PREC[node.op]
    left = pretty(node.left, prec, False)
    right = pretty(node.right, prec, True)
    s = f"{left} {node.op} {right}"
    if prec < parent_prec or (right_side and prec == parent_prec):
        return f"({s})"
    return s


def to_python(node, state_prefix="x"):
    """Emit a python expression string using variables t and x1..xn.

    Used to compile scenario signals into fast scalar functions; the emitted
    code needs sin/cos/exp/fabs/pi from math in scope.
    """
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, TimeVar):
        return "t"
    if isinstance(node, PiConst):
        return repr(math.pi)
    if isinstance(node, StateVar):
        return f"{state_prefix}{node.index + 1}"
    if isinstance(node, Neg):
        return f"(-{to_python(node.operand, state_prefix)})"
    if isinstance(node, Call):
        fn = "fabs" if node.fn == "abs" else node.fn
        return f"{fn}({to_python(node.arg, state_prefix)})"
    return (f"({to_python(node.left, state_prefix)} {node.op} "
            f"{to_python(node.right, state_prefix)})")


def uses_time(node):
    """Whether the expression references the time variable."""
    if isinstance(node, TimeVar):
        return True
    if isinstance(node, Neg):
        return uses_time(node.operand)
    if isinstance(node, Call):
        return uses_time(node.arg)
    if isinstance(node, BinOp):
        return uses_time(node.left) or uses_time(node.right)
    return False


def state_vars_used(node):
    """Zero-based indices of state variables appearing in the expression."""
    if isinstance(node, StateVar):
        return {node.index}
    if isinstance(node, Neg):
        return state_vars_used(node.operand)
    if isinstance(node, Call):
        return state_vars_used(node.arg)
    if isinstance(node, BinOp):
        return state_vars_used(node.left) | state_vars_used(node.right)
    return set()


def verify_declared_bounds(spec, horizon, samples=2001, n_states=0,
                           state_of_t=None, slack=0.01):
    """Sample-check the declared sup and rate bounds on a uniform grid.

    The expression is evaluated along `state_of_t` (or the zero trajectory)
    and its time derivative estimated by central differences.  Returns False
    if any sample exceeds the declared bound by more than `slack` (1%).
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if state_of_t is None:
        zero = [0.0] * n_states
        state_of_t = lambda t: zero
    h = 1e-5
    for i in range(samples):
        t = horizon * i / (samples - 1)
        x = state_of_t(t)
        v = evaluate(spec.expr, t, x)
        if abs(v) > spec.declared_bound * (1.0 + slack):
            return False
        vp = evaluate(spec.expr, t + h, x)
        vm = evaluate(spec.expr, max(t - h, 0.0), x)
        rate = (vp - vm) / (h if t < h else 2 * h)
        if abs(rate) > spec.declared_rate_bound * (1.0 + slack):
            return False
    return True
