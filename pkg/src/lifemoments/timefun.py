"""Piecewise-analytic time functions defined by a small closed expression DSL.

Grammar (whitespace insignificant)::

    expr   := term (("+"|"-") term)*
    term   := factor (("*"|"/") factor)*
    factor := base ("^" factor)?
    base   := number | "t" | "(" expr ")" | "-" base
            | "exp" "(" expr ")" | "ln" "(" expr ")" | "ind" "(" cmp ")"
    cmp    := expr ("<"|"<="|">"|">=") expr     # operands affine in t

Indicators evaluate to exactly 0.0 or 1.0 and their thresholds are the
function's breakpoints.  A product with a zero factor short-circuits to 0,
so masked regions never raise domain errors.
"""

from __future__ import annotations

import math
import re

import numpy as np

from .errors import DslError, EvalDomainError

__all__ = ["TimeFunction", "parse_timefun", "constant"]

# Bytecode opcodes shared with the compiled evaluator in _core.pyx.
OP_CONST = 0
OP_T = 1
OP_ADD = 2
OP_SUB = 3
OP_MUL = 4
OP_DIV = 5
OP_NEG = 6
OP_EXP = 7
OP_LN = 8
OP_POW = 9
OP_LT = 10
OP_LE = 11
OP_GT = 12
OP_GE = 13

_CMP_OP = {"<": OP_LT, "<=": OP_LE, ">": OP_GT, ">=": OP_GE}


class _Node:
    __slots__ = ()


class _Const(_Node):
    __slots__ = ("value",)

    def __init__(self, value):
        self.value = float(value)


class _Var(_Node):
    __slots__ = ()


class _Unary(_Node):
    __slots__ = ("arg",)

    def __init__(self, arg):
        self.arg = arg


class _Neg(_Unary):
    __slots__ = ()


class _Exp(_Unary):
    __slots__ = ()


class _Ln(_Unary):
    __slots__ = ()


class _Binary(_Node):
    __slots__ = ("left", "right")

    def __init__(self, left, right):
        self.left = left
        self.right = right


class _Add(_Binary):
    __slots__ = ()


class _Sub(_Binary):
    __slots__ = ()


class _Mul(_Binary):
    __slots__ = ()


class _Div(_Binary):
    __slots__ = ()


class _Pow(_Binary):
    __slots__ = ()


class _Ind(_Node):
    __slots__ = ("left", "op", "right")

    def __init__(self, left, op, right):
        self.left = left
        self.op = op
        self.right = right


# ---------------------------------------------------------------------------
# Tokenizer / parser
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op><=|>=|[-+*/^()<>])"
    r")"
)

_KEYWORDS = {"t", "exp", "ln", "ind"}


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = []  # (kind, text, position)
        pos = 0
        while pos < len(src):
            m = _TOKEN_RE.match(src, pos)
            if m is None or m.end() == pos:
                stripped = src[pos:].lstrip()
                if not stripped:
                    break
                at = len(src) - len(stripped)
                raise DslError(f"unexpected character {stripped[0]!r}", src, at)
            if m.lastgroup == "number":
                text = m.group("number")
                try:
                    float(text)
                except ValueError:
                    raise DslError(f"non-numeric literal {text!r}", src, m.start(m.lastgroup)) from None
                self.tokens.append(("number", text, m.start(m.lastgroup)))
            else:
                self.tokens.append((m.lastgroup, m.group(m.lastgroup), m.start(m.lastgroup)))
            pos = m.end()
        self.i = 0

    def _peek(self):
        if self.i < len(self.tokens):
            return self.tokens[self.i]
        return ("end", "", len(self.src))

    def _next(self):
        tok = self._peek()
        self.i += 1
        return tok

    def _expect(self, text):
        kind, value, pos = self._next()
        if value != text:
            raise DslError(f"expected {text!r}, found {value or 'end of input'!r}", self.src, pos)

    def parse(self):
        node = self.expr()
        kind, value, pos = self._peek()
        if kind != "end":
            raise DslError(f"unexpected token {value!r}", self.src, pos)
        return node

    def expr(self):
        node = self.term()
        while self._peek()[1] in ("+", "-"):
            op = self._next()[1]
            rhs = self.term()
            node = _Add(node, rhs) if op == "+" else _Sub(node, rhs)
        return node

    def term(self):
        node = self.factor()
        while self._peek()[1] in ("*", "/"):
            op = self._next()[1]
            rhs = self.factor()
            node = _Mul(node, rhs) if op == "*" else _Div(node, rhs)
        return node

    def factor(self):
        node = self.base()
        if self._peek()[1] == "^":
            self._next()
            return _Pow(node, self.factor())  # right-associative
        return node

    def base(self):
        kind, value, pos = self._next()
        if kind == "number":
            return _Const(float(value))
        if kind == "ident":
            if value == "t":
                return _Var()
            if value in ("exp", "ln"):
                self._expect("(")
                arg = self.expr()
                self._expect(")")
                return _Exp(arg) if value == "exp" else _Ln(arg)
            if value == "ind":
                self._expect("(")
                node = self.cmp()
                self._expect(")")
                return node
            raise DslError(f"unknown identifier {value!r}", self.src, pos)
        if value == "(":
            node = self.expr()
            self._expect(")")
            return node
        if value == "-":
            return _Neg(self.base())
        raise DslError(f"expected expression, found {value or 'end of input'!r}", self.src, pos)

    def cmp(self):
        left = self.expr()
        kind, op, pos = self._next()
        if op not in _CMP_OP:
            raise DslError(f"expected comparison operator, found {op or 'end of input'!r}", self.src, pos)
        right = self.expr()
        for side in (left, right):
            _affine(side, self.src, pos)  # raises if not affine in t
        return _Ind(left, op, right)


def _affine(node, src, pos):
    """Return (slope, intercept) of an affine-in-t expression, else raise."""
    if isinstance(node, _Const):
        return 0.0, node.value
    if isinstance(node, _Var):
        return 1.0, 0.0
    if isinstance(node, _Neg):
        a, b = _affine(node.arg, src, pos)
        return -a, -b
    if isinstance(node, _Add):
        la, lb = _affine(node.left, src, pos)
        ra, rb = _affine(node.right, src, pos)
        return la + ra, lb + rb
    if isinstance(node, _Sub):
        la, lb = _affine(node.left, src, pos)
        ra, rb = _affine(node.right, src, pos)
        return la - ra, lb - rb
    if isinstance(node, _Mul):
        la, lb = _affine(node.left, src, pos)
        ra, rb = _affine(node.right, src, pos)
        if la == 0.0:
            return lb * ra, lb * rb
        if ra == 0.0:
            return rb * la, rb * lb
        raise DslError("comparison operand must be affine in t", src, pos)
    if isinstance(node, _Div):
        la, lb = _affine(node.left, src, pos)
        ra, rb = _affine(node.right, src, pos)
        if ra == 0.0 and rb != 0.0:
            return la / rb, lb / rb
        raise DslError("comparison operand must be affine in t", src, pos)
    if isinstance(node, (_Pow, _Exp, _Ln)):
        args = (node.arg,) if isinstance(node, _Unary) else (node.left, node.right)
        for arg in args:
            a, _ = _affine(arg, src, pos)
            if a != 0.0:
                raise DslError("comparison operand must be affine in t", src, pos)
        return 0.0, _eval(node, 0.0)
    raise DslError("comparison operand must be affine in t", src, pos)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def _eval(node, t):
    """Scalar tree-walk evaluation; products short-circuit on zero factors."""
    if isinstance(node, _Const):
        return node.value
    if isinstance(node, _Var):
        return t
    if isinstance(node, _Neg):
        return -_eval(node.arg, t)
    if isinstance(node, _Add):
        return _eval(node.left, t) + _eval(node.right, t)
    if isinstance(node, _Sub):
        return _eval(node.left, t) - _eval(node.right, t)
    if isinstance(node, _Mul):
        lv = lerr = rv = rerr = None
        try:
            lv = _eval(node.left, t)
        except EvalDomainError as e:
            lerr = e
        try:
            rv = _eval(node.right, t)
        except EvalDomainError as e:
            rerr = e
        if lv == 0.0 or rv == 0.0:
            return 0.0
        if lerr is not None:
            raise lerr
        if rerr is not None:
            raise rerr
        return lv * rv
    if isinstance(node, _Div):
        num = _eval(node.left, t)
        den = _eval(node.right, t)
        if den == 0.0:
            raise EvalDomainError("division by zero", t)
        return num / den
    if isinstance(node, _Pow):
        base = _eval(node.left, t)
        expo = _eval(node.right, t)
        try:
            return math.pow(base, expo)
        except ValueError:
            raise EvalDomainError(f"invalid power {base!r}^{expo!r}", t) from None
        except OverflowError:
            raise EvalDomainError(f"overflow in power {base!r}^{expo!r}", t) from None
    if isinstance(node, _Exp):
        try:
            return math.exp(_eval(node.arg, t))
        except OverflowError:
            raise EvalDomainError("overflow in exp", t) from None
    if isinstance(node, _Ln):
        v = _eval(node.arg, t)
        if v <= 0.0:
            raise EvalDomainError(f"log of non-positive value {v!r}", t)
        return math.log(v)
    if isinstance(node, _Ind):
        lv = _eval(node.left, t)
        rv = _eval(node.right, t)
        ok = (
            lv < rv if node.op == "<"
            else lv <= rv if node.op == "<="
            else lv > rv if node.op == ">"
            else lv >= rv
        )
        return 1.0 if ok else 0.0
    raise TypeError(f"unknown node {node!r}")


def _eval_grid(node, ts, ind_ts):
    """Vector evaluation at `ts`, with indicator comparisons taken at `ind_ts`.

    Decoupling the indicator times lets grid sweeps evaluate a cell-endpoint
    value with the indicators frozen to the cell interior, i.e. the continuous
    extension of the analytic piece valid inside the cell.
    """
    if isinstance(node, _Const):
        return np.full(ts.shape, node.value)
    if isinstance(node, _Var):
        return ts.astype(float, copy=True)
    if isinstance(node, _Neg):
        return -_eval_grid(node.arg, ts, ind_ts)
    if isinstance(node, _Add):
        return _eval_grid(node.left, ts, ind_ts) + _eval_grid(node.right, ts, ind_ts)
    if isinstance(node, _Sub):
        return _eval_grid(node.left, ts, ind_ts) - _eval_grid(node.right, ts, ind_ts)
    if isinstance(node, _Mul):
        lv = _eval_grid(node.left, ts, ind_ts)
        rv = _eval_grid(node.right, ts, ind_ts)
        with np.errstate(all="ignore"):
            return np.where((lv == 0.0) | (rv == 0.0), 0.0, lv * rv)
    if isinstance(node, _Div):
        lv = _eval_grid(node.left, ts, ind_ts)
        rv = _eval_grid(node.right, ts, ind_ts)
        with np.errstate(all="ignore"):
            return lv / rv
    if isinstance(node, _Pow):
        lv = _eval_grid(node.left, ts, ind_ts)
        rv = _eval_grid(node.right, ts, ind_ts)
        with np.errstate(all="ignore"):
            return np.power(lv, rv)
    if isinstance(node, _Exp):
        with np.errstate(all="ignore"):
            return np.exp(_eval_grid(node.arg, ts, ind_ts))
    if isinstance(node, _Ln):
        with np.errstate(all="ignore"):
            return np.log(_eval_grid(node.arg, ts, ind_ts))
    if isinstance(node, _Ind):
        lv = _eval_grid(node.left, ind_ts, ind_ts)
        rv = _eval_grid(node.right, ind_ts, ind_ts)
        if node.op == "<":
            ok = lv < rv
        elif node.op == "<=":
            ok = lv <= rv
        elif node.op == ">":
            ok = lv > rv
        else:
            ok = lv >= rv
        return ok.astype(float)
    raise TypeError(f"unknown node {node!r}")


def _to_source(node):
    """Canonical re-printable form; parentheses follow grammar precedence."""
    if isinstance(node, _Const):
        return repr(node.value)
    if isinstance(node, _Var):
        return "t"
    if isinstance(node, _Neg):
        return f"-{_wrap(node.arg, level=3)}"
    if isinstance(node, _Add):
        return f"{_wrap(node.left, 1)} + {_wrap(node.right, 2)}"
    if isinstance(node, _Sub):
        return f"{_wrap(node.left, 1)} - {_wrap(node.right, 2)}"
    if isinstance(node, _Mul):
        return f"{_wrap(node.left, 2)} * {_wrap(node.right, 3)}"
    if isinstance(node, _Div):
        return f"{_wrap(node.left, 2)} / {_wrap(node.right, 3)}"
    if isinstance(node, _Pow):
        return f"{_wrap(node.left, 4)}^{_wrap(node.right, 3)}"
    if isinstance(node, _Exp):
        return f"exp({_to_source(node.arg)})"
    if isinstance(node, _Ln):
        return f"ln({_to_source(node.arg)})"
    if isinstance(node, _Ind):
        return f"ind({_to_source(node.left)} {node.op} {_to_source(node.right)})"
    raise TypeError(f"unknown node {node!r}")


def _level(node):
    if isinstance(node, (_Add, _Sub)):
        return 1
    if isinstance(node, (_Mul, _Div)):
        return 2
    if isinstance(node, _Neg):
        return 3
    return 4  # atoms, calls, powers


def _wrap(node, level):
    text = _to_source(node)
    if _level(node) < level:
        return f"({text})"
    return text


def _compile(node, ops, args, consts):
    if isinstance(node, _Const):
        ops.append(OP_CONST)
        args.append(len(consts))
        consts.append(node.value)
        return
    if isinstance(node, _Var):
        ops.append(OP_T)
        args.append(0)
        return
    if isinstance(node, _Neg):
        _compile(node.arg, ops, args, consts)
        ops.append(OP_NEG)
        args.append(0)
        return
    if isinstance(node, (_Exp, _Ln)):
        _compile(node.arg, ops, args, consts)
        ops.append(OP_EXP if isinstance(node, _Exp) else OP_LN)
        args.append(0)
        return
    if isinstance(node, _Ind):
        _compile(node.left, ops, args, consts)
        _compile(node.right, ops, args, consts)
        ops.append(_CMP_OP[node.op])
        args.append(0)
        return
    opcode = {_Add: OP_ADD, _Sub: OP_SUB, _Mul: OP_MUL, _Div: OP_DIV, _Pow: OP_POW}[type(node)]
    _compile(node.left, ops, args, consts)
    _compile(node.right, ops, args, consts)
    ops.append(opcode)
    args.append(0)


def _collect_breakpoints(node, out):
    if isinstance(node, _Ind):
        la, lb = _affine(node.left, "", 0)
        ra, rb = _affine(node.right, "", 0)
        if la != ra:
            out.append((rb - lb) / (la - ra))
        return
    if isinstance(node, _Unary):
        _collect_breakpoints(node.arg, out)
    elif isinstance(node, _Binary):
        _collect_breakpoints(node.left, out)
        _collect_breakpoints(node.right, out)


# ---------------------------------------------------------------------------
# Public interface
# ---------------------------------------------------------------------------


class TimeFunction:
    """Immutable piecewise-analytic scalar function of time.

    Between consecutive breakpoints the function is continuous; breakpoints
    are exactly the indicator thresholds occurring in the expression.
    """

    __slots__ = ("_root", "breakpoints", "_program")

    def __init__(self, root):
        self._root = root
        thresholds = []
        _collect_breakpoints(root, thresholds)
        self.breakpoints = tuple(sorted(set(thresholds)))
        self._program = None

    def __call__(self, t: float) -> float:
        value = _eval(self._root, float(t))
        if not math.isfinite(value):
            raise EvalDomainError("non-finite value", t)
        return value

    def eval_grid(self, ts, ind_ts=None) -> np.ndarray:
        """Evaluate at an array of times.

        `ind_ts`, when given, is a same-shaped array of times at which the
        indicator comparisons are resolved instead of `ts`.
        """
        ts = np.asarray(ts, dtype=float)
        out = _eval_grid(self._root, ts, ts if ind_ts is None else np.asarray(ind_ts, dtype=float))
        bad = ~np.isfinite(out)
        if bad.any():
            i = int(np.argmax(bad))
            raise EvalDomainError("non-finite value", float(ts.flat[i]))
        return out

    def breakpoints_in(self, s: float, t: float) -> list[float]:
        """Breakpoints strictly inside (s, t), ascending."""
        if s > t:
            raise ValueError(f"breakpoints_in requires s <= t, got {s} > {t}")
        return [b for b in self.breakpoints if s < b < t]

    def to_source(self) -> str:
        """Canonical source text; re-parsing it reproduces the same function."""
        return _to_source(self._root)

    def program(self):
        """Bytecode form (ops, args, consts) for the stack-machine evaluators."""
        if self._program is None:
            ops: list[int] = []
            args: list[int] = []
            consts: list[float] = []
            _compile(self._root, ops, args, consts)
            self._program = (
                np.asarray(ops, dtype=np.int32),
                np.asarray(args, dtype=np.int32),
                np.asarray(consts, dtype=np.float64),
            )
        return self._program

    def __repr__(self):
        return f"TimeFunction({self.to_source()!r})"


def parse_timefun(src: str) -> TimeFunction:
    """Parse DSL source into a TimeFunction.

    Raises DslError with the offending position for syntax errors, unknown
    identifiers and malformed numeric literals.
    """
    if not isinstance(src, str):
        raise DslError(f"expected text, got {type(src).__name__}")
    return TimeFunction(_Parser(src).parse())


def constant(value: float) -> TimeFunction:
    """TimeFunction that is identically `value`."""
    return TimeFunction(_Const(value))


ZERO = constant(0.0)
