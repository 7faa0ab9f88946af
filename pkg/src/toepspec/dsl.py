"""Expression language for matrix symbols.

Grammar (standard precedence, ^ > unary- > * / > + -, whitespace-free):

    expr   := term (('+'|'-') term)*
    term   := unary (('*'|'/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' ['-'] INTEGER)?
    atom   := NUMBER | 'i' | 'pi' | 'x' | 'x1'..'x3'
            | ('cos'|'sin'|'exp'|'conj'|'transpose') '(' expr ')'
            | 'sandwich' '(' expr ',' expr ')'
            | '(' expr ')'
            | '[' '[' expr {',' expr} ']' {',' '[' ... ']'} ']'

'x' is an alias for x1 when k = 1.  conj is entrywise conjugation,
transpose swaps matrix axes, sandwich(Q, A) = Q * A * transpose(Q).

Compilation yields an exact trigonometric coefficient table whenever the
expression is built from complex constants, +, -, *, integer powers,
division by constants, and cos/sin/exp of integer-coefficient linear forms
(cos u = (e^{iu} + e^{-iu})/2 and friends); anything else (bare variables,
x-dependent denominators) produces a general-kind symbol.
"""

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import DslCompileError, DslSyntaxError, DslTypeError
from .symbols import MatrixSymbol

# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


@dataclass
class Node:
    pos: tuple = field(default=(1, 1), compare=False, repr=False)


@dataclass
class Lit(Node):
    value: float = 0.0


@dataclass
class Imag(Node):
    pass


@dataclass
class Var(Node):
    index: int = 0


@dataclass
class Unary(Node):
    op: str = "-"           # "-" | "conj"
    child: Node = None


@dataclass
class Bin(Node):
    op: str = "+"           # + - * / ^
    left: Node = None
    right: Node = None


@dataclass
class Call(Node):
    fn: str = ""            # cos sin exp transpose sandwich
    args: tuple = ()


@dataclass
class Mat(Node):
    rows: tuple = ()        # tuple of tuples of scalar nodes


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<num>\d+(\.\d*)?([eE][+-]?\d+)?|\.\d+([eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[\^+\-*/(),\[\]])
  | (?P<ws>\s+)
""", re.VERBOSE)

_FUNCS = ("cos", "sin", "exp", "conj", "transpose", "sandwich")


@dataclass
class _Token:
    kind: str
    text: str
    line: int
    col: int


def _lex(text):
    tokens = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise DslSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        lexeme = m.group(0)
        if m.lastgroup != "ws":
            tokens.append(_Token(m.lastgroup, lexeme, line, col))
        newlines = lexeme.count("\n")
        if newlines:
            line += newlines
            col = len(lexeme) - lexeme.rfind("\n")
        else:
            col += len(lexeme)
        pos = m.end()
    tokens.append(_Token("eof", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, tokens, k):
        self.toks = tokens
        self.i = 0
        self.k = k

    def peek(self):
        return self.toks[self.i]

    def next(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text):
        t = self.next()
        if t.text != text:
            raise DslSyntaxError(f"expected {text!r}, found {t.text or 'end of input'!r}",
                                 t.line, t.col)
        return t

    def parse(self):
        node = self.expr()
        t = self.peek()
        if t.kind != "eof":
            raise DslSyntaxError(f"trailing input {t.text!r}", t.line, t.col)
        return node

    def expr(self):
        node = self.term()
        while self.peek().text in ("+", "-"):
            t = self.next()
            node = Bin(pos=(t.line, t.col), op=t.text, left=node, right=self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek().text in ("*", "/"):
            t = self.next()
            node = Bin(pos=(t.line, t.col), op=t.text, left=node, right=self.unary())
        return node

    def unary(self):
        t = self.peek()
        if t.text == "-":
            self.next()
            return Unary(pos=(t.line, t.col), op="-", child=self.unary())
        return self.power()

    def power(self):
        node = self.atom()
        if self.peek().text == "^":
            t = self.next()
            sign = 1.0
            if self.peek().text == "-":
                self.next()
                sign = -1.0
            e = self.next()
            if e.kind != "num":
                raise DslSyntaxError("exponent must be an integer literal", e.line, e.col)
            val = float(e.text)
            if val != int(val):
                raise DslSyntaxError(f"exponent must be an integer, got {e.text}",
                                     e.line, e.col)
            node = Bin(pos=(t.line, t.col), op="^", left=node,
                       right=Lit(pos=(e.line, e.col), value=sign * val))
        return node

    def atom(self):
        t = self.next()
        if t.kind == "num":
            return Lit(pos=(t.line, t.col), value=float(t.text))
        if t.kind == "ident":
            name = t.text
            if name == "i":
                return Imag(pos=(t.line, t.col))
            if name == "pi":
                return Lit(pos=(t.line, t.col), value=math.pi)
            if name == "x":
                if self.k != 1:
                    raise DslSyntaxError("'x' is only an alias for x1 when k=1",
                                         t.line, t.col)
                return Var(pos=(t.line, t.col), index=0)
            m = re.fullmatch(r"x([1-9])", name)
            if m:
                idx = int(m.group(1)) - 1
                if idx >= self.k:
                    raise DslSyntaxError(f"variable {name} exceeds declared k={self.k}",
                                         t.line, t.col)
                return Var(pos=(t.line, t.col), index=idx)
            if name in _FUNCS:
                self.expect("(")
                args = [self.expr()]
                if name == "sandwich":
                    self.expect(",")
                    args.append(self.expr())
                self.expect(")")
                if name == "conj":
                    return Unary(pos=(t.line, t.col), op="conj", child=args[0])
                return Call(pos=(t.line, t.col), fn=name, args=tuple(args))
            raise DslSyntaxError(f"unknown identifier {name!r}", t.line, t.col)
        if t.text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if t.text == "[":
            return self.matrix(t)
        raise DslSyntaxError(f"unexpected token {t.text or 'end of input'!r}",
                             t.line, t.col)

    def matrix(self, t0):
        rows = []
        while True:
            self.expect("[")
            row = [self.expr()]
            while self.peek().text == ",":
                self.next()
                row.append(self.expr())
            self.expect("]")
            rows.append(tuple(row))
            if self.peek().text == ",":
                self.next()
                continue
            break
        self.expect("]")
        width = len(rows[0])
        for r, row in enumerate(rows):
            if len(row) != width:
                raise DslTypeError(
                    f"ragged matrix literal: row {r + 1} has {len(row)} entries, "
                    f"expected {width}", t0.line, t0.col)
        return Mat(pos=(t0.line, t0.col), rows=tuple(rows))


def parse(text, k):
    """Parse to a typed AST; raises DslSyntaxError/DslTypeError with position."""
    if not isinstance(text, str) or not text.strip():
        raise DslSyntaxError("empty expression", 1, 1)
    ast = _Parser(_lex(text), k).parse()
    infer_shape(ast)
    return ast


# ---------------------------------------------------------------------------
# Shape inference
# ---------------------------------------------------------------------------

def infer_shape(node):
    """Shape of a node: () for scalars, (r, c) for matrices."""
    if isinstance(node, (Lit, Imag, Var)):
        return ()
    if isinstance(node, Unary):
        return infer_shape(node.child)
    if isinstance(node, Mat):
        for row in node.rows:
            for entry in row:
                if infer_shape(entry) != ():
                    raise DslTypeError("matrix entries must be scalar",
                                       *entry.pos if hasattr(entry, "pos") else (None, None))
        return (len(node.rows), len(node.rows[0]))
    if isinstance(node, Call):
        if node.fn in ("cos", "sin", "exp"):
            if infer_shape(node.args[0]) != ():
                raise DslTypeError(f"{node.fn} takes a scalar argument", *node.pos)
            return ()
        if node.fn == "transpose":
            sh = infer_shape(node.args[0])
            if sh == ():
                raise DslTypeError("transpose takes a matrix", *node.pos)
            return (sh[1], sh[0])
        if node.fn == "sandwich":
            q, a = (infer_shape(arg) for arg in node.args)
            if q == () or a == () or q[0] != q[1] or a != q:
                raise DslTypeError(
                    f"sandwich needs two square matrices of equal size, got {q} and {a}",
                    *node.pos)
            return a
        raise DslTypeError(f"unknown function {node.fn!r}", *node.pos)
    if isinstance(node, Bin):
        lsh, rsh = infer_shape(node.left), infer_shape(node.right)
        if node.op in ("+", "-"):
            if lsh != rsh:
                raise DslTypeError(f"shape mismatch for {node.op!r}: {lsh} vs {rsh}",
                                   *node.pos)
            return lsh
        if node.op == "*":
            if lsh == ():
                return rsh
            if rsh == ():
                return lsh
            if lsh[1] != rsh[0]:
                raise DslTypeError(f"inner dimensions differ: {lsh} * {rsh}", *node.pos)
            return (lsh[0], rsh[1])
        if node.op == "/":
            if rsh != ():
                raise DslTypeError("division by a matrix is not defined", *node.pos)
            return lsh
        if node.op == "^":
            if not isinstance(node.right, Lit) or node.right.value != int(node.right.value):
                raise DslTypeError("exponent must be an integer literal", *node.pos)
            if lsh != () and (lsh[0] != lsh[1] or node.right.value < 0):
                raise DslTypeError(
                    "matrix power requires a square base and a non-negative exponent",
                    *node.pos)
            return lsh
    raise DslTypeError(f"cannot type node {node!r}", *getattr(node, "pos", (None, None)))


# ---------------------------------------------------------------------------
# Printer
# ---------------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "unary-": 3, "^": 4, "atom": 5}


def _prec_of(node):
    if isinstance(node, Bin):
        return _PREC[node.op]
    if isinstance(node, Unary) and node.op == "-":
        return _PREC["unary-"]
    return _PREC["atom"]


def _fmt_number(v):
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def to_text(node):
    """Canonical text form; parse(to_text(ast)) reproduces the AST."""
    if isinstance(node, Lit):
        return _fmt_number(node.value)
    if isinstance(node, Imag):
        return "i"
    if isinstance(node, Var):
        return f"x{node.index + 1}"
    if isinstance(node, Unary):
        if node.op == "conj":
            return f"conj({to_text(node.child)})"
        body = to_text(node.child)
        if _prec_of(node.child) < _PREC["unary-"]:
            body = f"({body})"
        return f"-{body}"
    if isinstance(node, Call):
        return f"{node.fn}({', '.join(to_text(a) for a in node.args)})"
    if isinstance(node, Mat):
        rows = ",".join("[" + ",".join(to_text(e) for e in row) + "]"
                        for row in node.rows)
        return f"[{rows}]"
    if isinstance(node, Bin):
        if node.op == "^":
            base = to_text(node.left)
            if _prec_of(node.left) < _PREC["^"]:
                base = f"({base})"
            return f"{base}^{_fmt_number(node.right.value)}"
        p = _PREC[node.op]
        left = to_text(node.left)
        if _prec_of(node.left) < p:
            left = f"({left})"
        right = to_text(node.right)
        if _prec_of(node.right) <= p:   # left-assoc: parenthesize equal-prec right
            right = f"({right})"
        return f"{left}{node.op}{right}"
    raise TypeError(f"not an AST node: {node!r}")


# ---------------------------------------------------------------------------
# Vectorized interpreter
# ---------------------------------------------------------------------------

def eval_ast(node, xs):
    """Evaluate at points xs of shape (m, k): scalars -> (m,), matrices ->
    (m, r, c).  Division by zero yields inf/nan rather than raising."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        return _ev(node, xs)


def _ev(node, xs):
    m = xs.shape[0]
    if isinstance(node, Lit):
        return np.full(m, node.value, dtype=np.complex128)
    if isinstance(node, Imag):
        return np.full(m, 1j, dtype=np.complex128)
    if isinstance(node, Var):
        return xs[:, node.index].astype(np.complex128)
    if isinstance(node, Unary):
        v = _ev(node.child, xs)
        return -v if node.op == "-" else np.conj(v)
    if isinstance(node, Call):
        if node.fn == "cos":
            return np.cos(_ev(node.args[0], xs))
        if node.fn == "sin":
            return np.sin(_ev(node.args[0], xs))
        if node.fn == "exp":
            return np.exp(_ev(node.args[0], xs))
        if node.fn == "transpose":
            return np.swapaxes(_ev(node.args[0], xs), -1, -2)
        if node.fn == "sandwich":
            q = _ev(node.args[0], xs)
            a = _ev(node.args[1], xs)
            return q @ a @ np.swapaxes(q, -1, -2)
    if isinstance(node, Mat):
        r, c = len(node.rows), len(node.rows[0])
        out = np.empty((m, r, c), dtype=np.complex128)
        for a, row in enumerate(node.rows):
            for b, entry in enumerate(row):
                out[:, a, b] = _ev(entry, xs)
        return out
    if isinstance(node, Bin):
        if node.op == "^":
            base = _ev(node.left, xs)
            n = int(node.right.value)
            if base.ndim == 1:
                return base ** n
            out = np.broadcast_to(np.eye(base.shape[-1], dtype=np.complex128),
                                  base.shape).copy()
            for _ in range(n):
                out = out @ base
            return out
        left = _ev(node.left, xs)
        right = _ev(node.right, xs)
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "/":
            if left.ndim > 1:
                return left / right[:, None, None]
            return left / right
        if node.op == "*":
            if left.ndim == 1 and right.ndim > 1:
                return left[:, None, None] * right
            if left.ndim > 1 and right.ndim == 1:
                return left * right[:, None, None]
            if left.ndim > 1 and right.ndim > 1:
                return left @ right
            return left * right
    raise TypeError(f"not an AST node: {node!r}")


# ---------------------------------------------------------------------------
# Exact trig-table compilation
# ---------------------------------------------------------------------------

class _TrigPoly:
    """Scalar finite Fourier series sum_j c_j exp(i <j, x>)."""

    __slots__ = ("k", "terms")

    def __init__(self, k, terms=None):
        self.k = k
        self.terms = dict(terms or {})

    @classmethod
    def const(cls, k, c):
        c = complex(c)
        return cls(k, {(0,) * k: c} if c != 0 else {})

    def constant_value(self):
        """The constant c if this series is x-independent, else None."""
        nz = {j: c for j, c in self.terms.items() if c != 0}
        if not nz:
            return 0j
        if len(nz) == 1 and (0,) * self.k in nz:
            return nz[(0,) * self.k]
        return None

    def __add__(self, other):
        out = dict(self.terms)
        for j, c in other.terms.items():
            out[j] = out.get(j, 0j) + c
        return _TrigPoly(self.k, out)

    def __neg__(self):
        return _TrigPoly(self.k, {j: -c for j, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        out = {}
        for ja, ca in self.terms.items():
            for jb, cb in other.terms.items():
                j = tuple(x + y for x, y in zip(ja, jb))
                out[j] = out.get(j, 0j) + ca * cb
        return _TrigPoly(self.k, out)

    def scaled(self, c):
        c = complex(c)
        return _TrigPoly(self.k, {j: c * v for j, v in self.terms.items()})

    def conjugated(self):
        return _TrigPoly(self.k, {tuple(-c for c in j): v.conjugate()
                                  for j, v in self.terms.items()})

    def power(self, n):
        out = _TrigPoly.const(self.k, 1.0)
        for _ in range(n):
            out = out * self
        return out


def _linear_form(node, k):
    """Interpret as c0 + sum b_t x_t; returns (c0, b) or None."""
    if isinstance(node, Lit):
        return complex(node.value), np.zeros(k, dtype=np.complex128)
    if isinstance(node, Imag):
        return 1j, np.zeros(k, dtype=np.complex128)
    if isinstance(node, Var):
        b = np.zeros(k, dtype=np.complex128)
        b[node.index] = 1.0
        return 0j, b
    if isinstance(node, Unary):
        lf = _linear_form(node.child, k)
        if lf is None:
            return None
        c0, b = lf
        if node.op == "-":
            return -c0, -b
        return c0.conjugate(), np.conj(b)   # x is real
    if isinstance(node, Bin):
        if node.op in ("+", "-"):
            l, r = _linear_form(node.left, k), _linear_form(node.right, k)
            if l is None or r is None:
                return None
            if node.op == "+":
                return l[0] + r[0], l[1] + r[1]
            return l[0] - r[0], l[1] - r[1]
        if node.op == "*":
            l, r = _linear_form(node.left, k), _linear_form(node.right, k)
            if l is None or r is None:
                return None
            if np.all(l[1] == 0):
                return l[0] * r[0], l[0] * r[1]
            if np.all(r[1] == 0):
                return l[0] * r[0], r[0] * l[1]
            return None
        if node.op == "/":
            l, r = _linear_form(node.left, k), _linear_form(node.right, k)
            if l is None or r is None or not np.all(r[1] == 0) or r[0] == 0:
                return None
            return l[0] / r[0], l[1] / r[0]
        if node.op == "^":
            l = _linear_form(node.left, k)
            if l is None or not np.all(l[1] == 0):
                return None
            return l[0] ** int(node.right.value), np.zeros(k, dtype=np.complex128)
    return None


def _int_vector(b, imag_unit=False):
    """Integer vector from b (or from b/i when imag_unit); None if not exact."""
    vals = b / 1j if imag_unit else b
    if np.max(np.abs(vals.imag)) > 1e-12:
        return None
    r = vals.real
    m = np.round(r)
    if np.max(np.abs(r - m)) > 1e-12:
        return None
    return tuple(int(v) for v in m)


def _trig_scalar(node, k):
    """Compile a scalar node to a _TrigPoly, or None if not expressible."""
    if isinstance(node, Lit):
        return _TrigPoly.const(k, node.value)
    if isinstance(node, Imag):
        return _TrigPoly.const(k, 1j)
    if isinstance(node, Var):
        return None
    if isinstance(node, Unary):
        tp = _trig_scalar(node.child, k)
        if tp is None:
            return None
        return -tp if node.op == "-" else tp.conjugated()
    if isinstance(node, Call) and node.fn in ("cos", "sin", "exp"):
        lf = _linear_form(node.args[0], k)
        if lf is None:
            return None
        c0, b = lf
        if node.fn in ("cos", "sin"):
            m = _int_vector(b)
            if m is None:
                return None
            mneg = tuple(-c for c in m)
            ep = np.exp(1j * c0)
            en = np.exp(-1j * c0)
            if node.fn == "cos":
                terms = {m: 0.5 * ep}
                terms[mneg] = terms.get(mneg, 0j) + 0.5 * en
            else:
                terms = {m: ep / 2j}
                terms[mneg] = terms.get(mneg, 0j) - en / 2j
            return _TrigPoly(k, terms)
        m = _int_vector(b, imag_unit=True)
        if m is None:
            return None
        return _TrigPoly(k, {m: np.exp(c0)})
    if isinstance(node, Bin):
        if node.op == "^":
            n = int(node.right.value)
            base = _trig_scalar(node.left, k)
            if base is None:
                return None
            if n >= 0:
                return base.power(n)
            c = base.constant_value()
            if c is None or c == 0:
                return None
            return _TrigPoly.const(k, c ** n)
        left = _trig_scalar(node.left, k)
        right = _trig_scalar(node.right, k)
        if left is None or right is None:
            return None
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return left * right
        if node.op == "/":
            c = right.constant_value()
            if c is None or c == 0:
                return None
            return left.scaled(1.0 / c)
    return None


def _trig_matrix(node, k):
    """Compile a matrix node to a grid of _TrigPoly, or None."""
    if isinstance(node, Mat):
        out = []
        for row in node.rows:
            new = []
            for entry in row:
                tp = _trig_scalar(entry, k)
                if tp is None:
                    return None
                new.append(tp)
            out.append(new)
        return out
    if isinstance(node, Unary):
        inner = _trig_matrix(node.child, k)
        if inner is None:
            return None
        f = (lambda t: -t) if node.op == "-" else (lambda t: t.conjugated())
        return [[f(t) for t in row] for row in inner]
    if isinstance(node, Call):
        if node.fn == "transpose":
            inner = _trig_matrix(node.args[0], k)
            if inner is None:
                return None
            return [list(col) for col in zip(*inner)]
        if node.fn == "sandwich":
            q = _trig_matrix(node.args[0], k)
            a = _trig_matrix(node.args[1], k)
            if q is None or a is None:
                return None
            qt = [list(col) for col in zip(*q)]
            return _matmul_tp(_matmul_tp(q, a), qt)
        return None
    if isinstance(node, Bin):
        if node.op in ("+", "-"):
            left = _trig_matrix(node.left, k)
            right = _trig_matrix(node.right, k)
            if left is None or right is None:
                return None
            op = (lambda a, b: a + b) if node.op == "+" else (lambda a, b: a - b)
            return [[op(x, y) for x, y in zip(ra, rb)] for ra, rb in zip(left, right)]
        if node.op == "*":
            lsh, rsh = infer_shape(node.left), infer_shape(node.right)
            if lsh == ():
                scal = _trig_scalar(node.left, k)
                mat = _trig_matrix(node.right, k)
                if scal is None or mat is None:
                    return None
                return [[scal * t for t in row] for row in mat]
            if rsh == ():
                scal = _trig_scalar(node.right, k)
                mat = _trig_matrix(node.left, k)
                if scal is None or mat is None:
                    return None
                return [[t * scal for t in row] for row in mat]
            left = _trig_matrix(node.left, k)
            right = _trig_matrix(node.right, k)
            if left is None or right is None:
                return None
            return _matmul_tp(left, right)
        if node.op == "/":
            mat = _trig_matrix(node.left, k)
            scal = _trig_scalar(node.right, k)
            if mat is None or scal is None:
                return None
            c = scal.constant_value()
            if c is None or c == 0:
                return None
            return [[t.scaled(1.0 / c) for t in row] for row in mat]
        if node.op == "^":
            base = _trig_matrix(node.left, k)
            if base is None:
                return None
            n = int(node.right.value)
            size = len(base)
            out = [[_TrigPoly.const(k, 1.0 if a == b else 0.0) for b in range(size)]
                   for a in range(size)]
            for _ in range(n):
                out = _matmul_tp(out, base)
            return out
    return None


def _matmul_tp(a, b):
    rows, inner, cols = len(a), len(b), len(b[0])
    k = a[0][0].k
    out = []
    for r in range(rows):
        row = []
        for c in range(cols):
            acc = _TrigPoly.const(k, 0.0)
            for t in range(inner):
                acc = acc + a[r][t] * b[t][c]
            row.append(acc)
        out.append(row)
    return out


# ---------------------------------------------------------------------------
# Singular points and zero-denominator probing
# ---------------------------------------------------------------------------

def _poly_coeffs(node, k):
    """Interpret as a polynomial in a single variable; returns (index, coeffs
    ascending) or None.  Used only to locate real denominator roots."""
    if isinstance(node, Lit):
        return None, np.array([node.value], dtype=np.complex128)
    if isinstance(node, Imag):
        return None, np.array([1j], dtype=np.complex128)
    if isinstance(node, Var):
        return node.index, np.array([0.0, 1.0], dtype=np.complex128)
    if isinstance(node, Unary) and node.op == "-":
        r = _poly_coeffs(node.child, k)
        return None if r is None else (r[0], -r[1])
    if isinstance(node, Bin):
        if node.op == "^":
            r = _poly_coeffs(node.left, k)
            n = int(node.right.value)
            if r is None or n < 0:
                return None
            idx, coeffs = r
            out = np.array([1.0], dtype=np.complex128)
            for _ in range(n):
                out = np.convolve(out, coeffs)
            return idx, out
        l = _poly_coeffs(node.left, k)
        r = _poly_coeffs(node.right, k)
        if l is None or r is None:
            return None
        li, lc = l
        ri, rc = r
        if li is not None and ri is not None and li != ri:
            return None
        idx = li if li is not None else ri
        if node.op in ("+", "-"):
            size = max(lc.size, rc.size)
            a = np.zeros(size, dtype=np.complex128)
            b = np.zeros(size, dtype=np.complex128)
            a[:lc.size] = lc
            b[:rc.size] = rc
            return idx, (a + b if node.op == "+" else a - b)
        if node.op == "*":
            return idx, np.convolve(lc, rc)
        if node.op == "/":
            if rc.size == 1 and rc[0] != 0:
                return idx, lc / rc[0]
            return None
    return None


def _collect_denominators(node, out):
    if isinstance(node, Bin):
        if node.op == "/":
            out.append(node.right)
        for child in (node.left, node.right):
            _collect_denominators(child, out)
    elif isinstance(node, Unary):
        _collect_denominators(node.child, out)
    elif isinstance(node, Call):
        for a in node.args:
            _collect_denominators(a, out)
    elif isinstance(node, Mat):
        for row in node.rows:
            for e in row:
                _collect_denominators(e, out)


def _uses_variable(node):
    if isinstance(node, Var):
        return True
    if isinstance(node, Unary):
        return _uses_variable(node.child)
    if isinstance(node, Bin):
        return _uses_variable(node.left) or _uses_variable(node.right)
    if isinstance(node, Call):
        return any(_uses_variable(a) for a in node.args)
    if isinstance(node, Mat):
        return any(_uses_variable(e) for row in node.rows for e in row)
    return False


def _singular_points(ast, k):
    """Real roots of single-variable polynomial denominators inside (-pi,pi).

    Only k = 1 yields point singularities; a root in one variable for k > 1
    is a hyperplane and is not recorded.
    """
    if k != 1:
        return []
    dens = []
    _collect_denominators(ast, dens)
    points = set()
    for den in dens:
        if not _uses_variable(den):
            continue
        r = _poly_coeffs(den, k)
        if r is None:
            continue
        _, coeffs = r
        coeffs = np.trim_zeros(coeffs, "b")
        if coeffs.size < 2:
            continue
        roots = np.roots(coeffs[::-1])
        for root in roots:
            if abs(root.imag) < 1e-9 and abs(root.real) < np.pi:
                points.add(round(float(root.real), 12))
    return [(p,) for p in sorted(points)]


def _probe_denominators(ast, k):
    """Compile-time probe: a denominator that vanishes at every probe point
    is treated as identically zero."""
    dens = []
    _collect_denominators(ast, dens)
    if not dens:
        return
    rng = np.random.default_rng(12345)
    xs = rng.uniform(-3.0, 3.0, size=(8, k))
    for den in dens:
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = _ev(den, xs)
        if np.max(np.abs(vals)) < 1e-13:
            raise DslCompileError("division by an identically zero subexpression",
                                  *den.pos)


# ---------------------------------------------------------------------------
# Compilation entry point
# ---------------------------------------------------------------------------

def compile_ast(ast, k, s, name="", expression=None):
    """Compile a typed AST to a MatrixSymbol of block size s."""
    shape = infer_shape(ast)
    if shape == ():
        if s != 1:
            raise DslTypeError(f"scalar expression but s={s}", *ast.pos)
        ast = Mat(pos=ast.pos, rows=((ast,),))
        shape = (1, 1)
    if shape != (s, s):
        raise DslTypeError(f"expression has shape {shape}, expected {(s, s)}", *ast.pos)
    _probe_denominators(ast, k)

    def evaluator(xs):
        return eval_ast(ast, xs)

    grid = _trig_matrix(ast, k)
    if grid is not None:
        freqs = set()
        for row in grid:
            for tp in row:
                freqs.update(tp.terms.keys())
        coeffs = {}
        for j in freqs:
            coeffs[j] = np.array(
                [[grid[r][c].terms.get(j, 0j) for c in range(s)] for r in range(s)],
                dtype=np.complex128)
        return MatrixSymbol(k, s, kind="trig", name=name, coeffs=coeffs,
                            evaluator=evaluator, expression=expression)
    return MatrixSymbol(k, s, kind="general", name=name, evaluator=evaluator,
                        singular_points=_singular_points(ast, k),
                        expression=expression)


def compile_expression(text, k, s, name=""):
    """Parse and compile DSL text to a MatrixSymbol."""
    ast = parse(text, k)
    return compile_ast(ast, k, s, name=name, expression=text)
