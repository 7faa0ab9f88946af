"""Built-in catalog of symbol pairs (f, g) used by the experiment suite.

All pairs take the sandwiched form f = Q A Q^T, g = Q B Q^T with Q the
plane rotation by x (k=1) or by x1+x2 (k=2).  Cases 1 and 2 take a real
radius parameter r; the inner diagonals vary from case to case.  Symbols
are trig-polynomial kind wherever the formulas permit; entries containing
bare x, x^2, or 1/(x^2-1) force general kind.
"""

from .dsl import compile_expression
from .errors import InvalidArgumentError

_Q1 = "[[cos(x),sin(x)],[-sin(x),cos(x)]]"
_Q2 = "[[cos(x1+x2),sin(x1+x2)],[-sin(x1+x2),cos(x1+x2)]]"


def _fmt(v):
    v = float(v)
    return str(int(v)) if v == int(v) else repr(v)


def case_expressions(case_id, r=None):
    """DSL texts for (f, g) of the given case; k is 1 for cases 1-4, 2 for 5-6."""
    if case_id in (1, 2):
        if r is None:
            raise InvalidArgumentError(f"case {case_id} requires the parameter r")
        r = float(r)
        if not r > 0:
            raise InvalidArgumentError(f"r must be positive, got {r}")
        low = "1/(x^2-1)" if case_id == 2 else "1"
        a = f"[[2+i+cos(x),0],[{low},5+{_fmt(r)}*exp(i*x)]]"
        b = f"[[1,0],[0,5+{_fmt(r)}*exp(i*x)]]"
        return 1, f"sandwich({_Q1}, {a})", f"sandwich({_Q1}, {b})"
    if case_id == 3:
        a = "[[(1-exp(i*x))*(1+x^2/pi^2),0],[0,2+cos(x)]]"
        b = "[[1-exp(i*x),0],[0,1]]"
        return 1, f"sandwich({_Q1}, {a})", f"sandwich({_Q1}, {b})"
    if case_id == 4:
        a = "[[(1-exp(i*x))*(sin(x)^2+3),0],[x,1+cos(x)]]"
        b = "[[1-exp(i*x),0],[0,1+cos(x)]]"
        return 1, f"sandwich({_Q1}, {a})", f"sandwich({_Q1}, {b})"
    if case_id == 5:
        a = "[[3*i+cos(x1)+cos(x2),0],[0,10+2*(exp(i*x1)+exp(i*x2))]]"
        b = "[[1,0],[0,10+2*(exp(i*x1)+exp(i*x2))]]"
        return 2, f"sandwich({_Q2}, {a})", f"sandwich({_Q2}, {b})"
    if case_id == 6:
        a = "[[1-(exp(i*x1)+exp(i*x2))/2,0],[0,10+cos(x1)+cos(x2)]]"
        b = "[[1-(exp(i*x1)+exp(i*x2))/2,0],[0,1]]"
        return 2, f"sandwich({_Q2}, {a})", f"sandwich({_Q2}, {b})"
    raise InvalidArgumentError(f"unknown case id {case_id}; valid ids are 1..6")


def catalog(case_id, r=None):
    """Build the pair (f, g) of MatrixSymbols for a catalog case."""
    case_id = int(case_id)
    if case_id not in (1, 2) and r is not None:
        raise InvalidArgumentError(f"case {case_id} takes no parameter r")
    k, f_text, g_text = case_expressions(case_id, r=r)
    f = compile_expression(f_text, k, 2, name=f"f{case_id}")
    g = compile_expression(g_text, k, 2, name=f"g{case_id}")
    params = {"r": float(r)} if case_id in (1, 2) else {}
    f.params = dict(params)
    g.params = dict(params)
    return f, g
