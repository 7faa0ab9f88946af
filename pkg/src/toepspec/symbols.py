"""Matrix-valued symbols on (-pi, pi)^k: evaluation, Fourier coefficients,
and pointwise algebra.

A symbol is either ``trig`` kind (finite coefficient table, evaluated as the
exact exponential sum) or ``general`` kind (an arbitrary vectorized
evaluator; coefficients come from grid quadrature).
"""

import json
from dataclasses import dataclass

import numpy as np

from .config import DEFAULTS
from .errors import (DomainError, InvalidArgumentError, SingularSymbolError)
from .multiindex import MAX_LEVELS, as_multiindex

_COEFF_PRUNE = 1e-14


def default_coeff_grid(k):
    return {1: DEFAULTS.coeff_grid_1d,
            2: DEFAULTS.coeff_grid_2d,
            3: DEFAULTS.coeff_grid_3d}[k]


def uniform_grid(k, sizes, offset=True):
    """Uniform grid on (-pi, pi)^k, half-step-offset by default.

    Returns (axes, points) where axes[d] is the 1-D coordinate array for
    dimension d and points has shape (prod(sizes), k).  The half-step offset
    keeps nodes away from declared singular points such as x = +-1 (an even
    size also avoids x = 0 exactly); offset=False aligns the grid so that
    x = 0 and x = -pi are nodes, which support-function sampling prefers.
    """
    sizes = tuple(int(s) for s in (sizes if np.iterable(sizes) else (sizes,) * k))
    if len(sizes) != k:
        raise InvalidArgumentError(f"expected {k} grid sizes, got {len(sizes)}")
    if any(s < 1 for s in sizes):
        raise InvalidArgumentError(f"grid sizes must be >= 1, got {sizes}")
    shift = 0.5 if offset else 0.0
    axes = [-np.pi + 2.0 * np.pi * (np.arange(s) + shift) / s for s in sizes]
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=-1)
    return axes, points


def _prune_table(coeffs):
    """Drop coefficients that are numerically zero relative to the largest."""
    if not coeffs:
        return {}
    scale = max(np.max(np.abs(c)) for c in coeffs.values())
    floor = _COEFF_PRUNE * max(1.0, scale)
    return {j: np.array(c, dtype=np.complex128)
            for j, c in coeffs.items() if np.max(np.abs(c)) > floor}


def _table_degree(coeffs, k):
    deg = [0] * k
    for j in coeffs:
        for d in range(k):
            deg[d] = max(deg[d], abs(j[d]))
    return tuple(deg)


class MatrixSymbol:
    """A measurable map x in (-pi,pi)^k -> s x s complex matrices.

    Attributes:
        k, s: dimension count and block size.
        kind: "trig" (exact coefficient table) or "general".
        coeffs: dict multi-index -> (s,s) array, trig kind only.
        degree: componentwise max |j_i| over stored coefficients (trig only).
        singular_points: declared points where evaluation errors unless the
            caller enables singularity-skip.
        expression: source text when the symbol came from the DSL.
    """

    def __init__(self, k, s, *, kind, name="", evaluator=None, coeffs=None,
                 singular_points=(), expression=None, params=None):
        if not 1 <= k <= MAX_LEVELS:
            raise InvalidArgumentError(f"k must be 1..{MAX_LEVELS}, got {k}")
        if not 1 <= s <= 8:
            raise InvalidArgumentError(f"s must be 1..8, got {s}")
        if kind not in ("trig", "general"):
            raise InvalidArgumentError(f"kind must be trig|general, got {kind!r}")
        self.k = int(k)
        self.s = int(s)
        self.kind = kind
        self.name = name
        self.expression = expression
        self.params = dict(params or {})
        self.singular_points = tuple(as_multipoint(p, k) for p in singular_points)

        if kind == "trig":
            if coeffs is None:
                raise InvalidArgumentError("trig kind requires a coefficient table")
            table = {}
            for j, c in coeffs.items():
                j = as_multiindex(j, k)
                c = np.asarray(c, dtype=np.complex128)
                if c.shape != (s, s):
                    raise InvalidArgumentError(
                        f"coefficient at {j} has shape {c.shape}, expected {(s, s)}")
                table[j] = c
            self.coeffs = _prune_table(table)
            self.degree = _table_degree(self.coeffs, k)
            self._eval_many = evaluator if evaluator is not None else self._eval_table
            if evaluator is not None:
                self._check_trig_consistency()
        else:
            if evaluator is None:
                raise InvalidArgumentError("general kind requires an evaluator")
            self.coeffs = None
            self.degree = None
            self._eval_many = evaluator

    # -- evaluation ---------------------------------------------------------

    def _eval_table(self, xs):
        xs = np.asarray(xs, dtype=float)
        out = np.zeros((xs.shape[0], self.s, self.s), dtype=np.complex128)
        for j, c in self.coeffs.items():
            phase = np.exp(1j * (xs @ np.asarray(j, dtype=float)))
            out += phase[:, None, None] * c
        return out

    def _check_trig_consistency(self):
        rng = np.random.default_rng(0)
        xs = rng.uniform(-np.pi, np.pi, size=(10, self.k))
        got = np.asarray(self._eval_many(xs))
        want = self._eval_table(xs)
        scale = max(1.0, float(np.max(np.abs(want))))
        if np.max(np.abs(got - want)) > DEFAULTS.trig_table_rel * scale:
            raise InvalidArgumentError(
                "trig-kind evaluator disagrees with its coefficient table")

    def eval_many(self, xs, skip_singular=False):
        """Evaluate at points ``xs`` of shape (m, k) -> (m, s, s)."""
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        if xs.shape[1] != self.k:
            raise InvalidArgumentError(f"points must have {self.k} coordinates")
        if not skip_singular and self.singular_points:
            for p in self.singular_points:
                hit = np.all(np.abs(xs - np.asarray(p)) <= DEFAULTS.singular_point_radius,
                             axis=1)
                if np.any(hit):
                    raise DomainError(
                        f"evaluation at declared singular point {p} of {self.name or 'symbol'}"
                        " (enable singularity-skip to bypass)")
        return np.asarray(self._eval_many(xs), dtype=np.complex128)

    def evaluate(self, x, skip_singular=False):
        """Evaluate at a single point; errors at declared singular points."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (self.k,):
            raise InvalidArgumentError(f"point must have {self.k} coordinates")
        if np.any(np.abs(x) > np.pi + 1e-12):
            raise DomainError(f"point {tuple(x)} outside [-pi, pi]^{self.k}")
        m = self.eval_many(x[None, :], skip_singular=skip_singular)[0]
        if not np.all(np.isfinite(m)):
            raise DomainError(f"non-finite value at {tuple(x)}")
        return m

    def coefficient(self, j):
        """Stored coefficient (trig kind), zero matrix if absent."""
        if self.kind != "trig":
            raise InvalidArgumentError("coefficient table only exists for trig kind")
        return self.coeffs.get(as_multiindex(j, self.k),
                               np.zeros((self.s, self.s), dtype=np.complex128)).copy()

    def __repr__(self):
        return (f"MatrixSymbol(name={self.name!r}, k={self.k}, s={self.s}, "
                f"kind={self.kind!r}, degree={self.degree})")


def as_multipoint(p, k):
    if np.isscalar(p):
        p = (p,)
    t = tuple(float(c) for c in p)
    if len(t) != k:
        raise InvalidArgumentError(f"singular point must have {k} coordinates")
    return t


def constant_symbol(c, k=1, name="const"):
    """Symbol identically equal to the matrix ``c``."""
    c = np.atleast_2d(np.asarray(c, dtype=np.complex128))
    s = c.shape[0]
    return MatrixSymbol(k, s, kind="trig", name=name, coeffs={(0,) * k: c})


# ---------------------------------------------------------------------------
# Fourier coefficients
# ---------------------------------------------------------------------------

def _coefficient_tensor(sym, half_widths, grid=None):
    """All coefficients f_hat_j for |j_d| <= half_widths[d], via one FFT.

    Returns an array of shape (2*h_1+1, ..., 2*h_k+1, s, s) indexed by
    j + half_widths.  Trig-kind symbols are read off the table exactly.
    """
    k, s = sym.k, sym.s
    hw = tuple(int(h) for h in half_widths)
    shape = tuple(2 * h + 1 for h in hw)
    out = np.zeros(shape + (s, s), dtype=np.complex128)
    if sym.kind == "trig":
        for j, c in sym.coeffs.items():
            if all(abs(j[d]) <= hw[d] for d in range(k)):
                out[tuple(j[d] + hw[d] for d in range(k))] = c
        return out
    sizes = tuple(grid if np.iterable(grid) else (grid,) * k) if grid is not None \
        else tuple(default_coeff_grid(k) for _ in range(k))
    for d in range(k):
        if sizes[d] < 2 * hw[d] + 2:
            raise InvalidArgumentError(
                f"grid size {sizes[d]} below anti-aliasing floor {2 * hw[d] + 2}")
    axes, points = uniform_grid(k, sizes)
    vals = sym.eval_many(points, skip_singular=True).reshape(sizes + (s, s))
    spec = np.fft.fftn(vals, axes=tuple(range(k))) / np.prod(sizes)
    # grid offset a_d = -pi + h/2 contributes the phase exp(-i j_d a_d)
    for d in range(k):
        j_d = np.arange(-hw[d], hw[d] + 1)
        phase = np.exp(-1j * j_d * axes[d][0])
        idx = j_d % sizes[d]
        spec = np.take(spec, idx, axis=d)
        sl = [None] * (k + 2)
        sl[d] = slice(None)
        spec = spec * phase[tuple(sl)]
    return spec


def fourier_coefficient(sym, j, grid=None):
    """Fourier coefficient f_hat_j, exact for trig kind, quadrature otherwise.

    The quadrature is the k-dimensional trapezoid/DFT rule on the uniform
    half-offset grid; ``grid`` must satisfy grid_d >= 2|j_d| + 2.
    """
    j = as_multiindex(j, sym.k)
    sizes = tuple(grid if np.iterable(grid) else (grid,) * sym.k) if grid is not None \
        else tuple(default_coeff_grid(sym.k) for _ in range(sym.k))
    for d in range(sym.k):
        if sizes[d] < 2 * abs(j[d]) + 2:
            raise InvalidArgumentError(
                f"grid size {sizes[d]} below anti-aliasing floor {2 * abs(j[d]) + 2}")
    if sym.kind == "trig":
        return sym.coefficient(j)
    tensor = _coefficient_tensor(sym, tuple(abs(c) for c in j), grid=sizes)
    return tensor[tuple(abs(j[d]) + j[d] for d in range(sym.k))]


@dataclass
class FourierTable:
    """Center coefficients on the box -J..J plus the grid used and a crude
    aliasing estimate (largest coefficient norm on the boundary shell)."""
    half_widths: tuple
    coeffs: np.ndarray          # shape (2J+1, ..., s, s)
    grid: tuple
    aliasing_estimate: float

    def coefficient(self, j):
        j = as_multiindex(j, len(self.half_widths))
        return self.coeffs[tuple(j[d] + self.half_widths[d] for d in range(len(j)))]


def fourier_table(sym, half_widths, grid=None):
    """Batch of coefficients for j in the box; checks Hermitian symmetry."""
    hw = as_multiindex(half_widths, sym.k)
    tensor = _coefficient_tensor(sym, hw, grid=grid)
    k = sym.k
    # boundary shell: any |j_d| == hw_d
    alias = 0.0
    for j in np.ndindex(*tensor.shape[:k]):
        if any(abs(j[d] - hw[d]) == hw[d] and hw[d] > 0 for d in range(k)):
            alias = max(alias, float(np.linalg.norm(tensor[j])))
    sizes = tuple(grid if np.iterable(grid) else (grid,) * k) if grid is not None \
        else tuple(default_coeff_grid(k) for _ in range(k))
    return FourierTable(half_widths=hw, coeffs=tensor, grid=sizes,
                        aliasing_estimate=alias)


def is_hermitian_valued(sym, probe=64):
    """Check f(x)^* == f(x) on a probe grid."""
    _, pts = uniform_grid(sym.k, (probe,) * sym.k if sym.k == 1 else (16,) * sym.k)
    vals = sym.eval_many(pts, skip_singular=True)
    dev = np.max(np.abs(vals - np.conj(np.swapaxes(vals, -1, -2))))
    scale = max(1.0, float(np.max(np.abs(vals))))
    return dev <= DEFAULTS.hermitian_rel * scale


# ---------------------------------------------------------------------------
# Symbol algebra
# ---------------------------------------------------------------------------

def _check_compatible(a, b):
    if a.k != b.k or a.s != b.s:
        raise InvalidArgumentError(
            f"incompatible symbols: (k,s)=({a.k},{a.s}) vs ({b.k},{b.s})")


def symbol_add(a, b, name=None):
    """Pointwise sum; trig + trig stays trig with merged tables."""
    _check_compatible(a, b)
    name = name or f"({a.name}+{b.name})"
    sing = a.singular_points + b.singular_points
    if a.kind == "trig" and b.kind == "trig":
        table = {j: c.copy() for j, c in a.coeffs.items()}
        for j, c in b.coeffs.items():
            table[j] = table.get(j, 0) + c
        return MatrixSymbol(a.k, a.s, kind="trig", name=name, coeffs=table)
    return MatrixSymbol(
        a.k, a.s, kind="general", name=name, singular_points=sing,
        evaluator=lambda xs: a.eval_many(xs, skip_singular=True)
        + b.eval_many(xs, skip_singular=True))


def symbol_scale(a, c, name=None):
    """Pointwise scalar multiple c * a."""
    c = complex(c)
    name = name or f"({c}*{a.name})"
    if a.kind == "trig":
        return MatrixSymbol(a.k, a.s, kind="trig", name=name,
                            coeffs={j: c * v for j, v in a.coeffs.items()})
    return MatrixSymbol(a.k, a.s, kind="general", name=name,
                        singular_points=a.singular_points,
                        evaluator=lambda xs: c * a.eval_many(xs, skip_singular=True))


def symbol_mul(a, b, name=None):
    """Pointwise matrix product a(x) b(x); trig degrees add componentwise."""
    _check_compatible(a, b)
    name = name or f"({a.name}*{b.name})"
    sing = a.singular_points + b.singular_points
    if a.kind == "trig" and b.kind == "trig":
        table = {}
        for ja, ca in a.coeffs.items():
            for jb, cb in b.coeffs.items():
                j = tuple(x + y for x, y in zip(ja, jb))
                table[j] = table.get(j, 0) + ca @ cb
        return MatrixSymbol(a.k, a.s, kind="trig", name=name, coeffs=table)
    return MatrixSymbol(
        a.k, a.s, kind="general", name=name, singular_points=sing,
        evaluator=lambda xs: a.eval_many(xs, skip_singular=True)
        @ b.eval_many(xs, skip_singular=True))


def symbol_inverse(a, name=None):
    """Pointwise inverse; raises SingularSymbolError at singular samples."""
    name = name or f"inv({a.name})"
    s = a.s

    def inv_eval(xs):
        vals = a.eval_many(xs, skip_singular=True)
        try:
            inv = np.linalg.inv(vals)
        except np.linalg.LinAlgError as exc:
            raise SingularSymbolError(f"{name}: singular sample in batch") from exc
        resid = np.abs(vals @ inv - np.eye(s)[None]).max(axis=(1, 2))
        bad = np.nonzero(~np.isfinite(resid) | (resid > DEFAULTS.pointwise_inverse_rel))[0]
        if bad.size:
            x_bad = np.atleast_2d(xs)[bad[0]]
            raise SingularSymbolError(
                f"{name}: numerically singular at x={tuple(x_bad)}", x=tuple(x_bad))
        return inv

    return MatrixSymbol(a.k, a.s, kind="general", name=name,
                        singular_points=a.singular_points, evaluator=inv_eval)


def similarity(q, a, name=None):
    """Sandwich Q(x) A(x) Q(x)^T with pointwise-unitary (orthogonal) Q."""
    _check_compatible(q, a)
    name = name or f"sandwich({q.name},{a.name})"
    if q.kind == "trig" and a.kind == "trig":
        qt = MatrixSymbol(q.k, q.s, kind="trig", name=f"{q.name}^T",
                          coeffs={j: c.T.copy() for j, c in q.coeffs.items()})
        return symbol_mul(symbol_mul(q, a), qt, name=name)
    return MatrixSymbol(
        a.k, a.s, kind="general", name=name,
        singular_points=q.singular_points + a.singular_points,
        evaluator=lambda xs: q.eval_many(xs, skip_singular=True)
        @ a.eval_many(xs, skip_singular=True)
        @ np.swapaxes(q.eval_many(xs, skip_singular=True), -1, -2))


# ---------------------------------------------------------------------------
# JSON serialization
# ---------------------------------------------------------------------------

def symbol_to_json(sym):
    """Serialize to the documented JSON schema (table or expression)."""
    doc = {"k": sym.k, "s": sym.s, "kind": sym.kind, "name": sym.name,
           "params": sym.params}
    if sym.singular_points:
        doc["singular_points"] = [list(p) for p in sym.singular_points]
    if sym.kind == "trig":
        doc["coefficients"] = {
            ",".join(str(c) for c in j): [v for entry in m.ravel()
                                          for v in (entry.real, entry.imag)]
            for j, m in sym.coeffs.items()}
        if sym.expression:
            doc["expression"] = sym.expression
    else:
        if not sym.expression:
            raise InvalidArgumentError(
                "general-kind symbol without an expression cannot be serialized")
        doc["expression"] = sym.expression
    return doc


def symbol_from_json(doc):
    """Inverse of :func:`symbol_to_json`; expressions go through the DSL."""
    k, s = int(doc["k"]), int(doc["s"])
    name = doc.get("name", "")
    params = doc.get("params", {})
    sing = [tuple(p) for p in doc.get("singular_points", [])]
    if "expression" in doc and doc.get("kind") != "trig":
        from .dsl import compile_expression
        sym = compile_expression(doc["expression"], k, s, name=name)
        if sing:
            sym.singular_points = tuple(as_multipoint(p, k) for p in sing)
        sym.params = dict(params)
        return sym
    if "coefficients" in doc:
        table = {}
        for key, flat in doc["coefficients"].items():
            j = tuple(int(c) for c in key.split(","))
            arr = np.array(flat, dtype=float).reshape(s, s, 2)
            table[j] = arr[..., 0] + 1j * arr[..., 1]
        sym = MatrixSymbol(k, s, kind="trig", name=name, coeffs=table,
                           singular_points=sing,
                           expression=doc.get("expression"))
        sym.params = dict(params)
        return sym
    if "expression" in doc:
        from .dsl import compile_expression
        sym = compile_expression(doc["expression"], k, s, name=name)
        sym.params = dict(params)
        return sym
    raise InvalidArgumentError("symbol JSON needs coefficients or expression")


def load_symbol(path):
    with open(path, "r", encoding="utf-8") as fh:
        return symbol_from_json(json.load(fh))


def save_symbol(sym, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(symbol_to_json(sym), fh, indent=2)
