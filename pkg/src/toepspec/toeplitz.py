"""Block Toeplitz operators generated by matrix symbols.

Dense assembly places the coefficient f_hat_{i-j} at block position (i, j)
for multi-indices i, j = (1,..,1)..n in lexicographic order.  The matrix-free
path embeds the coefficient tensor in a multilevel circulant of doubled
sizes and multiplies through the FFT.
"""

import struct

import numpy as np

from . import linalg
from .config import DEFAULTS, dense_order_cap
from .errors import (InvalidArgumentError, NumericFailureError,
                     ResourceLimitError, SingularMatrixError)
from .multiindex import as_multiindex, prod
from .symbols import _coefficient_tensor, symbol_mul

__all__ = ["ToeplitzOperator", "build_dense", "PrecondFactor",
           "factor_preconditioner", "commutator_gap", "write_matrix_csv",
           "write_matrix_dump", "read_matrix_dump"]

_DUMP_MAGIC = b"TPZ1"


def _coeff_grid_for(sym, n):
    """Quadrature grid for assembling T_n: at least 4*max(n_i) per dimension
    so every needed coefficient (|j_i| < n_i) sits below the aliasing floor."""
    if sym.kind == "trig":
        return None
    base = 4 * max(n)
    return tuple(max(base, 64) for _ in range(sym.k))


class ToeplitzOperator:
    """T_n(f) with dense and/or FFT-embedded storage.

    Attributes:
        symbol, n: generating symbol and the size multi-index.
        order: s * prod(n).
        coeff_tensor: f_hat_j for -(n-1) <= j <= n-1, shape
            (2n_1-1, ..., 2n_k-1, s, s).
    """

    def __init__(self, symbol, n, coeff_grid=None, assemble=True):
        n = as_multiindex(n, symbol.k)
        if any(c < 1 for c in n):
            raise InvalidArgumentError(f"sizes must be >= 1, got {n}")
        self.symbol = symbol
        self.n = n
        self.s = symbol.s
        self.k = symbol.k
        self.nhat = prod(n)
        self.order = symbol.s * self.nhat
        cap = dense_order_cap()
        if self.order > cap:
            raise ResourceLimitError(
                f"order {self.order} exceeds cap {cap}; set TOEPSPEC_MAX_ORDER to raise it")
        if coeff_grid is None:
            coeff_grid = _coeff_grid_for(symbol, n)
        self.coeff_tensor = _coefficient_tensor(
            symbol, tuple(c - 1 for c in n), grid=coeff_grid)
        self._dense = None
        self._embed_fft = None
        if assemble:
            self.to_dense()

    # -- dense --------------------------------------------------------------

    def to_dense(self):
        if self._dense is None:
            self._dense = self._assemble()
        return self._dense

    def _assemble(self):
        n, s, k = self.n, self.s, self.k
        sizes_c = tuple(2 * c - 1 for c in n)
        flat = self.coeff_tensor.reshape(prod(sizes_c), s, s)
        # linearized offset index for every block pair (i, j)
        idx = np.zeros((self.nhat, self.nhat), dtype=np.int64)
        ii = np.arange(self.nhat)
        grids_i = np.unravel_index(ii, n)
        grids_j = np.unravel_index(ii, n)
        for d in range(k):
            diff = grids_i[d][:, None] - grids_j[d][None, :] + (n[d] - 1)
            idx = idx * sizes_c[d] + diff
        blocks = flat[idx]                       # (nhat, nhat, s, s)
        dense = blocks.transpose(0, 2, 1, 3).reshape(self.order, self.order)
        return np.ascontiguousarray(dense)

    # -- matrix-free --------------------------------------------------------

    def _embedding(self):
        if self._embed_fft is None:
            n, s, k = self.n, self.s, self.k
            sizes_m = tuple(2 * c for c in n)
            circ = np.zeros(sizes_m + (s, s), dtype=np.complex128)
            sl = tuple(slice(0, 2 * c - 1) for c in n)
            circ[sl] = self.coeff_tensor
            circ = np.roll(circ, shift=tuple(-(c - 1) for c in n),
                           axis=tuple(range(k)))
            self._embed_fft = np.fft.fftn(circ, axes=tuple(range(k)))
        return self._embed_fft

    def matvec(self, v, embedded=True):
        """T_n(f) @ v; embedded mode costs O(s^2 nhat log nhat)."""
        v = np.asarray(v, dtype=np.complex128)
        if v.shape != (self.order,):
            raise InvalidArgumentError(
                f"vector length {v.shape} does not match order {self.order}")
        if not embedded:
            return self.to_dense() @ v
        n, s, k = self.n, self.s, self.k
        sizes_m = tuple(2 * c for c in n)
        spec = self._embedding()
        vv = v.reshape(n + (s,))
        pad = np.zeros(sizes_m + (s,), dtype=np.complex128)
        pad[tuple(slice(0, c) for c in n)] = vv
        vhat = np.fft.fftn(pad, axes=tuple(range(k)))
        yhat = np.einsum("...ab,...b->...a", spec, vhat)
        y = np.fft.ifftn(yhat, axes=tuple(range(k)))
        return y[tuple(slice(0, c) for c in n)].reshape(self.order)

    # -- exports --------------------------------------------------------------

    def write_csv(self, path):
        write_matrix_csv(self.to_dense(), path)

    def write_dump(self, path):
        write_matrix_dump(self.to_dense(), path, k=self.k, s=self.s, n=self.n)


def build_dense(symbol, n, coeff_grid=None):
    """Assemble T_n(f) densely; block (i, j) equals f_hat_{i-j}."""
    return ToeplitzOperator(symbol, n, coeff_grid=coeff_grid, assemble=True)


# ---------------------------------------------------------------------------
# Preconditioner factorization
# ---------------------------------------------------------------------------

class PrecondFactor:
    """Factorization of T_n(g) for preconditioner solves.

    Banded LU when k = 1 and g is trig kind (scalar bandwidth s(r+1)-1);
    dense LU with partial pivoting otherwise.  ``d_value`` may carry the
    distance of Coh[ENR(g)] from the origin when the caller knows it.
    """

    def __init__(self, handle, order, mode, d_value=None):
        self._handle = handle
        self.order = order
        self.mode = mode
        self.d_value = d_value

    def solve(self, b):
        return self._handle.solve(b)


def factor_preconditioner(g, n, d_value=None):
    """Factor T_n(g); raises SingularMatrixError when T_n(g) is numerically
    singular (which signals that g is likely not sectorial)."""
    op = build_dense(g, n)
    dense = op.to_dense()
    banded = g.k == 1 and g.kind == "trig"
    try:
        if banded:
            bw = g.s * (g.degree[0] + 1) - 1
            bw = min(bw, op.order - 1)
            handle = linalg.banded_lu_factor(dense, bw, bw)
            mode = "banded"
        else:
            handle = linalg.lu_factor(dense)
            mode = "dense"
    except SingularMatrixError as exc:
        raise SingularMatrixError(
            f"T_n({g.name or 'g'}) is numerically singular; "
            "g is likely not sectorial") from exc
    factor = PrecondFactor(handle, op.order, mode, d_value=d_value)
    # probe solve: residual contract of the factorization
    rng = np.random.default_rng(0)
    b = rng.standard_normal(op.order) + 1j * rng.standard_normal(op.order)
    x = factor.solve(b)
    resid = np.linalg.norm(dense @ x - b) / np.linalg.norm(b)
    if not np.isfinite(resid) or resid > max(
            DEFAULTS.precond_residual_rel * np.linalg.norm(dense, "fro"), 1e-8):
        raise SingularMatrixError(
            f"T_n({g.name or 'g'}) solve residual {resid:.2e} too large; "
            "g is likely not sectorial")
    return factor


# ---------------------------------------------------------------------------
# Commutator gap T_n(g) T_n(f) - T_n(gf)
# ---------------------------------------------------------------------------

def commutator_gap(f, g, n, coeff_grid=None):
    """Rank and trace norm of T_n(g)T_n(f) - T_n(gf) for trig-kind g.

    Requires n >= 2r + 1 componentwise (r the degree of g); the rank is
    checked against s * [nhat - prod(n_i - 2 r_i)].
    """
    if g.kind != "trig":
        raise InvalidArgumentError("commutator gap requires a trig-polynomial g")
    n = as_multiindex(n, g.k)
    r = g.degree
    if any(n[d] < 2 * r[d] + 1 for d in range(g.k)):
        raise InvalidArgumentError(f"need n >= 2r+1 componentwise; n={n}, r={r}")
    tg = build_dense(g, n, coeff_grid=coeff_grid).to_dense()
    tf = build_dense(f, n, coeff_grid=coeff_grid).to_dense()
    tgf = build_dense(symbol_mul(g, f), n, coeff_grid=coeff_grid).to_dense()
    gap = tg @ tf - tgf
    rank = linalg.numerical_rank(gap)
    bound = g.s * (prod(n) - prod(n[d] - 2 * r[d] for d in range(g.k)))
    if rank > bound:
        raise NumericFailureError(
            f"commutator rank {rank} exceeds the structural bound {bound}")
    return {"rank": rank,
            "trace_norm": linalg.schatten_norm(gap, 1),
            "rank_bound": bound}


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def write_matrix_csv(mat, path):
    """CSV with re,im interleaved: 2*cols numbers per row."""
    mat = np.asarray(mat, dtype=np.complex128)
    inter = np.empty((mat.shape[0], 2 * mat.shape[1]))
    inter[:, 0::2] = mat.real
    inter[:, 1::2] = mat.imag
    np.savetxt(path, inter, delimiter=",", fmt="%.17g")


def write_matrix_dump(mat, path, k, s, n):
    """Compact binary dump.

    Header: magic b"TPZ1", uint32 k, uint32 s, k * uint32 n_i (all
    little-endian), followed by rows*cols complex entries as row-major
    little-endian float64 (re, im) pairs.
    """
    mat = np.asarray(mat, dtype=np.complex128)
    with open(path, "wb") as fh:
        fh.write(_DUMP_MAGIC)
        fh.write(struct.pack("<II", k, s))
        fh.write(struct.pack(f"<{k}I", *n))
        pairs = np.empty((mat.size, 2))
        pairs[:, 0] = mat.real.ravel()
        pairs[:, 1] = mat.imag.ravel()
        fh.write(pairs.astype("<f8").tobytes())


def read_matrix_dump(path):
    """Inverse of :func:`write_matrix_dump`; returns (matrix, k, s, n)."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _DUMP_MAGIC:
            raise InvalidArgumentError(f"bad magic {magic!r} in matrix dump")
        k, s = struct.unpack("<II", fh.read(8))
        n = struct.unpack(f"<{k}I", fh.read(4 * k))
        order = s * prod(n)
        data = np.frombuffer(fh.read(), dtype="<f8").reshape(order, order, 2)
        return data[..., 0] + 1j * data[..., 1], k, s, tuple(n)
