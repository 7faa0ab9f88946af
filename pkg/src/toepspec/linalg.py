"""Dense complex linear-algebra and FFT kernels used by every other module.

Kernels are backed by LAPACK/pocketfft through numpy and scipy: the
eigensolver is the Hessenberg + shifted-QR path (zgeev), the FFT handles
arbitrary grid sizes (mixed radix with Bluestein fallback), banded LU is
zgbtrf/zgbtrs with partial pivoting.  This module owns the contracts:
validation, error mapping, and the result types.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .config import DEFAULTS, dense_order_cap
from .errors import (InvalidArgumentError, NumericFailureError,
                     SingularMatrixError)


def as_complex_matrix(a):
    """Validate and coerce to a 2-D complex128 array with finite entries."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise InvalidArgumentError(f"expected a matrix, got ndim={m.ndim}")
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise InvalidArgumentError(f"matrix must be at least 1x1, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidArgumentError("matrix has non-finite entries")
    return m


@dataclass
class EigenResult:
    """Eigenvalues, optional right eigenvectors, per-pair residual estimates."""
    values: np.ndarray
    vectors: np.ndarray | None = None
    residuals: np.ndarray | None = None


@dataclass
class SingularResult:
    """Singular values sorted non-increasing."""
    values: np.ndarray = field(default_factory=lambda: np.zeros(0))


# ---------------------------------------------------------------------------
# FFT
# ---------------------------------------------------------------------------

def fft_multi(data, sizes, direction="forward"):
    """Multi-dimensional DFT on a k-dimensional grid of the given sizes.

    Convention (unitary up to scaling): forward is the plain DFT
    ``X_j = sum_t x_t exp(-2*pi*i <j, t/N>)`` and inverse carries the
    ``1/prod(sizes)`` factor, so ``inverse(forward(v)) == v``.
    Arbitrary sizes are supported, not only powers of two.
    """
    sizes = tuple(int(s) for s in (sizes if np.iterable(sizes) else (sizes,)))
    if any(s < 1 for s in sizes):
        raise InvalidArgumentError(f"grid sizes must be >= 1, got {sizes}")
    arr = np.asarray(data, dtype=np.complex128).reshape(sizes)
    if direction == "forward":
        out = np.fft.fftn(arr)
    elif direction == "inverse":
        out = np.fft.ifftn(arr)
    else:
        raise InvalidArgumentError(f"direction must be forward|inverse, got {direction!r}")
    return out


# ---------------------------------------------------------------------------
# Eigen / singular values
# ---------------------------------------------------------------------------

def eig_dense(a, want_vectors=False, max_order=None):
    """Eigenvalues (and optional right eigenvectors) of a dense square matrix.

    Residual estimates ``||A v - lambda v||`` are attached per pair when
    vectors are requested; the contract is residual <= 1e-10 * ||A||.
    """
    a = as_complex_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise InvalidArgumentError(f"matrix must be square, got {a.shape}")
    cap = max_order if max_order is not None else dense_order_cap()
    if a.shape[0] > cap:
        raise InvalidArgumentError(f"order {a.shape[0]} exceeds configured max {cap}")
    try:
        if want_vectors:
            values, vectors = np.linalg.eig(a)
        else:
            values = np.linalg.eigvals(a)
            vectors = None
    except np.linalg.LinAlgError as exc:
        raise NumericFailureError(f"QR eigensolver did not converge: {exc}") from exc
    residuals = None
    if vectors is not None:
        residuals = np.linalg.norm(a @ vectors - vectors * values[None, :], axis=0)
    return EigenResult(values=values, vectors=vectors, residuals=residuals)


def svd_values(a, max_order=None):
    """Singular values of a (possibly rectangular) dense matrix."""
    a = as_complex_matrix(a)
    cap = max_order if max_order is not None else dense_order_cap()
    if max(a.shape) > cap:
        raise InvalidArgumentError(f"order {max(a.shape)} exceeds configured max {cap}")
    try:
        vals = np.linalg.svd(a, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericFailureError(f"SVD did not converge: {exc}") from exc
    return SingularResult(values=vals)


def schatten_norm(a, p):
    """Schatten p-norm for p in {1, 2, inf}: trace norm, Frobenius, spectral."""
    a = as_complex_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise InvalidArgumentError("Schatten norms are defined here for square matrices")
    if p == 2:
        return float(np.linalg.norm(a, "fro"))
    sigma = svd_values(a).values
    if p == 1:
        return float(np.sum(sigma))
    if p in (np.inf, "inf"):
        return float(sigma[0]) if sigma.size else 0.0
    raise InvalidArgumentError(f"p must be 1, 2 or inf, got {p!r}")


def numerical_rank(a, threshold_rel=None):
    """Count of singular values above ``threshold_rel * sigma_max``."""
    if threshold_rel is None:
        threshold_rel = DEFAULTS.rank_rel_threshold
    if not 0.0 < threshold_rel < 1.0:
        raise InvalidArgumentError(f"threshold_rel must be in (0,1), got {threshold_rel}")
    sigma = svd_values(a).values
    if sigma.size == 0 or sigma[0] == 0.0:
        return 0
    return int(np.count_nonzero(sigma > threshold_rel * sigma[0]))


# ---------------------------------------------------------------------------
# Direct solvers
# ---------------------------------------------------------------------------

class LUFactor:
    """Dense LU factorization handle (partial pivoting)."""

    def __init__(self, a):
        a = as_complex_matrix(a)
        if a.shape[0] != a.shape[1]:
            raise InvalidArgumentError("LU requires a square matrix")
        lu, piv = sla.lu_factor(a, check_finite=False)
        if np.any(np.diag(lu) == 0.0):
            raise SingularMatrixError("exactly singular pivot in LU factorization")
        self._lu = (lu, piv)
        self.order = a.shape[0]

    def solve(self, b):
        b = np.asarray(b, dtype=np.complex128)
        if b.shape[0] != self.order:
            raise InvalidArgumentError(
                f"rhs length {b.shape[0]} does not match order {self.order}")
        return sla.lu_solve(self._lu, b, check_finite=False)


class BandedLUFactor:
    """Banded LU handle (zgbtrf/zgbtrs, partial pivoting).

    The declared bandwidths must bound every nonzero of the input; pivoting
    fill is accommodated by the standard extra ``lower_bw`` superdiagonals.
    """

    def __init__(self, a, lower_bw, upper_bw):
        a = as_complex_matrix(a)
        n = a.shape[0]
        if a.shape[0] != a.shape[1]:
            raise InvalidArgumentError("banded LU requires a square matrix")
        kl, ku = int(lower_bw), int(upper_bw)
        if kl < 0 or ku < 0 or kl >= n or ku >= n:
            raise InvalidArgumentError(f"bandwidths ({kl},{ku}) invalid for order {n}")
        rows, cols = np.nonzero(a)
        if rows.size and (np.any(rows - cols > kl) or np.any(cols - rows > ku)):
            raise InvalidArgumentError("nonzeros outside the declared bandwidths")
        # LAPACK band storage: ab[kl+ku+i-j, j] = a[i, j], plus kl rows of fill
        ab = np.zeros((2 * kl + ku + 1, n), dtype=np.complex128, order="F")
        for d in range(-kl, ku + 1):
            diag = np.diagonal(a, offset=d)
            j0 = max(d, 0)
            ab[kl + ku - d, j0:j0 + diag.size] = diag
        lub, ipiv, info = lapack.zgbtrf(ab, kl, ku)
        if info > 0:
            raise SingularMatrixError(f"zero pivot at position {info} in banded LU")
        if info < 0:
            raise InvalidArgumentError(f"zgbtrf: illegal argument {-info}")
        self._lub = lub
        self._ipiv = ipiv
        self._kl, self._ku = kl, ku
        self.order = n

    def solve(self, b):
        b = np.asarray(b, dtype=np.complex128)
        if b.shape[0] != self.order:
            raise InvalidArgumentError(
                f"rhs length {b.shape[0]} does not match order {self.order}")
        squeeze = b.ndim == 1
        rhs = b.reshape(self.order, -1)
        x, info = lapack.zgbtrs(self._lub, self._kl, self._ku, rhs, self._ipiv)
        if info != 0:
            raise NumericFailureError(f"zgbtrs failed with info={info}")
        return x[:, 0] if squeeze else x


def lu_factor(a):
    """Factor a dense square matrix; returns a handle with ``.solve``."""
    return LUFactor(a)


def lu_solve(handle, b):
    return handle.solve(b)


def banded_lu_factor(a, lower_bw, upper_bw):
    """Factor a banded square matrix; returns a handle with ``.solve``."""
    return BandedLUFactor(a, lower_bw, upper_bw)
