"""Spectral analysis of matrix symbols and of the matrices they generate:
essential range / essential numerical range estimation, sectoriality
classification, localization regions, compact-set area masks,
clustering/outlier counts, and the moment-based distribution test.

The essential numerical range is estimated by angular support-function
sampling: m(theta) = min over grid x of the smallest eigenvalue of the
Hermitian part of e^{-i theta} f(x).  Any finite procedure is an estimator
of the measure-theoretic object; grid and angle counts are recorded in
every report.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from . import linalg
from .config import DEFAULTS
from .errors import (InvalidArgumentError, PreconditionViolatedError,
                     ResourceLimitError)
from .multiindex import as_multiindex, prod
from .symbols import uniform_grid
from .toeplitz import build_dense, factor_preconditioner

__all__ = ["RangeCloud", "SupportFunction", "SectorReport", "RegionMask",
           "MomentReport", "essential_range", "essential_numerical_range",
           "sectoriality", "localization_region", "area_of_compact",
           "outlier_count", "moment_test", "distribution_functional",
           "cloud_to_csv", "mask_to_pgm"]


def default_range_grid(k):
    return {1: DEFAULTS.range_grid_1d, 2: DEFAULTS.range_grid_2d, 3: 24}[k]


# ---------------------------------------------------------------------------
# Result types
# ---------------------------------------------------------------------------

@dataclass
class RangeCloud:
    """Sampled point cloud for ER or ENR.

    ``provenance`` holds one record per point: the sample x and either the
    eigenvalue slot (ER) or the boundary angle (ENR).
    """
    points: np.ndarray
    source: str                      # "ER" | "ENR"
    grid: tuple
    provenance: list = field(default_factory=list, repr=False)
    skipped: int = 0


@dataclass
class SupportFunction:
    """Directional minima m(theta) of the sampled numerical ranges."""
    thetas: np.ndarray
    values: np.ndarray
    argmin_x: np.ndarray

    def hull_distance_from_origin(self):
        return float(max(0.0, np.max(self.values)))

    def contains(self, z, tol=None):
        """Point z inside the convex hull of the sampled ENR (within tol)."""
        tol = DEFAULTS.hull_membership if tol is None else tol
        proj = np.real(np.exp(-1j * self.thetas) * z)
        return bool(np.all(proj >= self.values - tol))


@dataclass
class SectorReport:
    """Sectoriality classification of a symbol.

    classification is one of "sectorial" (separating line strictly away
    from the origin), "weakly-sectorial" (origin on the hull boundary
    within tolerance), "not-weakly-sectorial" (origin interior).  For a
    weakly-sectorial symbol, ``nondegenerate`` is the variance witness
    that the touching support values are not a.e. constant; a True value
    certifies invertibility of every generated matrix even though d = 0.
    The variance witness is a proxy for the measure-theoretic condition.
    """
    classification: str
    d: float
    theta_star: float
    witness_variance: float
    nondegenerate: bool
    d_raw: float
    grid: tuple
    angle_count: int


@dataclass
class RegionMask:
    """Boolean pixel mask over a complex-plane rectangle.

    ``mask[iy, ix]`` covers the pixel with center
    (re0 + (ix+0.5)dx) + i(im0 + (iy+0.5)dy).
    """
    rect: tuple                      # (re0, re1, im0, im1)
    mask: np.ndarray
    pixel_size: tuple
    meta: dict = field(default_factory=dict)

    def pixel_of(self, z):
        re0, re1, im0, im1 = self.rect
        dx, dy = self.pixel_size
        ix = int(np.floor((z.real - re0) / dx))
        iy = int(np.floor((z.imag - im0) / dy))
        return iy, ix

    def true_at(self, z, slack=0):
        """Mask value at z; with slack > 0, True only when the whole
        (2*slack+1)^2 pixel neighborhood is True (boundary slack)."""
        ny, nx = self.mask.shape
        iy, ix = self.pixel_of(z)
        if not (0 <= iy < ny and 0 <= ix < nx):
            return False
        y0, y1 = max(0, iy - slack), min(ny, iy + slack + 1)
        x0, x1 = max(0, ix - slack), min(nx, ix + slack + 1)
        return bool(np.all(self.mask[y0:y1, x0:x1]))


@dataclass
class MomentRow:
    order: int
    trace_mean: complex
    integral: complex
    gap: float


@dataclass
class MomentReport:
    n: tuple
    d_n: int
    n_max: int
    rows: list


# ---------------------------------------------------------------------------
# Hermitian-part support machinery
# ---------------------------------------------------------------------------

def _p4(m):
    """Parameters (t, u, v, w) of the Hermitian part of batched 1x1/2x2
    matrices: lambda_min = t - sqrt(u^2 + v^2 + w^2)."""
    s = m.shape[-1]
    if s == 1:
        t = m[..., 0, 0].real
        z = np.zeros_like(t)
        return t, z, z, z
    a = m[..., 0, 0].real
    d = m[..., 1, 1].real
    h01 = 0.5 * (m[..., 0, 1] + np.conj(m[..., 1, 0]))
    return 0.5 * (a + d), 0.5 * (a - d), h01.real, h01.imag


def _support_values(vals, thetas):
    """lambda_min of H(e^{-i theta} f(x)) for all (theta, x).

    vals: (m, s, s) samples; returns (T, m) array.
    """
    s = vals.shape[-1]
    ct, st = np.cos(thetas), np.sin(thetas)
    if s <= 2:
        f1 = _p4(vals)
        f2 = _p4(-1j * vals)
        comps = [np.outer(ct, a) + np.outer(st, b) for a, b in zip(f1, f2)]
        t, u, v, w = comps
        return t - np.sqrt(u * u + v * v + w * w)
    out = np.empty((thetas.size, vals.shape[0]))
    for idx, th in enumerate(thetas):
        rot = np.exp(-1j * th) * vals
        herm = 0.5 * (rot + np.conj(np.swapaxes(rot, -1, -2)))
        out[idx] = np.linalg.eigvalsh(herm)[..., 0]
    return out


def _sample_symbol(sym, grid, aligned=False):
    """Sample on a uniform grid; aligned grids include x = 0 and x = -pi
    (preferred for support functions so hull-touching points are hit),
    offset grids dodge declared singular points and pointwise inverses."""
    k = sym.k
    sizes = tuple(grid if np.iterable(grid) else (grid,) * k) if grid is not None \
        else (default_range_grid(k),) * k
    _, points = uniform_grid(k, sizes, offset=not aligned)
    vals = sym.eval_many(points, skip_singular=True)
    return sizes, points, vals


# ---------------------------------------------------------------------------
# Essential range / essential numerical range
# ---------------------------------------------------------------------------

def essential_range(sym, grid=None):
    """Eigenvalues of f(x) over a uniform sample grid (singular points
    skipped by the half-offset grid construction)."""
    sizes, points, vals = _sample_symbol(sym, grid)
    if min(sizes) < 64 and sym.kind == "general":
        pass  # permitted, but estimates are coarse; callers choose the grid
    finite = np.all(np.isfinite(vals.reshape(vals.shape[0], -1)), axis=1)
    skipped = int(np.count_nonzero(~finite))
    lams = np.linalg.eigvals(vals[finite])
    pts = lams.ravel()
    prov = [(tuple(points[i]), j)
            for n, i in enumerate(np.nonzero(finite)[0])
            for j in range(sym.s)] if len(points) <= 4096 else []
    return RangeCloud(points=pts, source="ER", grid=sizes,
                      provenance=prov, skipped=skipped)


def essential_numerical_range(sym, grid=None, angle_count=None):
    """Support function m(theta) plus boundary support points of the ENR.

    Returns (cloud, support).  The cloud holds the quadratic-form values
    v* f(x) v at the extremal eigenvectors, one per sampled direction.
    """
    angle_count = angle_count or DEFAULTS.angle_count
    if angle_count < 90:
        raise InvalidArgumentError(f"angle_count must be >= 90, got {angle_count}")
    sizes, points, vals = _sample_symbol(sym, grid, aligned=True)
    thetas = 2.0 * np.pi * np.arange(angle_count) / angle_count
    sup = _support_values(vals, thetas)          # (T, m)
    argmin = np.argmin(sup, axis=1)
    mvals = sup[np.arange(angle_count), argmin]
    support = SupportFunction(thetas=thetas, values=mvals, argmin_x=argmin)
    cloud_pts = np.empty(angle_count, dtype=np.complex128)
    prov = []
    for idx, th in enumerate(thetas):
        x_idx = argmin[idx]
        m = vals[x_idx]
        herm = 0.5 * (np.exp(-1j * th) * m + np.conj((np.exp(-1j * th) * m).T))
        _, vecs = np.linalg.eigh(herm)
        v = vecs[:, 0]
        cloud_pts[idx] = v.conj() @ m @ v
        prov.append((tuple(points[x_idx]), float(th)))
    cloud = RangeCloud(points=cloud_pts, source="ENR", grid=sizes, provenance=prov)
    return {"cloud": cloud, "support": support}


def sectoriality(sym, grid=None, angle_count=None, tol_d=None):
    """Classify a symbol as sectorial / weakly-sectorial / not-weakly-sectorial.

    d = max(0, max_theta m(theta)) estimates the distance of Coh[ENR] from
    the origin; d > tol certifies sectoriality (separating line strictly
    away from 0).  |max m| <= tol puts the origin on the hull boundary:
    classification weakly-sectorial, with the nondegeneracy witness (the
    variance over x of the support values at the best angle) reported.
    """
    tol_d = DEFAULTS.sector_d if tol_d is None else tol_d
    angle_count = angle_count or DEFAULTS.angle_count
    if angle_count < 90:
        raise InvalidArgumentError(f"angle_count must be >= 90, got {angle_count}")
    sizes, _, vals = _sample_symbol(sym, grid, aligned=True)
    thetas = 2.0 * np.pi * np.arange(angle_count) / angle_count
    sup = _support_values(vals, thetas)
    mvals = np.min(sup, axis=1)
    best = int(np.argmax(mvals))
    d_raw = float(mvals[best])
    theta_star = float(thetas[best])
    witness = float(np.var(sup[best]))
    nondeg = witness > DEFAULTS.sector_variance
    if d_raw > tol_d:
        cls = "sectorial"
    elif d_raw < -tol_d:
        cls = "not-weakly-sectorial"
    else:
        cls = "weakly-sectorial"
    return SectorReport(classification=cls, d=max(0.0, d_raw),
                        theta_star=theta_star, witness_variance=witness,
                        nondegenerate=nondeg, d_raw=d_raw, grid=sizes,
                        angle_count=angle_count)


# ---------------------------------------------------------------------------
# Localization region R(f, g)
# ---------------------------------------------------------------------------

def localization_region(f, g, rect=None, resolution=None, grid=None,
                        angle_count=None, threshold=None, eigs_hint=None):
    """Pixel mask of {lambda : f - lambda g is sectorial}.

    Requires g classified sectorial.  A pixel is True when the sectoriality
    estimate of f - lambda g at the pixel center exceeds the threshold
    (default: the sectorial/weakly-sectorial tolerance).  ``rect`` defaults
    to the bounding box of ``eigs_hint`` padded by 20%.
    """
    gsec = sectoriality(g, grid=grid, angle_count=angle_count)
    if gsec.classification != "sectorial":
        raise PreconditionViolatedError(
            f"preconditioner symbol {g.name or 'g'} is {gsec.classification}, "
            "localization requires a sectorial g")
    threshold = DEFAULTS.sector_d if threshold is None else threshold
    angle_count = angle_count or 360
    if rect is None:
        if eigs_hint is None or len(eigs_hint) == 0:
            raise InvalidArgumentError("need rect or eigs_hint for the region window")
        eigs_hint = np.asarray(eigs_hint)
        re0, re1 = float(eigs_hint.real.min()), float(eigs_hint.real.max())
        im0, im1 = float(eigs_hint.imag.min()), float(eigs_hint.imag.max())
        wre = max(re1 - re0, 1e-3)
        wim = max(im1 - im0, 1e-3)
        rect = (re0 - 0.2 * wre, re1 + 0.2 * wre, im0 - 0.2 * wim, im1 + 0.2 * wim)
    if resolution is None:
        resolution = DEFAULTS.region_pixels
    nx, ny = (resolution, resolution) if np.isscalar(resolution) else resolution
    re0, re1, im0, im1 = (float(c) for c in rect)
    dx, dy = (re1 - re0) / nx, (im1 - im0) / ny
    px = re0 + (np.arange(nx) + 0.5) * dx
    py = im0 + (np.arange(ny) + 0.5) * dy
    pp, qq = np.meshgrid(px, py)                 # (ny, nx)
    p = pp.ravel()
    q = qq.ravel()

    sizes, _, fv = _sample_symbol(f, grid, aligned=True)
    _, _, gv = _sample_symbol(g, grid, aligned=True)
    thetas = 2.0 * np.pi * np.arange(angle_count) / angle_count

    if f.s <= 2:
        decided = _region_fast(fv, gv, p, q, thetas, threshold)
    else:
        decided = _region_generic(fv, gv, p, q, thetas, threshold)
    mask = decided.reshape(ny, nx)
    meta = {"grid": sizes, "angle_count": angle_count, "threshold": threshold,
            "g_d": gsec.d}
    return RegionMask(rect=(re0, re1, im0, im1), mask=mask,
                      pixel_size=(dx, dy), meta=meta)


def _region_fast(fv, gv, p, q, thetas, threshold, chunk=4096):
    """s <= 2 path: the Hermitian-part parameters of f - lambda g are affine
    in (Re lambda, Im lambda), so each direction costs a few fused
    multiply-adds per (pixel, x) pair."""
    f1 = np.stack(_p4(fv), axis=-1)              # (m, 4): H(F)
    f2 = np.stack(_p4(-1j * fv), axis=-1)        # H(-iF)
    g1 = np.stack(_p4(gv), axis=-1)              # H(G)
    g2 = np.stack(_p4(1j * gv), axis=-1)         # H(iG)
    npix = p.size
    out = np.zeros(npix, dtype=bool)
    ct, st = np.cos(thetas), np.sin(thetas)
    for lo in range(0, npix, chunk):
        hi = min(lo + chunk, npix)
        pc = p[lo:hi][:, None, None]
        qc = q[lo:hi][:, None, None]
        undecided = np.ones(hi - lo, dtype=bool)
        res = np.zeros(hi - lo, dtype=bool)
        for c, s in zip(ct, st):
            if not undecided.any():
                break
            # H(e^{-i th}(F - lam G)) params, affine in (p, q)
            cvec = c * f1 + s * f2               # (m, 4)
            dp = -c * g1 + s * g2
            dq = -c * g2 - s * g1
            idx = np.nonzero(undecided)[0]
            vec = cvec[None] + pc[idx] * dp[None] + qc[idx] * dq[None]  # (u, m, 4)
            lam_min = vec[..., 0] - np.sqrt(vec[..., 1] ** 2 + vec[..., 2] ** 2
                                            + vec[..., 3] ** 2)
            ok = lam_min.min(axis=1) > threshold
            res[idx[ok]] = True
            undecided[idx[ok]] = False
        out[lo:hi] = res
    return out


def _region_generic(fv, gv, p, q, thetas, threshold, chunk=256):
    npix = p.size
    out = np.zeros(npix, dtype=bool)
    for lo in range(0, npix, chunk):
        hi = min(lo + chunk, npix)
        lam = (p[lo:hi] + 1j * q[lo:hi])[:, None, None, None]
        m = fv[None] - lam * gv[None]            # (P, m, s, s)
        best = np.full(hi - lo, -np.inf)
        for th in thetas:
            rot = np.exp(-1j * th) * m
            herm = 0.5 * (rot + np.conj(np.swapaxes(rot, -1, -2)))
            lam_min = np.linalg.eigvalsh(herm)[..., 0].min(axis=1)
            best = np.maximum(best, lam_min)
        out[lo:hi] = best > threshold
    return out


# ---------------------------------------------------------------------------
# Area(K) masks
# ---------------------------------------------------------------------------

def area_of_compact(cloud, resolution=256, dilation=0.1):
    """Mask of the cloud's epsilon-dilation together with every bounded
    component it encloses (complement of the unbounded flood-fill)."""
    if np.isscalar(resolution) and resolution < 32:
        raise InvalidArgumentError(f"resolution must be >= 32, got {resolution}")
    pts = np.asarray(cloud.points if isinstance(cloud, RangeCloud) else cloud,
                     dtype=np.complex128)
    if pts.size == 0:
        raise InvalidArgumentError("empty cloud")
    nx, ny = (resolution, resolution) if np.isscalar(resolution) else resolution
    re0, re1 = pts.real.min(), pts.real.max()
    im0, im1 = pts.imag.min(), pts.imag.max()
    # frame margin: dilation plus two pixels so the border ring is free
    wre = max(re1 - re0, 1e-6)
    wim = max(im1 - im0, 1e-6)
    mx = dilation + 2.0 * wre / nx + 0.05 * wre
    my = dilation + 2.0 * wim / ny + 0.05 * wim
    re0, re1, im0, im1 = re0 - mx, re1 + mx, im0 - my, im1 + my
    dx, dy = (re1 - re0) / nx, (im1 - im0) / ny
    cx = re0 + (np.arange(nx) + 0.5) * dx
    cy = im0 + (np.arange(ny) + 0.5) * dy
    xx, yy = np.meshgrid(cx, cy)
    tree = cKDTree(np.column_stack([pts.real, pts.imag]))
    dist, _ = tree.query(np.column_stack([xx.ravel(), yy.ravel()]))
    occupied = (dist <= dilation).reshape(ny, nx)
    labels, _ = ndimage.label(~occupied)
    border = np.unique(np.concatenate([labels[0, :], labels[-1, :],
                                       labels[:, 0], labels[:, -1]]))
    border = border[border != 0]
    unbounded = np.isin(labels, border)
    mask = ~unbounded
    return RegionMask(rect=(re0, re1, im0, im1), mask=mask, pixel_size=(dx, dy),
                      meta={"dilation": dilation, "source": getattr(cloud, "source", "")})


# ---------------------------------------------------------------------------
# Clustering / outliers
# ---------------------------------------------------------------------------

def outlier_count(eigs, cloud, eps):
    """Number of eigenvalues at distance > eps from every cloud point."""
    if eps <= 0:
        raise InvalidArgumentError(f"eps must be positive, got {eps}")
    eigs = np.asarray(eigs, dtype=np.complex128).ravel()
    pts = np.asarray(cloud.points if isinstance(cloud, RangeCloud) else cloud,
                     dtype=np.complex128).ravel()
    tree = cKDTree(np.column_stack([pts.real, pts.imag]))
    dist, _ = tree.query(np.column_stack([eigs.real, eigs.imag]))
    return int(np.count_nonzero(dist > eps))


# ---------------------------------------------------------------------------
# Moment test
# ---------------------------------------------------------------------------

def moment_test(f, g, n, n_max=4, quad_grid=None):
    """Compare tr(A^N)/d_n for A = T_n(g)^{-1} T_n(f) against the grid
    quadrature of tr(h^N)/s, h = g^{-1} f, for N = 0..n_max."""
    if n_max > 8:
        raise InvalidArgumentError(f"n_max must be <= 8, got {n_max}")
    n = as_multiindex(n, f.k)
    d_n = f.s * prod(n)
    if d_n > 1024:
        raise ResourceLimitError(f"moment test uses dense products; d_n={d_n} > 1024")
    factor = factor_preconditioner(g, n)
    tf = build_dense(f, n).to_dense()
    a = factor.solve(tf)
    sizes, _, fv = _sample_symbol(f, quad_grid)
    _, _, gv = _sample_symbol(g, quad_grid)
    hv = np.linalg.solve(gv, fv)

    rows = []
    apow = np.eye(d_n, dtype=np.complex128)
    hpow = np.broadcast_to(np.eye(f.s, dtype=np.complex128), hv.shape).copy()
    for order in range(n_max + 1):
        trace_mean = complex(np.trace(apow) / d_n)
        integral = complex(np.einsum("mii->m", hpow).mean() / f.s)
        rows.append(MomentRow(order=order, trace_mean=trace_mean,
                              integral=integral, gap=abs(trace_mean - integral)))
        if order < n_max:
            apow = apow @ a
            hpow = hpow @ hv
    return MomentReport(n=n, d_n=d_n, n_max=n_max, rows=rows)


# ---------------------------------------------------------------------------
# Distribution functionals
# ---------------------------------------------------------------------------

def distribution_functional(eigs, f_id):
    """Average (1/d_n) sum F(lambda_j) for a test function from the fixed
    library: "monomial:N" (N <= 8), smoothed re/im indicators
    "re_indicator:a:b:delta" / "im_indicator:a:b:delta", and radial tents
    "bump:cx:cy:radius"."""
    eigs = np.asarray(eigs, dtype=np.complex128).ravel()
    parts = str(f_id).split(":")
    kind = parts[0]
    if kind == "monomial":
        n = int(parts[1])
        if not 0 <= n <= 8:
            raise InvalidArgumentError(f"monomial order must be 0..8, got {n}")
        return complex(np.mean(eigs ** n))
    if kind in ("re_indicator", "im_indicator"):
        a, b, delta = (float(v) for v in parts[1:4])
        if delta <= 0 or b < a:
            raise InvalidArgumentError(f"bad indicator parameters {f_id!r}")
        t = eigs.real if kind == "re_indicator" else eigs.imag
        rise = np.clip((t - (a - delta)) / delta, 0.0, 1.0)
        fall = np.clip(((b + delta) - t) / delta, 0.0, 1.0)
        return complex(np.mean(np.minimum(rise, fall)))
    if kind == "bump":
        cx, cy, radius = (float(v) for v in parts[1:4])
        if radius <= 0:
            raise InvalidArgumentError(f"bump radius must be positive: {f_id!r}")
        dist = np.abs(eigs - (cx + 1j * cy))
        return complex(np.mean(np.maximum(0.0, 1.0 - dist / radius)))
    raise InvalidArgumentError(f"unknown test function id {f_id!r}")


# ---------------------------------------------------------------------------
# Exports
# ---------------------------------------------------------------------------

def cloud_to_csv(cloud, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("re,im,source\n")
        for z in np.asarray(cloud.points).ravel():
            fh.write(f"{z.real:.17g},{z.imag:.17g},{cloud.source}\n")


def mask_to_pgm(mask, path):
    """Binary PGM (P5), True pixels white; row 0 is the lowest imaginary row."""
    arr = (np.asarray(mask.mask, dtype=np.uint8) * 255)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode())
        fh.write(arr.tobytes())
