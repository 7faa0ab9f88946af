"""Central configuration: every numeric tolerance used by the library.

The defaults below are the contract; tests assert against these values.
"""

import os
from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    # dense linear algebra
    eig_residual_rel: float = 1e-10     # ||Av - lambda v|| <= tol * ||A||
    svd_cross_rel: float = 1e-10        # sigma vs sqrt(eig(A*A)) cross-check
    solve_residual_rel: float = 1e-10   # LU / banded-LU solve residual
    rank_rel_threshold: float = 1e-10   # numerical rank: sigma > tol * sigma_max
    fft_roundtrip_rel: float = 1e-12

    # symbols
    trig_table_rel: float = 1e-12       # trig-kind evaluator vs coefficient sum
    singular_point_radius: float = 1e-12
    hermitian_rel: float = 1e-10        # Hermitian symbol -> Hermitian matrix
    pointwise_inverse_rel: float = 1e-8  # residual ||M M^-1 - I|| per sample

    # Toeplitz operators
    matvec_rel: float = 1e-10           # embedded matvec vs dense
    precond_residual_rel: float = 1e-10

    # spectral analysis
    sector_d: float = 1e-6              # sectorial vs weakly-sectorial split
    sector_variance: float = 1e-10      # nondegeneracy witness threshold
    hull_membership: float = 1e-6

    # defaults for sampling
    range_grid_1d: int = 512            # essential-range grid, points per dim
    range_grid_2d: int = 96
    coeff_grid_1d: int = 1024           # quadrature grid for Fourier coefficients
    coeff_grid_2d: int = 128
    coeff_grid_3d: int = 64
    angle_count: int = 720              # support-function directions
    outlier_eps: float = 0.1            # default clustering epsilon
    region_pixels: int = 256            # localization-region resolution per axis


DEFAULTS = Tolerances()

DEFAULT_MAX_ORDER = 2048


def dense_order_cap() -> int:
    """Dense-order cap; TOEPSPEC_MAX_ORDER overrides the default of 2048."""
    raw = os.environ.get("TOEPSPEC_MAX_ORDER")
    if raw is None:
        return DEFAULT_MAX_ORDER
    try:
        cap = int(raw)
    except ValueError:
        raise ValueError(f"TOEPSPEC_MAX_ORDER must be an integer, got {raw!r}")
    if cap < 1:
        raise ValueError("TOEPSPEC_MAX_ORDER must be positive")
    return cap
