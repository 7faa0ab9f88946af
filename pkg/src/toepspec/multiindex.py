"""Multi-index utilities: componentwise comparisons and the lexicographic
linearization used to order block rows/columns (last component fastest).
"""

from itertools import product

import numpy as np

from .errors import InvalidArgumentError

MAX_LEVELS = 3


def as_multiindex(j, k=None):
    """Coerce to a tuple of ints; optionally check the number of components."""
    if np.isscalar(j):
        j = (j,)
    t = tuple(int(c) for c in j)
    if not 1 <= len(t) <= MAX_LEVELS:
        raise InvalidArgumentError(
            f"multi-index must have 1..{MAX_LEVELS} components, got {len(t)}")
    if k is not None and len(t) != k:
        raise InvalidArgumentError(f"expected {k} components, got {len(t)}")
    return t


def leq(a, b):
    """Componentwise a <= b."""
    return all(x <= y for x, y in zip(a, b))


def prod(n):
    """Product of the components (the paper's hat operator)."""
    p = 1
    for c in n:
        p *= int(c)
    return p


def linearize(j, lo, hi):
    """Position of ``j`` in the lexicographic enumeration of lo..hi.

    The last component varies fastest; the map is a bijection onto
    0..prod(hi-lo+1)-1.
    """
    j, lo, hi = as_multiindex(j), as_multiindex(lo), as_multiindex(hi)
    if not (len(j) == len(lo) == len(hi)):
        raise InvalidArgumentError("mismatched multi-index lengths")
    if not (leq(lo, j) and leq(j, hi)):
        raise InvalidArgumentError(f"{j} outside range {lo}..{hi}")
    idx = 0
    for jc, lc, hc in zip(j, lo, hi):
        idx = idx * (hc - lc + 1) + (jc - lc)
    return idx


def delinearize(idx, lo, hi):
    """Inverse of :func:`linearize`."""
    lo, hi = as_multiindex(lo), as_multiindex(hi)
    sizes = [hc - lc + 1 for lc, hc in zip(lo, hi)]
    total = prod(sizes)
    if not 0 <= idx < total:
        raise InvalidArgumentError(f"index {idx} outside 0..{total - 1}")
    out = []
    for size, lc in zip(reversed(sizes), reversed(lo)):
        out.append(idx % size + lc)
        idx //= size
    return tuple(reversed(out))


def iter_range(lo, hi):
    """Yield the multi-indices lo..hi in lexicographic order."""
    lo, hi = as_multiindex(lo), as_multiindex(hi)
    for j in product(*(range(lc, hc + 1) for lc, hc in zip(lo, hi))):
        yield j
