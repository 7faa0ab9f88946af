"""Full (non-restarted) GMRES with optional left band-Toeplitz
preconditioning, plus the seeded experiment runner for the catalog cases.

The Arnoldi process uses modified Gram-Schmidt with one reorthogonalization
pass; the least-squares problem is updated with complex Givens rotations.
The stopping rule is the preconditioned relative residual
||M^{-1}(b - A x_k)|| / ||M^{-1} b|| (M = identity when unpreconditioned);
--true-residual style stopping on ||b - A x_k|| / ||b|| is available for
sensitivity studies.
"""

import csv
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .catalog import catalog
from .errors import InvalidArgumentError, StagnationError
from .multiindex import as_multiindex, prod
from .toeplitz import ToeplitzOperator, factor_preconditioner

_BREAKDOWN = 1e-14
_TINY = 1e-300   # positive floor so residual CSVs stay log-plottable


@dataclass
class SolveReport:
    """Outcome of one GMRES solve."""
    iterations: int
    residual_history: np.ndarray
    converged: bool
    seed: int | None = None
    wall_time: float = 0.0
    config: dict = field(default_factory=dict)

    def to_json_dict(self, include_timings=False):
        doc = {"iterations": self.iterations,
               "converged": self.converged,
               "seed": self.seed,
               "config": self.config,
               "residual_history": [float(r) for r in self.residual_history]}
        if include_timings:
            doc["wall_time"] = self.wall_time
        return doc

    def write_json(self, path, include_timings=False):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(include_timings=include_timings), fh, indent=2)

    def write_residuals_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iter", "relres"])
            for i, r in enumerate(self.residual_history, start=1):
                writer.writerow([i, f"{r:.17g}"])


def _givens(a, b):
    """Complex Givens rotation: returns (c, s) with c real such that
    [c, s; -conj(s), c] @ [a, b]^T = [r, 0]^T."""
    if b == 0:
        return 1.0, 0.0 + 0.0j
    if a == 0:
        return 0.0, np.conj(b) / abs(b)
    denom = np.hypot(abs(a), abs(b))
    c = abs(a) / denom
    s = (a / abs(a)) * np.conj(b) / denom
    return c, s


def gmres(apply_a, b, tol=1e-6, max_iter=None, precond=None,
          true_residual=False, seed=None, config=None):
    """Full GMRES; returns (solution, SolveReport).

    apply_a: callable vector -> vector.  precond: object with .solve (left
    preconditioner M; the iteration runs on M^{-1}A).  Happy breakdown
    returns converged; Arnoldi norm underflow below 1e-14 without
    convergence raises StagnationError.
    """
    t0 = time.perf_counter()
    b = np.asarray(b, dtype=np.complex128)
    n = b.size
    if np.linalg.norm(b) == 0.0:
        raise InvalidArgumentError("right-hand side must be nonzero")
    if max_iter is None:
        max_iter = n
    max_iter = int(min(max_iter, n))
    minv = precond.solve if precond is not None else (lambda v: v)

    r0 = minv(b)
    beta = np.linalg.norm(r0)
    bnorm = np.linalg.norm(b)

    basis = np.zeros((max_iter + 1, n), dtype=np.complex128)
    basis[0] = r0 / beta
    hess = np.zeros((max_iter + 1, max_iter), dtype=np.complex128)
    cs = np.zeros(max_iter)
    sn = np.zeros(max_iter, dtype=np.complex128)
    g = np.zeros(max_iter + 1, dtype=np.complex128)
    g[0] = beta

    history = []
    converged = False
    iters = 0

    def current_solution(j):
        y = np.linalg.solve(np.triu(hess[:j + 1, :j + 1]), g[:j + 1])
        return basis[:j + 1].T @ y

    for j in range(max_iter):
        w = minv(apply_a(basis[j]))
        for i in range(j + 1):                      # modified Gram-Schmidt
            h = np.vdot(basis[i], w)
            w -= h * basis[i]
            hess[i, j] = h
        for i in range(j + 1):                      # one reorthogonalization pass
            corr = np.vdot(basis[i], w)
            w -= corr * basis[i]
            hess[i, j] += corr
        hnorm = np.linalg.norm(w)
        hess[j + 1, j] = hnorm

        for i in range(j):                          # apply stored rotations
            t = cs[i] * hess[i, j] + sn[i] * hess[i + 1, j]
            hess[i + 1, j] = -np.conj(sn[i]) * hess[i, j] + cs[i] * hess[i + 1, j]
            hess[i, j] = t
        cs[j], sn[j] = _givens(hess[j, j], hess[j + 1, j])
        hess[j, j] = cs[j] * hess[j, j] + sn[j] * hess[j + 1, j]
        hess[j + 1, j] = 0.0
        g[j + 1] = -np.conj(sn[j]) * g[j]
        g[j] = cs[j] * g[j]

        iters = j + 1
        if true_residual:
            x = current_solution(j)
            relres = float(np.linalg.norm(b - apply_a(x)) / bnorm)
        else:
            relres = float(abs(g[j + 1]) / beta)
        history.append(max(relres, _TINY))
        if relres <= tol:
            converged = True
            break
        if hnorm < _BREAKDOWN:
            raise StagnationError(
                f"Arnoldi norm underflow ({hnorm:.2e}) at iteration {iters} "
                f"with residual {relres:.2e} > tol")
        basis[j + 1] = w / hnorm

    x = current_solution(iters - 1)
    report = SolveReport(iterations=iters,
                         residual_history=np.array(history),
                         converged=converged,
                         seed=seed,
                         wall_time=time.perf_counter() - t0,
                         config=dict(config or {}))
    return x, report


def run_case(case_id, n, r=None, preconditioned=False, seed=0, tol=1e-6,
             max_iter=None, true_residual=False):
    """Assemble T_n(f) for a catalog case, draw a seeded standard-normal
    real right-hand side, optionally precondition by T_n(g), run GMRES."""
    f, g = catalog(case_id, r=r)
    n = as_multiindex(n, f.k)
    op = ToeplitzOperator(f, n, assemble=False)
    rng = np.random.default_rng(seed)
    b = rng.standard_normal(op.order).astype(np.complex128)
    precond = factor_preconditioner(g, n) if preconditioned else None
    config = {"case": int(case_id), "n": list(n), "r": r, "tol": tol,
              "preconditioned": bool(preconditioned), "seed": int(seed),
              "d_n": op.order, "true_residual": bool(true_residual)}
    x, report = gmres(op.matvec, b, tol=tol, max_iter=max_iter,
                      precond=precond, true_residual=true_residual,
                      seed=seed, config=config)
    return x, report
