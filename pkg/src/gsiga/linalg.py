"""SPD solves and the non-negativity constrained quadratic program."""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InvalidArgument, NumericalFailure


@dataclass
class SolveInfo:
    iterations: int
    residual: float


def solve_spd(matrix, rhs, tol=1e-10, max_iter=None, x0=None, return_info=False):
    """Jacobi-preconditioned conjugate gradients.

    Converged means ``||M x - b|| / ||b|| <= tol``; otherwise
    :class:`NumericalFailure` is raised carrying the final relative residual.
    """
    M = sp.csr_matrix(matrix) if not sp.issparse(matrix) else matrix.tocsr()
    b = np.asarray(rhs, dtype=float)
    if M.shape[0] != M.shape[1] or M.shape[0] != b.shape[0]:
        raise InvalidArgument("matrix and right-hand side do not match")
    if b.ndim == 2:
        cols = [solve_spd(M, b[:, k], tol, max_iter, None if x0 is None else x0[:, k], True) for k in range(b.shape[1])]
        x = np.stack([c[0] for c in cols], 1)
        info = SolveInfo(max(c[1].iterations for c in cols), max(c[1].residual for c in cols))
        return (x, info) if return_info else x
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        x = np.zeros_like(b)
        return (x, SolveInfo(0, 0.0)) if return_info else x
    diag = M.diagonal()
    if np.any(diag <= 0):
        raise NumericalFailure("matrix has non-positive diagonal; not SPD", residual=np.inf)
    inv = 1.0 / diag
    prec = spla.LinearOperator(M.shape, matvec=lambda v: inv * v, dtype=float)
    max_iter = max_iter or 10 * M.shape[0]
    count = [0]

    def cb(_):
        count[0] += 1

    x = None if x0 is None else np.asarray(x0, dtype=float)
    res = np.inf
    # the recursive residual can drift from the true one; allow one restart
    for _ in range(2):
        x, _flag = spla.cg(M, b, x0=x, rtol=tol, atol=0.0, maxiter=max_iter, M=prec, callback=cb)
        res = np.linalg.norm(M @ x - b) / bnorm
        if res <= tol:
            break
    if not res <= tol:
        raise NumericalFailure(f"CG did not converge (relative residual {res:.3e})", residual=res)
    return (x, SolveInfo(count[0], res)) if return_info else x


def kkt_residual(Q, f, x):
    """Largest violation of the optimality conditions of
    ``min 1/2 x^T Q x - x^T f  s.t. x >= 0``."""
    g = Q @ x - f
    return max(float(np.max(np.abs(np.minimum(x, g)), initial=0.0)), float(np.max(np.abs(x * g), initial=0.0)))


def positivity_step(Q, f, x0=None, tol=1e-10, max_iter=100):
    """Solve ``min 1/2 x^T Q x - x^T f`` subject to ``x >= 0`` for SPD ``Q``.

    Primal-dual active set iterations with exact solves on the free set,
    warm-started from ``x0`` (or the unconstrained solution); even a feasible
    start gets one exact solve so the KKT residual does not inherit an
    iterative solver's tolerance. Falls back to
    projected Gauss-Seidel sweeps if the active set cycles.
    """
    Q = sp.csr_matrix(Q)
    f = np.asarray(f, dtype=float)
    n = f.shape[0]
    if x0 is None:
        x0 = spla.spsolve(Q.tocsc(), f)
    x = np.asarray(x0, dtype=float).copy()
    diag = Q.diagonal()
    active = x < 0
    seen = set()
    for _ in range(max_iter):
        x = _solve_free(Q, f, ~active)
        mu = Q @ x - f
        new_active = (mu - diag * x) > 0
        key = new_active.tobytes()
        if np.array_equal(new_active, active):
            break
        if key in seen:
            x = _projected_gauss_seidel(Q, f, np.maximum(x, 0.0), tol)
            new_active = x <= 0
            x = _solve_free(Q, f, ~new_active)
            active = new_active
            break
        seen.add(key)
        active = new_active
    res = kkt_residual(Q, f, x)
    scale = max(1.0, float(np.max(np.abs(f), initial=0.0)))
    if not res <= tol * scale:
        raise NumericalFailure(f"positivity QP did not converge (KKT residual {res:.3e})", residual=res)
    return x


def _solve_free(Q, f, free):
    x = np.zeros(f.shape[0])
    idx = np.flatnonzero(free)
    if idx.size:
        Qff = Q[idx][:, idx].tocsc()
        x[idx] = spla.spsolve(Qff, f[idx])
    return x


def _projected_gauss_seidel(Q, f, x, tol, max_sweeps=10000):
    Q = Q.tocsr()
    diag = Q.diagonal()
    indptr, indices, data = Q.indptr, Q.indices, Q.data
    for _ in range(max_sweeps):
        delta = 0.0
        for i in range(len(f)):
            row = slice(indptr[i], indptr[i + 1])
            r = f[i] - data[row] @ x[indices[row]] + diag[i] * x[i]
            xi = max(0.0, r / diag[i])
            delta = max(delta, abs(xi - x[i]))
            x[i] = xi
        if delta < tol:
            break
    return x
