"""Dense linear-algebra kernels and the two convex solvers behind the
progressive network: ridge-regularized least squares and Frobenius-ball
constrained least squares via ADMM splitting.

Matrices are plain float64 ``numpy.ndarray``s; finiteness is enforced where
data enters from I/O, not on every kernel call.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import SolverError


def relu(M: np.ndarray) -> np.ndarray:
    """Element-wise max(0, .)."""
    return np.maximum(M, 0.0)


def ensure_finite(M: np.ndarray, what: str = "matrix") -> np.ndarray:
    """Reject NaN/inf on data arriving from files."""
    if not np.isfinite(M).all():
        raise ValueError(f"{what} contains non-finite entries")
    return M


def seeded_random_matrix(rows: int, cols: int, seed: int) -> np.ndarray:
    """I.i.d. uniform [-1, 1] entries from a PCG64 stream; identical output
    for identical (rows, cols, seed) on every platform."""
    if rows < 0 or cols < 0:
        raise ValueError("matrix dimensions must be non-negative")
    gen = np.random.Generator(np.random.PCG64(seed))
    return gen.uniform(-1.0, 1.0, size=(rows, cols))


def regularized_least_squares(T: np.ndarray, Y: np.ndarray, lam: float) -> np.ndarray:
    """Ridge map O = T Y' (Y Y' + lam I)^-1, the unique minimizer of
    ||T - O Y||_F^2 + lam ||O||_F^2.

    Parameters
    ----------
    T : ndarray, Q x N
        Target matrix.
    Y : ndarray, m x N
        Design matrix (columns are instances).
    lam : float
        Ridge weight, >= 0. With lam = 0 the Gram matrix must be invertible.

    Returns
    -------
    O : ndarray, Q x m

    Raises
    ------
    SolverError
        If lam = 0 and Y Y' is singular.
    """
    if lam < 0:
        raise ValueError("lam must be non-negative")
    if T.shape[1] != Y.shape[1]:
        raise ValueError("T and Y must have the same number of columns")
    m = Y.shape[0]
    G = Y @ Y.T
    rhs = Y @ T.T  # m x Q
    if lam > 0:
        G = G + lam * np.eye(m)
        factor = scipy.linalg.cho_factor(G, lower=True)
        return scipy.linalg.cho_solve(factor, rhs).T
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(G)
    diag = np.abs(np.diag(lu))
    if diag.size and diag.min() <= diag.max() * np.finfo(float).eps * m:
        raise SolverError("Y Y' is singular; pass lam > 0")
    return scipy.linalg.lu_solve((lu, piv), rhs).T


def project_frobenius_ball(M: np.ndarray, eps: float) -> np.ndarray:
    """Rescale M onto the Frobenius ball of radius eps (identity inside it).

    Norms within a few ulps of eps count as inside, which keeps repeated
    projection exactly idempotent in floating point.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    norm = float(np.linalg.norm(M))
    if norm <= eps * (1.0 + 4.0 * np.finfo(float).eps):
        return M
    return (eps / norm) * M


@dataclass(frozen=True)
class AdmmConfig:
    """Penalty and stopping settings for the constrained least-squares solver."""

    mu: float = 1e4
    max_iters: int = 100
    tol_primal: float = 1e-6
    tol_dual: float = 1e-6

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tol_primal <= 0 or self.tol_dual <= 0:
            raise ValueError("tolerances must be positive")


def admm_constrained_ls(
    T: np.ndarray,
    Z: np.ndarray,
    eps: float,
    cfg: AdmmConfig | None = None,
    full_output: bool = False,
):
    """Approximately solve  min_O ||T - O Z||_F^2  s.t.  ||O||_F <= eps.

    Splits O = V and alternates a ridge-type O-update with penalty ``mu``,
    projection of V onto the eps-ball, and a scaled dual update. Iteration
    stops at ``max_iters`` or when the primal residual ||O - V||_F and the
    dual residual mu ||V - V_prev||_F drop below their tolerances.

    The returned matrix is the feasible iterate (projection side) with the
    lowest recorded objective, so it always satisfies ||O||_F <= eps and is
    never worse than the projected ridge initializer.

    Parameters
    ----------
    T : ndarray, Q x N
    Z : ndarray, n x N
    eps : float
        Frobenius-ball radius, > 0.
    cfg : AdmmConfig, optional
    full_output : bool
        When True, also return the per-iterate objective sequence.

    Returns
    -------
    O : ndarray, Q x n
    objectives : list of float, only with ``full_output=True``

    Raises
    ------
    SolverError
        On non-finite intermediates (ill-conditioned Z; regularize or
        reduce node count).
    """
    if T.shape[1] != Z.shape[1]:
        raise ValueError("T and Z must have the same number of columns")
    return admm_constrained_ls_from_gram(
        Z @ Z.T, T @ Z.T, float((T * T).sum()), eps, cfg, full_output=full_output
    )


def admm_constrained_ls_from_gram(
    G: np.ndarray,
    B: np.ndarray,
    t_sq: float,
    eps: float,
    cfg: AdmmConfig | None = None,
    full_output: bool = False,
):
    """Same solver as :func:`admm_constrained_ls`, but on precomputed
    sufficient statistics G = Z Z', B = T Z', t_sq = ||T||_F^2.

    Lets callers that grow Z incrementally (layer widening) update the Gram
    matrix blockwise instead of re-forming it from scratch.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    cfg = cfg or AdmmConfig()

    n = G.shape[0]
    if G.shape != (n, n) or B.shape[1] != n:
        raise ValueError("G must be n x n and B must be Q x n")

    def objective(O: np.ndarray) -> float:
        return t_sq - 2.0 * float((B * O).sum()) + float(((O @ G) * O).sum())

    factor = scipy.linalg.cho_factor(G + (cfg.mu / 2.0) * np.eye(n), lower=True)

    def ridge_update(rhs: np.ndarray) -> np.ndarray:
        return scipy.linalg.cho_solve(factor, rhs.T).T

    # Initialize from the projected (lightly ridged) least-squares solution;
    # the best-iterate return below then can never do worse than it.
    lam_init = 1e-8 * (np.trace(G) / n + 1.0)
    init_factor = scipy.linalg.cho_factor(G + lam_init * np.eye(n), lower=True)
    V = project_frobenius_ball(scipy.linalg.cho_solve(init_factor, B.T).T, eps)
    U = np.zeros_like(V)
    best = V
    best_obj = objective(V)
    objectives = [best_obj]

    for _ in range(cfg.max_iters):
        O = ridge_update(B + (cfg.mu / 2.0) * (V - U))
        V_prev = V
        V = project_frobenius_ball(O + U, eps)
        U = U + O - V
        if not (np.isfinite(O).all() and np.isfinite(V).all()):
            raise SolverError("non-finite ADMM iterate; Z is ill-conditioned")
        obj = objective(V)
        objectives.append(obj)
        if obj < best_obj:
            best, best_obj = V, obj
        r = float(np.linalg.norm(O - V))
        s = cfg.mu * float(np.linalg.norm(V - V_prev))
        if r <= cfg.tol_primal and s <= cfg.tol_dual:
            break

    if full_output:
        return best, objectives
    return best
