"""L1-regularized reconstruction of a query from a track's image vectors.

The objective is exactly

    minimize  ||y - X G||_2^2 + alpha * ||G||_1

with no sample-count scaling factor. Many library solvers minimize
``1/(2n) ||y - Xw||^2 + alpha ||w||_1`` instead, which silently rescales
the effective alpha; the solvers here do not. The KKT conditions for this
objective are ``|2 x_i^T (y - XG)| <= alpha`` for every atom, with
sign-consistent equality on the support.

``lasso_lars`` follows the least-angle path with the lasso modification
(atoms may leave the active set) and stops exactly at the requested alpha.
``coordinate_descent_oracle`` solves the same objective by cyclic
soft-thresholding; it exists to cross-check the path solver and is kept
independent of it.

The reconstruction-residual distances normalize the dictionary columns
and the query to unit L2 norm before solving, so alpha is comparable
across feature scales.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DimensionMismatchError, NumericalError, ZeroNormError
from .tracks import FULL_TRACK, Query, TrackFeatures

_TINY = 1e-12


@dataclass(frozen=True)
class SparseCode:
    """Solution of one L1 reconstruction: coefficients, support, objective."""

    coefficients: np.ndarray
    support: np.ndarray
    objective_value: float


def lasso_objective(dictionary: np.ndarray, target: np.ndarray, coef: np.ndarray, alpha: float) -> float:
    r = target - dictionary @ coef
    return float(r @ r + alpha * np.abs(coef).sum())


def kkt_violation(dictionary: np.ndarray, target: np.ndarray, coef: np.ndarray, alpha: float) -> float:
    """Worst violation of the lasso optimality conditions (0 for an exact solution)."""
    g = 2.0 * dictionary.T @ (target - dictionary @ coef)
    on = coef != 0.0
    worst = 0.0
    if np.any(~on):
        worst = max(worst, float(np.max(np.abs(g[~on])) - alpha))
    if np.any(on):
        worst = max(worst, float(np.max(np.abs(g[on] - alpha * np.sign(coef[on])))))
    return max(worst, 0.0)


def _check_problem(dictionary, target, alpha):
    X = np.asarray(dictionary, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64).reshape(-1)
    if X.ndim != 2:
        raise DimensionMismatchError(f"dictionary must be 2-D, got shape {X.shape}")
    if X.shape[0] != y.shape[0]:
        raise DimensionMismatchError(
            f"dictionary rows {X.shape[0]} != target length {y.shape[0]}"
        )
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise NumericalError("dictionary and target must be finite")
    if alpha < 0:
        raise NumericalError(f"alpha must be >= 0, got {alpha}")
    if np.any(np.einsum("ij,ij->j", X, X) == 0.0):
        raise ZeroNormError("dictionary contains a zero-norm column")
    return X, y


def _lars_gram(gram: np.ndarray, corr: np.ndarray, lam: float, max_steps: int | None = None) -> np.ndarray:
    """Lasso path in correlation space, stopped at KKT level ``lam``.

    ``gram`` is X^T X and ``corr`` is X^T y; the returned w minimizes
    ||y - Xw||^2 + 2*lam*||w||_1. Ties on the entering atom are broken by
    lowest column index.
    """
    n = corr.shape[0]
    if max_steps is None:
        max_steps = 8 * n + 32
    w = np.zeros(n)
    c = corr.astype(np.float64, copy=True)
    C = float(np.max(np.abs(c)))
    if C <= lam + _TINY * max(1.0, C):
        return w

    active: list[int] = [int(np.argmax(np.abs(c)))]
    for _ in range(max_steps):
        idx = np.array(active)
        G_A = gram[np.ix_(idx, idx)]
        s = np.sign(c[idx])
        s[s == 0.0] = 1.0
        try:
            d = np.linalg.solve(G_A, s)
        except np.linalg.LinAlgError:
            d = np.linalg.lstsq(G_A, s, rcond=None)[0]
        rate = gram[:, idx] @ d  # dc/dgamma for every atom

        gamma_target = C - lam

        # next atom to reach the correlation envelope
        mask = np.ones(n, dtype=bool)
        mask[idx] = False
        gamma_join = np.inf
        join = -1
        if np.any(mask):
            cand = np.full(n, np.inf)
            for num, den in ((C - c, 1.0 - rate), (C + c, 1.0 + rate)):
                ok = mask & (den > _TINY)
                vals = num[ok] / den[ok]
                vals[vals < -_TINY] = np.inf
                np.clip(vals, 0.0, None, out=vals)
                cand_ok = cand[ok]
                cand[ok] = np.minimum(cand_ok, vals)
            join = int(np.argmin(cand))
            gamma_join = float(cand[join])

        # first active coefficient to cross zero (lasso modification)
        gamma_drop = np.inf
        drop = -1
        moving = d != 0.0
        if np.any(moving):
            cross = -w[idx[moving]] / d[moving]
            cross[cross <= _TINY] = np.inf
            k = int(np.argmin(cross))
            if np.isfinite(cross[k]):
                gamma_drop = float(cross[k])
                drop = int(idx[moving][k])

        gamma = min(gamma_target, gamma_join, gamma_drop)
        w[idx] += gamma * d
        c -= gamma * rate
        C -= gamma

        if gamma_target <= min(gamma_join, gamma_drop):
            return w
        if gamma_drop < gamma_join:
            w[drop] = 0.0
            active.remove(drop)
            if not active:
                C = float(np.max(np.abs(c)))
                if C <= lam + _TINY * max(1.0, C):
                    return w
                active = [int(np.argmax(np.abs(c)))]
        else:
            active.append(join)
        if C <= lam + _TINY * max(1.0, C):
            return w
    raise ConvergenceError(f"lasso path did not terminate within {max_steps} steps")


def _as_sparse_code(X, y, w, alpha) -> SparseCode:
    w = np.asarray(w, dtype=np.float64)
    w.setflags(write=False)
    return SparseCode(
        coefficients=w,
        support=np.flatnonzero(w),
        objective_value=lasso_objective(X, y, w, alpha),
    )


def lasso_lars(dictionary, target, alpha: float) -> SparseCode:
    """Minimize ||y - XG||^2 + alpha*||G||_1 by the least-angle path.

    Expects unit-norm dictionary columns and target for the distance use
    case (the rscr_* callers normalize); the solver itself accepts any
    finite inputs with non-zero columns.
    """
    X, y = _check_problem(dictionary, target, alpha)
    w = _lars_gram(X.T @ X, X.T @ y, 0.5 * alpha)
    return _as_sparse_code(X, y, w, alpha)


def coordinate_descent_oracle(
    dictionary,
    target,
    alpha: float,
    tol: float = 1e-12,
    max_sweeps: int = 1_000_000,
) -> SparseCode:
    """Cyclic coordinate descent with soft-thresholding on the same objective.

    Independent cross-check for :func:`lasso_lars`; iterates until the
    largest coefficient change in a sweep drops below ``tol``.
    """
    X, y = _check_problem(dictionary, target, alpha)
    n = X.shape[1]
    gram = X.T @ X
    b = X.T @ y
    diag = np.diag(gram).copy()
    lam = 0.5 * alpha

    w = np.zeros(n)
    c = b.copy()  # X^T (y - Xw), maintained incrementally
    for sweep in range(max_sweeps):
        delta = 0.0
        for j in range(n):
            wj = w[j]
            rho = c[j] + diag[j] * wj
            wj_new = np.sign(rho) * max(abs(rho) - lam, 0.0) / diag[j]
            step = wj_new - wj
            if step != 0.0:
                c -= gram[:, j] * step
                w[j] = wj_new
                delta = max(delta, abs(step))
        if delta < tol:
            return _as_sparse_code(X, y, w, alpha)
        if (sweep + 1) % 256 == 0:  # curb drift in the incremental correlations
            c = b - gram @ w
    raise ConvergenceError(f"coordinate descent did not converge within {max_sweeps} sweeps")


def unit_normalized(matrix: np.ndarray, *, what: str = "matrix") -> np.ndarray:
    """Scale columns to unit L2 norm; zero-norm columns are an error."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim == 1:
        m = m.reshape(-1, 1)
    norms = np.linalg.norm(m, axis=0)
    if np.any(norms == 0.0):
        raise ZeroNormError(f"{what} contains a zero-norm vector; cannot normalize")
    if not np.all(np.isfinite(norms)):
        raise NumericalError(f"{what} contains non-finite values")
    return m / norms


def _query_matrix(query) -> np.ndarray:
    if isinstance(query, Query):
        return query.features
    return np.asarray(query, dtype=np.float64)


def rscr_i2t(query_vec, gallery_track: TrackFeatures, alpha: float = 1.0) -> float:
    """Squared residual of reconstructing one query image from a track.

    Both the query vector and the track columns are unit-normalized before
    solving, so an unreconstructable query yields exactly 1.0.
    """
    X = unit_normalized(gallery_track.matrix, what=f"track {gallery_track.track_id!r}")
    y = unit_normalized(np.asarray(query_vec, dtype=np.float64).reshape(-1, 1), what="query")[:, 0]
    if X.shape[0] != y.shape[0]:
        raise DimensionMismatchError(
            f"query dimension {y.shape[0]} != track dimension {X.shape[0]}"
        )
    code = lasso_lars(X, y, alpha)
    if code.support.size == 0:
        return 1.0  # residual is the normalized query itself; its norm is 1 by contract
    r = y - X @ code.coefficients
    return float(r @ r)


def rscr_t2t(query, gallery_track: TrackFeatures, alpha: float = 1.0) -> float:
    """Track-to-track reconstruction distance: Frobenius norm of the residual.

    Solves the single-image problem independently for each query column and
    returns the (unsquared) Frobenius norm, i.e. sqrt of the summed squared
    per-column residuals. For a one-image query this is sqrt(rscr_i2t).
    """
    Q = _query_matrix(query)
    total = 0.0
    for j in range(Q.shape[1]):
        total += rscr_i2t(Q[:, j], gallery_track, alpha)
    return float(np.sqrt(total))
