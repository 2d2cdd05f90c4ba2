"""Graphical lasso by block coordinate descent, and regularization paths.

The solver follows Friedman, Hastie and Tibshirani (2008): it works on the
covariance estimate ``W``, starts from ``W = S + lam*I`` (the diagonal is
penalized, so ``W_jj = S_jj + lam`` throughout) and, column by column, solves
the lasso subproblem

    min_b  0.5 b' W11 b - s12' b + lam * ||b||_1

by cyclic coordinate descent with an active-set inner loop, then sets
``w12 = W11 b``. Before solving, the problem is split into the connected
components of ``|S_jk| > lam``; the glasso solution is block diagonal over
those components, so each block is solved on its own and singletons are
closed form.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numba import njit
from numpy.typing import NDArray
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .core import AdjacencyGraph, MatrixLike, SymMatrix, as_array

logger = logging.getLogger(__name__)

EDGE_THRESHOLD = 1e-8


class GlassoError(RuntimeError):
    """Solver failure at a specific regularization value."""

    def __init__(self, message: str, lam: float):
        super().__init__(f"{message} (lambda={lam:.17g})")
        self.lam = lam


class DegenerateGridError(ValueError):
    pass


@dataclass(frozen=True)
class LambdaGrid:
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.size == 0:
            raise ValueError("lambda grid is empty")
        if np.any(v <= 0) or np.any(np.diff(v) >= 0):
            raise ValueError("lambda grid must be positive and strictly decreasing")
        object.__setattr__(self, "values", tuple(float(x) for x in v))

    @property
    def count(self) -> int:
        return len(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __getitem__(self, i):
        return self.values[i]


@dataclass(frozen=True, eq=False)
class GlassoFit:
    lam: float
    theta: SymMatrix
    w: SymMatrix
    iterations: int
    converged: bool
    loglik: Optional[float] = None
    objective_trace: Optional[tuple[float, ...]] = None


@dataclass(frozen=True, eq=False)
class CandidatePath:
    fits: tuple[GlassoFit, ...]
    adjacencies: tuple[AdjacencyGraph, ...]
    source_data_id: str = ""

    def __post_init__(self) -> None:
        if len(self.fits) != len(self.adjacencies):
            raise ValueError("one adjacency per fit is required")

    def __len__(self) -> int:
        return len(self.fits)

    @property
    def lambdas(self) -> list[float]:
        return [f.lam for f in self.fits]

    @property
    def edge_counts(self) -> list[int]:
        return [a.edge_count for a in self.adjacencies]


def max_offdiag(s: MatrixLike) -> float:
    s = as_array(s)
    off = np.abs(s - np.diag(np.diagonal(s)))
    return float(off.max())


def lambda_grid(s: MatrixLike, count: int = 30, ratio: float = 0.1) -> LambdaGrid:
    """Log-spaced grid from ``max|S_jk|`` down to ``ratio`` times that."""
    if count < 1:
        raise ValueError("count must be positive")
    if not 0 < ratio < 1:
        raise ValueError("ratio must lie in (0, 1)")
    lam_max = max_offdiag(as_array(s))
    if lam_max <= 0:
        raise DegenerateGridError("all off-diagonal entries of S are zero")
    if count == 1:
        return LambdaGrid((lam_max,))
    k = np.arange(count)
    return LambdaGrid(tuple(lam_max * ratio ** (k / (count - 1))))


@njit(cache=True, nogil=True)
def _lasso_update(S, W, b, wb, j, k, lam):
    # One coordinate step for column j, coefficient k. Returns |delta|.
    wkk = W[k, k]
    old = b[k]
    r = S[j, k] - wb[k] + wkk * old
    if r > lam:
        new = (r - lam) / wkk
    elif r < -lam:
        new = (r + lam) / wkk
    else:
        new = 0.0
    if new == old:
        return 0.0
    d = new - old
    b[k] = new
    row = W[k]
    for l in range(wb.shape[0]):
        wb[l] += d * row[l]
    return abs(d)


@njit(cache=True, nogil=True)
def _sweep(S, W, B, lam, inner_tol, inner_max_iter):
    """One outer sweep over all columns; updates W and B in place.

    Row ``j`` of ``B`` holds the lasso coefficients of column ``j``
    (``B[j, j]`` is unused and kept at 0). Returns the summed absolute change
    of the off-diagonal entries of W.
    """
    p = S.shape[0]
    wb = np.empty(p)
    active = np.empty(p, np.int64)
    dw = 0.0
    for j in range(p):
        b = B[j]
        wb[:] = 0.0
        for l in range(p):
            if l != j and b[l] != 0.0:
                row = W[l]
                bl = b[l]
                for k in range(p):
                    wb[k] += bl * row[k]
        used = 0
        while used < inner_max_iter:
            dlx = 0.0
            for k in range(p):
                if k != j:
                    d = _lasso_update(S, W, b, wb, j, k, lam)
                    if d > dlx:
                        dlx = d
            used += 1
            if dlx < inner_tol:
                break
            na = 0
            for k in range(p):
                if k != j and b[k] != 0.0:
                    active[na] = k
                    na += 1
            while used < inner_max_iter:
                dlx = 0.0
                for t in range(na):
                    d = _lasso_update(S, W, b, wb, j, active[t], lam)
                    if d > dlx:
                        dlx = d
                used += 1
                if dlx < inner_tol:
                    break
        for k in range(p):
            if k != j:
                dw += abs(W[j, k] - wb[k])
                W[j, k] = wb[k]
                W[k, j] = wb[k]
    return dw


@njit(cache=True, nogil=True)
def _theta_from(W, B):
    # Precision estimate implied by the current coefficients; 0 flags failure.
    p = W.shape[0]
    theta = np.zeros((p, p))
    for j in range(p):
        acc = W[j, j]
        for k in range(p):
            if k != j:
                acc -= W[j, k] * B[j, k]
        if not acc > 0.0:
            return theta, False
        tjj = 1.0 / acc
        theta[j, j] = tjj
        for k in range(p):
            if k != j:
                theta[k, j] = -B[j, k] * tjj
    return theta, True


def _symmetrize(theta: NDArray) -> NDArray:
    return (theta + theta.T) / 2


def penalized_objective(theta: NDArray, s: NDArray, lam: float) -> float:
    """``log det T - tr(S T) - lam * ||T||_1`` with the diagonal penalized.

    Equivalently the off-diagonal-penalized objective on ``S + lam*I``.
    """
    sign, logdet = np.linalg.slogdet(theta)
    if sign <= 0:
        return -np.inf
    return float(logdet - np.sum(s * theta) - lam * np.abs(theta).sum())


def _solve_block(s, lam, w0, b0, tol, max_iter, inner_tol, inner_max_iter, trace):
    p = s.shape[0]
    w = np.ascontiguousarray(w0, dtype=np.float64)
    b = np.ascontiguousarray(b0, dtype=np.float64)
    w[np.diag_indices(p)] = np.diagonal(s) + lam
    shr = np.abs(s - np.diag(np.diagonal(s))).sum() / (p * (p - 1))
    objectives = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        dw = _sweep(s, w, b, lam, inner_tol, inner_max_iter)
        if trace:
            th, ok = _theta_from(w, b)
            objectives.append(
                penalized_objective(_symmetrize(th), s, lam) if ok else -np.inf
            )
        if dw / (p * (p - 1)) < tol * shr:
            converged = True
            break
    theta, ok = _theta_from(w, b)
    if not ok:
        raise GlassoError("non-positive-definite update in block coordinate descent", lam)
    return _symmetrize(theta), it, converged, objectives


def glasso_fit(
    s: MatrixLike,
    lam: float,
    tol: float = 1e-4,
    max_iter: int = 100,
    warm_start: Optional[GlassoFit] = None,
    *,
    inner_tol: float = 1e-6,
    inner_max_iter: int = 1000,
    n: Optional[int] = None,
    screen: bool = True,
    trace: bool = False,
) -> GlassoFit:
    """Fit the graphical lasso at a single ``lam``.

    Converged means the mean absolute change of the off-diagonal of W over a
    sweep fell below ``tol`` times the mean absolute off-diagonal of S. A fit
    that hits ``max_iter`` is returned with ``converged=False``.

    The returned ``w`` is the exact inverse of the returned ``theta``. When
    ``n`` is given the profile log-likelihood is stored in ``loglik``. With
    ``trace=True`` (and ``screen=False``) the penalized objective after each
    sweep is kept in ``objective_trace``.
    """
    s = as_array(s)
    p = s.shape[0]
    if not lam > 0:
        raise ValueError("lambda must be positive")
    off = np.abs(s) > lam
    np.fill_diagonal(off, False)
    if screen:
        ncomp, labels = connected_components(csr_matrix(off), directed=False)
        blocks = [np.flatnonzero(labels == c) for c in range(ncomp)]
    else:
        blocks = [np.arange(p)]

    theta = np.zeros((p, p))
    iterations = 0
    converged = True
    trace_values: list[float] = []
    for idx in blocks:
        if idx.size == 1:
            j = idx[0]
            theta[j, j] = 1.0 / (s[j, j] + lam)
            continue
        sub = s[np.ix_(idx, idx)]
        if warm_start is not None:
            w0 = warm_start.w.entries[np.ix_(idx, idx)].copy()
            t_prev = warm_start.theta.entries[np.ix_(idx, idx)]
            b0 = -(t_prev / np.diagonal(t_prev)[np.newaxis, :]).T.copy()
            np.fill_diagonal(b0, 0.0)
        else:
            w0 = sub.copy()
            b0 = np.zeros_like(sub)
        th, it, conv, objs = _solve_block(
            sub, lam, w0, b0, tol, max_iter, inner_tol, inner_max_iter, trace
        )
        theta[np.ix_(idx, idx)] = th
        iterations = max(iterations, it)
        converged = converged and conv
        trace_values.extend(objs)

    try:
        chol = np.linalg.cholesky(theta)
    except np.linalg.LinAlgError:
        raise GlassoError("precision estimate is not positive definite", lam) from None
    inv_chol = np.linalg.inv(chol)
    w = inv_chol.T @ inv_chol
    w = (w + w.T) / 2
    theta_m = SymMatrix(theta, role="precision")
    loglik = None
    if n is not None:
        logdet = 2.0 * np.log(np.diagonal(chol)).sum()
        loglik = 0.5 * n * (logdet - float(np.sum(s * theta)))
    if not converged:
        logger.warning("glasso did not converge in %d sweeps at lambda=%.6g", max_iter, lam)
    return GlassoFit(
        lam=float(lam),
        theta=theta_m,
        w=SymMatrix(w, role="covariance"),
        iterations=iterations,
        converged=converged,
        loglik=loglik,
        objective_trace=tuple(trace_values) if trace else None,
    )


def adjacency_from_precision(theta: MatrixLike, threshold: float = EDGE_THRESHOLD) -> AdjacencyGraph:
    t = as_array(theta)
    a = (np.abs(t) > threshold).astype(np.uint8)
    np.fill_diagonal(a, 0)
    return AdjacencyGraph(a | a.T)


def gaussian_loglik(theta: MatrixLike, s: MatrixLike, n: int) -> float:
    """``(n/2) * (log det theta - tr(S theta))`` with constants dropped."""
    t, sm = as_array(theta), as_array(s)
    try:
        chol = np.linalg.cholesky(t)
    except np.linalg.LinAlgError:
        raise ValueError("theta is not positive definite") from None
    logdet = 2.0 * np.log(np.diagonal(chol)).sum()
    return 0.5 * n * (logdet - float(np.sum(sm * t)))


def kkt_residual(fit: GlassoFit, s: MatrixLike) -> float:
    """Largest violation of the off-diagonal optimality conditions.

    Off the support ``|W_jk - S_jk| <= lam``; on it
    ``W_jk - S_jk = lam * sign(theta_jk)``, the stationarity condition of
    the maximized objective.
    """
    sm = as_array(s)
    w, t = fit.w.entries, fit.theta.entries
    g = w - sm
    on = np.abs(t) > EDGE_THRESHOLD
    offdiag = ~np.eye(sm.shape[0], dtype=bool)
    viol_on = np.abs(g - fit.lam * np.sign(t))[on & offdiag]
    viol_off = np.maximum(np.abs(g) - fit.lam, 0.0)[~on & offdiag]
    return float(max(viol_on.max(initial=0.0), viol_off.max(initial=0.0)))


def glasso_path(
    s: MatrixLike,
    grid: LambdaGrid | Sequence[float],
    *,
    n: Optional[int] = None,
    warm: bool = True,
    source_data_id: str = "",
    **fit_options,
) -> CandidatePath:
    """Fit every grid value from largest to smallest, warm-starting each fit."""
    s = as_array(s)
    fits: list[GlassoFit] = []
    prev = None
    for lam in grid:
        fit = glasso_fit(s, lam, warm_start=prev if warm else None, n=n, **fit_options)
        fits.append(fit)
        prev = fit
    adjacencies = [adjacency_from_precision(f.theta) for f in fits]
    counts = [a.edge_count for a in adjacencies]
    for i in range(1, len(counts)):
        if counts[i] < counts[i - 1]:
            logger.info(
                "edge count fell from %d to %d at lambda=%.6g",
                counts[i - 1], counts[i], fits[i].lam,
            )
    return CandidatePath(tuple(fits), tuple(adjacencies), source_data_id)
