"""Graphical neighbour information (GNI) scoring and selection.

A graph is scored on the bootstrap difference matrix ``Xb``: each column is
predicted by the mean of its neighbours' columns (isolated vertices predict
0), and the score is how much lower that predictor's mean squared error is
than the expected error of the same predictions shuffled across columns
within each row. The expectation over shuffles is exact and closed form, so
no permutations are ever drawn.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numba import njit
from numpy.typing import NDArray
from scipy import sparse

from .core import AdjacencyGraph, Dataset, neighbor_weights, standardize
from .synthgen import rng_for

DEFAULT_M_CAP = 10_000


@dataclass(frozen=True, eq=False)
class DiffMatrix:
    """Column-standardized absolute differences of paired bootstrap rows."""

    values: NDArray[np.float64]
    source_n: int
    seed: int
    degenerate_columns: frozenset[int] = frozenset()

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class GniScore:
    total: float
    mse_model: float
    expected_mse_random: float
    graph_id: str = ""


@dataclass(frozen=True, eq=False)
class GniSelection:
    index: int
    scores: tuple[GniScore, ...]
    diff: DiffMatrix

    @property
    def totals(self) -> list[float]:
        return [s.total for s in self.scores]


def default_m(n: int, cap: int = DEFAULT_M_CAP) -> int:
    return min(n * n, cap)


def build_diff_matrix(data: Dataset | NDArray, m: Optional[int] = None, seed: int = 0) -> DiffMatrix:
    """Sample ``m`` row pairs with replacement and standardize ``|x_i1 - x_i2|``.

    Pairs with ``i1 == i2`` are kept. ``m`` defaults to ``min(n**2, 10000)``.
    """
    x = data.values if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
    n = x.shape[0]
    if n < 2:
        raise ValueError("need at least 2 observations")
    if m is None:
        m = default_m(n)
    if m < 2:
        raise ValueError(f"m must be at least 2, got {m}")
    rng = rng_for(seed)
    i1 = rng.integers(0, n, size=m)
    i2 = rng.integers(0, n, size=m)
    raw = np.abs(x[i1] - x[i2])
    std = standardize(raw)
    return DiffMatrix(std.values, source_n=n, seed=seed, degenerate_columns=std.degenerate_columns)


def _check_dims(xb: DiffMatrix, graph: AdjacencyGraph) -> None:
    if graph.p != xb.p:
        raise ValueError(f"graph has {graph.p} vertices but Xb has {xb.p} columns")


def neighbor_predict(xb: DiffMatrix, graph: AdjacencyGraph) -> NDArray[np.float64]:
    """Predict every column of Xb by the mean of its neighbour columns."""
    _check_dims(xb, graph)
    adj = sparse.csc_matrix(graph.entries, dtype=np.float64)
    # adj is symmetric, so (adj @ xb.T).T == xb @ adj with a sparse left operand
    summed = np.asarray((adj @ xb.values.T).T)
    return summed * neighbor_weights(graph)


def mse_model(xhat: NDArray, xb: DiffMatrix) -> float:
    x = xb.values
    if xhat.shape != x.shape:
        raise ValueError("prediction and Xb shapes differ")
    return float(np.mean((xhat - x) ** 2))


def expected_mse_random(xhat: NDArray, xb: DiffMatrix) -> float:
    """Mean over rows of the expected MSE under a uniform column shuffle of xhat."""
    x = xb.values
    if xhat.shape != x.shape:
        raise ValueError("prediction and Xb shapes differ")
    if x.shape[1] < 2:
        raise ValueError("need at least 2 columns")
    per_row = (
        np.mean(xhat**2, axis=1)
        + np.mean(x**2, axis=1)
        - 2.0 * xhat.mean(axis=1) * x.mean(axis=1)
    )
    return float(per_row.mean())


@njit(cache=True, nogil=True)
def _row_moments(x, indptr, indices, weights):
    """Per-row sums needed by the score, without materializing the prediction.

    Columns of the result: sum xhat, sum x, sum xhat^2, sum x^2, sum xhat*x,
    sum (xhat - x)^2.
    """
    m, p = x.shape
    out = np.zeros((m, 6))
    for i in range(m):
        sh = sx = shh = sxx = shx = sd = 0.0
        for w in range(p):
            acc = 0.0
            for t in range(indptr[w], indptr[w + 1]):
                acc += x[i, indices[t]]
            h = acc * weights[w]
            v = x[i, w]
            sh += h
            sx += v
            shh += h * h
            sxx += v * v
            shx += h * v
            sd += (h - v) * (h - v)
        out[i, 0] = sh
        out[i, 1] = sx
        out[i, 2] = shh
        out[i, 3] = sxx
        out[i, 4] = shx
        out[i, 5] = sd
    return out


def gni_score(xb: DiffMatrix, graph: AdjacencyGraph, graph_id: str = "") -> GniScore:
    """Score one graph; ``total`` uses the two-Hadamard-product closed form.

    One pass over the rows of Xb gathers every moment, so the cost is
    O(m (p + |E|)) and no m x p prediction matrix is allocated.
    """
    _check_dims(xb, graph)
    if xb.p < 2:
        raise ValueError("need at least 2 columns")
    adj = sparse.csr_matrix(graph.entries)
    mom = _row_moments(
        np.ascontiguousarray(xb.values), adj.indptr.astype(np.int64),
        adj.indices.astype(np.int64), neighbor_weights(graph),
    )
    m, p = xb.m, xb.p
    sh, sx, shh, sxx, shx, sd = mom.T
    return GniScore(
        total=float(2.0 / m * np.sum(shx / p - sh * sx / (p * p))),
        mse_model=float(sd.sum() / (m * p)),
        expected_mse_random=float(np.mean(shh / p + sxx / p - 2.0 * (sh / p) * (sx / p))),
        graph_id=graph_id,
    )


def node_gni(xb: DiffMatrix, graph: AdjacencyGraph) -> NDArray[np.float64]:
    """Per-vertex share of the score; the entries sum to ``gni_score(...).total``."""
    xhat = neighbor_predict(xb, graph)
    x = xb.values
    m, p = x.shape
    centered = x - x.mean(axis=1, keepdims=True)
    return 2.0 / (m * p) * np.einsum("ij,ij->j", xhat, centered)


def argmax_sparsest(scores: Sequence[float], edge_counts: Sequence[int]) -> int:
    """Index of the best score; ties go to fewer edges, then the earlier index."""
    best = max(scores)
    tied = [i for i, s in enumerate(scores) if s == best]
    return min(tied, key=lambda i: (edge_counts[i], i))


def select_gni(
    data: Dataset,
    path,
    m: Optional[int] = None,
    seed: int = 0,
) -> GniSelection:
    """Score every candidate on one shared DiffMatrix and pick the maximum.

    ``path`` is a :class:`~gnisel.glasso.CandidatePath` or any sequence of
    :class:`AdjacencyGraph`.
    """
    graphs = list(getattr(path, "adjacencies", path))
    if not graphs:
        raise ValueError("candidate path is empty")
    xb = build_diff_matrix(data, m, seed)
    scores = tuple(gni_score(xb, g, graph_id=str(i)) for i, g in enumerate(graphs))
    index = argmax_sparsest([s.total for s in scores], [g.edge_count for g in graphs])
    return GniSelection(index, scores, xb)


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: float
    std_error: float
    draws: int


def pair_discrepancy(r: float, noise_sd: float, draws: int = 100_000, seed: int = 0) -> MonteCarloEstimate:
    """Estimate ``E[(|dX_w| - |dX_k|)^2]`` for ``X_w = r X_k + eps`` scaled to unit variance.

    ``dX`` is the difference between two independent draws, so the estimate
    is the mean squared gap between one absolute-difference column and its
    neighbour's. Stronger dependence (larger ``|r|``) drives it toward 0.
    """
    if noise_sd <= 0:
        raise ValueError("noise_sd must be positive")
    if draws < 2:
        raise ValueError("need at least 2 draws")
    rng = rng_for(seed)
    xk = rng.standard_normal((draws, 2))
    eps = noise_sd * rng.standard_normal((draws, 2))
    xw = (r * xk + eps) / np.sqrt(r * r + noise_sd * noise_sd)
    gap = (np.abs(xw[:, 0] - xw[:, 1]) - np.abs(xk[:, 0] - xk[:, 1])) ** 2
    return MonteCarloEstimate(float(gap.mean()), float(gap.std(ddof=1) / np.sqrt(draws)), draws)
