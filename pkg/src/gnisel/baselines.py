"""Comparison selectors: EBIC, StARS and RIC."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from .core import AdjacencyGraph, Dataset, sample_covariance, standardize
from .glasso import (
    CandidatePath,
    GlassoFit,
    LambdaGrid,
    adjacency_from_precision,
    glasso_fit,
    max_offdiag,
)
from .gni import argmax_sparsest
from .synthgen import rng_for

EBIC_GAMMAS = (0.0, 0.5, 1.0)


def default_subsample_size(n: int) -> int:
    return int(math.floor(0.8 * n)) if n <= 144 else int(math.floor(10 * math.sqrt(n)))


@dataclass(frozen=True)
class EbicParams:
    gamma: float = 0.5

    def __post_init__(self) -> None:
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")


@dataclass(frozen=True)
class StarsParams:
    beta: float = 0.1
    num_subsamples: int = 25
    subsample_size: Optional[int] = None
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.beta < 1:
            raise ValueError("beta must lie in [0, 1)")
        if self.num_subsamples < 1:
            raise ValueError("num_subsamples must be positive")

    def size_for(self, n: int) -> int:
        size = default_subsample_size(n) if self.subsample_size is None else self.subsample_size
        if not 2 <= size < n:
            raise ValueError(f"subsample size must lie in [2, n), got {size} for n={n}")
        return size


@dataclass(frozen=True)
class RicParams:
    num_permutations: int = 20
    seed: int = 0

    def __post_init__(self) -> None:
        if self.num_permutations < 1:
            raise ValueError("num_permutations must be positive")


# --- EBIC -----------------------------------------------------------------


def ebic(fit: GlassoFit, n: int, p: int, gamma: float, edges: Optional[int] = None) -> float:
    """``-2 loglik + |E| log n + 4 |E| gamma log p``."""
    if fit.loglik is None:
        raise ValueError("fit has no log-likelihood; pass n to the solver")
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    if edges is None:
        edges = adjacency_from_precision(fit.theta).edge_count
    return -2.0 * fit.loglik + edges * math.log(n) + 4.0 * edges * gamma * math.log(p)


def ebic_scores(path: CandidatePath, n: int, p: int, gamma: float) -> list[float]:
    return [ebic(f, n, p, gamma, a.edge_count) for f, a in zip(path.fits, path.adjacencies)]


def select_ebic(path: CandidatePath, n: int, p: int, gamma: float) -> int:
    if len(path) == 0:
        raise ValueError("candidate path is empty")
    scores = ebic_scores(path, n, p, gamma)
    return argmax_sparsest([-s for s in scores], path.edge_counts)


# --- StARS ----------------------------------------------------------------


def subsample_indices(n: int, size: int, seed: int) -> NDArray[np.int64]:
    """``size`` distinct row indices drawn without replacement."""
    if not 2 <= size <= n:
        raise ValueError(f"subsample size must lie in [2, n], got {size} for n={n}")
    return rng_for(seed).choice(n, size=size, replace=False)


def stars_instability(edge_freqs: NDArray) -> float:
    """Mean of ``2 f (1 - f)`` over unordered vertex pairs."""
    f = np.asarray(edge_freqs, dtype=np.float64)
    p = f.shape[0]
    iu = np.triu_indices(p, 1)
    vals = f[iu]
    return float(np.mean(2.0 * vals * (1.0 - vals)))


@dataclass(frozen=True, eq=False)
class StarsSelection:
    index: int
    lam: float
    instability: tuple[float, ...]
    monotone_instability: tuple[float, ...]
    subsample_seeds: tuple[int, ...] = field(default=())


def _subsample_seeds(params: StarsParams) -> list[int]:
    ss = np.random.SeedSequence(params.seed)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in ss.spawn(params.num_subsamples)]


def select_stars(
    data: Dataset,
    grid: LambdaGrid | Sequence[float],
    params: StarsParams = StarsParams(),
    *,
    early_stop: bool = True,
    n_jobs: int = 1,
    **fit_options,
) -> StarsSelection:
    """Pick the least regularization whose monotonized instability is <= beta.

    Every subsample walks the grid from the largest lambda, warm-starting
    along its own path. The monotonized instability is a running maximum from
    the top of the grid, so once it exceeds ``beta`` no smaller lambda can be
    selected; with ``early_stop`` the remaining fits are skipped and their
    instabilities reported as NaN. If even the first lambda is unstable the
    first index is returned.
    """
    lams = list(grid)
    if not lams:
        raise ValueError("lambda grid is empty")
    n, p = data.n, data.p
    size = params.size_for(n)
    seeds = _subsample_seeds(params)
    covs = []
    for sd in seeds:
        rows = subsample_indices(n, size, sd)
        covs.append(sample_covariance(standardize(data.values[rows])).entries)

    prev: list[Optional[GlassoFit]] = [None] * len(covs)
    inst = [math.nan] * len(lams)
    mono = [math.nan] * len(lams)
    pool = ThreadPoolExecutor(n_jobs) if n_jobs > 1 else None

    def fit_one(i: int, lam: float) -> GlassoFit:
        return glasso_fit(covs[i], lam, warm_start=prev[i], **fit_options)

    selected = 0
    running = -math.inf
    try:
        for k, lam in enumerate(lams):
            if pool is None:
                fits = [fit_one(i, lam) for i in range(len(covs))]
            else:
                fits = list(pool.map(lambda i: fit_one(i, lam), range(len(covs))))
            prev = fits
            freq = np.zeros((p, p))
            for f in fits:
                freq += adjacency_from_precision(f.theta).entries
            freq /= len(fits)
            inst[k] = stars_instability(freq)
            running = max(running, inst[k])
            mono[k] = running
            if running <= params.beta:
                selected = k
            elif early_stop:
                break
    finally:
        if pool is not None:
            pool.shutdown()
    return StarsSelection(selected, lams[selected], tuple(inst), tuple(mono), tuple(seeds))


# --- RIC ------------------------------------------------------------------


def ric_lambda(data: Dataset, params: RicParams = RicParams()) -> float:
    """Mean over column-wise row permutations of the largest null correlation."""
    x = data.values if data.standardized else standardize(data).values
    n = x.shape[0]
    rng = rng_for(params.seed)
    maxima = []
    for _ in range(params.num_permutations):
        xp = rng.permuted(x, axis=0)
        s = xp.T @ xp / (n - 1)
        maxima.append(max_offdiag(s))
    return float(np.mean(maxima))


def select_ric(
    data: Dataset, params: RicParams = RicParams(), *, n: Optional[int] = None, **fit_options
) -> tuple[GlassoFit, AdjacencyGraph]:
    """Single glasso fit at the RIC lambda."""
    std = data if data.standardized else standardize(data)
    lam = ric_lambda(std, params)
    fit = glasso_fit(sample_covariance(std), lam, n=n, **fit_options)
    return fit, adjacency_from_precision(fit.theta)
