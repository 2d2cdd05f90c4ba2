"""Ground-truth graphs, sparse precision matrices and Gaussian samples.

Randomness comes from numpy's ``Generator`` with the PCG64 bit generator,
seeded directly by the caller's integer seed. Normal variates are drawn with
``Generator.standard_normal``, which uses the ziggurat method. Results are
reproducible on a fixed numpy build.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from .core import AdjacencyGraph, Dataset, MatrixLike, SymMatrix, as_array

GraphKind = Literal["random", "hub"]


def rng_for(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def default_edge_prob(p: int) -> float:
    return min(1.0, 3.0 / p)


def default_hub_count(p: int) -> int:
    return max(1, math.ceil(p / 20))


@dataclass(frozen=True)
class GraphSpec:
    kind: GraphKind
    p: int
    edge_prob: Optional[float] = None
    hub_count: Optional[int] = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("random", "hub"):
            raise ValueError(f"unknown graph kind {self.kind!r}")
        if self.p < 2:
            raise ValueError("p must be at least 2")
        if self.kind == "random" and self.edge_prob is not None:
            if not 0 < self.edge_prob <= 1:
                raise ValueError(f"edge_prob must lie in (0, 1], got {self.edge_prob}")
        if self.kind == "hub" and self.hub_count is not None:
            if not 1 <= self.hub_count <= self.p:
                raise ValueError(f"hub_count must lie in [1, p], got {self.hub_count}")

    def build(self) -> AdjacencyGraph:
        if self.kind == "random":
            prob = default_edge_prob(self.p) if self.edge_prob is None else self.edge_prob
            return gen_random_graph(self.p, prob, self.seed)
        hubs = default_hub_count(self.p) if self.hub_count is None else self.hub_count
        return gen_hub_graph(self.p, hubs, self.seed)


@dataclass(frozen=True)
class PrecisionParams:
    """Off-diagonal magnitude ``v`` and diagonal augmentation ``u``."""

    v: float = 0.3
    u: float = 0.1

    def __post_init__(self) -> None:
        if not self.v > 0:
            raise ValueError("v must be positive")
        if not self.u >= 0:
            raise ValueError("u must be non-negative")


def gen_random_graph(p: int, edge_prob: float, seed: int) -> AdjacencyGraph:
    """Erdos-Renyi graph: each unordered pair is an edge with ``edge_prob``."""
    if p < 2:
        raise ValueError("p must be at least 2")
    if not 0 <= edge_prob <= 1:
        raise ValueError(f"edge_prob must lie in [0, 1], got {edge_prob}")
    rng = rng_for(seed)
    u = rng.random((p, p))
    upper = np.triu(u < edge_prob, 1)
    return AdjacencyGraph((upper | upper.T).astype(np.uint8))


def gen_hub_graph(p: int, hub_count: int, seed: int = 0) -> AdjacencyGraph:
    """Disjoint stars over contiguous, near-equal index blocks.

    The first index of each block is its hub. The construction is fully
    determined by ``(p, hub_count)``; ``seed`` is accepted for a uniform
    generator signature.
    """
    if p < 2:
        raise ValueError("p must be at least 2")
    if not 1 <= hub_count <= p:
        raise ValueError(f"hub_count must lie in [1, p], got {hub_count}")
    a = np.zeros((p, p), dtype=np.uint8)
    for block in np.array_split(np.arange(p), hub_count):
        hub, leaves = block[0], block[1:]
        a[hub, leaves] = 1
        a[leaves, hub] = 1
    return AdjacencyGraph(a)


def precision_from_graph(
    graph: AdjacencyGraph, params: PrecisionParams = PrecisionParams()
) -> SymMatrix:
    """``v*A`` shifted by ``|lambda_min(v*A)| + 0.1 + u`` on the diagonal."""
    va = params.v * graph.entries.astype(np.float64)
    lam_min = np.linalg.eigvalsh(va)[0]
    theta = va + (abs(lam_min) + 0.1 + params.u) * np.eye(graph.p)
    return SymMatrix(theta, role="precision")


def covariance_from_precision(theta: MatrixLike, rescale: bool = True) -> SymMatrix:
    """Invert a precision matrix and, by default, rescale to unit diagonal."""
    t = as_array(theta)
    try:
        chol = np.linalg.cholesky(t)
    except np.linalg.LinAlgError:
        raise ValueError("precision matrix is not positive definite") from None
    inv_chol = np.linalg.inv(chol)
    sigma = inv_chol.T @ inv_chol
    sigma = (sigma + sigma.T) / 2
    if rescale:
        scale = 1.0 / np.sqrt(np.diagonal(sigma))
        sigma = sigma * np.outer(scale, scale)
        np.fill_diagonal(sigma, 1.0)
    return SymMatrix(sigma, role="covariance")


def sample_gaussian(sigma: MatrixLike, n: int, seed: int) -> Dataset:
    """Draw ``n`` rows ``Z @ L.T`` with ``L`` the lower Cholesky factor of sigma."""
    s = as_array(sigma)
    try:
        chol = np.linalg.cholesky(s)
    except np.linalg.LinAlgError:
        raise ValueError("covariance matrix is not positive definite") from None
    z = rng_for(seed).standard_normal((n, s.shape[0]))
    return Dataset(z @ chol.T)


@dataclass(frozen=True, eq=False)
class SyntheticProblem:
    truth: AdjacencyGraph
    theta: SymMatrix
    sigma: SymMatrix
    data: Dataset


def generate(
    spec: GraphSpec,
    n: int,
    sample_seed: int,
    params: PrecisionParams = PrecisionParams(),
) -> SyntheticProblem:
    truth = spec.build()
    theta = precision_from_graph(truth, params)
    sigma = covariance_from_precision(theta)
    return SyntheticProblem(truth, theta, sigma, sample_gaussian(sigma, n, sample_seed))
