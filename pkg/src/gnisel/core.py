"""Shared domain types and elementary matrix operations.

Columns are variables and rows are observations throughout. Vertex indices
are 0-based; file formats translate at the boundary (see :mod:`gnisel.io`).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Union

import numpy as np
from numpy.typing import NDArray

# Columns whose sample sd falls below this are treated as constant.
DEGENERATE_SD = 1e-12
STANDARDIZED_TOL = 1e-8
SYMMETRY_TOL = 1e-10

Role = Literal["covariance", "precision", "sample-covariance"]


def _frozen(a: NDArray) -> NDArray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """An n x p observation matrix.

    Attributes:
        values: Read-only (n, p) float array.
        standardized: Whether columns have zero mean and unit sample sd.
        degenerate_columns: Columns that were constant when standardized and
            have been replaced by zeros.
    """

    values: NDArray[np.float64]
    standardized: bool = False
    degenerate_columns: frozenset[int] = frozenset()

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError(f"data must be a 2-d matrix, got ndim={values.ndim}")
        n, p = values.shape
        if n < 2 or p < 2:
            raise ValueError(f"data must have n >= 2 and p >= 2, got {n}x{p}")
        if not np.all(np.isfinite(values)):
            raise ValueError("data contains non-finite entries")
        if self.standardized:
            keep = np.setdiff1d(np.arange(p), sorted(self.degenerate_columns))
            cols = values[:, keep]
            if cols.size and (
                np.max(np.abs(cols.mean(axis=0))) > STANDARDIZED_TOL
                or np.max(np.abs(cols.std(axis=0, ddof=1) - 1.0)) > STANDARDIZED_TOL
            ):
                raise ValueError("data flagged standardized but columns are not")
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "degenerate_columns", frozenset(self.degenerate_columns))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class AdjacencyGraph:
    """Symmetric 0/1 adjacency matrix with an empty diagonal."""

    entries: NDArray[np.uint8]

    def __post_init__(self) -> None:
        raw = np.asarray(self.entries)
        if raw.ndim != 2 or raw.shape[0] != raw.shape[1]:
            raise ValueError(f"adjacency must be square, got shape {raw.shape}")
        if not np.all((raw == 0) | (raw == 1)):
            raise ValueError("adjacency entries must be 0 or 1")
        entries = raw.astype(np.uint8)
        if not np.array_equal(entries, entries.T):
            raise ValueError("adjacency must be symmetric")
        if np.any(np.diagonal(entries)):
            raise ValueError("adjacency must have a zero diagonal (no self-loops)")
        object.__setattr__(self, "entries", _frozen(entries))

    @property
    def p(self) -> int:
        return self.entries.shape[0]

    @property
    def edge_count(self) -> int:
        return int(self.entries.sum()) // 2

    def degrees(self) -> NDArray[np.int64]:
        return self.entries.sum(axis=0, dtype=np.int64)

    def edges(self) -> list[tuple[int, int]]:
        """Sorted list of (k, l) pairs with k < l."""
        k, l = np.nonzero(np.triu(self.entries, 1))
        return list(zip(k.tolist(), l.tolist()))

    @classmethod
    def empty(cls, p: int) -> AdjacencyGraph:
        return cls(np.zeros((p, p), dtype=np.uint8))

    @classmethod
    def complete(cls, p: int) -> AdjacencyGraph:
        return cls(1 - np.eye(p, dtype=np.uint8))

    @classmethod
    def from_edges(cls, p: int, edges) -> AdjacencyGraph:
        a = np.zeros((p, p), dtype=np.uint8)
        for k, l in edges:
            if k == l:
                raise ValueError(f"self-loop at vertex {k}")
            a[k, l] = a[l, k] = 1
        return cls(a)

    def relabel(self, perm) -> AdjacencyGraph:
        """Graph with vertex ``perm[i]`` of the original placed at index ``i``."""
        perm = np.asarray(perm)
        return AdjacencyGraph(self.entries[np.ix_(perm, perm)])


@dataclass(frozen=True, eq=False)
class SymMatrix:
    """Real symmetric p x p matrix tagged with its statistical role."""

    entries: NDArray[np.float64]
    role: Role = "covariance"

    def __post_init__(self) -> None:
        a = np.array(self.entries, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"matrix must be square, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix contains non-finite entries")
        if np.max(np.abs(a - a.T), initial=0.0) > SYMMETRY_TOL:
            raise ValueError("matrix is not symmetric")
        if self.role == "precision":
            try:
                np.linalg.cholesky(a)
            except np.linalg.LinAlgError:
                raise ValueError("precision matrix is not positive definite") from None
        object.__setattr__(self, "entries", _frozen(a))

    @property
    def p(self) -> int:
        return self.entries.shape[0]


MatrixLike = Union[SymMatrix, NDArray[np.float64]]


def as_array(m: MatrixLike) -> NDArray[np.float64]:
    return m.entries if isinstance(m, SymMatrix) else np.asarray(m, dtype=np.float64)


def standardize(data: Dataset | NDArray) -> Dataset:
    """Center each column and scale it to unit sample sd (denominator n-1).

    Constant columns (sd < 1e-12) become all zeros and are listed in
    ``degenerate_columns`` of the result.
    """
    x = data.values if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("standardize needs a 2-d matrix with at least 2 rows")
    if not np.all(np.isfinite(x)):
        raise ValueError("data contains non-finite entries")
    centered = x - x.mean(axis=0)
    sd = centered.std(axis=0, ddof=1)
    degenerate = sd < DEGENERATE_SD
    out = np.divide(centered, sd, out=np.zeros_like(centered), where=~degenerate)
    return Dataset(
        out,
        standardized=True,
        degenerate_columns=frozenset(np.flatnonzero(degenerate).tolist()),
    )


def sample_covariance(data: Dataset) -> SymMatrix:
    """``X'X / (n - 1)`` of standardized data, i.e. the sample correlation."""
    if not data.standardized:
        raise ValueError("sample_covariance requires standardized data")
    x = data.values
    s = x.T @ x / (data.n - 1)
    s = (s + s.T) / 2
    return SymMatrix(s, role="sample-covariance")


def neighbors(graph: AdjacencyGraph, w: int) -> set[int]:
    if not 0 <= w < graph.p:
        raise IndexError(f"vertex {w} out of range for p={graph.p}")
    return set(np.flatnonzero(graph.entries[:, w]).tolist())


def neighbor_weights(graph: AdjacencyGraph) -> NDArray[np.float64]:
    """Reciprocal degrees, with 1 standing in for isolated vertices."""
    deg = graph.degrees().astype(np.float64)
    return np.where(deg > 0, 1.0 / np.maximum(deg, 1.0), 1.0)
