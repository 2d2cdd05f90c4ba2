"""Edge-recovery metrics, the oracle selector and the benchmark runner."""

from __future__ import annotations

import hashlib
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .baselines import (
    EBIC_GAMMAS,
    RicParams,
    StarsParams,
    ebic_scores,
    select_ric,
    select_stars,
)
from .core import AdjacencyGraph, Dataset, sample_covariance, standardize
from .glasso import CandidatePath, LambdaGrid, glasso_path, lambda_grid
from .gni import argmax_sparsest, select_gni
from .synthgen import GraphSpec, PrecisionParams, generate

logger = logging.getLogger(__name__)

CRITERIA = ("gni", "ebic", "stars", "ric")
KIND_ORDER = {"random": 0, "hub": 1}
CRITERION_ORDER = {"oracle": 0, "gni": 1, "ebic": 2, "stars": 3, "ric": 4, "*": 5}


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float
    shd: int


@dataclass(frozen=True)
class MetricsRecord:
    kind: str
    p: int
    replicate: int
    criterion: str
    gamma: Optional[float]
    lam: float
    edges: int
    precision: float
    recall: float
    f1: float
    shd: int
    runtime_seconds: float
    seed: int
    dataset_id: str
    status: str = "ok"

    def sort_key(self):
        return (
            KIND_ORDER.get(self.kind, 9),
            self.p,
            self.replicate,
            CRITERION_ORDER.get(self.criterion, 9),
            -1.0 if self.gamma is None else self.gamma,
        )


@dataclass(frozen=True)
class GniF1Row:
    kind: str
    p: int
    replicate: int
    candidate: int
    lam: float
    edges: int
    gni: float
    f1: float


@dataclass(frozen=True)
class BenchConfig:
    n: int = 50
    ps: tuple[int, ...] = (50, 200, 400)
    kinds: tuple[str, ...] = ("random", "hub")
    replicates: int = 5
    nlambda: int = 30
    lambda_ratio: float = 0.1
    criteria: tuple[str, ...] = CRITERIA
    master_seed: int = 0
    precision: PrecisionParams = PrecisionParams()
    edge_prob: Optional[float] = None
    hub_count: Optional[int] = None
    gni_m: Optional[int] = None
    stars_beta: float = 0.1
    stars_subsamples: int = 25
    stars_subsample_size: Optional[int] = None
    ric_permutations: int = 20
    ebic_gammas: tuple[float, ...] = EBIC_GAMMAS
    glasso_tol: float = 1e-4
    glasso_max_iter: int = 100
    glasso_inner_tol: float = 1e-6
    glasso_inner_max_iter: int = 1000
    jobs: int = 1

    def __post_init__(self) -> None:
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        unknown = set(self.criteria) - set(CRITERIA)
        if unknown:
            raise ValueError(f"unknown criteria: {sorted(unknown)}")
        bad = set(self.kinds) - set(KIND_ORDER)
        if bad:
            raise ValueError(f"unknown graph kinds: {sorted(bad)}")

    def fit_options(self) -> dict:
        return dict(
            tol=self.glasso_tol,
            max_iter=self.glasso_max_iter,
            inner_tol=self.glasso_inner_tol,
            inner_max_iter=self.glasso_inner_max_iter,
        )


def edge_confusion(estimated: AdjacencyGraph, truth: AdjacencyGraph) -> ConfusionCounts:
    if estimated.p != truth.p:
        raise ValueError(f"graphs differ in size: {estimated.p} vs {truth.p}")
    iu = np.triu_indices(truth.p, 1)
    e = estimated.entries[iu].astype(bool)
    t = truth.entries[iu].astype(bool)
    tp = int(np.sum(e & t))
    fp = int(np.sum(e & ~t))
    fn = int(np.sum(~e & t))
    return ConfusionCounts(tp, fp, fn, e.size - tp - fp - fn)


def metrics(counts: ConfusionCounts) -> Metrics:
    precision = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else 0.0
    recall = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else 0.0
    denom = precision + recall
    f1 = 2 * precision * recall / denom if denom > 0 else 0.0
    return Metrics(precision, recall, f1, counts.fp + counts.fn)


def f1_score(estimated: AdjacencyGraph, truth: AdjacencyGraph) -> float:
    return metrics(edge_confusion(estimated, truth)).f1


def oracle_select(path: CandidatePath | Sequence[AdjacencyGraph], truth: AdjacencyGraph) -> int:
    graphs = list(getattr(path, "adjacencies", path))
    if not graphs:
        raise ValueError("candidate path is empty")
    f1s = [f1_score(g, truth) for g in graphs]
    return argmax_sparsest(f1s, [g.edge_count for g in graphs])


def pearson_correlation(xs: Sequence[float], ys: Sequence[float]) -> float:
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("inputs must be 1-d sequences of equal length")
    if x.size < 3:
        raise ValueError("need at least 3 points")
    dx, dy = x - x.mean(), y - y.mean()
    sx, sy = np.sqrt(np.sum(dx * dx)), np.sqrt(np.sum(dy * dy))
    if sx == 0 or sy == 0:
        raise ValueError("correlation undefined for zero-variance input")
    return float(np.clip(np.sum(dx * dy) / (sx * sy), -1.0, 1.0))


@dataclass(frozen=True)
class GniF1Study:
    gni: tuple[float, ...]
    f1: tuple[float, ...]
    correlation: float


def gni_f1_study(
    data: Dataset,
    path: CandidatePath,
    truth: AdjacencyGraph,
    m: Optional[int] = None,
    seed: int = 0,
) -> GniF1Study:
    """GNI and true F1 of every candidate, scored on one shared DiffMatrix."""
    sel = select_gni(data, path, m, seed)
    f1s = tuple(f1_score(g, truth) for g in path.adjacencies)
    return GniF1Study(tuple(sel.totals), f1s, pearson_correlation(sel.totals, f1s))


def child_seed(master: int, *parts) -> int:
    """64-bit seed derived from the master seed and a stage key."""
    key = "|".join(str(x) for x in (master, *parts)).encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little")


@dataclass(frozen=True)
class CellResult:
    records: tuple[MetricsRecord, ...]
    gni_f1: tuple[GniF1Row, ...]
    correlation: float = math.nan


@dataclass(frozen=True, eq=False)
class SimulatedCell:
    dataset_id: str
    seed: int
    truth: AdjacencyGraph
    data: Dataset
    grid: LambdaGrid
    path: CandidatePath


def simulate_cell(config: BenchConfig, kind: str, p: int, replicate: int) -> SimulatedCell:
    """Generate one benchmark dataset and fit its candidate path."""
    dataset_id = f"{kind}-p{p}-r{replicate}"
    seed = child_seed(config.master_seed, kind, p, replicate, "graph")
    spec = GraphSpec(
        kind, p,
        edge_prob=config.edge_prob if kind == "random" else None,
        hub_count=config.hub_count if kind == "hub" else None,
        seed=seed,
    )
    problem = generate(
        spec, config.n, child_seed(config.master_seed, kind, p, replicate, "sample"),
        config.precision,
    )
    data = standardize(problem.data)
    s = sample_covariance(data)
    grid = lambda_grid(s, config.nlambda, config.lambda_ratio)
    path = glasso_path(s, grid, n=config.n, source_data_id=dataset_id, **config.fit_options())
    return SimulatedCell(dataset_id, seed, problem.truth, data, grid, path)


def run_cell(config: BenchConfig, kind: str, p: int, replicate: int) -> CellResult:
    """One dataset: generate, fit the path, apply every criterion."""
    try:
        cell = simulate_cell(config, kind, p, replicate)
    except Exception as exc:  # noqa: BLE001 - recorded, not raised
        dataset_id = f"{kind}-p{p}-r{replicate}"
        seed = child_seed(config.master_seed, kind, p, replicate, "graph")
        logger.error("cell %s failed: %s", dataset_id, exc)
        return CellResult((_failure(kind, p, replicate, seed, dataset_id, exc),), ())
    dataset_id, seed, truth = cell.dataset_id, cell.seed, cell.truth
    data, grid, path = cell.data, cell.grid, cell.path
    opts = config.fit_options()

    records: list[MetricsRecord] = []

    def record(criterion, gamma, lam, graph, runtime, status="ok"):
        met = metrics(edge_confusion(graph, truth))
        records.append(MetricsRecord(
            kind, p, replicate, criterion, gamma, float(lam), graph.edge_count,
            met.precision, met.recall, met.f1, met.shd, runtime, seed, dataset_id, status,
        ))

    t0 = time.perf_counter()
    idx = oracle_select(path, truth)
    record("oracle", None, path.fits[idx].lam, path.adjacencies[idx], time.perf_counter() - t0)

    gni_rows: list[GniF1Row] = []
    correlation = math.nan
    for criterion in config.criteria:
        t0 = time.perf_counter()
        try:
            if criterion == "gni":
                sel = select_gni(
                    data, path, config.gni_m,
                    child_seed(config.master_seed, kind, p, replicate, "gni"),
                )
                elapsed = time.perf_counter() - t0
                record("gni", None, path.fits[sel.index].lam, path.adjacencies[sel.index], elapsed)
                f1s = [f1_score(g, truth) for g in path.adjacencies]
                for i, (g, sc, f) in enumerate(zip(path.adjacencies, sel.scores, f1s)):
                    gni_rows.append(GniF1Row(kind, p, replicate, i, path.fits[i].lam,
                                             g.edge_count, sc.total, f))
                try:
                    correlation = pearson_correlation(sel.totals, f1s)
                except ValueError:
                    correlation = math.nan
            elif criterion == "ebic":
                for gamma in config.ebic_gammas:
                    t0 = time.perf_counter()
                    scores = ebic_scores(path, config.n, p, gamma)
                    i = argmax_sparsest([-x for x in scores], path.edge_counts)
                    record("ebic", gamma, path.fits[i].lam, path.adjacencies[i],
                           time.perf_counter() - t0)
            elif criterion == "stars":
                params = StarsParams(
                    beta=config.stars_beta,
                    num_subsamples=config.stars_subsamples,
                    subsample_size=config.stars_subsample_size,
                    seed=child_seed(config.master_seed, kind, p, replicate, "stars"),
                )
                sel = select_stars(data, grid, params, **opts)
                record("stars", None, sel.lam, path.adjacencies[sel.index],
                       time.perf_counter() - t0)
            elif criterion == "ric":
                params = RicParams(
                    config.ric_permutations,
                    seed=child_seed(config.master_seed, kind, p, replicate, "ric"),
                )
                fit, graph = select_ric(data, params, **opts)
                record("ric", None, fit.lam, graph, time.perf_counter() - t0)
        except Exception as exc:  # noqa: BLE001 - one criterion must not sink the cell
            logger.error("criterion %s failed on %s: %s", criterion, dataset_id, exc)
            records.append(_failure(kind, p, replicate, seed, dataset_id, exc, criterion))
    return CellResult(tuple(records), tuple(gni_rows), correlation)


def _failure(kind, p, replicate, seed, dataset_id, exc, criterion="*") -> MetricsRecord:
    msg = f"error: {type(exc).__name__}: {exc}".replace(",", ";").replace("\n", " ")
    nan = math.nan
    return MetricsRecord(kind, p, replicate, criterion, None, nan, -1, nan, nan, nan, -1,
                         nan, seed, dataset_id, msg)


@dataclass(frozen=True)
class BenchResult:
    records: tuple[MetricsRecord, ...]
    gni_f1: tuple[GniF1Row, ...]
    correlations: dict = field(default_factory=dict)

    def summary(self) -> list[dict]:
        return summarize(self.records)


def _cell_job(args):
    config, kind, p, rep = args
    return (kind, p, rep), run_cell(config, kind, p, rep)


def run_benchmark(config: BenchConfig) -> BenchResult:
    """Run every (kind, p, replicate) cell; output order is canonical."""
    jobs = [(config, kind, p, rep) for kind in config.kinds for p in config.ps
            for rep in range(config.replicates)]
    if config.jobs > 1:
        with ProcessPoolExecutor(config.jobs) as ex:
            results = list(ex.map(_cell_job, jobs))
    else:
        results = [_cell_job(j) for j in jobs]
    records = sorted((r for _, cell in results for r in cell.records), key=MetricsRecord.sort_key)
    rows = sorted(
        (r for _, cell in results for r in cell.gni_f1),
        key=lambda r: (KIND_ORDER[r.kind], r.p, r.replicate, r.candidate),
    )
    correlations = {key: cell.correlation for key, cell in results}
    return BenchResult(tuple(records), tuple(rows), correlations)


SUMMARY_CRITERIA = ("oracle", "gni", "ebic", "stars", "ric")
SUMMARY_METRICS = ("f1", "precision", "recall", "shd", "edges")
HEADLINE_GAMMA = 0.5


def summarize(records: Sequence[MetricsRecord]) -> list[dict]:
    """Per-(kind, p) means laid out one row per cell with a column per metric and criterion.

    EBIC is summarized at gamma = 0.5 when present, else at the first gamma
    found. ``n_ok`` counts datasets that produced an oracle record.
    """
    cells: dict = {}
    for r in records:
        cells.setdefault((r.kind, r.p), []).append(r)
    out = []
    for (kind, p) in sorted(cells, key=lambda c: (KIND_ORDER.get(c[0], 9), c[1])):
        rs = [r for r in cells[(kind, p)] if r.status == "ok"]
        gammas = sorted({r.gamma for r in rs if r.criterion == "ebic"})
        headline = HEADLINE_GAMMA if HEADLINE_GAMMA in gammas else (gammas[0] if gammas else None)
        row: dict = {"kind": kind, "p": p,
                     "n_ok": len({r.replicate for r in rs if r.criterion == "oracle"})}
        for metric in SUMMARY_METRICS:
            for crit in SUMMARY_CRITERIA:
                sel = [r for r in rs if r.criterion == crit
                       and (crit != "ebic" or r.gamma == headline)]
                vals = [float(getattr(r, metric)) for r in sel]
                row[f"{metric}_{crit}"] = float(np.mean(vals)) if vals else math.nan
        for crit in SUMMARY_CRITERIA:
            sel = [r.runtime_seconds for r in rs if r.criterion == crit
                   and (crit != "ebic" or r.gamma == headline)]
            row[f"runtime_{crit}"] = float(np.mean(sel)) if sel else math.nan
        out.append(row)
    return out


def with_overrides(config: BenchConfig, **kw) -> BenchConfig:
    return replace(config, **kw)
