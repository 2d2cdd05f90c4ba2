"""Matrix files, run configuration files and benchmark tables.

Matrices are headerless comma-separated text with LF line endings. Floats
are written with 17 significant digits so that reading a file back gives the
identical doubles. Every writer goes through a temporary file in the target
directory followed by an atomic rename.
"""

from __future__ import annotations

import configparser
import csv
import io
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import NDArray

from .core import AdjacencyGraph, Dataset
from .evalbench import BenchConfig, GniF1Row, MetricsRecord
from .synthgen import PrecisionParams


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending key."""


def format_float(x: float) -> str:
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return f"{x:.17g}"


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_matrix(values: NDArray, integer: bool = False) -> str:
    lines = []
    for row in np.asarray(values):
        if integer:
            lines.append(",".join(str(int(v)) for v in row))
        else:
            lines.append(",".join(format_float(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def write_data(path, data: Dataset | NDArray) -> None:
    values = data.values if isinstance(data, Dataset) else data
    atomic_write_text(path, format_matrix(values))


def write_adjacency(path, graph: AdjacencyGraph) -> None:
    atomic_write_text(path, format_matrix(graph.entries, integer=True))


def _read_rows(path) -> list[list[str]]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise ValueError(f"{path}: empty matrix file")
    width = len(rows[0])
    for i, r in enumerate(rows, 1):
        if len(r) != width:
            raise ValueError(f"{path}: row {i} has {len(r)} fields, expected {width}")
    return rows


def read_data(path) -> Dataset:
    rows = _read_rows(path)
    try:
        values = np.array([[float(v) for v in r] for r in rows], dtype=np.float64)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    return Dataset(values)


def read_adjacency(path) -> AdjacencyGraph:
    rows = _read_rows(path)
    try:
        values = np.array([[int(v) for v in r] for r in rows])
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    return AdjacencyGraph(values)


# --- configuration ----------------------------------------------------------

def _int_list(s: str) -> tuple[int, ...]:
    return tuple(int(x) for x in s.split(",") if x.strip())


def _float_list(s: str) -> tuple[float, ...]:
    return tuple(float(x) for x in s.split(",") if x.strip())


def _str_list(s: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in s.split(",") if x.strip())


def _opt(conv):
    def parse(s: str):
        return None if s.strip().lower() in ("", "none", "default") else conv(s)
    return parse


# section -> key -> (BenchConfig field, parser)
CONFIG_KEYS = {
    "generator": {
        "v": ("v", float),
        "u": ("u", float),
        "edge_prob": ("edge_prob", _opt(float)),
        "hub_count": ("hub_count", _opt(int)),
    },
    "glasso": {
        "nlambda": ("nlambda", int),
        "lambda_ratio": ("lambda_ratio", float),
        "tol": ("glasso_tol", float),
        "max_iter": ("glasso_max_iter", int),
        "inner_tol": ("glasso_inner_tol", float),
        "inner_max_iter": ("glasso_inner_max_iter", int),
    },
    "gni": {"m": ("gni_m", _opt(int))},
    "stars": {
        "beta": ("stars_beta", float),
        "subsamples": ("stars_subsamples", int),
        "subsample_size": ("stars_subsample_size", _opt(int)),
    },
    "ric": {"permutations": ("ric_permutations", int)},
    "ebic": {"gammas": ("ebic_gammas", _float_list)},
    "bench": {
        "n": ("n", int),
        "p": ("ps", _int_list),
        "kinds": ("kinds", _str_list),
        "replicates": ("replicates", int),
        "criteria": ("criteria", _str_list),
        "seed": ("master_seed", int),
        "jobs": ("jobs", int),
    },
}


def parse_config(text: str, source: str = "<config>") -> BenchConfig:
    """Parse an INI-style key=value file into a :class:`BenchConfig`.

    Unknown sections or keys are rejected. Missing keys keep their defaults.
    """
    parser = configparser.ConfigParser(
        delimiters=("=",), comment_prefixes=("#", ";"), inline_comment_prefixes=("#",),
        interpolation=None, strict=True,
    )
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"{source}: key outside a [section]: {exc.line.strip()!r}") from None
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None

    kwargs: dict = {}
    gen = {}
    for section in parser.sections():
        if section not in CONFIG_KEYS:
            raise ConfigError(f"{source}: unknown section [{section}]")
        known = CONFIG_KEYS[section]
        for key, raw in parser.items(section):
            if key not in known:
                raise ConfigError(f"{source}: unknown key {key!r} in [{section}]")
            name, conv = known[key]
            try:
                value = conv(raw)
            except ValueError:
                raise ConfigError(f"{source}: bad value {raw!r} for key {key!r}") from None
            if section == "generator" and name in ("v", "u"):
                gen[name] = value
            else:
                kwargs[name] = value
    try:
        if gen:
            kwargs["precision"] = PrecisionParams(**gen)
        return BenchConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: {exc}") from None


def read_config(path) -> BenchConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), source=str(path))


# --- benchmark tables -------------------------------------------------------

RUNS_COLUMNS = ("kind", "p", "replicate", "criterion", "gamma", "lambda", "edges",
                "precision", "recall", "f1", "shd", "status")
TIMING_COLUMNS = ("kind", "p", "replicate", "criterion", "gamma", "runtime_seconds")
GNI_F1_COLUMNS = ("kind", "p", "replicate", "candidate", "lambda", "edges", "gni", "f1")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return format_float(v)
    return str(v)


def _table(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def runs_table(records: Sequence[MetricsRecord]) -> str:
    return _table(RUNS_COLUMNS, (
        (r.kind, r.p, r.replicate, r.criterion, r.gamma, r.lam, r.edges,
         r.precision, r.recall, r.f1, r.shd, r.status) for r in records))


def timings_table(records: Sequence[MetricsRecord]) -> str:
    return _table(TIMING_COLUMNS, (
        (r.kind, r.p, r.replicate, r.criterion, r.gamma, r.runtime_seconds) for r in records))


def gni_f1_table(rows: Sequence[GniF1Row]) -> str:
    return _table(GNI_F1_COLUMNS, (
        (r.kind, r.p, r.replicate, r.candidate, r.lam, r.edges, r.gni, r.f1) for r in rows))


def summary_table(summary: Sequence[dict]) -> str:
    if not summary:
        return ""
    header = list(summary[0])
    return _table(header, ([row[h] for h in header] for row in summary))


def read_table(path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))
