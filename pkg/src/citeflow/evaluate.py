"""Evaluation of rank scores against observed usage, parameter grid
search, and descriptive power-law fits.

The grid search runs one full ranker-join-correlate cycle per parameter
combination and selects the best cell by maximum absolute Pearson
correlation. Failed cells (non-convergence fallout, degenerate joins)
are retained in the result with a failure status instead of aborting the
sweep. Cells are independent, so they may execute in parallel; the
result is assembled in cell order and does not depend on scheduling.
"""

from __future__ import annotations

import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import product
from typing import Iterable, Sequence

import numpy as np
import scipy.stats

from .errors import (
    DegenerateVarianceError,
    EmptyIntersectionError,
    EvalError,
    GraphError,
    InsufficientDataError,
    RankingError,
)
from .graph import CitationGraph, NodeKind
from .ingest import UsageTable
from .rankers import ALGORITHMS, RankParams, RankVector, warm_push_cache


@dataclass
class UsageJoin:
    """Score/usage pairs for the dataset ids shared by graph and table."""

    dataset_ids: list[str]
    scores: np.ndarray
    usage: np.ndarray
    n_usage_unmatched: int
    n_graph_unmatched: int

    def __len__(self) -> int:
        return len(self.dataset_ids)

    def pairs(self) -> np.ndarray:
        return np.column_stack([self.scores, self.usage])


def join_usage(
    ranks: RankVector | np.ndarray, usage: UsageTable, g: CitationGraph
) -> UsageJoin:
    """Pair rank scores with usage counts over the shared dataset ids.

    Only dataset-kind nodes participate. Ids on either side without a
    partner are counted, not dropped silently. Raises
    :class:`EmptyIntersectionError` when nothing matches.
    """
    scores = ranks.scores if isinstance(ranks, RankVector) else np.asarray(ranks)
    index = g.id_index()
    kinds = g.kinds
    matched: list[tuple[str, int]] = []
    for eid in sorted(usage.entries):
        i = index.get(eid)
        if i is not None and kinds[i] == NodeKind.DATASET:
            matched.append((eid, i))
    if not matched:
        raise EmptyIntersectionError(
            f"none of the {len(usage.entries)} usage ids correspond to a "
            f"graph dataset ({g.n_datasets} datasets in graph)"
        )
    ids = [eid for eid, _ in matched]
    idx = np.array([i for _, i in matched], dtype=np.int64)
    return UsageJoin(
        dataset_ids=ids,
        scores=scores[idx].astype(np.float64),
        usage=np.array([usage.entries[eid] for eid in ids], dtype=np.float64),
        n_usage_unmatched=len(usage.entries) - len(ids),
        n_graph_unmatched=g.n_datasets - len(ids),
    )


def correlation(pairs: Iterable[tuple[float, float]] | np.ndarray) -> tuple[float, float]:
    """Pearson and Spearman correlation of paired observations.

    Spearman uses average ranks for ties. Requires at least three pairs
    and nonzero variance on both coordinates.
    """
    arr = np.asarray(list(pairs) if not isinstance(pairs, np.ndarray) else pairs,
                     dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("pairs must be a sequence of (score, usage) 2-tuples")
    if arr.shape[0] < 3:
        raise InsufficientDataError(f"need >= 3 pairs, got {arr.shape[0]}")
    x, y = arr[:, 0], arr[:, 1]
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise DegenerateVarianceError("a coordinate is constant; correlation undefined")
    pearson = float(scipy.stats.pearsonr(x, y).statistic)
    spearman = float(scipy.stats.spearmanr(x, y).statistic)
    return pearson, spearman


# --- grid search ---------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Axes of a parameter sweep for one algorithm.

    The Cartesian product of the value lists defines the cells. The
    damping factors are fixed per sweep (the PageRank family has no
    swept axes here and simply repeats its single configuration).
    """

    algorithm: str
    tau_pub_values: tuple[float, ...]
    tau_dataset_values: tuple[float, ...]
    alpha_values: tuple[float, ...]
    beta_values: tuple[float, ...] | None = None
    d: float = 0.85
    d_data: float = 0.85
    d_pub: float = 0.85
    tolerance: float = 1e-2
    max_iters: int = 1000

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(
                f"unknown algorithm {self.algorithm!r}; "
                f"choose from {sorted(ALGORITHMS)}"
            )
        object.__setattr__(self, "tau_pub_values", tuple(self.tau_pub_values))
        object.__setattr__(self, "tau_dataset_values", tuple(self.tau_dataset_values))
        object.__setattr__(self, "alpha_values", tuple(self.alpha_values))
        if self.beta_values is not None:
            object.__setattr__(self, "beta_values", tuple(self.beta_values))
        for name in ("tau_pub_values", "tau_dataset_values", "alpha_values"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be non-empty")
        if self.algorithm == "datarank-fb" and not self.beta_values:
            raise ValueError("datarank-fb sweeps require beta_values")

    def cells(self) -> list[tuple[float, float, float, float | None]]:
        betas: Sequence[float | None] = self.beta_values or (None,)
        return list(
            product(
                self.tau_pub_values,
                self.tau_dataset_values,
                self.alpha_values,
                betas,
            )
        )


@dataclass(frozen=True)
class GridRow:
    """Outcome of one grid cell; ``status`` is "ok" or an error class name."""

    tau_pub: float
    tau_dataset: float
    alpha: float
    beta: float | None
    pearson: float
    spearman: float
    n_matched: int
    converged: bool
    iterations_used: int
    status: str


@dataclass
class GridResult:
    rows: list[GridRow]
    best: GridRow

    def check_best_invariant(self) -> None:
        best_abs = abs(self.best.pearson)
        for row in self.rows:
            if row.status == "ok" and abs(row.pearson) > best_abs:
                raise AssertionError("grid best-row invariant violated")


def _evaluate_cell(
    g: CitationGraph,
    spec: GridSpec,
    usage: UsageTable,
    cell: tuple[float, float, float, float | None],
) -> GridRow:
    tau_pub, tau_dataset, alpha, beta = cell
    try:
        params = RankParams(
            tau_pub=tau_pub,
            tau_dataset=tau_dataset,
            alpha=alpha,
            beta=0.0 if beta is None else beta,
            d=spec.d,
            d_data=spec.d_data,
            d_pub=spec.d_pub,
            tolerance=spec.tolerance,
            max_iters=spec.max_iters,
        )
        rank = ALGORITHMS[spec.algorithm](g, params)
        join = join_usage(rank, usage, g)
        pearson, spearman = correlation(join.pairs())
        return GridRow(
            tau_pub,
            tau_dataset,
            alpha,
            beta,
            pearson,
            spearman,
            len(join),
            rank.converged,
            rank.iterations_used,
            "ok",
        )
    except (RankingError, EvalError, GraphError) as exc:
        return GridRow(
            tau_pub,
            tau_dataset,
            alpha,
            beta,
            math.nan,
            math.nan,
            0,
            False,
            0,
            type(exc).__name__,
        )


_worker_ctx: tuple[CitationGraph, GridSpec, UsageTable] | None = None


def _cell_worker(cell) -> GridRow:
    assert _worker_ctx is not None
    g, spec, usage = _worker_ctx
    return _evaluate_cell(g, spec, usage, cell)


def grid_search(
    g: CitationGraph, spec: GridSpec, usage: UsageTable, *, threads: int = 1
) -> GridResult:
    """Run the sweep and pick the best cell by maximum ``|pearson|``.

    With ``threads > 1`` cells run in forked worker processes sharing
    the graph read-only; every cell computes the same floats regardless
    of scheduling, so results are identical to the sequential path. Ties
    on ``|pearson|`` resolve to the earliest cell in product order.
    """
    cells = spec.cells()
    rows: list[GridRow]
    if threads > 1 and len(cells) > 1 and _fork_available():
        warm_push_cache(g)  # build once pre-fork so workers share pages
        g.id_index()
        global _worker_ctx
        _worker_ctx = (g, spec, usage)
        try:
            ctx = multiprocessing.get_context("fork")
            with ProcessPoolExecutor(
                max_workers=min(threads, len(cells)), mp_context=ctx
            ) as pool:
                rows = list(pool.map(_cell_worker, cells))
        finally:
            _worker_ctx = None
    else:
        rows = [_evaluate_cell(g, spec, usage, cell) for cell in cells]

    ok = [row for row in rows if row.status == "ok" and math.isfinite(row.pearson)]
    if not ok:
        statuses = sorted({row.status for row in rows})
        raise EvalError(f"every grid cell failed; statuses: {statuses}")
    best = max(ok, key=lambda row: abs(row.pearson))
    result = GridResult(rows=rows, best=best)
    result.check_best_invariant()
    return result


def _fork_available() -> bool:
    return "fork" in multiprocessing.get_all_start_methods()


def export_grid(path, result: GridResult) -> None:
    """Write the full sweep as delimited text, one row per cell."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(
            "tau_pub,tau_dataset,alpha,beta,pearson,spearman,"
            "n_matched,converged,status\n"
        )
        for row in result.rows:
            beta = "" if row.beta is None else f"{row.beta:.17g}"
            fh.write(
                f"{row.tau_pub:.17g},{row.tau_dataset:.17g},{row.alpha:.17g},"
                f"{beta},{row.pearson:.17g},{row.spearman:.17g},"
                f"{row.n_matched},{str(row.converged).lower()},{row.status}\n"
            )


# --- power-law fits --------------------------------------------------------------


@dataclass(frozen=True)
class PowerLawFit:
    """Log-log slope of a binned density, with its regression standard error.

    ``exponent`` is the fitted slope, so a decaying density ``p(x)
    proportional to x^-k`` yields ``exponent = -k``.
    """

    exponent: float
    standard_error: float
    n_points: int


def fit_power_law(
    values: Iterable[float], n_bins: int = 20, upper_quantile: float = 0.995
) -> PowerLawFit:
    """Least-squares power-law fit over logarithmically spaced bins.

    Values are binned into ``n_bins`` log-spaced bins, converted to a
    density, and the occupied bins are regressed as log density against
    log bin center. The binned range ends at ``upper_quantile`` of the
    data rather than the maximum: the last few order statistics of a
    heavy-tailed sample land in near-empty bins whose log density is
    pure noise, and they would otherwise dominate the slope. Samples
    beyond the cap still count in the density normalization. Needs at
    least three occupied bins.
    """
    vals = np.asarray(list(values) if not isinstance(values, np.ndarray) else values,
                      dtype=np.float64)
    if vals.size and (vals <= 0).any():
        raise ValueError("power-law fitting requires strictly positive values")
    if np.unique(vals).size < 3:
        raise InsufficientDataError(
            f"need >= 3 distinct positive values, got {np.unique(vals).size}"
        )
    lo = vals.min()
    hi = float(np.quantile(vals, upper_quantile))
    if hi <= lo:
        hi = float(vals.max())
    edges = np.logspace(np.log10(lo), np.log10(hi), n_bins + 1)
    hist, _ = np.histogram(vals, bins=edges)
    occupied = hist > 0
    if int(occupied.sum()) < 3:
        raise InsufficientDataError(
            f"only {int(occupied.sum())} occupied bins; need >= 3"
        )
    centers = np.sqrt(edges[:-1] * edges[1:])
    density = hist / (vals.size * np.diff(edges))
    x = np.log10(centers[occupied])
    y = np.log10(density[occupied])
    design = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    slope = float(coef[0])
    residuals = y - design @ coef
    dof = len(x) - 2
    if dof > 0:
        sigma2 = float(residuals @ residuals) / dof
        se = math.sqrt(sigma2 / float(((x - x.mean()) ** 2).sum()))
    else:
        se = 0.0
    return PowerLawFit(exponent=slope, standard_error=se, n_points=int(len(x)))
