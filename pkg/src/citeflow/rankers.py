"""The five ranking algorithms over a citation graph.

Flow family (networkflow, datarank, datarank-fb): a researcher starts at
a node drawn from an age-decayed distribution and walks the citation
graph, stopping with some probability at each step; a node's score is
the accumulated visit mass. The walk distribution is evaluated as a
truncated operator series, term by term, using two sparse push kernels:

* ``forward_push`` moves mass from citing nodes to the nodes they cite,
  split uniformly over each citer's out-degree (flow down reference
  lists). Mass on a node without references terminates.
* ``backward_push`` moves mass from cited nodes to their citers, split
  uniformly over in-degree.

PageRank family (pagerank, modified-pagerank): damped fixed-point
iteration; the modified variant splits both the teleport term and the
damping by node kind, and is evaluated exactly as written even though
dataset nodes never cite (their link term is structurally empty; they
still contribute through the dangling channel).

All rankers are pure functions of ``(graph, params)``. Contributions are
summed in fixed index order, so repeated runs are bitwise identical.
Iteration stops when the L1 change between consecutive score vectors
drops below ``params.tolerance``; hitting ``max_iters`` first is reported
via ``converged=False`` rather than an error, so parameter sweeps never
abort on one slow cell.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
import scipy.sparse as sp

from .errors import (
    EmptyGraphError,
    InvalidParamsError,
    NoDatasetsError,
    NonFiniteError,
    NoPublicationsError,
)
from .graph import CitationGraph, NodeKind


@dataclass(frozen=True)
class RankParams:
    """Parameter bundle shared by all algorithms.

    ``tau_pub``/``tau_dataset`` are e-folding decay times (years) for the
    starting distribution; ``alpha`` is the walker's stop probability;
    ``beta`` the backward-step probability (datarank-fb only); ``d``,
    ``d_data``, ``d_pub`` are damping factors for the PageRank family.
    ``raw_rho`` skips normalization of the starting distribution (study
    mode; scores are then not comparable across parameter settings).
    """

    tau_pub: float = 10.0
    tau_dataset: float = 10.0
    alpha: float = 0.05
    beta: float = 0.0
    d: float = 0.85
    d_data: float = 0.85
    d_pub: float = 0.85
    max_iters: int = 1000
    tolerance: float = 1e-2
    raw_rho: bool = False

    def __post_init__(self):
        if not self.tau_pub > 0:
            raise InvalidParamsError(f"tau_pub must be > 0, got {self.tau_pub}")
        if not self.tau_dataset > 0:
            raise InvalidParamsError(f"tau_dataset must be > 0, got {self.tau_dataset}")
        if not 0 < self.alpha < 1:
            raise InvalidParamsError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.beta < 0:
            raise InvalidParamsError(f"beta must be >= 0, got {self.beta}")
        for name in ("d", "d_data", "d_pub"):
            value = getattr(self, name)
            if not 0 < value < 1:
                raise InvalidParamsError(f"{name} must be in (0, 1), got {value}")
        if self.max_iters < 1:
            raise InvalidParamsError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.tolerance > 0:
            raise InvalidParamsError(f"tolerance must be > 0, got {self.tolerance}")


@dataclass
class RankVector:
    """Per-node scores plus the run telemetry that produced them."""

    scores: np.ndarray
    algorithm: str
    params: RankParams
    iterations_used: int
    converged: bool


class _PushMatrices(NamedTuple):
    rev: sp.csr_matrix  # row i: nodes citing i (carries forward flow)
    fwd: sp.csr_matrix  # row i: nodes cited by i (carries backward flow)


_matrix_cache: "weakref.WeakKeyDictionary[CitationGraph, _PushMatrices]" = (
    weakref.WeakKeyDictionary()
)


def _matrices(g: CitationGraph) -> _PushMatrices:
    cached = _matrix_cache.get(g)
    if cached is None:
        n = g.n_nodes
        ones_rev = np.ones(len(g.rev_indices), dtype=np.float64)
        ones_fwd = np.ones(len(g.fwd_indices), dtype=np.float64)
        cached = _PushMatrices(
            rev=sp.csr_matrix((ones_rev, g.rev_indices, g.rev_indptr), shape=(n, n)),
            fwd=sp.csr_matrix((ones_fwd, g.fwd_indices, g.fwd_indptr), shape=(n, n)),
        )
        _matrix_cache[g] = cached
    return cached


def warm_push_cache(g: CitationGraph) -> None:
    """Pre-build the push matrices (e.g. before forking grid workers)."""
    if g.n_nodes:
        _matrices(g)


def forward_push(g: CitationGraph, v: np.ndarray) -> np.ndarray:
    """One step of citation flow: out[i] = sum over j citing i of v[j]/outdeg[j].

    Mass on nodes with no references (datasets included) terminates.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (g.n_nodes,):
        raise ValueError(f"vector length {v.shape} != n_nodes {g.n_nodes}")
    if g.n_nodes == 0:
        return v.copy()
    out_deg = g.out_degree
    x = np.divide(v, out_deg, out=np.zeros_like(v, dtype=np.float64), where=out_deg > 0)
    return _matrices(g).rev @ x


def backward_push(g: CitationGraph, v: np.ndarray) -> np.ndarray:
    """One reversed step: out[i] = sum over j cited by i of v[j]/indeg[j]."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (g.n_nodes,):
        raise ValueError(f"vector length {v.shape} != n_nodes {g.n_nodes}")
    if g.n_nodes == 0:
        return v.copy()
    in_deg = g.in_degree
    x = np.divide(v, in_deg, out=np.zeros_like(v, dtype=np.float64), where=in_deg > 0)
    return _matrices(g).fwd @ x


def initial_rho(
    g: CitationGraph,
    tau_pub: float,
    tau_dataset: float | None = None,
    *,
    heterogeneous: bool = False,
    normalize: bool = True,
) -> np.ndarray:
    """Age-decayed starting distribution: rho_i = exp(-age_i / tau).

    With ``heterogeneous`` set, dataset nodes decay with ``tau_dataset``
    instead of ``tau_pub``. Normalized to sum to one unless disabled.
    """
    if g.n_nodes == 0:
        raise EmptyGraphError("cannot build a starting distribution on 0 nodes")
    if not tau_pub > 0:
        raise InvalidParamsError(f"tau_pub must be > 0, got {tau_pub}")
    ages = g.ages.astype(np.float64)
    if heterogeneous:
        if tau_dataset is None or not tau_dataset > 0:
            raise InvalidParamsError(f"tau_dataset must be > 0, got {tau_dataset}")
        tau = np.where(g.kinds == NodeKind.DATASET, tau_dataset, tau_pub)
        rho = np.exp(-ages / tau)
    else:
        rho = np.exp(-ages / tau_pub)
    if normalize:
        rho /= rho.sum()
    return rho


def _check_finite(T: np.ndarray, algorithm: str, iteration: int) -> None:
    if not np.isfinite(T).all():
        raise NonFiniteError(
            f"{algorithm}: non-finite score at iteration {iteration}"
        )


def _flow_series(
    g: CitationGraph, rho: np.ndarray, params: RankParams, algorithm: str
) -> RankVector:
    """Accumulate T = sum_k (1-alpha)^k W^k rho term by term."""
    T = rho.copy()
    term = rho
    fade = 1.0 - params.alpha
    iterations = 0
    converged = False
    for k in range(1, params.max_iters + 1):
        term = fade * forward_push(g, term)
        T = T + term
        iterations = k
        _check_finite(T, algorithm, k)
        if float(np.abs(term).sum()) < params.tolerance:
            converged = True
            break
    return RankVector(T, algorithm, params, iterations, converged)


def network_flow(g: CitationGraph, params: RankParams) -> RankVector:
    """Homogeneous flow ranking: every node decays with ``tau_pub``."""
    rho = initial_rho(g, params.tau_pub, normalize=not params.raw_rho)
    return _flow_series(g, rho, params, "networkflow")


def datarank(g: CitationGraph, params: RankParams) -> RankVector:
    """Flow ranking with kind-specific decay in the starting distribution."""
    rho = initial_rho(
        g,
        params.tau_pub,
        params.tau_dataset,
        heterogeneous=True,
        normalize=not params.raw_rho,
    )
    return _flow_series(g, rho, params, "datarank")


def datarank_fb(
    g: CitationGraph, params: RankParams, *, allow_zero_beta: bool = False
) -> RankVector:
    """Two-direction flow: forward along references, backward to citers.

    The forward ``(1-alpha)^k W^k rho`` and backward ``beta^k M^k rho``
    series accumulate independently on top of a single ``rho`` term.
    Requires ``alpha > beta > 0``; ``allow_zero_beta`` admits beta = 0 as
    a degenerate mode that reduces exactly to datarank (used for
    equivalence checks).
    """
    if params.beta == 0 and not allow_zero_beta:
        raise InvalidParamsError("datarank-fb requires beta > 0")
    if params.beta >= params.alpha:
        raise InvalidParamsError(
            f"datarank-fb requires alpha > beta, got alpha={params.alpha} "
            f"beta={params.beta}"
        )
    rho = initial_rho(
        g,
        params.tau_pub,
        params.tau_dataset,
        heterogeneous=True,
        normalize=not params.raw_rho,
    )
    T = rho.copy()
    fwd_term = rho
    bwd_term = rho
    fade = 1.0 - params.alpha
    iterations = 0
    converged = False
    for k in range(1, params.max_iters + 1):
        fwd_term = fade * forward_push(g, fwd_term)
        bwd_term = params.beta * backward_push(g, bwd_term)
        T = T + fwd_term + bwd_term
        iterations = k
        _check_finite(T, "datarank-fb", k)
        delta = float(np.abs(fwd_term).sum()) + float(np.abs(bwd_term).sum())
        if delta < params.tolerance:
            converged = True
            break
    return RankVector(T, "datarank-fb", params, iterations, converged)


def pagerank(g: CitationGraph, params: RankParams) -> RankVector:
    """Standard damped PageRank with uniform dangling-mass redistribution."""
    n = g.n_nodes
    if n == 0:
        raise EmptyGraphError("pagerank on an empty graph")
    d = params.d
    dangling = g.out_degree == 0
    pr = np.full(n, 1.0 / n)
    iterations = 0
    converged = False
    for k in range(1, params.max_iters + 1):
        pushed = forward_push(g, pr)
        dangling_mass = float(pr[dangling].sum())
        new = (1.0 - d) / n + d * (pushed + dangling_mass / n)
        iterations = k
        _check_finite(new, "pagerank", k)
        delta = float(np.abs(new - pr).sum())
        pr = new
        if delta < params.tolerance:
            converged = True
            break
    return RankVector(pr, "pagerank", params, iterations, converged)


def modified_pagerank(g: CitationGraph, params: RankParams) -> RankVector:
    """PageRank with kind-split teleport and damping.

    Each node receives ``(1-d_data)/N_data + (1-d_pub)/N_pub`` teleport
    mass plus damped link mass from citing datasets and citing
    publications separately. Dataset nodes never cite, so their link
    channel is structurally empty, but their dangling mass still spreads
    uniformly, damped by ``d_data``. Graphs missing either kind are
    rejected: the corresponding teleport term would be undefined.
    """
    n = g.n_nodes
    if n == 0:
        raise EmptyGraphError("modified pagerank on an empty graph")
    is_data = np.asarray(g.kinds) == NodeKind.DATASET
    n_data = int(is_data.sum())
    n_pub = n - n_data
    if n_data == 0:
        raise NoDatasetsError("modified pagerank needs at least one dataset node")
    if n_pub == 0:
        raise NoPublicationsError(
            "modified pagerank needs at least one publication node"
        )
    d_data, d_pub = params.d_data, params.d_pub
    teleport = (1.0 - d_data) / n_data + (1.0 - d_pub) / n_pub
    out_deg = g.out_degree
    dangling = out_deg == 0
    dangling_data = dangling & is_data
    dangling_pub = dangling & ~is_data
    rev = _matrices(g).rev
    pr = np.full(n, 1.0 / n)
    iterations = 0
    converged = False
    for k in range(1, params.max_iters + 1):
        x = np.divide(
            pr, out_deg, out=np.zeros_like(pr, dtype=np.float64), where=out_deg > 0
        )
        link_data = rev @ np.where(is_data, x, 0.0)
        link_pub = rev @ np.where(is_data, 0.0, x)
        mass_data = float(pr[dangling_data].sum())
        mass_pub = float(pr[dangling_pub].sum())
        new = (
            teleport
            + d_data * (link_data + mass_data / n)
            + d_pub * (link_pub + mass_pub / n)
        )
        iterations = k
        _check_finite(new, "modified-pagerank", k)
        delta = float(np.abs(new - pr).sum())
        pr = new
        if delta < params.tolerance:
            converged = True
            break
    return RankVector(pr, "modified-pagerank", params, iterations, converged)


def _run_datarank_fb(g: CitationGraph, params: RankParams) -> RankVector:
    return datarank_fb(g, params)


ALGORITHMS: dict[str, Callable[[CitationGraph, RankParams], RankVector]] = {
    "networkflow": network_flow,
    "datarank": datarank,
    "datarank-fb": _run_datarank_fb,
    "pagerank": pagerank,
    "modified-pagerank": modified_pagerank,
}


def export_scores(path, g: CitationGraph, rank: RankVector) -> None:
    """Write ``external_id,score,rank_position`` sorted by descending score.

    Ties break on external id, ascending, so the export is a pure
    function of the scores. Floats use shortest round-trippable decimal
    form.
    """
    order = np.lexsort((g.external_ids, -rank.scores))
    ids = g.external_ids
    scores = rank.scores
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("external_id,score,rank_position\n")
        chunk = 500_000
        for lo in range(0, len(order), chunk):
            part = order[lo : lo + chunk]
            fh.write(
                "".join(
                    f"{ids[i]},{scores[i]:.17g},{lo + k + 1}\n"
                    for k, i in enumerate(part)
                )
            )
