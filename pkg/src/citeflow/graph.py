"""Immutable citation-graph representation and construction.

A :class:`CitationGraph` holds two node kinds (publications and datasets)
and directed citation edges ``j -> i`` meaning *j cites i*. Datasets never
cite anything; they only receive citations. Adjacency is stored twice as
CSR arrays: ``fwd`` (per citing node, the nodes it cites) and ``rev``
(per cited node, the nodes citing it), which are exact transposes of each
other. Node ages are measured against a configurable ``reference_year``.

Graphs are immutable after construction; concurrent readers need no
locking.
"""

from __future__ import annotations

import logging
from array import array
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DatasetCitesError,
    DuplicateNodeError,
    EmptyGraphError,
    IndexOutOfRangeError,
    InvalidReferenceYearError,
    MissingYearError,
    UnknownEndpointError,
)

logger = logging.getLogger(__name__)


class NodeKind(IntEnum):
    """The two node kinds. Integer-valued for compact array storage."""

    PUBLICATION = 0
    DATASET = 1

    @classmethod
    def from_label(cls, label: str) -> "NodeKind":
        key = label.strip().lower()
        if key == "publication":
            return cls.PUBLICATION
        if key == "dataset":
            return cls.DATASET
        raise ValueError(f"unknown node kind {label!r}")

    @property
    def label(self) -> str:
        return "publication" if self is NodeKind.PUBLICATION else "dataset"


@dataclass(frozen=True)
class NodeRecord:
    """One ingestion-side node row, keyed by external id (DOI or accession).

    ``year`` may be ``None`` on records emitted before validation; graph
    construction rejects such records with :class:`MissingYearError`.
    """

    external_id: str
    kind: NodeKind
    year: int | None


@dataclass
class BuildStats:
    """Construction telemetry attached to a finalized graph."""

    n_edges_input: int = 0
    n_self_loops_dropped: int = 0
    n_duplicate_edges_dropped: int = 0
    n_duplicate_nodes_collapsed: int = 0


class CitationGraph:
    """Finalized, index-compacted citation graph.

    Nodes carry dense integer indices in first-seen record order. The
    external-id mapping is kept both ways: ``external_ids[i]`` and the
    lazily built ``id_index()`` dict. Adjacency lists are sorted, free of
    self-loops and duplicate edges.
    """

    def __init__(
        self,
        *,
        kinds: np.ndarray,
        years: np.ndarray,
        external_ids: np.ndarray,
        fwd_indptr: np.ndarray,
        fwd_indices: np.ndarray,
        rev_indptr: np.ndarray,
        rev_indices: np.ndarray,
        reference_year: int,
        build_stats: BuildStats | None = None,
    ):
        self.kinds = kinds
        self.years = years
        self.external_ids = external_ids
        self.fwd_indptr = fwd_indptr
        self.fwd_indices = fwd_indices
        self.rev_indptr = rev_indptr
        self.rev_indices = rev_indices
        self.reference_year = int(reference_year)
        self.build_stats = build_stats
        self._id_index: dict[str, int] | None = None
        self._out_degree: np.ndarray | None = None
        self._in_degree: np.ndarray | None = None
        for arr in (kinds, years, fwd_indptr, fwd_indices, rev_indptr, rev_indices):
            if arr.flags.writeable:
                arr.setflags(write=False)

    # -- basic counts --------------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.years)

    @property
    def n_edges(self) -> int:
        return len(self.fwd_indices)

    @property
    def n_datasets(self) -> int:
        return int(np.count_nonzero(self.kinds == NodeKind.DATASET))

    @property
    def n_publications(self) -> int:
        return self.n_nodes - self.n_datasets

    @property
    def out_degree(self) -> np.ndarray:
        if self._out_degree is None:
            deg = np.diff(self.fwd_indptr)
            deg.setflags(write=False)
            self._out_degree = deg
        return self._out_degree

    @property
    def in_degree(self) -> np.ndarray:
        if self._in_degree is None:
            deg = np.diff(self.rev_indptr)
            deg.setflags(write=False)
            self._in_degree = deg
        return self._in_degree

    # -- per-node queries ------------------------------------------------------

    def cites(self, i: int) -> np.ndarray:
        """Indices of the nodes that node ``i`` cites (sorted)."""
        self._check_index(i)
        return self.fwd_indices[self.fwd_indptr[i] : self.fwd_indptr[i + 1]]

    def cited_by(self, i: int) -> np.ndarray:
        """Indices of the nodes citing node ``i`` (sorted)."""
        self._check_index(i)
        return self.rev_indices[self.rev_indptr[i] : self.rev_indptr[i + 1]]

    def age(self, i: int) -> int:
        """Years elapsed between node ``i`` and the reference year (>= 0)."""
        self._check_index(i)
        return self.reference_year - int(self.years[i])

    @property
    def ages(self) -> np.ndarray:
        return self.reference_year - self.years.astype(np.int64)

    def id_index(self) -> dict[str, int]:
        """External id -> dense index map, built on first use."""
        if self._id_index is None:
            self._id_index = {str(eid): i for i, eid in enumerate(self.external_ids)}
        return self._id_index

    def _check_index(self, i: int) -> None:
        if not 0 <= i < self.n_nodes:
            raise IndexOutOfRangeError(f"node index {i} outside [0, {self.n_nodes})")

    # -- validation ------------------------------------------------------------

    def validate(self) -> None:
        """Full invariant scan; O(E log E). Intended for tests and debugging."""
        n = self.n_nodes
        if len(self.kinds) != n or len(self.external_ids) != n:
            raise GraphInvariantViolation("node attribute arrays disagree in length")
        if self.fwd_indptr[0] != 0 or self.rev_indptr[0] != 0:
            raise GraphInvariantViolation("indptr must start at 0")
        if self.fwd_indptr[-1] != len(self.fwd_indices):
            raise GraphInvariantViolation("fwd indptr does not cover fwd indices")
        if self.rev_indptr[-1] != len(self.rev_indices):
            raise GraphInvariantViolation("rev indptr does not cover rev indices")
        if len(self.fwd_indices) != len(self.rev_indices):
            raise GraphInvariantViolation("fwd/rev edge counts differ")
        if n == 0:
            return
        if self.reference_year < int(self.years.max()):
            raise GraphInvariantViolation("reference_year older than newest node")
        if (self.ages < 0).any():
            raise GraphInvariantViolation("negative node age")
        out_deg = self.out_degree
        if (out_deg[self.kinds == NodeKind.DATASET] > 0).any():
            raise GraphInvariantViolation("dataset node with outgoing citations")
        if int(out_deg.sum()) != int(self.in_degree.sum()):
            raise GraphInvariantViolation("degree sums disagree")
        fwd = _edge_pairs(self.fwd_indptr, self.fwd_indices)
        if (fwd[:, 0] == fwd[:, 1]).any():
            raise GraphInvariantViolation("self-loop present")
        # neighbor lists strictly increasing <=> sorted and duplicate-free
        for indptr, indices in (
            (self.fwd_indptr, self.fwd_indices),
            (self.rev_indptr, self.rev_indices),
        ):
            same_row = np.repeat(np.arange(n), np.diff(indptr))
            interior = same_row[1:] == same_row[:-1]
            if (np.diff(indices.astype(np.int64))[interior] <= 0).any():
                raise GraphInvariantViolation("adjacency not strictly sorted per row")
        # transpose consistency: rev edge set == fwd edge set
        rev = _edge_pairs(self.rev_indptr, self.rev_indices)[:, ::-1]
        fwd_sorted = fwd[np.lexsort((fwd[:, 1], fwd[:, 0]))]
        rev_sorted = rev[np.lexsort((rev[:, 1], rev[:, 0]))]
        if not np.array_equal(fwd_sorted, rev_sorted):
            raise GraphInvariantViolation("fwd and rev adjacency are not transposes")


class GraphInvariantViolation(AssertionError):
    """Raised by :meth:`CitationGraph.validate` on a broken invariant."""


def _edge_pairs(indptr: np.ndarray, indices: np.ndarray) -> np.ndarray:
    rows = np.repeat(np.arange(len(indptr) - 1), np.diff(indptr))
    return np.column_stack([rows, indices.astype(np.int64)])


def _csr_from_pairs(
    n: int, src: np.ndarray, dst: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """CSR arrays from (src, dst) pairs already sorted by (src, dst)."""
    counts = np.bincount(src, minlength=n)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return indptr, dst.astype(np.int32)


def finalize_graph(
    *,
    kinds: np.ndarray,
    years: np.ndarray,
    external_ids: Sequence[str] | np.ndarray,
    src: np.ndarray,
    dst: np.ndarray,
    reference_year: int | None = None,
) -> CitationGraph:
    """Assemble a finalized graph from raw index-space edge arrays.

    Drops self-loops (with a warning count), collapses duplicate edges,
    builds sorted forward/reverse CSR adjacency, and enforces the
    dataset-never-cites and reference-year invariants. ``build_graph``
    funnels through here after id resolution; large synthetic graphs can
    call it directly to skip per-edge string handling.
    """
    kinds = np.ascontiguousarray(kinds, dtype=np.uint8)
    years = np.ascontiguousarray(years, dtype=np.int32)
    if not isinstance(external_ids, np.ndarray) or external_ids.dtype.kind != "U":
        external_ids = np.asarray(list(external_ids), dtype=np.str_)
    n = len(years)
    if len(kinds) != n or len(external_ids) != n:
        raise ValueError("kinds, years and external_ids must have equal length")
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    if len(src) != len(dst):
        raise ValueError("src and dst must have equal length")
    if len(src) and (src.min() < 0 or src.max() >= n or dst.min() < 0 or dst.max() >= n):
        raise IndexOutOfRangeError("edge endpoint index outside [0, n_nodes)")

    stats = BuildStats(n_edges_input=len(src))

    keep = src != dst
    stats.n_self_loops_dropped = int(len(src) - keep.sum())
    if stats.n_self_loops_dropped:
        logger.warning("dropped %d self-citation(s)", stats.n_self_loops_dropped)
        src, dst = src[keep], dst[keep]

    if len(src):
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        uniq = np.ones(len(src), dtype=bool)
        uniq[1:] = (src[1:] != src[:-1]) | (dst[1:] != dst[:-1])
        stats.n_duplicate_edges_dropped = int(len(src) - uniq.sum())
        if stats.n_duplicate_edges_dropped:
            src, dst = src[uniq], dst[uniq]

    fwd_indptr, fwd_indices = _csr_from_pairs(n, src, dst)

    citing_datasets = np.diff(fwd_indptr)[kinds == NodeKind.DATASET]
    if citing_datasets.size and (citing_datasets > 0).any():
        bad = np.flatnonzero((kinds == NodeKind.DATASET) & (np.diff(fwd_indptr) > 0))[0]
        raise DatasetCitesError(
            f"dataset {external_ids[bad]!r} appears as a citing endpoint"
        )

    if len(src):
        order = np.lexsort((src, dst))
        rev_indptr, rev_indices = _csr_from_pairs(n, dst[order], src[order])
    else:
        rev_indptr = np.zeros(n + 1, dtype=np.int64)
        rev_indices = np.zeros(0, dtype=np.int32)

    max_year = int(years.max()) if n else 0
    if reference_year is None:
        reference_year = max_year
    elif n and reference_year < max_year:
        raise InvalidReferenceYearError(
            f"reference_year {reference_year} precedes newest node year {max_year}"
        )

    return CitationGraph(
        kinds=kinds,
        years=years,
        external_ids=external_ids,
        fwd_indptr=fwd_indptr,
        fwd_indices=fwd_indices,
        rev_indptr=rev_indptr,
        rev_indices=rev_indices,
        reference_year=reference_year,
        build_stats=stats,
    )


def build_graph(
    nodes: Iterable[NodeRecord],
    edges: Iterable[tuple[str, str]],
    reference_year: int | None = None,
) -> CitationGraph:
    """Build a finalized graph from node records and (citing, cited) id pairs.

    Both inputs are consumed as streams. Node indices are assigned in
    first-seen order; exact duplicate node records are collapsed, while
    conflicting duplicates raise :class:`DuplicateNodeError`. Every edge
    endpoint must resolve to a known record, and no dataset may appear as
    a citing endpoint. If ``reference_year`` is omitted it defaults to the
    newest node year.
    """
    index: dict[str, int] = {}
    kinds = array("B")
    years = array("i")
    ids: list[str] = []
    n_node_dups = 0
    for rec in nodes:
        if not rec.external_id:
            raise ValueError("node record with empty external_id")
        if rec.year is None:
            raise MissingYearError(f"node {rec.external_id!r} has no year")
        prev = index.get(rec.external_id)
        if prev is not None:
            if kinds[prev] != int(rec.kind) or years[prev] != int(rec.year):
                raise DuplicateNodeError(
                    f"conflicting duplicate node record for {rec.external_id!r}"
                )
            n_node_dups += 1
            continue
        index[rec.external_id] = len(ids)
        ids.append(rec.external_id)
        kinds.append(int(rec.kind))
        years.append(int(rec.year))

    src = array("q")
    dst = array("q")
    for citing, cited in edges:
        j = index.get(citing)
        if j is None:
            raise UnknownEndpointError(f"citing id {citing!r} has no node record")
        i = index.get(cited)
        if i is None:
            raise UnknownEndpointError(f"cited id {cited!r} has no node record")
        if kinds[j] == NodeKind.DATASET:
            raise DatasetCitesError(f"dataset {citing!r} appears as a citing endpoint")
        src.append(j)
        dst.append(i)

    g = finalize_graph(
        kinds=np.asarray(kinds, dtype=np.uint8),
        years=np.asarray(years, dtype=np.int32),
        external_ids=ids,
        src=np.asarray(src, dtype=np.int64),
        dst=np.asarray(dst, dtype=np.int64),
        reference_year=reference_year,
    )
    assert g.build_stats is not None
    g.build_stats.n_duplicate_nodes_collapsed = n_node_dups
    return g


def prune_by_year(g: CitationGraph, max_year: int) -> CitationGraph:
    """Induced subgraph on the nodes with ``year <= max_year``.

    Edges touching a removed node disappear with it. The reference year is
    carried over unchanged, so node ages are stable under pruning. An
    empty result is legal.
    """
    keep = g.years <= max_year
    if keep.all():
        new_to_old = np.arange(g.n_nodes)
    else:
        new_to_old = np.flatnonzero(keep)
    old_to_new = np.full(g.n_nodes, -1, dtype=np.int64)
    old_to_new[new_to_old] = np.arange(len(new_to_old))

    src = np.repeat(np.arange(g.n_nodes), np.diff(g.fwd_indptr))
    dst = g.fwd_indices.astype(np.int64)
    mask = keep[src] & keep[dst]

    pruned = finalize_graph(
        kinds=g.kinds[new_to_old],
        years=g.years[new_to_old],
        external_ids=g.external_ids[new_to_old],
        src=old_to_new[src[mask]],
        dst=old_to_new[dst[mask]],
        reference_year=g.reference_year if len(new_to_old) else None,
    )
    return pruned


def empty_graph() -> CitationGraph:
    """Zero-node graph (the legal result of pruning everything away)."""
    return finalize_graph(
        kinds=np.zeros(0, np.uint8),
        years=np.zeros(0, np.int32),
        external_ids=[],
        src=np.zeros(0, np.int64),
        dst=np.zeros(0, np.int64),
    )
