"""Command-line surface: build, rank, grid, stats, extract.

Each command is a reproducible batch run: identical inputs and flags
produce byte-identical outputs, and a JSON manifest is written beside
the primary output recording resolved parameters, input/output paths,
the graph fingerprint, and wall time. ``--threads`` only affects
scheduling (grid cells), never results; ``--threads 1`` is the
sequential reference path.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    CiteflowError,
    DatasetCitesError,
    EmptyGraphError,
    EmptyIntersectionError,
    InsufficientDataError,
    InvalidParamsError,
    NonFiniteError,
    UnknownEndpointError,
)
from .evaluate import GridSpec, export_grid, fit_power_law, grid_search, join_usage
from .graph import CitationGraph, NodeKind, NodeRecord, build_graph
from .ingest import (
    ParseReport,
    UsageKind,
    detect_figshare_dois,
    filter_figshare_by_type,
    parse_edge_file,
    parse_figshare_metadata,
    parse_genbank_flatfile,
    parse_node_file,
    parse_pmid_doi_map,
    parse_usage_table,
)
from .mentions import MentionScanStats, extract_accessions, extract_pmc_fulltext, normalize_accession
from .rankers import ALGORITHMS, RankParams, export_scores
from .snapshot import file_sha256, load_graph, save_graph


@dataclass
class RunManifest:
    """Provenance record emitted beside every command output."""

    command: str
    input_paths: list[str]
    parameter_values: dict
    output_paths: list[str]
    tool_version: str
    wall_time_seconds: float
    graph_fingerprint: str | None
    result: dict = field(default_factory=dict)


def _write_manifest(out_path: Path, manifest: RunManifest) -> Path:
    path = Path(str(out_path) + ".manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(asdict(manifest), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _open_text(path: str | Path):
    return open(path, "r", encoding="utf-8-sig", newline="")


def _default_threads() -> int:
    env = os.environ.get("CITEFLOW_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _report_dict(report: ParseReport) -> dict:
    return {
        "rows_read": report.rows_read,
        "records_emitted": report.records_emitted,
        "skipped_missing_year": report.skipped_missing_year,
        "skipped_missing_date": report.skipped_missing_date,
        "skipped_missing_accession": report.skipped_missing_accession,
        "n_malformed": report.n_malformed,
        "errors": [[line, msg] for line, msg in report.errors],
    }


# --- build -----------------------------------------------------------------------


def cmd_build(args) -> int:
    started = time.perf_counter()
    out_path = Path(args.out)
    per_source: dict[str, dict] = {}

    all_ids: set[str] = set()
    records: list[NodeRecord] = []
    skipped_by_max_year = 0

    def take(rec: NodeRecord) -> None:
        nonlocal skipped_by_max_year
        all_ids.add(rec.external_id)
        if args.max_year is not None and rec.year is not None and rec.year > args.max_year:
            skipped_by_max_year += 1
            return
        records.append(rec)

    for path in args.nodes:
        report = ParseReport()
        with _open_text(path) as fh:
            for rec in parse_node_file(fh, report=report):
                take(rec)
        per_source[str(path)] = _report_dict(report)
    for path in args.genbank:
        report = ParseReport()
        with _open_text(path) as fh:
            for rec in parse_genbank_flatfile(fh, report=report):
                take(rec)
        per_source[str(path)] = _report_dict(report)

    kept_ids = {rec.external_id for rec in records}
    kind_of = {rec.external_id: rec.kind for rec in records}

    edges: list[tuple[str, str]] = []
    n_edges_pruned = 0
    for path in args.edges:
        report = ParseReport()
        with _open_text(path) as fh:
            for citing, cited in parse_edge_file(fh, report=report):
                citing = normalize_accession(citing)
                cited = normalize_accession(cited)
                for endpoint in (citing, cited):
                    if endpoint not in all_ids:
                        raise UnknownEndpointError(
                            f"{path} line {report.last_line_no}: edge endpoint "
                            f"{endpoint!r} has no node record"
                        )
                if citing not in kept_ids or cited not in kept_ids:
                    n_edges_pruned += 1
                    continue
                if kind_of[citing] == NodeKind.DATASET:
                    if args.drop_dataset_citations:
                        n_edges_pruned += 1
                        continue
                    raise DatasetCitesError(
                        f"{path} line {report.last_line_no}: dataset {citing!r} "
                        f"appears as a citing endpoint "
                        f"(see --drop-dataset-citations)"
                    )
                edges.append((citing, cited))
        per_source[str(path)] = _report_dict(report)

    figshare_stats = None
    if args.figshare_metadata:
        with _open_text(args.figshare_metadata) as fh:
            metadata = parse_figshare_metadata(fh)
        dataset_dois = set(filter_figshare_by_type(metadata))
        candidates = detect_figshare_dois(cited for _, cited in edges)
        reclassify = {doi for doi in candidates if doi in dataset_dois}
        if reclassify:
            records = [
                replace(rec, kind=NodeKind.DATASET)
                if rec.external_id in reclassify
                else rec
                for rec in records
            ]
            kind_of.update({doi: NodeKind.DATASET for doi in reclassify})
            n_dropped = 0
            if args.drop_dataset_citations:
                before = len(edges)
                edges = [e for e in edges if e[0] not in reclassify]
                n_dropped = before - len(edges)
            else:
                for citing, _ in edges:
                    if citing in reclassify:
                        raise DatasetCitesError(
                            f"{citing!r} was reclassified as a figshare dataset "
                            f"but appears as a citing endpoint "
                            f"(see --drop-dataset-citations)"
                        )
        figshare_stats = {
            "metadata_rows": len(metadata),
            "cited_candidates": len(candidates),
            "reclassified_to_dataset": len(reclassify),
            "citing_edges_dropped": n_dropped if reclassify else 0,
        }

    g = build_graph(records, edges, reference_year=args.reference_year)
    save_graph(g, out_path)
    fingerprint = file_sha256(out_path)

    usage_sections = []
    for path in args.usage:
        with _open_text(path) as fh:
            table = parse_usage_table(fh)
        index = g.id_index()
        matched = sum(
            1
            for eid in table.entries
            if eid in index and g.kinds[index[eid]] == NodeKind.DATASET
        )
        usage_sections.append(
            {"path": str(path), "n_entries": len(table), "n_matched_datasets": matched}
        )

    stats = g.build_stats
    build_report = {
        "nodes": {
            "total": g.n_nodes,
            "publications": g.n_publications,
            "datasets": g.n_datasets,
            "skipped_by_max_year": skipped_by_max_year,
            "duplicates_collapsed": stats.n_duplicate_nodes_collapsed if stats else 0,
        },
        "edges": {
            "total": g.n_edges,
            "input_rows": (stats.n_edges_input if stats else 0) + n_edges_pruned,
            "pruned_or_dropped": n_edges_pruned,
            "self_loops_dropped": stats.n_self_loops_dropped if stats else 0,
            "duplicates_dropped": stats.n_duplicate_edges_dropped if stats else 0,
        },
        "reference_year": g.reference_year,
        "per_source": per_source,
    }
    if figshare_stats:
        build_report["figshare"] = figshare_stats
    if usage_sections:
        build_report["usage"] = usage_sections
    _write_json(Path(str(out_path) + ".report.json"), build_report)

    manifest = RunManifest(
        command="build",
        input_paths=[str(p) for p in (*args.nodes, *args.edges, *args.genbank)]
        + ([str(args.figshare_metadata)] if args.figshare_metadata else [])
        + [str(p) for p in args.usage],
        parameter_values={
            "max_year": args.max_year,
            "reference_year": args.reference_year,
            "drop_dataset_citations": args.drop_dataset_citations,
        },
        output_paths=[str(out_path), str(out_path) + ".report.json"],
        tool_version=__version__,
        wall_time_seconds=round(time.perf_counter() - started, 6),
        graph_fingerprint=fingerprint,
        result={
            "n_nodes": g.n_nodes,
            "n_edges": g.n_edges,
            "n_publications": g.n_publications,
            "n_datasets": g.n_datasets,
        },
    )
    _write_manifest(out_path, manifest)
    print(
        f"build: {g.n_nodes} nodes ({g.n_publications} publications, "
        f"{g.n_datasets} datasets), {g.n_edges} edges -> {out_path}"
    )
    return 0


# --- rank ------------------------------------------------------------------------


def _params_from_args(args) -> RankParams:
    return RankParams(
        tau_pub=args.tau_pub,
        tau_dataset=args.tau_dataset,
        alpha=args.alpha,
        beta=args.beta,
        d=args.d,
        d_data=args.d_data,
        d_pub=args.d_pub,
        max_iters=args.max_iters,
        tolerance=args.tolerance,
        raw_rho=args.raw_rho,
    )


def cmd_rank(args) -> int:
    started = time.perf_counter()
    out_path = Path(args.out)
    g = load_graph(args.snapshot)
    params = _params_from_args(args)
    try:
        rank = ALGORITHMS[args.algo](g, params)
    except NonFiniteError as exc:
        _write_json(
            Path(str(out_path) + ".diagnostic.json"),
            {"error": str(exc), "algorithm": args.algo, "params": asdict(params)},
        )
        raise
    export_scores(out_path, g, rank)
    manifest = RunManifest(
        command="rank",
        input_paths=[str(args.snapshot)],
        parameter_values={"algorithm": args.algo, **asdict(params)},
        output_paths=[str(out_path)],
        tool_version=__version__,
        wall_time_seconds=round(time.perf_counter() - started, 6),
        graph_fingerprint=file_sha256(args.snapshot),
        result={
            "converged": rank.converged,
            "iterations_used": rank.iterations_used,
            "score_sum": float(rank.scores.sum()),
        },
    )
    _write_manifest(out_path, manifest)
    print(
        f"rank: {args.algo} over {g.n_nodes} nodes, "
        f"{rank.iterations_used} iterations "
        f"({'converged' if rank.converged else 'max_iters reached'}) -> {out_path}"
    )
    return 0


# --- grid ------------------------------------------------------------------------


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v != "")
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad value list {text!r}") from exc


def cmd_grid(args) -> int:
    started = time.perf_counter()
    out_path = Path(args.out)
    g = load_graph(args.snapshot)
    with _open_text(args.usage) as fh:
        usage = parse_usage_table(fh, UsageKind(args.usage_kind))

    index = g.id_index()
    matched = [
        eid
        for eid in usage.entries
        if eid in index and g.kinds[index[eid]] == NodeKind.DATASET
    ]
    if not matched:
        raise EmptyIntersectionError(
            f"usage file {args.usage} shares no dataset ids with the graph "
            f"({len(usage.entries)} usage ids, {g.n_datasets} graph datasets)"
        )
    if len(matched) < 3:
        raise InsufficientDataError(
            f"only {len(matched)} usage ids match graph datasets; need >= 3 "
            f"for correlation"
        )

    spec = GridSpec(
        algorithm=args.algo,
        tau_pub_values=args.tau_pub,
        tau_dataset_values=args.tau_dataset,
        alpha_values=args.alpha,
        beta_values=args.beta,
        d=args.d,
        d_data=args.d_data,
        d_pub=args.d_pub,
        tolerance=args.tolerance,
        max_iters=args.max_iters,
    )
    result = grid_search(g, spec, usage, threads=args.threads)
    export_grid(out_path, result)

    best = result.best
    best_dict = {
        "tau_pub": best.tau_pub,
        "tau_dataset": best.tau_dataset,
        "alpha": best.alpha,
        "beta": best.beta,
        "pearson": best.pearson,
        "spearman": best.spearman,
        "n_matched": best.n_matched,
        "converged": best.converged,
    }
    manifest = RunManifest(
        command="grid",
        input_paths=[str(args.snapshot), str(args.usage)],
        parameter_values={
            "algorithm": args.algo,
            "tau_pub_values": list(spec.tau_pub_values),
            "tau_dataset_values": list(spec.tau_dataset_values),
            "alpha_values": list(spec.alpha_values),
            "beta_values": list(spec.beta_values) if spec.beta_values else None,
            "d": spec.d,
            "d_data": spec.d_data,
            "d_pub": spec.d_pub,
            "tolerance": spec.tolerance,
            "max_iters": spec.max_iters,
            "usage_kind": args.usage_kind,
        },
        output_paths=[str(out_path)],
        tool_version=__version__,
        wall_time_seconds=round(time.perf_counter() - started, 6),
        graph_fingerprint=file_sha256(args.snapshot),
        result={"n_cells": len(result.rows), "best": best_dict},
    )
    _write_manifest(out_path, manifest)
    beta_text = "-" if best.beta is None else f"{best.beta:g}"
    print(
        f"grid: {len(result.rows)} cells, best {args.algo} at "
        f"tau_pub={best.tau_pub:g} tau_dataset={best.tau_dataset:g} "
        f"alpha={best.alpha:g} beta={beta_text} "
        f"pearson={best.pearson:.6f} spearman={best.spearman:.6f} "
        f"(n={best.n_matched}) -> {out_path}"
    )
    return 0


# --- stats -----------------------------------------------------------------------


def _fit_section(name: str, values: np.ndarray, n_bins: int) -> list[tuple[str, str, str]]:
    rows: list[tuple[str, str, str]] = []
    try:
        fit = fit_power_law(values, n_bins=n_bins)
        rows.append((name, "exponent", f"{fit.exponent:.6g}"))
        rows.append((name, "standard_error", f"{fit.standard_error:.6g}"))
        rows.append((name, "n_bins_fit", str(fit.n_points)))
        rows.append((name, "status", "ok"))
    except InsufficientDataError as exc:
        rows.append((name, "status", f"InsufficientData: {exc}"))
    return rows


def cmd_stats(args) -> int:
    started = time.perf_counter()
    out_path = Path(args.out)
    g = load_graph(args.snapshot)
    if g.n_nodes == 0:
        raise EmptyGraphError("snapshot contains an empty graph")

    to_dataset = g.kinds[g.fwd_indices] == NodeKind.DATASET
    rows: list[tuple[str, str, str]] = [
        ("counts", "n_nodes", str(g.n_nodes)),
        ("counts", "n_publications", str(g.n_publications)),
        ("counts", "n_datasets", str(g.n_datasets)),
        ("counts", "n_edges", str(g.n_edges)),
        ("counts", "n_edges_to_publications", str(int((~to_dataset).sum()))),
        ("counts", "n_edges_to_datasets", str(int(to_dataset.sum()))),
        ("counts", "reference_year", str(g.reference_year)),
    ]

    ages = g.ages
    in_deg = g.in_degree
    rows += _fit_section("age_fit", ages[ages > 0], args.bins)
    rows += _fit_section("indegree_fit", in_deg[in_deg > 0], args.bins)
    for name, values in (("age_hist", ages), ("indegree_hist", in_deg)):
        uniq, counts = np.unique(values, return_counts=True)
        rows += [(name, str(int(u)), str(int(c))) for u, c in zip(uniq, counts)]

    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("section,key,value\n")
        for section, key, value in rows:
            fh.write(f"{section},{key},{value}\n")

    manifest = RunManifest(
        command="stats",
        input_paths=[str(args.snapshot)],
        parameter_values={"bins": args.bins},
        output_paths=[str(out_path)],
        tool_version=__version__,
        wall_time_seconds=round(time.perf_counter() - started, 6),
        graph_fingerprint=file_sha256(args.snapshot),
        result={"n_nodes": g.n_nodes, "n_edges": g.n_edges},
    )
    _write_manifest(out_path, manifest)
    print(f"stats: {g.n_nodes} nodes, {g.n_edges} edges -> {out_path}")
    return 0


# --- extract -----------------------------------------------------------------------


_CORPUS_SUFFIXES = {".xml", ".nxml", ".txt"}


def cmd_extract(args) -> int:
    started = time.perf_counter()
    out_path = Path(args.out)
    corpus = Path(args.corpus)
    if not corpus.is_dir():
        raise CiteflowError(f"corpus directory {corpus} does not exist")
    pmid_map = None
    if args.pmid_doi_map:
        with _open_text(args.pmid_doi_map) as fh:
            pmid_map = parse_pmid_doi_map(fh)

    files = sorted(
        p for p in corpus.iterdir() if p.suffix.lower() in _CORPUS_SUFFIXES
    )
    stats = MentionScanStats()
    edges: set[tuple[str, str]] = set()
    n_failed = 0
    n_unmapped = 0
    for path in files:
        try:
            text = path.read_text(encoding="utf-8")
            if path.suffix.lower() in (".xml", ".nxml"):
                doc_id, body = extract_pmc_fulltext(text)
            else:
                doc_id, body = path.stem, text
        except (CiteflowError, UnicodeDecodeError) as exc:
            print(f"extract: skipping {path.name}: {exc}", file=sys.stderr)
            n_failed += 1
            continue
        citing_id = doc_id
        if pmid_map is not None:
            mapped = pmid_map.get(doc_id)
            if mapped is None:
                n_unmapped += 1
                continue
            citing_id = mapped
        for mention in extract_accessions(body, doc_id, stats=stats):
            edges.add((citing_id, mention.accession))

    rows = sorted(edges)
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("citing_id,accession\n")
        for citing, accession in rows:
            fh.write(f"{citing},{accession}\n")

    report = {
        "n_documents": len(files),
        "n_parse_failures": n_failed,
        "n_unmapped_documents": n_unmapped,
        "n_single_mentions": stats.singles,
        "n_range_mentions": stats.ranges,
        "n_ranges_rejected": stats.ranges_rejected,
        "n_accessions_from_ranges": stats.expanded_from_ranges,
        "n_edges": len(rows),
    }
    _write_json(Path(str(out_path) + ".report.json"), report)

    manifest = RunManifest(
        command="extract",
        input_paths=[str(corpus)]
        + ([str(args.pmid_doi_map)] if args.pmid_doi_map else []),
        parameter_values={},
        output_paths=[str(out_path), str(out_path) + ".report.json"],
        tool_version=__version__,
        wall_time_seconds=round(time.perf_counter() - started, 6),
        graph_fingerprint=None,
        result=report,
    )
    _write_manifest(out_path, manifest)
    print(
        f"extract: {len(files)} documents, {stats.singles} single + "
        f"{stats.ranges} range mentions -> {len(rows)} edges -> {out_path}"
    )
    return 0


# --- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="citeflow",
        description="Build citation graphs and compute flow-based impact scores.",
    )
    parser.add_argument("--version", action="version", version=f"citeflow {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_threads(p):
        p.add_argument(
            "--threads",
            type=int,
            default=_default_threads(),
            help="worker processes for parallel sections (default: cores, "
            "or CITEFLOW_THREADS)",
        )

    p = sub.add_parser("build", help="assemble a graph snapshot from input files")
    p.add_argument("--nodes", action="append", default=[], metavar="FILE",
                   help="node list (external_id,kind,year); repeatable")
    p.add_argument("--edges", action="append", default=[], metavar="FILE",
                   help="edge list (citing_id,cited_id); repeatable")
    p.add_argument("--genbank", action="append", default=[], metavar="FILE",
                   help="GenBank flat file of dataset records; repeatable")
    p.add_argument("--figshare-metadata", metavar="FILE",
                   help="doi,type_code export; cited figshare DOIs of dataset "
                   "type are reclassified as dataset nodes")
    p.add_argument("--usage", action="append", default=[], metavar="FILE",
                   help="usage table for match diagnostics in the build report")
    p.add_argument("--max-year", type=int, help="drop nodes published after this year")
    p.add_argument("--reference-year", type=int,
                   help="age epoch (default: newest kept node year)")
    p.add_argument("--drop-dataset-citations", action="store_true",
                   help="drop edges whose citing endpoint is a dataset instead "
                   "of failing")
    p.add_argument("--out", required=True, help="snapshot output path")
    add_threads(p)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("rank", help="score every node with one algorithm")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--algo", required=True, choices=sorted(ALGORITHMS))
    p.add_argument("--tau-pub", type=float, default=10.0)
    p.add_argument("--tau-dataset", type=float, default=10.0)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--d", type=float, default=0.85)
    p.add_argument("--d-data", type=float, default=0.85)
    p.add_argument("--d-pub", type=float, default=0.85)
    p.add_argument("--tolerance", type=float, default=1e-2)
    p.add_argument("--max-iters", type=int, default=1000)
    p.add_argument("--raw-rho", action="store_true",
                   help="skip normalization of the starting distribution")
    p.add_argument("--out", required=True, help="scores output path")
    add_threads(p)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("grid", help="parameter sweep scored against a usage table")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--usage", required=True)
    p.add_argument("--usage-kind", choices=[k.value for k in UsageKind],
                   default=UsageKind.VISITS.value)
    p.add_argument("--algo", required=True, choices=sorted(ALGORITHMS))
    p.add_argument("--tau-pub", type=_float_list, default=(10.0,),
                   metavar="V1,V2,...")
    p.add_argument("--tau-dataset", type=_float_list, default=(10.0,),
                   metavar="V1,V2,...")
    p.add_argument("--alpha", type=_float_list, default=(0.05,), metavar="V1,V2,...")
    p.add_argument("--beta", type=_float_list, default=None, metavar="V1,V2,...")
    p.add_argument("--d", type=float, default=0.85)
    p.add_argument("--d-data", type=float, default=0.85)
    p.add_argument("--d-pub", type=float, default=0.85)
    p.add_argument("--tolerance", type=float, default=1e-2)
    p.add_argument("--max-iters", type=int, default=1000)
    p.add_argument("--out", required=True, help="grid export path")
    add_threads(p)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("stats", help="distribution report for a snapshot")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--bins", type=int, default=20, help="log bins for power-law fits")
    p.add_argument("--out", required=True)
    add_threads(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("extract", help="mine paper -> dataset citations from full text")
    p.add_argument("--corpus", required=True,
                   help="directory of article documents (.xml/.nxml/.txt)")
    p.add_argument("--pmid-doi-map", metavar="FILE",
                   help="two-column pmid,doi map; documents without a mapping "
                   "are dropped")
    p.add_argument("--out", required=True, help="edge list output path")
    add_threads(p)
    p.set_defaults(func=cmd_extract)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InvalidParamsError as exc:
        print(f"citeflow {args.command}: invalid parameters: {exc}", file=sys.stderr)
        return 2
    except CiteflowError as exc:
        print(f"citeflow {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
