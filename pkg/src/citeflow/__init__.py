"""citeflow: flow-based impact ranking for citation networks that mix
publications and datasets.

Build an immutable citation graph from flat-file inputs, score every
node with one of five ranking algorithms (networkflow, datarank,
datarank-fb, pagerank, modified-pagerank), and evaluate scores against
observed usage with a parameter grid search.
"""

__version__ = "0.1.0"

from .errors import CiteflowError
from .evaluate import (
    GridResult,
    GridRow,
    GridSpec,
    PowerLawFit,
    UsageJoin,
    correlation,
    fit_power_law,
    grid_search,
    join_usage,
)
from .graph import (
    CitationGraph,
    NodeKind,
    NodeRecord,
    build_graph,
    finalize_graph,
    prune_by_year,
)
from .ingest import (
    ParseReport,
    UsageKind,
    UsageTable,
    detect_figshare_dois,
    filter_figshare_by_type,
    parse_edge_file,
    parse_genbank_flatfile,
    parse_node_file,
    parse_usage_table,
)
from .mentions import (
    AccessionMention,
    expand_accession_range,
    extract_accessions,
    extract_pmc_fulltext,
    normalize_accession,
)
from .rankers import (
    ALGORITHMS,
    RankParams,
    RankVector,
    backward_push,
    datarank,
    datarank_fb,
    export_scores,
    forward_push,
    initial_rho,
    modified_pagerank,
    network_flow,
    pagerank,
)
from .snapshot import load_graph, save_graph

__all__ = [
    "__version__",
    "ALGORITHMS",
    "AccessionMention",
    "CitationGraph",
    "CiteflowError",
    "GridResult",
    "GridRow",
    "GridSpec",
    "NodeKind",
    "NodeRecord",
    "ParseReport",
    "PowerLawFit",
    "RankParams",
    "RankVector",
    "UsageJoin",
    "UsageKind",
    "UsageTable",
    "backward_push",
    "build_graph",
    "correlation",
    "datarank",
    "datarank_fb",
    "detect_figshare_dois",
    "expand_accession_range",
    "export_scores",
    "extract_accessions",
    "extract_pmc_fulltext",
    "filter_figshare_by_type",
    "finalize_graph",
    "fit_power_law",
    "forward_push",
    "grid_search",
    "initial_rho",
    "join_usage",
    "load_graph",
    "modified_pagerank",
    "network_flow",
    "normalize_accession",
    "pagerank",
    "parse_edge_file",
    "parse_genbank_flatfile",
    "parse_node_file",
    "parse_usage_table",
    "prune_by_year",
    "save_graph",
]
