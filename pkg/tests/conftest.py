from __future__ import annotations

from pathlib import Path

import pytest

from citeflow import CitationGraph, NodeKind, NodeRecord, build_graph

from corpus import write_corpus

GENBANK_FIXTURE = """\
LOCUS       ECOLI0001    4641652 bp   DNA     circular BCT 16-JAN-1992
DEFINITION  Escherichia coli K-12 complete genome, fixture record.
ACCESSION   U00096
VERSION     U00096.2  GI:48994873
SOURCE      Escherichia coli
  ORGANISM  Escherichia coli
REFERENCE   1  (bases 1 to 4641652)
  AUTHORS   Early,A.
  TITLE     A prior publication about this sequence
  JOURNAL   J. Fixture Biol. 12 (3), 100-110 (1991)
  PUBMED    1000001
REFERENCE   2  (bases 1 to 4641652)
  AUTHORS   Submitter,B.
  TITLE     Direct Submission
  JOURNAL   Submitted (16-JAN-1992) Dept. of Fixtures, Example University,
            1 Example Street, Example City
FEATURES             Location/Qualifiers
     source          1..4641652
ORIGIN
        1 agcttttcat tctgactgca acgggcaata tgtctctgtg tggattaaaa aaagagtgtc
//
LOCUS       RATTRPA    1087 bp    mRNA            ROD       27-APR-1993
DEFINITION  Rattus norvegicus fixture record.
ACCESSION   M84610
VERSION     M84610.1  GI:206205
REFERENCE   1  (bases 1 to 1087)
  AUTHORS   Author,C.
  TITLE     Another prior publication
  JOURNAL   J. Fixture Biol. 13 (1), 1-9 (1992)
REFERENCE   2  (bases 1 to 1087)
  AUTHORS   Submitter,D.
  TITLE     Direct Submission
  JOURNAL   Submitted (03-MAR-1992) Fixture Institute, 2 Sample Road
ORIGIN
        1 gggaaagctt gtcgacatgg cagaagaggc ggtagcagcg
//
LOCUS       NODATE001    500 bp    DNA             PRI       01-JAN-2000
DEFINITION  Record without a submission date; must be skipped.
ACCESSION   Z99999
REFERENCE   1  (bases 1 to 500)
  AUTHORS   Nobody,E.
  TITLE     No direct submission reference here
  JOURNAL   J. Fixture Biol. 14 (2), 20-29 (1999)
ORIGIN
        1 acgtacgtac gtacgtacgt
//
"""

NODES_CSV = """\
external_id,kind,year
10.1/alpha,publication,2005
10.1/beta,publication,2008
10.1/gamma,publication,2010
10.1/delta,publication,2011
10.1/epsilon,publication,2012
10.1/zeta,publication,2009
10.6084/m9.figshare.111,publication,2011
10.6084/m9.figshare.222,publication,2010
10.1/stale,publication,2014
"""

EDGES_CSV = """\
citing_id,cited_id
10.1/beta,10.1/alpha
10.1/gamma,10.1/alpha
10.1/gamma,10.1/beta
10.1/delta,10.1/gamma
10.1/delta,10.1/alpha
10.1/epsilon,10.1/delta
10.1/epsilon,10.1/zeta
10.1/zeta,10.1/alpha
10.1/delta,10.6084/m9.figshare.111
10.1/epsilon,10.6084/m9.figshare.111
10.1/gamma,10.6084/m9.figshare.222
10.1/gamma,U00096.2
10.1/delta,U00096
10.1/epsilon,M84610
10.1/stale,10.1/alpha
"""

USAGE_CSV = """\
external_id,count
U00096,5000
M84610,120
10.6084/m9.figshare.111,47
ZZ999999,7
"""

FIGSHARE_META_CSV = """\
doi,type_code
10.6084/m9.figshare.111,3
10.6084/m9.figshare.222,1
"""


@pytest.fixture
def triangle_graph() -> CitationGraph:
    nodes = [
        NodeRecord("A", NodeKind.PUBLICATION, 2010),
        NodeRecord("B", NodeKind.PUBLICATION, 2011),
        NodeRecord("D", NodeKind.DATASET, 2009),
    ]
    return build_graph(nodes, [("B", "A"), ("B", "D"), ("A", "D")], reference_year=2012)


def graph_from_spec(n, kinds, years, edges, reference_year) -> CitationGraph:
    """Build through the public record/edge path using synthetic string ids."""
    records = [
        NodeRecord(f"N{i}", NodeKind(kinds[i]), int(years[i])) for i in range(n)
    ]
    id_edges = [(f"N{src}", f"N{dst}") for src, dst in edges]
    return build_graph(records, id_edges, reference_year=reference_year)


@pytest.fixture
def cli_workspace(tmp_path: Path) -> dict:
    """Input files for end-to-end CLI runs, plus the mention corpus."""
    ws = tmp_path / "ws"
    ws.mkdir()
    (ws / "nodes.csv").write_text(NODES_CSV, encoding="utf-8")
    (ws / "edges.csv").write_text(EDGES_CSV, encoding="utf-8")
    (ws / "genbank.gbff").write_text(GENBANK_FIXTURE, encoding="utf-8")
    (ws / "usage.csv").write_text(USAGE_CSV, encoding="utf-8")
    (ws / "figshare_meta.csv").write_text(FIGSHARE_META_CSV, encoding="utf-8")
    docs = write_corpus(ws / "corpus")
    pmid_rows = ["pmid,doi"] + [
        f"{doc.doc_id},10.9/mapped.{doc.doc_id}"
        for doc in docs
        if doc.filename.endswith(".xml")
    ]
    (ws / "pmid_doi.csv").write_text("\n".join(pmid_rows) + "\n", encoding="utf-8")
    return {
        "root": ws,
        "nodes": ws / "nodes.csv",
        "edges": ws / "edges.csv",
        "genbank": ws / "genbank.gbff",
        "usage": ws / "usage.csv",
        "figshare": ws / "figshare_meta.csv",
        "corpus": ws / "corpus",
        "pmid_map": ws / "pmid_doi.csv",
        "docs": docs,
    }
