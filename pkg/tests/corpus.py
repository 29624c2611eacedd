"""Fixture corpus of full-text documents with exact accession ground truth.

Thirty documents (plain text and PMC-style XML) are assembled from a
pool of sentence fragments, each annotated with the accessions it must
yield: true singles, ranges (hyphen, en dash, spaced, self, inverted,
mismatched), version-suffixed forms, and boundary decoys that must not
match. The corpus drives both the extraction-fidelity tests and the CLI
extract command tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from citeflow.mentions import expand_accession_range

_KK_RANGE = set(expand_accession_range("KK037225", "KK037232"))
_AB_RANGE = set(expand_accession_range("AB000001", "AB000003"))
_KJ_RANGE = set(expand_accession_range("KJ935922", "KJ935925"))

# (sentence fragment, accessions it must contribute)
FRAGMENTS: list[tuple[str, set[str]]] = [
    ("The complete genome was deposited as U00096 in the archive.", {"U00096"}),
    ("Raw reads KK037225-KK037232 were assembled de novo.", set(_KK_RANGE)),
    ("Contigs AB000001–AB000003 use an en dash separator.", set(_AB_RANGE)),
    ("We aligned against M84610 and J01749 throughout.", {"M84610", "J01749"}),
    ("The version-suffixed form U00096.2 resolves to its base record.", {"U00096"}),
    ("Amplicons KJ935922 - KJ935925 span the marker region.", set(_KJ_RANGE)),
    ("Both X02158 and its neighbor Y00664 were reannotated.", {"X02158", "Y00664"}),
    ("A parenthesized id (AF086833) still counts.", {"AF086833"}),
    ("Entry at https://example.org/nuccore/L09137 was retrieved in bulk.", {"L09137"}),
    ("The degenerate range AF000001-AF000001 names a single entry.", {"AF000001"}),
    (
        "Endpoints of the mismatched range KK037225-AB037232 are kept "
        "individually.",
        {"KK037225", "AB037232"},
    ),
    (
        "The inverted range KK037232-KK037225 cannot be expanded; endpoints "
        "survive.",
        {"KK037232", "KK037225"},
    ),
    ("Protein P12345X carries a trailing letter and is not an accession.", set()),
    ("Token 1U00096 has a leading digit and must not match.", set()),
    ("The lowercase form u00096 stays out; matching is case-sensitive.", set()),
    ("Catalog code AB1234567 is one digit too long.", set()),
    ("Identifier A123456 mixes one letter with six digits, which is invalid.", set()),
    ("Plasmid pUC19 and strain DH5A10 are vector names, not accessions.", set()),
    ("Versioned range endpoints KJ935922.1-KJ935925.2 expand like bare ones.",
     set(_KJ_RANGE)),
    ("No identifiers appear in this methods sentence at all.", set()),
]


@dataclass(frozen=True)
class FixtureDoc:
    filename: str
    content: str
    doc_id: str  # pmid for xml, file stem for txt
    expected: frozenset[str]


def _xml_document(pmid: str, sentences: list[str]) -> str:
    # second paragraph splits a range across inline markup on purpose
    paragraphs = "".join(f"<p>{s}</p>" for s in sentences)
    return (
        '<?xml version="1.0"?>\n'
        "<article>\n"
        "  <front>\n"
        "    <article-meta>\n"
        f'      <article-id pub-id-type="pmid">{pmid}</article-id>\n'
        "      <title-group><article-title>Fixture</article-title></title-group>\n"
        "    </article-meta>\n"
        "  </front>\n"
        "  <body>\n"
        "    <sec><title>Methods</title>\n"
        f"    {paragraphs}\n"
        "    <p>Nested markup around <italic>KK037225</italic>-"
        "<bold>KK037232</bold> must survive flattening.</p>\n"
        "    </sec>\n"
        "  </body>\n"
        "</article>\n"
    )


def build_corpus() -> list[FixtureDoc]:
    """Thirty deterministic documents covering every fragment at least once."""
    docs: list[FixtureDoc] = []
    n_frag = len(FRAGMENTS)
    for i in range(30):
        picks = [FRAGMENTS[(i + k * 7) % n_frag] for k in range(3)]
        sentences = [text for text, _ in picks]
        expected: set[str] = set()
        for _, truth in picks:
            expected |= truth
        if i % 3 == 2:
            pmid = str(9_000_000 + i)
            docs.append(
                FixtureDoc(
                    filename=f"doc{i:02d}.xml",
                    content=_xml_document(pmid, sentences),
                    doc_id=pmid,
                    expected=frozenset(expected | _KK_RANGE),
                )
            )
        else:
            stem = f"doc{i:02d}"
            docs.append(
                FixtureDoc(
                    filename=f"{stem}.txt",
                    content=" ".join(sentences) + "\n",
                    doc_id=stem,
                    expected=frozenset(expected),
                )
            )
    return docs


def write_corpus(directory: Path) -> list[FixtureDoc]:
    directory.mkdir(parents=True, exist_ok=True)
    docs = build_corpus()
    for doc in docs:
        (directory / doc.filename).write_text(doc.content, encoding="utf-8")
    return docs
