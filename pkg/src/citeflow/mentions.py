"""Accession-mention extraction from full text and PMC article documents.

GenBank accessions come in two shapes: one uppercase letter plus five
digits, or two letters plus six digits, optionally carrying a ``.N``
version suffix. Mentions are matched only at non-alphanumeric boundaries
so substrings of longer alphanumeric tokens (gene names, catalog codes)
do not fire. Range mentions like ``KK037225-KK037232`` are expanded into
the full accession run, capped to guard against corrupted ranges.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from xml.etree import ElementTree

from .errors import (
    InvertedRangeError,
    MalformedDocumentError,
    MissingPmidError,
    PrefixMismatchError,
    RangeTooLargeError,
)

ACCESSION_FORMAT = r"[A-Z]{2}\d{6}|[A-Z]\d{5}"
RANGE_CAP = 10_000

_ACCESSION_RE = re.compile(ACCESSION_FORMAT)
_VERSIONED_RE = re.compile(rf"(?P<base>{ACCESSION_FORMAT})\.\d+\Z")
# single accession or accession range, version suffixes tolerated on
# either endpoint, guarded by non-alphanumeric boundaries
_MENTION_RE = re.compile(
    rf"(?<![A-Za-z0-9])(?P<start>{ACCESSION_FORMAT})(?:\.\d+)?"
    rf"(?:\s?[-–—]\s?(?P<end>{ACCESSION_FORMAT})(?:\.\d+)?)?"
    rf"(?![A-Za-z0-9])"
)


@dataclass(frozen=True)
class AccessionMention:
    """One extracted accession with its source document and character span."""

    accession: str
    source_document_id: str
    span: tuple[int, int]


@dataclass
class MentionScanStats:
    """Counts of mention shapes seen while scanning one or more texts."""

    singles: int = 0
    ranges: int = 0
    ranges_rejected: int = 0
    expanded_from_ranges: int = 0


def is_accession(token: str) -> bool:
    return _ACCESSION_RE.fullmatch(token) is not None


def normalize_accession(token: str) -> str:
    """Strip a ``.N`` version suffix from a versioned accession.

    Tokens that are not versioned accessions (DOIs in particular) pass
    through unchanged.
    """
    match = _VERSIONED_RE.fullmatch(token)
    return match.group("base") if match else token


def expand_accession_range(
    start: str, end: str, *, cap: int = RANGE_CAP
) -> list[str]:
    """All accessions from ``start`` to ``end`` inclusive.

    Endpoints must share the letter prefix (hence digit width) and be
    ordered; runs longer than ``cap`` are refused.
    """
    if not is_accession(start) or not is_accession(end):
        raise ValueError(f"not a valid accession range: {start!r}-{end!r}")
    split = re.match(r"([A-Z]+)(\d+)", start)
    assert split is not None
    prefix, start_digits = split.group(1), split.group(2)
    if not end.startswith(prefix) or len(end) != len(start):
        raise PrefixMismatchError(f"range endpoints disagree: {start!r}-{end!r}")
    end_digits = end[len(prefix) :]
    lo, hi = int(start_digits), int(end_digits)
    if lo > hi:
        raise InvertedRangeError(f"range runs backwards: {start!r}-{end!r}")
    if hi - lo + 1 > cap:
        raise RangeTooLargeError(
            f"range {start!r}-{end!r} expands to {hi - lo + 1} > {cap} accessions"
        )
    width = len(start_digits)
    return [f"{prefix}{n:0{width}d}" for n in range(lo, hi + 1)]


def extract_accessions(
    text: str,
    document_id: str = "",
    *,
    stats: MentionScanStats | None = None,
    range_cap: int = RANGE_CAP,
) -> list[AccessionMention]:
    """All accession mentions in ``text``, ranges expanded.

    Every accession in a range mention carries the span of the whole
    range expression. Ranges that cannot be expanded (mismatched
    prefixes, inverted order, oversized) fall back to their two
    endpoints as individual mentions and are counted as rejected.
    """
    stats = stats if stats is not None else MentionScanStats()
    mentions: list[AccessionMention] = []
    for match in _MENTION_RE.finditer(text):
        span = match.span()
        start, end = match.group("start"), match.group("end")
        if end is None:
            stats.singles += 1
            mentions.append(AccessionMention(start, document_id, span))
            continue
        try:
            run = expand_accession_range(start, end, cap=range_cap)
        except (PrefixMismatchError, InvertedRangeError, RangeTooLargeError):
            stats.ranges_rejected += 1
            mentions.append(AccessionMention(start, document_id, span))
            mentions.append(AccessionMention(end, document_id, span))
            continue
        stats.ranges += 1
        stats.expanded_from_ranges += len(run)
        mentions.extend(AccessionMention(acc, document_id, span) for acc in run)
    return mentions


# --- PMC article documents ------------------------------------------------------

_BODY_TEXT_TAGS = frozenset({"p", "title"})


def extract_pmc_fulltext(document: str) -> tuple[str, str]:
    """PMID and concatenated body text of a PMC-style article document.

    The body text is assembled from paragraph and heading elements with
    inline markup flattened, so tokens split across formatting tags come
    back out contiguous. Raises :class:`MissingPmidError` when no PMID
    id is present and :class:`MalformedDocumentError` for unparseable
    documents or documents without a body.
    """
    try:
        root = ElementTree.fromstring(document)
    except ElementTree.ParseError as exc:
        raise MalformedDocumentError(f"unparseable article XML: {exc}") from exc
    pmid_el = root.find(".//article-id[@pub-id-type='pmid']")
    pmid = (pmid_el.text or "").strip() if pmid_el is not None else ""
    if not pmid:
        raise MissingPmidError("article document carries no PMID")
    body = root.find(".//body")
    if body is None:
        raise MalformedDocumentError("article document has no body element")
    blocks = [
        "".join(el.itertext()) for el in body.iter() if el.tag in _BODY_TEXT_TAGS
    ]
    return pmid, "\n".join(blocks)
