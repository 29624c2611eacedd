"""Parsers for the flat-file inputs: node/edge lists, GenBank records,
usage tables, and Figshare metadata.

All file parsers are streaming generators (memory bounded by the longest
record, not file size) and tolerate CRLF input. Malformed rows are
collected with line numbers into a :class:`ParseReport` and skipped; a
parse only fails outright when every data row is malformed.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Sequence, TextIO

from .errors import (
    DuplicateIdError,
    MalformedRowError,
    NegativeCountError,
)
from .graph import NodeKind, NodeRecord

MAX_ERRORS_KEPT = 50


@dataclass
class ParseReport:
    """Per-stream parse telemetry: row counts, skips, and collected errors."""

    rows_read: int = 0
    records_emitted: int = 0
    skipped_missing_year: int = 0
    skipped_missing_date: int = 0
    skipped_missing_accession: int = 0
    n_malformed: int = 0
    last_line_no: int = 0
    errors: list[tuple[int, str]] = field(default_factory=list)

    def malformed(self, line_no: int, message: str) -> None:
        self.n_malformed += 1
        if len(self.errors) < MAX_ERRORS_KEPT:
            self.errors.append((line_no, message))

    def raise_if_all_failed(self, what: str) -> None:
        if self.rows_read and self.n_malformed == self.rows_read:
            first = self.errors[0] if self.errors else (0, "unknown")
            raise MalformedRowError(
                f"every {what} row failed to parse "
                f"(first error at line {first[0]}: {first[1]})"
            )


def _data_rows(stream: Iterable[str]) -> Iterator[tuple[int, str, str]]:
    """Yield (line_no, line, delimiter) for data rows after the header.

    The delimiter (tab or comma) is sniffed from the header row. Blank
    lines are skipped; a UTF-8 BOM on the header is tolerated.
    """
    delim = ","
    saw_header = False
    for line_no, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if not saw_header:
            line = line.lstrip("﻿")
            delim = "\t" if "\t" in line else ","
            saw_header = True
            continue
        if not line:
            continue
        yield line_no, line, delim


def parse_node_file(
    stream: Iterable[str], *, report: ParseReport | None = None
) -> Iterator[NodeRecord]:
    """Parse ``external_id,kind,year`` rows (header required).

    Rows with an empty year field are skipped and counted; they are a
    normal part of the input, not an error. Rows with the wrong column
    count, an unknown kind, or a non-integer year are collected as
    malformed.
    """
    report = report if report is not None else ParseReport()
    for line_no, line, delim in _data_rows(stream):
        report.rows_read += 1
        parts = line.split(delim)
        if len(parts) != 3:
            report.malformed(line_no, f"expected 3 columns, got {len(parts)}")
            continue
        external_id, kind_label, year_text = (p.strip() for p in parts)
        if not external_id:
            report.malformed(line_no, "empty external_id")
            continue
        try:
            kind = NodeKind.from_label(kind_label)
        except ValueError:
            report.malformed(line_no, f"unknown kind {kind_label!r}")
            continue
        if not year_text:
            report.skipped_missing_year += 1
            continue
        try:
            year = int(year_text)
        except ValueError:
            report.malformed(line_no, f"non-integer year {year_text!r}")
            continue
        report.records_emitted += 1
        yield NodeRecord(external_id, kind, year)
    report.raise_if_all_failed("node")


def parse_edge_file(
    stream: Iterable[str], *, report: ParseReport | None = None
) -> Iterator[tuple[str, str]]:
    """Parse ``citing_id,cited_id`` rows (header required), in file order."""
    report = report if report is not None else ParseReport()
    for line_no, line, delim in _data_rows(stream):
        report.rows_read += 1
        report.last_line_no = line_no
        parts = line.split(delim)
        if len(parts) != 2:
            report.malformed(line_no, f"expected 2 columns, got {len(parts)}")
            continue
        citing, cited = (p.strip() for p in parts)
        if not citing or not cited:
            report.malformed(line_no, "empty endpoint id")
            continue
        report.records_emitted += 1
        yield citing, cited
    report.raise_if_all_failed("edge")


# --- GenBank flat files -------------------------------------------------------

_SUBMITTED_RE = re.compile(r"Submitted\s+\((\d{2})-([A-Z]{3})-(\d{4})\)")


def parse_genbank_flatfile(
    stream: Iterable[str], *, report: ParseReport | None = None
) -> Iterator[NodeRecord]:
    """Parse concatenated GenBank flat-file records into dataset nodes.

    One record per ``//`` terminator. The external id is the primary token
    of the ACCESSION line; the year comes from the submitter citation,
    i.e. the ``Submitted (DD-MMM-YYYY)`` date in the last REFERENCE block.
    Records without an ACCESSION line or without a submission date are
    skipped and counted.
    """
    report = report if report is not None else ParseReport()
    record: list[str] = []
    for raw in stream:
        line = raw.rstrip("\r\n")
        if line.startswith("//"):
            if record:
                rec = _genbank_record(record, report)
                if rec is not None:
                    yield rec
            record = []
        else:
            record.append(line)
    if any(line.strip() for line in record):
        rec = _genbank_record(record, report)
        if rec is not None:
            yield rec


def _genbank_record(lines: list[str], report: ParseReport) -> NodeRecord | None:
    report.rows_read += 1
    accession = None
    last_ref = None
    for i, line in enumerate(lines):
        if line.startswith("ACCESSION") and accession is None:
            tokens = line.split()
            if len(tokens) >= 2:
                accession = tokens[1]
        elif line.startswith("REFERENCE"):
            last_ref = i
    if accession is None:
        report.skipped_missing_accession += 1
        return None
    if last_ref is None:
        report.skipped_missing_date += 1
        return None
    match = _SUBMITTED_RE.search("\n".join(lines[last_ref:]))
    if match is None:
        report.skipped_missing_date += 1
        return None
    report.records_emitted += 1
    return NodeRecord(accession, NodeKind.DATASET, int(match.group(3)))


# --- usage tables -------------------------------------------------------------


class UsageKind(Enum):
    VISITS = "visits"
    DOWNLOADS = "downloads"


@dataclass
class UsageTable:
    """External dataset id -> observed usage count (visits or downloads)."""

    entries: dict[str, int]
    usage_kind: UsageKind

    def __len__(self) -> int:
        return len(self.entries)


def parse_usage_table(
    stream: Iterable[str],
    usage_kind: UsageKind = UsageKind.VISITS,
    *,
    report: ParseReport | None = None,
) -> UsageTable:
    """Parse ``external_id,count`` rows into a :class:`UsageTable`.

    A header row is optional and detected by a non-integer count field on
    the first row. Duplicate ids and negative counts are fatal.
    """
    report = report if report is not None else ParseReport()
    entries: dict[str, int] = {}
    delim = ","
    first = True
    for line_no, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if first:
            line = line.lstrip("﻿")
            delim = "\t" if "\t" in line else ","
        if not line:
            first = False
            continue
        parts = [p.strip() for p in line.split(delim)]
        if first:
            first = False
            if len(parts) == 2 and not _is_int(parts[1]):
                continue  # header row
        report.rows_read += 1
        if len(parts) != 2:
            report.malformed(line_no, f"expected 2 columns, got {len(parts)}")
            continue
        external_id, count_text = parts
        if not _is_int(count_text):
            report.malformed(line_no, f"non-integer count {count_text!r}")
            continue
        count = int(count_text.replace("−", "-"))
        if count < 0:
            raise NegativeCountError(
                f"line {line_no}: negative usage count for {external_id!r}"
            )
        if external_id in entries:
            raise DuplicateIdError(f"line {line_no}: duplicate id {external_id!r}")
        entries[external_id] = count
        report.records_emitted += 1
    report.raise_if_all_failed("usage")
    return UsageTable(entries=entries, usage_kind=usage_kind)


def _is_int(text: str) -> bool:
    text = text.replace("−", "-")
    if text.startswith(("-", "+")):
        text = text[1:]
    return text.isdigit()


# --- Figshare -----------------------------------------------------------------

FIGSHARE_DATASET_TYPE = 3


def detect_figshare_dois(cited_ids: Iterable[str]) -> list[str]:
    """Order-preserving, deduplicated ids containing "figshare" (any case)."""
    return [
        doi for doi in dict.fromkeys(cited_ids) if "figshare" in doi.lower()
    ]


def filter_figshare_by_type(
    doi_metadata: Iterable[tuple[str, int]]
) -> list[str]:
    """DOIs whose resource type code marks them as datasets."""
    return [doi for doi, type_code in doi_metadata if type_code == FIGSHARE_DATASET_TYPE]


def parse_figshare_metadata(
    stream: Iterable[str], *, report: ParseReport | None = None
) -> list[tuple[str, int]]:
    """Parse a ``doi,type_code`` metadata export (header required)."""
    report = report if report is not None else ParseReport()
    rows: list[tuple[str, int]] = []
    for line_no, line, delim in _data_rows(stream):
        report.rows_read += 1
        parts = [p.strip() for p in line.split(delim)]
        if len(parts) != 2 or not parts[0] or not _is_int(parts[1]):
            report.malformed(line_no, f"bad metadata row {line!r}")
            continue
        rows.append((parts[0], int(parts[1])))
        report.records_emitted += 1
    report.raise_if_all_failed("figshare metadata")
    return rows


# --- pmid -> doi maps -----------------------------------------------------------


def parse_pmid_doi_map(stream: Iterable[str]) -> dict[str, str]:
    """Parse a two-column ``pmid,doi`` file; a header row is optional."""
    mapping: dict[str, str] = {}
    delim = ","
    first = True
    for raw in stream:
        line = raw.rstrip("\r\n")
        if first:
            line = line.lstrip("﻿")
            delim = "\t" if "\t" in line else ","
        if not line:
            first = False
            continue
        parts = [p.strip() for p in line.split(delim)]
        if first:
            first = False
            if len(parts) == 2 and not parts[0].isdigit():
                continue  # header row
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise MalformedRowError(f"bad pmid-doi row {line!r}")
        mapping[parts[0]] = parts[1]
    return mapping
