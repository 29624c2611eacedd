"""Exception hierarchy for citeflow.

Every error raised by this package derives from :class:`CiteflowError`, so
callers (notably the CLI) can catch one base class and map it to an exit
code. Subclasses are grouped by the subsystem that raises them.
"""

from __future__ import annotations


class CiteflowError(Exception):
    """Base class for all citeflow errors."""


# --- graph construction ---------------------------------------------------


class GraphError(CiteflowError):
    pass


class UnknownEndpointError(GraphError):
    """An edge references an external id with no node record."""


class DatasetCitesError(GraphError):
    """A dataset node appears as the citing endpoint of an edge."""


class MissingYearError(GraphError):
    """A node record reached graph construction without a year."""


class DuplicateNodeError(GraphError):
    """Two node records share an external id but disagree on kind or year."""


class InvalidReferenceYearError(GraphError):
    """Requested reference year is older than the newest node."""


class IndexOutOfRangeError(GraphError, IndexError):
    """Node index outside ``[0, n_nodes)``."""


class EmptyGraphError(GraphError):
    """Operation requires at least one node."""


# --- parsing ----------------------------------------------------------------


class ParseError(CiteflowError):
    pass


class MalformedRowError(ParseError):
    """Delimited row with the wrong shape or an unparseable field."""


class MalformedRecordError(ParseError):
    """Flat-file record missing a mandatory field."""


class MissingPmidError(ParseError):
    """Article document carries no PMID identifier."""


class MalformedDocumentError(ParseError):
    """Document is not parseable as an article."""


class DuplicateIdError(ParseError):
    """The same external id occurs twice in a usage table."""


class NegativeCountError(ParseError):
    """Usage count below zero."""


# --- accession ranges -------------------------------------------------------


class PrefixMismatchError(CiteflowError):
    """Range endpoints differ in letter prefix or digit width."""


class InvertedRangeError(CiteflowError):
    """Range start is numerically greater than its end."""


class RangeTooLargeError(CiteflowError):
    """Range expansion would exceed the configured element cap."""


# --- ranking ----------------------------------------------------------------


class RankingError(CiteflowError):
    pass


class InvalidParamsError(RankingError, ValueError):
    """Parameter bundle violates an algorithm's constraints."""


class NonFiniteError(RankingError):
    """A NaN or infinity appeared during score iteration."""


class NoDatasetsError(RankingError):
    """Kind-split teleport is undefined: the graph has no dataset nodes."""


class NoPublicationsError(RankingError):
    """Kind-split teleport is undefined: the graph has no publication nodes."""


# --- evaluation -------------------------------------------------------------


class EvalError(CiteflowError):
    pass


class EmptyIntersectionError(EvalError):
    """No dataset id is shared between the graph and the usage table."""


class DegenerateVarianceError(EvalError):
    """Correlation undefined: one side of the pairing is constant."""


class InsufficientDataError(EvalError):
    """Not enough distinct data to fit a distribution."""


# --- snapshots --------------------------------------------------------------


class SnapshotError(CiteflowError):
    """Graph snapshot file is missing, corrupt, or of an unknown version."""
