"""Binary on-disk snapshots of finalized citation graphs.

Layout: an 8-byte magic string, an 8-byte little-endian header length, a
JSON header describing scalars and the array table, then the raw array
bytes concatenated in table order. The format is an internal contract;
the magic string carries the version. Writing the same graph twice
produces byte-identical files, so snapshot hashes can serve as graph
fingerprints.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .errors import SnapshotError
from .graph import CitationGraph

MAGIC = b"CFGRAPH1"

_ARRAY_ORDER = (
    "kinds",
    "years",
    "external_ids",
    "fwd_indptr",
    "fwd_indices",
    "rev_indptr",
    "rev_indices",
)


def save_graph(g: CitationGraph, path: str | Path) -> None:
    """Write ``g`` to ``path``, replacing any existing file."""
    arrays = {name: np.ascontiguousarray(getattr(g, name)) for name in _ARRAY_ORDER}
    table = [
        {"name": name, "dtype": arr.dtype.str, "shape": list(arr.shape)}
        for name, arr in arrays.items()
    ]
    header = json.dumps(
        {"reference_year": g.reference_year, "arrays": table},
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for arr in arrays.values():
            fh.write(arr.tobytes())


def load_graph(path: str | Path) -> CitationGraph:
    """Read a snapshot written by :func:`save_graph`.

    Arrays are wrapped read-only around the loaded bytes; the resulting
    graph is immutable like any other.
    """
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise SnapshotError(f"{path}: not a citeflow graph snapshot")
        (header_len,) = struct.unpack("<Q", _read_exact(fh, 8, path))
        try:
            header = json.loads(_read_exact(fh, header_len, path))
        except ValueError as exc:
            raise SnapshotError(f"{path}: corrupt snapshot header") from exc
        arrays: dict[str, np.ndarray] = {}
        for entry in header["arrays"]:
            dtype = np.dtype(entry["dtype"])
            count = int(np.prod(entry["shape"])) if entry["shape"] else 1
            buf = _read_exact(fh, dtype.itemsize * count, path)
            arrays[entry["name"]] = np.frombuffer(buf, dtype=dtype).reshape(
                entry["shape"]
            )
    missing = set(_ARRAY_ORDER) - set(arrays)
    if missing:
        raise SnapshotError(f"{path}: snapshot missing arrays {sorted(missing)}")
    return CitationGraph(reference_year=header["reference_year"], **arrays)


def file_sha256(path: str | Path) -> str:
    """Hex SHA-256 of a file; used as the graph fingerprint in manifests."""
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _read_exact(fh, n: int, path) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise SnapshotError(f"{path}: truncated snapshot")
    return buf
