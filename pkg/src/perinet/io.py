"""CSV readers and writers for count series and network edge lists.

Counts use a header ``t,<node names>`` followed by one row per time step.
Edge lists use a header ``src,dst``; ``src`` influences ``dst``.  Writers
produce a canonical layout (``\\n`` line endings, integers without padding)
so that reading and writing a canonical file reproduces it byte for byte.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .core.model import CountSeries
from .core.network import NetworkSpec
from .errors import ParseError


def _read_rows(path) -> list[list[str]]:
    text = Path(path).read_text(encoding="utf-8")
    return [[c.strip() for c in row] for row in csv.reader(io.StringIO(text)) if row]


def _write_rows(path, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def load_counts(path) -> CountSeries:
    """Read a count CSV into a :class:`CountSeries`.

    Raises:
        ParseError: For a bad header, ragged rows, non-consecutive times or
            cells that are not nonnegative integers (the message names the
            offending row and column).
    """
    rows = _read_rows(path)
    if not rows:
        raise ParseError(f"{path}: empty file")
    header = rows[0]
    if len(header) < 2 or header[0].lower() != "t":
        raise ParseError(f"{path}: header must be 't,<node names...>'")
    names = header[1:]
    if len(set(names)) != len(names):
        raise ParseError(f"{path}: duplicate node names in header")
    times, counts = [], []
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ParseError(f"{path}: row {r} has {len(row)} cells, expected {len(header)}")
        vals = []
        for c, cell in enumerate(row):
            col = header[c]
            try:
                v = int(cell)
            except ValueError:
                raise ParseError(f"{path}: row {r}, column {col!r}: {cell!r} is not an integer") from None
            if c > 0 and v < 0:
                raise ParseError(f"{path}: row {r}, column {col!r}: negative count {v}")
            vals.append(v)
        times.append(vals[0])
        counts.append(vals[1:])
    if not counts:
        raise ParseError(f"{path}: no data rows")
    t = np.asarray(times)
    if np.any(np.diff(t) != 1):
        bad = int(np.nonzero(np.diff(t) != 1)[0][0]) + 3
        raise ParseError(f"{path}: row {bad}: times must increase by one")
    return CountSeries(np.asarray(counts, dtype=np.int64), None, int(t[0]), names)


def save_counts(series: CountSeries, path) -> None:
    names = list(series.names) if series.names is not None else [str(i + 1) for i in range(series.d)]
    rows = [["t"] + names]
    for t, row in zip(series.times, series.counts):
        rows.append([str(int(t))] + [str(int(v)) for v in row])
    _write_rows(path, rows)


def _node_index(token: str, names, d, path, r) -> int:
    if names is not None and token in names:
        return names.index(token)
    try:
        k = int(token)
    except ValueError:
        raise ParseError(f"{path}: row {r}: unknown node {token!r}") from None
    if d is None or not 1 <= k <= d:
        raise ParseError(f"{path}: row {r}: node index {k} outside 1..{d}")
    return k - 1


def load_adjacency(path, d: int | None = None, names=None, symmetric: bool = False) -> NetworkSpec:
    """Read an edge list into a :class:`NetworkSpec`.

    Nodes are given by name (matched against ``names``) or by 1-based index.

    Args:
        path: CSV with header ``src,dst``.
        d: Number of nodes (defaults to ``len(names)``).
        names: Node labels in model order.
        symmetric: Add the reverse of every edge (undirected graphs such as
            shared borders).

    Raises:
        ParseError: Self-loops, unknown nodes or malformed rows.
    """
    names = None if names is None else [str(n) for n in names]
    if d is None:
        if names is None:
            raise ParseError("load_adjacency needs d or names")
        d = len(names)
    rows = _read_rows(path)
    if not rows or [c.lower() for c in rows[0]] != ["src", "dst"]:
        raise ParseError(f"{path}: header must be 'src,dst'")
    edges = []
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise ParseError(f"{path}: row {r} has {len(row)} cells, expected 2")
        src = _node_index(row[0], names, d, path, r)
        dst = _node_index(row[1], names, d, path, r)
        if src == dst:
            raise ParseError(f"{path}: row {r}: self-loop on node {row[0]!r}")
        edges.append((dst, src))
    return NetworkSpec.from_edges(edges, d, symmetric)


def save_adjacency(network: NetworkSpec, path, names=None, symmetric: bool | None = None) -> None:
    """Write an edge list, once per undirected edge when the graph is symmetric."""
    m = network.adjacency
    if symmetric is None:
        symmetric = bool(np.array_equal(m, m.T))
    labels = [str(n) for n in names] if names is not None else [str(i + 1) for i in range(network.d)]
    rows = [["src", "dst"]]
    for src in range(network.d):
        for dst in range(network.d):
            if m[dst, src] and (not symmetric or src < dst):
                rows.append([labels[src], labels[dst]])
    _write_rows(path, rows)


def data_path(name: str) -> Path:
    """Location of a file shipped in the package data directory."""
    return Path(__file__).resolve().parent / "data" / name


BERLIN_DISTRICTS = (
    "Mitte", "Friedrichshain-Kreuzberg", "Pankow", "Charlottenburg-Wilmersdorf", "Spandau",
    "Steglitz-Zehlendorf", "Tempelhof-Schoeneberg", "Neukoelln", "Treptow-Koepenick",
    "Marzahn-Hellersdorf", "Lichtenberg", "Reinickendorf",
)


def berlin_network() -> NetworkSpec:
    """Shared-border graph of the twelve Berlin districts (shipped fixture)."""
    return load_adjacency(data_path("berlin_adjacency.csv"), names=BERLIN_DISTRICTS, symmetric=True)
