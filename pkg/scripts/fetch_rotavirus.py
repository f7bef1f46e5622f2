#!/usr/bin/env python3
"""Subset a German district-level Rotavirus table to Berlin's twelve districts.

The public source covers 412 districts in a wide CSV: one row per week and
one column per district.  District columns are identified by their official
code (11001 to 11012 for Berlin); a column header matches when it equals the
code or ends with it (for instance ``11001`` or ``chr.11001``), or when it
equals the district name.  A leading date or week column is ignored.

Usage::

    python scripts/fetch_rotavirus.py SOURCE [--out data/rotavirus_berlin.csv]

``SOURCE`` is a local file or an http(s) URL of the raw table.  The output
is in the package's count format (``t,<district names>``, ``t = 1..T``) and
can be passed to ``perinet fit --data``.  The acceptance suite looks for it
at ``data/rotavirus_berlin.csv`` in the repository root (or at the path in
the ``PERINET_ROTAVIRUS`` environment variable).
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
import urllib.request
from pathlib import Path

from perinet.core import CountSeries
from perinet.io import BERLIN_DISTRICTS, save_counts

CODES = [f"110{k:02d}" for k in range(1, 13)]


def read_source(source: str) -> str:
    if source.startswith(("http://", "https://")):
        with urllib.request.urlopen(source, timeout=60) as resp:
            return resp.read().decode("utf-8")
    return Path(source).read_text(encoding="utf-8")


def match_columns(header: list[str]) -> list[int]:
    cols = []
    for code, name in zip(CODES, BERLIN_DISTRICTS):
        hits = [i for i, h in enumerate(header)
                if h.strip().strip('"') == name or h.strip().strip('"').endswith(code)]
        if len(hits) != 1:
            raise SystemExit(f"cannot identify a unique column for {name} ({code}); found {hits}")
        cols.append(hits[0])
    return cols


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("source")
    ap.add_argument("--out", default="data/rotavirus_berlin.csv")
    args = ap.parse_args(argv)
    rows = [r for r in csv.reader(io.StringIO(read_source(args.source))) if r]
    cols = match_columns(rows[0])
    counts = [[int(float(row[c])) for c in cols] for row in rows[1:]]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_counts(CountSeries(counts, names=BERLIN_DISTRICTS), out)
    print(f"wrote {len(counts)} weeks x {len(cols)} districts to {out}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
