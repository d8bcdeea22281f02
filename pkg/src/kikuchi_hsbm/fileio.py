"""Plain-text hypergraph format.

::

    hsbm n=<int> p=<int> k=<int> theta0=<decimal> eps=<decimal> planted=<0|1> seed=<u64>
    labels x_1 ... x_n          (optional, 1-based community ids)
    v_1 v_2 ... v_p             (one line per present edge, sorted, 1-based)

Edges appear in lexicographic order; decimals use 17 significant digits.
"""

from __future__ import annotations

import hashlib
import io
import os
from math import comb

import numpy as np

from .combinatorics import subset_rank
from .model import Hypergraph, ModelParams

__all__ = ["dumps", "loads", "save", "load", "checksum", "format_decimal"]

HEADER_KEYS = ("n", "p", "k", "theta0", "eps", "planted", "seed")


def format_decimal(x: float) -> str:
    return format(float(x), ".17g")


def dumps(h: Hypergraph) -> str:
    P = h.params
    out = io.StringIO()
    out.write(
        f"hsbm n={P.n} p={P.p} k={P.k} theta0={format_decimal(P.theta0)} eps={format_decimal(P.eps)} "
        f"planted={int(h.planted)} seed={h.seed}\n"
    )
    if h.labels is not None:
        out.write("labels " + " ".join(str(int(v) + 1) for v in h.labels) + "\n")
    E = h.edges() + 1
    if len(E):
        out.write("\n".join(" ".join(map(str, row)) for row in E.tolist()))
        out.write("\n")
    return out.getvalue()


def _parse_header(line: str) -> dict:
    parts = line.split(" ")
    if parts[0] != "hsbm":
        raise ValueError("missing 'hsbm' header")
    fields = {}
    for tok in parts[1:]:
        key, sep, val = tok.partition("=")
        if not sep or key not in HEADER_KEYS or key in fields:
            raise ValueError(f"bad header field {tok!r}")
        fields[key] = val
    if set(fields) != set(HEADER_KEYS):
        raise ValueError("header must carry n, p, k, theta0, eps, planted and seed")
    return fields


def loads(text: str) -> Hypergraph:
    if "\r" in text:
        raise ValueError("line endings must be LF")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ValueError("empty input")
    hdr = _parse_header(lines[0])
    if hdr["planted"] not in ("0", "1"):
        raise ValueError("planted must be 0 or 1")
    seed = int(hdr["seed"])
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    params = ModelParams(int(hdr["n"]), int(hdr["k"]), int(hdr["p"]), float(hdr["theta0"]), float(hdr["eps"]))
    body = lines[1:]
    labels = None
    if body and body[0].startswith("labels"):
        toks = body[0].split(" ")[1:]
        labels = np.array([int(t) - 1 for t in toks], dtype=np.int64)
        body = body[1:]
    n, p = params.n, params.p
    if body:
        E = np.array([[int(t) for t in ln.split(" ")] for ln in body], dtype=np.int64)
        if E.ndim != 2 or E.shape[1] != p:
            raise ValueError(f"every edge line must list {p} vertices")
        E -= 1
        if E.min() < 0 or E.max() >= n or np.any(np.diff(E, axis=1) <= 0):
            raise ValueError("edge vertices must be sorted, distinct and in range")
        order = np.lexsort(E.T[::-1])
        if not np.array_equal(order, np.arange(len(E))):
            raise ValueError("edges must be in lexicographic order")
        if len(E) > 1 and np.any(np.all(E[1:] == E[:-1], axis=1)):
            raise ValueError("duplicate edge")
        ranks = subset_rank(E, n)
    else:
        ranks = np.zeros(0, dtype=np.int64)
    present = np.zeros(comb(n, p), dtype=bool)
    present[ranks] = True
    return Hypergraph(params, present, hdr["planted"] == "1", labels, seed)


def save(h: Hypergraph, path: str | os.PathLike) -> str:
    """Write ``h`` to ``path`` and return the sha256 of the bytes written."""
    data = dumps(h).encode("ascii")
    with open(path, "wb") as fh:
        fh.write(data)
    return hashlib.sha256(data).hexdigest()


def load(path: str | os.PathLike) -> Hypergraph:
    with open(path, "rb") as fh:
        return loads(fh.read().decode("ascii"))


def checksum(h: Hypergraph) -> str:
    return hashlib.sha256(dumps(h).encode("ascii")).hexdigest()
