"""Areal adjacency graphs and their text formats.

Two on-disk formats are accepted by :func:`parse_graph`:

* neighbour-list: first line ``n``, then one line per area
  ``<id> <num-neighbours> <neighbour ids...>`` (ids 1-based, each area
  listed exactly once, listing must be symmetric);
* edge-list CSV with header ``from,to`` (1-based ids, either orientation).

Areas are 0-based everywhere inside the package.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, TextIO

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import GraphValidationError, ParseError


@dataclass(frozen=True)
class AdjacencyGraph:
    n_areas: int
    edges: frozenset  # of (k, l) with k < l

    def __post_init__(self):
        if self.n_areas < 1:
            raise GraphValidationError("graph needs at least one area")
        for k, l in self.edges:
            if k == l:
                raise GraphValidationError(f"self-loop at area {k + 1}")
            if not (0 <= k < l < self.n_areas):
                raise GraphValidationError(f"edge ({k + 1}, {l + 1}) out of range or not ordered")

    @classmethod
    def from_edges(cls, n_areas: int, edges: Iterable[tuple[int, int]]) -> "AdjacencyGraph":
        """Build from 0-based pairs in any orientation; duplicates collapse."""
        norm = set()
        for k, l in edges:
            k, l = int(k), int(l)
            if k == l:
                raise GraphValidationError(f"self-loop at area {k + 1}")
            if not (0 <= k < n_areas and 0 <= l < n_areas):
                raise GraphValidationError(
                    f"neighbour index out of range in edge ({k + 1}, {l + 1}); n = {n_areas}"
                )
            norm.add((min(k, l), max(k, l)))
        return cls(n_areas, frozenset(norm))

    @cached_property
    def neighbor_counts(self) -> np.ndarray:
        m = np.zeros(self.n_areas, dtype=int)
        for k, l in self.edges:
            m[k] += 1
            m[l] += 1
        return m

    @cached_property
    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n_areas, self.n_areas))
        for k, l in self.edges:
            a[k, l] = a[l, k] = 1.0
        return a

    @cached_property
    def components(self) -> tuple[tuple[int, ...], ...]:
        """Connected components, ordered by their smallest area index."""
        if self.edges:
            rows, cols = zip(*self.edges)
        else:
            rows, cols = (), ()
        mat = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(self.n_areas,) * 2)
        _, labels = connected_components(mat, directed=False)
        groups: dict[int, list[int]] = {}
        for area, lab in enumerate(labels):
            groups.setdefault(lab, []).append(area)
        return tuple(sorted((tuple(g) for g in groups.values()), key=lambda g: g[0]))

    @property
    def n_components(self) -> int:
        return len(self.components)

    @property
    def singletons(self) -> tuple[int, ...]:
        return tuple(c[0] for c in self.components if len(c) == 1)

    @property
    def has_singletons(self) -> bool:
        return bool(self.singletons)

    def neighbors(self, k: int) -> list[int]:
        return sorted({l for e in self.edges for l in e if k in e and l != k})

    def to_text(self) -> str:
        """Serialize in the neighbour-list format."""
        lines = [str(self.n_areas)]
        nbrs: list[list[int]] = [[] for _ in range(self.n_areas)]
        for k, l in sorted(self.edges):
            nbrs[k].append(l)
            nbrs[l].append(k)
        for k, ns in enumerate(nbrs):
            ns = sorted(ns)
            lines.append(" ".join(str(v) for v in [k + 1, len(ns), *[x + 1 for x in ns]]))
        return "\n".join(lines) + "\n"


def lattice_graph(n_rows: int, n_cols: int) -> AdjacencyGraph:
    """Rook-adjacency lattice, areas numbered row-major."""
    edges = []
    for r in range(n_rows):
        for c in range(n_cols):
            k = r * n_cols + c
            if c + 1 < n_cols:
                edges.append((k, k + 1))
            if r + 1 < n_rows:
                edges.append((k, k + n_cols))
    return AdjacencyGraph.from_edges(n_rows * n_cols, edges)


def _parse_int(token: str, lineno: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise ParseError(f"expected an integer, got {token!r}", lineno) from None


def _parse_edge_csv(lines: list[tuple[int, str]], n_areas: int | None) -> AdjacencyGraph:
    reader = csv.reader(io.StringIO("\n".join(text for _, text in lines)))
    rows = list(reader)
    header = [h.strip().lower() for h in rows[0]]
    if header != ["from", "to"]:
        raise ParseError(f"edge-list header must be 'from,to', got {','.join(rows[0])!r}", lines[0][0])
    pairs = []
    for (lineno, _), row in zip(lines[1:], rows[1:]):
        if len(row) != 2:
            raise ParseError(f"expected 2 fields, got {len(row)}", lineno)
        a, b = (_parse_int(v.strip(), lineno) for v in row)
        if a < 1 or b < 1:
            raise GraphValidationError(f"line {lineno}: area ids are 1-based, got ({a}, {b})")
        pairs.append((a - 1, b - 1))
    n = n_areas if n_areas is not None else max((max(p) for p in pairs), default=-1) + 1
    return AdjacencyGraph.from_edges(n, pairs)


def parse_graph(source: TextIO | str, n_areas: int | None = None) -> AdjacencyGraph:
    """Read a graph from a text stream (or a string holding the file content).

    ``n_areas`` only matters for the edge-list format, where isolated areas
    cannot otherwise be represented.
    """
    text = source if isinstance(source, str) else source.read()
    lines = [
        (i, raw.split("#", 1)[0].strip())
        for i, raw in enumerate(text.splitlines(), start=1)
    ]
    lines = [(i, t) for i, t in lines if t]
    if not lines:
        raise ParseError("empty graph file")
    if "," in lines[0][1] or lines[0][1].lower().startswith("from"):
        return _parse_edge_csv(lines, n_areas)

    first_no, first = lines[0]
    head = first.split()
    if len(head) != 1:
        raise ParseError("first line must hold the number of areas", first_no)
    n = _parse_int(head[0], first_no)
    if n < 1:
        raise ParseError(f"number of areas must be positive, got {n}", first_no)

    listed: dict[int, list[int]] = {}
    for lineno, body in lines[1:]:
        tokens = [_parse_int(t, lineno) for t in body.split()]
        if len(tokens) < 2:
            raise ParseError("expected '<id> <num-neighbours> <ids...>'", lineno)
        node, count, nbrs = tokens[0], tokens[1], tokens[2:]
        if count != len(nbrs):
            raise ParseError(f"area {node} declares {count} neighbours but lists {len(nbrs)}", lineno)
        if not 1 <= node <= n:
            raise GraphValidationError(f"line {lineno}: area id {node} out of range 1..{n}")
        if node in listed:
            raise ParseError(f"area {node} listed twice", lineno)
        for v in nbrs:
            if not 1 <= v <= n:
                raise GraphValidationError(
                    f"line {lineno}: neighbour id {v} of area {node} out of range 1..{n}"
                )
            if v == node:
                raise GraphValidationError(f"line {lineno}: area {node} lists itself as neighbour")
        listed[node] = nbrs

    missing = sorted(set(range(1, n + 1)) - set(listed))
    if missing:
        raise ParseError(f"areas without a neighbour line: {missing[:10]}")

    edges = set()
    for node, nbrs in listed.items():
        for v in nbrs:
            if node not in listed[v]:
                raise GraphValidationError(
                    f"asymmetric listing: area {node} lists {v} but {v} does not list {node}"
                )
            edges.add((node - 1, v - 1))
    return AdjacencyGraph.from_edges(n, edges)


def read_graph(path, n_areas: int | None = None) -> AdjacencyGraph:
    with open(path, encoding="utf-8") as fh:
        return parse_graph(fh, n_areas=n_areas)
