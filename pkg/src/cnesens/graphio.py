"""Undirected simple graphs: loading, validation, persistence, perturbation.

Graphs are immutable values; every perturbation returns a fresh copy, so
thousands of corrupted variants can be scored concurrently against one
shared base graph.
"""

from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from enum import Enum
from typing import Iterable, Sequence

import numpy as np


class GraphError(ValueError):
    """Invalid graph construction or use."""


class EdgeListParseError(GraphError):
    """Malformed edge-list input; carries the offending line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class FlipDirection(str, Enum):
    DELETION = "del"
    ADDITION = "add"


@dataclass(frozen=True)
class EdgeFlip:
    """A single symmetric edge toggle, canonical order i < j."""

    i: int
    j: int
    direction: FlipDirection

    def __post_init__(self):
        if self.i == self.j:
            raise GraphError(f"flip on self-pair ({self.i}, {self.j})")
        if self.i > self.j:
            raise GraphError(f"flip pair must be ordered i < j, got ({self.i}, {self.j})")

    @property
    def pair(self) -> tuple[int, int]:
        return (self.i, self.j)

    @staticmethod
    def for_pair(g: "Graph", a: int, b: int) -> "EdgeFlip":
        """Canonical flip for an unordered pair; direction derived from g."""
        if a == b:
            raise GraphError(f"flip on self-pair ({a}, {b})")
        i, j = (a, b) if a < b else (b, a)
        if not (0 <= i and j < g.n):
            raise GraphError(f"pair ({a}, {b}) out of range for n={g.n}")
        direction = FlipDirection.DELETION if g.adjacency[i, j] == 1.0 else FlipDirection.ADDITION
        return EdgeFlip(i, j, direction)


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph with contiguous 0..n-1 node ids.

    ``labels[k]`` is the original label of internal node k; loading sorts
    original labels (numerically when all are integers) to assign ids, so
    runs are deterministic across platforms.
    """

    n: int
    edges: np.ndarray        # (m, 2) int64, each row i < j, lexicographically sorted
    adjacency: np.ndarray    # (n, n) float64 symmetric 0/1, zero diagonal, read-only
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.n <= 0:
            raise GraphError("empty graph rejected")
        adj = self.adjacency
        if adj.shape != (self.n, self.n):
            raise GraphError(f"adjacency shape {adj.shape} != ({self.n}, {self.n})")
        adj.setflags(write=False)
        self.edges.setflags(write=False)

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1).astype(np.int64)

    def label_of(self, k: int) -> str:
        return self.labels[k] if self.labels else str(k)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.adjacency, other.adjacency)
            and self.labels == other.labels
        )

    @staticmethod
    def from_edges(
        edges: Iterable[tuple[int, int]],
        n: int | None = None,
        labels: Sequence[str] | None = None,
    ) -> "Graph":
        """Build a validated graph from 0-based integer edge pairs."""
        pairs = sorted({(min(a, b), max(a, b)) for a, b in edges if a != b})
        if n is None:
            n = 1 + max((j for _, j in pairs), default=-1)
        if n <= 0:
            raise GraphError("empty graph rejected")
        adj = np.zeros((n, n))
        for a, b in pairs:
            if not (0 <= a < n and 0 <= b < n):
                raise GraphError(f"edge ({a}, {b}) out of range for n={n}")
            adj[a, b] = 1.0
            adj[b, a] = 1.0
        edge_arr = np.array(pairs, dtype=np.int64).reshape(len(pairs), 2)
        lab = tuple(labels) if labels is not None else tuple(str(k) for k in range(n))
        if len(lab) != n:
            raise GraphError(f"{len(lab)} labels for {n} nodes")
        return Graph(n=n, edges=edge_arr, adjacency=adj, labels=lab)


def _label_sort_key(labels):
    if all(_is_int(s) for s in labels):
        return lambda s: int(s)
    return lambda s: s


def _is_int(s: str) -> bool:
    try:
        int(s)
        return True
    except ValueError:
        return False


def load_edge_list(source, comment_chars: tuple[str, ...] = ("#", "%")) -> Graph:
    """Parse an edge-list text source (path, file object, str or bytes).

    One node pair per line, whitespace- or comma-separated; extra columns
    (e.g. weights) are ignored.  Lines starting with '#' or '%' are
    comments.  Duplicate pairs (including reversed arcs, which symmetrize
    to one undirected edge) and self-loops are dropped with a warning
    carrying the counts.  Node labels are relabeled to 0..n-1, sorted
    numerically when every label is an integer, else lexicographically.
    """
    if isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            raw = fh.read()
    elif isinstance(source, bytes):
        raw = source
    elif hasattr(source, "read"):
        raw = source.read()
        if isinstance(raw, str):
            raw = raw.encode()
    else:
        raise TypeError(f"cannot read edge list from {type(source)!r}")

    seen: set[tuple[str, str]] = set()
    pairs: list[tuple[str, str]] = []
    n_dup = 0
    n_loops = 0
    for line_no, line in enumerate(raw.decode("utf-8", errors="replace").splitlines(), start=1):
        text = line.strip()
        if not text or text[0] in comment_chars:
            continue
        tokens = text.split(",") if "," in text else text.split()
        tokens = [t.strip() for t in tokens if t.strip()]
        if len(tokens) < 2:
            raise EdgeListParseError(line_no, f"expected two node labels, got {text!r}")
        a, b = tokens[0], tokens[1]
        if a == b:
            n_loops += 1
            continue
        key = (a, b) if a < b else (b, a)
        if key in seen:
            n_dup += 1
            continue
        seen.add(key)
        pairs.append(key)

    if not pairs:
        raise GraphError("empty graph rejected (no edges parsed)")
    if n_dup or n_loops:
        warnings.warn(
            f"dropped {n_dup} duplicate edge(s) and {n_loops} self-loop(s) while loading",
            stacklevel=2,
        )

    label_set = {t for pair in pairs for t in pair}
    key = _label_sort_key(label_set)
    ordered = sorted(label_set, key=key)
    index = {lab: k for k, lab in enumerate(ordered)}
    edges = [(index[a], index[b]) for a, b in pairs]
    return Graph.from_edges(edges, n=len(ordered), labels=ordered)


def save_edge_list(g: Graph, path) -> None:
    """Write one original-label pair per line; round-trips through load_edge_list."""
    with open(path, "w", encoding="utf-8") as fh:
        for a, b in g.edges:
            fh.write(f"{g.label_of(int(a))} {g.label_of(int(b))}\n")


def _components(adj: np.ndarray) -> list[list[int]]:
    n = adj.shape[0]
    seen = np.zeros(n, dtype=bool)
    comps = []
    for start in range(n):
        if seen[start]:
            continue
        queue = deque([start])
        seen[start] = True
        comp = [start]
        while queue:
            u = queue.popleft()
            for v in np.flatnonzero(adj[u]):
                if not seen[v]:
                    seen[v] = True
                    comp.append(int(v))
                    queue.append(int(v))
        comps.append(comp)
    return comps


def connected_component_count(g: Graph) -> int:
    return len(_components(g.adjacency))


def largest_connected_component(g: Graph) -> Graph:
    """Induced subgraph on the largest component, relabeled contiguously.

    Ties between equal-size components keep the one containing the
    smallest node id.
    """
    comps = _components(g.adjacency)
    best = max(comps, key=lambda c: (len(c), -min(c)))
    keep = sorted(best)
    sub_labels = [g.label_of(k) for k in keep]
    order = sorted(range(len(keep)), key=lambda t: _label_sort_key(set(sub_labels))(sub_labels[t]))
    old_ids = [keep[t] for t in order]
    remap = {old: new for new, old in enumerate(old_ids)}
    edges = [
        (remap[int(a)], remap[int(b)])
        for a, b in g.edges
        if int(a) in remap and int(b) in remap
    ]
    return Graph.from_edges(edges, n=len(old_ids), labels=[g.label_of(k) for k in old_ids])


def flip_edge(g: Graph, f: EdgeFlip) -> Graph:
    """Copy of g with a_ij toggled (both triangle entries)."""
    if not (0 <= f.i < g.n and 0 <= f.j < g.n):
        raise GraphError(f"flip ({f.i}, {f.j}) out of range for n={g.n}")
    adj = g.adjacency.copy()
    new_val = 1.0 - adj[f.i, f.j]
    adj[f.i, f.j] = new_val
    adj[f.j, f.i] = new_val
    if new_val == 1.0:
        edges = np.vstack([g.edges, np.array([[f.i, f.j]], dtype=np.int64)])
        edges = edges[np.lexsort((edges[:, 1], edges[:, 0]))]
    else:
        keep = ~((g.edges[:, 0] == f.i) & (g.edges[:, 1] == f.j))
        edges = g.edges[keep]
    return Graph(n=g.n, edges=edges, adjacency=adj, labels=g.labels)


def is_bridge(g: Graph, f: EdgeFlip) -> bool:
    """True iff deleting (i, j) increases the number of connected components."""
    if f.direction is not FlipDirection.DELETION:
        raise GraphError("is_bridge is only defined for deletion flips")
    if g.adjacency[f.i, f.j] != 1.0:
        raise GraphError(f"({f.i}, {f.j}) is not an edge of the graph")
    # BFS from i avoiding the (i, j) edge; bridge iff j becomes unreachable
    n = g.n
    seen = np.zeros(n, dtype=bool)
    seen[f.i] = True
    queue = deque([f.i])
    while queue:
        u = queue.popleft()
        for v in np.flatnonzero(g.adjacency[u]):
            v = int(v)
            if (u == f.i and v == f.j) or (u == f.j and v == f.i):
                continue
            if not seen[v]:
                seen[v] = True
                if v == f.j:
                    return False
                queue.append(v)
    return True


def enumerate_flips(g: Graph) -> list[EdgeFlip]:
    """All n(n-1)/2 canonical flips in lexicographic order."""
    flips = []
    for i in range(g.n):
        row = g.adjacency[i]
        for j in range(i + 1, g.n):
            direction = FlipDirection.DELETION if row[j] == 1.0 else FlipDirection.ADDITION
            flips.append(EdgeFlip(i, j, direction))
    return flips
