#!/usr/bin/env python3
"""Regenerate the bundled data files under src/cnesens/data/.

Run from the repo root:  python3 scripts/make_datasets.py

Outputs:
  karate.edges / karate.communities
      Zachary's karate club as shipped with networkx (34 nodes, 78
      edges), written with the conventional 1-based node labels; the
      two-faction split comes from the node 'club' attribute.
  books105.edges / books105.communities
      Synthetic stand-in for the political-books co-purchase network:
      a seeded 3-block SBM with n=105 and exactly 441 edges, block
      sizes 43/13/49 and strong assortative structure.  NOT the real
      dataset; used when no real polbooks file is supplied.
  bench332.edges
      Synthetic Barabasi-Albert graph (n=332) for runtime-shape
      benchmarks at the size of the USAir network.
"""

from __future__ import annotations

import sys
from itertools import combinations
from pathlib import Path

import networkx as nx
import numpy as np

DATA = Path(__file__).resolve().parent.parent / "src" / "cnesens" / "data"


def write_edges(path: Path, edges, labels=None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for a, b in sorted(edges):
            la = labels[a] if labels else a
            lb = labels[b] if labels else b
            fh.write(f"{la} {lb}\n")


def make_karate() -> None:
    g = nx.karate_club_graph()
    assert g.number_of_nodes() == 34 and g.number_of_edges() == 78
    # conventional 1-based labels
    edges = [(u + 1, v + 1) for u, v in g.edges()]
    write_edges(DATA / "karate.edges", [(min(e), max(e)) for e in edges])
    with open(DATA / "karate.communities", "w", encoding="utf-8") as fh:
        fh.write("# node community (two-faction split from the club attribute)\n")
        for v in sorted(g.nodes()):
            club = g.nodes[v]["club"].replace(" ", "_")
            fh.write(f"{v + 1} {club}\n")


def make_books105() -> None:
    sizes = {"a": 43, "b": 13, "c": 49}
    # block-pair edge budget: strongly assortative, 441 edges total
    budget = {
        ("a", "a"): 168,
        ("b", "b"): 30,
        ("c", "c"): 198,
        ("a", "b"): 18,
        ("b", "c"): 18,
        ("a", "c"): 9,
    }
    assert sum(budget.values()) == 441
    blocks = {}
    start = 0
    for name in ("a", "b", "c"):
        blocks[name] = list(range(start, start + sizes[name]))
        start += sizes[name]
    n = start

    for seed in range(100):
        rng = np.random.default_rng(seed)
        edges = set()
        ok = True
        for (ba, bb), count in budget.items():
            if ba == bb:
                cand = list(combinations(blocks[ba], 2))
            else:
                cand = [(u, v) for u in blocks[ba] for v in blocks[bb]]
            if count > len(cand):
                ok = False
                break
            take = rng.choice(len(cand), size=count, replace=False)
            edges.update(tuple(sorted(cand[t])) for t in take)
        if not ok or len(edges) != 441:
            continue
        g = nx.Graph(edges)
        g.add_nodes_from(range(n))
        if nx.is_connected(g):
            print(f"books105: seed {seed} gave a connected graph")
            break
    else:
        sys.exit("no seed produced a connected books105 graph")

    write_edges(DATA / "books105.edges", edges)
    with open(DATA / "books105.communities", "w", encoding="utf-8") as fh:
        fh.write("# node community (synthetic 3-block structure)\n")
        for name in ("a", "b", "c"):
            for v in blocks[name]:
                fh.write(f"{v} {name}\n")


def make_bench332() -> None:
    g = nx.barabasi_albert_graph(332, 6, seed=1)
    assert nx.is_connected(g)
    write_edges(DATA / "bench332.edges", [tuple(sorted(e)) for e in g.edges()])
    print(f"bench332: n={g.number_of_nodes()} m={g.number_of_edges()}")


if __name__ == "__main__":
    DATA.mkdir(parents=True, exist_ok=True)
    make_karate()
    make_books105()
    make_bench332()
    print("data files written to", DATA)
