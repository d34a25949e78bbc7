import numpy as np
import pytest

from cnesens import EmbeddingConfig, Graph, embed
from cnesens.datasets import bundled_path, load_communities
from cnesens.graphio import load_edge_list


def random_graph(n: int, p: float, seed: int) -> Graph:
    """Erdos-Renyi graph, guaranteed at least one edge."""
    rng = np.random.default_rng(seed)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    if not pairs:
        pairs = [(0, 1)]
    return Graph.from_edges(pairs, n=n)


@pytest.fixture(scope="session")
def karate() -> Graph:
    return load_edge_list(bundled_path("karate.edges"))


@pytest.fixture(scope="session")
def karate_communities() -> dict:
    return load_communities(bundled_path("karate.communities"))


@pytest.fixture(scope="session")
def books105() -> Graph:
    return load_edge_list(bundled_path("books105.edges"))


@pytest.fixture(scope="session")
def books105_communities() -> dict:
    return load_communities(bundled_path("books105.communities"))


@pytest.fixture(scope="session")
def karate_fit(karate):
    cfg = EmbeddingConfig(dim=2, seed=0)
    return cfg.resolved_for(karate), embed(karate, cfg)


@pytest.fixture(scope="session")
def small_fit():
    """Converged fit of a fixed 10-node graph, shared by sensitivity tests."""
    g = random_graph(10, 0.4, seed=11)
    cfg = EmbeddingConfig(dim=2, seed=3).resolved_for(g)
    return g, cfg, embed(g, cfg)
