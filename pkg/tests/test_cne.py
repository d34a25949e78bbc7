import math

import numpy as np
import pytest

from cnesens import EmbeddingConfig, Graph, embed
from cnesens.cne import (
    PROB_EPS,
    initial_coordinates,
    link_probability,
    link_probability_matrix,
    log_likelihood,
    log_likelihood_gradient,
    read_embedding_csv,
    write_embedding_csv,
)

from conftest import random_graph


def half_normal_link_probability(x_k, x_l, sigma1, sigma2, prior):
    """Independent oracle: direct Bayes ratio of two half-normal densities."""
    dist = math.sqrt(float(np.sum((np.asarray(x_k) - np.asarray(x_l)) ** 2)))

    def half_normal(x, sigma):
        return math.sqrt(2.0 / math.pi) / sigma * math.exp(-(x**2) / (2.0 * sigma**2))

    num = prior * half_normal(dist, sigma1)
    den = num + (1.0 - prior) * half_normal(dist, sigma2)
    return num / den


class TestConfig:
    def test_invariants_enforced(self):
        with pytest.raises(ValueError):
            EmbeddingConfig(dim=0)
        with pytest.raises(ValueError):
            EmbeddingConfig(sigma1=2.0, sigma2=1.0)
        with pytest.raises(ValueError):
            EmbeddingConfig(prior_pi=1.5)

    def test_gamma(self):
        cfg = EmbeddingConfig(sigma1=1.0, sigma2=2.0)
        assert cfg.gamma == pytest.approx(0.75)

    def test_density_prior(self):
        g = Graph.from_edges([(0, 1), (1, 2)], n=3)
        cfg = EmbeddingConfig().resolved_for(g)
        assert cfg.prior_pi == pytest.approx(2 / 3)


class TestLinkProbability:
    def test_zero_distance_value(self):
        # densities at zero scale as 1/sigma: (1/1) / (1/1 + 1/2) = 2/3
        cfg = EmbeddingConfig(dim=1, sigma1=1.0, sigma2=2.0, prior_pi=0.5)
        p = link_probability(np.array([0.3]), np.array([0.3]), cfg)
        assert p == pytest.approx(2.0 / 3.0, rel=1e-12)

    def test_vanishes_at_large_distance(self):
        cfg = EmbeddingConfig(dim=1, prior_pi=0.4)
        p = link_probability(np.array([0.0]), np.array([40.0]), cfg)
        assert p < 1e-6

    def test_matches_half_normal_bayes_ratio(self):
        rng = np.random.default_rng(7)
        cfg = EmbeddingConfig(dim=3, sigma1=0.8, sigma2=2.5, prior_pi=0.21)
        for _ in range(50):
            a, b = rng.standard_normal(3), rng.standard_normal(3)
            expected = half_normal_link_probability(a, b, 0.8, 2.5, 0.21)
            assert link_probability(a, b, cfg) == pytest.approx(expected, abs=1e-12)

    def test_symmetry(self):
        cfg = EmbeddingConfig(dim=2, prior_pi=0.3)
        a, b = np.array([1.0, 2.0]), np.array([-0.5, 0.25])
        assert link_probability(a, b, cfg) == link_probability(b, a, cfg)

    def test_strictly_inside_unit_interval(self):
        cfg = EmbeddingConfig(dim=1, prior_pi=0.5)
        p = link_probability(np.array([0.0]), np.array([1e4]), cfg)
        assert PROB_EPS <= p <= 1.0 - PROB_EPS


class TestLogLikelihood:
    def test_single_edge_two_nodes(self):
        g = Graph.from_edges([(0, 1)])
        cfg = EmbeddingConfig(dim=1, prior_pi=0.5)
        X = np.array([[0.0], [1.0]])
        p = link_probability(X[0], X[1], cfg)
        assert log_likelihood(g, X, cfg) == pytest.approx(math.log(p), rel=1e-12)

    def test_matches_pairwise_brute_force(self):
        g = random_graph(5, 0.5, seed=4)
        cfg = EmbeddingConfig(dim=2, prior_pi=0.37)
        rng = np.random.default_rng(0)
        X = rng.standard_normal((5, 2))
        total = 0.0
        for i in range(5):
            for j in range(i + 1, 5):
                p = link_probability(X[i], X[j], cfg)
                total += math.log(p) if g.adjacency[i, j] else math.log(1.0 - p)
        assert log_likelihood(g, X, cfg) == pytest.approx(total, rel=1e-12)

    def test_finite_and_nonpositive(self):
        g = random_graph(12, 0.3, seed=1)
        X = 100.0 * np.ones((12, 3))  # coincident and far regimes both clamp
        cfg = EmbeddingConfig(dim=3, prior_pi=0.2)
        val = log_likelihood(g, X, cfg)
        assert np.isfinite(val)
        assert val <= 0.0


class TestGradient:
    def test_zero_at_coincident_points(self):
        g = random_graph(8, 0.4, seed=2)
        cfg = EmbeddingConfig(dim=2, prior_pi=0.3)
        X = np.tile([1.5, -2.0], (8, 1))
        grad = log_likelihood_gradient(g, X, cfg)
        assert np.all(grad == 0.0)

    def test_matches_central_finite_differences(self):
        g = random_graph(10, 0.4, seed=6)
        cfg = EmbeddingConfig(dim=2, prior_pi=0.25)
        rng = np.random.default_rng(1)
        X = rng.standard_normal((10, 2))
        grad = log_likelihood_gradient(g, X, cfg)
        h = 1e-5
        fd = np.zeros_like(X)
        for k in range(10):
            for c in range(2):
                xp, xm = X.copy(), X.copy()
                xp[k, c] += h
                xm[k, c] -= h
                fd[k, c] = (log_likelihood(g, xp, cfg) - log_likelihood(g, xm, cfg)) / (2 * h)
        rel = np.max(np.abs(grad - fd)) / np.max(np.abs(fd))
        assert rel < 1e-5

    def test_edge_pulls_nodes_together(self):
        g = Graph.from_edges([(0, 1)])
        cfg = EmbeddingConfig(dim=2, prior_pi=0.5)
        X = np.array([[0.0, 0.0], [2.0, 1.0]])
        grad = log_likelihood_gradient(g, X, cfg)
        assert grad[0] @ (X[1] - X[0]) > 0.0


class TestLinkProbabilityMatrix:
    def test_two_nodes_symmetric_single_value(self):
        cfg = EmbeddingConfig(dim=1, prior_pi=0.5)
        X = np.array([[0.0], [1.0]])
        P = link_probability_matrix(X, cfg)
        assert P[0, 1] == P[1, 0] == link_probability(X[0], X[1], cfg)
        assert P[0, 0] == P[1, 1] == 0.0

    def test_spot_checks_match_pairwise(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((7, 3))
        cfg = EmbeddingConfig(dim=3, prior_pi=0.4)
        P = link_probability_matrix(X, cfg)
        for i, j in [(0, 1), (2, 5), (4, 6)]:
            assert P[i, j] == pytest.approx(link_probability(X[i], X[j], cfg), abs=1e-14)

    def test_coincident_coordinates_give_constant_matrix(self):
        cfg = EmbeddingConfig(dim=2, prior_pi=0.3)
        X = np.tile([0.7, -0.1], (6, 1))
        P = link_probability_matrix(X, cfg)
        off = P[~np.eye(6, dtype=bool)]
        assert np.all(off == off[0])

    def test_probability_sanity(self, karate_fit):
        _, fit = karate_fit
        off = fit.P[~np.eye(fit.P.shape[0], dtype=bool)]
        assert np.all(off >= PROB_EPS)
        assert np.all(off <= 1.0 - PROB_EPS)
        assert np.array_equal(fit.P, fit.P.T)


class TestEmbed:
    def test_monotone_objective_trace(self, karate_fit):
        _, fit = karate_fit
        trace = np.array(fit.diagnostics.objective_trace)
        assert np.all(np.diff(trace) >= 0.0)

    def test_deterministic_bit_identical(self):
        g = random_graph(12, 0.3, seed=9)
        cfg = EmbeddingConfig(dim=2, seed=5, max_iter=300)
        a = embed(g, cfg)
        b = embed(g, cfg)
        assert np.array_equal(a.X, b.X)
        assert a.embedding_hash == b.embedding_hash

    def test_zero_iterations_returns_init(self):
        g = random_graph(6, 0.5, seed=1)
        cfg = EmbeddingConfig(dim=2, seed=0, max_iter=0)
        init = initial_coordinates(g, cfg.resolved_for(g))
        fit = embed(g, cfg, init=init)
        assert np.array_equal(fit.X, init)
        assert fit.diagnostics.iterations == 0

    def test_warm_start_at_optimum_is_identity(self, small_fit):
        g, cfg, fit = small_fit
        again = embed(g, cfg, init=fit.X)
        assert np.array_equal(again.X, fit.X)
        assert again.diagnostics.iterations == 0

    def test_path_graph_beats_random_embeddings(self):
        g = Graph.from_edges([(0, 1), (1, 2), (2, 3)])
        cfg = EmbeddingConfig(dim=2, seed=0).resolved_for(g)
        fit = embed(g, cfg)
        best_random = -np.inf
        rng = np.random.default_rng(42)
        for _ in range(100):
            X = rng.standard_normal((4, 2))
            best_random = max(best_random, log_likelihood(g, X, cfg))
        assert fit.diagnostics.final_objective >= best_random

    def test_karate_factions_linearly_separable(self, karate, karate_fit, karate_communities):
        _, fit = karate_fit
        y = np.array([1.0 if karate_communities[lab] == "Mr._Hi" else -1.0 for lab in karate.labels])
        X = np.hstack([fit.X, np.ones((karate.n, 1))])
        # tiny logistic fit; the two factions should separate almost perfectly
        w = np.zeros(3)
        for _ in range(500):
            z = X @ w
            w += 0.5 * X.T @ (y / (1.0 + np.exp(y * z))) / karate.n
        accuracy = np.mean(np.sign(X @ w) == y)
        assert accuracy >= 30 / 34


class TestDistanceOrdering:
    def test_mean_edge_distance_below_mean_non_edge_distance(self, karate, karate_fit):
        _, fit = karate_fit
        X = fit.X
        diff = X[:, None, :] - X[None, :, :]
        dist = np.sqrt((diff**2).sum(-1))
        iu = np.triu_indices(karate.n, k=1)
        edge_mask = karate.adjacency[iu] == 1.0
        assert dist[iu][edge_mask].mean() < dist[iu][~edge_mask].mean()


class TestPersistence:
    def test_embedding_csv_round_trip(self, tmp_path, small_fit):
        g, _, fit = small_fit
        path = tmp_path / "embedding.csv"
        write_embedding_csv(fit.X, g.labels, path)
        X, labels = read_embedding_csv(path)
        assert np.array_equal(X, fit.X)
        assert tuple(labels) == g.labels
