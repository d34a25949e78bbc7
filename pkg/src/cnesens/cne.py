"""Conditional network embedding: maximum-likelihood fit and link probabilities.

The model places nodes in R^d and scores each unordered pair through a
Bayes ratio of two half-normal distance densities

    P(a_kl = 1 | X) = pi * N+(d_kl; sigma1) /
                      [pi * N+(d_kl; sigma1) + (1 - pi) * N+(d_kl; sigma2)]

with N+(x; sigma) = sqrt(2/pi) / sigma * exp(-x^2 / (2 sigma^2)).  That
ratio collapses to a logistic in the squared distance,

    P = sigmoid(alpha - gamma * d_kl^2 / 2),
    gamma = 1/sigma1^2 - 1/sigma2^2,
    alpha = logit(pi) + log(sigma2 / sigma1),

which is the form the kernels evaluate.  The likelihood depends on X only
through pairwise distances, so fits are translation/rotation-invariant;
no alignment is performed and none is needed downstream.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .backend import BACKEND, kernels as K
from .graphio import Graph, GraphError

# probabilities are clamped to [PROB_EPS, 1 - PROB_EPS] before any log or
# division; keeps the likelihood and the KL quadratic form finite
PROB_EPS = 1e-12

_MAX_HALVINGS = 60


class EmbeddingError(RuntimeError):
    """Optimization failed; carries the diagnostics gathered so far."""

    def __init__(self, message: str, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class EmbeddingConfig:
    """Model and optimizer settings.

    sigma1 is fixed at 1.0 by default (the natural normalization; only
    the sigma1 < sigma2 ordering matters, and it is recorded in the fit
    diagnostics).  prior_pi=None resolves to the graph density at fit
    time, clamped into (0, 1).
    """

    dim: int = 2
    sigma1: float = 1.0
    sigma2: float = 2.0
    prior_pi: Optional[float] = None
    learning_rate: float = 0.2
    max_iter: int = 2000
    ftol: float = 1e-7
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if not (0.0 < self.sigma1 < self.sigma2):
            raise ValueError(f"need 0 < sigma1 < sigma2, got {self.sigma1}, {self.sigma2}")
        if self.prior_pi is not None and not (0.0 < self.prior_pi < 1.0):
            raise ValueError(f"prior_pi must lie in (0, 1), got {self.prior_pi}")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if self.max_iter < 0:
            raise ValueError("max_iter must be >= 0")
        if self.ftol < 0.0:
            raise ValueError("ftol must be >= 0")

    @property
    def gamma(self) -> float:
        return 1.0 / self.sigma1**2 - 1.0 / self.sigma2**2

    @property
    def alpha(self) -> float:
        """Distance-independent term of the link log-odds."""
        if self.prior_pi is None:
            raise ValueError("prior_pi unresolved; call resolved_for(graph) first")
        return math.log(self.prior_pi / (1.0 - self.prior_pi)) + math.log(self.sigma2 / self.sigma1)

    def resolved_for(self, g: Graph) -> "EmbeddingConfig":
        """Concrete config for a graph: density prior unless one was given."""
        if self.prior_pi is not None:
            return self
        density = g.num_edges / (g.n * (g.n - 1) / 2)
        return replace(self, prior_pi=float(np.clip(density, 1e-6, 1.0 - 1e-6)))

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "sigma1": self.sigma1,
            "sigma2": self.sigma2,
            "prior_pi": self.prior_pi,
            "learning_rate": self.learning_rate,
            "max_iter": self.max_iter,
            "ftol": self.ftol,
            "seed": self.seed,
            "gamma": self.gamma,
        }


@dataclass(frozen=True)
class FitDiagnostics:
    iterations: int
    converged: bool
    final_objective: float
    objective_trace: tuple[float, ...]
    backend: str = BACKEND

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "final_objective": self.final_objective,
            "objective_trace_len": len(self.objective_trace),
            "backend": self.backend,
        }


@dataclass(frozen=True)
class FitResult:
    """Converged coordinates, their link-probability matrix, and how we got there."""

    X: np.ndarray                 # (n, dim)
    P: np.ndarray                 # (n, n) symmetric, clamped, zero diagonal
    config: EmbeddingConfig       # resolved (concrete prior)
    diagnostics: FitDiagnostics

    @property
    def embedding_hash(self) -> str:
        return embedding_hash(self.X, self.config)


def embedding_hash(X: np.ndarray, cfg: EmbeddingConfig) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(X, dtype=np.float64).tobytes())
    h.update(json.dumps(cfg.to_dict(), sort_keys=True).encode())
    return h.hexdigest()


def link_probability(x_k: np.ndarray, x_l: np.ndarray, cfg: EmbeddingConfig) -> float:
    """P(a_kl = 1 | x_k, x_l); symmetric in its arguments, strictly in (0, 1)."""
    d2 = float(np.sum((np.asarray(x_k, dtype=float) - np.asarray(x_l, dtype=float)) ** 2))
    z = cfg.alpha - 0.5 * cfg.gamma * d2
    p = 1.0 / (1.0 + math.exp(-z)) if z >= 0 else math.exp(z) / (1.0 + math.exp(z))
    return float(min(max(p, PROB_EPS), 1.0 - PROB_EPS))


def link_probability_matrix(X: np.ndarray, cfg: EmbeddingConfig) -> np.ndarray:
    """Elementwise link probabilities over all unordered pairs, symmetric, zero diagonal."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    return K.link_prob_matrix(X, cfg.gamma, cfg.alpha, PROB_EPS)


def log_likelihood(g: Graph, X: np.ndarray, cfg: EmbeddingConfig) -> float:
    """Log of the graph likelihood given coordinates; always <= 0."""
    cfg = cfg.resolved_for(g)
    _check_shape(g, X, cfg)
    X = np.ascontiguousarray(X, dtype=np.float64)
    return float(K.objective(X, g.adjacency, cfg.gamma, cfg.alpha, PROB_EPS))


def log_likelihood_gradient(g: Graph, X: np.ndarray, cfg: EmbeddingConfig) -> np.ndarray:
    """(n, dim) gradient; row i = gamma * sum_{j != i} (a_ij - P_ij)(x_j - x_i)."""
    cfg = cfg.resolved_for(g)
    _check_shape(g, X, cfg)
    X = np.ascontiguousarray(X, dtype=np.float64)
    _, grad = K.objective_gradient(X, g.adjacency, cfg.gamma, cfg.alpha, PROB_EPS)
    return grad


def _check_shape(g: Graph, X: np.ndarray, cfg: EmbeddingConfig) -> None:
    if X.shape != (g.n, cfg.dim):
        raise GraphError(f"coordinates shape {X.shape} != ({g.n}, {cfg.dim})")


def initial_coordinates(g: Graph, cfg: EmbeddingConfig) -> np.ndarray:
    """Seeded zero-mean unit-spread Gaussian start."""
    rng = np.random.default_rng(cfg.seed)
    return rng.standard_normal((g.n, cfg.dim))


def embed(g: Graph, cfg: EmbeddingConfig, init: Optional[np.ndarray] = None) -> FitResult:
    """Fit coordinates by monotone full-batch gradient ascent.

    Fixed step (learning_rate) with step halving whenever a step would
    decrease the objective; stops when the best available step improves
    the objective by less than ftol * |objective| (that sub-tolerance
    step is not taken, so re-fitting an already-converged embedding is an
    exact no-op) or when max_iter accepted steps have been taken.
    """
    cfg = cfg.resolved_for(g)
    if init is not None:
        _check_shape(g, init, cfg)
        X = np.array(init, dtype=np.float64)
    else:
        X = initial_coordinates(g, cfg)

    A = g.adjacency
    gamma, alpha = cfg.gamma, cfg.alpha
    f, grad = K.objective_gradient(X, A, gamma, alpha, PROB_EPS)
    if not np.isfinite(f):
        raise EmbeddingError(
            "non-finite objective at the starting point",
            FitDiagnostics(0, False, float(f), (float(f),)),
        )

    trace = [float(f)]
    iterations = 0
    converged = False
    while iterations < cfg.max_iter:
        step = cfg.learning_rate
        accepted = False
        f_cand = f
        X_cand = X
        for _ in range(_MAX_HALVINGS):
            X_cand = X + step * grad
            f_cand = K.objective(X_cand, A, gamma, alpha, PROB_EPS)
            if np.isfinite(f_cand) and f_cand >= f:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            converged = True
            break
        if f_cand - f < cfg.ftol * abs(f):
            converged = True
            break
        X = X_cand
        iterations += 1
        f, grad = K.objective_gradient(X, A, gamma, alpha, PROB_EPS)
        trace.append(float(f))
        if not np.isfinite(f):
            raise EmbeddingError(
                f"non-finite objective after {iterations} iterations",
                FitDiagnostics(iterations, False, float(f), tuple(trace)),
            )

    P = K.link_prob_matrix(X, gamma, alpha, PROB_EPS)
    diag = FitDiagnostics(
        iterations=iterations,
        converged=converged,
        final_objective=float(f),
        objective_trace=tuple(trace),
    )
    return FitResult(X=X, P=P, config=cfg, diagnostics=diag)


def write_embedding_csv(X: np.ndarray, labels, path) -> None:
    n, d = X.shape
    with open(path, "w", encoding="utf-8") as fh:
        cols = ",".join(f"x{c}" for c in range(d))
        fh.write(f"node,label,{cols}\n")
        for k in range(n):
            coords = ",".join(repr(float(v)) for v in X[k])
            lab = labels[k] if labels else str(k)
            fh.write(f"{k},{lab},{coords}\n")


def read_embedding_csv(path) -> tuple[np.ndarray, list[str]]:
    rows = []
    labels = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        d = len(header) - 2
        for line in fh:
            parts = line.strip().split(",")
            if not parts or parts == [""]:
                continue
            labels.append(parts[1])
            rows.append([float(v) for v in parts[2 : 2 + d]])
    return np.array(rows, dtype=np.float64), labels


def write_fit_diagnostics(fit: FitResult, path) -> None:
    payload = {
        "config": fit.config.to_dict(),
        "embedding_hash": fit.embedding_hash,
        **fit.diagnostics.to_dict(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
