"""Sensitivity of link predictions to single edge flips.

Three engines score the impact s(i, j) of toggling one adjacency entry,
all measured as KL divergence between the clean link-probability
distribution and the corrupted one:

  * re     -- ground truth: flip, re-fit every coordinate (warm-started
              from the clean optimum), KL over all pairs.
  * ipre   -- incremental partial re-embedding: only the two endpoint
              rows move; KL over the pairs touching them (identical to
              the full-matrix KL, every other entry is unchanged).
  * approx -- closed-form second-order expansion of the KL in the flip,
              using per-node diagonal Hessian blocks for the
              implicit-function gradient of each link probability.

The approx sum runs over the affected pairs {(i,l)} + {(j,l)} only; under
the diagonal-block approximation every other pair has zero gradient, so
this equals the nominal all-pairs sum.  The flipped pair itself is
counted once, through its i-side block.

A full-Hessian variant of the probability gradient is included for
validation; it is never used for production ranking (assembling the
(n*dim)^2 Hessian does not scale).
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import csv
import json

import numpy as np

from .backend import kernels as K
from .cne import PROB_EPS, EmbeddingConfig, EmbeddingError, FitResult, embed
from .graphio import (
    EdgeFlip,
    FlipDirection,
    Graph,
    enumerate_flips,
    flip_edge,
    is_bridge,
)

__all__ = [
    "METHODS",
    "SensitivityScore",
    "HessianBlock",
    "HessianBlockStore",
    "RankedFlip",
    "SensitivityRanking",
    "bernoulli_kl",
    "sensitivity_re",
    "sensitivity_ipre",
    "sensitivity_approx",
    "ipre_reembed",
    "hessian_block",
    "compute_hessian_blocks",
    "grad_link_prob_block",
    "FullHessianSolver",
    "full_hessian",
    "grad_link_prob_exact",
    "approx_scores_exact",
    "enumerate_flips",
    "rank_all",
]

METHODS = ("re", "ipre", "approx")

_MAX_HALVINGS = 60


class SensitivityError(RuntimeError):
    """Scoring a flip failed; carries the flip and any optimizer diagnostics."""

    def __init__(self, message, flip=None, diagnostics=None):
        super().__init__(message)
        self.flip = flip
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class SensitivityScore:
    flip: EdgeFlip
    score: float
    method: str
    disconnects: bool = False
    iterations: int = 0


def bernoulli_kl(P: np.ndarray, Q: np.ndarray) -> float:
    """KL[P || Q] summed over unordered pairs of independent Bernoullis.

    Nonnegative; zero iff the clamped matrices agree elementwise.
    """
    if P.shape != Q.shape or P.shape[0] != P.shape[1]:
        raise ValueError(f"shape mismatch: {P.shape} vs {Q.shape}")
    return float(K.kl_total(np.ascontiguousarray(P), np.ascontiguousarray(Q), PROB_EPS))


# ---------------------------------------------------------------- re / ipre


def sensitivity_re(g: Graph, cfg: EmbeddingConfig, base: FitResult, f: EdgeFlip) -> SensitivityScore:
    """Ground-truth sensitivity: re-embed the corrupted graph, KL over all pairs."""
    corrupted = flip_edge(g, f)
    try:
        refit = embed(corrupted, cfg, init=base.X)
    except EmbeddingError as err:
        raise SensitivityError(f"re-embedding diverged for flip {f.pair}", f, err.diagnostics) from err
    score = bernoulli_kl(base.P, refit.P)
    disconnects = f.direction is FlipDirection.DELETION and is_bridge(g, f)
    return SensitivityScore(f, score, "re", disconnects, refit.diagnostics.iterations)


def ipre_reembed(g: Graph, cfg: EmbeddingConfig, base: FitResult, f: EdgeFlip):
    """Re-optimize only rows i and j on the corrupted graph.

    Returns (x_i, x_j, iterations, converged); every other row of the
    embedding is frozen at the base optimum by construction.
    """
    cfg = cfg.resolved_for(g)
    corrupted = flip_edge(g, f)
    A = corrupted.adjacency
    gamma, alpha = cfg.gamma, cfg.alpha
    X = np.ascontiguousarray(base.X, dtype=np.float64)
    i, j = f.i, f.j
    xi = X[i].copy()
    xj = X[j].copy()

    val, gi, gj = K.rows_objective_gradient(X, xi, xj, i, j, A, gamma, alpha, PROB_EPS)
    if not np.isfinite(val):
        raise SensitivityError(f"non-finite partial objective for flip {f.pair}", f)
    iterations = 0
    converged = False
    while iterations < cfg.max_iter:
        step = cfg.learning_rate
        accepted = False
        cand = val
        xi_c, xj_c = xi, xj
        for _ in range(_MAX_HALVINGS):
            xi_c = xi + step * gi
            xj_c = xj + step * gj
            cand = K.rows_objective(X, xi_c, xj_c, i, j, A, gamma, alpha, PROB_EPS)
            if np.isfinite(cand) and cand >= val:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            converged = True
            break
        if cand - val < cfg.ftol * abs(val):
            converged = True
            break
        xi, xj = xi_c, xj_c
        iterations += 1
        val, gi, gj = K.rows_objective_gradient(X, xi, xj, i, j, A, gamma, alpha, PROB_EPS)
    return xi, xj, iterations, converged


def sensitivity_ipre(g: Graph, cfg: EmbeddingConfig, base: FitResult, f: EdgeFlip) -> SensitivityScore:
    """Two-row re-embedding sensitivity; KL restricted to the affected pairs."""
    cfg = cfg.resolved_for(g)
    xi, xj, iterations, _ = ipre_reembed(g, cfg, base, f)
    X = np.ascontiguousarray(base.X, dtype=np.float64)
    qi, qj = K.link_prob_rows(X, xi, xj, f.i, f.j, cfg.gamma, cfg.alpha, PROB_EPS)
    score = float(K.kl_rows(base.P, qi, qj, f.i, f.j, PROB_EPS))
    disconnects = f.direction is FlipDirection.DELETION and is_bridge(g, f)
    return SensitivityScore(f, score, "ipre", disconnects, iterations)


# ------------------------------------------------------------ hessian blocks


@dataclass(frozen=True)
class HessianBlock:
    node: int
    block: np.ndarray  # (d, d) symmetric


def hessian_block(k: int, X: np.ndarray, P: np.ndarray, g: Graph, cfg: EmbeddingConfig) -> HessianBlock:
    """k-th diagonal block of the objective Hessian.

    H_k = gamma * sum_{l != k} [ (P_kl - a_kl) I
                                 - gamma P_kl (1 - P_kl) (x_k - x_l)(x_k - x_l)^T ]
    """
    gamma = cfg.gamma
    a = g.adjacency[k]
    diff = X[k] - X
    w2 = gamma * gamma * P[k] * (1.0 - P[k])
    w2 = w2.copy()
    w2[k] = 0.0
    scal = gamma * float(np.sum(P[k] - a) - (P[k, k] - a[k]))
    block = scal * np.eye(X.shape[1]) - (diff.T * w2) @ diff
    return HessianBlock(node=k, block=block)


@dataclass
class HessianBlockStore:
    """All diagonal blocks plus their (possibly regularized) inverses."""

    blocks: np.ndarray       # (n, d, d)
    inv: np.ndarray          # (n, d, d) inverse of each block
    regularized: np.ndarray  # (n,) bool; True where a ridge or pseudo-inverse was needed
    gamma: float

    @property
    def n(self) -> int:
        return self.blocks.shape[0]


def _invert_block(B: np.ndarray, ridge_scale: float) -> tuple[np.ndarray, bool]:
    """Invert a Hessian block, expected negative definite at an optimum.

    Near-singular blocks get a ridge of ridge_scale * trace(B)/d (the
    shift has the sign of the spectrum, pushing it away from zero),
    escalating by 10x; pathological blocks fall back to a symmetric
    pseudo-inverse with a relative eigenvalue cutoff.
    """
    d = B.shape[0]
    eye = np.eye(d)
    shift = ridge_scale * float(np.trace(B)) / d
    trial = B
    for attempt in range(8):
        try:
            np.linalg.cholesky(-trial)
            return np.linalg.inv(trial), attempt > 0
        except np.linalg.LinAlgError:
            if shift == 0.0:
                break
            trial = B + shift * eye
            shift *= 10.0
    w, V = np.linalg.eigh(B)
    cut = max(float(np.max(np.abs(w))), 1.0) * 1e-12
    winv = np.zeros_like(w)
    good = np.abs(w) > cut
    winv[good] = 1.0 / w[good]
    return (V * winv) @ V.T, True


def compute_hessian_blocks(
    g: Graph, X: np.ndarray, P: np.ndarray, cfg: EmbeddingConfig, ridge_scale: float = 1e-8
) -> HessianBlockStore:
    cfg = cfg.resolved_for(g)
    X = np.ascontiguousarray(X, dtype=np.float64)
    blocks = K.hessian_blocks(X, g.adjacency, np.ascontiguousarray(P), cfg.gamma)
    n = blocks.shape[0]
    inv = np.empty_like(blocks)
    regularized = np.zeros(n, dtype=bool)
    for k in range(n):
        inv[k], regularized[k] = _invert_block(blocks[k], ridge_scale)
    return HessianBlockStore(blocks=blocks, inv=inv, regularized=regularized, gamma=cfg.gamma)


def grad_link_prob_block(
    k: int, l: int, i: int, X: np.ndarray, P: np.ndarray, blocks: HessianBlockStore, cfg: EmbeddingConfig
) -> float:
    """d P_kl / d a_ki under the diagonal-block Hessian approximation.

    Computed as -gamma^2 P_kl (1 - P_kl) (x_k - x_l)^T H_k^{-1} (x_k - x_i).
    """
    if k == l:
        raise ValueError("monitored pair must have k != l")
    p = float(np.clip(P[k, l], PROB_EPS, 1.0 - PROB_EPS))
    sol = blocks.inv[k] @ (X[k] - X[i])
    return float(-(cfg.gamma**2) * p * (1.0 - p) * ((X[k] - X[l]) @ sol))


def sensitivity_approx(
    g: Graph, base: FitResult, f: EdgeFlip, blocks: HessianBlockStore, cfg: EmbeddingConfig
) -> SensitivityScore:
    """Closed-form second-order sensitivity for one flip."""
    cfg = cfg.resolved_for(g)
    X = np.ascontiguousarray(base.X, dtype=np.float64)
    arr = K.approx_scores(
        X,
        np.ascontiguousarray(base.P),
        blocks.inv,
        cfg.gamma,
        np.array([f.i], dtype=np.int64),
        np.array([f.j], dtype=np.int64),
    )
    disconnects = f.direction is FlipDirection.DELETION and is_bridge(g, f)
    return SensitivityScore(f, float(arr[0]), "approx", disconnects)


# ------------------------------------------------- exact full-Hessian route


def full_hessian(g: Graph, X: np.ndarray, P: np.ndarray, cfg: EmbeddingConfig, max_size: int = 600) -> np.ndarray:
    """Assemble the (n*d, n*d) objective Hessian from its pair terms.

    Guarded to n*d <= max_size; validation-scale graphs only.
    """
    cfg = cfg.resolved_for(g)
    n, d = X.shape
    if n * d > max_size:
        raise ValueError(f"full Hessian size n*d = {n * d} exceeds guard {max_size}")
    gamma = cfg.gamma
    A = g.adjacency
    H = np.zeros((n * d, n * d))
    for k in range(n):
        for l in range(k + 1, n):
            p = P[k, l]
            delta = X[k] - X[l]
            M = gamma * (p - A[k, l]) * np.eye(d) - gamma * gamma * p * (1.0 - p) * np.outer(delta, delta)
            sk = slice(k * d, (k + 1) * d)
            sl = slice(l * d, (l + 1) * d)
            H[sk, sk] += M
            H[sl, sl] += M
            H[sk, sl] -= M
            H[sl, sk] -= M
    return H


@dataclass
class FullHessianSolver:
    """Pseudo-inverse solves against the full Hessian.

    The Hessian always carries at least d exact zero modes (global
    translations; its block rows sum to zero) and, at a converged
    optimum, near-zero rotation modes, so solves use a symmetric
    eigendecomposition with a relative cutoff.  The number of dropped
    modes is recorded.
    """

    eigvals: np.ndarray
    eigvecs: np.ndarray
    n_dropped: int
    dim: int

    @staticmethod
    def build(g: Graph, X: np.ndarray, P: np.ndarray, cfg: EmbeddingConfig, rel_cutoff: float = 1e-10):
        H = full_hessian(g, X, P, cfg)
        w, V = np.linalg.eigh(H)
        cut = rel_cutoff * float(np.max(np.abs(w)))
        dropped = int(np.sum(np.abs(w) <= cut))
        winv = np.where(np.abs(w) > cut, w, np.inf)
        return FullHessianSolver(eigvals=winv, eigvecs=V, n_dropped=dropped, dim=X.shape[1])

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        coeff = self.eigvecs.T @ rhs
        coeff = coeff / self.eigvals
        return self.eigvecs @ coeff

    def flip_response(self, X: np.ndarray, i: int, j: int) -> np.ndarray:
        """(n, d) displacement response gamma-free part: H^+ E_ij (x_i - x_j)."""
        n, d = X.shape
        rhs = np.zeros(n * d)
        u = X[i] - X[j]
        rhs[i * d : (i + 1) * d] = u
        rhs[j * d : (j + 1) * d] = -u
        return self.solve(rhs).reshape(n, d)


def grad_link_prob_exact(
    k: int,
    l: int,
    i: int,
    j: int,
    X: np.ndarray,
    P: np.ndarray,
    g: Graph,
    cfg: EmbeddingConfig,
    solver: FullHessianSolver | None = None,
) -> float:
    """d P_kl / d a_ij through the full Hessian (validation only)."""
    cfg = cfg.resolved_for(g)
    if solver is None:
        solver = FullHessianSolver.build(g, X, P, cfg)
    Y = solver.flip_response(X, i, j)
    p = float(np.clip(P[k, l], PROB_EPS, 1.0 - PROB_EPS))
    resp = float((X[k] - X[l]) @ (Y[k] - Y[l]))
    return -(cfg.gamma**2) * p * (1.0 - p) * resp


def approx_scores_exact(
    g: Graph,
    base: FitResult,
    flips: list[EdgeFlip],
    cfg: EmbeddingConfig,
    solver: FullHessianSolver | None = None,
) -> np.ndarray:
    """Second-order scores built from the exact full-Hessian gradients.

    Sums over every unordered pair (the exact gradient is dense), unlike
    the block route where only affected pairs contribute.
    """
    cfg = cfg.resolved_for(g)
    X = np.ascontiguousarray(base.X, dtype=np.float64)
    P = base.P
    if solver is None:
        solver = FullHessianSolver.build(g, X, P, cfg)
    n = g.n
    iu = np.triu_indices(n, k=1)
    pvals = np.clip(P[iu], PROB_EPS, 1.0 - PROB_EPS)
    weight = pvals * (1.0 - pvals)
    g4 = cfg.gamma**4
    out = np.empty(len(flips))
    for t, f in enumerate(flips):
        Y = solver.flip_response(X, f.i, f.j)
        C = X @ Y.T
        s = np.diag(C)
        M = s[:, None] + s[None, :] - C - C.T
        out[t] = 0.5 * g4 * float(np.sum(weight * (M[iu] ** 2)))
    return out


# ------------------------------------------------------------------ ranking


@dataclass(frozen=True)
class RankedFlip:
    rank: int
    i: int
    j: int
    label_i: str
    label_j: str
    direction: str
    method: str
    score: float
    disconnects: bool


@dataclass
class SensitivityRanking:
    method: str
    entries: list[RankedFlip]
    base_hash: str = ""
    config: dict = field(default_factory=dict)
    dataset: str = ""

    def __len__(self) -> int:
        return len(self.entries)

    def flip_set(self) -> frozenset:
        return frozenset((e.i, e.j) for e in self.entries)

    def scores_by_pair(self) -> dict:
        return {(e.i, e.j): e.score for e in self.entries}

    def top(self, k: int) -> list[RankedFlip]:
        return self.entries[:k]

    def save_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["rank", "i", "j", "label_i", "label_j", "direction", "method", "score", "disconnects"]
            )
            for e in self.entries:
                writer.writerow(
                    [e.rank, e.i, e.j, e.label_i, e.label_j, e.direction, e.method, repr(e.score), int(e.disconnects)]
                )

    def save_json(self, path) -> None:
        payload = {
            "method": self.method,
            "dataset": self.dataset,
            "base_hash": self.base_hash,
            "config": self.config,
            "entries": [
                {
                    "rank": e.rank,
                    "i": e.i,
                    "j": e.j,
                    "label_i": e.label_i,
                    "label_j": e.label_j,
                    "direction": e.direction,
                    "method": e.method,
                    "score": e.score,
                    "disconnects": e.disconnects,
                }
                for e in self.entries
            ],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")

    @staticmethod
    def load_json(path) -> "SensitivityRanking":
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        entries = [
            RankedFlip(
                rank=e["rank"],
                i=e["i"],
                j=e["j"],
                label_i=e["label_i"],
                label_j=e["label_j"],
                direction=e["direction"],
                method=e["method"],
                score=float(e["score"]),
                disconnects=bool(e["disconnects"]),
            )
            for e in payload["entries"]
        ]
        return SensitivityRanking(
            method=payload["method"],
            entries=entries,
            base_hash=payload.get("base_hash", ""),
            config=payload.get("config", {}),
            dataset=payload.get("dataset", ""),
        )

    @staticmethod
    def load_csv(path) -> "SensitivityRanking":
        entries = []
        method = ""
        with open(path, "r", encoding="utf-8", newline="") as fh:
            for row in csv.DictReader(fh):
                method = row["method"]
                entries.append(
                    RankedFlip(
                        rank=int(row["rank"]),
                        i=int(row["i"]),
                        j=int(row["j"]),
                        label_i=row["label_i"],
                        label_j=row["label_j"],
                        direction=row["direction"],
                        method=row["method"],
                        score=float(row["score"]),
                        disconnects=bool(int(row["disconnects"])),
                    )
                )
        return SensitivityRanking(method=method, entries=entries)


def load_ranking(path) -> SensitivityRanking:
    text = str(path)
    if text.endswith(".json"):
        return SensitivityRanking.load_json(path)
    return SensitivityRanking.load_csv(path)


# ------------------------------------------------------- sweep orchestration

_POOL: dict = {}


def _pool_init(g: Graph, cfg: EmbeddingConfig, base_X: np.ndarray, base_P: np.ndarray, method: str):
    from .cne import FitDiagnostics

    _POOL["g"] = g
    _POOL["cfg"] = cfg
    _POOL["base"] = FitResult(
        X=base_X, P=base_P, config=cfg,
        diagnostics=FitDiagnostics(0, True, 0.0, ()),
    )
    _POOL["method"] = method


def _pool_score(chunk):
    g = _POOL["g"]
    cfg = _POOL["cfg"]
    base = _POOL["base"]
    scorer = sensitivity_re if _POOL["method"] == "re" else sensitivity_ipre
    out = []
    for idx, i, j in chunk:
        f = EdgeFlip.for_pair(g, i, j)
        s = scorer(g, cfg, base, f)
        out.append((idx, s.score, s.iterations))
    return out


def _score_reembedding(g, cfg, base, flips, method, threads):
    tasks = [(idx, f.i, f.j) for idx, f in enumerate(flips)]
    scores = np.empty(len(flips))
    iters = np.zeros(len(flips), dtype=np.int64)
    if threads <= 1 or len(flips) < 4:
        scorer = sensitivity_re if method == "re" else sensitivity_ipre
        for idx, f in enumerate(flips):
            s = scorer(g, cfg, base, f)
            scores[idx] = s.score
            iters[idx] = s.iterations
        return scores, iters
    chunk_count = max(threads * 4, 1)
    chunks = [tasks[c::chunk_count] for c in range(chunk_count)]
    chunks = [c for c in chunks if c]
    with ProcessPoolExecutor(
        max_workers=threads,
        initializer=_pool_init,
        initargs=(g, cfg, base.X, base.P, method),
    ) as pool:
        for part in pool.map(_pool_score, chunks):
            for idx, score, it in part:
                scores[idx] = score
                iters[idx] = it
    return scores, iters


def rank_all(
    g: Graph,
    cfg: EmbeddingConfig,
    method: str,
    *,
    base: FitResult | None = None,
    exclude_bridges: bool = False,
    only: str | None = None,
    threads: int = 1,
    dataset: str = "",
) -> SensitivityRanking:
    """Score every candidate flip with one method and rank descending.

    Ties break deterministically by (score desc, (i, j) lexicographic).
    ``only`` restricts to "del" or "add" flips; ``exclude_bridges`` drops
    deletions that would disconnect the graph (they are otherwise ranked
    like any flip, flagged via ``disconnects``).
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    cfg = cfg.resolved_for(g)
    if base is None:
        base = embed(g, cfg)

    flips = enumerate_flips(g)
    if only == "del":
        flips = [f for f in flips if f.direction is FlipDirection.DELETION]
    elif only == "add":
        flips = [f for f in flips if f.direction is FlipDirection.ADDITION]
    elif only is not None:
        raise ValueError(f"only must be 'del', 'add' or None, got {only!r}")

    bridge = {
        f.pair: is_bridge(g, f)
        for f in flips
        if f.direction is FlipDirection.DELETION
    }
    if exclude_bridges:
        flips = [f for f in flips if not bridge.get(f.pair, False)]

    if not flips:
        return SensitivityRanking(
            method=method, entries=[], base_hash=base.embedding_hash,
            config=cfg.to_dict(), dataset=dataset,
        )

    if method == "approx":
        blocks = compute_hessian_blocks(g, base.X, base.P, cfg)
        ii = np.array([f.i for f in flips], dtype=np.int64)
        jj = np.array([f.j for f in flips], dtype=np.int64)
        scores = K.approx_scores(
            np.ascontiguousarray(base.X, dtype=np.float64),
            np.ascontiguousarray(base.P),
            blocks.inv,
            cfg.gamma,
            ii,
            jj,
        )
    else:
        scores, _ = _score_reembedding(g, cfg, base, flips, method, threads)

    order = sorted(range(len(flips)), key=lambda t: (-scores[t], flips[t].i, flips[t].j))
    entries = []
    for rank, t in enumerate(order, start=1):
        f = flips[t]
        entries.append(
            RankedFlip(
                rank=rank,
                i=f.i,
                j=f.j,
                label_i=g.label_of(f.i),
                label_j=g.label_of(f.j),
                direction=f.direction.value,
                method=method,
                score=float(scores[t]),
                disconnects=bridge.get(f.pair, False),
            )
        )
    return SensitivityRanking(
        method=method,
        entries=entries,
        base_hash=base.embedding_hash,
        config=cfg.to_dict(),
        dataset=dataset,
    )
