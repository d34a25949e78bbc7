"""Ranking-quality and runtime evaluation of the sensitivity engines.

NDCG uses linear gains (relevance = raw ground-truth sensitivity score)
with log2(rank + 1) discounts over the full list; the choice is recorded
in every report so alternate gain functions could be added without
breaking stored comparisons.
"""

from __future__ import annotations

import csv
import json
import math
import platform
import time
from dataclasses import dataclass

import numpy as np

from .backend import BACKEND, kernels as K
from .cne import EmbeddingConfig, FitResult, embed
from .graphio import Graph, enumerate_flips
from .sensitivity import (
    SensitivityRanking,
    compute_hessian_blocks,
    sensitivity_ipre,
    sensitivity_re,
)

GAIN_FUNCTION = "linear"  # relevance = raw score, full-list evaluation


class FlipSetMismatch(ValueError):
    """Compared rankings do not cover the same flips."""

    def __init__(self, only_gt, only_cand):
        msg = (
            f"rankings cover different flip sets: {len(only_gt)} pairs only in "
            f"ground truth (e.g. {sorted(only_gt)[:3]}), {len(only_cand)} only in "
            f"candidate (e.g. {sorted(only_cand)[:3]})"
        )
        super().__init__(msg)
        self.only_gt = only_gt
        self.only_cand = only_cand


def _discounts(m: int) -> np.ndarray:
    return 1.0 / np.log2(np.arange(2, m + 2, dtype=np.float64))


def ndcg_from_relevance(rel_in_cand_order: np.ndarray) -> float:
    """NDCG of a candidate ordering given ground-truth relevances in that order."""
    rel = np.ascontiguousarray(rel_in_cand_order, dtype=np.float64)
    disc = _discounts(rel.shape[0])
    dcg = float(rel @ disc)
    # contiguous descending copy so an already-ideal ordering dots to the
    # bit-identical value and self-NDCG is exactly 1.0
    ideal_rel = np.ascontiguousarray(np.sort(rel)[::-1])
    ideal = float(ideal_rel @ disc)
    if ideal == 0.0:
        return 1.0  # all-zero relevance: every ordering is ideal
    return dcg / ideal


def _aligned_relevance(gt: SensitivityRanking, cand: SensitivityRanking) -> np.ndarray:
    gt_scores = gt.scores_by_pair()
    cand_pairs = [(e.i, e.j) for e in cand.entries]
    gt_set = set(gt_scores)
    cand_set = set(cand_pairs)
    if gt_set != cand_set:
        raise FlipSetMismatch(gt_set - cand_set, cand_set - gt_set)
    return np.array([gt_scores[p] for p in cand_pairs], dtype=np.float64)


def ndcg(gt: SensitivityRanking, cand: SensitivityRanking) -> float:
    """Ranking agreement in [0, 1]; 1.0 iff the candidate sorts like the ground truth."""
    return ndcg_from_relevance(_aligned_relevance(gt, cand))


@dataclass(frozen=True)
class RandomizationResult:
    p_value: float        # add-one smoothed: (1 + count_ge) / (n_samples + 1)
    count_ge: int
    n_samples: int
    observed_ndcg: float

    @property
    def display(self) -> str:
        return "<0.001" if self.count_ge == 0 and self.n_samples >= 999 else f"{self.p_value:.4f}"


def randomization_test(
    gt: SensitivityRanking, cand: SensitivityRanking, n_samples: int = 1000, seed: int = 0
) -> RandomizationResult:
    """Permutation p-value for the observed NDCG.

    Samples uniformly random orderings of the flips (permutations of the
    relevance sequence) and counts those whose NDCG reaches the observed
    value.  Samples depend only on the ground truth and the seed, so for
    a fixed seed a better candidate ordering can never get a larger
    p-value.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rel = _aligned_relevance(gt, cand)
    observed = ndcg_from_relevance(rel)
    rel_sorted = np.ascontiguousarray(np.sort(rel)[::-1])
    disc = _discounts(rel.shape[0])
    ideal = float(rel_sorted @ disc)
    rng = np.random.default_rng(seed)
    count = 0
    if ideal == 0.0:
        count = n_samples  # degenerate: every ordering ties the observed 1.0
    else:
        for _ in range(n_samples):
            sample = float(rng.permutation(rel_sorted) @ disc) / ideal
            if sample >= observed:
                count += 1
    return RandomizationResult(
        p_value=(1 + count) / (n_samples + 1),
        count_ge=count,
        n_samples=n_samples,
        observed_ndcg=observed,
    )


@dataclass(frozen=True)
class RankingComparison:
    dataset: str
    gt_method: str
    cand_method: str
    ndcg: float
    p_value: float
    p_display: str
    n_samples: int
    n_flips: int
    gain: str = GAIN_FUNCTION

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "ground_truth": self.gt_method,
            "candidate": self.cand_method,
            "ndcg": self.ndcg,
            "p_value": self.p_value,
            "p_display": self.p_display,
            "n_samples": self.n_samples,
            "n_flips": self.n_flips,
            "gain": self.gain,
        }


def compare_rankings(
    gt: SensitivityRanking,
    cand: SensitivityRanking,
    n_samples: int = 1000,
    seed: int = 0,
    dataset: str = "",
) -> RankingComparison:
    value = ndcg(gt, cand)
    rand = randomization_test(gt, cand, n_samples=n_samples, seed=seed)
    return RankingComparison(
        dataset=dataset or gt.dataset or cand.dataset,
        gt_method=gt.method,
        cand_method=cand.method,
        ndcg=value,
        p_value=rand.p_value,
        p_display=rand.display,
        n_samples=n_samples,
        n_flips=len(gt.entries),
    )


def write_comparisons_csv(comparisons, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dataset", "candidate", "ground_truth", "ndcg", "p_value", "p_display", "n_samples", "gain"])
        for c in comparisons:
            writer.writerow(
                [c.dataset, c.cand_method, c.gt_method, f"{c.ndcg:.6f}", f"{c.p_value:.6f}", c.p_display, c.n_samples, c.gain]
            )


def write_comparisons_json(comparisons, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([c.to_dict() for c in comparisons], fh, indent=2)
        fh.write("\n")


def spearman(x, y) -> float:
    """Spearman rank correlation with average ranks for ties."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("spearman expects two equal-length 1-D arrays")
    rx = _average_ranks(x)
    ry = _average_ranks(y)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = math.sqrt(float(rx @ rx) * float(ry @ ry))
    if denom == 0.0:
        return 0.0
    return float(rx @ ry) / denom


def _average_ranks(v: np.ndarray) -> np.ndarray:
    order = np.argsort(v, kind="stable")
    ranks = np.empty(v.shape[0], dtype=np.float64)
    sv = v[order]
    k = 0
    while k < len(sv):
        e = k
        while e + 1 < len(sv) and sv[e + 1] == sv[k]:
            e += 1
        ranks[order[k : e + 1]] = 0.5 * (k + e) + 1.0
        k = e + 1
    return ranks


# ------------------------------------------------------------------- timing


@dataclass(frozen=True)
class TimingRecord:
    method: str
    dataset: str
    seconds_per_flip: float
    flips_measured: int
    precompute_seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "dataset": self.dataset,
            "seconds_per_flip": self.seconds_per_flip,
            "flips_measured": self.flips_measured,
            "precompute_seconds": self.precompute_seconds,
        }


def environment_metadata() -> dict:
    return {
        "platform": platform.platform(),
        "python": platform.python_version(),
        "processor": platform.processor() or platform.machine(),
        "backend": BACKEND,
    }


def benchmark_runtime(
    g: Graph,
    cfg: EmbeddingConfig,
    methods=("re", "ipre", "approx"),
    sample_flips: int = 10,
    seed: int = 0,
    dataset: str = "",
    base: FitResult | None = None,
) -> list[TimingRecord]:
    """Mean wall-clock seconds per flip for each engine.

    The one-time clean embedding is excluded.  re/ipre run on a random
    sample of flips; approx runs its full sweep (the per-flip cost is
    what matters) with the shared Hessian-block precomputation timed
    separately.  Runs are serial so per-flip numbers stay comparable.
    """
    if sample_flips < 1:
        raise ValueError("sample_flips must be >= 1")
    cfg = cfg.resolved_for(g)
    if base is None:
        base = embed(g, cfg)
    flips = enumerate_flips(g)
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(flips), size=min(sample_flips, len(flips)), replace=False)
    sample = [flips[t] for t in idx]

    records = []
    for method in methods:
        if method == "re":
            t0 = time.perf_counter()
            for f in sample:
                sensitivity_re(g, cfg, base, f)
            dt = time.perf_counter() - t0
            records.append(TimingRecord("re", dataset, dt / len(sample), len(sample)))
        elif method == "ipre":
            t0 = time.perf_counter()
            for f in sample:
                sensitivity_ipre(g, cfg, base, f)
            dt = time.perf_counter() - t0
            records.append(TimingRecord("ipre", dataset, dt / len(sample), len(sample)))
        elif method == "approx":
            t0 = time.perf_counter()
            blocks = compute_hessian_blocks(g, base.X, base.P, cfg)
            t_pre = time.perf_counter() - t0
            ii = np.array([f.i for f in flips], dtype=np.int64)
            jj = np.array([f.j for f in flips], dtype=np.int64)
            X = np.ascontiguousarray(base.X, dtype=np.float64)
            P = np.ascontiguousarray(base.P)
            K.approx_scores(X, P, blocks.inv, cfg.gamma, ii[:1], jj[:1])  # warm any JIT
            t0 = time.perf_counter()
            K.approx_scores(X, P, blocks.inv, cfg.gamma, ii, jj)
            dt = time.perf_counter() - t0
            records.append(TimingRecord("approx", dataset, dt / len(flips), len(flips), t_pre))
        else:
            raise ValueError(f"unknown method {method!r}")
    return records


def write_timings_csv(records, path, metadata: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        meta = metadata or environment_metadata()
        for key, value in meta.items():
            fh.write(f"# {key}: {value}\n")
        writer.writerow(["dataset", "method", "seconds_per_flip", "flips_measured", "precompute_seconds"])
        for r in records:
            writer.writerow(
                [r.dataset, r.method, f"{r.seconds_per_flip:.8f}", r.flips_measured, f"{r.precompute_seconds:.6f}"]
            )
