"""Command-line entry point.

Every command writes its artifacts (CSV/JSON) plus a single
``manifest.json`` into the output directory; stdout carries a short
human summary only.  Exit codes: 0 success, 1 computation failure,
2 usage/input error.
"""

from __future__ import annotations

import hashlib
import json
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import __version__
from .backend import BACKEND
from .cne import (
    EmbeddingConfig,
    EmbeddingError,
    embed,
    write_embedding_csv,
    write_fit_diagnostics,
)
from .datasets import ENV_DATA_DIR
from .evaluation import (
    FlipSetMismatch,
    benchmark_runtime,
    compare_rankings,
    environment_metadata,
    write_comparisons_csv,
    write_comparisons_json,
    write_timings_csv,
)
from .graphio import GraphError, load_edge_list
from .reproduce import TABLES, reproduce_table
from .sensitivity import SensitivityError, load_ranking, rank_all


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir: Path, command: str, params: dict, inputs, outputs) -> None:
    manifest = {
        "tool": "cnesens",
        "version": __version__,
        "backend": BACKEND,
        "command": command,
        "params": params,
        "inputs": [
            {"name": name, "path": str(path), "sha256": _sha256(Path(path))}
            for name, path in inputs
        ],
        "outputs": sorted(str(o) for o in outputs),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "environment": environment_metadata(),
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def _out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_graph(path: str):
    try:
        return load_edge_list(path)
    except GraphError as err:
        raise click.UsageError(f"cannot load {path}: {err}") from err


_embed_options = [
    click.option("--dim", default=2, show_default=True, help="embedding dimension"),
    click.option("--sigma1", default=1.0, show_default=True, help="linked-pair half-normal spread"),
    click.option("--sigma2", default=2.0, show_default=True, help="unlinked-pair half-normal spread"),
    click.option("--prior", default=None, type=float,
                 help="prior link probability in (0,1); defaults to graph density"),
    click.option("--lr", default=0.2, show_default=True, help="gradient-ascent learning rate"),
    click.option("--max-iter", default=2000, show_default=True, help="iteration cap"),
    click.option("--ftol", default=1e-7, show_default=True, help="relative objective-change stop"),
    click.option("--seed", default=0, show_default=True, help="RNG seed for initialization"),
]


def embed_options(fn):
    for opt in reversed(_embed_options):
        fn = opt(fn)
    return fn


def _config_from_flags(dim, sigma1, sigma2, prior, lr, max_iter, ftol, seed) -> EmbeddingConfig:
    try:
        return EmbeddingConfig(
            dim=dim, sigma1=sigma1, sigma2=sigma2, prior_pi=prior,
            learning_rate=lr, max_iter=max_iter, ftol=ftol, seed=seed,
        )
    except ValueError as err:
        raise click.UsageError(str(err)) from err


@click.group()
@click.version_option(version=__version__)
def main():
    """Sensitivity of CNE link predictions to single edge flips."""


@main.command(name="embed")
@click.argument("graph_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", default="cnesens_embed", show_default=True, help="output directory")
@click.option("--save-probs", is_flag=True, help="also write the dense link-probability matrix")
@embed_options
def cmd_embed(graph_path, out, save_probs, dim, sigma1, sigma2, prior, lr, max_iter, ftol, seed):
    """Fit the embedding for a graph and persist it."""
    g = _load_graph(graph_path)
    cfg = _config_from_flags(dim, sigma1, sigma2, prior, lr, max_iter, ftol, seed)
    out_dir = _out_dir(out)
    try:
        fit = embed(g, cfg)
    except EmbeddingError as err:
        raise click.ClickException(f"embedding failed: {err}") from err
    outputs = ["embedding.csv", "diagnostics.json"]
    write_embedding_csv(fit.X, g.labels, out_dir / "embedding.csv")
    write_fit_diagnostics(fit, out_dir / "diagnostics.json")
    if save_probs:
        np.savetxt(out_dir / "probabilities.csv", fit.P, delimiter=",")
        outputs.append("probabilities.csv")
    write_manifest(out_dir, "embed", {**fit.config.to_dict(), "save_probs": save_probs},
                   [("graph", graph_path)], outputs)
    d = fit.diagnostics
    click.echo(
        f"embedded n={g.n} m={g.num_edges} dim={cfg.dim}: iterations={d.iterations} "
        f"converged={d.converged} objective={d.final_objective:.4f} -> {out_dir}"
    )


@main.command(name="rank")
@click.argument("graph_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--method", type=click.Choice(["re", "ipre", "approx"]), required=True)
@click.option("--out", default="cnesens_rank", show_default=True, help="output directory")
@click.option("--exclude-bridges", is_flag=True, help="drop deletions that disconnect the graph")
@click.option("--only", type=click.Choice(["del", "add"]), default=None,
              help="restrict to deletions or additions")
@click.option("--top", default=0, show_default=True, help="write only the top K rows (0 = all)")
@click.option("--threads", default=1, show_default=True, help="worker processes for re/ipre sweeps")
@embed_options
def cmd_rank(graph_path, method, out, exclude_bridges, only, top, threads,
             dim, sigma1, sigma2, prior, lr, max_iter, ftol, seed):
    """Score every candidate edge flip and rank by sensitivity."""
    g = _load_graph(graph_path)
    cfg = _config_from_flags(dim, sigma1, sigma2, prior, lr, max_iter, ftol, seed)
    out_dir = _out_dir(out)
    try:
        ranking = rank_all(
            g, cfg, method,
            exclude_bridges=exclude_bridges, only=only, threads=threads,
            dataset=Path(graph_path).stem,
        )
    except (EmbeddingError, SensitivityError) as err:
        raise click.ClickException(f"ranking failed: {err}") from err
    if top > 0:
        ranking.entries = ranking.entries[:top]
    if not ranking.entries:
        click.echo("warning: no flips matched the requested restriction; writing empty ranking", err=True)
    ranking.save_csv(out_dir / "ranking.csv")
    ranking.save_json(out_dir / "ranking.json")
    with open(out_dir / "base_info.json", "w", encoding="utf-8") as fh:
        json.dump({"embedding_hash": ranking.base_hash, "config": ranking.config}, fh, indent=2)
        fh.write("\n")
    params = {**cfg.to_dict(), "method": method, "exclude_bridges": exclude_bridges,
              "only": only, "top": top, "threads": threads}
    write_manifest(out_dir, "rank", params, [("graph", graph_path)],
                   ["ranking.csv", "ranking.json", "base_info.json"])
    click.echo(f"ranked {len(ranking.entries)} flips by {method} -> {out_dir}")
    for e in ranking.top(min(5, len(ranking.entries))):
        flag = " [disconnects]" if e.disconnects else ""
        click.echo(f"  #{e.rank} ({e.label_i},{e.label_j}) {e.direction} score={e.score:.4f}{flag}")


@main.command(name="compare")
@click.argument("ranking_gt", type=click.Path(exists=True, dir_okay=False))
@click.argument("ranking_cand", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", default="cnesens_compare", show_default=True, help="output directory")
@click.option("--samples", default=1000, show_default=True, help="randomization-test samples")
@click.option("--seed", default=0, show_default=True)
@click.option("--dataset", default="", help="dataset name recorded in the report")
def cmd_compare(ranking_gt, ranking_cand, out, samples, seed, dataset):
    """NDCG + randomization-test report for two rankings over the same flips."""
    gt = load_ranking(ranking_gt)
    cand = load_ranking(ranking_cand)
    out_dir = _out_dir(out)
    try:
        comp = compare_rankings(gt, cand, n_samples=samples, seed=seed, dataset=dataset)
    except FlipSetMismatch as err:
        raise click.UsageError(str(err)) from err
    write_comparisons_csv([comp], out_dir / "comparison.csv")
    write_comparisons_json([comp], out_dir / "comparison.json")
    write_manifest(out_dir, "compare", {"samples": samples, "seed": seed},
                   [("ground_truth", ranking_gt), ("candidate", ranking_cand)],
                   ["comparison.csv", "comparison.json"])
    click.echo(
        f"NDCG({comp.cand_method} vs {comp.gt_method}) = {comp.ndcg:.4f}, "
        f"p = {comp.p_display} ({comp.n_samples} samples) -> {out_dir}"
    )


@main.command(name="bench")
@click.argument("graph_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", default="cnesens_bench", show_default=True, help="output directory")
@click.option("--methods", default="re,ipre,approx", show_default=True,
              help="comma-separated methods to time")
@click.option("--sample-flips", default=20, show_default=True,
              help="sampled flips for re/ipre timing")
@embed_options
def cmd_bench(graph_path, out, methods, sample_flips,
              dim, sigma1, sigma2, prior, lr, max_iter, ftol, seed):
    """Per-flip runtime of the sensitivity engines on one graph."""
    g = _load_graph(graph_path)
    cfg = _config_from_flags(dim, sigma1, sigma2, prior, lr, max_iter, ftol, seed)
    method_list = [m.strip() for m in methods.split(",") if m.strip()]
    for m in method_list:
        if m not in ("re", "ipre", "approx"):
            raise click.UsageError(f"unknown method {m!r}")
    out_dir = _out_dir(out)
    records = benchmark_runtime(g, cfg, methods=method_list, sample_flips=sample_flips,
                                seed=seed, dataset=Path(graph_path).stem)
    write_timings_csv(records, out_dir / "timings.csv")
    write_manifest(out_dir, "bench",
                   {**cfg.to_dict(), "methods": method_list, "sample_flips": sample_flips},
                   [("graph", graph_path)], ["timings.csv"])
    for r in records:
        extra = f" (+{r.precompute_seconds:.3f}s precompute)" if r.precompute_seconds else ""
        click.echo(f"{r.method:>7}: {r.seconds_per_flip:.6f} s/flip over {r.flips_measured} flips{extra}")


@main.command(name="reproduce")
@click.argument("table", type=click.Choice(list(TABLES)))
@click.option("--out", default="cnesens_reproduce", show_default=True, help="output directory")
@click.option("--datasets", multiple=True, metavar="NAME=PATH",
              help="explicit dataset files, e.g. polbooks=/data/polbooks.edges")
@click.option("--data-dir", default=None, envvar=ENV_DATA_DIR,
              help=f"directory with <name>.edges files (env {ENV_DATA_DIR})")
@click.option("--threads", default=1, show_default=True)
@click.option("--seed", default=None, type=int,
              help="fit seed (default: the bundled reproduction seed)")
def cmd_reproduce(table, out, datasets, data_dir, threads, seed):
    """Rerun a published table and emit published-vs-reproduced CSVs."""
    overrides = {}
    for spec_item in datasets:
        if "=" not in spec_item:
            raise click.UsageError(f"--datasets expects NAME=PATH, got {spec_item!r}")
        name, _, path = spec_item.partition("=")
        if not Path(path).exists():
            raise click.UsageError(f"dataset file not found: {path}")
        overrides[name] = path
    out_dir = _out_dir(Path(out) / table)
    from .reproduce import CASE_STUDY_SEED

    if seed is None:
        seed = CASE_STUDY_SEED
    try:
        result = reproduce_table(table, out_dir, overrides=overrides, data_dir=data_dir,
                                 threads=threads, seed=seed)
    except (EmbeddingError, SensitivityError) as err:
        raise click.ClickException(f"reproduction failed: {err}") from err
    write_manifest(out_dir, f"reproduce {table}",
                   {"threads": threads, "seed": seed, "datasets": overrides,
                    "data_dir": str(data_dir) if data_dir else None},
                   [], result.outputs + ["manifest.json"])
    click.echo(f"reproduce {table} -> {out_dir}")
    for key, value in result.summary.items():
        click.echo(f"  {key}: {value}")
    for note in result.skipped:
        click.echo(f"  skipped {note}", err=True)


if __name__ == "__main__":
    sys.exit(main())
