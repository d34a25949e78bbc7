"""Dataset resolution: bundled files, a user data directory, explicit overrides.

Lookup order for a named dataset:
  1. explicit override mapping (CLI ``--datasets name=path``)
  2. ``<data_dir>/<name>.edges`` where data_dir comes from the
     ``CNESENS_DATA_DIR`` environment variable or ``--data-dir``
  3. bundled fallbacks (karate; books105 standing in for polbooks;
     bench332 standing in for usair-scale benchmarks)

Real polbooks/celegans/usair/mp/polblogs files are user-supplied; the
ACQUISITION text tells an analyst where to look.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .graphio import Graph, load_edge_list

ENV_DATA_DIR = "CNESENS_DATA_DIR"

# name -> bundled file, and whether the bundle is the real dataset or a stand-in
_BUNDLED = {
    "karate": ("karate.edges", True),
    "books105": ("books105.edges", True),
    "bench332": ("bench332.edges", True),
    "polbooks": ("books105.edges", False),
    "usair": ("bench332.edges", False),
}

ACQUISITION = (
    "supply real network files as '<name>.edges' (one node pair per line, "
    "'#'/'%' comments) via --datasets name=path or a directory given by "
    f"--data-dir / ${ENV_DATA_DIR}; polbooks/polblogs originate from public "
    "network-repository mirrors of the political-books and political-blogs "
    "networks, celegans/usair from the standard connectome/airline compilations"
)


@dataclass(frozen=True)
class ResolvedDataset:
    name: str
    path: Path
    is_stand_in: bool   # bundled synthetic replacement, not the real network
    source: str         # "override" | "data-dir" | "bundled"


def bundled_path(filename: str) -> Path:
    return Path(resources.files("cnesens").joinpath("data", filename))  # type: ignore[arg-type]


def resolve_dataset(
    name: str,
    overrides: dict[str, str] | None = None,
    data_dir: str | os.PathLike | None = None,
    allow_stand_in: bool = True,
) -> ResolvedDataset | None:
    overrides = overrides or {}
    if name in overrides:
        return ResolvedDataset(name, Path(overrides[name]), False, "override")
    directory = data_dir or os.environ.get(ENV_DATA_DIR)
    if directory:
        cand = Path(directory) / f"{name}.edges"
        if cand.exists():
            return ResolvedDataset(name, cand, False, "data-dir")
    if name in _BUNDLED:
        filename, is_real = _BUNDLED[name]
        if is_real or allow_stand_in:
            return ResolvedDataset(name, bundled_path(filename), not is_real, "bundled")
    return None


def load_dataset(resolved: ResolvedDataset) -> Graph:
    return load_edge_list(resolved.path)


def load_communities(path) -> dict[str, str]:
    """Map node label -> community label from a two-column text file."""
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            text = line.strip()
            if not text or text[0] in "#%":
                continue
            parts = text.split(",") if "," in text else text.split()
            if len(parts) >= 2:
                out[parts[0]] = parts[1]
    return out


def communities_for(resolved: ResolvedDataset) -> dict[str, str] | None:
    """Community labels from the sibling .communities file, if any.

    Only the sibling is consulted: bundled community labels would not
    match the node labels of a user-supplied file.
    """
    sibling = resolved.path.with_suffix(".communities")
    if sibling.exists():
        return load_communities(sibling)
    return None
