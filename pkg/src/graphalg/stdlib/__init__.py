"""Bundled GraphAlg programs."""

from __future__ import annotations

from importlib import resources

# program name -> (file, entry function)
PROGRAMS = {
    "reach": ("reach.gr", "reach"),
    "bfs": ("bfs.gr", "bfs"),
    "sssp": ("sssp.gr", "sssp"),
    "pr": ("pr.gr", "pagerank"),
    "wcc": ("wcc.gr", "wcc"),
    "pick_first": ("pick_first.gr", "pick_first"),
}


def source(name: str) -> str:
    """The source text of a bundled program."""
    if name not in PROGRAMS:
        raise KeyError(f"unknown stdlib program {name!r}")
    fname, _ = PROGRAMS[name]
    return resources.files(__package__).joinpath(fname).read_text()


def entry_function(name: str) -> str:
    return PROGRAMS[name][1]
