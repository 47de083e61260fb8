"""Go-with-the-Winners on layered trees.

Two jump rules are implemented: walkers stranded at leaves copy a random
surviving *walker* (the classic algorithm) or a random occupied *node* (the
variant).  Both advance the whole population one layer per step.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .graph import WeightedGraph

__all__ = ["GwwState", "gww_star_step", "gww_variant_step", "run_gww"]


@dataclass
class GwwState:
    """Walker positions, all at a common depth."""

    positions: np.ndarray
    rng: np.random.Generator

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.int64)

    @classmethod
    def at_root(cls, g: WeightedGraph, n_walkers: int, seed) -> "GwwState":
        root = g.layer(0)[0]
        return cls(
            positions=np.full(n_walkers, root, dtype=np.int64),
            rng=np.random.default_rng(seed),
        )


class _ChildSampler:
    """Vectorized child selection: padded child matrix plus per-vertex
    cumulative probabilities."""

    def __init__(self, g: WeightedGraph, weight_fn: Callable[[float], float] | None):
        kmax = max((len(g.children(v)) for v in range(g.n)), default=0)
        self.kids = np.full((g.n, max(kmax, 1)), -1, dtype=np.int64)
        self.cum = np.ones((g.n, max(kmax, 1)))
        self.n_kids = np.zeros(g.n, dtype=np.int64)
        for v in range(g.n):
            kids = g.children(v)
            if not kids:
                continue
            self.n_kids[v] = len(kids)
            self.kids[v, : len(kids)] = kids
            if weight_fn is None:
                p = np.full(len(kids), 1.0 / len(kids))
            else:
                raw = np.array([weight_fn(g.edge_weight(v, c)) for c in kids])
                p = raw / raw.sum()
            self.cum[v, : len(kids)] = np.cumsum(p)
            self.cum[v, len(kids) :] = 1.0

    def is_leaf(self, positions: np.ndarray) -> np.ndarray:
        return self.n_kids[positions] == 0

    def sample(self, positions: np.ndarray, u: np.ndarray) -> np.ndarray:
        slot = (u[:, None] > self.cum[positions]).sum(axis=1)
        slot = np.minimum(slot, np.maximum(self.n_kids[positions] - 1, 0))
        return self.kids[positions, slot]


def _move_phase(s: GwwState, table: _ChildSampler) -> tuple[np.ndarray, np.ndarray]:
    """Advance non-leaf walkers to a random child; return (half-step
    positions, mask of walkers that moved)."""
    u = s.rng.random(s.positions.size)
    moved = ~table.is_leaf(s.positions)
    half = np.where(moved, table.sample(s.positions, u), s.positions)
    return half, moved


def gww_star_step(s: GwwState, g: WeightedGraph, table=None):
    """One stage of the classic algorithm.  Returns the new state, or a
    single output vertex once every walker sits on a leaf.

    Stranded walkers copy the new position of a uniformly random moving
    walker (walker-uniform jump).
    """
    if table is None:
        table = _ChildSampler(g, None)
    if table.is_leaf(s.positions).all():
        return int(s.rng.choice(s.positions))
    half, moved = _move_phase(s, table)
    stranded = np.flatnonzero(~moved)
    if stranded.size:
        movers = np.flatnonzero(moved)
        donors = movers[s.rng.integers(0, movers.size, size=stranded.size)]
        half[stranded] = half[donors]
    return GwwState(positions=half, rng=s.rng)


def gww_variant_step(s: GwwState, g: WeightedGraph, table=None):
    """One stage of the variant: stranded walkers jump to a uniformly random
    occupied node of the next layer (node-uniform jump)."""
    if table is None:
        table = _ChildSampler(g, None)
    if table.is_leaf(s.positions).all():
        return int(s.rng.choice(s.positions))
    half, moved = _move_phase(s, table)
    stranded = np.flatnonzero(~moved)
    if stranded.size:
        nodes = np.unique(half[moved])
        half[stranded] = nodes[s.rng.integers(0, nodes.size, size=stranded.size)]
    return GwwState(positions=half, rng=s.rng)


def run_gww(
    g: WeightedGraph,
    n_walkers: int,
    seed,
    variant: bool = False,
    weight_fn: Callable[[float], float] | None = None,
    max_steps: int | None = None,
) -> tuple[int, np.ndarray]:
    """Run either algorithm to completion.

    Returns the output vertex and the final walker positions (for success
    statistics over the whole population).
    """
    step = gww_variant_step if variant else gww_star_step
    table = _ChildSampler(g, weight_fn)
    s = GwwState.at_root(g, n_walkers, seed)
    limit = max_steps if max_steps is not None else 4 * g.max_depth + 4
    for _ in range(limit):
        result = step(s, g, table)
        if isinstance(result, int):
            return result, s.positions
        s = result
    raise RuntimeError("GWW did not terminate within the step limit")
