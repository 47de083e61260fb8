"""Weighted search graphs, layered trees, and their Laplacians.

Vertices are dense integers 0..n-1 assigned breadth-first from the root so
that regenerating a graph with the same parameters always yields the same
matrices and files.  Each vertex carries an integer "height" (the unitless
objective value); consumers multiply in an energy scale at run time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GraphError",
    "WeightedGraph",
    "Laplacian",
    "laplacian",
    "stage_subgraph",
    "make_comb",
    "make_waterfall",
    "make_hypercube",
    "make_full_binary_tree",
    "make_random_tree",
    "load_graph",
    "save_graph",
]

HYPERCUBE_DIM_CAP = 14


class GraphError(ValueError):
    """Invalid graph structure or query."""


@dataclass(frozen=True)
class WeightedGraph:
    """Undirected weighted graph with per-vertex integer heights.

    ``depth`` is present for layered trees; every edge of a layered graph
    must connect consecutive depths.  ``target`` marks the distinguished
    solution vertex of the benchmark families.
    """

    n: int
    edges: tuple[tuple[int, int, float], ...]
    height: tuple[int, ...]
    depth: tuple[int, ...] | None = None
    target: int | None = None
    _children: dict[int, tuple[int, ...]] = field(
        default=None, repr=False, compare=False
    )

    def __post_init__(self):
        seen = set()
        for u, v, w in self.edges:
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise GraphError(f"edge ({u},{v}) references unknown vertex")
            if u == v:
                raise GraphError(f"self-loop at vertex {u}")
            if w <= 0:
                raise GraphError(f"edge ({u},{v}) has non-positive weight {w}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise GraphError(f"duplicate edge {key}")
            seen.add(key)
        if len(self.height) != self.n:
            raise GraphError("height vector length mismatch")
        if any(h < 0 for h in self.height):
            raise GraphError("heights must be nonnegative")
        if self.depth is not None:
            if len(self.depth) != self.n:
                raise GraphError("depth vector length mismatch")
            for u, v, _ in self.edges:
                if abs(self.depth[u] - self.depth[v]) != 1:
                    raise GraphError(
                        f"edge ({u},{v}) does not connect consecutive depths"
                    )
        object.__setattr__(self, "_children", self._build_children())

    def _build_children(self):
        children: dict[int, list[int]] = {v: [] for v in range(self.n)}
        if self.depth is None:
            return {}
        for u, v, _ in self.edges:
            parent, child = (u, v) if self.depth[u] < self.depth[v] else (v, u)
            children[parent].append(child)
        return {v: tuple(sorted(c)) for v, c in children.items()}

    @property
    def vertices(self) -> range:
        return range(self.n)

    @property
    def max_depth(self) -> int:
        if self.depth is None:
            raise GraphError("graph has no depth labels")
        return max(self.depth)

    def layer(self, j: int) -> list[int]:
        """Vertices at depth j."""
        if self.depth is None:
            raise GraphError("graph has no depth labels")
        return [v for v in range(self.n) if self.depth[v] == j]

    def children(self, v: int) -> tuple[int, ...]:
        """Children of v in depth order (layered graphs only)."""
        if self.depth is None:
            raise GraphError("graph has no depth labels")
        return self._children[v]

    def is_leaf(self, v: int) -> bool:
        return len(self.children(v)) == 0

    def edge_weight(self, u: int, v: int) -> float:
        for a, b, w in self.edges:
            if {a, b} == {u, v}:
                return w
        raise GraphError(f"no edge ({u},{v})")

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for u, v, _ in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def neighbors(self, v: int) -> list[int]:
        out = []
        for a, b, _ in self.edges:
            if a == v:
                out.append(b)
            elif b == v:
                out.append(a)
        return sorted(out)

    def height_array(self) -> np.ndarray:
        return np.asarray(self.height, dtype=float)

    def normalized_objective(self) -> np.ndarray:
        """Heights rescaled into [0, 1]."""
        h = self.height_array()
        top = h.max()
        return h / top if top > 0 else h


@dataclass(frozen=True)
class Laplacian:
    """Dense combinatorial Laplacian restricted to an ordered vertex subset."""

    matrix: np.ndarray
    support: tuple[int, ...]

    def __post_init__(self):
        m = self.matrix
        if m.shape != (len(self.support), len(self.support)):
            raise GraphError("Laplacian shape does not match support")

    def index_of(self, v: int) -> int:
        return self.support.index(v)


def laplacian(g: WeightedGraph, support=None) -> Laplacian:
    """Weighted Laplacian on a vertex subset, keeping only internal edges.

    Off-diagonal entry (y, x) is -w_yx; diagonals make every column sum to
    zero exactly.
    """
    if support is None:
        support = list(g.vertices)
    support = list(support)
    for v in support:
        if not 0 <= v < g.n:
            raise GraphError(f"unknown vertex id {v} in support")
    idx = {v: i for i, v in enumerate(support)}
    m = np.zeros((len(support), len(support)))
    for u, v, w in g.edges:
        if u in idx and v in idx:
            i, j = idx[u], idx[v]
            m[i, j] -= w
            m[j, i] -= w
    # set diagonals from the assembled columns so sums are exactly zero
    np.fill_diagonal(m, -m.sum(axis=0))
    return Laplacian(matrix=m, support=tuple(support))


def stage_subgraph(g: WeightedGraph, j: int) -> Laplacian:
    """Laplacian of the stage-j subgraph: layers j-1 and j plus the edges
    between them.  A layer-j vertex with no children appears with a zero row.
    """
    if g.depth is None:
        raise GraphError("stage subgraph requires depth labels")
    if j < 1:
        raise GraphError("stage index must be >= 1")
    if j > g.max_depth:
        raise GraphError(f"stage {j} exceeds graph depth {g.max_depth}")
    support = sorted(g.layer(j - 1) + g.layer(j))
    idx = {v: i for i, v in enumerate(support)}
    m = np.zeros((len(support), len(support)))
    for u, v, w in g.edges:
        if u in idx and v in idx and {g.depth[u], g.depth[v]} == {j - 1, j}:
            a, b = idx[u], idx[v]
            m[a, b] -= w
            m[b, a] -= w
    np.fill_diagonal(m, -m.sum(axis=0))
    return Laplacian(matrix=m, support=tuple(support))


def _finish_tree(n, edges, depth, target, total_depth):
    height = tuple(total_depth - d for d in depth)
    return WeightedGraph(
        n=n,
        edges=tuple(edges),
        height=height,
        depth=tuple(depth),
        target=target,
    )


def make_comb(depth: int, tooth_lengths: dict[int, int] | None = None) -> WeightedGraph:
    """Comb tree: a spine of length D with one tooth per spine vertex.

    The tooth at spine depth 0 has length D-1 by default; every other tooth
    has length 1.  All weights are 1 and the target is the spine terminus at
    depth D (the bottom-right vertex).
    """
    D = depth
    if D < 2:
        raise GraphError("comb depth must be >= 2")
    lengths = {0: D - 1, **{j: 1 for j in range(1, D)}}
    if tooth_lengths:
        lengths.update(tooth_lengths)
    for j, ell in lengths.items():
        if not 0 <= j < D:
            raise GraphError(f"tooth at depth {j} outside spine")
        if ell < 1 or j + ell > D:
            raise GraphError(f"tooth at depth {j} with length {ell} is out of range")

    edges, depths = [], []
    spine = []
    nid = 0
    # breadth-first over depths: spine vertex first, then tooth vertices
    # already pending at that depth
    for j in range(D + 1):
        spine.append(nid)
        depths.append(j)
        if j > 0:
            edges.append((spine[j - 1], spine[j], 1.0))
        nid += 1
    for j in range(D):
        prev = spine[j]
        for k in range(lengths[j]):
            edges.append((prev, nid, 1.0))
            depths.append(j + 1 + k)
            prev = nid
            nid += 1
    return _finish_tree(nid, edges, depths, target=spine[D], total_depth=D)


def make_waterfall(depth: int) -> WeightedGraph:
    """Comb whose tooth at spine depth j runs down to depth D-1, so no path
    dead-ends before the final layer.  The deepest spine vertex forks into
    two depth-D leaves; the target is the right one (the spine terminus).
    """
    D = depth
    if D < 2:
        raise GraphError("waterfall depth must be >= 2")
    edges, depths = [], []
    spine = []
    nid = 0
    for j in range(D + 1):
        spine.append(nid)
        depths.append(j)
        if j > 0:
            edges.append((spine[j - 1], spine[j], 1.0))
        nid += 1
    # long teeth: one from each spine depth j < D-1, ending at depth D-1
    for j in range(D - 1):
        prev = spine[j]
        for k in range(D - 1 - j):
            edges.append((prev, nid, 1.0))
            depths.append(j + 1 + k)
            prev = nid
            nid += 1
    # terminal fork: sibling leaf of the target under the deepest spine vertex
    edges.append((spine[D - 1], nid, 1.0))
    depths.append(D)
    nid += 1
    return _finish_tree(nid, edges, depths, target=spine[D], total_depth=D)


def make_hypercube(n: int) -> WeightedGraph:
    """Boolean hypercube with unit weights; height = Hamming weight."""
    if n < 1:
        raise GraphError("hypercube dimension must be >= 1")
    if n > HYPERCUBE_DIM_CAP:
        raise GraphError(f"hypercube dimension {n} exceeds cap {HYPERCUBE_DIM_CAP}")
    size = 1 << n
    edges = []
    for v in range(size):
        for b in range(n):
            u = v ^ (1 << b)
            if u > v:
                edges.append((v, u, 1.0))
    height = tuple(bin(v).count("1") for v in range(size))
    depth = height  # layers by Hamming weight
    return WeightedGraph(
        n=size, edges=tuple(edges), height=height, depth=depth, target=0
    )


def make_full_binary_tree(depth: int, weight: float = 1.0) -> WeightedGraph:
    """Complete binary tree of the given depth, uniform edge weights."""
    if depth < 1:
        raise GraphError("tree depth must be >= 1")
    edges = []
    depths = [0]
    nid = 1
    frontier = [0]
    for d in range(1, depth + 1):
        nxt = []
        for parent in frontier:
            for _ in range(2):
                edges.append((parent, nid, weight))
                depths.append(d)
                nxt.append(nid)
                nid += 1
        frontier = nxt
    return _finish_tree(nid, edges, depths, target=frontier[-1], total_depth=depth)


def make_random_tree(
    depth: int,
    rng: np.random.Generator,
    branching=(1, 2, 3),
    weight_range=(0.5, 2.0),
) -> WeightedGraph:
    """Random layered tree for convergence experiments: every vertex above
    the final layer gets 1..k children with weights drawn from a range.
    """
    if depth < 1:
        raise GraphError("tree depth must be >= 1")
    edges, depths = [], [0]
    nid = 1
    frontier = [0]
    for d in range(1, depth + 1):
        nxt = []
        for parent in frontier:
            for _ in range(rng.choice(branching)):
                w = float(rng.uniform(*weight_range))
                edges.append((parent, nid, w))
                depths.append(d)
                nxt.append(nid)
                nid += 1
        frontier = nxt
    return _finish_tree(nid, edges, depths, target=frontier[-1], total_depth=depth)


def save_graph(g: WeightedGraph, path) -> None:
    doc = {
        "vertices": [
            {
                "id": v,
                "height": g.height[v],
                **({"depth": g.depth[v]} if g.depth is not None else {}),
            }
            for v in g.vertices
        ],
        "edges": [{"u": u, "v": v, "w": w} for u, v, w in g.edges],
        "target": g.target,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_graph(path) -> WeightedGraph:
    with open(path) as fh:
        doc = json.load(fh)
    verts = sorted(doc["vertices"], key=lambda r: r["id"])
    if [r["id"] for r in verts] != list(range(len(verts))):
        raise GraphError("vertex ids must be dense 0..n-1")
    height = tuple(r["height"] for r in verts)
    depth = (
        tuple(r["depth"] for r in verts) if all("depth" in r for r in verts) else None
    )
    edges = tuple((e["u"], e["v"], float(e["w"])) for e in doc["edges"])
    return WeightedGraph(
        n=len(verts), edges=edges, height=height, depth=depth, target=doc.get("target")
    )
