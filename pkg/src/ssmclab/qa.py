"""Small-scale Schrodinger evolution used as the annealing comparator.

The staged schedule activates one layer-pair subgraph per unit of time, so
each stage generator splits into connected components whose norms are
individually conserved.  On trees whose stages branch symmetrically this
caps the target amplitude at 2^{-D/2}, i.e. target probability 1/2^D.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .graph import WeightedGraph, stage_subgraph

__all__ = [
    "QaError",
    "QuantumState",
    "schrodinger_evolve",
    "component_norms",
    "stage_components",
    "qa_staged_run",
]

NORM_TOL = 1e-9
HERMITICITY_TOL = 1e-10


class QaError(ValueError):
    pass


@dataclass
class QuantumState:
    """Complex amplitudes over vertex ids; unit 2-norm."""

    amplitudes: dict[int, complex]
    time: float = 0.0

    def __post_init__(self):
        norm2 = sum(abs(a) ** 2 for a in self.amplitudes.values())
        if abs(norm2 - 1.0) > NORM_TOL:
            raise QaError(f"state norm^2 = {norm2}, expected 1")

    @classmethod
    def delta(cls, v: int, time: float = 0.0) -> "QuantumState":
        return cls(amplitudes={v: 1.0 + 0.0j}, time=time)

    def as_array(self, support) -> np.ndarray:
        return np.array([self.amplitudes.get(v, 0.0) for v in support], dtype=complex)

    def probability(self, v: int) -> float:
        return abs(self.amplitudes.get(v, 0.0)) ** 2


def _check_hermitian(h: np.ndarray) -> np.ndarray:
    h = np.asarray(h, dtype=float)
    if not np.allclose(h, h.T, atol=HERMITICITY_TOL):
        raise QaError("generator is not symmetric")
    return h


def _step_unitary(h: np.ndarray, dt: float) -> np.ndarray:
    """exp(-i h dt) for real symmetric h, via the spectral decomposition."""
    vals, vecs = np.linalg.eigh(h)
    return (vecs * np.exp(-1j * vals * dt)) @ vecs.T


def _propagate(
    vec: np.ndarray,
    h_of_t: Callable[[float], np.ndarray],
    t0: float,
    t1: float,
    steps: int,
) -> np.ndarray:
    dt = (t1 - t0) / steps
    out = vec
    for k in range(steps):
        mid = t0 + (k + 0.5) * dt
        out = _step_unitary(_check_hermitian(h_of_t(mid)), dt) @ out
    return out


def schrodinger_evolve(
    psi: QuantumState,
    h_of_t: Callable[[float], np.ndarray],
    support,
    t0: float,
    t1: float,
    steps: int = 1,
    adaptive: bool = True,
) -> QuantumState:
    """Evolve psi under i dpsi/dt = H(t) psi from t0 to t1.

    Each substep applies the exact unitary of the midpoint-sampled
    generator.  With ``adaptive`` the substep count doubles until two
    successive refinements agree to 1e-9, so time-dependent schedules are
    resolved without committing to a fixed integrator order.
    """
    if steps < 1:
        raise QaError("steps must be >= 1")
    if t1 < t0:
        raise QaError("t1 must be >= t0")
    support = tuple(support)
    vec = psi.as_array(support)
    out = _propagate(vec, h_of_t, t0, t1, steps)
    if adaptive:
        # Richardson step-doubling: the midpoint product is second order, so
        # (4 P_{2m} - P_m) / 3 cancels the leading error term; stop once two
        # successive extrapolants agree.
        extrapolated = None
        for _ in range(20):
            steps *= 2
            refined = _propagate(vec, h_of_t, t0, t1, steps)
            candidate = (4.0 * refined - out) / 3.0
            out = refined
            if extrapolated is not None and (
                np.linalg.norm(candidate - extrapolated) < NORM_TOL
            ):
                extrapolated = candidate
                break
            extrapolated = candidate
        out = extrapolated
        target_norm = np.linalg.norm(vec)
        nrm = np.linalg.norm(out)
        if abs(nrm - target_norm) > NORM_TOL:
            raise QaError(f"integration failed to conserve norm ({nrm})")
        if nrm > 0:
            out = out * (target_norm / nrm)
    amplitudes = {v: a for v, a in zip(support, out)}
    for v, a in psi.amplitudes.items():
        if v not in amplitudes:
            amplitudes[v] = a
    return QuantumState(amplitudes=amplitudes, time=t1)


def component_norms(psi: QuantumState, components) -> dict[frozenset, float]:
    """2-norm of the restriction of psi to each part of a vertex partition."""
    components = [frozenset(c) for c in components]
    covered = set().union(*components) if components else set()
    for v, a in psi.amplitudes.items():
        if abs(a) > 0 and v not in covered:
            raise QaError(f"partition misses occupied vertex {v}")
    return {
        c: math.sqrt(sum(abs(psi.amplitudes.get(v, 0.0)) ** 2 for v in c))
        for c in components
    }


def stage_components(g: WeightedGraph, j: int) -> list[frozenset]:
    """Connected components of the stage-j generator over all vertices.

    Vertices outside the active layer pair only pick up a diagonal phase,
    so each is its own component.
    """
    lap = stage_subgraph(g, j)
    sup = set(lap.support)
    parent = {v: v for v in g.vertices}

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for u, v, _w in g.edges:
        if u in sup and v in sup and abs(g.depth[u] - g.depth[v]) == 1:
            if {g.depth[u], g.depth[v]} == {j - 1, j}:
                parent[find(u)] = find(v)
    groups: dict[int, set] = {}
    for v in g.vertices:
        groups.setdefault(find(v), set()).add(v)
    return [frozenset(c) for c in groups.values()]


def _default_a(s: float) -> float:
    return 1.0 - s


def _default_b(s: float) -> float:
    return s


def qa_staged_run(
    g: WeightedGraph,
    E: float,
    t_f: float = 1.0,
    a: Callable[[float], float] | None = None,
    b: Callable[[float], float] | None = None,
    stages: int | None = None,
) -> tuple[QuantumState, list[dict[frozenset, tuple[float, float]]]]:
    """Run the staged annealing schedule from the root delta state.

    Each stage j lasts t_f and applies H(s) = a(s/t_f) L_j + b(s/t_f) W with
    W the heights scaled by E.  Returns the final state together with, for
    every stage, each generator component's (start, end) norm; the theorem
    requires these to match.
    """
    if g.depth is None:
        raise QaError("staged evolution requires depth labels")
    if t_f <= 0:
        raise QaError("stage time must be positive")
    a = a or _default_a
    b = b or _default_b
    if stages is None:
        stages = g.max_depth
    w_full = E * g.height_array()
    support = tuple(g.vertices)
    psi = QuantumState.delta(g.layer(0)[0])
    norms_log = []
    for j in range(1, stages + 1):
        lap = stage_subgraph(g, j)
        full = np.zeros((g.n, g.n))
        idx = [support.index(v) for v in lap.support]
        full[np.ix_(idx, idx)] = lap.matrix
        diag = np.diag(w_full)

        def h_of_t(s, _l=full, _d=diag):
            u = s / t_f
            return a(u) * _l + b(u) * _d

        comps = stage_components(g, j)
        before = component_norms(psi, comps)
        psi = schrodinger_evolve(psi, h_of_t, support, 0.0, t_f)
        after = component_norms(psi, comps)
        norms_log.append({c: (before[c], after[c]) for c in comps})
    return psi, norms_log
