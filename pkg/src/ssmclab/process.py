"""Exact renormalized substochastic dynamics on small graphs.

This is the oracle the walker simulations are judged against: dense matrix
exponentials of the stage generators, the closed-form parent/child solution,
and the discrete limiting push-forward with per-edge factor w*exp(-w).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import expm

from .graph import Laplacian, WeightedGraph, stage_subgraph

__all__ = [
    "ProcessError",
    "ExtinctionError",
    "DistributionVector",
    "Schedule",
    "evolve_exact",
    "closed_form_pair",
    "stage_generator",
    "run_staged_exact",
    "limit_step",
    "tv_distance",
]

MASS_TOL = 1e-9


class ProcessError(ValueError):
    pass


class ExtinctionError(RuntimeError):
    """All surviving mass (or all walkers) was lost."""


@dataclass
class DistributionVector:
    """Substochastic law over a vertex set plus explicit cemetery mass."""

    mass: dict[int, float]
    cemetery: float = 0.0

    def __post_init__(self):
        if self.cemetery < -MASS_TOL:
            raise ProcessError("negative cemetery mass")
        for v, p in self.mass.items():
            if p < -MASS_TOL:
                raise ProcessError(f"negative mass at vertex {v}")
        total = sum(self.mass.values()) + self.cemetery
        if abs(total - 1.0) > MASS_TOL:
            raise ProcessError(f"mass + cemetery = {total}, expected 1")

    @classmethod
    def delta(cls, v: int) -> "DistributionVector":
        return cls(mass={v: 1.0})

    def surviving_mass(self) -> float:
        return sum(self.mass.values())

    def renormalized(self) -> "DistributionVector":
        """Conditional law given survival."""
        s = self.surviving_mass()
        if s <= 0:
            raise ExtinctionError("no surviving mass to condition on")
        return DistributionVector(
            mass={v: p / s for v, p in self.mass.items()}, cemetery=0.0
        )

    def as_array(self, support) -> np.ndarray:
        return np.array([self.mass.get(v, 0.0) for v in support])


@dataclass(frozen=True)
class Schedule:
    """Generator schedule over [0, T].

    staged: unit-length stages with per-stage (Laplacian, objective vector).
    interpolated: H(t) = a(t) L + b(t) W on a fixed support.
    """

    mode: str
    horizon: float
    stages: tuple[tuple[Laplacian, np.ndarray], ...] = ()
    a: Callable[[float], float] | None = None
    b: Callable[[float], float] | None = None
    laplacian: Laplacian | None = None
    objective: np.ndarray | None = None

    def __post_init__(self):
        if self.mode not in ("staged", "interpolated"):
            raise ProcessError(f"unknown schedule mode {self.mode!r}")
        if self.horizon <= 0:
            raise ProcessError("horizon must be positive")
        if self.mode == "staged":
            if len(self.stages) != int(round(self.horizon)):
                raise ProcessError("staged intervals must tile [0, T] in unit steps")
            for k in range(len(self.stages) - 1):
                cur = set(self.stages[k][0].support)
                nxt = set(self.stages[k + 1][0].support)
                if not cur & nxt:
                    raise ProcessError(f"stages {k+1},{k+2} have disjoint supports")

    def generator(self, t: float) -> tuple[np.ndarray, tuple[int, ...]]:
        if self.mode == "staged":
            j = min(int(t), len(self.stages) - 1)
            lap, obj = self.stages[j]
            return lap.matrix + np.diag(obj), lap.support
        h = self.a(t) * self.laplacian.matrix + self.b(t) * np.diag(self.objective)
        return h, self.laplacian.support


def evolve_exact(
    psi: DistributionVector, h: np.ndarray, support, t: float
) -> DistributionVector:
    """Apply exp(-H t) to psi over the given support; mass lost from the
    columns accrues to the cemetery.  No renormalization.
    """
    if t < 0:
        raise ProcessError("negative duration")
    h = np.asarray(h, dtype=float)
    if not np.all(np.isfinite(h)):
        raise ProcessError("non-finite generator entries")
    vec = psi.as_array(support)
    out = expm(-h * t) @ vec
    out = np.clip(out, 0.0, None)
    mass = {v: float(p) for v, p in zip(support, out)}
    # vertices outside the support are untouched by this generator
    for v, p in psi.mass.items():
        if v not in mass:
            mass[v] = p
    return DistributionVector(mass=mass, cemetery=max(0.0, 1.0 - sum(mass.values())))


def closed_form_pair(E: float, w: float, t: float) -> tuple[float, float]:
    """Exact stay/descend probabilities for one parent (objective E) and one
    child joined by an edge of weight w, after time t.

    Eigenvalues of [[E+w, -w], [-w, w]] are (E+2w)/2 +- sqrt(E^2/4 + w^2),
    which gives

        p_stay  = exp(-(E+2w)t/2) (cosh(Dt) - (E/(2D)) sinh(Dt))
        p_child = exp(-(E+2w)t/2) (w/D) sinh(Dt),      D = sqrt(E^2/4 + w^2).
    """
    if E <= 0 or w <= 0:
        raise ProcessError("E and w must be positive")
    if not 0 < t <= 1:
        raise ProcessError("t must lie in (0, 1]")
    delta = math.sqrt(E * E / 4.0 + w * w)
    pre = math.exp(-(E + 2.0 * w) * t / 2.0)
    p_stay = pre * (math.cosh(delta * t) - (E / (2.0 * delta)) * math.sinh(delta * t))
    p_child = pre * (w / delta) * math.sinh(delta * t)
    return p_stay, p_child


def stage_generator(
    g: WeightedGraph, j: int, E: float, shift: float = 0.0
) -> tuple[np.ndarray, tuple[int, ...]]:
    """Full-graph generator for stage j: the stage-subgraph Laplacian plus
    the stage-relative objective E*(j - depth), clamped at zero for layers
    the process cannot yet occupy.
    """
    lap = stage_subgraph(g, j)
    full = np.zeros((g.n, g.n))
    for a, va in enumerate(lap.support):
        for b, vb in enumerate(lap.support):
            full[va, vb] = lap.matrix[a, b]
    rel = np.array([max(j - g.depth[v], 0) * E for v in g.vertices]) + shift
    return full + np.diag(rel), tuple(g.vertices)


def run_staged_exact(
    g: WeightedGraph,
    E: float,
    psi0: DistributionVector | None = None,
    stages: int | None = None,
    shift: float = 0.0,
) -> list[DistributionVector]:
    """Exact staged process: evolve one unit per stage, renormalize at each
    integer time, return the conditional law at t = 1, ..., stages.
    """
    if g.depth is None:
        raise ProcessError("staged evolution requires depth labels")
    if psi0 is None:
        root = g.layer(0)[0]
        psi0 = DistributionVector.delta(root)
    allowed = set(g.layer(0)) | set(g.layer(1))
    if any(p > 0 and v not in allowed for v, p in psi0.mass.items()):
        raise ProcessError("initial distribution must be supported on stage 1")
    if stages is None:
        stages = g.max_depth
    out = []
    psi = psi0
    for j in range(1, stages + 1):
        h, support = stage_generator(g, j, E, shift=shift)
        psi = evolve_exact(psi, h, support, 1.0)
        if psi.surviving_mass() < 1e-280:
            raise ExtinctionError(f"surviving mass underflowed at stage {j}")
        psi = psi.renormalized()
        out.append(psi)
    return out


def limit_step(dist: dict[int, float], g: WeightedGraph) -> dict[int, float]:
    """One step of the limiting discrete process: push a depth-j law to depth
    j+1 with edge factor a_xy = w_xy exp(-w_xy), then normalize.
    """
    unnorm: dict[int, float] = {}
    for x, px in dist.items():
        if px == 0:
            continue
        for y in g.children(x):
            w = g.edge_weight(x, y)
            unnorm[y] = unnorm.get(y, 0.0) + w * math.exp(-w) * px
    z = sum(unnorm.values())
    if z <= 0:
        raise ExtinctionError("no vertex in the distribution has children")
    return {y: p / z for y, p in unnorm.items()}


def tv_distance(p: dict[int, float], q: dict[int, float]) -> float:
    """Total variation distance, half the l1 difference."""
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)
