"""Walker-population simulators for the substochastic process.

Three dynamics live here: the Euler-step staged simulation (walkers descend
a layered tree one stage per unit time), the lazy-walk stage step used for
analysis, and the general-space interpolated anneal.  Dead walkers always
jump to the site of a surviving walker, Fleming-Viot style.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import WeightedGraph
from .process import ExtinctionError

__all__ = [
    "WalkerPopulation",
    "SubstochasticStep",
    "shifted_objective",
    "select_dt",
    "substochastic_step",
    "euler_step",
    "run_staged_ssmc",
    "lazy_step",
    "interpolated_step",
    "run_interpolated_ssmc",
    "population_drift",
]

COLUMN_TOL = 1e-12
EXTINCTION_RETRIES = 20
LAZY_RETRIES = 100


@dataclass
class WalkerPopulation:
    """Positions of N walkers plus the simulation clock and its RNG."""

    positions: np.ndarray
    clock: float
    rng: np.random.Generator

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.int64)
        if self.positions.size < 1:
            raise ValueError("need at least one walker")

    @classmethod
    def at_vertex(cls, v: int, n_walkers: int, seed) -> "WalkerPopulation":
        rng = np.random.default_rng(seed)
        return cls(positions=np.full(n_walkers, v, dtype=np.int64), clock=0.0, rng=rng)

    @property
    def n_walkers(self) -> int:
        return self.positions.size

    def counts(self, n_vertices: int) -> np.ndarray:
        return np.bincount(self.positions, minlength=n_vertices)

    def empirical(self, n_vertices: int) -> np.ndarray:
        return self.counts(n_vertices) / self.n_walkers


@dataclass
class SubstochasticStep:
    """One Euler step: move probabilities from each occupied vertex to its
    closed neighborhood, with the column deficit going to the cemetery.
    """

    occupied: tuple[int, ...]
    support: tuple[int, ...]
    moves: np.ndarray  # (len(occupied), len(support)), includes staying put
    death: np.ndarray  # per occupied vertex
    dt: float

    def __post_init__(self):
        if np.any(self.moves < -COLUMN_TOL) or np.any(self.death < -COLUMN_TOL):
            raise ValueError("negative transition probability")
        total = self.moves.sum(axis=1) + self.death
        if np.any(np.abs(total - 1.0) > COLUMN_TOL):
            raise ValueError("columns do not complete to 1")


def shifted_objective(w_full: np.ndarray, positions: np.ndarray) -> np.ndarray:
    """Subtract the minimum objective value over occupied sites."""
    positions = np.asarray(positions)
    if positions.size == 0:
        raise ValueError("no walkers occupy the graph")
    return w_full - w_full[positions].min()


def select_dt(
    lap_diag: np.ndarray,
    w_bar: np.ndarray,
    t: float = 0.0,
    mode: str = "staged",
    max_degree: int | None = None,
    lap_diag_max: float | None = None,
    delta_e: float | None = None,
    cap: float = 1.0,
) -> float:
    """Largest step keeping I - dt*H substochastic on the occupied columns.

    staged: dt = 1 / max(L_xx + Wbar_x); interpolated: the schedule-weighted
    analogue with the occupied objective spread.  A zero denominator means no
    transitions are possible and the configured cap is returned.
    """
    if mode == "staged":
        denom = float(np.max(lap_diag + w_bar)) if len(lap_diag) else 0.0
        return 1.0 / denom if denom > 0 else cap
    if mode == "interpolated":
        denom = (1.0 - t) * lap_diag_max / max_degree + t * delta_e
        return min(1.0 / denom, cap) if denom > 0 else cap
    raise ValueError(f"unknown mode {mode!r}")


def substochastic_step(
    adjacency: dict[int, list[tuple[int, float]]],
    w_bar: np.ndarray,
    dt: float,
    occupied,
    move_scale: float = 1.0,
    death_scale: float = 1.0,
) -> SubstochasticStep:
    """Build the Euler transition for the occupied vertices over their closed
    neighborhood in the given (possibly stage-restricted) adjacency.
    """
    occupied = sorted(occupied)
    support = sorted(
        set(occupied) | {y for x in occupied for y, _ in adjacency.get(x, [])}
    )
    col = {v: i for i, v in enumerate(support)}
    moves = np.zeros((len(occupied), len(support)))
    death = np.zeros(len(occupied))
    for i, x in enumerate(occupied):
        out = 0.0
        for y, w in adjacency.get(x, []):
            p = dt * move_scale * w
            moves[i, col[y]] += p
            out += p
        death[i] = dt * death_scale * w_bar[x]
        moves[i, col[x]] = 1.0 - out - death[i]
    return SubstochasticStep(
        occupied=tuple(occupied),
        support=tuple(support),
        moves=moves,
        death=death,
        dt=dt,
    )


def euler_step(xi: WalkerPopulation, step: SubstochasticStep) -> WalkerPopulation:
    """Advance every walker by one substochastic transition, then teleport
    each dead walker to the post-move position of a surviving walker.
    """
    col_of = {v: i for i, v in enumerate(step.occupied)}
    cols = np.array([col_of[v] for v in xi.positions])
    # outcome k < len(support) is a move; the last slot is the cemetery
    cum = np.cumsum(np.hstack([step.moves, step.death[:, None]]), axis=1)
    u = xi.rng.random(xi.n_walkers)
    outcome = (u[:, None] > cum[cols]).sum(axis=1)
    dead = outcome >= len(step.support)
    support = np.asarray(step.support)
    new_pos = np.where(dead, xi.positions, support[np.minimum(outcome, len(support) - 1)])
    if dead.any():
        survivors = np.flatnonzero(~dead)
        if survivors.size == 0:
            raise ExtinctionError("all walkers died in one sub-step")
        donors = survivors[xi.rng.integers(0, survivors.size, size=int(dead.sum()))]
        new_pos[dead] = new_pos[donors]
    return WalkerPopulation(positions=new_pos, clock=xi.clock + step.dt, rng=xi.rng)


def _stage_adjacency(g: WeightedGraph, j: int) -> dict[int, list[tuple[int, float]]]:
    adj: dict[int, list[tuple[int, float]]] = {}
    for u, v, w in g.edges:
        if {g.depth[u], g.depth[v]} == {j - 1, j}:
            adj.setdefault(u, []).append((v, w))
            adj.setdefault(v, []).append((u, w))
    return adj


def _stage_lap_diag(adj, n) -> np.ndarray:
    diag = np.zeros(n)
    for x, nbrs in adj.items():
        diag[x] = sum(w for _, w in nbrs)
    return diag


def run_staged_ssmc(
    g: WeightedGraph,
    n_walkers: int,
    seed,
    E: float | None = None,
) -> tuple[WalkerPopulation, list[np.ndarray]]:
    """Euler-step SSMC down a layered tree, one unit stage per layer.

    Returns the final population and the empirical distribution recorded at
    every integer time.  A stage in which nothing ever moves or dies is
    fast-forwarded to its end.
    """
    if g.depth is None:
        raise ValueError("staged SSMC requires depth labels")
    depth = g.max_depth
    if E is None:
        E = float((n_walkers * depth) ** 2)
    w_full = E * g.height_array()
    xi = WalkerPopulation.at_vertex(g.layer(0)[0], n_walkers, seed)
    snapshots = []
    for j in range(1, depth + 1):
        adj = _stage_adjacency(g, j)
        lap_diag = _stage_lap_diag(adj, g.n)
        t_rem = 1.0
        while t_rem > 1e-12:
            occupied = np.unique(xi.positions)
            w_bar = shifted_objective(w_full, xi.positions)
            if not any(v in adj for v in occupied) and w_bar[occupied].max() == 0:
                # stalled stage: nothing can move or die, skip to the boundary
                xi = WalkerPopulation(xi.positions, xi.clock + t_rem, xi.rng)
                break
            dt = select_dt(lap_diag[occupied], w_bar[occupied], mode="staged")
            dt = min(dt, t_rem)
            xi, dt = _step_with_retries(xi, adj, w_bar, dt, occupied)
            t_rem -= dt
        snapshots.append(xi.empirical(g.n))
    return xi, snapshots


def _step_with_retries(xi, adj, w_bar, dt, occupied):
    """Apply one Euler sub-step, halving dt on total extinction."""
    for _ in range(EXTINCTION_RETRIES):
        step = substochastic_step(adj, w_bar, dt, occupied)
        try:
            return euler_step(xi, step), dt
        except ExtinctionError:
            dt /= 2.0
    raise ExtinctionError("population went extinct despite step refinement")


def lazy_step(xi: WalkerPopulation, g: WeightedGraph, j: int) -> WalkerPopulation:
    """One stage of the lazy-walk jump process: a walker with d children
    moves to each with probability 1/d_max and stays otherwise; walkers left
    outside layer j+1 jump to a random walker that reached it.
    """
    n_children = np.array([len(g.children(v)) for v in range(g.n)])
    occupied = np.unique(xi.positions)
    d_max = int(n_children[occupied].max())
    if d_max == 0:
        raise ValueError("no occupied vertex has a child")
    depth = np.asarray(g.depth)
    for _ in range(LAZY_RETRIES):
        u = xi.rng.random(xi.n_walkers)
        half = xi.positions.copy()
        for i, v in enumerate(xi.positions):
            kids = g.children(v)
            slot = int(u[i] * d_max)
            if slot < len(kids):
                half[i] = kids[slot]
        advanced = np.flatnonzero(depth[half] == j + 1)
        if advanced.size:
            stranded = np.flatnonzero(depth[half] != j + 1)
            if stranded.size:
                donors = advanced[
                    xi.rng.integers(0, advanced.size, size=stranded.size)
                ]
                half[stranded] = half[donors]
            return WalkerPopulation(positions=half, clock=xi.clock + 1.0, rng=xi.rng)
    raise ExtinctionError("no walker advanced after repeated lazy moves")


def _global_adjacency(g: WeightedGraph) -> dict[int, list[tuple[int, float]]]:
    adj: dict[int, list[tuple[int, float]]] = {}
    for u, v, w in g.edges:
        adj.setdefault(u, []).append((v, w))
        adj.setdefault(v, []).append((u, w))
    return adj


def interpolated_step(
    xi: WalkerPopulation,
    g: WeightedGraph,
    t: float,
    dt_max: float = 1.0,
    dt_clamp: float | None = None,
    _cache: dict | None = None,
) -> WalkerPopulation:
    """One Euler step of H(t) = (1-t)/d * L + t * Wbar with the objective
    normalized to [0, 1] and shifted by the occupied minimum.
    """
    if _cache is None:
        _cache = {}
    if "adj" not in _cache:
        _cache["adj"] = _global_adjacency(g)
        _cache["lap_diag"] = _stage_lap_diag(_cache["adj"], g.n)
        _cache["w"] = g.normalized_objective()
        _cache["d"] = int(g.degrees().max())
    adj, w = _cache["adj"], _cache["w"]
    w_bar = shifted_objective(w, xi.positions)
    occupied = np.unique(xi.positions)
    dt = select_dt(
        None,
        None,
        t=t,
        mode="interpolated",
        max_degree=_cache["d"],
        lap_diag_max=float(_cache["lap_diag"].max()),
        delta_e=float(w_bar[occupied].max()),
        cap=dt_max,
    )
    if dt_clamp is not None:
        dt = min(dt, dt_clamp)
    for _ in range(EXTINCTION_RETRIES):
        step = substochastic_step(
            adj,
            w_bar,
            dt,
            occupied,
            move_scale=(1.0 - t) / _cache["d"],
            death_scale=t,
        )
        try:
            return euler_step(xi, step)
        except ExtinctionError:
            dt /= 2.0
    raise ExtinctionError("interpolated step extinguished the population")


def run_interpolated_ssmc(
    g: WeightedGraph,
    n_walkers: int,
    seed,
    horizon: float = 1.0,
    dt_max: float = 1.0,
    start: np.ndarray | int | None = None,
) -> list[WalkerPopulation]:
    """Anneal from pure diffusion at t=0 to pure objective at t=horizon."""
    rng = np.random.default_rng(seed)
    if start is None:
        positions = rng.integers(0, g.n, size=n_walkers)
    elif np.isscalar(start):
        positions = np.full(n_walkers, start, dtype=np.int64)
    else:
        positions = np.asarray(start, dtype=np.int64)
    xi = WalkerPopulation(positions=positions, clock=0.0, rng=rng)
    cache: dict = {}
    trajectory = [xi]
    while xi.clock < horizon - 1e-12:
        t = xi.clock / horizon
        xi = interpolated_step(
            xi, g, t, dt_max=dt_max, dt_clamp=horizon - xi.clock, _cache=cache
        )
        trajectory.append(xi)
    return trajectory


def population_drift(eta: np.ndarray, h: np.ndarray, n_walkers: int) -> np.ndarray:
    """Mean-field drift d(eta)/dt of the walker counts under generator H,
    including the repopulation coupling through the death rates.
    """
    if n_walkers < 2:
        raise ValueError("drift needs at least 2 walkers")
    eta = np.asarray(eta, dtype=float)
    h = np.asarray(h, dtype=float)
    theta = h.sum(axis=0)
    diag = np.diag(h)
    # off-diagonal column flux out of x, minus flux in, plus repopulation
    out_flux = (theta - diag) * eta
    in_flux = h @ eta - diag * eta
    repop = eta * (eta @ theta - eta * theta) / (n_walkers - 1)
    return out_flux - in_flux + repop - eta * theta
