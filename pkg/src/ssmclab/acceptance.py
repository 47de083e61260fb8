"""The twelve release checks, shared by the test suite and the CLI.

Each check returns a result with a pass flag and a short detail string so
`ssmclab verify` and the pytest acceptance module print identical verdicts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import harness, process, qa, ssmc
from .graph import WeightedGraph, make_comb, make_full_binary_tree

__all__ = ["CriterionResult", "CRITERIA", "run_criterion", "run_all"]


@dataclass
class CriterionResult:
    index: int
    name: str
    passed: bool
    detail: str


def _c1_closed_form():
    """Analytic parent/child solution vs the 2x2 matrix exponential."""
    worst = 0.0
    for E in (1.0, 10.0, 100.0):
        for w in (0.5, 1.0, 2.0):
            h = np.array([[E + w, -w], [-w, w]])
            for t in (0.1, 0.25, 0.5, 1.0):
                p_stay, p_child = process.closed_form_pair(E, w, t)
                psi = process.evolve_exact(
                    process.DistributionVector.delta(0), h, (0, 1), t
                )
                worst = max(
                    worst,
                    abs(psi.mass[0] - p_stay),
                    abs(psi.mass[1] - p_child),
                )
    return worst <= 1e-10, f"max deviation {worst:.2e} (tol 1e-10)"


def _c2_first_order_scaling():
    """Error of the (w/E)e^-w child law shrinks ~4x when E doubles."""
    weights = (0.5, 1.0, 2.0)
    details = []
    ok = True
    for E in (100.0, 1000.0):
        ratio = harness._lemma2_error(E, weights) / harness._lemma2_error(
            2 * E, weights
        )
        ok &= 3.0 <= ratio <= 5.0
        details.append(f"E={E:g}: ratio {ratio:.3f}")
    return ok, "; ".join(details) + " (want [3, 5])"


def _c3_limit_convergence():
    """TV gap to the discrete limit process halves when E doubles."""
    g = harness.make_random_tree(3, np.random.default_rng(12345))
    E = 1000.0
    ratio = harness._thm3_error(g, 2 * E) / harness._thm3_error(g, E)
    return 0.3 <= ratio <= 0.7, f"error ratio {ratio:.3f} (want [0.3, 0.7])"


def _c4_uniformity():
    """Equal weights spread the staged law uniformly over the last layer."""
    E = 1000.0
    g = make_full_binary_tree(4)
    exact = process.run_staged_exact(g, E)[-1]
    leaves = g.layer(4)
    uniform = {v: 1.0 / len(leaves) for v in leaves}
    tv = process.tv_distance(exact.mass, uniform)
    return tv <= 10.0 / E, f"TV to uniform {tv:.2e} (tol {10.0 / E:g})"


def _c5_comb_decay():
    """Deeper combs defeat the walker-cloning search; more walkers don't help."""
    runs = {}
    for D, N, seed in ((8, 64, 101), (24, 64, 102), (24, 256, 103)):
        cfg = harness.ExperimentConfig(
            experiment="comb_gww", D=D, N=N, trials=5000, seed=seed
        )
        _, summary = harness.run_experiment(cfg)
        runs[(D, N)] = summary["frequency"]
    decay = runs[(24, 64)] <= runs[(8, 64)] / 4.0
    no_help = runs[(24, 256)] <= runs[(8, 64)]
    detail = (
        f"freq D=8/N=64 {runs[(8, 64)]:.4f}, D=24/N=64 {runs[(24, 64)]:.4f}, "
        f"D=24/N=256 {runs[(24, 256)]:.4f}"
    )
    return decay and no_help, detail


def _c6_waterfall_node_jump():
    """Node-uniform stranded jumps succeed with probability O(N/2^D)."""
    cfg = harness.ExperimentConfig(experiment="waterfall_gww", seed=106)
    _, summary = harness.run_experiment(cfg)
    return summary["passed"], summary["predicate"]


def _c7_ssmc_lower_bound():
    """The staged walker simulation beats 0.7(1/D - 1/N) on both families."""
    details = []
    ok = True
    for exp, seed in (("waterfall_ssmc", 107), ("comb_ssmc", 108)):
        cfg = harness.ExperimentConfig(experiment=exp, seed=seed)
        _, summary = harness.run_experiment(cfg)
        ok &= summary["passed"]
        details.append(f"{exp}: {summary['predicate']}")
    return ok, "; ".join(details)


def _c8_amplitude_cap():
    """Schrodinger target probability stays below 1/2^D with per-component
    norm conservation, for every depth and stage time tested."""
    worst = ""
    ok = True
    for D in (2, 3, 4, 5, 6):
        cfg = harness.ExperimentConfig(experiment="qa_amplitude", D=D, trials=5)
        _, summary = harness.run_experiment(cfg)
        ok &= summary["passed"]
        worst += f" D={D}:{'ok' if summary['passed'] else 'FAIL'}"
    return ok, worst.strip()


def _c9_branch_amplitude():
    """A symmetric two-leaf branch never concentrates more than 1/sqrt(2)
    amplitude on one leaf."""
    g = WeightedGraph(
        n=3,
        edges=((0, 1, 1.0), (0, 2, 1.0)),
        height=(1.0, 0.0, 0.0),
        depth=(0, 1, 1),
        target=1,
    )
    worst = 0.0
    for t_f in np.linspace(0.2, 3.0, 8):
        psi, _ = qa.qa_staged_run(g, E=5.0, t_f=float(t_f), stages=1)
        worst = max(worst, abs(psi.amplitudes.get(1, 0.0)))
    limit = 1.0 / math.sqrt(2.0)
    return worst <= limit + 1e-8, f"max leaf |amplitude| {worst:.4f} (cap {limit:.4f})"


def _c10_gradient_descent():
    """Near the end of the anneal, the whole population descends a single
    biased edge at least as often as the closed-form bound predicts."""
    cfg = harness.ExperimentConfig(experiment="descent", seed=110)
    _, summary = harness.run_experiment(cfg)
    return summary["passed"], summary["predicate"]


def _c11_mean_field():
    """Ensemble-averaged walker counts track the drift ODE within 5%."""
    cfg = harness.ExperimentConfig(experiment="drift_meanfield", seed=111)
    _, summary = harness.run_experiment(cfg)
    return summary["passed"], summary["predicate"]


def _c12_invariants():
    """Walker conservation, substochastic columns, shift invariance, and
    deterministic replay."""
    g = make_comb(6)
    N = 32
    xi1, _ = ssmc.run_staged_ssmc(g, N, 4242)
    xi2, _ = ssmc.run_staged_ssmc(g, N, 4242)
    conserved = xi1.positions.size == N
    replay = bool((xi1.positions == xi2.positions).all())

    adj = {0: [(1, 1.0)], 1: [(0, 1.0)]}
    step = ssmc.substochastic_step(adj, np.array([0.3, 0.0]), 0.2, [0, 1])
    cols = np.abs(step.moves.sum(axis=1) + step.death - 1.0).max()
    columns_ok = cols <= 1e-12

    base = process.run_staged_exact(g, 50.0)[-1]
    shifted = process.run_staged_exact(g, 50.0, shift=7.5)[-1]
    tv = process.tv_distance(base.mass, shifted.mass)
    shift_ok = tv <= 1e-9

    ok = conserved and replay and columns_ok and shift_ok
    return ok, (
        f"conserved={conserved} replay={replay} "
        f"column defect {cols:.1e} shift TV {tv:.1e}"
    )


CRITERIA = (
    (1, "closed-form two-level solution matches the matrix exponential", _c1_closed_form),
    (2, "first-order child law error scales as 1/E^2", _c2_first_order_scaling),
    (3, "staged law converges to the discrete limit at rate 1/E", _c3_limit_convergence),
    (4, "equal weights give a uniform final layer", _c4_uniformity),
    (5, "comb defeats walker-cloning search regardless of walker count", _c5_comb_decay),
    (6, "waterfall defeats node-uniform stranded jumps", _c6_waterfall_node_jump),
    (7, "staged walker simulation clears the 1/D - 1/N floor", _c7_ssmc_lower_bound),
    (8, "annealing comparator is capped at 1/2^D target probability", _c8_amplitude_cap),
    (9, "symmetric branch caps leaf amplitude at 1/sqrt(2)", _c9_branch_amplitude),
    (10, "population performs gradient descent late in the anneal", _c10_gradient_descent),
    (11, "walker ensemble mean follows the drift ODE", _c11_mean_field),
    (12, "conservation, substochasticity, shift invariance, replay", _c12_invariants),
)


def run_criterion(index: int) -> CriterionResult:
    for idx, name, fn in CRITERIA:
        if idx == index:
            passed, detail = fn()
            return CriterionResult(idx, name, bool(passed), detail)
    raise ValueError(f"no criterion {index}")


def run_all(report=None) -> list[CriterionResult]:
    results = []
    for idx, name, fn in CRITERIA:
        passed, detail = fn()
        res = CriterionResult(idx, name, bool(passed), detail)
        results.append(res)
        if report is not None:
            verdict = "PASS" if res.passed else "FAIL"
            report(f"[{verdict}] {idx:2d} {name}: {detail}")
    return results
