"""Substochastic Monte Carlo simulation laboratory.

Layered benchmark graphs, exact renormalized dynamics, walker-population
simulators, go-with-the-winners tree search, a Schrodinger-evolution
comparator, and a seeded experiment harness.
"""

from . import acceptance, graph, gww, harness, process, qa, ssmc

__all__ = ["acceptance", "graph", "gww", "harness", "process", "qa", "ssmc"]
__version__ = "0.1.0"
