"""Measurement-feedback coherent Ising machine simulator.

Positive-P phase-space integration of the feedback network in two modes
(the unconditional "total" method and the conditional weighted-trajectory
method) cross-validated against a truncated-Fock density-matrix oracle.
"""

from . import backend
from .model import CimParams, RampSchedule, chi, pump_threshold
from .problems import (
    IsingProblem,
    WeightedGraph,
    brute_force_ground_state,
    cut_weight,
    ising_energy,
    maxcut_to_ising,
    random_graph_problem,
    ring_afm,
)

__all__ = [
    "backend",
    "CimParams",
    "RampSchedule",
    "chi",
    "pump_threshold",
    "IsingProblem",
    "WeightedGraph",
    "brute_force_ground_state",
    "cut_weight",
    "ising_energy",
    "maxcut_to_ising",
    "random_graph_problem",
    "ring_afm",
]

__version__ = "0.1.0"
