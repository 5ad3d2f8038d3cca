"""Bayesian power-allocation game for secrecy in a fading multiple-access wiretap channel.

Submodules
----------
model          configurations, policies and profiles
rates          secrecy rates, gradients, Jacobian and the concavity scan
best_response  exact water-filling best response
equilibrium    best-response iteration, equilibrium and uniqueness checks
centralized    sum-rate benchmark by successive convex approximation
oracle         brute-force grid validators for small instances
experiments    convergence traces, SNR sweeps, price of anarchy
cli            command-line driver (``secrecy-game``)
"""

from .best_response import BestResponseSolution, solve_best_response
from .centralized import CentralSolution, solve_social_optimum
from .equilibrium import IterationTrace, run_algorithm1, uniqueness_probe, verify_equilibrium
from .experiments import EfficiencyReport, SweepSpec, price_of_anarchy, run_sweep, social_welfare
from .model import (
    ChannelLaw,
    GameConfig,
    PowerPolicy,
    SolverTolerances,
    StrategyProfile,
    UserConfig,
    load_config,
    with_snr,
)
from .rates import concavity_certificate, ergodic_utilities, ergodic_utility

__version__ = "0.1.0"

__all__ = [
    "BestResponseSolution",
    "CentralSolution",
    "ChannelLaw",
    "EfficiencyReport",
    "GameConfig",
    "IterationTrace",
    "PowerPolicy",
    "SolverTolerances",
    "StrategyProfile",
    "SweepSpec",
    "UserConfig",
    "concavity_certificate",
    "ergodic_utilities",
    "ergodic_utility",
    "load_config",
    "price_of_anarchy",
    "run_algorithm1",
    "run_sweep",
    "social_welfare",
    "solve_best_response",
    "solve_social_optimum",
    "uniqueness_probe",
    "verify_equilibrium",
    "with_snr",
]
