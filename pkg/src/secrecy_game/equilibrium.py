"""Distributed iterative power allocation and equilibrium checks."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .best_response import solve_best_response
from .model import GameConfig, StrategyProfile, random_profile, zero_profile
from .rates import ergodic_utilities

__all__ = [
    "IterationTrace",
    "EquilibriumReport",
    "UniquenessResult",
    "run_algorithm1",
    "verify_equilibrium",
    "uniqueness_probe",
]

Schedule = Literal["sequential", "simultaneous"]


@dataclass
class IterationTrace:
    profiles: list[StrategyProfile]
    utilities: list[np.ndarray]  # per iteration, (K,) clamped rates in bits
    iterations_to_converge: int
    converged: bool
    final_change: float = float("nan")

    @property
    def final_profile(self) -> StrategyProfile:
        return self.profiles[-1]


def run_algorithm1(cfg: GameConfig, init: StrategyProfile | None = None,
                   schedule: Schedule = "sequential",
                   max_iterations: int | None = None) -> IterationTrace:
    """Iterate best responses from ``init`` (all-zero by default) until the profile settles.

    ``sequential`` lets later users see the policies already updated in the
    same round; ``simultaneous`` answers the previous round's profile.
    Entry 0 of the trace is the initial profile. ``iterations_to_converge``
    counts the rounds that still moved the profile, so a start that is
    already an equilibrium reports 0. Running out of iterations is reported
    through ``converged=False``, not raised.
    """
    if schedule not in ("sequential", "simultaneous"):
        raise ValueError(f"unknown schedule {schedule!r}")
    tol = cfg.tolerances
    limit = tol.max_iterations if max_iterations is None else max_iterations
    current = zero_profile(cfg) if init is None else init
    profiles = [current]
    utilities = [ergodic_utilities(cfg, current)]
    converged = False
    change = float("inf")
    t = 0
    while t < limit:
        t += 1
        if schedule == "sequential":
            nxt = current
            for k in range(cfg.n_users):
                nxt = nxt.replace(k, solve_best_response(cfg, nxt, k).policy)
        else:
            nxt = StrategyProfile(
                solve_best_response(cfg, current, k).policy for k in range(cfg.n_users)
            )
        change = nxt.distance(current)
        current = nxt
        profiles.append(current)
        utilities.append(ergodic_utilities(cfg, current))
        if change < tol.convergence:
            converged = True
            break
    # the final round only confirms the fixed point; it is not counted
    rounds = t - 1 if converged else t
    return IterationTrace(profiles, utilities, rounds, converged, change)


@dataclass
class EquilibriumReport:
    profile: StrategyProfile
    per_user_rates: np.ndarray
    be_deviation_gap: float
    per_user_gaps: np.ndarray = field(default=None)


def verify_equilibrium(cfg: GameConfig, profile: StrategyProfile) -> EquilibriumReport:
    """Largest utility gain any single user could get by deviating to its best response."""
    rates = ergodic_utilities(cfg, profile)
    gaps = np.array([
        solve_best_response(cfg, profile, k).achieved_utility - rates[k]
        for k in range(cfg.n_users)
    ])
    return EquilibriumReport(profile, rates, float(max(0.0, gaps.max())), gaps)


@dataclass
class UniquenessResult:
    max_distance: float
    endpoints: list[StrategyProfile]
    non_converged: list[int]

    @property
    def all_converged(self) -> bool:
        return not self.non_converged


def uniqueness_probe(cfg: GameConfig, trials: int, seed: int | None = 0,
                     schedule: Schedule = "sequential",
                     inits: list[StrategyProfile] | None = None) -> UniquenessResult:
    """Run the iteration from several random feasible starts and measure how far the endpoints spread."""
    if inits is None:
        if trials < 2:
            raise ValueError("need at least two trials")
        rng = np.random.default_rng(seed)
        inits = [random_profile(cfg, rng) for _ in range(trials)]
    endpoints = []
    bad = []
    for n, init in enumerate(inits):
        trace = run_algorithm1(cfg, init, schedule)
        if not trace.converged:
            bad.append(n)
        endpoints.append(trace.final_profile)
    dist = max(
        (a.distance(b) for a, b in itertools.combinations(endpoints, 2)),
        default=0.0,
    )
    return UniquenessResult(dist, endpoints, bad)
