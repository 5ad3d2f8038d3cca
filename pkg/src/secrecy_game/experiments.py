"""Experiment drivers: convergence traces, sum-rate sweeps, price of anarchy.

Results come back as :class:`Table` objects, which render to CSV with a
header row, values at 12 significant digits and ``#`` comment rows. The
rendering is deterministic, so two runs with the same inputs produce the
same bytes.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .centralized import solve_social_optimum
from .equilibrium import Schedule, run_algorithm1
from .model import GameConfig, uniform_profile, with_snr
from .rates import ergodic_utilities

__all__ = [
    "MODES",
    "Table",
    "SweepSpec",
    "EfficiencyReport",
    "social_welfare",
    "price_of_anarchy",
    "run_convergence_experiment",
    "run_sweep",
    "format_value",
    "parse_snr_range",
    "parse_snr_list",
    "parse_modes",
]

MODES = ("uniform", "bayesian", "central")


def format_value(value) -> str:
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    if isinstance(value, str):
        return value
    return format(float(value), ".12g")


@dataclass
class Table:
    """Rows of a CSV report plus free-text comment lines."""

    header: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)
    comments: list[str] = field(default_factory=list)
    ok: bool = True  # False when some solver did not converge

    def column(self, name: str) -> list:
        i = self.header.index(name)
        return [row[i] for row in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.header) + "\n")
        for row in self.rows:
            buf.write(",".join(format_value(v) for v in row) + "\n")
        for line in self.comments:
            buf.write(f"# {line}\n")
        return buf.getvalue()


@dataclass(frozen=True)
class SweepSpec:
    snr_values: tuple[float, ...]
    modes: tuple[str, ...] = MODES
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "snr_values", tuple(float(s) for s in self.snr_values))
        object.__setattr__(self, "modes", tuple(self.modes))
        if not self.snr_values:
            raise ValueError("need at least one SNR value")
        if any(not (s > 0 and math.isfinite(s)) for s in self.snr_values):
            raise ValueError("SNR values must be positive and finite")
        if any(b <= a for a, b in zip(self.snr_values, self.snr_values[1:])):
            raise ValueError("SNR values must be strictly increasing")
        if not self.modes:
            raise ValueError("need at least one mode")
        unknown = [m for m in self.modes if m not in MODES]
        if unknown:
            raise ValueError(f"unknown mode(s): {', '.join(unknown)}")
        if len(set(self.modes)) != len(self.modes):
            raise ValueError("modes must not repeat")


@dataclass
class EfficiencyReport:
    snr: float
    sum_rate_be: float
    sum_rate_opt: float
    sum_rate_uniform: float
    poa: float
    be_converged: bool = True
    diagnostics: list[str] = field(default_factory=list)


def social_welfare(cfg: GameConfig, profile) -> float:
    """Sum over users of the clamped average secrecy rates, in bits."""
    return float(np.sum(ergodic_utilities(cfg, profile)))


def _snr_of(cfg: GameConfig) -> float:
    return cfg.users[0].avg_power / cfg.noise_power


def price_of_anarchy(cfg: GameConfig, snr: float | None = None, restarts: int = 5,
                     seed: int | None = 0) -> EfficiencyReport:
    """Compare equilibrium, centralized and uniform sum rates at one operating point.

    With ``snr`` given, budgets are rescaled first. The equilibrium profile
    is handed to the centralized search as an extra start, so the central
    value never falls below the equilibrium one by more than the search's
    own round-off.
    """
    if snr is not None:
        cfg = with_snr(cfg, snr)
    trace = run_algorithm1(cfg)
    be = trace.final_profile
    central = solve_social_optimum(cfg, restarts=restarts, seed=seed, inits=[be])
    be_rate = social_welfare(cfg, be)
    opt = central.sum_rate
    diagnostics = list(central.diagnostics)
    if not trace.converged:
        diagnostics.append(
            f"best-response iteration stopped after {trace.iterations_to_converge} rounds "
            f"(last change {trace.final_change:.3g})"
        )
    poa = be_rate / opt if opt > 0 else math.nan
    return EfficiencyReport(
        snr=_snr_of(cfg),
        sum_rate_be=be_rate,
        sum_rate_opt=opt,
        sum_rate_uniform=social_welfare(cfg, uniform_profile(cfg)),
        poa=poa,
        be_converged=trace.converged,
        diagnostics=diagnostics,
    )


def run_convergence_experiment(cfg: GameConfig, snr: float | None = None,
                               schedule: Schedule = "sequential",
                               max_iterations: int | None = None) -> Table:
    """Per-iteration clamped rate of every user along the best-response iteration.

    Iteration 0 is the all-zero starting profile.
    """
    if snr is not None:
        cfg = with_snr(cfg, snr)
    trace = run_algorithm1(cfg, schedule=schedule, max_iterations=max_iterations)
    table = Table(("iteration", "user", "rate"))
    for n, rates in enumerate(trace.utilities):
        for k, r in enumerate(rates):
            table.rows.append((n, k, float(r)))
    if not trace.converged:
        table.ok = False
        table.comments.append(
            f"did not converge within {trace.iterations_to_converge} iterations; "
            f"last change {trace.final_change:.6g}"
        )
    return table


def run_sweep(cfg: GameConfig, sweep: SweepSpec, restarts: int = 5) -> Table:
    """Sum rate of each requested mode at each SNR.

    A ``poa`` column is added when both ``bayesian`` and ``central`` are
    requested; it repeats the point's price of anarchy on each of its rows.
    """
    with_poa = "bayesian" in sweep.modes and "central" in sweep.modes
    header = ("snr", "mode", "sum_rate") + (("poa",) if with_poa else ())
    table = Table(header)
    for snr in sweep.snr_values:
        point = with_snr(cfg, snr)
        rates: dict[str, float] = {}
        be = None
        if "bayesian" in sweep.modes:
            trace = run_algorithm1(point)
            be = trace.final_profile
            rates["bayesian"] = social_welfare(point, be)
            if not trace.converged:
                table.ok = False
                table.comments.append(
                    f"snr={format_value(snr)}: best-response iteration did not converge "
                    f"(last change {trace.final_change:.6g})"
                )
        if "central" in sweep.modes:
            sol = solve_social_optimum(point, restarts=restarts, seed=sweep.seed,
                                       inits=[be] if be is not None else None)
            rates["central"] = sol.sum_rate
            for msg in sol.diagnostics:
                table.comments.append(f"snr={format_value(snr)}: central: {msg}")
        if "uniform" in sweep.modes:
            rates["uniform"] = social_welfare(point, uniform_profile(point))
        poa = ()
        if with_poa:
            opt = rates["central"]
            poa = (rates["bayesian"] / opt if opt > 0 else math.nan,)
        for mode in MODES:
            if mode in rates:
                table.rows.append((snr, mode, rates[mode]) + poa)
    return table


def parse_snr_range(text: str) -> tuple[float, ...]:
    """``start:stop:step`` inclusive of ``stop`` when it lies on the grid."""
    try:
        start, stop, step = (float(p) for p in text.split(":"))
    except ValueError:
        raise ValueError(f"SNR range must look like start:stop:step, got {text!r}") from None
    if step <= 0:
        raise ValueError("SNR range step must be positive")
    n = int(math.floor((stop - start) / step + 1e-9))
    return tuple(round(start + i * step, 12) for i in range(n + 1))


def parse_snr_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise ValueError(f"SNR list must be comma-separated numbers, got {text!r}") from None


def parse_modes(text: str | Iterable[str]) -> tuple[str, ...]:
    if isinstance(text, str):
        text = text.split(",")
    return tuple(m.strip() for m in text if m.strip())
