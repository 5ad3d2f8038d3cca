"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are printed as the tests run (visible with ``-s``) and repeated
in a summary section at the end of the pytest session. Tolerances are the
ones the criteria state; none are loosened to make a check pass.
"""

import time
from pathlib import Path

import numpy as np
import pytest

from conftest import canonical, random_instance, strong
from secrecy_game.best_response import solve_best_response
from secrecy_game.centralized import solve_social_optimum
from secrecy_game.cli import main
from secrecy_game.equilibrium import run_algorithm1, uniqueness_probe, verify_equilibrium
from secrecy_game.experiments import SweepSpec, run_sweep
from secrecy_game.model import expected_power, random_profile, uniform_profile
from secrecy_game.oracle import GridSpec, best_response_lipschitz, grid_best_response, grid_effect, grid_social_optimum
from secrecy_game.rates import (
    concavity_certificate,
    degradedness_margin,
    ergodic_utility,
    pseudo_gradient,
    utility_gradient,
    utility_jacobian,
)

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
RESULTS: dict[int, tuple[bool, str]] = {}


def record(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}: {title} ({detail})"
    RESULTS[number] = (ok, line)
    print(line)
    assert ok, line


def interior_degraded_profiles(cfg, rng, n):
    out = []
    while len(out) < n:
        prof = random_profile(cfg, rng)
        if degradedness_margin(cfg, prof) > 1e-3 and prof.as_array().min() > 1e-3:
            out.append(prof)
    return out


def test_criterion_01_kkt_exactness():
    rng = np.random.default_rng(2024)
    worst = 0.0
    budget = 0.0
    for _ in range(50):
        cfg = random_instance(rng)
        opp = random_profile(cfg, rng)
        for k in range(cfg.n_users):
            sol = solve_best_response(cfg, opp, k)
            worst = max(worst, sol.stationarity_residual, sol.complementarity_residual, sol.budget_residual)
            budget = max(budget, abs(expected_power(cfg.users[k], sol.policy) - cfg.users[k].avg_power))
    ok = worst <= 1e-8 and budget <= 1e-8
    record(1, "KKT residuals of the best-response solver", ok,
           f"50 instances, max residual {worst:.2e}, max budget error {budget:.2e}, tol 1e-8")


def test_criterion_02_oracle_equivalence():
    details = []
    ok = True
    started = time.perf_counter()
    for snr in (1.0, 5.0):
        cfg = canonical(snr)
        be = run_algorithm1(cfg).final_profile
        for name, opp in (("uniform", uniform_profile(cfg)), ("equilibrium", be)):
            for k in range(cfg.n_users):
                step = 0.01 * cfg.users[k].avg_power
                sol = solve_best_response(cfg, opp, k)
                pol, util = grid_best_response(cfg, opp, k, GridSpec(0.01))
                dist = float(np.max(np.abs(pol.powers - sol.policy.powers)))
                bound = step * best_response_lipschitz(cfg, opp, k)
                gap = abs(sol.achieved_utility - util)
                if dist > step or gap > bound:
                    ok = False
                    details.append(f"snr {snr:g} {name} user {k}: dist {dist:.3g} (step {step:.3g}), "
                                   f"gap {gap:.3g} (bound {bound:.3g})")
        grid_prof, grid_rate = grid_social_optimum(cfg)
        central = solve_social_optimum(cfg)
        tol = max(grid_effect(cfg, [grid_prof, central.profile], 0.01), 1e-3)
        diff = abs(central.sum_rate - grid_rate)
        details.append(f"snr {snr:g} social diff {diff:.2e} <= {tol:.2e}")
        ok &= diff <= tol
    elapsed = time.perf_counter() - started
    ok &= elapsed < 60.0
    details.append(f"{elapsed:.0f} s (< 60 s)")
    record(2, "solver vs grid oracle on the canonical config", ok, "; ".join(details))


def test_criterion_03_equilibrium_fixed_point():
    ok = True
    details = []
    for snr in (1.0, 5.0):
        cfg = canonical(snr)
        trace = run_algorithm1(cfg, max_iterations=10_000)
        prof = trace.final_profile
        gap = verify_equilibrium(cfg, prof).be_deviation_gap
        budget = max(abs(expected_power(u, p) - u.avg_power) for u, p in zip(cfg.users, prof))
        ok &= trace.converged and gap <= 1e-6 and budget <= 1e-8
        details.append(f"snr {snr:g}: converged={trace.converged} in {trace.iterations_to_converge}, "
                       f"gap {gap:.2e}, budget error {budget:.2e}")
    record(3, "best-response iteration reaches a verified equilibrium", ok, "; ".join(details))


def test_criterion_04_uniqueness():
    ok = True
    details = []
    for make in (canonical, strong):
        probe = uniqueness_probe(make(), 10, seed=7)
        ok &= probe.all_converged and probe.max_distance <= 1e-4
        details.append(f"{make.__name__}: spread {probe.max_distance:.2e}, "
                       f"non-converged {len(probe.non_converged)}")
    record(4, "10 random starts reach the same equilibrium", ok, "; ".join(details))


def test_criterion_05_diagonal_concavity():
    ok = True
    details = []
    for make in (canonical, strong):
        cert = concavity_certificate(make(), 100, seed=0)
        ok &= cert.sample_count == 100 and cert.max_eigenvalue < 0.0
        details.append(f"{make.__name__}: max eig of J+J^T {cert.max_eigenvalue:+.3e} over {cert.sample_count}")
    record(5, "symmetrized Jacobian negative definite on sampled profiles", ok, "; ".join(details))


def test_criterion_06_derivatives_match_finite_differences():
    """Relative error is measured in the max norm of the whole gradient or Jacobian."""
    rng = np.random.default_rng(99)
    worst_g = worst_j = 0.0
    for make in (canonical, strong):
        cfg = make(2.0)
        K, M = cfg.n_users, 4
        for prof in interior_degraded_profiles(cfg, rng, 20):
            P = prof.as_array()
            J = utility_jacobian(cfg, prof)
            fdJ = np.empty_like(J)
            for k in range(K):
                g = utility_gradient(cfg, prof, k).reshape(-1)
                fdg = np.empty(M)
                for t in range(M):
                    h = 1e-6 * max(1.0, P[k, t])
                    hi, lo = P.copy(), P.copy()
                    hi[k, t] += h
                    lo[k, t] -= h
                    fdg[t] = (ergodic_utility(cfg, hi, k, False) - ergodic_utility(cfg, lo, k, False)) / (2 * h)
                    fdJ[:, k * M + t] = (pseudo_gradient(cfg, hi) - pseudo_gradient(cfg, lo)) / (2 * h)
                worst_g = max(worst_g, np.max(np.abs(g - fdg)) / np.max(np.abs(g)))
            worst_j = max(worst_j, np.max(np.abs(J - fdJ)) / np.max(np.abs(J)))
    ok = worst_g < 1e-5 and worst_j < 1e-4
    record(6, "analytic gradient and Jacobian vs central differences", ok,
           f"40 profiles, gradient rel err {worst_g:.2e} (<1e-5), Jacobian rel err {worst_j:.2e} (<1e-4)")


@pytest.fixture(scope="module")
def sweeps():
    spec = SweepSpec(tuple(float(s) for s in range(1, 11)))
    return {make.__name__: run_sweep(make(), spec) for make in (canonical, strong)}


def test_criterion_07_efficiency_ordering(sweeps):
    ok = True
    details = []
    for name, table in sweeps.items():
        by = {}
        for snr, mode, rate, poa in table.rows:
            by.setdefault(snr, {})[mode] = rate
            by[snr]["poa"] = poa
        for snr, r in by.items():
            good = (r["central"] >= r["bayesian"] - 1e-6 and r["bayesian"] >= r["uniform"]
                    and 0 < r["poa"] <= 1)
            if not good:
                details.append(f"{name} snr {snr:g} out of order: {r}")
            ok &= good
        ok &= by[10.0]["poa"] < by[1.0]["poa"] and table.ok
        details.append(f"{name}: PoA {by[1.0]['poa']:.4f} at SNR 1 -> {by[10.0]['poa']:.4f} at SNR 10")
    record(7, "central >= equilibrium >= uniform, PoA in (0,1] and falling", ok, "; ".join(details))


def test_criterion_08_convergence_slows_with_snr():
    low = run_algorithm1(canonical(1.0))
    high = run_algorithm1(canonical(5.0))
    ok = low.converged and high.converged and high.iterations_to_converge >= low.iterations_to_converge
    record(8, "more iterations at SNR 5 than at SNR 1", ok,
           f"{low.iterations_to_converge} at SNR 1, {high.iterations_to_converge} at SNR 5")


def test_criterion_09_sca_soundness():
    ok = True
    steps = 0
    for make in (canonical, strong):
        for snr in (1.0, 5.0, 10.0):
            cfg = make(snr)
            for sol in (solve_social_optimum(cfg), solve_social_optimum(cfg, restarts=1, solo_starts=False)):
                exact = [e for e, _ in sol.history]
                steps += len(exact)
                ok &= all(b >= a - 1e-9 for a, b in zip(exact, exact[1:]))
                ok &= all(bound <= e + 1e-9 for e, bound in sol.history)
    record(9, "SCA outer loop monotone and bounded by the exact sum rate", ok,
           f"{steps} outer steps over 12 solves, tol 1e-9")


def test_criterion_10_sweep_is_deterministic(tmp_path, capsys):
    outs = []
    for name in ("a.csv", "b.csv"):
        path = tmp_path / name
        code = main(["sweep", "--config", str(CONFIGS / "canonical.json"), "--snr-list", "1,3,5",
                     "--seed", "11", "--out", str(path)])
        assert code == 0
        outs.append(path.read_bytes())
    capsys.readouterr()
    record(10, "sweep CSV byte-identical across runs", outs[0] == outs[1] and len(outs[0]) > 0,
           f"{len(outs[0])} bytes")
