"""Centralized sum-secrecy-rate benchmark by successive convex approximation.

Work in log-powers ``x = log2 P``. At an anchor profile every Bob rate is
replaced by the tangent-in-log bound ``omega * log2 z + Omega <= log2(1 + z)``
(tight at the anchor's SINR ``z0``), which is concave in ``x``. Eve's rate is
kept exact as a difference of two log-sum-exp terms,

    log2(1 + z_e) = log2(D_e(x)) - log2(psi_e(x)),

so that the surrogate to minimize splits as ``F - H`` with ``F`` and ``H``
both convex:

    F = sum  -omega (log2 h + x_k - log2 psi_b) - Omega + log2 D_e
    H = sum  log2 psi_e

Realizations that are not degraded at the anchor contribute zero (their
clamped rate is zero there). The surrogate is therefore a lower bound on the
clamped sum rate, equal to it at the anchor, and every outer step that
improves the surrogate improves the true sum rate.

Inner loop: DCA, i.e. linearize ``H`` at the current iterate and minimize
the resulting convex function over ``{sum_t w_t 2^x_t <= budget, lo <= x <= hi}``
with SciPy's SLSQP. Start points are mapped into that set by Euclidean
projection, which has a closed form through the Wright omega function once
the budget multiplier is known; the multiplier is found by Brent's method.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize
from scipy.special import wrightomega

from .best_response import solve_best_response
from .model import GameConfig, StrategyProfile, random_profile, type_weights, uniform_profile, zero_profile
from .rates import ergodic_utilities, type_grid

__all__ = [
    "BoundParams",
    "CentralSolution",
    "bound_params_at",
    "make_bounds",
    "dc_objective",
    "bounded_sum_rate",
    "solve_social_optimum",
    "POWER_FLOOR_FACTOR",
]

# x >= log2(POWER_FLOOR_FACTOR * avg_power) stands in for P >= 0
POWER_FLOOR_FACTOR = 1e-6


def bound_params_at(z0):
    """Coefficients of the lower bound on log2(1 + z) that is tight at ``z0``."""
    z0 = np.asarray(z0, dtype=float)
    if np.any(z0 <= 0):
        raise ValueError("anchor must be strictly positive")
    omega = z0 / (1.0 + z0)
    offset = np.log2(1.0 + z0) - omega * np.log2(z0)
    if omega.ndim == 0:
        return float(omega), float(offset)
    return omega, offset


@dataclass(frozen=True)
class BoundParams:
    """Bob-rate bounds for every (realization, user), shape (R, K).

    ``active`` marks the terms that were degraded at the anchor; the rest
    are bounded by zero.
    """

    omega: np.ndarray
    offset: np.ndarray
    anchor: np.ndarray
    active: np.ndarray


def _parts(cfg: GameConfig, X: np.ndarray):
    grid = type_grid(cfg)
    Xr = X[np.arange(X.shape[0])[None, :], grid.types]
    Pr = np.exp2(Xr)
    Db = cfg.noise_power + np.sum(grid.h * Pr, axis=1)
    De = cfg.noise_power + np.sum(grid.g * Pr, axis=1)
    psi_b = Db[:, None] - grid.h * Pr
    psi_e = De[:, None] - grid.g * Pr
    return grid, Xr, Pr, Db, De, psi_b, psi_e


def make_bounds(cfg: GameConfig, log_powers: np.ndarray) -> BoundParams:
    """Tighten every Bob-rate bound at the given log-power profile."""
    grid, Xr, Pr, Db, De, psi_b, psi_e = _parts(cfg, np.asarray(log_powers, dtype=float))
    z_b = grid.h * Pr / psi_b
    active = grid.h * psi_e > grid.g * psi_b
    omega, offset = bound_params_at(z_b)
    return BoundParams(omega, offset, z_b, active)


def dc_objective(cfg: GameConfig, log_powers: np.ndarray, bounds: BoundParams) -> tuple[float, float]:
    """Return (F, H) summed over users; ``H - F`` is the bounded sum rate."""
    grid, Xr, Pr, Db, De, psi_b, psi_e = _parts(cfg, np.asarray(log_powers, dtype=float))
    wt = grid.prob[:, None] * bounds.active
    F = np.sum(wt * (
        -bounds.omega * (np.log2(grid.h) + Xr - np.log2(psi_b))
        - bounds.offset
        + np.log2(De)[:, None]
    ))
    H = np.sum(wt * np.log2(psi_e))
    return float(F), float(H)


def bounded_sum_rate(cfg: GameConfig, log_powers: np.ndarray, bounds: BoundParams) -> float:
    F, H = dc_objective(cfg, log_powers, bounds)
    return H - F


def _scatter(grid, vals: np.ndarray, K: int, M: int) -> np.ndarray:
    """Sum (R, K) per-realization values into (K, M) per-own-type slots."""
    return np.stack([np.bincount(grid.types[:, k], vals[:, k], minlength=M) for k in range(K)])


def _grad_F(cfg, X, bounds):
    grid, Xr, Pr, Db, De, psi_b, psi_e = _parts(cfg, X)
    K, M = X.shape
    wt = grid.prob[:, None] * bounds.active
    # d/dx_l log2(c + sum a 2^x) = a 2^x_l / (c + sum a 2^x)
    own = -wt * bounds.omega
    cross_b = np.sum(wt * bounds.omega / psi_b, axis=1)[:, None] * grid.h * Pr \
        - wt * bounds.omega / psi_b * grid.h * Pr
    eve_all = np.sum(wt, axis=1)[:, None] * grid.g * Pr / De[:, None]
    return _scatter(grid, own + cross_b + eve_all, K, M)


def _grad_H(cfg, X, bounds):
    grid, Xr, Pr, Db, De, psi_b, psi_e = _parts(cfg, X)
    K, M = X.shape
    wt = grid.prob[:, None] * bounds.active
    cross = np.sum(wt / psi_e, axis=1)[:, None] * grid.g * Pr - wt / psi_e * grid.g * Pr
    return _scatter(grid, cross, K, M)


class _Projector:
    """Euclidean projection onto each user's transformed feasible set."""

    def __init__(self, cfg: GameConfig):
        self.w = np.stack([type_weights(u.law).reshape(-1) for u in cfg.users])
        self.budget = np.array([u.avg_power for u in cfg.users])
        self.lo = np.log2(POWER_FLOOR_FACTOR * self.budget)[:, None] * np.ones_like(self.w)
        self.hi = np.log2([u.max_power for u in cfg.users])[:, None] * np.ones_like(self.w)

    def __call__(self, Y: np.ndarray) -> np.ndarray:
        return np.stack([self._one(k, Y[k]) for k in range(Y.shape[0])])

    def _one(self, k: int, y: np.ndarray) -> np.ndarray:
        w, lo, hi, budget = self.w[k], self.lo[k], self.hi[k], self.budget[k]
        x = np.clip(y, lo, hi)
        if w @ np.exp2(x) <= budget:
            return x
        # x + nu w ln2 2^x = y  =>  x = y - W(nu w ln2^2 2^y) / ln2,
        # evaluated as W(e^s) so a large y cannot overflow
        ln2 = math.log(2.0)
        s = np.log(w * ln2**2) + y * ln2

        def at(log_nu):
            return np.clip(y - wrightomega(s + log_nu).real / ln2, lo, hi)

        def excess(log_nu):
            return math.log(w @ np.exp2(at(log_nu)) / budget)

        a, b = -60.0, 0.0
        while excess(b) > 0:
            a, b = b, b + 20.0
        x = at(brentq(excess, a, b, xtol=1e-14, rtol=4 * np.finfo(float).eps))
        over = w @ np.exp2(x) / budget
        if over > 1.0:
            x = np.clip(x - math.log2(over), lo, hi)
        return x


@dataclass
class CentralSolution:
    profile: StrategyProfile
    sum_rate: float
    bound_value: float
    outer_iterations: int
    history: list[tuple[float, float]] = field(default_factory=list)
    # per outer step: (exact sum rate at the new iterate, surrogate of the previous anchor there)
    converged: bool = True
    diagnostics: list[str] = field(default_factory=list)


def _minimize_convex(cfg, X, bounds, lin, proj, kkt_tol, max_iter):
    """Minimize the convex DCA subproblem F(x) - <lin, x> over the transformed set.

    SLSQP with analytic gradients; returns the start point unless the
    result is feasible and strictly better, so the caller's ascent holds.
    """
    K, M = X.shape

    def phi(z):
        Z = z.reshape(K, M)
        F, _ = dc_objective(cfg, Z, bounds)
        return F - float(np.sum(lin * Z))

    def dphi(z):
        return (_grad_F(cfg, z.reshape(K, M), bounds) - lin).reshape(-1)

    w, budget = proj.w, proj.budget
    eye = np.repeat(np.eye(K), M, axis=1)
    ln2 = math.log(2.0)
    cons = {
        "type": "ineq",
        "fun": lambda z: budget - np.sum(w * np.exp2(z.reshape(K, M)), axis=1),
        "jac": lambda z: -eye * (w * np.exp2(z.reshape(K, M)) * ln2).reshape(1, -1),
    }
    box = list(zip(proj.lo.reshape(-1), proj.hi.reshape(-1)))
    res = minimize(phi, X.reshape(-1), jac=dphi, method="SLSQP", bounds=box,
                   constraints=[cons], options={"ftol": kkt_tol * 1e-3, "maxiter": max_iter})
    Y = proj(res.x.reshape(K, M))
    if phi(Y.reshape(-1)) < phi(X.reshape(-1)):
        return Y
    return X


def _sca(cfg, X, proj, tol, max_outer, dca_steps, kkt_tol, max_inner):
    exact = float(np.sum(ergodic_utilities(cfg, np.exp2(X))))
    history = []
    bound_value = exact
    converged = False
    n = 0
    for n in range(1, max_outer + 1):
        bounds = make_bounds(cfg, X)
        Y = X
        obj = -bounded_sum_rate(cfg, Y, bounds)
        for _ in range(dca_steps):
            lin = _grad_H(cfg, Y, bounds)
            Yn = _minimize_convex(cfg, Y, bounds, lin, proj, kkt_tol, max_inner)
            obj_n = -bounded_sum_rate(cfg, Yn, bounds)
            if obj_n > obj:  # DCA never ascends; guard against round-off
                break
            Y, done = Yn, obj - obj_n <= tol
            obj = obj_n
            if done:
                break
        bound_value = bounded_sum_rate(cfg, Y, bounds)
        new_exact = float(np.sum(ergodic_utilities(cfg, np.exp2(Y))))
        history.append((new_exact, bound_value))
        gain = new_exact - exact
        X, exact = Y, new_exact
        if gain <= tol:
            converged = True
            break
    return X, exact, bound_value, n, history, converged


def solve_social_optimum(cfg: GameConfig, restarts: int = 5, seed: int | None = 0,
                         inits: list[StrategyProfile] | None = None,
                         tol: float = 1e-10, max_outer: int = 500, dca_steps: int = 1,
                         kkt_tol: float = 1e-6, max_inner: int = 200,
                         solo_starts: bool = True) -> CentralSolution:
    """Maximize the sum of clamped average secrecy rates over all users' policies.

    Starts from the uniform profile, then ``restarts - 1`` random feasible
    profiles, then (with ``solo_starts``) one profile per user in which only
    that user transmits, then any ``inits`` given; keeps the best by exact
    sum rate. The problem is not concave: symmetric starts tend to stall in
    a symmetric stationary point while silencing all but one user often
    does much better, hence the solo starts.
    """
    proj = _Projector(cfg)
    rng = np.random.default_rng(seed)
    starts = []
    if restarts >= 1:
        starts.append(uniform_profile(cfg))
    starts += [random_profile(cfg, rng) for _ in range(max(0, restarts - 1))]
    solos = []
    if solo_starts and cfg.n_users > 1:
        # user k alone: its exact water-filling answer to silent opponents
        silent = zero_profile(cfg)
        solos = [silent.replace(k, solve_best_response(cfg, silent, k).policy) for k in range(cfg.n_users)]
        starts += solos
    starts += list(inits or [])
    if not starts:
        raise ValueError("need at least one start")

    best = None
    for start in starts:
        X0 = proj(np.log2(np.maximum(start.as_array(), 1e-300)))
        X, exact, bound_value, n, history, ok = _sca(cfg, X0, proj, tol, max_outer, dca_steps, kkt_tol, max_inner)
        if best is None or exact > best.sum_rate:
            sol = CentralSolution(StrategyProfile.from_array(np.exp2(X)), exact, bound_value, n, history, ok)
            if not ok:
                sol.diagnostics.append(f"outer loop stopped at {max_outer} iterations")
            best = sol
    # the log-power search keeps silent users at a small floor; the exact
    # solo profiles (true zeros) can be marginally better
    for solo in solos:
        exact = float(np.sum(ergodic_utilities(cfg, solo)))
        if exact > best.sum_rate:
            best = CentralSolution(solo, exact, best.bound_value, best.outer_iterations, best.history,
                                   best.converged, best.diagnostics + ["kept an exact single-user profile"])
    return best
