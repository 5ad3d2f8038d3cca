"""Exact best response of one user by water-filling on the KKT conditions.

With the opponents fixed, user k's average utility separates over its own
types: ``sum_t w_t f_t(P_t)``. At an optimum every active type has the same
marginal value ``f_t'(P_t) = mu`` (the water level); types whose marginal at
zero is below ``mu`` stay silent. ``mu`` itself is set by the budget.

The game utility clamps each realization's secrecy rate at zero. Whether a
realization is degraded depends only on the opponents' powers, so a
non-degraded realization contributes a constant zero in the user's own power
and simply drops out of ``f_t``. Each ``f_t`` therefore stays concave and
the marginal strictly decreasing wherever it is non-zero.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .model import GameConfig, PowerPolicy, StrategyProfile
from .rates import LN2, NonDegradedError, ergodic_utility

__all__ = [
    "BestResponseSolution",
    "BestResponseProblem",
    "marginal_value",
    "power_at_level",
    "solve_best_response",
]


class BestResponseProblem:
    """User ``user``'s own-type marginals against fixed opponents.

    Vectorized over the user's L*L own types; ``clamped=False`` refuses any
    non-degraded realization instead of dropping it.
    """

    def __init__(self, cfg: GameConfig, profile: StrategyProfile, user: int, clamped: bool = True):
        self.cfg = cfg
        self.user = user
        me = cfg.users[user]
        law = me.law
        L = law.n_states
        self.shape = (L, L)
        self.h = np.repeat(np.asarray(law.bob_states), L)
        self.g = np.tile(np.asarray(law.eve_states), L)
        self.weights = np.outer(law.bob_probs, law.eve_probs).reshape(-1)
        self.avg_power = me.avg_power
        self.max_power = me.max_power
        self.tol = cfg.tolerances

        psi_b = []
        psi_e = []
        q = []
        others = [k for k in range(cfg.n_users) if k != user]
        per = []
        for k in others:
            lk = cfg.users[k].law
            Lk = lk.n_states
            per.append((
                np.repeat(np.asarray(lk.bob_states), Lk),
                np.tile(np.asarray(lk.eve_states), Lk),
                np.outer(lk.bob_probs, lk.eve_probs).reshape(-1),
                profile[k].flat(),
            ))
        for combo in itertools.product(*(range(len(p[2])) for p in per)):
            sb = se = 0.0
            prob = 1.0
            for (hk, gk, wk, Pk), t in zip(per, combo):
                sb += hk[t] * Pk[t]
                se += gk[t] * Pk[t]
                prob *= wk[t]
            psi_b.append(cfg.noise_power + sb)
            psi_e.append(cfg.noise_power + se)
            q.append(prob)
        self.psi_b = np.array(psi_b)
        self.psi_e = np.array(psi_e)
        self.q = np.array(q)

        degraded = self.h[:, None] * self.psi_e[None, :] > self.g[:, None] * self.psi_b[None, :]
        live = self.q[None, :] > 0
        if not clamped and not degraded[np.broadcast_to(live, degraded.shape)].all():
            margin = (self.h[:, None] / self.psi_b - self.g[:, None] / self.psi_e)[np.broadcast_to(live, degraded.shape)]
            raise NonDegradedError(float(margin.min()))
        # opponent probability, zeroed where the realization contributes nothing
        self.coef = np.where(degraded, self.q[None, :], 0.0) / LN2
        self._m0 = self.marginal(np.zeros_like(self.h))
        self._mcap = self.marginal(np.full_like(self.h, self.max_power))

    def marginal(self, powers: np.ndarray) -> np.ndarray:
        """d f_t / d P_t per unit own-type probability, for every own type t."""
        P = np.asarray(powers, dtype=float).reshape(-1)[:, None]
        h = self.h[:, None]
        g = self.g[:, None]
        terms = h / (self.psi_b + h * P) - g / (self.psi_e + g * P)
        return np.sum(self.coef * terms, axis=1)

    def marginal_slope(self, powers: np.ndarray) -> np.ndarray:
        """Derivative of :meth:`marginal` in each type's own power (non-positive)."""
        P = np.asarray(powers, dtype=float).reshape(-1)[:, None]
        h = self.h[:, None]
        g = self.g[:, None]
        terms = (g / (self.psi_e + g * P)) ** 2 - (h / (self.psi_b + h * P)) ** 2
        return np.sum(self.coef * terms, axis=1)

    def powers_at_level(self, mu: float) -> np.ndarray:
        """Invert ``marginal(P) = mu`` per type, clipped to [0, max_power].

        Bracketed root finding: Newton steps that stay inside the current
        bracket, bisection otherwise. Stops once the last step or the bracket
        is below the bisection tolerance.
        """
        cap = self.max_power
        m0 = self._m0
        mcap = self._mcap
        out = np.where(mcap > mu, cap, 0.0)
        inner = (m0 > mu) & (mcap <= mu)
        if not inner.any():
            return out
        tol = self.tol.bisection
        lo = np.zeros(inner.sum())
        hi = np.full_like(lo, cap)
        coef = self.coef[inner]
        h = self.h[inner][:, None]
        g = self.g[inner][:, None]
        x = 0.5 * (lo + hi)
        # bisection alone would need this many halvings; Newton usually needs far fewer
        for _ in range(2 * max(1, math.ceil(math.log2(cap / tol)))):
            rb = 1.0 / (self.psi_b + h * x[:, None])
            re = 1.0 / (self.psi_e + g * x[:, None])
            m = np.sum(coef * (h * rb - g * re), axis=1)
            dm = np.sum(coef * ((g * re) ** 2 - (h * rb) ** 2), axis=1)
            above = m > mu
            lo = np.where(above, x, lo)
            hi = np.where(above, hi, x)
            with np.errstate(divide="ignore", invalid="ignore"):
                nx = x - (m - mu) / dm
            bad = ~((nx > lo) & (nx < hi))
            nx = np.where(bad, 0.5 * (lo + hi), nx)
            step = np.abs(nx - x)
            x = nx
            if np.all((step <= tol) | (hi - lo <= tol)):
                break
        out[inner] = x
        return out

    def expected_power(self, powers: np.ndarray) -> float:
        return float(self.weights @ powers)


@dataclass
class BestResponseSolution:
    policy: PowerPolicy
    water_level: float
    slack_multipliers: np.ndarray
    kkt_residual: float
    achieved_utility: float
    stationarity_residual: float = 0.0
    complementarity_residual: float = 0.0
    budget_residual: float = 0.0
    diagnostics: list[str] = field(default_factory=list)


def marginal_value(cfg: GameConfig, profile: StrategyProfile, user: int, i: int, j: int,
                   power: float, clamped: bool = False) -> float:
    """Marginal utility of one own type per unit of its probability, in bits per unit power.

    By default every realization must be degraded and
    :class:`~secrecy_game.rates.NonDegradedError` is raised otherwise; with
    ``clamped=True`` non-degraded realizations contribute zero, matching the
    clamped utility used by :func:`solve_best_response`.
    """
    if power < 0:
        raise ValueError("power must be non-negative")
    prob = BestResponseProblem(cfg, profile, user, clamped=clamped)
    L = prob.shape[0]
    P = np.zeros(L * L)
    P[i * L + j] = power
    return float(prob.marginal(P)[i * L + j])


def power_at_level(cfg: GameConfig, profile: StrategyProfile, user: int, i: int, j: int,
                   mu: float, clamped: bool = False) -> float:
    """Power of own type (i, j) whose marginal value equals ``mu``, clipped to [0, max_power]."""
    if mu < 0:
        raise ValueError("water level must be non-negative")
    prob = BestResponseProblem(cfg, profile, user, clamped=clamped)
    return float(prob.powers_at_level(mu)[i * prob.shape[0] + j])


def _kkt(prob: BestResponseProblem, P: np.ndarray, mu: float):
    m = prob.marginal(P)
    at_zero = P == 0.0
    at_cap = P == prob.max_power
    interior = ~(at_zero | at_cap)
    station = np.zeros_like(P)
    station[interior] = np.abs(m[interior] - mu)
    station[at_zero] = np.maximum(0.0, m[at_zero] - mu)
    station[at_cap] = np.maximum(0.0, mu - m[at_cap])
    nu = np.where(interior | at_zero, np.maximum(0.0, mu - m), 0.0)
    comp = nu * P
    spent = prob.expected_power(P)
    if mu > 0:
        budget = abs(spent - prob.avg_power)
    else:
        budget = max(0.0, spent - prob.avg_power)
    return float(station.max()), float(comp.max()), budget, nu


def _match_budget(prob: BestResponseProblem, mu_hi: float, budget_tol: float):
    """Find the water level whose allocation spends exactly the budget.

    Spent power is non-increasing in the level, so [0, mu_hi] brackets the
    root. Each step is an Illinois false-position point when it falls
    strictly inside the bracket and the midpoint otherwise.
    """
    target = prob.avg_power
    lo, hi = 0.0, mu_hi
    f_lo = prob.expected_power(prob.powers_at_level(lo)) - target
    f_hi = -target  # everything off at the top level
    side = 0
    eps = 4 * np.finfo(float).eps
    while True:
        mu = (lo * f_hi - hi * f_lo) / (f_hi - f_lo) if f_hi != f_lo else 0.5 * (lo + hi)
        if not (lo < mu < hi):
            mu = 0.5 * (lo + hi)
        P = prob.powers_at_level(mu)
        f = prob.expected_power(P) - target
        if abs(f) <= budget_tol or hi - lo <= eps * hi:
            return P, mu
        if f > 0:
            lo, f_lo = mu, f
            if side == 1:
                f_hi *= 0.5
            side = 1
        else:
            hi, f_hi = mu, f
            if side == -1:
                f_lo *= 0.5
            side = -1


def _polish_budget(prob: BestResponseProblem, P: np.ndarray) -> np.ndarray:
    """Spend the last round-off of the budget on the interior types.

    The shift is the first-order response of the interior powers to a
    common change of the water level, so stationarity is disturbed only at
    second order. Skipped if it would leave [0, max_power].
    """
    interior = (P > 0.0) & (P < prob.max_power)
    gap = prob.avg_power - prob.expected_power(P)
    if gap == 0.0 or not interior.any():
        return P
    slope = prob.marginal_slope(P)[interior]
    if np.any(slope >= 0.0):
        return P
    share = 1.0 / -slope
    shift = gap * share / float(prob.weights[interior] @ share)
    out = P.copy()
    out[interior] += shift
    if out.min() < 0.0 or out.max() > prob.max_power:
        return P
    return out


def solve_best_response(cfg: GameConfig, profile: StrategyProfile, user: int,
                        clamped: bool = True) -> BestResponseSolution:
    """Maximize the user's average secrecy rate against ``profile``'s opponents.

    Outer search on the water level until the expected power matches the
    budget (:func:`_match_budget`); inner root finding per type (see
    :meth:`BestResponseProblem.powers_at_level`). The user's own entry in
    ``profile`` is ignored. ``clamped=False`` refuses profiles where some
    realization is not degraded instead of dropping those realizations.
    """
    prob = BestResponseProblem(cfg, profile, user, clamped=clamped)
    diagnostics = []
    target = prob.avg_power
    budget_tol = 0.1 * cfg.tolerances.kkt
    m0 = prob.marginal(np.zeros_like(prob.h))
    mu_hi = float(m0.max())

    if mu_hi <= 0.0:
        # every own type faces only non-degraded realizations: utility is 0 for any policy
        P = np.full_like(prob.h, target)
        mu = 0.0
        diagnostics.append("no degraded realization; every policy has zero utility")
    else:
        P = prob.powers_at_level(0.0)
        mu = 0.0
        if prob.expected_power(P) < target - budget_tol:
            diagnostics.append("power cap saturated: budget cannot be spent on useful types")
        else:
            P, mu = _match_budget(prob, mu_hi, budget_tol)
            P = _polish_budget(prob, P)

    station, comp, budget, nu = _kkt(prob, P, mu)
    policy = PowerPolicy(P.reshape(prob.shape))
    achieved = ergodic_utility(cfg, profile.replace(user, policy), user, clamped=True)
    return BestResponseSolution(
        policy=policy,
        water_level=mu,
        slack_multipliers=nu.reshape(prob.shape),
        kkt_residual=max(station, comp, budget),
        achieved_utility=achieved,
        stationarity_residual=station,
        complementarity_residual=comp,
        budget_residual=budget,
        diagnostics=diagnostics,
    )
