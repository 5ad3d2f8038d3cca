"""Brute-force grid validators for best responses and the social optimum.

Nothing here calls the solvers it is meant to check. Utilities are rebuilt
from the rate definition, realization by realization, and maximized by
exhaustive enumeration on a power grid. Intended for small instances only
(two users, at most two gain states each).

Grids are expressed in units of the user's average power: ``step=0.01``
means coordinates move in increments of ``0.01 * avg_power``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .model import GameConfig, PowerPolicy, StrategyProfile, type_weights
from .rates import ergodic_utilities

__all__ = [
    "GridSpec",
    "GridSizeError",
    "MAX_CANDIDATES",
    "own_type_utilities",
    "grid_best_response",
    "grid_social_optimum",
    "deviation_scan",
    "best_response_lipschitz",
    "grid_effect",
]

# cap on enumerated policies per user; a 0.01 grid on four types sits just above 1e7
MAX_CANDIDATES = 20_000_000


class GridSizeError(ValueError):
    """The requested grid or instance is too large to enumerate."""


@dataclass(frozen=True)
class GridSpec:
    step: float = 0.01
    budget_mode: Literal["equality", "inequality"] = "equality"

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("grid step must be positive")
        if self.budget_mode not in ("equality", "inequality"):
            raise ValueError(f"unknown budget mode {self.budget_mode!r}")


def _gains(cfg: GameConfig, k: int):
    law = cfg.users[k].law
    L = law.n_states
    h = np.repeat(np.asarray(law.bob_states, dtype=float), L)
    g = np.tile(np.asarray(law.eve_states, dtype=float), L)
    return h, g, type_weights(law).reshape(-1)


def _check_small(cfg: GameConfig):
    if cfg.n_users != 2 or cfg.n_states > 2:
        raise GridSizeError("grid oracles support exactly two users with at most two states")


def _secrecy(h, g, p, ib, ie, noise):
    """Clamped secrecy rate of power ``p`` with interference ``ib``/``ie``, bits."""
    bob = np.log2(1.0 + h * p / (noise + ib))
    eve = np.log2(1.0 + g * p / (noise + ie))
    return np.maximum(bob - eve, 0.0)


def own_type_utilities(cfg: GameConfig, opponents: StrategyProfile, user: int, powers) -> np.ndarray:
    """Contribution of each own type to the user's average utility.

    Returns an array of shape (L*L, len(powers)): entry ``[t, n]`` is the
    probability-weighted utility collected in type ``t`` when that type
    transmits ``powers[n]``. The user's average utility is the sum over
    ``t`` of the entries picked by its policy.
    """
    powers = np.asarray(powers, dtype=float)
    h, g, w = _gains(cfg, user)
    others = [k for k in range(cfg.n_users) if k != user]
    opp = [(*_gains(cfg, k), opponents[k].flat()) for k in others]
    out = np.zeros((h.size, powers.size))
    for combo in itertools.product(*(range(o[2].size) for o in opp)):
        ib = sum(o[0][t] * o[3][t] for o, t in zip(opp, combo))
        ie = sum(o[1][t] * o[3][t] for o, t in zip(opp, combo))
        q = math.prod(o[2][t] for o, t in zip(opp, combo))
        out += q * _secrecy(h[:, None], g[:, None], powers[None, :], ib, ie, cfg.noise_power)
    return w[:, None] * out


def _type_range(cfg: GameConfig, k: int) -> np.ndarray:
    """Largest power each type can take alone without breaking budget or cap."""
    user = cfg.users[k]
    w = type_weights(user.law).reshape(-1)
    with np.errstate(divide="ignore"):
        return np.minimum(user.max_power, np.where(w > 0, user.avg_power / w, np.inf))


def _axis(top: float, unit: float) -> np.ndarray:
    if unit <= 0.0 or top <= 0.0:
        return np.zeros(1)
    n = int(math.floor(top / unit * (1 + 1e-12)))
    return unit * np.arange(n + 1)


def grid_best_response(cfg: GameConfig, opponents: StrategyProfile, user: int,
                       grid: GridSpec = GridSpec()) -> tuple[PowerPolicy, float]:
    """Best grid policy of ``user`` against ``opponents`` by exhaustive enumeration.

    Equality mode enumerates every type but the last on the grid and solves
    the last one from the budget, dropping points outside its range.
    Inequality mode enumerates full grid points with expected power at most
    the budget. Returns the policy and its utility.
    """
    _check_small(cfg)
    me = cfg.users[user]
    w = type_weights(me.law).reshape(-1)
    M = w.size
    unit = grid.step * me.avg_power
    tops = _type_range(cfg, user)
    budget = me.avg_power
    slack = 1e-12 * budget
    axes = [_axis(t, unit) for t in tops]
    tables = [own_type_utilities(cfg, opponents, user, ax)[t] for t, ax in enumerate(axes)]

    free = M - 1 if grid.budget_mode == "equality" else M
    mesh = math.prod(ax.size for ax in axes[1:free])
    if mesh > MAX_CANDIDATES:
        raise GridSizeError(f"grid of {mesh} points per slice exceeds the limit of {MAX_CANDIDATES}")
    # loop over the first coordinate, vectorize the rest
    rest = np.meshgrid(*[np.arange(ax.size) for ax in axes[1:free]], indexing="ij")
    rest = [r.reshape(-1) for r in rest]
    spent_rest = sum((w[t + 1] * axes[t + 1][r] for t, r in enumerate(rest)), np.zeros(mesh))
    value_rest = sum((tables[t + 1][r] for t, r in enumerate(rest)), np.zeros(mesh))
    if free >= 1:
        ordered = np.sort(spent_rest)
        count = int(np.searchsorted(ordered, budget + slack - w[0] * axes[0], side="right").sum())
    else:
        count = 1
    if count > MAX_CANDIDATES:
        raise GridSizeError(f"{count} candidate policies exceed the limit of {MAX_CANDIDATES}")

    best_val = -math.inf
    best = None
    first = range(axes[0].size) if free >= 1 else [None]
    for a in first:
        spent = spent_rest + (w[0] * axes[0][a] if a is not None else 0.0)
        value = value_rest + (tables[0][a] if a is not None else 0.0)
        if grid.budget_mode == "equality":
            last = (budget - spent) / w[-1]
            ok = (last >= -slack / w[-1]) & (last <= tops[-1] * (1 + 1e-12))
            last = np.clip(last, 0.0, tops[-1])
            if M == 1:
                value = np.zeros(spent.size)
            contrib = own_type_utilities(cfg, opponents, user, last[ok])[M - 1]
            cand = np.full(spent.size, -math.inf)
            cand[ok] = value[ok] + contrib
        else:
            cand = np.where(spent <= budget + slack, value, -math.inf)
        n = int(np.argmax(cand))
        if cand[n] > best_val:
            best_val = float(cand[n])
            coords = [axes[0][a]] if a is not None else []
            coords += [axes[t + 1][r[n]] for t, r in enumerate(rest)]
            if grid.budget_mode == "equality":
                coords.append(float(last[n]))
            best = np.array(coords)
    if best is None:
        raise GridSizeError("no grid point meets the budget")
    L = me.law.n_states
    return PowerPolicy(best.reshape(L, L)), best_val


def _pair_table(cfg: GameConfig, axes1, axes2):
    """Sum-rate contribution of every type pair at every pair of grid powers.

    ``T[t1][t2]`` has shape (len(axes1[t1]), len(axes2[t2])).
    """
    h1, g1, w1 = _gains(cfg, 0)
    h2, g2, w2 = _gains(cfg, 1)
    T = []
    for t1 in range(w1.size):
        a = axes1[t1][:, None]
        row = []
        for t2 in range(w2.size):
            b = axes2[t2][None, :]
            r1 = _secrecy(h1[t1], g1[t1], a, h2[t2] * b, g2[t2] * b, cfg.noise_power)
            r2 = _secrecy(h2[t2], g2[t2], b, h1[t1] * a, g1[t1] * a, cfg.noise_power)
            row.append(w1[t1] * w2[t2] * (r1 + r2))
        T.append(row)
    return T


def _combos(axes, weights, coords):
    """All index tuples over ``coords`` with their cost (expected power)."""
    if not coords:
        return np.zeros((1, 0), dtype=np.intp), np.zeros(1)
    idx = np.stack([g.reshape(-1) for g in np.meshgrid(*[np.arange(axes[t].size) for t in coords],
                                                         indexing="ij")], axis=1)
    cost = sum(weights[t] * axes[t][idx[:, n]] for n, t in enumerate(coords))
    return idx, cost


def _outer_sum(parts, n):
    """(a, n), (b, n), ... -> (a*b*..., n) of all sums, C order over the combos."""
    out = np.zeros((1, n))
    for p in parts:
        out = (out[:, None, :] + p[None, :, :]).reshape(-1, n)
    return out


def _running_max(v):
    # row-by-row is several times faster than ufunc.accumulate along axis 0
    out = v.copy()
    for i in range(1, out.shape[0]):
        np.maximum(out[i - 1], out[i], out=out[i])
    return out


def _ravel(idx, sizes):
    if not sizes:
        return np.zeros(idx.shape[0], dtype=np.intp)
    return np.ravel_multi_index(tuple(idx.T), sizes)


def _joint_search(cfg: GameConfig, axes1, axes2, chunk: int = 2048):
    """Exact max of the sum rate over two per-user grids with budget inequalities.

    User 1's feasible grid points are enumerated. For each of them user 2's
    problem separates over its own types, and is solved exactly by splitting
    those types into two halves: every combination of the first half is
    paired with the best affordable combination of the second half via a
    running maximum over the second half sorted by cost.
    """
    _, _, w1 = _gains(cfg, 0)
    _, _, w2 = _gains(cfg, 1)
    b1 = cfg.users[0].avg_power * (1 + 1e-12)
    b2 = cfg.users[1].avg_power * (1 + 1e-12)
    M1, M2 = w1.size, w2.size

    idx1, cost1 = _combos(axes1, w1, list(range(M1)))
    keep = cost1 <= b1
    idx1 = idx1[keep]
    if idx1.shape[0] > MAX_CANDIDATES:
        raise GridSizeError(f"{idx1.shape[0]} candidate policies exceed the limit of {MAX_CANDIDATES}")
    half = (M2 + 1) // 2
    idxA, costA = _combos(axes2, w2, list(range(half)))
    idxB, costB = _combos(axes2, w2, list(range(half, M2)))
    order = np.argsort(costB, kind="stable")
    idxB, costB = idxB[order], costB[order]
    pick = np.searchsorted(costB, b2 - costA, side="right") - 1
    okA = pick >= 0
    idxA, pick = idxA[okA], pick[okA]
    flatA = _ravel(idxA, [axes2[t].size for t in range(half)])
    flatB = _ravel(idxB, [axes2[t].size for t in range(half, M2)])

    T = _pair_table(cfg, axes1, axes2)
    best_val = -math.inf
    best = None
    for s in range(0, idx1.shape[0], chunk):
        sel = idx1[s:s + chunk]
        n = sel.shape[0]
        # f[t2][b, n]: value of user 2 putting grid power b on type t2, given user 1's n-th policy
        f = [sum(T[t1][t2][sel[:, t1]] for t1 in range(M1)).T for t2 in range(M2)]
        vA = _outer_sum(f[:half], n)[flatA]
        vB = _outer_sum(f[half:], n)[flatB]
        run = _running_max(vB)
        total = vA + run[pick]
        a, r = divmod(int(np.argmax(total)), n)
        if total[a, r] > best_val:
            best_val = float(total[a, r])
            bidx = int(np.argmax(vB[:pick[a] + 1, r]))
            p1 = [axes1[t][sel[r, t]] for t in range(M1)]
            p2 = [axes2[t][idxA[a, c]] for c, t in enumerate(range(half))]
            p2 += [axes2[t][idxB[bidx, c]] for c, t in enumerate(range(half, M2))]
            best = (np.array(p1), np.array(p2))
    return best, best_val


def grid_social_optimum(cfg: GameConfig, grid: GridSpec = GridSpec(step=0.1, budget_mode="inequality"),
                        refine: int = 1) -> tuple[StrategyProfile, float]:
    """Maximize the sum of both users' clamped average rates on a power grid.

    The coarse pass is exhaustive over both users' grids (expected power at
    most the budget; equality mode is treated the same way because the
    optimum may leave a user silent). Each of the ``refine`` extra passes
    re-enumerates a window of one coarse step around the incumbent with a
    step ten times finer. The returned sum rate is re-evaluated on the
    plain rate definition.
    """
    _check_small(cfg)
    units = [grid.step * u.avg_power for u in cfg.users]
    tops = [_type_range(cfg, k) for k in range(2)]
    axes = [[_axis(t, units[k]) for t in tops[k]] for k in range(2)]
    (p1, p2), _ = _joint_search(cfg, *axes)
    for _ in range(refine):
        fine = [u / 10.0 for u in units]
        axes = []
        for k, p in enumerate((p1, p2)):
            axes.append([
                np.clip(p[t] + fine[k] * np.arange(-10, 11), 0.0, tops[k][t]) for t in range(p.size)
            ])
            axes[-1] = [np.unique(ax) for ax in axes[-1]]
        (p1, p2), _ = _joint_search(cfg, *axes)
        units = fine
    L = cfg.n_states
    profile = StrategyProfile([PowerPolicy(p1.reshape(L, L)), PowerPolicy(p2.reshape(L, L))])
    return profile, float(np.sum(ergodic_utilities(cfg, profile)))


def deviation_scan(cfg: GameConfig, profile: StrategyProfile, grid: GridSpec = GridSpec()) -> np.ndarray:
    """Best unilateral utility gain of every user over its grid policies, shape (K,)."""
    current = ergodic_utilities(cfg, profile)
    return np.array([grid_best_response(cfg, profile, k, grid)[1] - current[k] for k in range(cfg.n_users)])


def best_response_lipschitz(cfg: GameConfig, opponents: StrategyProfile, user: int) -> float:
    """Largest L1 norm of the user's utility gradient over its feasible box.

    Every own-type contribution is concave with slope decreasing from its
    value at zero power, so the maximum sits at the all-zero policy; the
    slope there is computed from the rate definition.
    """
    h, g, w = _gains(cfg, user)
    others = [k for k in range(cfg.n_users) if k != user]
    opp = [(*_gains(cfg, k), opponents[k].flat()) for k in others]
    slope = np.zeros(h.size)
    for combo in itertools.product(*(range(o[2].size) for o in opp)):
        ib = cfg.noise_power + sum(o[0][t] * o[3][t] for o, t in zip(opp, combo))
        ie = cfg.noise_power + sum(o[1][t] * o[3][t] for o, t in zip(opp, combo))
        q = math.prod(o[2][t] for o, t in zip(opp, combo))
        slope += q * np.maximum(h / ib - g / ie, 0.0) / math.log(2.0)
    return float(np.sum(w * slope))


def grid_effect(cfg: GameConfig, profiles, step: float, rel: float = 1e-6) -> float:
    """First-order utility change from moving every power by one grid step.

    ``step`` is in units of each user's average power. The gradient of the
    sum rate is estimated by central differences at each given profile
    (one-sided at zero) and the largest ``step * ||grad||_1`` is returned.
    """
    worst = 0.0
    for profile in profiles:
        P = profile.as_array() if isinstance(profile, StrategyProfile) else np.asarray(profile, dtype=float)
        total = 0.0
        for k in range(P.shape[0]):
            d = rel * cfg.users[k].avg_power
            unit = step * cfg.users[k].avg_power
            for t in range(P.shape[1]):
                hi = P.copy()
                hi[k, t] += d
                lo = P.copy()
                lo[k, t] = max(0.0, lo[k, t] - d)
                slope = (ergodic_utilities(cfg, hi).sum() - ergodic_utilities(cfg, lo).sum()) / (hi[k, t] - lo[k, t])
                total += abs(slope) * unit
        worst = max(worst, total)
    return worst
