"""Secrecy rates, their derivatives, and the diagonal-concavity check.

Expectations are exact sums over every joint type realization of all users
(L**(2K) terms). Rates are in bits; every derivative carries the matching
1/ln 2 factor.

Everything is expressed through the total received power at each receiver,
``D_b = sigma^2 + sum_l h_l P_l`` and ``D_e`` likewise, because then

    d/dP_k  log2(1 + h_k P_k / psi_b) = h_k / (D_b ln 2)

and all second derivatives are products of gains over ``D**2``.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import GameConfig, StrategyProfile, random_profile

__all__ = [
    "NonDegradedError",
    "InterferenceCoefficients",
    "RateReport",
    "ConcavityCertificate",
    "TypeGrid",
    "type_grid",
    "interference",
    "instantaneous_rates",
    "ergodic_utility",
    "ergodic_utilities",
    "degradedness_margin",
    "utility_gradient",
    "pseudo_gradient",
    "utility_jacobian",
    "concavity_certificate",
]

LN2 = math.log(2.0)


class NonDegradedError(ValueError):
    """Some realization has Eve's effective gain at least Bob's.

    The smooth (unclamped) utility then differs from the true one and its
    derivatives are not those of the game.
    """

    def __init__(self, margin: float):
        self.margin = margin
        super().__init__(f"non-degraded realization: min(zeta_b - zeta_e) = {margin:.6g}")


@dataclass(frozen=True)
class TypeGrid:
    """Every joint realization of all users' types.

    ``types[r, k]`` is user k's flat own-type index (i * L + j) in
    realization r; ``h``/``g`` are the matching gains.
    """

    types: np.ndarray  # (R, K) int
    prob: np.ndarray  # (R,)
    h: np.ndarray  # (R, K)
    g: np.ndarray  # (R, K)
    n_types: int  # L * L


@functools.lru_cache(maxsize=64)
def type_grid(cfg: GameConfig) -> TypeGrid:
    per_user = []
    for user in cfg.users:
        law = user.law
        L = law.n_states
        h = np.repeat(np.asarray(law.bob_states), L)
        g = np.tile(np.asarray(law.eve_states), L)
        w = np.outer(law.bob_probs, law.eve_probs).reshape(-1)
        per_user.append((h, g, w))
    M = cfg.n_states ** 2
    types = np.array(list(itertools.product(range(M), repeat=cfg.n_users)), dtype=np.intp)
    cols = range(cfg.n_users)
    h = np.stack([per_user[k][0][types[:, k]] for k in cols], axis=1)
    g = np.stack([per_user[k][1][types[:, k]] for k in cols], axis=1)
    prob = np.prod(np.stack([per_user[k][2][types[:, k]] for k in cols], axis=1), axis=1)
    for arr in (types, prob, h, g):
        arr.setflags(write=False)
    return TypeGrid(types=types, prob=prob, h=h, g=g, n_types=M)


def _as_array(profile) -> np.ndarray:
    if isinstance(profile, StrategyProfile):
        return profile.as_array()
    return np.asarray(profile, dtype=float)


def _realized_powers(grid: TypeGrid, P: np.ndarray) -> np.ndarray:
    return P[np.arange(P.shape[0])[None, :], grid.types]


def _totals(cfg: GameConfig, grid: TypeGrid, P: np.ndarray):
    Pr = _realized_powers(grid, P)
    Db = cfg.noise_power + np.sum(grid.h * Pr, axis=1)
    De = cfg.noise_power + np.sum(grid.g * Pr, axis=1)
    return Pr, Db, De


def _degraded(grid: TypeGrid, Pr, Db, De) -> np.ndarray:
    """(R, K) mask of zeta_b > zeta_e, i.e. h_k psi_e > g_k psi_b."""
    psi_b = Db[:, None] - grid.h * Pr
    psi_e = De[:, None] - grid.g * Pr
    return grid.h * psi_e > grid.g * psi_b


@dataclass(frozen=True)
class InterferenceCoefficients:
    zeta_bob: float
    zeta_eve: float
    psi_bob: float
    psi_eve: float


@dataclass(frozen=True)
class RateReport:
    bob_rate: float
    eve_rate: float
    secrecy_rate: float
    smooth_secrecy_rate: float


def _realization(cfg: GameConfig, joint_types: Sequence[tuple[int, int]]):
    if len(joint_types) != cfg.n_users:
        raise ValueError(f"need one (i, j) per user, got {len(joint_types)}")
    h, g = [], []
    for user, (i, j) in zip(cfg.users, joint_types):
        L = user.law.n_states
        if not (0 <= i < L and 0 <= j < L):
            raise IndexError(f"type index ({i}, {j}) out of range for {L} states")
        h.append(user.law.bob_states[i])
        g.append(user.law.eve_states[j])
    return h, g


def interference(cfg: GameConfig, profile: StrategyProfile, user: int,
                 joint_types: Sequence[tuple[int, int]]) -> InterferenceCoefficients:
    """Effective gains seen by ``user`` in one realization of all types."""
    h, g = _realization(cfg, joint_types)
    P = [profile[k].powers[i, j] for k, (i, j) in enumerate(joint_types)]
    psi_b = cfg.noise_power + sum(h[l] * P[l] for l in range(cfg.n_users) if l != user)
    psi_e = cfg.noise_power + sum(g[l] * P[l] for l in range(cfg.n_users) if l != user)
    return InterferenceCoefficients(h[user] / psi_b, g[user] / psi_e, psi_b, psi_e)


def instantaneous_rates(cfg: GameConfig, profile: StrategyProfile, user: int,
                        joint_types: Sequence[tuple[int, int]]) -> RateReport:
    """Bob, Eve and secrecy rates of ``user`` for fixed types of every user.

    Interference from the other users is treated as noise at both receivers.
    """
    coef = interference(cfg, profile, user, joint_types)
    i, j = joint_types[user]
    p = float(profile[user].powers[i, j])
    bob = math.log2(1.0 + coef.zeta_bob * p)
    eve = math.log2(1.0 + coef.zeta_eve * p)
    smooth = bob - eve
    return RateReport(bob, eve, max(0.0, smooth), smooth)


def _rates_per_realization(cfg, grid, P):
    Pr, Db, De = _totals(cfg, grid, P)
    # log2(D / psi) == log2(1 + zeta * P) without forming zeta
    bob = np.log2(Db[:, None]) - np.log2(Db[:, None] - grid.h * Pr)
    eve = np.log2(De[:, None]) - np.log2(De[:, None] - grid.g * Pr)
    return bob, eve


def ergodic_utilities(cfg: GameConfig, profile, clamped: bool = True) -> np.ndarray:
    """Average secrecy rate of every user, shape (K,)."""
    grid = type_grid(cfg)
    bob, eve = _rates_per_realization(cfg, grid, _as_array(profile))
    diff = bob - eve
    if clamped:
        diff = np.maximum(diff, 0.0)
    return grid.prob @ diff


def ergodic_utility(cfg: GameConfig, profile, user: int, clamped: bool = True) -> float:
    """Expected secrecy rate of one user.

    ``clamped=True`` applies ``(.)^+`` per realization (the game's utility);
    ``clamped=False`` averages the signed difference.
    """
    return float(ergodic_utilities(cfg, profile, clamped)[user])


def degradedness_margin(cfg: GameConfig, profile) -> float:
    """Smallest zeta_b - zeta_e over users and positive-probability realizations."""
    grid = type_grid(cfg)
    Pr, Db, De = _totals(cfg, grid, _as_array(profile))
    psi_b = Db[:, None] - grid.h * Pr
    psi_e = De[:, None] - grid.g * Pr
    margin = grid.h / psi_b - grid.g / psi_e
    return float(margin[grid.prob > 0].min())


def _require_degraded(cfg, grid, Pr, Db, De):
    live = grid.prob > 0
    if not _degraded(grid, Pr, Db, De)[live].all():
        psi_b = Db[:, None] - grid.h * Pr
        psi_e = De[:, None] - grid.g * Pr
        margin = (grid.h / psi_b - grid.g / psi_e)[live].min()
        raise NonDegradedError(float(margin))


def _gradients(cfg: GameConfig, P: np.ndarray) -> np.ndarray:
    grid = type_grid(cfg)
    Pr, Db, De = _totals(cfg, grid, P)
    _require_degraded(cfg, grid, Pr, Db, De)
    terms = grid.prob[:, None] * (grid.h / Db[:, None] - grid.g / De[:, None]) / LN2
    K, M = P.shape
    return np.stack([np.bincount(grid.types[:, k], terms[:, k], minlength=M) for k in range(K)])


def utility_gradient(cfg: GameConfig, profile, user: int) -> np.ndarray:
    """Derivative of the smooth average utility in the user's own powers, L x L.

    Raises :class:`NonDegradedError` when some realization is not degraded.
    """
    G = _gradients(cfg, _as_array(profile))
    L = cfg.n_states
    return G[user].reshape(L, L)


def pseudo_gradient(cfg: GameConfig, profile, weight: float = 1.0) -> np.ndarray:
    """Stacked weighted own-gradients of all users, length K * L * L."""
    return weight * _gradients(cfg, _as_array(profile)).reshape(-1)


def utility_jacobian(cfg: GameConfig, profile, weight: float = 1.0) -> np.ndarray:
    """Jacobian of :func:`pseudo_gradient` with respect to the stacked profile.

    Row ``k*M + t`` holds derivatives of d U_k / d P_k[t]. Within one user's
    block only the diagonal is non-zero.
    """
    P = _as_array(profile)
    grid = type_grid(cfg)
    Pr, Db, De = _totals(cfg, grid, P)
    _require_degraded(cfg, grid, Pr, Db, De)
    K, M = P.shape
    J = np.zeros((K * M, K * M))
    for k in range(K):
        rows = k * M + grid.types[:, k]
        for l in range(K):
            vals = grid.prob * (
                grid.g[:, k] * grid.g[:, l] / De**2 - grid.h[:, k] * grid.h[:, l] / Db**2
            )
            np.add.at(J, (rows, l * M + grid.types[:, l]), vals)
    return weight * J / LN2


@dataclass
class ConcavityCertificate:
    max_eigenvalue: float
    sample_count: int
    witness: StrategyProfile | None = None
    resampled: int = 0
    diagnostics: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.witness is None and (self.sample_count == 0 or self.max_eigenvalue < 0.0)


def concavity_certificate(cfg: GameConfig, samples: int, seed: int | None = 0,
                          weight: float = 1.0, max_draws: int | None = None) -> ConcavityCertificate:
    """Scan random feasible degraded profiles for a non-negative eigenvalue of J + J^T.

    Draws that are not degraded are discarded and counted in ``resampled``.
    The witness is the profile with the largest eigenvalue among those that
    reached zero or above.
    """
    if samples <= 0:
        return ConcavityCertificate(-math.inf, 0, diagnostics=["no samples requested; certificate is vacuous"])
    rng = np.random.default_rng(seed)
    max_draws = 100 * samples if max_draws is None else max_draws
    worst = -math.inf
    witness = None
    taken = resampled = 0
    while taken < samples and taken + resampled < max_draws:
        profile = random_profile(cfg, rng)
        try:
            J = utility_jacobian(cfg, profile, weight)
        except NonDegradedError:
            resampled += 1
            continue
        taken += 1
        eig = float(np.linalg.eigvalsh(J + J.T)[-1])
        if eig > worst:
            worst = eig
            if eig >= 0.0:
                witness = profile
    cert = ConcavityCertificate(worst, taken, witness, resampled)
    if taken < samples:
        cert.diagnostics.append(
            f"only {taken} of {samples} degraded profiles found in {max_draws} draws"
        )
    return cert
