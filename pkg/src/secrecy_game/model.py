"""Problem instances for the fading MAC wiretap power-allocation game.

A game is K users, each with a discrete law over its squared channel gains
toward the legitimate receiver (Bob) and the eavesdropper (Eve). A user's
type is its own pair of gain states; a policy assigns one transmit power to
each type, stored as an L x L matrix (row = Bob state, column = Eve state).

All types here are immutable. Validation is separate from construction so
that :func:`validate_config` can report every violated rule at once.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import IO, Any, Iterable, Sequence

import numpy as np

__all__ = [
    "ChannelLaw",
    "UserConfig",
    "SolverTolerances",
    "GameConfig",
    "PowerPolicy",
    "StrategyProfile",
    "Diagnostic",
    "ConfigError",
    "ConfigParseError",
    "ConfigValidationError",
    "validate_config",
    "joint_prob",
    "type_weights",
    "uniform_policy",
    "zero_profile",
    "uniform_profile",
    "expected_power",
    "with_snr",
    "load_config",
    "config_from_dict",
    "random_profile",
    "config_to_dict",
    "dump_config",
    "MAX_USERS",
    "MAX_STATES",
]

PROB_TOL = 1e-12
DEFAULT_MAX_POWER_FACTOR = 10.0
# exact enumeration costs L**(2K) realizations
MAX_USERS = 3
MAX_STATES = 4


class ConfigError(ValueError):
    """Base class for configuration problems."""


class ConfigParseError(ConfigError):
    """The document is not a well-formed configuration."""


class ConfigValidationError(ConfigError):
    """The configuration parsed but violates an invariant."""

    def __init__(self, diagnostics: Sequence["Diagnostic"]):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


@dataclass(frozen=True)
class Diagnostic:
    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.field}: {self.message}"


def _floats(values: Iterable[Any]) -> tuple[float, ...]:
    return tuple(float(v) for v in values)


@dataclass(frozen=True)
class ChannelLaw:
    """Discrete distribution of one user's squared gains.

    ``bob_states[i]`` occurs with probability ``bob_probs[i]``; likewise for
    Eve. The two gains are independent.
    """

    bob_states: tuple[float, ...]
    bob_probs: tuple[float, ...]
    eve_states: tuple[float, ...]
    eve_probs: tuple[float, ...]

    def __post_init__(self):
        for name in ("bob_states", "bob_probs", "eve_states", "eve_probs"):
            object.__setattr__(self, name, _floats(getattr(self, name)))

    @property
    def n_states(self) -> int:
        return len(self.bob_states)


@dataclass(frozen=True)
class UserConfig:
    law: ChannelLaw
    avg_power: float
    max_power: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "avg_power", float(self.avg_power))
        if self.max_power is None:
            object.__setattr__(self, "max_power", DEFAULT_MAX_POWER_FACTOR * self.avg_power)
        else:
            object.__setattr__(self, "max_power", float(self.max_power))


@dataclass(frozen=True)
class SolverTolerances:
    convergence: float = 1e-8  # max-norm policy change between rounds
    kkt: float = 1e-8  # stationarity / complementarity / budget residual
    bisection: float = 1e-12  # interval width for scalar root finding
    max_iterations: int = 10_000


@dataclass(frozen=True)
class GameConfig:
    users: tuple[UserConfig, ...]
    noise_power: float
    tolerances: SolverTolerances = field(default_factory=SolverTolerances)

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))
        object.__setattr__(self, "noise_power", float(self.noise_power))

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_states(self) -> int:
        return self.users[0].law.n_states


class PowerPolicy:
    """One user's transmit power per own type, as an L x L matrix."""

    __slots__ = ("_powers",)

    def __init__(self, powers):
        arr = np.array(powers, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"policy must be a square matrix, got shape {arr.shape}")
        arr.setflags(write=False)
        self._powers = arr

    @property
    def powers(self) -> np.ndarray:
        return self._powers

    @property
    def n_states(self) -> int:
        return self._powers.shape[0]

    def flat(self) -> np.ndarray:
        return self._powers.reshape(-1)

    def __eq__(self, other):
        if not isinstance(other, PowerPolicy):
            return NotImplemented
        return np.array_equal(self._powers, other._powers)

    __hash__ = None

    def __repr__(self):
        return f"PowerPolicy({self._powers.tolist()!r})"


class StrategyProfile:
    """Ordered policies of all K users."""

    __slots__ = ("_policies",)

    def __init__(self, policies: Iterable[PowerPolicy | Any]):
        self._policies = tuple(
            p if isinstance(p, PowerPolicy) else PowerPolicy(p) for p in policies
        )

    @property
    def policies(self) -> tuple[PowerPolicy, ...]:
        return self._policies

    def __len__(self):
        return len(self._policies)

    def __getitem__(self, k: int) -> PowerPolicy:
        return self._policies[k]

    def __iter__(self):
        return iter(self._policies)

    def as_array(self) -> np.ndarray:
        """Stacked flat policies, shape (K, L*L)."""
        return np.stack([p.flat() for p in self._policies])

    @classmethod
    def from_array(cls, arr) -> "StrategyProfile":
        arr = np.asarray(arr, dtype=float)
        n = math.isqrt(arr.shape[1])
        return cls(PowerPolicy(row.reshape(n, n)) for row in arr)

    def replace(self, k: int, policy: PowerPolicy) -> "StrategyProfile":
        pols = list(self._policies)
        pols[k] = policy
        return StrategyProfile(pols)

    def distance(self, other: "StrategyProfile") -> float:
        """Max-norm distance over all policy entries."""
        return float(np.max(np.abs(self.as_array() - other.as_array())))

    def __eq__(self, other):
        if not isinstance(other, StrategyProfile):
            return NotImplemented
        return self._policies == other._policies

    __hash__ = None

    def __repr__(self):
        return f"StrategyProfile({[p.powers.tolist() for p in self._policies]!r})"


def _check_probs(name: str, probs: Sequence[float], out: list[Diagnostic]):
    if any(not (0.0 <= p <= 1.0) for p in probs):
        out.append(Diagnostic(name, "probabilities must lie in [0, 1]"))
    total = math.fsum(probs)
    if abs(total - 1.0) > PROB_TOL:
        out.append(Diagnostic(name, f"probabilities sum to {total:.12g}"))


def _check_states(name: str, states: Sequence[float], out: list[Diagnostic]):
    if any(not (s > 0.0) or not math.isfinite(s) for s in states):
        out.append(Diagnostic(name, "gains must be strictly positive"))
    if any(b <= a for a, b in zip(states, states[1:])):
        out.append(Diagnostic(name, "gains must be strictly increasing"))


def validate_config(cfg: GameConfig) -> list[Diagnostic]:
    """Return one diagnostic per violated invariant; empty means valid."""
    out: list[Diagnostic] = []
    if cfg.n_users < 2:
        out.append(Diagnostic("users", f"need at least 2 users, got {cfg.n_users}"))
    if cfg.n_users > MAX_USERS:
        out.append(Diagnostic("users", f"exact enumeration supports at most {MAX_USERS} users"))
    if not (cfg.noise_power > 0.0):
        out.append(Diagnostic("noise_power", "must be strictly positive"))

    n_states = None
    for k, user in enumerate(cfg.users):
        pre = f"users[{k}]"
        law = user.law
        L = len(law.bob_states)
        if len(law.bob_probs) != L:
            out.append(Diagnostic(f"{pre}.bob_probs", "length must match bob_states"))
        if len(law.eve_states) != L or len(law.eve_probs) != len(law.eve_states):
            out.append(Diagnostic(f"{pre}.eve_states", "Bob and Eve must have the same number of states"))
        if L == 0:
            out.append(Diagnostic(f"{pre}.bob_states", "need at least one state"))
        if L > MAX_STATES:
            out.append(Diagnostic(f"{pre}.bob_states", f"exact enumeration supports at most {MAX_STATES} states"))
        if n_states is None:
            n_states = L
        elif L != n_states:
            out.append(Diagnostic(f"{pre}.bob_states", "all users must share the number of states"))
        _check_states(f"{pre}.bob_states", law.bob_states, out)
        _check_states(f"{pre}.eve_states", law.eve_states, out)
        _check_probs(f"{pre}.bob_probs", law.bob_probs, out)
        _check_probs(f"{pre}.eve_probs", law.eve_probs, out)
        if not (user.avg_power > 0.0):
            out.append(Diagnostic(f"{pre}.avg_power", "must be strictly positive"))
        if not (user.max_power > 0.0):
            out.append(Diagnostic(f"{pre}.max_power", "must be strictly positive"))
        if user.avg_power > user.max_power:
            out.append(Diagnostic(f"{pre}.avg_power", "average power exceeds max_power"))

    tol = cfg.tolerances
    for name in ("convergence", "kkt", "bisection"):
        if not (getattr(tol, name) > 0.0):
            out.append(Diagnostic(f"tolerances.{name}", "must be strictly positive"))
    if tol.max_iterations < 1:
        out.append(Diagnostic("tolerances.max_iterations", "must be at least 1"))
    return out


def joint_prob(law: ChannelLaw, i: int, j: int) -> float:
    """Probability of the own type (h_i, g_j), 0-based indices.

    Bob and Eve gains are independent, so this is alpha_i * beta_j.
    """
    if not (0 <= i < len(law.bob_probs) and 0 <= j < len(law.eve_probs)):
        raise IndexError(f"type index ({i}, {j}) out of range for {law.n_states} states")
    return law.bob_probs[i] * law.eve_probs[j]


def type_weights(law: ChannelLaw) -> np.ndarray:
    """All joint type probabilities as an L x L matrix."""
    return np.outer(law.bob_probs, law.eve_probs)


def expected_power(user: UserConfig, policy: PowerPolicy) -> float:
    return float(np.sum(type_weights(user.law) * policy.powers))


def uniform_policy(user: UserConfig) -> PowerPolicy:
    """Constant policy at the average budget (no CSI adaptation)."""
    if user.avg_power > user.max_power:
        raise ValueError("avg_power exceeds max_power")
    L = user.law.n_states
    return PowerPolicy(np.full((L, L), user.avg_power))


def uniform_profile(cfg: GameConfig) -> StrategyProfile:
    return StrategyProfile(uniform_policy(u) for u in cfg.users)


def zero_profile(cfg: GameConfig) -> StrategyProfile:
    L = cfg.n_states
    return StrategyProfile(PowerPolicy(np.zeros((L, L))) for _ in cfg.users)


def random_profile(cfg: GameConfig, rng: np.random.Generator, max_tries: int = 1000) -> StrategyProfile:
    """Draw a feasible profile that spends each user's budget exactly.

    Entries are uniform on [0, max_power] and then scaled multiplicatively so
    the expected power equals the budget; draws pushed over the cap by the
    rescale are redrawn.
    """
    policies = []
    for user in cfg.users:
        w = type_weights(user.law)
        for _ in range(max_tries):
            raw = rng.uniform(0.0, user.max_power, size=w.shape)
            mean = float(np.sum(w * raw))
            if mean <= 0.0:
                continue
            scaled = raw * (user.avg_power / mean)
            if scaled.max() <= user.max_power:
                policies.append(PowerPolicy(scaled))
                break
        else:
            raise RuntimeError("could not draw a feasible policy under the power cap")
    return StrategyProfile(policies)


def with_snr(cfg: GameConfig, snr: float) -> GameConfig:
    """Rescale every user's budget so user 0 has avg_power / noise_power == snr.

    Caps scale by the same factor, so the cap-to-budget ratio is preserved.
    """
    if not snr > 0:
        raise ValueError("snr must be positive")
    factor = snr * cfg.noise_power / cfg.users[0].avg_power
    users = tuple(
        replace(u, avg_power=u.avg_power * factor, max_power=u.max_power * factor)
        for u in cfg.users
    )
    return replace(cfg, users=users)


# -- serialization -----------------------------------------------------------

_USER_KEYS = ("bob_states", "bob_probs", "eve_states", "eve_probs", "avg_power")


def _require(obj: dict, key: str, where: str):
    if not isinstance(obj, dict):
        raise ConfigParseError(f"{where}: expected an object")
    if key not in obj:
        raise ConfigParseError(f"{where}: missing required key '{key}'")
    return obj[key]


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigParseError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _numbers(value, where: str) -> tuple[float, ...]:
    if not isinstance(value, list):
        raise ConfigParseError(f"{where}: expected an array of numbers")
    return tuple(_number(v, f"{where}[{n}]") for n, v in enumerate(value))


def config_from_dict(doc: dict) -> GameConfig:
    noise = _number(_require(doc, "noise_power", "config"), "noise_power")
    raw_users = _require(doc, "users", "config")
    if not isinstance(raw_users, list):
        raise ConfigParseError("users: expected an array")
    users = []
    for k, raw in enumerate(raw_users):
        where = f"users[{k}]"
        vals = {key: _require(raw, key, where) for key in _USER_KEYS}
        law = ChannelLaw(
            bob_states=_numbers(vals["bob_states"], f"{where}.bob_states"),
            bob_probs=_numbers(vals["bob_probs"], f"{where}.bob_probs"),
            eve_states=_numbers(vals["eve_states"], f"{where}.eve_states"),
            eve_probs=_numbers(vals["eve_probs"], f"{where}.eve_probs"),
        )
        max_power = raw.get("max_power")
        users.append(
            UserConfig(
                law=law,
                avg_power=_number(vals["avg_power"], f"{where}.avg_power"),
                max_power=None if max_power is None else _number(max_power, f"{where}.max_power"),
            )
        )
    tol_doc = doc.get("tolerances", {})
    if not isinstance(tol_doc, dict):
        raise ConfigParseError("tolerances: expected an object")
    known = set(SolverTolerances.__dataclass_fields__)
    unknown = set(tol_doc) - known
    if unknown:
        raise ConfigParseError(f"tolerances: unknown keys {sorted(unknown)}")
    tol_kwargs = {}
    for key, value in tol_doc.items():
        tol_kwargs[key] = _number(value, f"tolerances.{key}")
    if "max_iterations" in tol_kwargs:
        tol_kwargs["max_iterations"] = int(tol_kwargs["max_iterations"])
    return GameConfig(users=tuple(users), noise_power=noise, tolerances=SolverTolerances(**tol_kwargs))


def load_config(source: str | Path | IO[str]) -> GameConfig:
    """Parse and validate a JSON game configuration.

    Raises :class:`ConfigParseError` for malformed documents and
    :class:`ConfigValidationError` (carrying the diagnostics) for invariant
    violations.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = Path(source).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"invalid JSON: {exc}") from exc
    cfg = config_from_dict(doc)
    diags = validate_config(cfg)
    if diags:
        raise ConfigValidationError(diags)
    return cfg


def config_to_dict(cfg: GameConfig) -> dict:
    tol = cfg.tolerances
    return {
        "noise_power": cfg.noise_power,
        "users": [
            {
                "bob_states": list(u.law.bob_states),
                "bob_probs": list(u.law.bob_probs),
                "eve_states": list(u.law.eve_states),
                "eve_probs": list(u.law.eve_probs),
                "avg_power": u.avg_power,
                "max_power": u.max_power,
            }
            for u in cfg.users
        ],
        "tolerances": {
            "convergence": tol.convergence,
            "kkt": tol.kkt,
            "bisection": tol.bisection,
            "max_iterations": tol.max_iterations,
        },
    }


def dump_config(cfg: GameConfig, fp: IO[str] | None = None) -> str:
    text = json.dumps(config_to_dict(cfg), indent=2)
    if fp is not None:
        fp.write(text)
    return text
