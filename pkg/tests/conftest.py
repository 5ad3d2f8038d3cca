import sys

import numpy as np
import pytest

from secrecy_game.model import ChannelLaw, GameConfig, UserConfig, with_snr


def make_config(bob, eve, bob_probs=None, eve_probs=None, avg_power=1.0, noise=1.0, users=2, max_power=None):
    L = len(bob)
    bp = bob_probs or [1.0 / L] * L
    ep = eve_probs or [1.0 / L] * L
    law = ChannelLaw(bob, bp, eve, ep)
    return GameConfig(tuple(UserConfig(law, avg_power, max_power) for _ in range(users)), noise)


def canonical(snr=1.0):
    return with_snr(make_config((2.0, 3.5), (0.2, 0.3)), snr)


def strong(snr=1.0):
    return with_snr(make_config((5.0, 7.0), (0.5, 0.7)), snr)


def single_state(avg_power=1.0):
    """Two users, one state each: h = 2, g = 0.2, unit noise."""
    return make_config((2.0,), (0.2,), avg_power=avg_power)


def random_instance(rng, L=None, degraded_margin=3.0):
    """Random two-user game with Bob gains well above Eve gains."""
    L = L or int(rng.integers(1, 3))
    bob = np.sort(rng.uniform(1.0, 6.0, size=L))
    while L > 1 and np.min(np.diff(bob)) < 0.05:
        bob = np.sort(rng.uniform(1.0, 6.0, size=L))
    eve = np.sort(rng.uniform(0.05, 1.0, size=L) / degraded_margin)
    while L > 1 and np.min(np.diff(eve)) < 0.01:
        eve = np.sort(rng.uniform(0.05, 1.0, size=L) / degraded_margin)
    probs = lambda: list(np.full(L, 1.0 / L)) if L == 1 else [p := float(rng.uniform(0.2, 0.8)), 1.0 - p]
    users = []
    for _ in range(2):
        law = ChannelLaw(tuple(bob), tuple(probs()), tuple(eve), tuple(probs()))
        users.append(UserConfig(law, float(rng.uniform(0.5, 3.0))))
    return GameConfig(tuple(users), float(rng.uniform(0.5, 2.0)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance PASS/FAIL lines at the end of the session."""
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n][1])
