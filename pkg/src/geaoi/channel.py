"""Gilbert-Elliott erasure channel.

The channel is a two-state Markov chain over {Good, Bad}.  Per slot it moves
Good -> Bad with probability ``p`` and Bad -> Good with probability ``r``; a
packet sent in state ``s`` is erased with probability ``pe(s)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateChainError, DomainError


class ChannelState(enum.IntEnum):
    GOOD = 0
    BAD = 1

    @property
    def short(self) -> str:
        return "G" if self is ChannelState.GOOD else "B"


GOOD = ChannelState.GOOD
BAD = ChannelState.BAD


def _check_prob(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise DomainError(f"{name} must lie in [0, 1], got {value!r}")


@dataclass(frozen=True)
class ChannelParams:
    """Transition probabilities ``p`` (G->B), ``r`` (B->G) and per-state erasures."""

    p: float
    r: float
    pe_good: float = 0.0
    pe_bad: float = 1.0

    def __post_init__(self) -> None:
        for name in ("p", "r", "pe_good", "pe_bad"):
            _check_prob(name, getattr(self, name))
        if self.p + self.r <= 0.0:
            raise DegenerateChainError("p + r must be positive")

    @property
    def binary_erasure(self) -> bool:
        """True for the 0/1 erasure model the closed forms assume."""
        return self.pe_good == 0.0 and self.pe_bad == 1.0

    def transition_matrix(self) -> np.ndarray:
        return np.array([[1.0 - self.p, self.p], [self.r, 1.0 - self.r]])

    def erasure(self, state: ChannelState) -> float:
        return self.pe_good if state == GOOD else self.pe_bad


def make_symmetric(eta: float, pe_good: float = 0.0, pe_bad: float = 1.0) -> ChannelParams:
    """Symmetric channel ``p = r = (1 - eta) / 2`` with memory ``eta``."""
    if not 0.0 <= eta < 1.0:
        raise DomainError(f"eta must lie in [0, 1), got {eta!r}")
    p = (1.0 - eta) / 2.0
    return ChannelParams(p, p, pe_good, pe_bad)


def memory(params: ChannelParams) -> float:
    """Channel memory ``1 - p - r``; negative for anti-persistent chains."""
    return 1.0 - params.p - params.r


def stationary(params: ChannelParams) -> tuple[float, float]:
    s = params.p + params.r
    if s <= 0.0:
        raise DegenerateChainError("p + r must be positive")
    return params.r / s, params.p / s


def average_erasure(params: ChannelParams) -> float:
    pi_good, pi_bad = stationary(params)
    return pi_good * params.pe_good + pi_bad * params.pe_bad


def sample_step(
    state: ChannelState, params: ChannelParams, rng: np.random.Generator
) -> tuple[ChannelState, bool]:
    """Advance one slot.

    The erasure draw uses the state of the current slot; the returned state is
    the one for the next slot.
    """
    erased = bool(rng.random() < params.erasure(state))
    flip = params.p if state == GOOD else params.r
    nxt = ChannelState(1 - state) if rng.random() < flip else state
    return nxt, erased


@dataclass(frozen=True)
class CountDistTable:
    """Distribution of the number of good slots over a window of ``K`` slots.

    ``probs[s, n, s2]`` is the probability that slots 1..K contain ``n`` good
    slots and slot K+1 is in state ``s2``, given slot 1 is in state ``s``.  The
    first slot counts towards ``n``; slot K+1 does not.
    """

    K: int
    probs: np.ndarray

    def __call__(self, n: int, exit_state: ChannelState, entry_state: ChannelState) -> float:
        if not 0 <= n <= self.K:
            return 0.0
        return float(self.probs[entry_state, n, exit_state])

    def generating_matrix(self, z: float) -> np.ndarray:
        """``M[s, s2] = sum_n z**n * P(K, n, s2 | s)``."""
        weights = z ** np.arange(self.K + 1)
        return np.einsum("anb,n->ab", self.probs, weights)


def good_count_distribution(params: ChannelParams, K: int) -> CountDistTable:
    """Forward recursion over the window length."""
    if K < 1:
        raise DomainError(f"K must be >= 1, got {K!r}")
    T = params.transition_matrix()
    probs = np.zeros((2, K + 1, 2))
    probs[GOOD, 1, :] = T[GOOD]
    probs[BAD, 0, :] = T[BAD]
    for _ in range(2, K + 1):
        nxt = np.zeros_like(probs)
        # state at the newly appended slot is the previous exit state
        nxt[:, 1:, :] += probs[:, :-1, GOOD, None] * T[GOOD]
        nxt[:, :, :] += probs[:, :, BAD, None] * T[BAD]
        probs = nxt
    return CountDistTable(K, probs)
