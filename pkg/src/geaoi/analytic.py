"""Closed-form average AoI over the GE(p, r) channel with 0/1 erasures.

Covers preemptive LGFS under Bernoulli, periodic and generate-at-will
arrivals, FCFS under Bernoulli and generate-at-will arrivals, the FCFS-minus-
pLGFS gap and the system-time distribution of the Bernoulli FCFS queue.
Periodic arrivals under FCFS have no closed form; see :mod:`geaoi.periodic_fcfs`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .channel import ChannelParams, memory
from .errors import DivergenceError, DomainError, InstabilityError, UnsupportedRegimeError


@dataclass(frozen=True)
class Bernoulli:
    lam: float

    def __post_init__(self) -> None:
        if not 0.0 < self.lam <= 1.0:
            raise DomainError(f"lambda must lie in (0, 1], got {self.lam!r}")

    @property
    def rate(self) -> float:
        return self.lam


@dataclass(frozen=True)
class Periodic:
    K: int

    def __post_init__(self) -> None:
        if int(self.K) != self.K or self.K < 1:
            raise DomainError(f"K must be a positive integer, got {self.K!r}")

    @property
    def rate(self) -> float:
        return 1.0 / self.K


@dataclass(frozen=True)
class GenerateAtWill:
    pass


ArrivalModel = Union[Bernoulli, Periodic, GenerateAtWill]


class Policy(enum.Enum):
    FCFS = "fcfs"
    PLGFS = "plgfs"


def _require_binary(params: ChannelParams) -> None:
    if not params.binary_erasure:
        raise UnsupportedRegimeError(
            "closed forms require pe_good=0 and pe_bad=1; "
            f"got pe_good={params.pe_good}, pe_bad={params.pe_bad} (use the simulator)"
        )


def _require_recurrent(params: ChannelParams) -> None:
    if params.r <= 0.0:
        raise DivergenceError("r = 0 makes the bad state absorbing; the average AoI diverges")


def _check_lambda(lam: float) -> None:
    if not 0.0 < lam <= 1.0:
        raise DomainError(f"lambda must lie in (0, 1], got {lam!r}")


def _require_stable(params: ChannelParams, lam: float) -> None:
    _check_lambda(lam)
    _require_recurrent(params)
    cap = params.r / (params.p + params.r)
    if lam >= cap:
        raise InstabilityError(
            f"FCFS queue unstable: need lambda < r/(p+r) = {cap:.12g}, got lambda = {lam:.12g}"
        )


def _memory_penalty(params: ChannelParams) -> float:
    """``p / (r (p + r))``, the extra AoI the channel's bad runs cause."""
    return params.p / (params.r * (params.p + params.r))


# --- constituent distributions -------------------------------------------


def delivery_gap_pmf(params: ChannelParams, m: int) -> float:
    """Probability that the next good slot comes ``m`` slots after a good one."""
    _require_recurrent(params)
    if m < 1:
        raise DomainError(f"m must be >= 1, got {m!r}")
    if m == 1:
        return 1.0 - params.p
    return params.p * (1.0 - params.r) ** (m - 2) * params.r


def delivery_gap_mean(params: ChannelParams) -> float:
    _require_recurrent(params)
    return 1.0 + params.p / params.r


def age_at_delivery_pmf(arrival: ArrivalModel, n: int, params: ChannelParams | None = None) -> float:
    """Distribution of the receiver's AoI right after a delivery.

    For generate-at-will (FCFS) the age equals the gap between good slots,
    which needs ``params``.
    """
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n!r}")
    if isinstance(arrival, Bernoulli):
        return arrival.lam * (1.0 - arrival.lam) ** (n - 1)
    if isinstance(arrival, Periodic):
        return 1.0 / arrival.K if n <= arrival.K else 0.0
    if params is None:
        raise DomainError("generate-at-will needs the channel parameters")
    return delivery_gap_pmf(params, n)


def system_time_pmf(params: ChannelParams, lam: float, t: int) -> float:
    """PMF of generation-to-delivery time under Bernoulli FCFS."""
    _require_binary(params)
    _require_stable(params, lam)
    if t < 1:
        raise DomainError(f"t must be >= 1, got {t!r}")
    p, r = params.p, params.r
    q = 1.0 - lam
    slack = r - (p + r) * lam
    if t == 1:
        return slack / ((p + r) * q)
    ratio = (p + memory(params) * q) / q
    return p / (p + r) * slack / q**2 * ratio ** (t - 2)


def system_time_ratio(params: ChannelParams, lam: float) -> float:
    """Geometric decay rate of the system-time tail."""
    _require_stable(params, lam)
    q = 1.0 - lam
    return (params.p + memory(params) * q) / q


def preemption_pmf_given_t(lam: float, t: int, y: int) -> float:
    """PMF of the preemption offset ``y`` given a system time ``t``."""
    if not 0.0 <= lam <= 1.0:
        raise DomainError(f"lambda must lie in [0, 1], got {lam!r}")
    if t < 1 or not 0 <= y <= t - 1:
        raise DomainError(f"need 0 <= y <= t-1 with t >= 1, got t={t!r}, y={y!r}")
    if y == 0:
        return (1.0 - lam) ** (t - 1)
    return lam * (1.0 - lam) ** (t - 1 - y)


def expected_preemption_time(params: ChannelParams, lam: float) -> float:
    """Mean preemption offset ``E[Y]`` under Bernoulli FCFS.

    The double sum over system time ``t`` and offset ``y`` is reordered over
    ``k = t - 1 - j`` (``j`` the slots after the last arrival); both resulting
    series are geometric.
    """
    _require_binary(params)
    _require_stable(params, lam)
    p, r = params.p, params.r
    q = 1.0 - lam
    head = p / (p + r) * (r - (p + r) * lam) / q**2
    rho = system_time_ratio(params, lam)
    return head * lam / ((1.0 - rho * q) * (1.0 - rho) ** 2)


def aoi_gap_bernoulli(params: ChannelParams, lam: float) -> float:
    """Extra average AoI of FCFS over preemptive LGFS: ``lam * E[D | Y>=1] * E[Y]``."""
    return lam * delivery_gap_mean(params) * expected_preemption_time(params, lam)


# --- average AoI ---------------------------------------------------------


def aoi_plgfs(params: ChannelParams, arrival: ArrivalModel) -> float:
    _require_binary(params)
    _require_recurrent(params)
    if isinstance(arrival, Bernoulli):
        return 1.0 / arrival.lam + _memory_penalty(params)
    if isinstance(arrival, Periodic):
        return (arrival.K + 1) / 2.0 + _memory_penalty(params)
    if isinstance(arrival, GenerateAtWill):
        return 1.0 + _memory_penalty(params)
    raise TypeError(f"unknown arrival model {arrival!r}")


def aoi_fcfs_bernoulli(params: ChannelParams, lam: float) -> float:
    _require_binary(params)
    _require_stable(params, lam)
    p, r = params.p, params.r
    slack = r - (p + r) * lam
    return 1.0 / lam + p / r * (1.0 / (p + r) + lam**2 / (slack * (slack + lam)))


def aoi_fcfs_gaw(params: ChannelParams) -> float:
    _require_binary(params)
    _require_recurrent(params)
    return 1.0 + params.p / params.r + _memory_penalty(params)


def average_aoi(params: ChannelParams, arrival: ArrivalModel, policy: Policy) -> float:
    """Dispatch to the closed form (or the periodic FCFS solver) for a scenario."""
    if policy is Policy.PLGFS:
        return aoi_plgfs(params, arrival)
    if isinstance(arrival, Bernoulli):
        return aoi_fcfs_bernoulli(params, arrival.lam)
    if isinstance(arrival, GenerateAtWill):
        return aoi_fcfs_gaw(params)
    from .periodic_fcfs import aoi_periodic_fcfs

    return aoi_periodic_fcfs(params, arrival.K).aoi


# --- symmetric-channel forms, p = r = (1 - eta) / 2 -----------------------


def _check_eta(eta: float) -> None:
    if not 0.0 <= eta < 1.0:
        raise DomainError(f"eta must lie in [0, 1), got {eta!r}")


def symmetric_plgfs(eta: float, arrival: ArrivalModel) -> float:
    _check_eta(eta)
    extra = 1.0 + eta / (1.0 - eta)
    if isinstance(arrival, Bernoulli):
        return 1.0 / arrival.lam + extra
    if isinstance(arrival, Periodic):
        return (arrival.K + 1) / 2.0 + extra
    return 1.0 + extra


def symmetric_fcfs_bernoulli(eta: float, lam: float) -> float:
    _check_eta(eta)
    _check_lambda(lam)
    if lam >= 0.5:
        raise InstabilityError(f"symmetric channel needs lambda < 0.5, got {lam!r}")
    queueing = 1.0 / ((1.0 - eta) * (1.0 - (1.0 - 2.0 * lam) * eta))
    return 1.0 / lam + 1.0 + eta / (1.0 - eta) + 4.0 * lam**2 / (1.0 - 2.0 * lam) * queueing


def symmetric_fcfs_gaw(eta: float) -> float:
    _check_eta(eta)
    return 3.0 + eta / (1.0 - eta)


# --- system-time PGF ------------------------------------------------------


@dataclass(frozen=True)
class QueueConstants:
    """Constants of the PGF of the queue length left behind by a departure.

    ``g(z) = G0 - C + (B0 + C) / (1 - ratio * z)``.
    """

    G0: float
    B0: float
    C: float
    ratio: float
    lam: float

    def pgf(self, z):
        return self.G0 - self.C + (self.B0 + self.C) / (1.0 - self.ratio * z)

    def pgf_of_slots(self, y):
        """PGF ``phi(y) = g((y + lam - 1) / lam)`` of the slots-in-system count."""
        return self.pgf((y + self.lam - 1.0) / self.lam)


def queue_constants(params: ChannelParams, lam: float) -> QueueConstants:
    _require_binary(params)
    _require_stable(params, lam)
    p, r = params.p, params.r
    eta = memory(params)
    q = 1.0 - lam
    G0 = r / (p + r) * (1.0 - p * lam / (r * q))
    B0 = p / (p + r) * (r - (p + r) * lam) / (q * (r + eta * lam))
    C = p * G0 / (p + eta * q)
    ratio = (p * lam + eta * lam * q) / (q * (r + eta * lam))
    return QueueConstants(G0, B0, C, ratio, lam)


def system_time_pmf_from_pgf(params: ChannelParams, lam: float, n_terms: int) -> np.ndarray:
    """System-time PMF ``P_T(1..n_terms)`` read off the PGF numerically.

    ``phi`` is sampled on the unit circle and its Taylor coefficients are
    recovered by FFT; the FFT size is chosen so aliased tail mass is below
    1e-15.  ``P_T(t)`` is the coefficient of ``y**(t-1)``.
    """
    consts = queue_constants(params, lam)
    rho = system_time_ratio(params, lam)
    need = n_terms + 1
    if rho > 0.0:
        need = max(need, int(math.ceil(math.log(1e-16) / math.log(rho))) + n_terms)
    size = 1 << max(6, (need - 1).bit_length())
    if size > 1 << 24:
        raise DomainError("system-time tail too heavy for coefficient extraction")
    y = np.exp(2j * np.pi * np.arange(size) / size)
    coeffs = np.fft.fft(consts.pgf_of_slots(y)) / size
    return coeffs.real[:n_terms]
