"""Average AoI of periodic arrivals (one packet every K slots) under FCFS.

The queue is observed at arrival instants.  Let ``p[n, s]`` be the probability
that an arriving packet finds ``n`` packets ahead of it with the channel in
state ``s``.  Between two arrivals the queue loses one packet per good slot,
so ``p`` is the stationary law of a chain that moves up by at most one level.
Its tail is geometric: ``p[n, B] = beta**n p[0, B]`` and
``p[n, G] = beta**(n-1) p[1, G]`` for ``n >= 1``.  Solving for ``beta`` and the
three boundary probabilities gives the mean latency in closed form, and the
average AoI is the mean latency plus ``(K - 1) / 2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np
from numpy.polynomial import polynomial as P

from .analytic import _require_binary, _require_recurrent
from .channel import BAD, GOOD, ChannelParams, ChannelState, CountDistTable, good_count_distribution
from .errors import DomainError, InstabilityError, SolverError

_GRID_POINTS = 10_000
_EDGE = 1e-9
_BISECT_WIDTH = 1e-12
_MAX_COND = 1e12
_PROB_SLACK = 1e-10


@dataclass(frozen=True)
class PeriodicFcfsSolution:
    K: int
    params: ChannelParams
    beta: float
    p0_good: float
    p0_bad: float
    p1_good: float
    expected_latency: float
    aoi: float

    @property
    def total_probability(self) -> float:
        return self.p0_good + (self.p0_bad + self.p1_good) / (1.0 - self.beta)


@dataclass(frozen=True)
class MemorylessSolution:
    alpha: float
    p0: float
    p1: float


def check_stability(params: ChannelParams, K: int) -> None:
    """Mean service time ``1 + p/r`` must be below the arrival period."""
    _require_binary(params)
    _require_recurrent(params)
    if int(K) != K or K < 1:
        raise DomainError(f"K must be a positive integer, got {K!r}")
    load = (params.p + params.r) / (params.r * K)
    if load >= 1.0:
        raise InstabilityError(
            f"FCFS queue unstable: need K > (p+r)/r = {(params.p + params.r) / params.r:.12g}, got K = {K}"
        )


def _beta_polys(table: CountDistTable):
    # (b - Phi_BB)(b - Phi_GG) - Phi_BG * Phi_GB, Phi_xy = sum_i b^i P(K, i, y | x)
    pr = table.probs
    x = np.array([0.0, 1.0])
    lhs = P.polymul(P.polysub(x, pr[BAD, :, BAD]), P.polysub(x, pr[GOOD, :, GOOD]))
    return P.polysub(lhs, P.polymul(pr[BAD, :, GOOD], pr[GOOD, :, BAD]))


def beta_equation(table: CountDistTable, beta):
    """Cross-multiplied tail-ratio equation; zero at the decay rate."""
    return P.polyval(beta, _beta_polys(table))


def _bisect(coef: np.ndarray, lo: float, hi: float) -> float:
    flo = P.polyval(lo, coef)
    while hi - lo > _BISECT_WIDTH:
        mid = 0.5 * (lo + hi)
        fmid = P.polyval(mid, coef)
        if fmid == 0.0:
            return float(mid)
        if (fmid > 0.0) == (flo > 0.0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return float(0.5 * (lo + hi))


def _candidate_roots(coef: np.ndarray) -> list[float]:
    # geometric points resolve very small decay rates that a uniform grid misses
    grid = np.unique(
        np.concatenate(
            [np.geomspace(1e-200, _EDGE, 400), np.linspace(_EDGE, 1.0 - _EDGE, _GRID_POINTS)]
        )
    )
    vals = P.polyval(grid, coef)
    sign = np.sign(vals)
    roots = [float(x) for x in grid[vals == 0.0]]
    idx = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
    roots.extend(_bisect(coef, float(grid[i]), float(grid[i + 1])) for i in idx)
    return sorted(roots)


def solve_beta(params: ChannelParams, K: int, table: CountDistTable | None = None) -> float:
    """Geometric decay rate of the queue-length distribution at arrivals.

    Returns 0 when the queue can never build up (no run of K bad slots is
    possible), in which case every arrival finds the queue empty.
    """
    check_stability(params, K)
    table = table or good_count_distribution(params, K)
    if table.probs[BAD, 0, :].sum() == 0.0:
        return 0.0
    coef = _beta_polys(table)
    roots = _candidate_roots(coef)
    for beta in roots:
        try:
            _boundary(params, table, beta)
        except SolverError:
            continue
        return beta
    raise SolverError(f"no admissible root of the beta equation in (0, 1) for p={params.p}, r={params.r}, K={K}")


def _boundary_matrix(table: CountDistTable, beta: float) -> np.ndarray:
    K = table.K
    pr = table.probs
    # tail[x, i, y] = sum_{j >= i} P(K, j, y | x)
    tail = np.cumsum(pr[:, ::-1, :], axis=1)[:, ::-1, :]
    pw = beta ** np.arange(K)
    from_bad = np.einsum("i,iy->y", pw, tail[BAD, 1:, :])
    from_good1 = np.einsum("i,iy->y", pw[: K - 1], tail[GOOD, 2:, :])
    A = np.empty((3, 3))
    A[0] = [1.0 - tail[GOOD, 1, GOOD], -from_bad[GOOD], -from_good1[GOOD]]
    A[1] = [tail[GOOD, 1, BAD], from_bad[BAD] - 1.0, from_good1[BAD]]
    A[2] = [1.0, 1.0 / (1.0 - beta), 1.0 / (1.0 - beta)]
    return A


def _boundary(params: ChannelParams, table: CountDistTable, beta: float) -> tuple[float, float, float]:
    if not 0.0 <= beta < 1.0:
        raise SolverError(f"beta must lie in [0, 1), got {beta!r}")
    A = _boundary_matrix(table, beta)
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > _MAX_COND:
        raise SolverError(f"boundary system ill-conditioned (cond={cond:.3g})")
    sol = np.linalg.solve(A, np.array([0.0, 0.0, 1.0]))
    if np.any(sol < -_PROB_SLACK) or np.any(sol > 1.0 + _PROB_SLACK):
        raise SolverError(f"boundary probabilities out of range: {sol}")
    sol = np.clip(sol, 0.0, 1.0) + 0.0
    return float(sol[0]), float(sol[1]), float(sol[2])


def solve_boundary(params: ChannelParams, K: int, beta: float) -> tuple[float, float, float]:
    """Solve for ``(p0_good, p0_bad, p1_good)`` given the decay rate."""
    check_stability(params, K)
    return _boundary(params, good_count_distribution(params, K), beta)


def queue_pmf(solution: PeriodicFcfsSolution, n: int, s: ChannelState) -> float:
    if n < 0:
        return 0.0
    if s == BAD:
        return solution.beta**n * solution.p0_bad
    if n == 0:
        return solution.p0_good
    return solution.beta ** (n - 1) * solution.p1_good


def _latency(params: ChannelParams, beta: float, p0_good: float, p0_bad: float, p1_good: float) -> float:
    # sum over n of t[n, s] * p[n, s] with
    #   t[n, G] = 1 + n (1 + p/r),  t[n, B] = 1 + 1/r + n (1 + p/r)
    p, r = params.p, params.r
    tail = 1.0 - beta
    return (
        p0_good
        + p0_bad / (r * tail) * (1.0 + (r + beta * p) / tail)
        + p1_good / tail * (1.0 + (p + r) / (r * tail))
    )


def aoi_periodic_fcfs(params: ChannelParams, K: int) -> PeriodicFcfsSolution:
    check_stability(params, K)
    table = good_count_distribution(params, K)
    beta = solve_beta(params, K, table)
    p0g, p0b, p1g = _boundary(params, table, beta)
    latency = float(_latency(params, beta, p0g, p0b, p1g))
    return PeriodicFcfsSolution(
        K=K,
        params=params,
        beta=beta,
        p0_good=p0g,
        p0_bad=p0b,
        p1_good=p1g,
        expected_latency=latency,
        aoi=latency + (K - 1) / 2.0,
    )


def expected_latency(params: ChannelParams, K: int) -> float:
    return aoi_periodic_fcfs(params, K).expected_latency


def recursion_residuals(solution: PeriodicFcfsSolution, levels: int = 3) -> np.ndarray:
    """Residuals of the arrival-instant balance equations for ``n < levels``.

    Plugs the geometric-form distribution into the exact one-period
    recursion; row ``n`` holds the (G, B) residuals.
    """
    K = solution.K
    table = good_count_distribution(solution.params, K)
    out = np.empty((levels, 2))
    for n in range(levels):
        for s in (GOOD, BAD):
            total = 0.0
            for s0 in (GOOD, BAD):
                for i in range(max(n - 1, 0), K + n):
                    pi = queue_pmf(solution, i, s0)
                    if n == 0:
                        total += pi * table.probs[s0, i + 1 :, s].sum()
                    else:
                        total += pi * table(i + 1 - n, s, s0)
            out[n, s] = queue_pmf(solution, n, s) - total
    return out


def memoryless_oracle(K: int) -> MemorylessSolution:
    """Closed-form route for the memoryless channel ``p = r = 1/2``.

    The decay rate is the root in (0, 1) of
    ``(K+1) a - sum_{k=2}^{K-1} a**k sum_{j>k} C(K, j) = (1 + a)**K - 1``.
    """
    if int(K) != K or K < 1:
        raise DomainError(f"K must be a positive integer, got {K!r}")
    if K <= 2:
        raise InstabilityError(f"memoryless channel needs K > 2, got K = {K}")
    upper = [sum(comb(K, j) for j in range(k + 1, K + 1)) for k in range(K + 1)]
    coef = np.zeros(K + 1)
    coef[1] = K + 1
    for k in range(2, K):
        coef[k] -= upper[k]
    coef -= [comb(K, k) for k in range(K + 1)]
    coef[0] += 1.0
    # coef[0] == 0: drop the trivial root at zero
    roots = P.polyroots(coef[1:])
    real = [z.real for z in roots if abs(z.imag) < 1e-10 and 0.0 < z.real < 1.0]
    if len(real) != 1:
        raise SolverError(f"expected one root in (0, 1), found {real}")
    alpha = real[0]
    scale = sum(alpha**m * upper[m + 1] for m in range(K - 1))
    p1 = 1.0 / (scale + 1.0 / (1.0 - alpha))
    return MemorylessSolution(alpha=alpha, p0=scale * p1, p1=p1)
