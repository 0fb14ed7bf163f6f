"""Slot-level Monte Carlo simulation of AoI over a Gilbert-Elliott channel.

Per slot ``t = 1, 2, ...`` the loop is:

1. sample the receiver AoI ``t - g`` where ``g`` is the generation slot of the
   newest delivered packet (a virtual packet generated at slot 0 starts it);
2. arrivals: Bernoulli(lam), periodic at ``t = iK + 1``, or generate-at-will
   (every slot under pLGFS, whenever the buffer is empty under FCFS);
3. the erasure is drawn with the current state's probability;
4. an unerased packet in service is delivered at the end of the slot, then
   the channel moves to its next state.

Each slot consumes exactly three uniforms ``(arrival, channel, erasure)``, so
runs with the same seed share arrival and channel sample paths across policies.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import IO

import numba
import numpy as np

from .analytic import ArrivalModel, Bernoulli, GenerateAtWill, Periodic, Policy
from .channel import ChannelParams, stationary
from .errors import DomainError, QueueOverflowError

DEFAULT_SLOTS = 10_000
DEFAULT_ITERATIONS = 1000
DEFAULT_QUEUE_CAP = 1_000_000
HIST_BINS = 512
_CHUNK = 1 << 16

_ARR_BERNOULLI, _ARR_PERIODIC, _ARR_GAW = 0, 1, 2

# integer state carried across chunks
_S_CHAN, _S_RECV, _S_HEAD, _S_COUNT, _S_HELD, _S_LAST_ARR, _S_PREV_T, _S_PREV_Y, _S_T = range(9)
# float accumulators
_A_AOI, _A_SLOTS, _A_DELIV, _A_SYSTIME, _A_DY, _A_DYN = range(6)


@numba.njit(cache=True, nogil=True)
def _kernel(
    u, arr_kind, lam, K, fcfs, p, r, pe_good, pe_bad, warmup,
    st, acc, buf, st_hist, y_hist, tr_aoi, tr_state, tr_queue, dl_gen, dl_slot, n_dl,
):
    record = tr_aoi.shape[0] > 0
    cap = buf.shape[0]
    nb = st_hist.shape[0]
    for k in range(u.shape[0]):
        st[_S_T] += 1
        t = st[_S_T]
        count = st[_S_COUNT] if fcfs else (1 if st[_S_HELD] >= 0 else 0)
        aoi = t - st[_S_RECV]
        if record:
            tr_aoi[t - 1] = aoi
            tr_state[t - 1] = st[_S_CHAN]
            tr_queue[t - 1] = count
        counted = t > warmup
        if counted:
            acc[_A_AOI] += aoi
            acc[_A_SLOTS] += 1.0

        if arr_kind == _ARR_BERNOULLI:
            arrive = u[k, 0] < lam
        elif arr_kind == _ARR_PERIODIC:
            arrive = (t - 1) % K == 0
        else:
            arrive = (not fcfs) or count == 0
        if arrive:
            st[_S_LAST_ARR] = t
            if fcfs:
                if st[_S_COUNT] >= cap:
                    return 1
                buf[(st[_S_HEAD] + st[_S_COUNT]) % cap] = t
                st[_S_COUNT] += 1
            else:
                st[_S_HELD] = t

        bad = st[_S_CHAN] == 1
        erased = u[k, 2] < (pe_bad if bad else pe_good)
        has_packet = st[_S_COUNT] > 0 if fcfs else st[_S_HELD] >= 0
        if has_packet and not erased:
            if fcfs:
                gen = buf[st[_S_HEAD]]
                st[_S_HEAD] = (st[_S_HEAD] + 1) % cap
                st[_S_COUNT] -= 1
            else:
                gen = st[_S_HELD]
                st[_S_HELD] = -1
            st[_S_RECV] = gen
            y = st[_S_LAST_ARR] - gen
            if record:
                dl_gen[n_dl[0]] = gen
                dl_slot[n_dl[0]] = t
                n_dl[0] += 1
            if counted:
                systime = t - gen + 1
                acc[_A_DELIV] += 1.0
                acc[_A_SYSTIME] += systime
                st_hist[min(systime, nb - 1)] += 1
                if fcfs:
                    y_hist[min(y, nb - 1)] += 1
                if st[_S_PREV_T] > warmup:
                    acc[_A_DY] += (t - st[_S_PREV_T]) * st[_S_PREV_Y]
                    acc[_A_DYN] += 1.0
            st[_S_PREV_T] = t
            st[_S_PREV_Y] = y

        if bad:
            if u[k, 1] < r:
                st[_S_CHAN] = 0
        elif u[k, 1] < p:
            st[_S_CHAN] = 1
    return 0


@dataclass(frozen=True)
class SimConfig:
    params: ChannelParams
    arrival: ArrivalModel
    policy: Policy
    slots_per_run: int = DEFAULT_SLOTS
    iterations: int = DEFAULT_ITERATIONS
    base_seed: int = 0
    warmup_slots: int = 0
    collect_histograms: bool = False
    queue_cap: int = DEFAULT_QUEUE_CAP
    workers: int = 1

    def __post_init__(self) -> None:
        if self.slots_per_run < 1 or self.iterations < 1:
            raise DomainError("slots_per_run and iterations must be positive")
        if not 0 <= self.warmup_slots < self.slots_per_run:
            raise DomainError("need 0 <= warmup_slots < slots_per_run")


@dataclass
class SimResult:
    mean_aoi: float
    stderr_aoi: float
    mean_system_time: float
    throughput: float
    run_means: np.ndarray
    run_throughputs: np.ndarray
    system_time_hist: np.ndarray | None = None
    preemption_time_hist: np.ndarray | None = None


@dataclass
class RunStats:
    """Accumulators of a single trajectory (post-warmup)."""

    aoi_sum: float
    slots: int
    deliveries: int
    system_time_sum: float
    dy_sum: float
    dy_count: int
    system_time_hist: np.ndarray
    preemption_time_hist: np.ndarray

    @property
    def mean_aoi(self) -> float:
        return self.aoi_sum / self.slots


@dataclass
class AoITrace:
    """Per-slot record of one trajectory; index ``t - 1`` holds slot ``t``."""

    aoi: np.ndarray
    channel_state: np.ndarray
    queue_length: np.ndarray
    delivered_gen: np.ndarray
    delivered_slot: np.ndarray
    stats: RunStats = field(repr=False)


def iteration_rng(base_seed: int, index: int) -> np.random.Generator:
    """PCG64 stream for iteration ``index``.

    The seed sequence hashes ``(base_seed mod 2**64, index)``, so each
    iteration's stream is fixed regardless of scheduling order.
    """
    ss = np.random.SeedSequence(entropy=int(base_seed) % (1 << 64), spawn_key=(int(index),))
    return np.random.Generator(np.random.PCG64(ss))


def _arrival_code(arrival: ArrivalModel) -> tuple[int, float, int]:
    if isinstance(arrival, Bernoulli):
        return _ARR_BERNOULLI, float(arrival.lam), 1
    if isinstance(arrival, Periodic):
        return _ARR_PERIODIC, 0.0, int(arrival.K)
    if isinstance(arrival, GenerateAtWill):
        return _ARR_GAW, 0.0, 1
    raise TypeError(f"unknown arrival model {arrival!r}")


def _run(
    params: ChannelParams,
    arrival: ArrivalModel,
    policy: Policy,
    slots: int,
    rng: np.random.Generator,
    warmup: int = 0,
    queue_cap: int = DEFAULT_QUEUE_CAP,
    record: bool = False,
) -> tuple[RunStats, AoITrace | None]:
    arr_kind, lam, K = _arrival_code(arrival)
    fcfs = policy is Policy.FCFS
    pi_bad = stationary(params)[1]
    st = np.zeros(9, dtype=np.int64)
    st[_S_CHAN] = 1 if rng.random() < pi_bad else 0
    st[_S_HELD] = -1
    acc = np.zeros(6)
    buf = np.zeros(min(queue_cap, slots) if fcfs else 1, dtype=np.int64)
    st_hist = np.zeros(HIST_BINS, dtype=np.int64)
    y_hist = np.zeros(HIST_BINS, dtype=np.int64)
    n_rec = slots if record else 0
    tr_aoi = np.zeros(n_rec, dtype=np.int64)
    tr_state = np.zeros(n_rec, dtype=np.int8)
    tr_queue = np.zeros(n_rec, dtype=np.int64)
    dl_gen = np.zeros(n_rec, dtype=np.int64)
    dl_slot = np.zeros(n_rec, dtype=np.int64)
    n_dl = np.zeros(1, dtype=np.int64)
    done = 0
    while done < slots:
        n = min(_CHUNK, slots - done)
        u = rng.random((n, 3))
        status = _kernel(
            u, arr_kind, lam, K, fcfs, params.p, params.r, params.pe_good, params.pe_bad,
            warmup, st, acc, buf, st_hist, y_hist, tr_aoi, tr_state, tr_queue, dl_gen, dl_slot, n_dl,
        )
        if status:
            raise QueueOverflowError(
                f"FCFS queue exceeded {queue_cap} packets at slot {int(st[_S_T])}; configuration is likely unstable"
            )
        done += n
    stats = RunStats(
        aoi_sum=float(acc[_A_AOI]),
        slots=int(acc[_A_SLOTS]),
        deliveries=int(acc[_A_DELIV]),
        system_time_sum=float(acc[_A_SYSTIME]),
        dy_sum=float(acc[_A_DY]),
        dy_count=int(acc[_A_DYN]),
        system_time_hist=st_hist,
        preemption_time_hist=y_hist,
    )
    trace = None
    if record:
        m = int(n_dl[0])
        trace = AoITrace(tr_aoi, tr_state, tr_queue, dl_gen[:m].copy(), dl_slot[:m].copy(), stats)
    return stats, trace


def simulate_trajectory(
    params: ChannelParams,
    arrival: ArrivalModel,
    policy: Policy,
    slots: int,
    seed: int,
    queue_cap: int = DEFAULT_QUEUE_CAP,
) -> AoITrace:
    """Run one trajectory and keep the full per-slot record."""
    if slots < 1:
        raise DomainError("slots must be positive")
    _, trace = _run(params, arrival, policy, slots, iteration_rng(seed, 0), queue_cap=queue_cap, record=True)
    return trace


def run_experiment(config: SimConfig) -> SimResult:
    """Average the time-average AoI over independent iterations.

    Iteration ``i`` uses :func:`iteration_rng` ``(base_seed, i)``; results are
    reduced in iteration order, so the output does not depend on ``workers``.
    """

    def one(i: int) -> RunStats:
        stats, _ = _run(
            config.params, config.arrival, config.policy, config.slots_per_run,
            iteration_rng(config.base_seed, i), config.warmup_slots, config.queue_cap,
        )
        return stats

    idx = range(config.iterations)
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            runs = list(pool.map(one, idx))
    else:
        runs = [one(i) for i in idx]

    means = np.array([s.mean_aoi for s in runs])
    n = len(means)
    stderr = float(np.std(means, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    deliveries = sum(s.deliveries for s in runs)
    slots = sum(s.slots for s in runs)
    st_hist = y_hist = None
    if config.collect_histograms:
        st_hist = np.sum([s.system_time_hist for s in runs], axis=0)
        if config.policy is Policy.FCFS:
            y_hist = np.sum([s.preemption_time_hist for s in runs], axis=0)
    return SimResult(
        mean_aoi=float(np.mean(means)),
        stderr_aoi=stderr,
        mean_system_time=sum(s.system_time_sum for s in runs) / deliveries if deliveries else math.nan,
        throughput=deliveries / slots,
        run_means=means,
        run_throughputs=np.array([s.deliveries / s.slots for s in runs]),
        system_time_hist=st_hist,
        preemption_time_hist=y_hist,
    )


@dataclass(frozen=True)
class GapMeasurement:
    gap: float
    stderr: float
    coupled_gap: float
    dominated: bool
    pairs: int


def measure_gap_decomposition(
    params: ChannelParams, lam: float, slots: int, seed: int, iterations: int = 20
) -> GapMeasurement:
    """Measure the FCFS-minus-pLGFS AoI gap on coupled sample paths.

    For each iteration, FCFS and pLGFS see the same arrivals and channel.
    ``gap`` is ``lam * mean(D * Y)`` over FCFS deliveries (``D`` the time to the
    next delivery, ``Y`` the offset of the newest arrival at delivery);
    ``coupled_gap`` is the time average of the per-slot AoI difference.
    ``dominated`` reports whether FCFS AoI never fell below pLGFS AoI.
    """
    arrival = Bernoulli(lam)
    estimates = []
    diff_sum = 0.0
    diff_slots = 0
    pairs = 0
    dominated = True
    for i in range(iterations):
        f = _run(params, arrival, Policy.FCFS, slots, iteration_rng(seed, i), record=True)[1]
        g = _run(params, arrival, Policy.PLGFS, slots, iteration_rng(seed, i), record=True)[1]
        s = f.stats
        estimates.append(lam * s.dy_sum / s.dy_count if s.dy_count else 0.0)
        pairs += s.dy_count
        diff = f.aoi - g.aoi
        dominated &= bool(np.all(diff >= 0))
        diff_sum += float(diff.sum())
        diff_slots += diff.size
    est = np.array(estimates)
    stderr = float(np.std(est, ddof=1) / math.sqrt(len(est))) if len(est) > 1 else 0.0
    return GapMeasurement(
        gap=float(est.mean()),
        stderr=stderr,
        coupled_gap=diff_sum / diff_slots,
        dominated=dominated,
        pairs=pairs,
    )


TRACE_HEADER = ("slot", "state", "queue_length", "aoi")


def write_trace(trace: AoITrace, out: IO[str]) -> None:
    """Comma-separated dump, one row per slot.

    ``state`` is ``G`` or ``B``; ``queue_length`` counts packets held at the
    start of the slot (before that slot's arrival); ``aoi`` is sampled at the
    start of the slot.
    """
    w = csv.writer(out, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for t in range(trace.aoi.size):
        w.writerow((t + 1, "B" if trace.channel_state[t] else "G", int(trace.queue_length[t]), int(trace.aoi[t])))
