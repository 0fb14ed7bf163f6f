import itertools
import math

import numpy as np
import pytest

from geaoi.analytic import (
    Bernoulli,
    GenerateAtWill,
    Periodic,
    Policy,
    age_at_delivery_pmf,
    aoi_fcfs_bernoulli,
    aoi_fcfs_gaw,
    aoi_gap_bernoulli,
    aoi_plgfs,
    average_aoi,
    delivery_gap_mean,
    delivery_gap_pmf,
    expected_preemption_time,
    preemption_pmf_given_t,
    queue_constants,
    symmetric_fcfs_bernoulli,
    symmetric_fcfs_gaw,
    symmetric_plgfs,
    system_time_pmf,
    system_time_pmf_from_pgf,
)
from geaoi.channel import ChannelParams, make_symmetric
from geaoi.errors import DivergenceError, DomainError, InstabilityError, UnsupportedRegimeError

from oracles import expected_preemption_by_summation

MEMORYLESS = ChannelParams(0.5, 0.5)
HALF_MEMORY = ChannelParams(0.25, 0.25)
ETAS = [i / 10 for i in range(10)]
GRID = [i / 10 for i in range(1, 10)]


def stable_triples():
    for p, r in itertools.product(GRID, GRID):
        cap = r / (p + r)
        for frac in (0.2, 0.5, 0.8):
            yield p, r, frac * cap


# --- pLGFS -----------------------------------------------------------------


@pytest.mark.parametrize(
    "params, arrival, expected",
    [
        (MEMORYLESS, Bernoulli(1 / 3), 4.0),
        (MEMORYLESS, Periodic(3), 3.0),
        (HALF_MEMORY, Bernoulli(1 / 3), 5.0),
        (MEMORYLESS, GenerateAtWill(), 2.0),
    ],
)
def test_aoi_plgfs(params, arrival, expected):
    assert aoi_plgfs(params, arrival) == pytest.approx(expected, abs=1e-12)


def test_generate_at_will_plgfs_is_bernoulli_one():
    for p, r in itertools.product(GRID, GRID):
        ch = ChannelParams(p, r)
        assert aoi_plgfs(ch, GenerateAtWill()) == pytest.approx(aoi_plgfs(ch, Bernoulli(1.0)), abs=1e-12)


def test_plgfs_rejects_absorbing_bad_state():
    with pytest.raises(DivergenceError):
        aoi_plgfs(ChannelParams(0.3, 0.0), Bernoulli(0.5))


def test_closed_forms_reject_general_erasures():
    ch = ChannelParams(0.5, 0.5, 0.2, 0.8)
    with pytest.raises(UnsupportedRegimeError):
        aoi_plgfs(ch, Bernoulli(0.3))
    with pytest.raises(UnsupportedRegimeError):
        aoi_fcfs_bernoulli(ch, 0.3)
    with pytest.raises(UnsupportedRegimeError):
        aoi_fcfs_gaw(ch)


# --- FCFS ------------------------------------------------------------------


def test_aoi_fcfs_bernoulli_examples():
    assert aoi_fcfs_bernoulli(MEMORYLESS, 1 / 3) == pytest.approx(16 / 3, abs=1e-12)
    assert aoi_fcfs_bernoulli(HALF_MEMORY, 1 / 3) == pytest.approx(8.2, abs=1e-12)
    assert symmetric_fcfs_bernoulli(0.5, 1 / 3) == pytest.approx(8.2, abs=1e-12)


@pytest.mark.parametrize("lam", [0.5, 0.7, 1.0])
def test_aoi_fcfs_bernoulli_unstable(lam):
    with pytest.raises(InstabilityError, match="r/\\(p\\+r\\)"):
        aoi_fcfs_bernoulli(MEMORYLESS, lam)


@pytest.mark.parametrize(
    "params, expected", [(MEMORYLESS, 3.0), (HALF_MEMORY, 4.0), (ChannelParams(0.2, 0.4), 1 + 0.5 + 0.2 / (0.4 * 0.6))]
)
def test_aoi_fcfs_gaw(params, expected):
    assert aoi_fcfs_gaw(params) == pytest.approx(expected, abs=1e-12)


def test_average_aoi_dispatch():
    assert average_aoi(MEMORYLESS, Bernoulli(1 / 3), Policy.FCFS) == pytest.approx(16 / 3)
    assert average_aoi(MEMORYLESS, GenerateAtWill(), Policy.FCFS) == pytest.approx(3.0)
    assert average_aoi(MEMORYLESS, Periodic(3), Policy.PLGFS) == pytest.approx(3.0)
    assert average_aoi(MEMORYLESS, Periodic(3), Policy.FCFS) == pytest.approx(2.5 + math.sqrt(5) / 2, abs=1e-9)


# --- constituent PMFs ------------------------------------------------------


def test_delivery_gap_pmf_memoryless():
    assert [delivery_gap_pmf(MEMORYLESS, m) for m in (1, 2, 3)] == [0.5, 0.25, 0.125]
    assert delivery_gap_mean(MEMORYLESS) == 2.0


def test_delivery_gap_never_bad():
    ch = ChannelParams(0.0, 0.4)
    assert delivery_gap_pmf(ch, 1) == 1.0
    assert delivery_gap_pmf(ch, 5) == 0.0
    assert delivery_gap_mean(ch) == 1.0


@pytest.mark.parametrize("p, r", [(0.3, 0.6), (0.05, 0.1), (0.9, 0.2)])
def test_delivery_gap_sums_to_one(p, r):
    ch = ChannelParams(p, r)
    # tail beyond m* is p (1-r)^(m*-1) <= 1e-13
    mstar = 2 + math.ceil(math.log(1e-13 / p) / math.log(1 - r))
    pm = [delivery_gap_pmf(ch, m) for m in range(1, mstar + 1)]
    assert abs(sum(pm) - 1) <= 1e-12
    assert abs(sum(m * x for m, x in enumerate(pm, 1)) - delivery_gap_mean(ch)) <= 1e-9


def test_delivery_gap_domain():
    with pytest.raises(DomainError):
        delivery_gap_pmf(MEMORYLESS, 0)


def test_age_at_delivery_pmf():
    assert age_at_delivery_pmf(Bernoulli(1 / 3), 2) == pytest.approx(2 / 9)
    assert age_at_delivery_pmf(Periodic(3), 2) == pytest.approx(1 / 3)
    assert age_at_delivery_pmf(Periodic(3), 4) == 0.0
    assert age_at_delivery_pmf(GenerateAtWill(), 2, MEMORYLESS) == 0.25
    total = sum(age_at_delivery_pmf(Bernoulli(0.2), n) for n in range(1, 200))
    assert abs(total - 1) <= 0.8**199 + 1e-14
    with pytest.raises(DomainError):
        age_at_delivery_pmf(Bernoulli(0.2), 0)
    with pytest.raises(DomainError):
        age_at_delivery_pmf(GenerateAtWill(), 1)


def test_system_time_pmf_memoryless():
    got = [system_time_pmf(MEMORYLESS, 1 / 3, t) for t in (1, 2, 3)]
    assert got == pytest.approx([0.25, 0.1875, 0.140625], abs=1e-15)


@pytest.mark.parametrize("p, r, lam", [(0.5, 0.5, 1 / 3), (0.3, 0.6, 0.2), (0.1, 0.2, 0.3), (0.05, 0.05, 0.45)])
def test_system_time_pmf_normalized(p, r, lam):
    ch = ChannelParams(p, r)
    rho = system_time_pmf(ch, lam, 3) / system_time_pmf(ch, lam, 2)
    head = sum(system_time_pmf(ch, lam, t) for t in range(1, 200))
    tail = system_time_pmf(ch, lam, 200) / (1 - rho)
    assert abs(head + tail - 1) <= 1e-12


def test_system_time_pmf_light_load_limit():
    ch = ChannelParams(0.3, 0.6)
    assert system_time_pmf(ch, 1e-9, 1) == pytest.approx(0.6 / 0.9, abs=1e-8)


def test_system_time_pmf_errors():
    with pytest.raises(InstabilityError):
        system_time_pmf(MEMORYLESS, 0.5, 1)
    with pytest.raises(DomainError):
        system_time_pmf(MEMORYLESS, 0.2, 0)


def test_preemption_pmf_given_t():
    assert [preemption_pmf_given_t(1 / 3, 3, y) for y in range(3)] == pytest.approx([4 / 9, 2 / 9, 1 / 3])
    assert [preemption_pmf_given_t(1.0, 3, y) for y in range(3)] == [0.0, 0.0, 1.0]
    assert preemption_pmf_given_t(1 / 3, 1, 0) == 1.0
    for t in range(1, 30):
        assert sum(preemption_pmf_given_t(0.27, t, y) for y in range(t)) == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(DomainError):
        preemption_pmf_given_t(0.3, 3, 3)


# --- gap -------------------------------------------------------------------


def test_gap_examples():
    assert aoi_gap_bernoulli(MEMORYLESS, 1 / 3) == pytest.approx(4 / 3, abs=1e-12)
    assert aoi_gap_bernoulli(HALF_MEMORY, 1 / 3) == pytest.approx(3.2, abs=1e-12)
    assert aoi_gap_bernoulli(ChannelParams(0.3, 0.6), 1e-9) < 1e-12


@pytest.mark.parametrize("p, r, lam", [(0.5, 0.5, 1 / 3), (0.25, 0.25, 1 / 3), (0.3, 0.6, 0.2), (0.7, 0.2, 0.1)])
def test_expected_preemption_matches_direct_summation(p, r, lam):
    ch = ChannelParams(p, r)
    direct = expected_preemption_by_summation(system_time_pmf, preemption_pmf_given_t, ch, lam)
    assert expected_preemption_time(ch, lam) == pytest.approx(direct, rel=1e-11)


def test_gap_identity_over_grid():
    n = 0
    for p, r, lam in stable_triples():
        ch = ChannelParams(p, r)
        lhs = aoi_fcfs_bernoulli(ch, lam)
        rhs = aoi_plgfs(ch, Bernoulli(lam)) + aoi_gap_bernoulli(ch, lam)
        assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(lhs)), (p, r, lam)
        n += 1
    assert n >= 50


def test_fcfs_never_beats_plgfs():
    for p, r, lam in stable_triples():
        ch = ChannelParams(p, r)
        assert aoi_gap_bernoulli(ch, lam) >= 0.0
        assert aoi_fcfs_bernoulli(ch, lam) >= aoi_plgfs(ch, Bernoulli(lam))


# --- reductions ------------------------------------------------------------


@pytest.mark.parametrize("lam", [0.1, 0.2, 1 / 3, 0.45])
def test_memoryless_reductions(lam):
    assert abs(aoi_plgfs(MEMORYLESS, Bernoulli(lam)) - (1 / lam + 1)) <= 1e-12
    assert abs(aoi_fcfs_bernoulli(MEMORYLESS, lam) - (1 / lam + 1 + 4 * lam**2 / (1 - 2 * lam))) <= 1e-12
    for K in range(1, 12):
        assert abs(aoi_plgfs(MEMORYLESS, Periodic(K)) - ((K + 1) / 2 + 1)) <= 1e-12
    assert abs(aoi_plgfs(MEMORYLESS, GenerateAtWill()) - 2.0) <= 1e-12
    assert abs(aoi_fcfs_gaw(MEMORYLESS) - 3.0) <= 1e-12


@pytest.mark.parametrize("eta", ETAS)
def test_symmetric_forms_agree_with_general(eta):
    ch = make_symmetric(eta)
    for lam in (0.1, 0.25, 1 / 3, 0.45):
        assert abs(aoi_plgfs(ch, Bernoulli(lam)) - symmetric_plgfs(eta, Bernoulli(lam))) <= 1e-12
        assert abs(aoi_fcfs_bernoulli(ch, lam) - symmetric_fcfs_bernoulli(eta, lam)) <= 1e-12
    for K in (1, 3, 7):
        assert abs(aoi_plgfs(ch, Periodic(K)) - symmetric_plgfs(eta, Periodic(K))) <= 1e-12
    assert abs(aoi_plgfs(ch, GenerateAtWill()) - symmetric_plgfs(eta, GenerateAtWill())) <= 1e-12
    assert abs(aoi_fcfs_gaw(ch) - symmetric_fcfs_gaw(eta)) <= 1e-12


def test_gaw_fcfs_exceeds_gaw_plgfs_by_one():
    for eta in np.linspace(0, 0.95, 40):
        assert symmetric_fcfs_gaw(eta) - symmetric_plgfs(eta, GenerateAtWill()) == pytest.approx(1.0, abs=1e-12)


def test_monotone_in_memory():
    etas = np.linspace(0, 0.95, 60)
    curves = [
        [aoi_plgfs(make_symmetric(e), Bernoulli(1 / 3)) for e in etas],
        [aoi_plgfs(make_symmetric(e), Periodic(3)) for e in etas],
        [aoi_plgfs(make_symmetric(e), GenerateAtWill()) for e in etas],
        [aoi_fcfs_bernoulli(make_symmetric(e), 1 / 3) for e in etas],
        [aoi_fcfs_gaw(make_symmetric(e)) for e in etas],
    ]
    for c in curves:
        assert np.all(np.diff(c) > 0)


@pytest.mark.parametrize("K", range(1, 10))
def test_periodic_beats_bernoulli_by_constant(K):
    for p, r in itertools.product(GRID, GRID):
        ch = ChannelParams(p, r)
        diff = aoi_plgfs(ch, Bernoulli(1 / K)) - aoi_plgfs(ch, Periodic(K))
        assert abs(diff - (K - 1) / 2) <= 1e-12


# --- queue constants / PGF ---------------------------------------------------


def test_queue_constants_memoryless():
    c = queue_constants(MEMORYLESS, 1 / 3)
    assert (c.G0, c.B0, c.C, c.ratio) == pytest.approx((0.25, 0.25, 0.25, 0.5), abs=1e-15)
    assert abs(c.pgf(1.0) - 1.0) <= 1e-10


def test_queue_constants_light_load():
    ch = ChannelParams(0.3, 0.6)
    c = queue_constants(ch, 1e-12)
    assert c.G0 == pytest.approx(2 / 3, abs=1e-9)
    assert c.B0 == pytest.approx(1 / 3, abs=1e-9)
    assert c.ratio == pytest.approx(0.0, abs=1e-9)


def test_pgf_normalized_on_stable_grid():
    for p, r, lam in stable_triples():
        assert abs(queue_constants(ChannelParams(p, r), lam).pgf(1.0) - 1.0) <= 1e-10


@pytest.mark.parametrize("p, r, lam", [(0.3, 0.6, 0.2), (0.5, 0.5, 1 / 3), (0.1, 0.2, 0.3), (0.8, 0.4, 0.1)])
def test_pgf_coefficients_match_closed_form(p, r, lam):
    ch = ChannelParams(p, r)
    coeffs = system_time_pmf_from_pgf(ch, lam, 40)
    closed = np.array([system_time_pmf(ch, lam, t) for t in range(1, 41)])
    assert np.max(np.abs(coeffs - closed)) <= 1e-10
