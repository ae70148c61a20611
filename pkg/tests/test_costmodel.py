import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from signmuon.costmodel import (
    COLLECTIVES,
    TOPOLOGIES,
    AlphaBetaScenario,
    ag_over_ar_bandwidth_ratio,
    break_even_workers,
    compression_factor,
    iter_time,
    payload_bytes,
    rounds,
    volumes,
)

RESNET50_D = 23_500_000


def test_payload_worked_example():
    assert payload_bytes(RESNET50_D, 32) == 94_000_000
    assert payload_bytes(RESNET50_D, 8) == 23_500_000
    assert payload_bytes(RESNET50_D, 1) == 2_937_500
    assert payload_bytes(RESNET50_D, 1) / 2**20 == pytest.approx(2.8, abs=0.01)
    assert payload_bytes(RESNET50_D, 32) / payload_bytes(RESNET50_D, 1) == 32
    assert payload_bytes(RESNET50_D, 32) / payload_bytes(RESNET50_D, 8) == 4


@pytest.mark.parametrize("d,expected", [(1, 1), (8, 1), (9, 2), (16, 2), (17, 3)])
def test_payload_one_bit_ceiling(d, expected):
    assert payload_bytes(d, 1) == expected


@pytest.mark.parametrize("d,b", [(0, 8), (10, 4), (10, 16)])
def test_payload_rejects(d, b):
    with pytest.raises(ValueError):
        payload_bytes(d, b)


@pytest.mark.parametrize("collective,topology,M,expected", [
    ("allreduce", "ring", 4, 6),
    ("allreduce", "tree", 8, 6),
    ("allreduce", "tree", 5, 6),
    ("allgather", "ring", 1, 0),
    ("allgather", "ring", 6, 5),
    ("allgather", "tree", 9, 4),
    ("ps_tree", "ring", 8, 6),
    ("ps_star", "ring", 8, 11),
    ("ps_star", "tree", 1, 0),
])
def test_rounds(collective, topology, M, expected):
    assert rounds(collective, topology, M) == expected


def test_rounds_rejects():
    with pytest.raises(ValueError):
        rounds("broadcast", "ring", 4)
    with pytest.raises(ValueError):
        rounds("allreduce", "ring", 0)


def test_allreduce_ring_time():
    b = iter_time(AlphaBetaScenario(1e-6, 1e-9, 4, 1000, 8, "ring", "allreduce"))
    assert b.latency_seconds == pytest.approx(6e-6, rel=1e-12)
    assert b.bandwidth_seconds == pytest.approx(1.5e-6, rel=1e-12)
    assert b.total_seconds == pytest.approx(7.5e-6, rel=1e-12)
    assert b.per_worker_send_bytes == b.per_worker_recv_bytes == 1500


def test_ps_tree_time():
    b = iter_time(AlphaBetaScenario(0.0, 1e-9, 8, 10**6, 8, "ring", "ps_tree"))
    assert b.total_seconds == pytest.approx(2e-3, rel=1e-12)


def test_ps_star_time():
    alpha, beta, M, d = 2e-6, 3e-9, 6, 5000
    b = iter_time(AlphaBetaScenario(alpha, beta, M, d, 8, "ring", "ps_star"))
    s = d
    assert b.total_seconds == pytest.approx(M * (alpha + beta * s) + alpha * math.ceil(math.log2(M)) + beta * s)
    assert b.server_bytes == 2 * M * s
    assert b.per_worker_send_bytes == b.per_worker_recv_bytes == s


def test_allgather_time():
    alpha, beta, M, d = 1e-6, 1e-9, 5, 100
    b = iter_time(AlphaBetaScenario(alpha, beta, M, d, 1, "tree", "allgather"))
    assert b.payload_bytes == 13
    assert b.total_seconds == pytest.approx(alpha * 3 + (M - 1) * 13 * beta)


@pytest.mark.parametrize("collective", COLLECTIVES)
@pytest.mark.parametrize("topology", TOPOLOGIES)
def test_single_worker_has_no_bandwidth_term(collective, topology):
    b = iter_time(AlphaBetaScenario(1e-6, 1e-9, 1, 12345, 8, topology, collective))
    assert b.bandwidth_seconds == 0.0
    assert b.per_worker_send_bytes == b.per_worker_recv_bytes == 0.0


@given(st.sampled_from(COLLECTIVES), st.sampled_from(TOPOLOGIES), st.sampled_from([1, 8, 32]),
       st.integers(1, 300), st.integers(1, 10**6), st.floats(0, 1e-3), st.floats(0, 1e-6))
def test_breakdown_invariants_and_monotonicity(coll, topo, bits, M, d, alpha, beta):
    base = AlphaBetaScenario(alpha, beta, M, d, bits, topo, coll)
    b = iter_time(base)
    assert b.total_seconds == pytest.approx(b.latency_seconds + b.bandwidth_seconds)
    assert min(b.latency_seconds, b.bandwidth_seconds, b.per_worker_send_bytes) >= 0
    for bigger in (
        AlphaBetaScenario(alpha * 2 + 1e-9, beta, M, d, bits, topo, coll),
        AlphaBetaScenario(alpha, beta * 2 + 1e-15, M, d, bits, topo, coll),
        AlphaBetaScenario(alpha, beta, M, d + 1, bits, topo, coll),
        AlphaBetaScenario(alpha, beta, M + 1, d, bits, topo, coll),
    ):
        assert iter_time(bigger).total_seconds >= b.total_seconds * (1 - 1e-12)


def test_scenario_validation():
    with pytest.raises(ValueError):
        AlphaBetaScenario(-1.0, 0.0, 2, 10)
    with pytest.raises(ValueError):
        AlphaBetaScenario(0.0, 0.0, 0, 10)
    with pytest.raises(ValueError):
        AlphaBetaScenario(0.0, 0.0, 2, 10, topology="mesh")
    with pytest.raises(ValueError):
        AlphaBetaScenario(0.0, 0.0, 2, 10, bits=4)


def test_volumes():
    assert volumes("allreduce", 4, 1000) == (1500.0, 1500.0)
    assert volumes("allgather", 5, 2) == (8.0, 8.0)
    assert volumes("ps_star", 1, 100) == (0.0, 0.0)


def test_compression_factors():
    assert compression_factor(1) == 32
    assert compression_factor(8) == 4
    assert compression_factor(32) == 1
    assert compression_factor(1) / compression_factor(8) == 8


@pytest.mark.parametrize("M,expected", [(16, 1.0), (4, 0.25), (32, 2.0)])
def test_ag_over_ar_closed_form(M, expected):
    assert ag_over_ar_bandwidth_ratio(M) == expected


def test_ag_over_ar_closed_form_equals_byte_ratio_when_d_divisible():
    for M in range(2, 40):
        d = 8 * 1000
        ag = volumes("allgather", M, d / 8)[0]
        ar = volumes("allreduce", M, d)[0]
        assert ag_over_ar_bandwidth_ratio(M) == pytest.approx(ag / ar, rel=1e-14)
        assert ag_over_ar_bandwidth_ratio(M, d, ceil=True) == pytest.approx(ag / ar, rel=1e-14)


def test_ag_over_ar_rejects():
    with pytest.raises(ValueError):
        ag_over_ar_bandwidth_ratio(1)
    with pytest.raises(ValueError):
        ag_over_ar_bandwidth_ratio(4, ceil=True)


def test_break_even_closed_form():
    assert break_even_workers() == 16
    assert ag_over_ar_bandwidth_ratio(15) < 1.0 <= ag_over_ar_bandwidth_ratio(16)


@given(st.integers(64, 10**7))
def test_break_even_ceiling_within_one_of_sixteen(d):
    M = break_even_workers(d, ceil=True)
    assert abs(M - 16) <= 1
    assert ag_over_ar_bandwidth_ratio(M, d, ceil=True) >= 1.0
    assert ag_over_ar_bandwidth_ratio(M - 1, d, ceil=True) < 1.0


def test_break_even_ceiling_small_d():
    # d = 9: ratio = M * 2 / 18
    assert break_even_workers(9, ceil=True) == 9
