import math

import numpy as np
import pytest

from signmuon import costmodel
from signmuon.harness import (
    CSV_HEADER,
    ExperimentAborted,
    NoiseModel,
    SyntheticTask,
    TraceRecord,
    TrainTrace,
    matrix_quadratic,
    run_experiment,
    stationarity_metric,
    theorem_stepsize,
    worker_rng,
)
from signmuon.optim import Hyperparams


def test_task_basics():
    task = matrix_quadratic(3, 5, seed=2)
    assert task.shape == (3, 5) and task.L_star == 3.0 and task.f_star == 0.0
    assert task.loss(task.target) == 0.0
    np.testing.assert_array_equal(task.grad(task.target), np.zeros((3, 5)))
    R = task.W0 - task.target
    assert task.loss(task.W0) == pytest.approx(0.5 * np.sum(R * R))


def test_task_gradient_finite_differences(rng):
    task = matrix_quadratic(4, 3, seed=9)
    h = 1e-5
    for _ in range(100):
        W = rng.standard_normal((4, 3)) * 2
        fd = np.zeros_like(W)
        for idx in np.ndindex(W.shape):
            E = np.zeros_like(W)
            E[idx] = h
            fd[idx] = (task.loss(W + E) - task.loss(W - E)) / (2 * h)
        g = task.grad(W)
        assert np.linalg.norm(fd - g) <= 1e-6 * np.linalg.norm(g)


def test_theorem_stepsize():
    task = matrix_quadratic(4, 6, seed=1)
    gap = task.loss(task.W0)
    assert theorem_stepsize(task, 50) == pytest.approx(math.sqrt(2 * gap / (4 * 50)))
    with pytest.raises(ValueError):
        theorem_stepsize(SyntheticTask(task.target, task.target.copy()), 10)


def test_noise_model():
    assert NoiseModel(0.5).l1_sigma((4, 3)) == 6.0
    sig = np.arange(6.0).reshape(2, 3)
    assert NoiseModel(sig).l1_sigma((2, 3)) == 15.0
    with pytest.raises(ValueError):
        NoiseModel(-1.0)
    with pytest.raises(ValueError):
        NoiseModel(1.0, batch_size=0)
    with pytest.raises(ValueError):
        NoiseModel(1.0, distribution="laplace")


def test_noise_variance_scales_with_batch():
    g = np.zeros((200, 200))
    for nb in (1, 4):
        z = NoiseModel(2.0, nb).sample(g, worker_rng(0, 0))
        assert z.var() == pytest.approx(4.0 / nb, rel=0.02)
        assert abs(z.mean()) < 0.02


def test_worker_streams_are_independent():
    a = worker_rng(5, 0).standard_normal(4)
    b = worker_rng(5, 1).standard_normal(4)
    assert not np.array_equal(a, b)
    np.testing.assert_array_equal(a, worker_rng(5, 0).standard_normal(4))


# --- traces ------------------------------------------------------------------------------

def test_stationarity_metric():
    trace = TrainTrace([TraceRecord(t, 0, c, 0, 1, 0, 0) for t, c in enumerate([1.0, 3.0])])
    assert stationarity_metric(trace) == 2.0
    const = TrainTrace([TraceRecord(t, 0, 0.7, 0, 1, 0, 0) for t in range(9)])
    assert stationarity_metric(const) == pytest.approx(0.7)
    assert stationarity_metric(trace, burn_in=1) == 3.0
    with pytest.raises(ValueError):
        stationarity_metric(TrainTrace())


def test_trace_serialization_roundtrip():
    task = matrix_quadratic(4, 4, seed=0)
    trace = run_experiment(task, NoiseModel(0.3, 1, 2), "sign_muon", T=12, hp=Hyperparams(lr=0.05))
    back = TrainTrace.from_jsonl(trace.to_jsonl())
    assert back.records == trace.records
    assert back.meta == trace.meta
    lines = trace.to_csv().splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert len(lines) == 13
    assert float(lines[1].split(",")[1]) == trace.records[0].loss


# --- experiments -----------------------------------------------------------------------------

def test_record_count_and_determinism():
    task = matrix_quadratic(8, 8, seed=0)
    run = lambda: run_experiment(task, NoiseModel(1.0, 1, 3), "sign_muon", T=100,
                                 hp=Hyperparams(lr=0.02, ns_scale="fro"))
    a, b = run(), run()
    assert len(a) == 100
    assert a.to_jsonl() == b.to_jsonl()


def test_stationary_start_gives_constant_trace():
    task = matrix_quadratic(3, 3, seed=4)
    still = SyntheticTask(task.target, task.target.copy())
    trace = run_experiment(still, NoiseModel(0.0), "sign_muon", T=20, hp=Hyperparams(zero_sign_policy="zero"))
    assert set(trace.column("loss")) == {0.0}
    assert set(trace.column("l1_proxy")) == {0.0}


@pytest.mark.parametrize("path", ["allreduce_int8", "allgather_1bit"])
def test_single_worker_path_equals_local_run(path):
    task = matrix_quadratic(6, 5, seed=3)
    hp = Hyperparams(lr=0.01, ns_scale="fro", zero_sign_policy="plus_one")
    a = run_experiment(task, NoiseModel(0.5, 1, 1), "sign_muon", 1, None, 60, hp)
    b = run_experiment(task, NoiseModel(0.5, 1, 1), "sign_muon", 1, path, 60, hp)
    assert [r.loss for r in a.records] == [r.loss for r in b.records]
    assert a.meta["final_loss"] == b.meta["final_loss"]


def test_noiseless_runs_do_not_depend_on_worker_count():
    task = matrix_quadratic(5, 5, seed=8)
    hp = Hyperparams(lr=0.01, ns_scale="fro", zero_sign_policy="plus_one")
    ref = run_experiment(task, NoiseModel(0.0), "sign_muon", 1, "allreduce_int8", 50, hp).column("loss")
    for M in (3, 16):
        got = run_experiment(task, NoiseModel(0.0), "sign_muon", M, "allgather_1bit", 50, hp).column("loss")
        np.testing.assert_array_equal(got, ref)


@pytest.mark.parametrize("path,collective,bits", [("allreduce_int8", "allreduce", 8),
                                                   ("allgather_1bit", "allgather", 1)])
@pytest.mark.parametrize("M", [2, 5])
def test_trace_bytes_match_cost_model(path, collective, bits, M):
    task = matrix_quadratic(7, 3, seed=0)
    trace = run_experiment(task, NoiseModel(1.0), "sign_muon", M, path, 5, Hyperparams(lr=0.01, ns_scale="fro"))
    d = 21
    s = costmodel.payload_bytes(d, bits)
    assert trace.meta["payload_bytes"] == s
    sent, recv = costmodel.volumes(collective, M, s)
    assert set(trace.column("bytes_sent")) == {sent}
    assert set(trace.column("bytes_recv")) == {recv}
    assert trace.meta["replicas_consistent"] is True


def test_divergence_aborts_with_partial_trace():
    task = matrix_quadratic(3, 3, seed=0)
    with pytest.raises(ExperimentAborted) as info:
        run_experiment(task, NoiseModel(0.0), "sgd", T=500, hp=Hyperparams(lr=1e10, momentum=0.0))
    assert 0 < len(info.value.trace) < 500


@pytest.mark.parametrize("kw", [
    {"T": 0}, {"M": 0}, {"optimizer": "adam"}, {"M": 2}, {"path": "tcp"},
    {"optimizer": "muon", "path": "allreduce_int8"},
])
def test_run_experiment_rejects(kw):
    args = {"task": matrix_quadratic(2, 2), "noise": NoiseModel(), "T": 3, **kw}
    with pytest.raises(ValueError):
        run_experiment(**args)
