"""Synthetic training tasks, gradient noise, traces and experiment driver."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .collective import PATHS, SimulatedCluster
from .linalg import as_matrix
from .optim import STEPPERS, Hyperparams, OptimizerState

__all__ = [
    "SyntheticTask",
    "NoiseModel",
    "TraceRecord",
    "TrainTrace",
    "ExperimentAborted",
    "matrix_quadratic",
    "theorem_stepsize",
    "worker_rng",
    "run_experiment",
    "stationarity_metric",
]

CSV_HEADER = ("t", "loss", "l1_proxy", "nuclear", "lr", "bytes_sent", "bytes_recv")


@dataclass(frozen=True)
class SyntheticTask:
    """``f(W) = 0.5 * ||W - target||_F^2`` with optimum 0 at ``target``.

    Its gradient is ``W - target``, and the spectral smoothness constant is
    ``min(m, n)`` because ``||D||_* <= min(m, n) ||D||_op``.
    """

    target: np.ndarray
    W0: np.ndarray
    kind: str = "matrix_quadratic"

    @property
    def shape(self) -> tuple[int, int]:
        return self.target.shape

    @property
    def L_star(self) -> float:
        return float(min(self.shape))

    @property
    def f_star(self) -> float:
        return 0.0

    def loss(self, W) -> float:
        R = np.asarray(W, dtype=np.float64) - self.target
        with np.errstate(over="ignore"):
            return 0.5 * float(np.sum(R * R))

    def grad(self, W) -> np.ndarray:
        return np.asarray(W, dtype=np.float64) - self.target


def matrix_quadratic(m: int, n: int, seed: int = 0, init_seed: int | None = None,
                     init_scale: float = 1.0, target_scale: float = 1.0) -> SyntheticTask:
    """Random quadratic: target and start drawn i.i.d. normal from separate seeds."""
    if m < 1 or n < 1:
        raise ValueError("task shape must be positive")
    target = target_scale * np.random.default_rng(seed).standard_normal((m, n))
    init_seed = seed + 1 if init_seed is None else init_seed
    W0 = init_scale * np.random.default_rng(init_seed).standard_normal((m, n))
    return SyntheticTask(target, W0)


def theorem_stepsize(task: SyntheticTask, T: int) -> float:
    """``sqrt(2 (f(W0) - f*) / (L_* T))``, the rate-optimal constant stepsize."""
    gap = task.loss(task.W0) - task.f_star
    if gap <= 0:
        raise ValueError("stepsize undefined when W0 is already optimal")
    return math.sqrt(2.0 * gap / (task.L_star * T))


@dataclass(frozen=True)
class NoiseModel:
    """Additive Gaussian gradient noise with per-entry variance ``sigma^2 / n_b``."""

    sigma: float | np.ndarray = 0.0
    batch_size: int = 1
    seed: int = 0
    distribution: str = "gaussian"

    def __post_init__(self):
        if np.any(np.asarray(self.sigma) < 0):
            raise ValueError("sigma must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.distribution != "gaussian":
            raise ValueError("only gaussian noise is supported")

    def l1_sigma(self, shape) -> float:
        return float(np.sum(np.broadcast_to(np.asarray(self.sigma, dtype=np.float64), shape)))

    def sample(self, g: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal(g.shape)
        return g + (np.asarray(self.sigma) / math.sqrt(self.batch_size)) * z


def worker_rng(seed: int, worker: int) -> np.random.Generator:
    """Independent noise stream for one simulated worker."""
    return np.random.default_rng([seed, worker])


@dataclass(frozen=True)
class TraceRecord:
    t: int
    loss: float
    l1_proxy: float
    nuclear: float
    lr: float
    bytes_sent: float
    bytes_recv: float


@dataclass
class TrainTrace:
    records: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def to_jsonl(self) -> str:
        lines = [json.dumps({"record": "meta", **self.meta}, sort_keys=True)]
        lines += [json.dumps({"record": "iter", **asdict(r)}) for r in self.records]
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.records:
            w.writerow([repr(getattr(r, k)) if isinstance(getattr(r, k), float) else getattr(r, k)
                        for k in CSV_HEADER])
        return buf.getvalue()

    @classmethod
    def from_jsonl(cls, text: str) -> "TrainTrace":
        trace = cls()
        for line in text.splitlines():
            if not line.strip():
                continue
            obj = json.loads(line)
            kind = obj.pop("record")
            if kind == "meta":
                trace.meta = obj
            else:
                trace.records.append(TraceRecord(**obj))
        return trace


class ExperimentAborted(RuntimeError):
    def __init__(self, message: str, trace: TrainTrace):
        super().__init__(message)
        self.trace = trace


def _metrics(task: SyntheticTask, W: np.ndarray) -> tuple[float, float, float]:
    g = task.grad(W)
    l1 = float(np.abs(g).sum() / math.sqrt(g.size))
    nuclear = float(np.linalg.svd(g, compute_uv=False).sum())
    return task.loss(W), l1, nuclear


def run_experiment(task: SyntheticTask, noise: NoiseModel, optimizer: str = "sign_muon",
                   M: int = 1, path: str | None = None, T: int = 100,
                   hp: Hyperparams | None = None, jobs: int = 1) -> TrainTrace:
    """Run ``T`` steps and log loss, gradient proxies and traffic per step.

    ``path=None`` uses the single-worker stepper (``M`` must be 1). Any
    ``path`` in :data:`collective.PATHS` runs ``M`` simulated Sign-Muon workers.
    Worker ``m`` draws noise from ``worker_rng(noise.seed, m)``.
    """
    hp = hp or Hyperparams()
    if T < 1:
        raise ValueError("T must be >= 1")
    if M < 1:
        raise ValueError("M must be >= 1")
    if optimizer not in STEPPERS:
        raise ValueError(f"unknown optimizer {optimizer!r}")
    if path is None and M != 1:
        raise ValueError("a communication path is required for M > 1")
    if path is not None:
        if path not in PATHS:
            raise ValueError(f"unknown path {path!r}")
        if optimizer != "sign_muon":
            raise ValueError("the distributed layer implements sign_muon only")

    trace = TrainTrace(meta={
        "optimizer": optimizer, "M": M, "path": path or "none", "T": T,
        "shape": list(task.shape), "noise_sigma_l1": noise.l1_sigma(task.shape),
        "batch_size": noise.batch_size, "noise_seed": noise.seed,
        "hyperparams": hp.as_dict(),
    })
    rngs = [worker_rng(noise.seed, m) for m in range(M)]
    W = as_matrix(task.W0, "W0").copy()

    if path is None:
        state = OptimizerState.zeros_like(W)
        stepper = STEPPERS[optimizer]
    else:
        cluster = SimulatedCluster({"W": W}, M, hp, path, jobs)

    for t in range(T):
        loss, l1, nuclear = _metrics(task, W)
        if not math.isfinite(loss):
            raise ExperimentAborted(f"non-finite loss at step {t}", trace)
        g = task.grad(W)
        grads = [noise.sample(g, rngs[m]) for m in range(M)]
        if path is None:
            W, rec = stepper(W, grads[0], state, hp)
            sent = recv = 0.0
        else:
            recs = cluster.step([{"W": G} for G in grads])
            rec = recs["W"]
            W = cluster.params["W"]
            sent, recv = cluster.ledger.last.bytes_sent, cluster.ledger.last.bytes_recv
        trace.records.append(TraceRecord(t, loss, l1, nuclear, rec.applied_lr, sent, recv))
        if not np.all(np.isfinite(W)):
            raise ExperimentAborted(f"non-finite parameters after step {t}", trace)

    loss, l1, nuclear = _metrics(task, W)
    trace.meta["final_loss"] = loss
    trace.meta["G_T"] = stationarity_metric(trace)
    if path is not None:
        trace.meta["replicas_consistent"] = cluster.replicas_consistent()
        trace.meta["payload_bytes"] = cluster.ledger.last.payload_bytes
    return trace


def stationarity_metric(trace: TrainTrace, burn_in: int = 0) -> float:
    """Mean l1 proxy ``||g_t||_1 / sqrt(mn)`` over records after ``burn_in``."""
    vals = [r.l1_proxy for r in trace.records[burn_in:]]
    if not vals:
        raise ValueError("empty trace")
    return float(np.mean(vals))
