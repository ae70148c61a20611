"""Simulated multi-worker sign aggregation.

Workers live in one process. "Communication" is a buffer exchange plus an
entry in a :class:`CommLedger`; wall time is left to :mod:`signmuon.costmodel`.

Wire format of a packed sign buffer (see :meth:`PackedBits.to_bytes`)::

    uint64 little-endian  logical length d
    ceil(d/8) bytes       bit i of the stream -> bit (i % 8) of byte i // 8,
                          1 = +1, 0 = -1, padding bits zero
"""

from __future__ import annotations

import hashlib
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import costmodel
from .linalg import as_matrix
from .optim import (
    Hyperparams,
    OptimizerState,
    _check_shapes,
    _record,
    sign_direction,
    sign_muon_local_sign,
)

__all__ = [
    "PackedBits",
    "CommRecord",
    "CommLedger",
    "ReplicaDivergenceError",
    "majority_vote",
    "vote_from_sums",
    "allreduce_sum_int8",
    "pack_bits",
    "unpack_bits",
    "allgather_1bit",
    "distributed_step",
    "SimulatedCluster",
    "PATHS",
]

PATHS = ("allreduce_int8", "allgather_1bit")
INT8_MAX_WORKERS = 127


class ReplicaDivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class PackedBits:
    data: bytes
    logical_len: int

    def __post_init__(self):
        if self.logical_len < 0:
            raise ValueError("logical_len must be non-negative")
        if len(self.data) != (self.logical_len + 7) // 8:
            raise ValueError(
                f"byte count {len(self.data)} inconsistent with logical length {self.logical_len}"
            )

    def to_bytes(self) -> bytes:
        return struct.pack("<Q", self.logical_len) + self.data

    @classmethod
    def from_bytes(cls, buf: bytes) -> "PackedBits":
        if len(buf) < 8:
            raise ValueError("packed buffer shorter than its 8-byte header")
        (d,) = struct.unpack_from("<Q", buf)
        return cls(bytes(buf[8:]), d)


@dataclass(frozen=True)
class CommRecord:
    collective: str
    workers: int
    entries: int
    payload_bytes: int
    bytes_sent: float
    bytes_recv: float


@dataclass
class CommLedger:
    """Per-iteration, per-worker traffic of the simulated collectives."""

    records: list = field(default_factory=list)

    def add(self, record: CommRecord) -> None:
        self.records.append(record)

    @property
    def last(self) -> CommRecord:
        return self.records[-1]

    @property
    def total_sent(self) -> float:
        return sum(r.bytes_sent for r in self.records)

    @property
    def total_recv(self) -> float:
        return sum(r.bytes_recv for r in self.records)


def _stack_signs(signs: Sequence, require_pm1: bool) -> np.ndarray:
    if len(signs) == 0:
        raise ValueError("need at least one worker's signs")
    arrs = [np.asarray(s) for s in signs]
    shape = arrs[0].shape
    for a in arrs[1:]:
        if a.shape != shape:
            raise ValueError(f"sign shape mismatch: {shape} vs {a.shape}")
    stacked = np.stack(arrs).astype(np.int8, copy=False)
    if require_pm1:
        if np.any(stacked == 0):
            raise ValueError("unresolved zero sign")
        if np.any(np.abs(stacked) != 1):
            raise ValueError("sign entries must be -1 or +1")
    elif np.any(np.abs(stacked) > 1):
        raise ValueError("sign entries must lie in {-1, 0, +1}")
    return stacked


def vote_from_sums(sums: np.ndarray, tie_policy: str = "plus_one") -> np.ndarray:
    """Threshold integer vote sums; a zero sum maps per ``tie_policy``."""
    if tie_policy == "plus_one":
        return np.where(sums >= 0, 1, -1).astype(np.int8)
    if tie_policy == "zero":
        return np.sign(sums).astype(np.int8)
    raise ValueError(f"unknown tie_policy {tie_policy!r}")


def majority_vote(signs: Sequence, tie_policy: str = "plus_one") -> np.ndarray:
    stacked = _stack_signs(signs, require_pm1=False)
    return vote_from_sums(stacked.sum(axis=0, dtype=np.int64), tie_policy)


def allreduce_sum_int8(signs: Sequence, ledger: CommLedger | None = None,
                       tie_policy: str = "plus_one") -> np.ndarray:
    """Majority vote through an int8 SUM all-reduce of +-1 buffers."""
    stacked = _stack_signs(signs, require_pm1=True)
    M = stacked.shape[0]
    if M > INT8_MAX_WORKERS:
        raise OverflowError(f"int8 sum overflow: {M} workers exceed {INT8_MAX_WORKERS}")
    # exact in int8 because |sum| <= M <= 127
    sums = np.zeros(stacked.shape[1:], dtype=np.int8)
    for s in stacked:
        sums += s
    d = int(sums.size)
    if ledger is not None:
        vol = costmodel.volumes("allreduce", M, costmodel.payload_bytes(d, 8))
        ledger.add(CommRecord("allreduce_int8", M, d, d, vol[0], vol[1]))
    return vote_from_sums(sums, tie_policy)


def pack_bits(S) -> PackedBits:
    flat = np.asarray(S).reshape(-1)
    if np.any(flat == 0):
        raise ValueError("unresolved zero sign")
    if np.any(np.abs(flat) != 1):
        raise ValueError("sign entries must be -1 or +1")
    bits = (flat > 0).astype(np.uint8)
    return PackedBits(np.packbits(bits, bitorder="little").tobytes(), int(flat.size))


def unpack_bits(B: PackedBits) -> np.ndarray:
    """Decode to a flat int8 vector of +-1 (caller reshapes)."""
    raw = np.frombuffer(B.data, dtype=np.uint8)
    bits = np.unpackbits(raw, bitorder="little")
    if np.any(bits[B.logical_len:]):
        raise ValueError("corrupt packed buffer: nonzero padding bits")
    return (2 * bits[: B.logical_len].astype(np.int8) - 1).astype(np.int8)


def allgather_1bit(signs: Sequence, ledger: CommLedger | None = None,
                   tie_policy: str = "plus_one") -> np.ndarray:
    """Majority vote by gathering every worker's packed buffer.

    Each simulated worker unpacks all ``M`` buffers and votes locally from
    ``2 c_i - M`` where ``c_i`` counts the +1 bits; the results are checked
    to be identical across workers.
    """
    stacked = _stack_signs(signs, require_pm1=True)
    M = stacked.shape[0]
    shape = stacked.shape[1:]
    buffers = [pack_bits(s) for s in stacked]
    d = buffers[0].logical_len

    wire = b"".join(b.data for b in buffers)
    votes = []
    for _worker in range(M):
        gathered = np.frombuffer(wire, dtype=np.uint8).reshape(M, -1)
        bits = np.unpackbits(gathered, axis=1, bitorder="little")
        if np.any(bits[:, d:]):
            raise ValueError("corrupt packed buffer: nonzero padding bits")
        counts = bits[:, :d].sum(axis=0, dtype=np.int64)
        votes.append(vote_from_sums(2 * counts - M, tie_policy))
    for v in votes[1:]:
        if not np.array_equal(v, votes[0]):
            raise ReplicaDivergenceError("workers disagree on the gathered vote")
    if ledger is not None:
        vol = costmodel.volumes("allgather", M, costmodel.payload_bytes(d, 1))
        ledger.add(CommRecord("allgather_1bit", M, d, len(buffers[0].data), vol[0], vol[1]))
    return votes[0].reshape(shape)


def _aggregate(signs, path: str, ledger, tie_policy: str) -> np.ndarray:
    if path == "allreduce_int8":
        return allreduce_sum_int8(signs, ledger, tie_policy)
    if path == "allgather_1bit":
        return allgather_1bit(signs, ledger, tie_policy)
    raise ValueError(f"unknown path {path!r}; choose from {PATHS}")


def _checksum(arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a, dtype=np.float64).tobytes())
    return h.hexdigest()


def _local_flat_signs(params: dict, grads: dict, states: dict, hp: Hyperparams) -> np.ndarray:
    # zero signs must resolve to +1 before they hit the wire
    hp_local = hp if hp.zero_sign_policy == "plus_one" else hp.replace(zero_sign_policy="plus_one")
    parts = []
    for name, W in params.items():
        W, G = _check_shapes(W, grads[name], states[name])
        parts.append(sign_muon_local_sign(W, G, states[name], hp_local).reshape(-1))
    return np.concatenate(parts)


def _cluster_step(replicas, grads, states, hp, path, ledger, jobs=1):
    """Core of one synchronous step over named blocks.

    ``replicas[m]`` / ``grads[m]`` / ``states[m]`` are worker ``m``'s dicts of
    blocks. Block signs are flattened row-major and concatenated in dict order
    into one buffer per worker.
    """
    M = len(replicas)
    if M < 1 or len(grads) != M or len(states) != M:
        raise ValueError("need matching replicas, grads and states for M >= 1 workers")
    names = list(replicas[0])
    digests = {_checksum(r[n] for n in names) for r in replicas}
    if len(digests) != 1:
        raise ReplicaDivergenceError("replica divergence: worker parameters differ")
    t = states[0][names[0]].t
    eta = hp.lr_at(t)

    def local(m):
        return _local_flat_signs(replicas[m], grads[m], states[m], hp)

    if jobs > 1 and M > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            signs = list(pool.map(local, range(M)))
    else:
        signs = [local(m) for m in range(M)]
    vote = _aggregate(signs, path, ledger, hp.vote_tie_policy)

    new_params, records, offset = {}, {}, 0
    for name in names:
        W = as_matrix(replicas[0][name], name)
        S = vote[offset: offset + W.size].reshape(W.shape)
        offset += W.size
        D = sign_direction(S, hp)
        new_params[name] = W - eta * D
        mean_grad = np.mean([as_matrix(g[name], name) for g in grads], axis=0)
        records[name] = _record(D, mean_grad, eta)
    for st in states:
        for name in names:
            st[name].t += 1
    return new_params, records


def distributed_step(weights: Sequence, grads: Sequence, states: Sequence[OptimizerState],
                     hp: Hyperparams, path: str = "allreduce_int8",
                     ledger: CommLedger | None = None, jobs: int = 1):
    """One Sign-Muon step for ``M`` simulated workers sharing one matrix block.

    ``weights[m]`` must be bit-identical across workers; ``grads[m]`` and
    ``states[m]`` are each worker's local gradient and momentum state. Returns
    the common new parameters and a :class:`StepRecord` (its gradient proxy is
    taken from the worker-averaged gradient).
    """
    key = "W"
    new, rec = _cluster_step(
        [{key: w} for w in weights],
        [{key: g} for g in grads],
        [{key: s} for s in states],
        hp, path, ledger, jobs,
    )
    return new[key], rec[key]


class SimulatedCluster:
    """``M`` data-parallel replicas of a dict of parameter blocks.

    Every worker keeps its own copy of the parameters and momentum; a step
    gathers local signs, aggregates them along ``path`` and applies the common
    vote everywhere.
    """

    def __init__(self, params: dict, M: int, hp: Hyperparams,
                 path: str = "allreduce_int8", jobs: int = 1):
        if M < 1:
            raise ValueError("M must be >= 1")
        if path not in PATHS:
            raise ValueError(f"unknown path {path!r}; choose from {PATHS}")
        self.M, self.hp, self.path, self.jobs = M, hp, path, jobs
        base = {k: as_matrix(v, k).copy() for k, v in params.items()}
        self.replicas = [{k: v.copy() for k, v in base.items()} for _ in range(M)]
        self.states = [{k: OptimizerState.zeros_like(v) for k, v in base.items()} for _ in range(M)]
        self.ledger = CommLedger()

    @property
    def params(self) -> dict:
        return self.replicas[0]

    def step(self, grads: Sequence[dict]):
        new, records = _cluster_step(self.replicas, grads, self.states, self.hp,
                                     self.path, self.ledger, self.jobs)
        # each worker applies the shared vote to its own copy
        self.replicas = [{k: v.copy() for k, v in new.items()} for _ in range(self.M)]
        return records

    def replicas_consistent(self) -> bool:
        names = list(self.replicas[0])
        return len({_checksum(r[n] for n in names) for r in self.replicas}) == 1
