"""Alpha-beta latency/bandwidth predictions for sign aggregation collectives.

A message of ``s`` bytes costs ``alpha + beta * s``. Collective time is
``alpha * rounds + beta * (bytes on the critical path)``. Broadcast and reduce
trees are modelled as pipelined, so their bandwidth term is ``beta * s``
rather than ``beta * s * log2(M)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

__all__ = [
    "BITS",
    "COLLECTIVES",
    "TOPOLOGIES",
    "AlphaBetaScenario",
    "CostBreakdown",
    "payload_bytes",
    "rounds",
    "volumes",
    "iter_time",
    "compression_factor",
    "ag_over_ar_bandwidth_ratio",
    "break_even_workers",
]

BITS = (1, 8, 32)
COLLECTIVES = ("allreduce", "allgather", "ps_star", "ps_tree")
TOPOLOGIES = ("ring", "tree")


def _log2_ceil(M: int) -> int:
    return (M - 1).bit_length()


def payload_bytes(d: int, b: int) -> int:
    """Bytes for ``d`` entries at ``b`` bits each (1-bit rounds up to whole bytes)."""
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if b == 1:
        return -(-d // 8)
    if b == 8:
        return d
    if b == 32:
        return 4 * d
    raise ValueError(f"unsupported bits per entry {b}; choose from {BITS}")


def rounds(collective: str, topology: str, M: int) -> int:
    if M < 1:
        raise ValueError(f"M must be >= 1, got {M}")
    lg = _log2_ceil(M)
    if collective == "allreduce":
        return 2 * (M - 1) if topology == "ring" else 2 * lg
    if collective == "allgather":
        return M - 1 if topology == "ring" else lg
    if collective == "ps_tree":
        return 2 * lg
    if collective == "ps_star":
        # serial uplink into the server plus a tree broadcast
        return M + lg if M > 1 else 0
    raise ValueError(f"unknown collective {collective!r}; choose from {COLLECTIVES}")


def volumes(collective: str, M: int, s: float) -> tuple[float, float]:
    """Per-worker (sent, received) bytes for one iteration."""
    if M < 1:
        raise ValueError(f"M must be >= 1, got {M}")
    if M == 1:
        return 0.0, 0.0
    if collective == "allreduce":
        v = 2.0 * (1.0 - 1.0 / M) * s
    elif collective == "allgather":
        v = float((M - 1) * s)
    elif collective in ("ps_star", "ps_tree"):
        v = float(s)
    else:
        raise ValueError(f"unknown collective {collective!r}; choose from {COLLECTIVES}")
    return v, v


@dataclass(frozen=True)
class AlphaBetaScenario:
    alpha: float
    beta: float
    M: int
    d: int
    bits: int = 8
    topology: str = "ring"
    collective: str = "allreduce"

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")
        if self.M < 1:
            raise ValueError("M must be >= 1")
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.bits not in BITS:
            raise ValueError(f"bits must be one of {BITS}")
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"topology must be one of {TOPOLOGIES}")
        if self.collective not in COLLECTIVES:
            raise ValueError(f"collective must be one of {COLLECTIVES}")


@dataclass(frozen=True)
class CostBreakdown:
    latency_seconds: float
    bandwidth_seconds: float
    total_seconds: float
    payload_bytes: int
    rounds: int
    per_worker_send_bytes: float
    per_worker_recv_bytes: float
    server_bytes: float = 0.0

    def as_dict(self) -> dict:
        return asdict(self)


def iter_time(sc: AlphaBetaScenario) -> CostBreakdown:
    s = payload_bytes(sc.d, sc.bits)
    R = rounds(sc.collective, sc.topology, sc.M)
    send, recv = volumes(sc.collective, sc.M, s)
    server = 0.0
    if sc.M == 1:
        bw_bytes = 0.0
    elif sc.collective == "allreduce":
        bw_bytes = 2.0 * (1.0 - 1.0 / sc.M) * s
    elif sc.collective == "allgather":
        bw_bytes = float((sc.M - 1) * s)
    elif sc.collective == "ps_star":
        # M serial uplink messages, then one pipelined broadcast
        bw_bytes = float(sc.M * s + s)
        server = 2.0 * sc.M * s
    else:
        bw_bytes = 2.0 * s
    latency = sc.alpha * R
    bandwidth = sc.beta * bw_bytes
    return CostBreakdown(latency, bandwidth, latency + bandwidth, s, R, send, recv, server)


def compression_factor(b: int) -> float:
    """Payload reduction of ``b``-bit signs relative to float32."""
    if b not in BITS:
        raise ValueError(f"bits must be one of {BITS}")
    return 32 / b


def ag_over_ar_bandwidth_ratio(M: int, d: int | None = None, ceil: bool = False) -> float:
    """Bandwidth term of 1-bit all-gather over int8 all-reduce.

    With ``ceil=False`` the packed payload is taken as ``d/8`` and the ratio
    collapses to ``M / 16`` for any ``d``. With ``ceil=True`` the real
    ``ceil(d/8)`` byte count is used and ``d`` is required.
    """
    if M < 2:
        raise ValueError("ratio undefined for M < 2")
    if not ceil:
        return M / 16
    if d is None or d < 1:
        raise ValueError("ceiling variant needs d >= 1")
    return (M - 1) * payload_bytes(d, 1) / (2.0 * (1.0 - 1.0 / M) * d)


def break_even_workers(d: int | None = None, ceil: bool = False, max_M: int = 1 << 20) -> int:
    """Smallest ``M >= 2`` where all-gather moves at least as many bytes as all-reduce."""
    if not ceil:
        return 16
    # ratio = M * ceil(d/8) / (2 d), increasing in M
    M = max(2, math.ceil(2 * d / payload_bytes(d, 1)))
    while ag_over_ar_bandwidth_ratio(M - 1, d, True) >= 1.0 and M > 2:
        M -= 1
    while ag_over_ar_bandwidth_ratio(M, d, True) < 1.0:
        M += 1
        if M > max_M:
            raise ValueError("no break-even below max_M")
    return M
