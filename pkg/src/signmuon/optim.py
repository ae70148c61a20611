"""Single-worker optimizer steppers over named parameter blocks.

Four update rules share one state layout (a momentum buffer and a step
counter per block):

* ``sign_muon`` -- momentum, Newton-Schulz polar direction, entrywise sign.
* ``muon``      -- momentum, polar direction used as is.
* ``signsgd``   -- entrywise sign of the momentum.
* ``sgd``       -- heavy-ball momentum SGD.

Weight decay is folded into the gradient (``G + lambda * W``) before the
momentum update for every rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Callable, Mapping, Sequence, Union

import numpy as np

from .linalg import (
    SCALES,
    ZERO_POLICIES,
    as_matrix,
    polar_newton_schulz,
    polar_svd,
    sign_entrywise,
)

__all__ = [
    "Hyperparams",
    "OptimizerState",
    "StepRecord",
    "constant_lr",
    "cosine_lr",
    "step_sign_muon",
    "step_muon",
    "step_signsgd",
    "step_sgd_momentum",
    "STEPPERS",
    "BlockOptimizer",
]

DIRECTION_MODES = ("raw_sign", "normalized")
POLAR_METHODS = ("newton_schulz", "svd")
TIE_POLICIES = ("plus_one", "zero")

LRSchedule = Union[float, Sequence[float], Callable[[int], float]]


def constant_lr(lr: float) -> Callable[[int], float]:
    if lr <= 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    return lambda t: lr


def cosine_lr(lr_max: float, total_steps: int, lr_min: float = 0.0) -> Callable[[int], float]:
    """Cosine decay from ``lr_max`` to ``lr_min`` over ``total_steps``, no warmup.

    ``lr_min`` must stay positive if every step needs a positive stepsize.
    """
    if lr_max <= 0 or lr_min < 0 or lr_min > lr_max:
        raise ValueError("cosine_lr needs 0 <= lr_min <= lr_max and lr_max > 0")
    if total_steps < 1:
        raise ValueError("total_steps must be >= 1")

    def schedule(t: int) -> float:
        frac = min(t, total_steps) / total_steps
        return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + math.cos(math.pi * frac))

    return schedule


@dataclass(frozen=True)
class Hyperparams:
    lr: LRSchedule = 0.01
    momentum: float = 0.9
    weight_decay: float = 0.0
    ns_iters: int = 5
    stability_eps: float = 1e-12
    ns_scale: str = "spectral"
    power_iters: int = 2
    direction_mode: str = "raw_sign"
    zero_sign_policy: str = "zero"
    polar_method: str = "newton_schulz"
    vote_tie_policy: str = "plus_one"
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.ns_iters < 0:
            raise ValueError(f"ns_iters must be >= 0, got {self.ns_iters}")
        if self.stability_eps <= 0:
            raise ValueError(f"stability_eps must be > 0, got {self.stability_eps}")
        if self.power_iters < 1:
            raise ValueError(f"power_iters must be >= 1, got {self.power_iters}")
        for name, allowed in (
            ("ns_scale", SCALES),
            ("direction_mode", DIRECTION_MODES),
            ("zero_sign_policy", ZERO_POLICIES),
            ("polar_method", POLAR_METHODS),
            ("vote_tie_policy", TIE_POLICIES),
        ):
            if getattr(self, name) not in allowed:
                raise ValueError(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")
        if isinstance(self.lr, (int, float)):
            if self.lr <= 0:
                raise ValueError(f"lr must be positive, got {self.lr}")
        elif not callable(self.lr):
            if len(self.lr) == 0 or any(v <= 0 for v in self.lr):
                raise ValueError("lr sequence must be non-empty with positive entries")

    def lr_at(self, t: int) -> float:
        if isinstance(self.lr, (int, float)):
            return float(self.lr)
        if callable(self.lr):
            eta = float(self.lr(t))
        else:
            eta = float(self.lr[min(t, len(self.lr) - 1)])
        if not eta > 0:
            raise ValueError(f"learning rate at step {t} is not positive: {eta}")
        return eta

    def replace(self, **changes) -> "Hyperparams":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        if not isinstance(self.lr, (int, float)):
            out["lr"] = "schedule"
        return out


@dataclass
class OptimizerState:
    momentum: np.ndarray
    t: int = 0

    @classmethod
    def zeros_like(cls, W) -> "OptimizerState":
        return cls(np.zeros_like(as_matrix(W, "W")))


@dataclass(frozen=True)
class StepRecord:
    direction_l1: float
    direction_op_norm: float
    grad_l1_proxy: float
    applied_lr: float


def _check_shapes(W, G, state) -> tuple[np.ndarray, np.ndarray]:
    W = as_matrix(W, "W")
    G = as_matrix(G, "G")
    if W.shape != G.shape or state.momentum.shape != W.shape:
        raise ValueError(
            f"shape mismatch: W {W.shape}, G {G.shape}, momentum {state.momentum.shape}"
        )
    return W, G


def _record(D: np.ndarray, G: np.ndarray, eta: float) -> StepRecord:
    return StepRecord(
        direction_l1=float(np.abs(D).sum()),
        direction_op_norm=float(np.linalg.norm(D, 2)),
        grad_l1_proxy=float(np.abs(G).sum() / math.sqrt(G.size)),
        applied_lr=eta,
    )


def _update_momentum(W, G, state: OptimizerState, hp: Hyperparams, ema: bool = True) -> np.ndarray:
    G_tilde = G + hp.weight_decay * W if hp.weight_decay else G
    if ema:
        state.momentum = hp.momentum * state.momentum + (1.0 - hp.momentum) * G_tilde
    else:
        state.momentum = hp.momentum * state.momentum + G_tilde
    return state.momentum


def polar_direction(M: np.ndarray, hp: Hyperparams, t: int = 0) -> np.ndarray:
    """Polar direction of a momentum matrix under ``hp`` (NS or exact SVD)."""
    if hp.polar_method == "svd":
        if not np.any(M):
            return np.zeros_like(M)
        return polar_svd(M)
    return polar_newton_schulz(
        M, hp.ns_iters, hp.stability_eps, hp.ns_scale, hp.power_iters, seed=hp.seed + t
    )


def sign_muon_local_sign(W, G, state: OptimizerState, hp: Hyperparams) -> np.ndarray:
    """Momentum update plus polar step; returns the local int8 sign matrix.

    Shared by the single-worker stepper and every simulated worker of the
    distributed layer. Does not advance ``state.t``.
    """
    M = _update_momentum(W, G, state, hp)
    U = polar_direction(M, hp, state.t)
    return sign_entrywise(U, hp.zero_sign_policy)


def sign_direction(S, hp: Hyperparams) -> np.ndarray:
    D = S.astype(np.float64)
    if hp.direction_mode == "normalized":
        D /= math.sqrt(D.size)
    return D


def step_sign_muon(W, G, state: OptimizerState, hp: Hyperparams):
    W, G = _check_shapes(W, G, state)
    eta = hp.lr_at(state.t)
    S = sign_muon_local_sign(W, G, state, hp)
    D = sign_direction(S, hp)
    state.t += 1
    return W - eta * D, _record(D, G, eta)


def step_muon(W, G, state: OptimizerState, hp: Hyperparams):
    W, G = _check_shapes(W, G, state)
    eta = hp.lr_at(state.t)
    M = _update_momentum(W, G, state, hp)
    D = polar_direction(M, hp, state.t)
    state.t += 1
    return W - eta * D, _record(D, G, eta)


def step_signsgd(W, G, state: OptimizerState, hp: Hyperparams):
    W, G = _check_shapes(W, G, state)
    eta = hp.lr_at(state.t)
    M = _update_momentum(W, G, state, hp)
    D = sign_direction(sign_entrywise(M, hp.zero_sign_policy), hp)
    state.t += 1
    return W - eta * D, _record(D, G, eta)


def step_sgd_momentum(W, G, state: OptimizerState, hp: Hyperparams):
    W, G = _check_shapes(W, G, state)
    eta = hp.lr_at(state.t)
    D = _update_momentum(W, G, state, hp, ema=False).copy()
    state.t += 1
    return W - eta * D, _record(D, G, eta)


STEPPERS = {
    "sign_muon": step_sign_muon,
    "muon": step_muon,
    "signsgd": step_signsgd,
    "sgd": step_sgd_momentum,
}


@dataclass
class BlockOptimizer:
    """Applies one stepper to a dict of named parameter blocks.

    Each block keeps its own momentum and step counter. Vector blocks are
    handled as column matrices and returned in their original shape.
    """

    kind: str
    hp: Hyperparams = field(default_factory=Hyperparams)
    states: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in STEPPERS:
            raise ValueError(f"unknown optimizer kind {self.kind!r}; choose from {sorted(STEPPERS)}")

    def step(self, params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray]):
        if set(params) != set(grads):
            raise ValueError("params and grads must name the same blocks")
        stepper = STEPPERS[self.kind]
        new_params, records = {}, {}
        for name, W in params.items():
            W_arr = np.asarray(W, dtype=np.float64)
            Wm = as_matrix(W_arr, name)
            if name not in self.states:
                self.states[name] = OptimizerState.zeros_like(Wm)
            W_new, rec = stepper(Wm, as_matrix(grads[name], name), self.states[name], self.hp)
            new_params[name] = W_new.reshape(W_arr.shape)
            records[name] = rec
        return new_params, records
