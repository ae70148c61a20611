"""TOML run configuration for ``signmuon train``.

Schema (every key optional unless marked)::

    [experiment]   name, T, seed
    [task]         kind = "matrix_quadratic", m, n, seed, init_seed,
                   init_scale, target_scale
    [optimizer]    kind (sign_muon | muon | signsgd | sgd), lr (float or
                   "theorem"), schedule (constant | cosine), lr_min,
                   plus every Hyperparams field except lr
    [noise]        sigma (float) or sigma_file (.npy or text matrix),
                   batch_size (int or "T"), seed
    [distributed]  M, path (none | allreduce_int8 | allgather_1bit), jobs
    [output]       dir

Unknown sections or keys are rejected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
import tomli
import tomli_w

from .collective import PATHS
from .harness import NoiseModel, SyntheticTask, matrix_quadratic, theorem_stepsize
from .optim import STEPPERS, Hyperparams, cosine_lr

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config"]

_HP_KEYS = tuple(f.name for f in fields(Hyperparams) if f.name != "lr")

SCHEMA = {
    "experiment": {"name": "run", "T": 100, "seed": 0},
    "task": {"kind": "matrix_quadratic", "m": 8, "n": 8, "seed": 0, "init_seed": None,
             "init_scale": 1.0, "target_scale": 1.0},
    "optimizer": {"kind": "sign_muon", "lr": "theorem", "schedule": "constant", "lr_min": 0.0,
                  **{k: None for k in _HP_KEYS}},
    "noise": {"sigma": 0.0, "sigma_file": None, "batch_size": 1, "seed": None},
    "distributed": {"M": 1, "path": "none", "jobs": 1},
    "output": {"dir": "out"},
}


class ConfigError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass
class RunConfig:
    name: str
    T: int
    task: SyntheticTask
    optimizer: str
    hp: Hyperparams
    noise: NoiseModel
    M: int
    path: str | None
    jobs: int
    out_dir: Path
    effective: dict

    def echo(self) -> str:
        """Effective configuration as TOML; loading it reproduces this run."""
        return tomli_w.dumps(self.effective)


def _int(section: str, key: str, value, lo: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{section}.{key}", f"expected an integer, got {value!r}")
    if lo is not None and value < lo:
        raise ConfigError(f"{section}.{key}", f"must be >= {lo}, got {value}")
    return value


def _float(section: str, key: str, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{key}", f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{section}.{key}", f"must be finite, got {value}")
    return float(value)


def _merge(raw: dict) -> dict:
    out = {}
    for section, body in raw.items():
        if section not in SCHEMA:
            raise ConfigError(section, f"unknown section; expected one of {sorted(SCHEMA)}")
        if not isinstance(body, dict):
            raise ConfigError(section, "must be a table")
        for key in body:
            if key not in SCHEMA[section]:
                raise ConfigError(f"{section}.{key}", "unknown key")
    for section, defaults in SCHEMA.items():
        out[section] = {**defaults, **raw.get(section, {})}
    return out


def parse_config(raw: dict, base_dir: Path | str = ".") -> RunConfig:
    base_dir = Path(base_dir)
    c = _merge(raw)
    ex, tk, op, nz, ds = c["experiment"], c["task"], c["optimizer"], c["noise"], c["distributed"]

    T = _int("experiment", "T", ex["T"], 1)
    seed = _int("experiment", "seed", ex["seed"])
    if not isinstance(ex["name"], str):
        raise ConfigError("experiment.name", "expected a string")

    if tk["kind"] != "matrix_quadratic":
        raise ConfigError("task.kind", f"unsupported task {tk['kind']!r}")
    m = _int("task", "m", tk["m"], 1)
    n = _int("task", "n", tk["n"], 1)
    task_seed = _int("task", "seed", tk["seed"])
    init_seed = task_seed + 1 if tk["init_seed"] is None else _int("task", "init_seed", tk["init_seed"])
    task = matrix_quadratic(m, n, task_seed, init_seed,
                            _float("task", "init_scale", tk["init_scale"]),
                            _float("task", "target_scale", tk["target_scale"]))

    if op["kind"] not in STEPPERS:
        raise ConfigError("optimizer.kind", f"must be one of {sorted(STEPPERS)}, got {op['kind']!r}")
    if op["lr"] == "theorem":
        try:
            lr = theorem_stepsize(task, T)
        except ValueError as exc:
            raise ConfigError("optimizer.lr", str(exc)) from None
    else:
        lr = _float("optimizer", "lr", op["lr"])
        if lr <= 0:
            raise ConfigError("optimizer.lr", f"must be positive, got {lr}")
    lr_min = _float("optimizer", "lr_min", op["lr_min"])
    if op["schedule"] == "constant":
        schedule = lr
    elif op["schedule"] == "cosine":
        if not 0 < lr_min <= lr:
            raise ConfigError("optimizer.lr_min", "cosine schedule needs 0 < lr_min <= lr")
        schedule = cosine_lr(lr, T, lr_min)
    else:
        raise ConfigError("optimizer.schedule", f"must be constant or cosine, got {op['schedule']!r}")

    hp_kwargs = {}
    defaults = Hyperparams()
    for key in _HP_KEYS:
        value = op[key]
        if value is None:
            value = getattr(defaults, key)
            if key == "zero_sign_policy" and ds["path"] != "none":
                value = "plus_one"
            if key == "seed":
                value = seed
        hp_kwargs[key] = value
    for key in _HP_KEYS:
        try:
            Hyperparams(**{key: hp_kwargs[key]})
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"optimizer.{key}", str(exc)) from None
    hp = Hyperparams(lr=schedule, **hp_kwargs)

    if nz["sigma_file"] is not None:
        sigma_path = base_dir / str(nz["sigma_file"])
        try:
            if sigma_path.suffix == ".npy":
                sigma = np.load(sigma_path)
            else:
                sigma = np.loadtxt(sigma_path, ndmin=2)
        except (OSError, ValueError) as exc:
            raise ConfigError("noise.sigma_file", f"cannot read {sigma_path}: {exc}") from None
        sigma = np.asarray(sigma, dtype=np.float64)
        if sigma.shape != (m, n):
            raise ConfigError("noise.sigma_file", f"shape {sigma.shape} does not match task ({m}, {n})")
    else:
        sigma = _float("noise", "sigma", nz["sigma"])
    batch = T if nz["batch_size"] == "T" else _int("noise", "batch_size", nz["batch_size"], 1)
    noise_seed = seed if nz["seed"] is None else _int("noise", "seed", nz["seed"])
    try:
        noise = NoiseModel(sigma, batch, noise_seed)
    except ValueError as exc:
        raise ConfigError("noise.sigma", str(exc)) from None

    M = _int("distributed", "M", ds["M"], 1)
    jobs = _int("distributed", "jobs", ds["jobs"], 1)
    if ds["path"] == "none":
        path = None
        if M != 1:
            raise ConfigError("distributed.path", "M > 1 needs allreduce_int8 or allgather_1bit")
    elif ds["path"] in PATHS:
        path = ds["path"]
        if op["kind"] != "sign_muon":
            raise ConfigError("optimizer.kind", "distributed runs support sign_muon only")
    else:
        raise ConfigError("distributed.path", f"must be none or one of {PATHS}, got {ds['path']!r}")

    if not isinstance(c["output"]["dir"], str):
        raise ConfigError("output.dir", "expected a string")
    out_dir = base_dir / c["output"]["dir"]

    effective = {
        "experiment": {"name": ex["name"], "T": T, "seed": seed},
        "task": {"kind": "matrix_quadratic", "m": m, "n": n, "seed": task_seed, "init_seed": init_seed,
                 "init_scale": float(tk["init_scale"]), "target_scale": float(tk["target_scale"])},
        "optimizer": {"kind": op["kind"], "lr": lr, "schedule": op["schedule"], "lr_min": lr_min,
                      **hp_kwargs},
        "noise": {"batch_size": batch, "seed": noise_seed},
        "distributed": {"M": M, "path": ds["path"], "jobs": jobs},
        "output": {"dir": c["output"]["dir"]},
    }
    if nz["sigma_file"] is not None:
        effective["noise"]["sigma_file"] = str((base_dir / str(nz["sigma_file"])).resolve())
    else:
        effective["noise"]["sigma"] = sigma
    return RunConfig(ex["name"], T, task, op["kind"], hp, noise, M, path, jobs, out_dir, effective)


def load_config(path: Path | str) -> RunConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomli.load(fh)
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config: {exc.strerror or exc}") from None
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(str(path), f"invalid TOML: {exc}") from None
    return parse_config(raw, path.parent)
