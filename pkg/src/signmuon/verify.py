"""Monte Carlo and deterministic checks of the optimizer's guarantees.

Every verifier is seeded, returns a :class:`Report` carrying the measured
value, the bound it is held to and the slack, and never raises on failure.
Suites group verifiers for the command line.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import costmodel
from .collective import (
    CommLedger,
    PackedBits,
    SimulatedCluster,
    allgather_1bit,
    allreduce_sum_int8,
    distributed_step,
    pack_bits,
    unpack_bits,
)
from .harness import (
    NoiseModel,
    SyntheticTask,
    matrix_quadratic,
    run_experiment,
    stationarity_metric,
    theorem_stepsize,
    worker_rng,
)
from .linalg import (
    jacobi_svd,
    newton_schulz_iterate,
    norms,
    polar_newton_schulz,
    polar_svd,
    power_iter_spectral,
)
from .optim import Hyperparams, OptimizerState, step_sign_muon

__all__ = [
    "Report",
    "MonteCarloReport",
    "estimate_sign_error",
    "verify_descent_lemma",
    "verify_ns_error",
    "verify_polar_dual",
    "verify_deterministic_muon",
    "deterministic_muon_average",
    "verify_inexact_muon",
    "verify_gradient",
    "noise_floor_scan",
    "NoiseFloorTable",
    "gradient_sign_hp",
    "ns_test_set",
    "ns_test_matrix",
    "timed_suite",
    "SUITES",
    "run_suite",
]


@dataclass
class Report:
    name: str
    passed: bool
    measured: float
    bound: float
    details: dict = field(default_factory=dict)

    @property
    def slack(self) -> float:
        return self.bound - self.measured

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return (f"{tag}\t{self.name}\tmeasured={self.measured:.6g}\t"
                f"bound={self.bound:.6g}\tslack={self.slack:.3g}")


@dataclass
class MonteCarloReport:
    estimate: float
    standard_error: float
    trials: int
    analytic_bound: float
    passed: bool


def _orthonormal(rng, m: int, k: int) -> np.ndarray:
    Q, R = np.linalg.qr(rng.standard_normal((m, k)))
    return Q * np.sign(np.diag(R))


# ---------------------------------------------------------------------------
# sign reliability
# ---------------------------------------------------------------------------

def estimate_sign_error(g: float, sigma: float, n_b: int = 1, M: int = 1,
                        trials: int = 100_000, seed: int = 0,
                        tie_policy: str = "zero") -> MonteCarloReport:
    """Probability that the ``M``-worker vote on a noisy scalar gets ``sign(g)`` wrong.

    Each worker sees ``g + sigma / sqrt(n_b) * N(0, 1)``. A tied vote counts
    as an error under ``tie_policy="zero"``. The bound is
    ``min(1, 2 sigma / (sqrt(M n_b) |g|))``.
    """
    if g == 0:
        raise ValueError("g must be nonzero")
    if trials < 10_000:
        raise ValueError("need at least 10^4 trials")
    rng = np.random.default_rng([seed, M, n_b])
    noisy = g + (sigma / math.sqrt(n_b)) * rng.standard_normal((trials, M))
    votes = np.sign(noisy).astype(np.int64).sum(axis=1)
    if tie_policy == "plus_one":
        votes = np.where(votes >= 0, 1, -1)
    wrong = np.sign(votes) != np.sign(g)
    p = float(wrong.mean())
    se = math.sqrt(max(p * (1.0 - p), 0.0) / trials)
    bound = min(1.0, 2.0 * sigma / (math.sqrt(M * n_b) * abs(g)))
    return MonteCarloReport(p, se, trials, bound, p <= bound + 3.0 * se)


# ---------------------------------------------------------------------------
# geometry
# ---------------------------------------------------------------------------

def verify_descent_lemma(task: SyntheticTask, trials: int = 10_000, seed: int = 0,
                         slack: float = 1e-9) -> Report:
    """``f(W - eta D) <= f(W) - eta <grad f(W), D> + L_* eta^2 / 2`` for ``||D||_op <= 1``."""
    m, n = task.shape
    rng = np.random.default_rng(seed)
    W = rng.standard_normal((trials, m, n)) * 3.0
    D = rng.standard_normal((trials, m, n))
    D /= np.linalg.svd(D, compute_uv=False)[:, :1, None]
    D *= rng.uniform(0.0, 1.0, size=(trials, 1, 1))
    eta = rng.uniform(0.0, 1.0, size=trials)
    eta = np.where(eta == 0.0, 1.0, eta)

    R = W - task.target
    f0 = 0.5 * np.einsum("tij,tij->t", R, R)
    R1 = R - eta[:, None, None] * D
    f1 = 0.5 * np.einsum("tij,tij->t", R1, R1)
    inner = np.einsum("tij,tij->t", R, D)
    rhs = f0 - eta * inner + 0.5 * task.L_star * eta**2
    excess = f1 - rhs
    worst = float(excess.max())
    violations = int(np.sum(excess > slack))
    return Report("descent_lemma", violations == 0, worst, slack,
                  {"trials": trials, "violations": violations})


def _gram_error(Y: np.ndarray) -> float:
    G = Y.T @ Y if Y.shape[0] >= Y.shape[1] else Y @ Y.T
    return float(np.linalg.norm(np.eye(G.shape[0]) - G, 2))


def ns_test_matrix(rng, rho: float, m: int, n: int) -> np.ndarray:
    """Random ``m x n`` matrix with singular values spread over ``[sqrt(1 - rho), 1]``."""
    k = min(m, n)
    sv = rng.uniform(math.sqrt(1.0 - rho), 1.0, size=k)
    sv[0] = 1.0
    sv[-1] = math.sqrt(1.0 - rho)
    return _orthonormal(rng, m, k) @ np.diag(sv) @ _orthonormal(rng, n, k).T


def verify_ns_error(rho: float, K: int, trials: int = 20, seed: int = 0,
                    max_shape: tuple[int, int] = (64, 48), matrices=None) -> Report:
    """Newton-Schulz error after ``K`` steps stays within ``rho ** (2 ** K)``.

    Test matrices have singular values in ``[sqrt(1 - rho), 1]`` so that
    ``||I - X^T X||_op <= rho`` with no further scaling. Both the Gram defect
    and the spectral distance to the exact polar factor are checked.
    """
    if not 0.0 <= rho < 1.0:
        raise ValueError("rho must lie in [0, 1)")
    if matrices is None:
        matrices = ns_test_set(rho, trials, seed, max_shape)
    bound = rho ** (2 ** K) + 1e-8
    worst_gram, worst_polar, worst_premise = 0.0, 0.0, 0.0
    for X, Q in matrices:
        worst_premise = max(worst_premise, _gram_error(X))
        Y = newton_schulz_iterate(X, K)
        worst_gram = max(worst_gram, _gram_error(Y))
        worst_polar = max(worst_polar, float(np.linalg.norm(Y - Q, 2)))
    measured = max(worst_gram, worst_polar)
    ok = worst_premise <= rho + 1e-12 and measured <= bound
    return Report(f"ns_error[rho={rho},K={K}]", ok, measured, bound,
                  {"gram": worst_gram, "polar": worst_polar, "premise": worst_premise})


def ns_test_set(rho: float, trials: int = 20, seed: int = 0,
                max_shape: tuple[int, int] = (64, 48)):
    """``(X, polar_svd(X))`` pairs; the first pair has the full ``max_shape``."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(trials):
        if i == 0:
            m, n = max_shape
        else:
            m, n = int(rng.integers(1, max_shape[0] + 1)), int(rng.integers(1, max_shape[1] + 1))
            if rng.random() < 0.5:
                m, n = n, m
        X = ns_test_matrix(rng, rho, m, n)
        out.append((X, polar_svd(X)))
    return out


def verify_polar_dual(n_matrices: int = 50, n_dirs: int = 100, seed: int = 0,
                      max_dim: int = 12) -> list[Report]:
    """``<G, polar(G)> = ||G||_*`` and no unit-spectral-norm ``D`` does better."""
    rng = np.random.default_rng(seed)
    worst_rel, worst_gap, worst_oracle = 0.0, -np.inf, 0.0
    for _ in range(n_matrices):
        m, n = int(rng.integers(1, max_dim + 1)), int(rng.integers(1, max_dim + 1))
        G = rng.standard_normal((m, n))
        Q = polar_svd(G)
        attained = float(np.sum(G * Q))
        nuc = norms(G).nuclear
        nuc_oracle = float(np.linalg.svd(G, compute_uv=False).sum())
        worst_rel = max(worst_rel, abs(attained - nuc) / nuc)
        worst_oracle = max(worst_oracle, abs(nuc - nuc_oracle) / nuc_oracle)
        D = rng.standard_normal((n_dirs, m, n))
        D /= np.linalg.svd(D, compute_uv=False)[:, :1, None]
        gap = np.einsum("ij,tij->t", G, D) - attained
        worst_gap = max(worst_gap, float(gap.max()))
    return [
        Report("polar_attains_nuclear", worst_rel <= 1e-10 and worst_oracle <= 1e-10,
               max(worst_rel, worst_oracle), 1e-10, {"vs_lapack": worst_oracle}),
        Report("polar_dual_optimality", worst_gap <= 1e-9, worst_gap, 1e-9,
               {"matrices": n_matrices, "directions": n_dirs}),
    ]


# ---------------------------------------------------------------------------
# convergence
# ---------------------------------------------------------------------------

def _muon_run(task: SyntheticTask, eta: float, T: int, direction):
    W = task.W0.copy()
    nuclear, l1, eps_seen = [], [], []
    for t in range(T):
        g = task.grad(W)
        nuclear.append(float(np.linalg.svd(g, compute_uv=False).sum()))
        l1.append(float(np.abs(g).sum() / math.sqrt(g.size)))
        Q, err = direction(g)
        eps_seen.append(err)
        W = W - eta * Q
    return np.array(nuclear), np.array(l1), np.array(eps_seen)


def _exact_direction(g):
    if not np.any(g):
        return np.zeros_like(g), 0.0
    return polar_svd(g), 0.0


def verify_deterministic_muon(task: SyntheticTask, T: int = 400) -> list[Report]:
    """Noiseless exact-polar Muon against ``gap / (eta T) + L_* eta / 2``.

    At the rate-optimal stepsize that bound equals ``sqrt(2 L_* gap / T)``;
    ``details["rate_without_sqrt2"]`` carries ``sqrt(L_* gap / T)`` for
    comparison, which the matrix quadratic does not meet.
    """
    eta = theorem_stepsize(task, T)
    nuclear, l1, _ = _muon_run(task, eta, T, _exact_direction)
    gap = task.loss(task.W0) - task.f_star
    bound = gap / (eta * T) + task.L_star * eta / 2.0 + 1e-6
    details = {"eta": eta, "T": T, "rate_without_sqrt2": math.sqrt(task.L_star * gap / T)}
    return [
        Report("muon_deterministic_nuclear", nuclear.mean() <= bound, float(nuclear.mean()),
               bound, details),
        Report("muon_deterministic_l1", l1.mean() <= bound, float(l1.mean()), bound),
    ]


def deterministic_muon_average(task: SyntheticTask, T: int) -> tuple[float, float]:
    """``(mean nuclear norm of the gradient, eta)`` for exact-polar Muon at the optimal stepsize."""
    eta = theorem_stepsize(task, T)
    nuclear, _, _ = _muon_run(task, eta, T, _exact_direction)
    return float(nuclear.mean()), eta


def verify_inexact_muon(task: SyntheticTask, epsilon_bar: float, T: int = 400,
                        seed: int = 0, max_ns_iters: int = 200) -> Report:
    """Muon with Newton-Schulz directions whose polar error stays below ``epsilon_bar``.

    ``K`` is raised per step until ``||Q_t - polar(g_t)||_op <= epsilon_bar``.
    ``epsilon_bar = 0`` uses the exact polar factor.
    """
    if not 0.0 <= epsilon_bar < 1.0:
        raise ValueError("epsilon_bar must lie in [0, 1)")
    eta = theorem_stepsize(task, T)

    def direction(g):
        if epsilon_bar == 0.0 or not np.any(g):
            return _exact_direction(g)
        Q_exact = polar_svd(g)
        for K in range(1, max_ns_iters + 1):
            Q = polar_newton_schulz(g, K, scale="fro")
            err = float(np.linalg.norm(Q - Q_exact, 2))
            if err <= epsilon_bar:
                return Q, err
        raise RuntimeError("Newton-Schulz did not reach the requested accuracy")

    nuclear, _, eps_seen = _muon_run(task, eta, T, direction)
    gap = task.loss(task.W0) - task.f_star
    bound = (gap / (eta * T) + task.L_star * eta / 2.0) / (1.0 - epsilon_bar) + 1e-6
    return Report(f"muon_inexact[eps={epsilon_bar}]", nuclear.mean() <= bound,
                  float(nuclear.mean()), bound, {"max_polar_error": float(eps_seen.max())})


def verify_gradient(task: SyntheticTask, points: int = 100, step: float = 1e-5,
                    seed: int = 0) -> Report:
    """Analytic gradient against central finite differences."""
    rng = np.random.default_rng(seed)
    m, n = task.shape
    worst = 0.0
    for _ in range(points):
        W = rng.standard_normal((m, n)) * 2.0
        fd = np.empty((m, n))
        for i in range(m):
            for j in range(n):
                E = np.zeros((m, n))
                E[i, j] = step
                fd[i, j] = (task.loss(W + E) - task.loss(W - E)) / (2 * step)
        g = task.grad(W)
        worst = max(worst, float(np.linalg.norm(fd - g) / max(np.linalg.norm(g), 1e-300)))
    return Report("gradient_finite_difference", worst <= 1e-6, worst, 1e-6)


@dataclass
class NoiseFloorTable:
    rows: list  # (M, mean G_T, mean noiseless G_T, floor, per-seed floors)

    def floor(self, M: int) -> float:
        for row in self.rows:
            if row[0] == M:
                return row[3]
        raise KeyError(M)

    def ratio(self, M_small: int, M_large: int) -> float:
        return self.floor(M_small) / self.floor(M_large)


def noise_floor_scan(task: SyntheticTask, noise: NoiseModel, M_list, T: int,
                     hp: Hyperparams, seeds, path: str = "allreduce_int8",
                     burn_in: int | None = None) -> NoiseFloorTable:
    """Post-burn-in stationarity versus worker count.

    The floor for each ``M`` is the mean stationarity of the noisy run minus
    that of the identical noiseless run, which isolates the noise-driven term
    from the ``M``-independent optimization term.
    """
    seeds = list(seeds)
    if len(seeds) < 3:
        raise ValueError("need at least 3 seeds")
    burn_in = T // 2 if burn_in is None else burn_in
    rows = []
    for M in M_list:
        noisy_vals, clean_vals = [], []
        for s in seeds:
            nm = NoiseModel(noise.sigma, noise.batch_size, s)
            cm = NoiseModel(0.0, noise.batch_size, s)
            noisy_vals.append(stationarity_metric(run_experiment(task, nm, "sign_muon", M, path, T, hp), burn_in))
            clean_vals.append(stationarity_metric(run_experiment(task, cm, "sign_muon", M, path, T, hp), burn_in))
        floors = [a - b for a, b in zip(noisy_vals, clean_vals)]
        rows.append((M, float(np.mean(noisy_vals)), float(np.mean(clean_vals)),
                     float(np.mean(floors)), floors))
    return NoiseFloorTable(rows)


def gradient_sign_hp(task: SyntheticTask, T: int, tie_policy: str = "zero") -> Hyperparams:
    """Sign-Muon configured as the gradient-sign instantiation.

    With no momentum and zero Newton-Schulz steps the transmitted sign is the
    sign of the stochastic gradient; the update is normalized by ``sqrt(mn)``.
    """
    return Hyperparams(lr=theorem_stepsize(task, T), momentum=0.0, ns_iters=0,
                       ns_scale="fro", direction_mode="normalized",
                       zero_sign_policy="plus_one", vote_tie_policy=tie_policy)


# ---------------------------------------------------------------------------
# suites
# ---------------------------------------------------------------------------

def _suite_linalg(seed: int) -> list[Report]:
    reports = []
    ns_set = ns_test_set(0.9, 20, seed)
    for K in range(1, 6):
        reports.append(verify_ns_error(0.9, K, matrices=ns_set))
    reports += verify_polar_dual(50, 100, seed)

    rng = np.random.default_rng(seed)
    chain_bad, idem, unit = 0, 0.0, 0.0
    for _ in range(200):
        m, n = int(rng.integers(1, 33)), int(rng.integers(1, 25))
        A = rng.standard_normal((m, n))
        r = norms(A)
        if not (r.entrywise_l1 / math.sqrt(m * n) <= r.frobenius * (1 + 1e-12)
                and r.frobenius <= r.nuclear * (1 + 1e-12)
                and r.spectral <= r.frobenius * (1 + 1e-12)):
            chain_bad += 1
        Q = polar_svd(A)
        unit = max(unit, abs(jacobi_svd(Q)[1][0] - 1.0))
        idem = max(idem, float(np.abs(polar_svd(Q) - Q).max()))
    reports.append(Report("norm_inequality_chain", chain_bad == 0, chain_bad, 0))
    reports.append(Report("polar_unit_spectral_norm", unit <= 1e-10, unit, 1e-10))
    reports.append(Report("polar_idempotent", idem <= 1e-9, idem, 1e-9))

    worst_mono, worst_over = 0.0, -np.inf
    for _ in range(50):
        X = rng.standard_normal((int(rng.integers(1, 20)), int(rng.integers(1, 20))))
        true = float(np.linalg.svd(X, compute_uv=False)[0])
        est = [power_iter_spectral(X, P, seed=seed) for P in range(1, 11)]
        worst_mono = max(worst_mono, max(a - b for a, b in zip(est, est[1:] + [est[-1]])))
        worst_over = max(worst_over, max(est) - true)
    reports.append(Report("power_iter_monotone", worst_mono <= 1e-12 * 10, worst_mono, 1e-11))
    reports.append(Report("power_iter_below_true", worst_over <= 1e-9, worst_over, 1e-9))
    return reports


def _suite_collective(seed: int) -> list[Report]:
    reports = []
    rng = np.random.default_rng(seed)
    mismatches, ledger_bad = 0, 0
    for trial in range(1000):
        M = int(rng.choice([2, 3, 5, 8]))
        d = int(rng.integers(1, 258))
        signs = [rng.choice(np.array([-1, 1], dtype=np.int8), size=d) for _ in range(M)]
        la, lg = CommLedger(), CommLedger()
        a = allreduce_sum_int8(signs, la)
        b = allgather_1bit(signs, lg)
        mismatches += int(not np.array_equal(a, b))
        ar = costmodel.iter_time(costmodel.AlphaBetaScenario(0, 0, M, d, 8, "ring", "allreduce"))
        ag = costmodel.iter_time(costmodel.AlphaBetaScenario(0, 0, M, d, 1, "ring", "allgather"))
        ledger_bad += int(la.last.bytes_sent != ar.per_worker_send_bytes
                          or la.last.bytes_recv != ar.per_worker_recv_bytes
                          or lg.last.bytes_sent != ag.per_worker_send_bytes
                          or lg.last.bytes_recv != ag.per_worker_recv_bytes)
    reports.append(Report("path_equivalence", mismatches == 0, mismatches, 0, {"trials": 1000}))
    reports.append(Report("ledger_matches_costmodel", ledger_bad == 0, ledger_bad, 0))

    codec_bad = 0
    for d in range(1, 258):
        for _ in range(100):
            s = rng.choice(np.array([-1, 1], dtype=np.int8), size=d)
            B = pack_bits(s)
            codec_bad += int(len(B.data) != -(-d // 8)
                             or not np.array_equal(unpack_bits(PackedBits.from_bytes(B.to_bytes())), s))
    reports.append(Report("codec_roundtrip", codec_bad == 0, codec_bad, 0))
    caught = 0
    for d in range(1, 64):
        if d % 8 == 0:
            continue
        B = pack_bits(np.ones(d, dtype=np.int8))
        bad = PackedBits(B.data[:-1] + bytes([B.data[-1] | 0x80]), d)
        try:
            unpack_bits(bad)
        except ValueError:
            caught += 1
    expected = sum(1 for d in range(1, 64) if d % 8)
    reports.append(Report("corrupt_padding_detected", caught == expected, expected - caught, 0))

    # M = 1 distributed step against the single-worker step
    diff = 0
    hp = Hyperparams(lr=0.05, momentum=0.9, ns_iters=3, ns_scale="fro", zero_sign_policy="plus_one")
    for path in ("allreduce_int8", "allgather_1bit"):
        W = rng.standard_normal((6, 5))
        s1, s2 = OptimizerState.zeros_like(W), OptimizerState.zeros_like(W)
        W1, W2 = W.copy(), W.copy()
        for _ in range(20):
            G = rng.standard_normal(W.shape)
            W1, _ = step_sign_muon(W1, G, s1, hp)
            W2, _ = distributed_step([W2], [G], [s2], hp, path)
            diff += int(not np.array_equal(W1, W2))
    reports.append(Report("single_worker_equivalence", diff == 0, diff, 0))

    # replicas stay bit-identical
    task = matrix_quadratic(8, 6, seed)
    bad = 0
    for path in ("allreduce_int8", "allgather_1bit"):
        cluster = SimulatedCluster({"W": task.W0, "b": np.zeros(8)}, 5, hp.replace(lr=0.01), path)
        rngs = [worker_rng(seed, m) for m in range(5)]
        for _ in range(500):
            g = task.grad(cluster.params["W"])
            cluster.step([{"W": g + r.standard_normal(g.shape),
                           "b": r.standard_normal((8, 1))} for r in rngs])
            bad += int(not cluster.replicas_consistent())
    reports.append(Report("replica_consistency", bad == 0, bad, 0, {"steps": 500}))

    # sign reliability
    phi = 0.5 * math.erfc(1 / math.sqrt(2))
    r1 = estimate_sign_error(1.0, 1.0, 1, 1, 100_000, seed)
    reports.append(Report("sign_error_M1_vs_gaussian", abs(r1.estimate - phi) <= 3 * r1.standard_error,
                          abs(r1.estimate - phi), 3 * r1.standard_error))
    tail = sum(math.comb(9, k) * phi**k * (1 - phi) ** (9 - k) for k in range(5, 10))
    r9 = estimate_sign_error(1.0, 1.0, 1, 9, 100_000, seed)
    reports.append(Report("sign_error_M9_vs_binomial", abs(r9.estimate - tail) <= 3 * r9.standard_error,
                          abs(r9.estimate - tail), 3 * r9.standard_error))
    prev = None
    for M in (1, 3, 9, 25):
        r = estimate_sign_error(1.0, 1.0, 1, M, 100_000, seed)
        reports.append(Report(f"sign_error_bound[M={M}]", r.passed, r.estimate,
                              r.analytic_bound + 3 * r.standard_error))
        if prev is not None:
            tol = 2 * math.hypot(prev.standard_error, r.standard_error)
            reports.append(Report(f"sign_error_monotone_M[{M}]", r.estimate <= prev.estimate + tol,
                                  r.estimate - prev.estimate, tol))
        prev = r
    prev = None
    for nb in (1, 4, 16):
        r = estimate_sign_error(1.0, 1.0, nb, 1, 100_000, seed)
        if prev is not None:
            tol = 2 * math.hypot(prev.standard_error, r.standard_error)
            reports.append(Report(f"sign_error_monotone_nb[{nb}]", r.estimate <= prev.estimate + tol,
                                  r.estimate - prev.estimate, tol))
        prev = r
    return reports


def _suite_bounds(seed: int) -> list[Report]:
    reports = [verify_gradient(matrix_quadratic(5, 4, seed), 100, 1e-5, seed)]
    reports.append(verify_descent_lemma(matrix_quadratic(6, 4, seed), 10_000, seed))
    task = matrix_quadratic(8, 8, seed)
    reports += verify_deterministic_muon(task, 400)
    for eps in (0.0, 0.5):
        reports.append(verify_inexact_muon(task, eps, 400, seed))

    T = 2000
    big = matrix_quadratic(16, 16, seed)
    table = noise_floor_scan(big, NoiseModel(1.0, 1), [1, 16], T, gradient_sign_hp(big, T),
                             [seed, seed + 1, seed + 2])
    ratio = table.ratio(1, 16)
    reports.append(Report("noise_floor_ratio_M1_M16", 2.0 <= ratio <= 8.0, ratio, 8.0,
                          {"lower": 2.0, "rows": [r[:4] for r in table.rows]}))
    return reports


SUITES = {
    "linalg": _suite_linalg,
    "collective": _suite_collective,
    "bounds": _suite_bounds,
}


def run_suite(name: str, seed: int = 0, jobs: int = 1) -> list[Report]:
    names = list(SUITES) if name == "all" else [name]
    for n in names:
        if n not in SUITES:
            raise ValueError(f"unknown suite {n!r}; choose from {sorted(SUITES)} or 'all'")
    if jobs > 1 and len(names) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda n: SUITES[n](seed), names))
    else:
        results = [SUITES[n](seed) for n in names]
    return [r for group in results for r in group]


def timed_suite(name: str, seed: int = 0, jobs: int = 1) -> tuple[list[Report], float]:
    start = time.perf_counter()
    reports = run_suite(name, seed, jobs)
    return reports, time.perf_counter() - start
