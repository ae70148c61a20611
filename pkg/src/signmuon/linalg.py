"""Dense-matrix kernels: norms, power iteration, Newton-Schulz polar factor.

Everything works on float64 numpy arrays. The exact polar factor and the
nuclear/spectral norms come from a one-sided Jacobi SVD, which doubles as the
reference oracle for the iterative routines.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "NormReport",
    "as_matrix",
    "jacobi_svd",
    "singular_values",
    "norms",
    "power_iter_spectral",
    "polar_newton_schulz",
    "newton_schulz_iterate",
    "polar_svd",
    "sign_entrywise",
]

SCALES = ("spectral", "fro")
ZERO_POLICIES = ("zero", "plus_one")

_JACOBI_TOL = 1e-15
_JACOBI_MAX_SWEEPS = 80


def as_matrix(A, name: str = "matrix") -> np.ndarray:
    """Validate ``A`` as a finite 2-D array and return a float64 view/copy.

    1-D input is promoted to a column (m x 1), the convention used for
    vector-shaped parameter blocks.
    """
    arr = np.asarray(A, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class NormReport:
    frobenius: float
    entrywise_l1: float
    spectral: float
    nuclear: float


def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    # Circle-method tournament: n-1 rounds (n even) of n/2 disjoint pairs, so
    # every column pair meets once per sweep and each round vectorizes.
    players = list(range(n)) if n % 2 == 0 else list(range(n)) + [-1]
    k = len(players)
    rounds = []
    for _ in range(k - 1):
        p, q = [], []
        for i in range(k // 2):
            a, b = players[i], players[k - 1 - i]
            if a >= 0 and b >= 0:
                p.append(min(a, b))
                q.append(max(a, b))
        rounds.append((np.array(p, dtype=np.intp), np.array(q, dtype=np.intp)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def jacobi_svd(X) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD ``X = U @ diag(s) @ Vt`` by one-sided Jacobi rotations.

    Columns of ``X`` (or of ``X.T`` for wide input) are orthogonalized with
    cyclic sweeps of plane rotations until every column pair satisfies
    ``|a_p . a_q| <= 1e-15 * |a_p| |a_q|``. Singular values are returned in
    descending order; ``U`` columns belonging to zero singular values are zero.
    """
    X = as_matrix(X, "X")
    wide = X.shape[0] < X.shape[1]
    # work on X / max|X| so squared column norms neither underflow nor overflow
    amax = float(np.abs(X).max())
    A = (X.T if wide else X) / (amax if amax > 0 else 1.0)
    n = A.shape[1]
    V = np.eye(n)
    rounds = _round_robin(n) if n > 1 else []

    for _ in range(_JACOBI_MAX_SWEEPS):
        rotated = False
        for p, q in rounds:
            ap, aq = A[:, p], A[:, q]
            alpha = np.einsum("ij,ij->j", ap, ap)
            beta = np.einsum("ij,ij->j", aq, aq)
            gamma = np.einsum("ij,ij->j", ap, aq)
            active = np.abs(gamma) > _JACOBI_TOL * np.sqrt(alpha * beta)
            if not np.any(active):
                continue
            rotated = True
            p, q = p[active], q[active]
            alpha, beta, gamma = alpha[active], beta[active], gamma[active]
            with np.errstate(over="ignore"):
                # extreme norm ratios give zeta = inf, i.e. a zero rotation angle
                zeta = (beta - alpha) / (2.0 * gamma)
                t = np.where(zeta >= 0, 1.0, -1.0) / (np.abs(zeta) + np.hypot(1.0, zeta))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = c * t
            ap, aq = A[:, p], A[:, q]
            A[:, p], A[:, q] = c * ap - s * aq, s * ap + c * aq
            vp, vq = V[:, p], V[:, q]
            V[:, p], V[:, q] = c * vp - s * vq, s * vp + c * vq
        if not rotated:
            break

    sv = np.sqrt(np.einsum("ij,ij->j", A, A))
    order = np.argsort(-sv, kind="stable")
    sv, A, V = sv[order], A[:, order], V[:, order]
    U = np.zeros_like(A)
    nz = sv > 0
    U[:, nz] = A[:, nz] / sv[nz]
    sv = sv * amax
    if wide:
        return V, sv, U.T
    return U, sv, V.T


def singular_values(X) -> np.ndarray:
    return jacobi_svd(X)[1]


def norms(A) -> NormReport:
    A = as_matrix(A, "A")
    sv = singular_values(A)
    amax = float(np.abs(A).max())
    fro = amax * float(np.sqrt(np.sum((A / amax) ** 2))) if amax > 0 else 0.0
    return NormReport(
        frobenius=fro,
        entrywise_l1=float(np.sum(np.abs(A))),
        spectral=float(sv[0]),
        nuclear=float(np.sum(sv)),
    )


def power_iter_spectral(X, P: int = 2, eps: float = 1e-12, seed: int = 0) -> float:
    """Estimate ``||X||_op`` with ``P`` rounds of power iteration on ``X^T X``.

    The start vector is a seeded standard-normal draw; every normalization
    divides by ``norm + eps`` so the zero matrix returns 0.
    """
    X = as_matrix(X, "X")
    if P < 1:
        raise ValueError(f"power iterations P must be >= 1, got {P}")
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    v = np.random.default_rng(seed).standard_normal(X.shape[1])
    v /= np.linalg.norm(v) + eps
    for _ in range(P):
        u = X @ v
        u /= np.linalg.norm(u) + eps
        v = X.T @ u
        v /= np.linalg.norm(v) + eps
    return float(np.linalg.norm(X @ v))


def polar_newton_schulz(
    X,
    K: int = 5,
    eps: float = 1e-12,
    scale: str = "spectral",
    P: int = 2,
    seed: int = 0,
) -> np.ndarray:
    """Approximate ``polar(X)`` with ``K`` cubic Newton-Schulz steps.

    ``Y0 = X / max(sigma, eps)`` where sigma is a power-iteration estimate of
    the spectral norm (``scale="spectral"``) or the Frobenius norm
    (``scale="fro"``), then ``Y <- Y (3I - Y^T Y) / 2``. Wide inputs are
    iterated in transposed form so the Gram matrix is the smaller one.
    """
    X = as_matrix(X, "X")
    if K < 0:
        raise ValueError(f"NS iterations K must be >= 0, got {K}")
    if scale not in SCALES:
        raise ValueError(f"scale must be one of {SCALES}, got {scale!r}")
    wide = X.shape[0] < X.shape[1]
    Y = X.T if wide else X

    if scale == "spectral":
        sigma = power_iter_spectral(Y, P, eps, seed)
    else:
        sigma = float(np.sqrt(np.sum(Y * Y)))
    Y = Y / max(sigma, eps)
    if scale == "spectral" and sigma > eps and np.linalg.norm(Y, 2) >= 1.5:
        # Singular values above sqrt(3) flip sign under the cubic; it stays
        # bounded up to sqrt(5), so warn rather than abort a training run.
        warnings.warn("power iteration underestimated ||X||_op by more than 1.5x; "
                      "raise P for this block", RuntimeWarning, stacklevel=2)

    Y = _ns_loop(Y, K)
    return Y.T.copy() if wide else Y


def _ns_loop(Y: np.ndarray, K: int) -> np.ndarray:
    eye3 = 3.0 * np.eye(Y.shape[1])
    for _ in range(K):
        Y = 0.5 * Y @ (eye3 - Y.T @ Y)
    return Y


def newton_schulz_iterate(Y0, K: int) -> np.ndarray:
    """Run ``K`` cubic steps from an already-scaled ``Y0`` (no normalization)."""
    Y0 = as_matrix(Y0, "Y0")
    if K < 0:
        raise ValueError(f"NS iterations K must be >= 0, got {K}")
    if Y0.shape[0] < Y0.shape[1]:
        return _ns_loop(Y0.T, K).T.copy()
    return _ns_loop(Y0, K)


def polar_svd(X) -> np.ndarray:
    """Exact polar factor ``U V^T`` from the thin Jacobi SVD.

    Singular values below ``max(m, n) * eps * sigma_max`` count as zero, so a
    rank-deficient input yields the partial isometry on its range.
    """
    X = as_matrix(X, "X")
    U, sv, Vt = jacobi_svd(X)
    if sv[0] == 0.0:
        raise ValueError("polar undefined for zero matrix")
    keep = sv > max(X.shape) * np.finfo(np.float64).eps * sv[0]
    return U[:, keep] @ Vt[keep, :]


def sign_entrywise(A, zero_policy: str = "zero") -> np.ndarray:
    """Entrywise sign as an int8 matrix; exact zeros follow ``zero_policy``."""
    A = as_matrix(A, "A")
    if zero_policy not in ZERO_POLICIES:
        raise ValueError(f"zero_policy must be one of {ZERO_POLICIES}, got {zero_policy!r}")
    if zero_policy == "plus_one":
        return np.where(A >= 0, 1, -1).astype(np.int8)
    return np.sign(A).astype(np.int8)
