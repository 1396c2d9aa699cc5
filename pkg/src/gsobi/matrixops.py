"""Dense symmetric-matrix primitives shared by the estimators.

Sample (auto)covariances, symmetric inverse square roots, whitening, and
orthogonal approximate joint diagonalization by cyclic Jacobi rotations.
All functions are pure and operate on plain float64 numpy arrays; a time
series is an n x p matrix whose rows index time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import (
    ConvergenceError,
    InsufficientDataError,
    LagTooLargeError,
    SingularMatrixError,
    ValidationError,
)


def as_time_series(X) -> np.ndarray:
    """Validate and return an n x p float64 time-series matrix.

    A 1-D input is treated as a single column. Requires n >= 2, p >= 1
    and finite entries.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValidationError(f"time series must be 1-D or 2-D, got shape {X.shape}")
    n, p = X.shape
    if n < 2 or p < 1:
        raise InsufficientDataError(f"need n >= 2 rows and p >= 1 columns, got n={n}, p={p}")
    if not np.all(np.isfinite(X)):
        raise ValidationError("time series contains non-finite entries")
    return X


def check_symmetric(A, rtol: float = 1e-12) -> np.ndarray:
    """Validate that ``A`` is a finite square symmetric matrix."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValidationError("matrix contains non-finite entries")
    scale = max(np.abs(A).max(), 1.0)
    if np.abs(A - A.T).max() > rtol * scale:
        raise ValidationError("matrix is not symmetric within tolerance")
    return A


@dataclass(frozen=True)
class WhiteningResult:
    """Standardized data together with the transform that produced it.

    ``whitened`` has exactly zero column means and identity sample
    covariance; ``transform`` is the symmetric inverse square root of the
    sample covariance of the input; ``mean`` is the subtracted mean row.
    """

    whitened: np.ndarray
    transform: np.ndarray
    mean: np.ndarray


def sample_covariance(X) -> np.ndarray:
    """Sample covariance with divisor n, exactly symmetric by construction."""
    X = as_time_series(X)
    n = X.shape[0]
    Xc = X - X.mean(axis=0)
    S = Xc.T @ Xc / n
    return 0.5 * (S + S.T)


def autocovariance(X, lag: int, symmetrize: bool = True) -> np.ndarray:
    """Sample lag-``lag`` autocovariance matrix with divisor (n - lag).

    The input is centered internally. With ``symmetrize`` the result is
    replaced by half the sum with its transpose, which is the form used
    for joint diagonalization.
    """
    X = as_time_series(X)
    n = X.shape[0]
    lag = int(lag)
    if lag < 1:
        raise ValidationError(f"lag must be a positive integer, got {lag}")
    if lag >= n:
        raise LagTooLargeError(f"lag {lag} does not fit in a sample of length {n}")
    Xc = X - X.mean(axis=0)
    S = Xc[:-lag].T @ Xc[lag:] / (n - lag)
    if symmetrize:
        S = 0.5 * (S + S.T)
    return S


def inv_sqrt(A) -> np.ndarray:
    """Symmetric inverse square root B of an SPD matrix, B A B = I.

    Raises ``SingularMatrixError`` naming the offending eigenvalue when the
    smallest eigenvalue is below 1e-12 times the largest.
    """
    A = check_symmetric(A)
    w, V = np.linalg.eigh(A)
    lo, hi = float(w[0]), float(w[-1])
    if hi <= 0.0 or lo <= 1e-12 * hi:
        raise SingularMatrixError(
            f"matrix is not positive definite: smallest eigenvalue {lo:.6e} "
            f"(largest {hi:.6e})",
            eigenvalue=lo,
        )
    B = (V / np.sqrt(w)) @ V.T
    return 0.5 * (B + B.T)


def whiten(X) -> WhiteningResult:
    """Center and rotate data to zero mean and identity sample covariance."""
    X = as_time_series(X)
    mean = X.mean(axis=0)
    W = inv_sqrt(sample_covariance(X))
    return WhiteningResult(whitened=(X - mean) @ W, transform=W, mean=mean)


def _off_diagonal_mass(mats: np.ndarray) -> float:
    """Sum of squared off-diagonal entries over a (K, p, p) stack."""
    p = mats.shape[-1]
    mask = ~np.eye(p, dtype=bool)
    return float((mats[:, mask] ** 2).sum())


def _order_and_sign(U: np.ndarray, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Order rows of U by descending ``values`` and fix row signs.

    The largest-magnitude entry of each row is made positive; ties in both
    orderings resolve to the lowest index, so the output is deterministic.
    """
    idx = np.argsort(-values, kind="stable")
    U = U[idx]
    values = values[idx]
    for row in U:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return U, values


def joint_diagonalize(matrices, tol: float = 1e-10, max_sweeps: int = 100) -> np.ndarray:
    """Orthogonal U making a family of symmetric matrices jointly diagonal.

    Cyclic Jacobi sweeps with the closed-form Givens angle that minimizes
    the off-diagonal mass summed over all matrices. Stops when every
    rotation angle in a sweep is at most ``tol``. Rows of U are ordered by
    descending sum of squared transformed diagonals, signs fixed so each
    row's largest-magnitude entry is positive.
    """
    U, _, _ = _joint_diagonalize(matrices, tol, max_sweeps)
    return U


def _joint_diagonalize(matrices, tol=1e-10, max_sweeps=100):
    mats = [check_symmetric(M) for M in matrices]
    if not mats:
        raise ValidationError("need at least one matrix to diagonalize")
    p = mats[0].shape[0]
    for M in mats:
        if M.shape[0] != p:
            raise ValidationError("all matrices must have the same shape")
    M = np.array(mats, dtype=float)
    U = np.eye(p)

    sweeps = 0
    if p > 1:
        for sweeps in range(1, max_sweeps + 1):
            max_angle = 0.0
            for i in range(p - 1):
                for j in range(i + 1, p):
                    d = M[:, i, i] - M[:, j, j]
                    o = M[:, i, j] + M[:, j, i]  # = 2 * off-diagonal
                    ton = float(d @ d - o @ o)
                    toff = 2.0 * float(d @ o)
                    theta = 0.5 * np.arctan2(toff, ton + np.hypot(ton, toff))
                    if abs(theta) <= tol:
                        continue
                    max_angle = max(max_angle, abs(theta))
                    c, s = np.cos(theta), np.sin(theta)
                    # M <- R M R^T in the (i, j) plane, applied to the stack.
                    rows_i = c * M[:, i, :] + s * M[:, j, :]
                    rows_j = -s * M[:, i, :] + c * M[:, j, :]
                    M[:, i, :], M[:, j, :] = rows_i, rows_j
                    cols_i = c * M[:, :, i] + s * M[:, :, j]
                    cols_j = -s * M[:, :, i] + c * M[:, :, j]
                    M[:, :, i], M[:, :, j] = cols_i, cols_j
                    row_i = c * U[i] + s * U[j]
                    row_j = -s * U[i] + c * U[j]
                    U[i], U[j] = row_i, row_j
            if max_angle <= tol:
                break
        else:
            raise ConvergenceError(
                f"joint diagonalization did not converge in {max_sweeps} sweeps",
                residual=_off_diagonal_mass(M),
            )

    masses = (np.diagonal(M, axis1=1, axis2=2) ** 2).sum(axis=0)
    U, masses = _order_and_sign(U, masses)
    return U, masses, sweeps
