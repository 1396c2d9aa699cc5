"""Unmixing estimators: AMUSE, SOBI, vSOBI, gSOBI and PVC.

All estimators whiten the data first and then search for an orthogonal
rotation, so every returned unmixing matrix G satisfies G S G^T = I for the
sample covariance S of the input. Rows are ordered by a method-specific
criterion (descending) and signs are fixed so the largest-magnitude entry
of each row is positive.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .exceptions import ConvergenceError, LagTooLargeError, SingularMatrixError, ValidationError
from .matrixops import (
    _joint_diagonalize,
    as_time_series,
    autocovariance,
    inv_sqrt,
    whiten,
)


def _validate_lags(lags, n: int | None = None) -> tuple[int, ...]:
    lags = tuple(sorted({int(t) for t in lags}))
    if any(t < 1 for t in lags):
        raise ValidationError(f"lags must be positive integers, got {lags}")
    if n is not None and lags and max(lags) >= n:
        raise LagTooLargeError(f"lag {max(lags)} does not fit in a sample of length {n}")
    return lags


@dataclass(frozen=True)
class LagSets:
    """Lag sets for the linear (t1) and quadratic (t2) parts plus the
    weight b of the linear part."""

    t1: tuple[int, ...]
    t2: tuple[int, ...]
    b: float = 0.9

    def __post_init__(self):
        object.__setattr__(self, "t1", _validate_lags(self.t1))
        object.__setattr__(self, "t2", _validate_lags(self.t2))
        if not 0.0 <= self.b <= 1.0:
            raise ValidationError(f"b must lie in [0, 1], got {self.b}")
        if self.b > 0 and not self.t1:
            raise ValidationError("t1 must be nonempty when b > 0")
        if self.b < 1 and not self.t2:
            raise ValidationError("t2 must be nonempty when b < 1")


@dataclass(frozen=True)
class UnmixingEstimate:
    """Estimated unmixing matrix with convergence metadata.

    ``gamma`` has rows ordered by the method's criterion; ``criterion`` is
    the final objective value; ``eigenvalues`` is populated by the
    eigendecomposition-based methods (AMUSE, PVC); ``near_degenerate``
    flags eigenvalue/criterion gaps too small for reliable identification.
    """

    gamma: np.ndarray
    mean: np.ndarray
    method: str
    iterations: int
    converged: bool
    criterion: float
    eigenvalues: np.ndarray | None = None
    near_degenerate: bool = False

    def transform(self, X) -> np.ndarray:
        """Recover component series from data: s_t = gamma (x_t - mean)."""
        X = as_time_series(X)
        return (X - self.mean) @ self.gamma.T


def _fix_row_signs(gamma: np.ndarray) -> np.ndarray:
    gamma = gamma.copy()
    for row in gamma:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return gamma


def _gap_flag(values: np.ndarray, floor: float) -> bool:
    """Heuristic identifiability flag: consecutive criterion values closer
    than 1e-8, or all values within the sampling-noise floor."""
    v = np.sort(np.abs(np.asarray(values, dtype=float)))[::-1]
    if v.size > 1 and np.min(np.abs(np.diff(v))) < 1e-8:
        return True
    return bool(v[0] < floor)


def amuse(X, lag: int = 1) -> UnmixingEstimate:
    """Unmixing via eigendecomposition of one symmetrized autocovariance."""
    X = as_time_series(X)
    n = X.shape[0]
    (lag,) = _validate_lags([lag], n)
    wres = whiten(X)
    M = autocovariance(wres.whitened, lag, symmetrize=True)
    vals, vecs = np.linalg.eigh(M)
    order = np.argsort(-vals, kind="stable")
    vals = vals[order]
    U = vecs[:, order].T
    gamma = _fix_row_signs(U @ wres.transform)
    return UnmixingEstimate(
        gamma=gamma,
        mean=wres.mean,
        method="amuse",
        iterations=0,
        converged=True,
        criterion=float((vals**2).sum()),
        eigenvalues=vals,
        near_degenerate=_gap_flag(vals, 5.0 / np.sqrt(n)),
    )


def sobi(X, lags=tuple(range(1, 13)), tol: float = 1e-10,
         max_sweeps: int = 100) -> UnmixingEstimate:
    """Unmixing via joint diagonalization of symmetrized autocovariances."""
    X = as_time_series(X)
    n = X.shape[0]
    lags = _validate_lags(lags, n)
    if not lags:
        raise ValidationError("need at least one lag")
    wres = whiten(X)
    mats = [autocovariance(wres.whitened, t, symmetrize=True) for t in lags]
    U, masses, sweeps = _joint_diagonalize(mats, tol=tol, max_sweeps=max_sweeps)
    gamma = _fix_row_signs(U @ wres.transform)
    return UnmixingEstimate(
        gamma=gamma,
        mean=wres.mean,
        method="sobi",
        iterations=sweeps,
        converged=True,
        criterion=float(masses.sum()),
        near_degenerate=_gap_flag(masses, 5.0 * len(lags) / n),
    )


def _lag_stats(Y: np.ndarray, X: np.ndarray, lag: int, quadratic: bool):
    """Per-component lag statistic and estimating-equation vectors.

    Y holds the component series (columns), X the series the equation
    vectors are built from. Sums are normalized by (n - lag). Returns the
    scalar statistics r (or q - 1) per component and the p x p matrix
    whose j-th row is the corresponding expectation vector.
    """
    n = X.shape[0]
    Y0, Y1 = Y[:-lag], Y[lag:]
    X0, X1 = X[:-lag], X[lag:]
    if quadratic:
        stat = (Y0**2 * Y1**2).mean(axis=0) - 1.0
        vecs = (X0.T @ (Y0 * Y1**2) + X1.T @ (Y0**2 * Y1)).T / (n - lag)
    else:
        stat = (Y0 * Y1).mean(axis=0)
        vecs = (X0.T @ Y1 + X1.T @ Y0).T / (n - lag)
    return stat, vecs


def _t_map(U: np.ndarray, Xw: np.ndarray, lags: LagSets) -> np.ndarray:
    """Stacked estimating-equation map: row j is T(u_j) for rows u_j of U."""
    p = U.shape[0]
    Y = Xw @ U.T
    T = np.zeros((p, p))
    if lags.b > 0:
        for t in lags.t1:
            r, vecs = _lag_stats(Y, Xw, t, quadratic=False)
            T += lags.b * r[:, None] * vecs
    if lags.b < 1:
        for t in lags.t2:
            q, vecs = _lag_stats(Y, Xw, t, quadratic=True)
            T += 2.0 * (1.0 - lags.b) * q[:, None] * vecs
    return T


def _objective_contributions(Y: np.ndarray, lags: LagSets) -> np.ndarray:
    """Per-component value of the b-weighted squared-autocovariance
    objective, with sums normalized by (n - lag)."""
    p = Y.shape[1]
    contrib = np.zeros(p)
    for t in lags.t1:
        r = (Y[:-t] * Y[t:]).mean(axis=0)
        contrib += lags.b * r**2
    for t in lags.t2:
        q = (Y[:-t] ** 2 * Y[t:] ** 2).mean(axis=0) - 1.0
        contrib += (1.0 - lags.b) * q**2
    return contrib


def estimating_equation_residual(X, gamma, lags: LagSets) -> float:
    """Maximal asymmetry of the estimating equations at an estimate.

    Returns max_{j,l} |gamma_j' T(gamma_l) - gamma_l' T(gamma_j)| computed
    on centered data; zero at an exact solution.
    """
    X = as_time_series(X)
    Xc = X - X.mean(axis=0)
    gamma = np.asarray(gamma, dtype=float)
    Y = Xc @ gamma.T
    p = gamma.shape[0]
    T = np.zeros((p, p))
    if lags.b > 0:
        for t in lags.t1:
            r, vecs = _lag_stats(Y, Xc, t, quadratic=False)
            T += lags.b * r[:, None] * vecs
    if lags.b < 1:
        for t in lags.t2:
            q, vecs = _lag_stats(Y, Xc, t, quadratic=True)
            T += 2.0 * (1.0 - lags.b) * q[:, None] * vecs
    S = T @ gamma.T  # S[j, l] = T(gamma_j)' gamma_l
    return float(np.abs(S - S.T).max())


def _random_orthogonal(p: int, rng) -> np.ndarray:
    Q, R = np.linalg.qr(rng.standard_normal((p, p)))
    d = np.sign(np.diag(R))
    d[d == 0] = 1.0
    return Q * d


def _pvc_rotation(Xw: np.ndarray, m: int) -> np.ndarray:
    G = sum(kurtosis_matrix(Xw, l) for l in range(1, m + 1))
    vals, vecs = np.linalg.eigh(G)
    return vecs[:, np.argsort(-vals, kind="stable")].T


def gsobi(X, lags: LagSets, init=None, tol: float = 1e-6, max_iter: int = 1000,
          seed: int = 0) -> UnmixingEstimate:
    """Unmixing by a fixed point of the b-weighted estimating equations.

    After whitening, the orthogonal rotation is iterated as
    U <- (T T')^{-1/2} T with T the stacked estimating-equation map,
    rows sign-aligned between iterations. Iteration stops when the
    change of U (Frobenius norm, which bounds the max-abs change) is
    below ``tol`` and the estimating-equation asymmetry is below 10 tol. Initialization: the SOBI rotation when
    b > 0, the PVC rotation otherwise (deterministic and equivariant);
    rank-deficient iterates trigger up to 10 seeded random restarts.
    """
    X = as_time_series(X)
    n, p = X.shape
    if not isinstance(lags, LagSets):
        raise ValidationError("lags must be a LagSets instance")
    _validate_lags(lags.t1 + lags.t2, n)
    wres = whiten(X)
    Xw = wres.whitened

    if init is not None:
        U0 = np.asarray(init, dtype=float)
        if U0.shape != (p, p) or np.abs(U0 @ U0.T - np.eye(p)).max() > 1e-8:
            raise ValidationError("init must be a p x p orthogonal matrix")
    elif p == 1:
        U0 = np.eye(1)
    elif lags.b > 0:
        mats = [autocovariance(Xw, t, symmetrize=True) for t in lags.t1]
        U0, _, _ = _joint_diagonalize(mats)
    else:
        U0 = _pvc_rotation(Xw, max(lags.t2))

    rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0x675F)))
    max_restarts = 10
    U = U0
    iterations = 0
    converged = p == 1
    restarts = 0
    prev_delta = np.inf
    while not converged and iterations < max_iter:
        iterations += 1
        T = _t_map(U, Xw, lags)
        S = T @ U.T
        residual = float(np.abs(S - S.T).max())
        if prev_delta <= tol and residual <= 10.0 * tol:
            converged = True
            break
        try:
            U_new = inv_sqrt(T @ T.T) @ T
        except SingularMatrixError:
            if restarts >= max_restarts:
                raise ConvergenceError(
                    "estimating-equation map is rank deficient; "
                    f"gave up after {max_restarts} restarts",
                    residual=residual,
                )
            restarts += 1
            U = _random_orthogonal(p, rng)
            prev_delta = np.inf
            continue
        # align row signs with the previous iterate to damp sign flips
        flips = np.sign(np.sum(U_new * U, axis=1))
        flips[flips == 0] = 1.0
        U_new *= flips[:, None]
        # Frobenius norm: invariant under the orthogonal basis change a
        # mixing matrix induces, and an upper bound on the max-abs change
        prev_delta = float(np.linalg.norm(U_new - U))
        U = U_new

    contrib = _objective_contributions(Xw @ U.T, lags)
    order = np.argsort(-contrib, kind="stable")
    U = U[order]
    contrib = contrib[order]
    gamma = _fix_row_signs(U @ wres.transform)
    k = lags.b * len(lags.t1) + (1.0 - lags.b) * len(lags.t2)
    return UnmixingEstimate(
        gamma=gamma,
        mean=wres.mean,
        method="gsobi",
        iterations=iterations,
        converged=converged,
        criterion=float(contrib.sum()),
        near_degenerate=_gap_flag(contrib, 5.0 * max(k, 1.0) / n),
    )


def vsobi(X, lags=(1, 2, 3), tol: float = 1e-6, max_iter: int = 1000,
          seed: int = 0) -> UnmixingEstimate:
    """Quadratic-autocovariance unmixing: gSOBI with b = 0."""
    est = gsobi(X, LagSets(t1=(), t2=tuple(lags), b=0.0), tol=tol,
                max_iter=max_iter, seed=seed)
    return replace(est, method="vsobi")


def kurtosis_matrix(Xst, lag: int) -> np.ndarray:
    """Lag-``lag`` generalized kurtosis matrix of standardized data.

    g_l = sum_{i,j} C_{lij} C_{lij}' with C_{lij} the sample covariance of
    x_t x_t' with x_{t-l,i} x_{t-l,j}, both factors centered over the
    overlapping window and normalized by (n - lag). Symmetric positive
    semidefinite by construction and exactly orthogonal equivariant.
    """
    X = as_time_series(Xst)
    n, p = X.shape
    lag = int(lag)
    if lag < 1:
        raise ValidationError(f"lag must be a positive integer, got {lag}")
    if lag >= n - 1:
        raise LagTooLargeError(f"lag {lag} leaves fewer than two usable rows")
    Z = X[lag:]
    L = X[:-lag]
    m = n - lag
    A = (Z[:, :, None] * Z[:, None, :]).reshape(m, p * p)
    B = (L[:, :, None] * L[:, None, :]).reshape(m, p * p)
    A = A - A.mean(axis=0)
    B = B - B.mean(axis=0)
    C = (A.T @ B / m).reshape(p, p, p, p)
    g = np.einsum("abij,cbij->ac", C, C)
    return 0.5 * (g + g.T)


def pvc(X, m: int = 5) -> UnmixingEstimate:
    """Unmixing via the cumulative generalized kurtosis matrix.

    Whitens, accumulates the kurtosis matrices over lags 1..m, and
    eigendecomposes; rows are ordered by descending eigenvalue so the most
    volatility-dependent component comes first.
    """
    X = as_time_series(X)
    n, p = X.shape
    if int(m) < 1:
        raise ValidationError(f"m must be at least 1, got {m}")
    m = int(m)
    wres = whiten(X)
    G = sum(kurtosis_matrix(wres.whitened, l) for l in range(1, m + 1))
    vals, vecs = np.linalg.eigh(G)
    order = np.argsort(-vals, kind="stable")
    vals = vals[order]
    U = vecs[:, order].T
    gamma = _fix_row_signs(U @ wres.transform)
    return UnmixingEstimate(
        gamma=gamma,
        mean=wres.mean,
        method="pvc",
        iterations=0,
        converged=True,
        criterion=float(vals.sum()),
        eigenvalues=vals,
        near_degenerate=_gap_flag(vals, 5.0 * m * p**3 / n),
    )
