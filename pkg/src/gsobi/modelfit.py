"""Univariate ARMA and GARCH(1,1) fitting for residual extraction.

ARMA fitting minimizes the conditional sum of squares with a zero
pre-sample convention, starting from Hannan-Rissanen estimates and refined
by a Nelder-Mead search over a reparameterization that maps unconstrained
reals to causal/invertible coefficients through partial autocorrelations.
GARCH(1,1) fitting maximizes the Gaussian quasi-likelihood over a
similarly constrained parameterization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter

from .exceptions import InsufficientDataError, ModelFitError, ValidationError
from .sim import ArmaParams, GarchParams


@dataclass(frozen=True)
class ArmaFit:
    params: ArmaParams
    sigma2: float
    aic: float
    residuals: np.ndarray
    converged: bool


@dataclass(frozen=True)
class GarchFit:
    params: GarchParams
    loglik: float
    volatility: np.ndarray
    converged: bool
    flags: tuple[str, ...] = ()


def _as_series(x) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise ValidationError("series contains non-finite entries")
    return x


def _pacf_to_coeffs(r: np.ndarray) -> np.ndarray:
    """Levinson-Durbin map from partial autocorrelations in (-1, 1) to the
    coefficients of a polynomial 1 - sum a_i z^i with roots outside the
    unit circle."""
    a = np.empty(0)
    for k, rk in enumerate(r):
        prev = a
        a = np.empty(k + 1)
        a[k] = rk
        if k:
            a[:k] = prev - rk * prev[::-1]
    return a


def _coeffs_to_pacf(a: np.ndarray) -> np.ndarray:
    """Inverse Levinson-Durbin; out-of-range reflections are clipped so an
    arbitrary initializer still maps into the stationary region."""
    a = np.asarray(a, dtype=float)
    r = np.empty(len(a))
    for k in range(len(a), 0, -1):
        rk = a[k - 1]
        if abs(rk) >= 1.0:
            rk = math.copysign(0.95, rk)
        r[k - 1] = rk
        a = (a[: k - 1] + rk * a[: k - 1][::-1]) / (1.0 - rk * rk)
    return r


def _unpack_arma(u: np.ndarray, p: int, q: int) -> tuple[np.ndarray, np.ndarray]:
    phi = _pacf_to_coeffs(np.tanh(u[:p]))
    theta = -_pacf_to_coeffs(np.tanh(u[p:]))
    return phi, theta


def _pack_arma(phi: np.ndarray, theta: np.ndarray) -> np.ndarray:
    r_ar = np.clip(_coeffs_to_pacf(phi), -0.995, 0.995)
    r_ma = np.clip(_coeffs_to_pacf(-np.asarray(theta)), -0.995, 0.995)
    return np.arctanh(np.r_[r_ar, r_ma])


def _css_residuals(x: np.ndarray, phi, theta) -> np.ndarray:
    """Innovations under the zero pre-sample convention, same length as x."""
    return lfilter(np.r_[1.0, -np.asarray(phi, dtype=float)],
                   np.r_[1.0, np.asarray(theta, dtype=float)], x)


def _lagged_design(x: np.ndarray, p: int) -> np.ndarray:
    """Zero-padded lag matrix, column i holds x shifted down by i + 1."""
    n = x.size
    D = np.zeros((n, p))
    for i in range(1, p + 1):
        D[i:, i - 1] = x[:-i]
    return D


def _hannan_rissanen(x: np.ndarray, p: int, q: int,
                     long_resid: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Two-stage regression initializer for the CSS search."""
    if q == 0:
        # pure AR: the zero-presample CSS optimum is ordinary least squares
        D = _lagged_design(x, p)
        phi, *_ = np.linalg.lstsq(D, x, rcond=None)
        return phi, np.empty(0)
    if long_resid is None:
        long_resid = long_ar_residuals(x, _long_ar_order(x.size, p, q))
    D = np.hstack([_lagged_design(x, p), _lagged_design(long_resid, q)])
    coef, *_ = np.linalg.lstsq(D, x, rcond=None)
    return coef[:p], coef[p:]


def _long_ar_order(n: int, p: int, q: int) -> int:
    return min(max(10, 2 * (p + q)), n // 4)


def long_ar_residuals(x: np.ndarray, h: int) -> np.ndarray:
    """Residuals of a long autoregression, used to proxy the innovations."""
    D = _lagged_design(x, h)
    coef, *_ = np.linalg.lstsq(D, x, rcond=None)
    return x - D @ coef


def arma_fit(x, p: int, q: int, restarts: int = 3, seed: int = 0,
             _long_resid: np.ndarray | None = None) -> ArmaFit:
    """Conditional-sum-of-squares ARMA(p, q) fit.

    Residuals keep the input length (zero pre-sample convention) and
    AIC = n log(sigma2) + 2 (p + q + 1). Random restarts (seeded) run only
    when the Hannan-Rissanen-initialized search fails to converge.
    """
    x = _as_series(x)
    n = x.size
    if not (0 <= p <= 5 and 0 <= q <= 5):
        raise ValidationError(f"orders must satisfy 0 <= p, q <= 5, got ({p}, {q})")
    if n <= 10 * (p + q + 1):
        raise InsufficientDataError(
            f"need n > {10 * (p + q + 1)} observations for ARMA({p},{q}), got {n}"
        )
    xc = x - x.mean()
    if p == 0 and q == 0:
        sigma2 = float((xc**2).mean())
        return ArmaFit(
            params=ArmaParams(),
            sigma2=sigma2,
            aic=n * math.log(max(sigma2, 1e-300)) + 2.0,
            residuals=xc,
            converged=True,
        )

    D = _lagged_design(xc, p)
    ma_head = np.ones(1)
    ma_poly = np.empty(q + 1)
    ma_poly[0] = 1.0

    def objective(u):
        phi, theta = _unpack_arma(u, p, q)
        w = xc - D @ phi if p else xc
        if q:
            ma_poly[1:] = theta
            z = lfilter(ma_head, ma_poly, w)
        else:
            z = w
        return float(z @ z)

    phi0, theta0 = _hannan_rissanen(xc, p, q, _long_resid)
    u0 = _pack_arma(phi0, theta0)
    scale = max(float(xc @ xc), 1e-12)
    options = {"maxfev": 150 * (p + q + 1), "fatol": 1e-8 * scale, "xatol": 1e-4}

    rng = np.random.default_rng(np.random.SeedSequence((int(seed), p, q, 0xA12A)))
    f0 = objective(u0)
    best = minimize(objective, u0, method="Nelder-Mead", options=options)
    # random restarts only when the search failed outright; exhausting the
    # budget along a flat overparameterization valley still improves f
    attempts = 0
    while attempts < restarts and not best.success and not best.fun < f0:
        attempts += 1
        trial = minimize(objective, u0 + rng.normal(scale=0.5, size=u0.size),
                         method="Nelder-Mead", options=options)
        if trial.fun < best.fun or (trial.success and not best.success):
            best = trial

    phi, theta = _unpack_arma(best.x, p, q)
    residuals = _css_residuals(xc, phi, theta)
    sigma2 = float(residuals @ residuals) / n
    return ArmaFit(
        params=ArmaParams(phi=tuple(phi), theta=tuple(theta)),
        sigma2=sigma2,
        aic=n * math.log(max(sigma2, 1e-300)) + 2.0 * (p + q + 1),
        residuals=residuals,
        converged=bool(best.success),
    )


def arma_select(x, p_max: int = 3, q_max: int = 3, restarts: int = 3,
                seed: int = 0) -> ArmaFit:
    """Fit all orders on the (p_max, q_max) grid and keep the minimum AIC.

    Ties resolve to the smaller p + q, then the smaller p; the long-AR
    residuals feeding the initializers are computed once per series.
    """
    x = _as_series(x)
    xc = x - x.mean()
    long_resid = long_ar_residuals(xc, _long_ar_order(x.size, p_max, q_max))
    best = None
    best_key = None
    errors = []
    for p in range(p_max + 1):
        for q in range(q_max + 1):
            try:
                fit = arma_fit(x, p, q, restarts=restarts, seed=seed,
                               _long_resid=long_resid)
            except (ValidationError, InsufficientDataError) as exc:
                errors.append(f"ARMA({p},{q}): {exc}")
                continue
            key = (fit.aic, p + q, p)
            if best_key is None or key < best_key:
                best, best_key = fit, key
    if best is None:
        raise ModelFitError("all ARMA fits failed: " + "; ".join(errors))
    return best


def garch11_volatility(x, params: GarchParams, init_var: float | None = None) -> np.ndarray:
    """Conditional variance series of a GARCH(1,1) recursion on centered x.

    The pre-sample squared value and variance are both set to ``init_var``
    (sample variance when omitted), so sigma2_1 = omega + (alpha + beta)
    init_var; the recursion then runs forward over the sample.
    """
    x = _as_series(x)
    if init_var is None:
        init_var = float(np.var(x))
    d = np.empty(x.size)
    d[0] = params.omega + (params.alpha + params.beta) * init_var
    d[1:] = params.omega + params.alpha * x[:-1] ** 2
    return lfilter([1.0], [1.0, -params.beta], d)


def garch11_loglik(x, params: GarchParams, init_var: float | None = None) -> float:
    """Gaussian quasi-log-likelihood -(1/2) sum(log s2_t + x_t^2 / s2_t)."""
    x = _as_series(x)
    s2 = garch11_volatility(x, params, init_var)
    return -0.5 * float(np.sum(np.log(s2) + x * x / s2))


def _sigmoid(v: float) -> float:
    return 1.0 / (1.0 + math.exp(-v))


def garch11_fit(x, restarts: int = 3, boundary: float = 0.999) -> GarchFit:
    """Quasi-maximum-likelihood GARCH(1,1) fit with volatility extraction.

    Derivative-free search over (omega, alpha, beta) through an
    exponential/logistic reparameterization that enforces omega > 0,
    alpha, beta >= 0 and alpha + beta < 1. Solutions with persistence above
    ``boundary`` are flagged; the returned volatility series has the same
    length as the input.
    """
    x = _as_series(x)
    n = x.size
    if n < 200:
        raise InsufficientDataError(f"need at least 200 observations, got {n}")
    xc = x - x.mean()
    s_var = float(np.var(xc))
    if s_var <= 0:
        raise ValidationError("series has zero variance")

    def unpack(u) -> GarchParams:
        persistence = _sigmoid(u[1]) * 0.9999
        share = _sigmoid(u[2])
        return GarchParams(
            alpha=persistence * share,
            beta=persistence * (1.0 - share),
            omega=math.exp(u[0]),
        )

    def neg_loglik(u):
        try:
            params = unpack(u)
        except (OverflowError, ValidationError):
            return np.inf
        s2 = garch11_volatility(xc, params, s_var)
        if np.any(s2 <= 0) or not np.all(np.isfinite(s2)):
            return np.inf
        return 0.5 * float(np.sum(np.log(s2) + xc * xc / s2))

    def pack(alpha, beta):
        persistence = alpha + beta
        return np.array([
            math.log(s_var * max(1.0 - persistence, 1e-4)),
            math.log(persistence / (1.0 - persistence)),
            math.log(alpha / beta) if beta > 0 else 5.0,
        ])

    inits = [(0.10, 0.80), (0.05, 0.90), (0.20, 0.60), (0.02, 0.50)]
    options = {"maxfev": 2000, "fatol": 1e-8 * n, "xatol": 1e-7}
    best = None
    for a0, b0 in inits[: restarts + 1]:
        res = minimize(neg_loglik, pack(a0, b0), method="Nelder-Mead", options=options)
        if best is None or res.fun < best.fun:
            best = res
        if best.success:
            break

    params = unpack(best.x)
    flags = []
    if params.alpha + params.beta > boundary:
        flags.append("boundary: persistence above 0.999")
    if not best.success:
        flags.append("optimizer did not converge")
    s2 = garch11_volatility(xc, params, s_var)
    return GarchFit(
        params=params,
        loglik=-float(best.fun),
        volatility=np.sqrt(s2),
        converged=bool(best.success),
        flags=tuple(flags),
    )
