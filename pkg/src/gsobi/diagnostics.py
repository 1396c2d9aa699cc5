"""Tests for linear autocorrelation and volatility clustering.

The linear test is a Ljung-Box statistic whose per-lag variance is
estimated under weak assumptions (symmetry and finite fourth moments), so
it keeps its size under conditional heteroscedasticity; the classical test
is recovered by forcing that variance to one. The quadratic test targets
autocorrelation in the squares. Both are asymptotically chi-squared with
one degree of freedom per lag, and both standardize the input internally,
which makes them invariant to affine rescaling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincc

from .exceptions import GsobiError, InsufficientDataError, ValidationError
from .matrixops import as_time_series
from .sim import ArmaParams
from . import modelfit


@dataclass(frozen=True)
class TestResult:
    statistic: float
    df: int
    p_value: float
    per_lag: np.ndarray
    variant: str
    warnings: tuple[str, ...] = ()


def chi2_sf(x: float, df: int) -> float:
    """Upper-tail probability of the chi-squared distribution.

    Evaluated through the regularized upper incomplete gamma function.
    """
    x = float(x)
    if not np.isfinite(x) or x < 0:
        raise ValidationError(f"statistic must be finite and non-negative, got {x}")
    df = int(df)
    if df < 1:
        raise ValidationError(f"degrees of freedom must be positive, got {df}")
    return float(gammaincc(df / 2.0, x / 2.0))


def _standardized(x) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.size < 3:
        raise InsufficientDataError(f"series too short: n={x.size}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("series contains non-finite entries")
    xc = x - x.mean()
    sd = np.sqrt((xc**2).mean())
    if sd <= 0.0:
        raise ValidationError("series has zero variance (degenerate)")
    return xc / sd


def _check_lags(lags, n: int) -> tuple[int, ...]:
    lags = tuple(sorted({int(t) for t in lags}))
    if not lags or lags[0] < 1:
        raise ValidationError(f"need a nonempty set of positive lags, got {lags}")
    if n <= lags[-1] + 2:
        raise InsufficientDataError(
            f"series of length {n} is too short for max lag {lags[-1]}"
        )
    return lags


def _ljung_box(x, lags, k_max: int, use_variance: bool) -> TestResult:
    x = _standardized(x)
    n = x.size
    lags = _check_lags(lags, n)
    per_lag = np.empty(len(lags))
    warnings: list[str] = []
    for i, tau in enumerate(lags):
        u = x[:-tau] * x[tau:]
        r = u.mean()
        if use_variance:
            v = float((u * u).mean())
            for k in range(1, min(k_max, n - tau - 1) + 1):
                v += 2.0 * ((n - k) / n) * float(u[:-k] @ u[k:]) / (n - tau - k)
            if v <= 0.0:
                warnings.append(f"non-positive variance estimate at lag {tau}; used 1")
                v = 1.0
        else:
            v = 1.0
        per_lag[i] = n * r * r / v
    stat = float(per_lag.sum())
    variant = "modified" if use_variance else "classical"
    return TestResult(
        statistic=stat,
        df=len(lags),
        p_value=chi2_sf(stat, len(lags)),
        per_lag=per_lag,
        variant=variant,
        warnings=tuple(warnings),
    )


def ljung_box_modified(x, lags, k_max: int = 20) -> TestResult:
    """Ljung-Box test with a heteroscedasticity-robust per-lag variance.

    The variance estimate sums fourth-moment cross products up to ``k_max``
    (capped at n - lag - 1 for short series) with weights (n - k) / n.
    """
    return _ljung_box(x, lags, k_max, use_variance=True)


def ljung_box_classical(x, lags) -> TestResult:
    """Ljung-Box test with the per-lag variance fixed at one."""
    return _ljung_box(x, lags, 0, use_variance=False)


def vol_clustering_q(x, lags) -> TestResult:
    """Test for autocorrelation of the squares of a standardized series.

    Q = n sum_tau (mean of x_t^2 x_{t+tau}^2 - 1)^2 / 4, chi-squared with
    one degree of freedom per lag under an iid Gaussian null. Apply to
    residuals of a mean model when linear autocorrelation is present.
    """
    x = _standardized(x)
    n = x.size
    lags = _check_lags(lags, n)
    per_lag = np.empty(len(lags))
    for i, tau in enumerate(lags):
        q = float((x[:-tau] ** 2 * x[tau:] ** 2).mean())
        per_lag[i] = n * (q - 1.0) ** 2 / 4.0
    stat = float(per_lag.sum())
    return TestResult(
        statistic=stat,
        df=len(lags),
        p_value=chi2_sf(stat, len(lags)),
        per_lag=per_lag,
        variant="Q",
    )


@dataclass(frozen=True)
class ComponentDiagnostics:
    """Per-component report from the volatility ordering procedure."""

    index: int
    linear_test: TestResult
    arma_order: tuple[int, int] | None
    arma_params: ArmaParams | None
    quadratic_test: TestResult
    volatility_criterion: float
    flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class OrderingResult:
    """Component indices ordered by decreasing volatility clustering."""

    order: tuple[int, ...]
    reports: tuple[ComponentDiagnostics, ...]


def order_by_volatility(components, lags, level: float = 0.05, lags_linear=None,
                        k_max: int = 20, p_max: int = 3, q_max: int = 3) -> OrderingResult:
    """Order component series by the strength of their volatility clustering.

    Each component is tested for linear autocorrelation; when rejected at
    ``level``, an AIC-selected ARMA fit supplies the residuals, otherwise
    the raw series is used. The quadratic test runs on those residuals and
    components are sorted by descending Q statistic, ties broken by the
    original component index. Fit failures are flagged and the raw series
    is used instead.
    """
    X = as_time_series(components)
    p = X.shape[1]
    if lags_linear is None:
        lags_linear = lags
    reports = []
    for j in range(p):
        x = X[:, j]
        flags: list[str] = []
        ltest = ljung_box_modified(x, lags_linear, k_max=k_max)
        residuals = x
        order = None
        params = None
        if ltest.p_value < level:
            try:
                fit = modelfit.arma_select(x, p_max=p_max, q_max=q_max)
                residuals = fit.residuals
                params = fit.params
                order = fit.params.order
            except GsobiError as exc:
                flags.append(f"arma fit failed: {exc}")
        qtest = vol_clustering_q(residuals, lags)
        reports.append(
            ComponentDiagnostics(
                index=j,
                linear_test=ltest,
                arma_order=order,
                arma_params=params,
                quadratic_test=qtest,
                volatility_criterion=4.0 * qtest.statistic / len(residuals),
                flags=tuple(flags),
            )
        )
    ranking = sorted(range(p), key=lambda j: (-reports[j].quadratic_test.statistic, j))
    return OrderingResult(order=tuple(ranking), reports=tuple(reports))
