"""Blind source separation of stationary time series.

Combines linear and quadratic autocovariances to unmix latent ARMA-GARCH
components, with tests for linear autocorrelation and volatility
clustering, model fitting for residual extraction, a minimum distance
index for scoring against a known mixing, and a reproducible simulation
study runner.
"""

from .diagnostics import (
    ComponentDiagnostics,
    OrderingResult,
    TestResult,
    chi2_sf,
    ljung_box_classical,
    ljung_box_modified,
    order_by_volatility,
    vol_clustering_q,
)
from .estimators import (
    LagSets,
    UnmixingEstimate,
    amuse,
    estimating_equation_residual,
    gsobi,
    kurtosis_matrix,
    pvc,
    sobi,
    vsobi,
)
from .exceptions import (
    ConvergenceError,
    DivergentMomentError,
    GsobiError,
    InsufficientDataError,
    LagTooLargeError,
    ModelFitError,
    SingularMatrixError,
    ValidationError,
)
from .matrixops import (
    WhiteningResult,
    autocovariance,
    inv_sqrt,
    joint_diagonalize,
    sample_covariance,
    whiten,
)
from .metrics import mdi, scaled_mdi
from .modelfit import ArmaFit, GarchFit, arma_fit, arma_select, garch11_fit, garch11_loglik
from .sim import (
    ArmaParams,
    ComponentSpec,
    GarchParams,
    SourceSpec,
    armagarch_simulate,
    garch11_simulate,
    garch11_simulate_paths,
    garch_z_moment,
    mix,
    moment_condition,
)
from .study import (
    MethodSpec,
    StudyConfig,
    StudyResult,
    builtin_components,
    expected_volatility_order,
    run_study,
)

__version__ = "0.1.0"

__all__ = [
    "ArmaFit",
    "ArmaParams",
    "ComponentDiagnostics",
    "ComponentSpec",
    "ConvergenceError",
    "DivergentMomentError",
    "GarchFit",
    "GarchParams",
    "GsobiError",
    "InsufficientDataError",
    "LagSets",
    "LagTooLargeError",
    "MethodSpec",
    "ModelFitError",
    "OrderingResult",
    "SingularMatrixError",
    "SourceSpec",
    "StudyConfig",
    "StudyResult",
    "TestResult",
    "UnmixingEstimate",
    "ValidationError",
    "WhiteningResult",
    "amuse",
    "arma_fit",
    "arma_select",
    "armagarch_simulate",
    "autocovariance",
    "builtin_components",
    "chi2_sf",
    "estimating_equation_residual",
    "expected_volatility_order",
    "garch11_fit",
    "garch11_loglik",
    "garch11_simulate",
    "garch11_simulate_paths",
    "garch_z_moment",
    "gsobi",
    "inv_sqrt",
    "joint_diagonalize",
    "kurtosis_matrix",
    "ljung_box_classical",
    "ljung_box_modified",
    "mdi",
    "mix",
    "moment_condition",
    "order_by_volatility",
    "pvc",
    "run_study",
    "sample_covariance",
    "scaled_mdi",
    "sobi",
    "vol_clustering_q",
    "whiten",
    "__version__",
]
