"""Generation of independent ARMA-GARCH(1,1) sources and their moments.

Provides seeded simulation of GARCH(1,1) innovations and ARMA recursions,
mixing of source panels, closed-form moment-existence conditions, and exact
fourth/sixth moments of GARCH(1,1) innovations used as Monte-Carlo oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .exceptions import DivergentMomentError, ValidationError
from .matrixops import as_time_series

DEFAULT_BURN_IN = 2000


@dataclass(frozen=True)
class GarchParams:
    """GARCH(1,1) parameters with ``alpha + beta < 1`` enforced."""

    alpha: float
    beta: float
    omega: float

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValidationError("alpha and beta must be non-negative")
        if self.omega <= 0:
            raise ValidationError("omega must be positive")
        if self.alpha + self.beta >= 1:
            raise ValidationError(
                f"need alpha + beta < 1 for second-order stationarity, "
                f"got {self.alpha + self.beta}"
            )

    @classmethod
    def unit_variance(cls, alpha: float, beta: float) -> "GarchParams":
        """Parameters with omega = 1 - alpha - beta, so var(z) = 1."""
        return cls(alpha=alpha, beta=beta, omega=1.0 - alpha - beta)

    @property
    def stationary_variance(self) -> float:
        return self.omega / (1.0 - self.alpha - self.beta)


@dataclass(frozen=True)
class ArmaParams:
    """ARMA coefficient bundle; the AR polynomial must be causal."""

    phi: tuple[float, ...] = ()
    theta: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "phi", tuple(float(v) for v in self.phi))
        object.__setattr__(self, "theta", tuple(float(v) for v in self.theta))
        if self.phi:
            # roots of 1 - phi_1 z - ... - phi_p z^p must lie outside the unit circle
            roots = np.roots(np.r_[-np.array(self.phi)[::-1], 1.0])
            if roots.size and np.abs(roots).min() <= 1.0:
                raise ValidationError(
                    f"AR polynomial is not causal (root modulus "
                    f"{np.abs(roots).min():.6f} <= 1)"
                )

    @property
    def order(self) -> tuple[int, int]:
        return len(self.phi), len(self.theta)


@dataclass(frozen=True)
class ComponentSpec:
    """One latent component: optional ARMA dynamics over optional GARCH noise."""

    arma: ArmaParams | None = None
    garch: GarchParams | None = None

    def __post_init__(self):
        if self.arma is None and self.garch is None:
            raise ValidationError("component needs ARMA or GARCH parameters (or both)")


@dataclass(frozen=True)
class SourceSpec:
    """Recipe for a panel of independent unit-variance components."""

    components: tuple[ComponentSpec, ...]
    n: int
    burn_in: int = DEFAULT_BURN_IN
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if not self.components:
            raise ValidationError("need at least one component")
        if self.n < 1:
            raise ValidationError("n must be at least 1")
        if self.burn_in < 0:
            raise ValidationError("burn_in must be non-negative")
        if self.seed < 0:
            raise ValidationError("seed must be non-negative")

    @property
    def p(self) -> int:
        return len(self.components)


def _garch_recursion(params: GarchParams, eps: np.ndarray) -> np.ndarray:
    """Run z_t = sigma_t eps_t from the stationary variance."""
    a, b, w = params.alpha, params.beta, params.omega
    z = np.empty(len(eps))
    s2 = params.stationary_variance
    z_prev = math.sqrt(s2) * eps[0]
    z[0] = z_prev
    for t in range(1, len(eps)):
        s2 = w + a * z_prev * z_prev + b * s2
        z_prev = math.sqrt(s2) * eps[t]
        z[t] = z_prev
    return z


def garch11_simulate(params: GarchParams, n: int, burn_in: int = DEFAULT_BURN_IN,
                     seed: int = 0) -> np.ndarray:
    """Simulate a GARCH(1,1) series of length n after discarding burn-in.

    The recursion starts from the stationary variance and is deterministic
    for a fixed seed.
    """
    if n < 1:
        raise ValidationError("n must be at least 1")
    if burn_in < 0:
        raise ValidationError("burn_in must be non-negative")
    rng = np.random.default_rng(np.random.SeedSequence((int(seed),)))
    eps = rng.standard_normal(burn_in + n)
    return _garch_recursion(params, eps)[burn_in:]


def garch11_simulate_paths(params: GarchParams, n: int, n_paths: int,
                           burn_in: int = DEFAULT_BURN_IN, seed: int = 0) -> np.ndarray:
    """Simulate ``n_paths`` independent GARCH(1,1) paths, shape (n_paths, n).

    Time-major vectorized recursion; used for large Monte-Carlo moment
    checks where independent paths give clean standard errors.
    """
    if n < 1 or n_paths < 1:
        raise ValidationError("n and n_paths must be at least 1")
    rng = np.random.default_rng(np.random.SeedSequence((int(seed),)))
    a, b, w = params.alpha, params.beta, params.omega
    total = burn_in + n
    z = np.empty((total, n_paths))
    s2 = np.full(n_paths, params.stationary_variance)
    z[0] = np.sqrt(s2) * rng.standard_normal(n_paths)
    for t in range(1, total):
        s2 = w + a * z[t - 1] ** 2 + b * s2
        z[t] = np.sqrt(s2) * rng.standard_normal(n_paths)
    return z[burn_in:].T.copy()


def _ma_weight_energy(arma: ArmaParams, tol: float = 1e-14, max_terms: int = 100_000) -> float:
    """Sum of squared MA(infinity) weights of a causal ARMA filter.

    Accumulates the impulse response until the running sum changes by less
    than ``tol`` (capped at ``max_terms`` terms).
    """
    b = np.r_[1.0, arma.theta]
    a = np.r_[1.0, -np.asarray(arma.phi, dtype=float)]
    state = np.zeros(max(len(a), len(b)) - 1)
    total = 0.0
    block = 1024
    emitted = 0
    impulse = np.zeros(block)
    impulse[0] = 1.0
    while emitted < max_terms:
        psi, state = lfilter(b, a, impulse, zi=state)
        increment = float(psi @ psi)
        total += increment
        emitted += block
        if increment < tol:
            break
        impulse = np.zeros(block)
    return total


def arma_stationary_sd(arma: ArmaParams) -> float:
    """Exact stationary standard deviation of a causal ARMA filter driven
    by unit-variance noise."""
    return math.sqrt(_ma_weight_energy(arma))


def armagarch_simulate(spec: SourceSpec) -> np.ndarray:
    """Simulate independent unit-variance ARMA-GARCH components, n x p.

    Each component draws from its own RNG stream derived from the seed and
    the component index, so the output does not depend on evaluation order.
    ARMA components are rescaled by their exact stationary standard
    deviation, which enforces unit MA-weight energy.
    """
    total = spec.burn_in + spec.n
    out = np.empty((spec.n, spec.p))
    for j, comp in enumerate(spec.components):
        rng = np.random.default_rng(np.random.SeedSequence((spec.seed, j)))
        if comp.garch is not None:
            z = _garch_recursion(comp.garch, rng.standard_normal(total))
        else:
            z = rng.standard_normal(total)
        if comp.arma is not None and (comp.arma.phi or comp.arma.theta):
            x = lfilter(np.r_[1.0, comp.arma.theta],
                        np.r_[1.0, -np.asarray(comp.arma.phi)], z)
            x /= arma_stationary_sd(comp.arma)
        else:
            x = z
        out[:, j] = x[spec.burn_in:]
    return out


def mix(S, mixing) -> np.ndarray:
    """Apply a full-rank mixing matrix row-wise: x_t = Omega s_t."""
    S = as_time_series(S)
    Omega = np.asarray(mixing, dtype=float)
    p = S.shape[1]
    if Omega.shape != (p, p):
        raise ValidationError(f"mixing matrix must be {p} x {p}, got {Omega.shape}")
    if not np.all(np.isfinite(Omega)):
        raise ValidationError("mixing matrix contains non-finite entries")
    sv = np.linalg.svd(Omega, compute_uv=False)
    if sv[-1] <= 1e-12 * sv[0]:
        raise ValidationError("mixing matrix is singular")
    return S @ Omega.T


_MOMENT_ORDERS = (2, 4, 6, 8)


def moment_condition(params: GarchParams, order: int) -> bool:
    """Whether the GARCH(1,1) innovations have a finite moment of ``order``."""
    a, b = params.alpha, params.beta
    if order == 2:
        return a + b < 1
    if order == 4:
        return 3 * a**2 + 2 * a * b + b**2 < 1
    if order == 6:
        return 15 * a**3 + 9 * a**2 * b + 3 * a * b**2 + b**3 < 1
    if order == 8:
        return b**4 + 4 * b**3 * a + 18 * b**2 * a**2 + 60 * b * a**3 + 105 * a**4 < 1
    raise ValidationError(f"order must be one of {_MOMENT_ORDERS}, got {order}")


_Z_MOMENT_KINDS = ("E4", "E6", "Cross22", "Cross42", "Cross24")


def _require_moment(params: GarchParams, order: int, kind: str) -> None:
    if not moment_condition(params, order):
        raise DivergentMomentError(
            f"{kind} requires a finite moment of order {order}; condition "
            f"fails for alpha={params.alpha}, beta={params.beta}"
        )


def garch_z_moment(params: GarchParams, kind: str, tau: int | None = None) -> float:
    """Exact moments of GARCH(1,1) innovations z with Gaussian noise.

    Kinds: ``E4`` = E[z_t^4], ``E6`` = E[z_t^6], ``Cross22`` =
    E[z_t^2 z_{t+tau}^2], ``Cross42`` = E[z_t^4 z_{t+tau}^2], ``Cross24`` =
    E[z_t^2 z_{t+tau}^4]; the cross kinds need ``tau`` >= 1. Derived by
    conditioning on the variance recursion; cross moments at lag tau follow
    one-step recursions from their tau = 1 values.
    """
    a, b, w = params.alpha, params.beta, params.omega
    if kind not in _Z_MOMENT_KINDS:
        raise ValidationError(f"kind must be one of {_Z_MOMENT_KINDS}, got {kind!r}")

    def e4() -> float:
        _require_moment(params, 4, "E4")
        return 3.0 * (w * w + 2 * w * (a + b)) / (1 - 3 * a**2 - 2 * a * b - b**2)

    def e6() -> float:
        _require_moment(params, 6, "E6")
        num = 15.0 * (w * w * (w + 3 * a + 3 * b)
                      + w * e4() * (3 * a**2 + 2 * a * b + b**2))
        return num / (1 - 15 * a**3 - 9 * a**2 * b - 3 * a * b**2 - b**3)

    if kind == "E4":
        return e4()
    if kind == "E6":
        return e6()

    if tau is None or int(tau) < 1:
        raise ValidationError(f"{kind} needs a lag tau >= 1, got {tau}")
    tau = int(tau)

    if kind == "Cross22":
        m = w + (a + b / 3.0) * e4()
        for _ in range(tau - 1):
            m = w + (a + b) * m
        return m
    if kind == "Cross42":
        _require_moment(params, 6, kind)
        v = w * e4() + (a + b / 5.0) * e6()
        for _ in range(tau - 1):
            v = w * e4() + (a + b) * v
        return v
    # Cross24: E[z_t^2 sigma_{t+tau}^4] satisfies
    #   c_1 = w^2 + 2w(a + b/3) E4 + (a^2 + 2ab/5 + b^2/15) E6
    #   c_s = w^2 + 2w(a + b) m_{s-1} + (3a^2 + 2ab + b^2) c_{s-1}
    # with m_s = Cross22(s), and E[z_t^2 z_{t+tau}^4] = 3 c_tau.
    _require_moment(params, 6, kind)
    c = w * w + 2 * w * (a + b / 3.0) * e4() + (a**2 + 2 * a * b / 5.0 + b**2 / 15.0) * e6()
    m = w + (a + b / 3.0) * e4()
    for _ in range(tau - 1):
        c = w * w + 2 * w * (a + b) * m + (3 * a**2 + 2 * a * b + b**2) * c
        m = w + (a + b) * m
    return 3.0 * c
