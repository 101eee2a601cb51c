"""Effective-rate (throughput under a queue-tail constraint) estimation.

Variable-rate transmission with error target epsilon has throughput

    R_E = -(1/(theta*n*m)) * ln E_z[ eps + (1-eps)*exp(-theta*n*m*R(z,eps)) ]

where R(z,eps) is the finite-blocklength rate lower bound; the expectation
inside the log is `psi`.  Fixed-rate transmission replaces the summand with
eps(z,R) + (1-eps(z,R))*exp(-theta*n*m*R); that expectation is `phi`.

Expectations are sample averages over a SampleSet of channel realizations.
One SampleSet is reused across all epsilon/rate/theta evaluation points
(common random numbers), so differences between nearby points reflect the
parameters and not fresh sampling noise — argmax detection depends on this.
Exponents are accumulated in log space: psi summands are shifted by the
largest exponent before exponentiation (negative-rate realizations can push
theta*n*m*|R| past the overflow point), and phi is combined through its
complement / logaddexp so both the R -> 0 and theta*n*m*R >> 1 regimes keep
full precision.

Every expectation is reduced by a single deterministic pairwise summation
over a fixed-layout array, so results are independent of how many worker
threads drive the surrounding sweep.

theta = 0 is not evaluated through the formula above (it divides by theta);
`ergodic_rate_variable` / `ergodic_rate_fixed` compute the limiting
throughput E[(1-eps)*R] directly.

For m = 1 under Rayleigh fading the expectation is also available by
Gauss-Laguerre quadrature (the exponential weight matches the gain density),
an independent 200-node oracle used to cross-check the Monte Carlo path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_laguerre

from .channel import FadingModel, SystemParams, draw_gain_matrix
from .errors import ComputationError, DomainError
from .fbl import error_probability_arrays, rate_stats_arrays
from .special import q_inverse, q_inverse_deriv


class SampleSet:
    """Common-random-numbers set of channel realizations.

    `gains` is a (count, m) matrix, one realization per row.  Rate statistics
    (mu, delta) are cached per (snr_linear, n), since optimizers re-evaluate
    the same set at many epsilon/rate points.  `prefix(m)` returns a set that
    shares the leading m blocks of each row — sweeps over m draw one master
    set at the largest m and compare prefixes, so per-realization gains are
    common across the compared block counts.
    """

    def __init__(self, gains: np.ndarray, seed: int | None = None):
        gains = np.ascontiguousarray(gains, dtype=float)
        if gains.ndim != 2 or gains.shape[0] < 1 or gains.shape[1] < 1:
            raise DomainError(f"gains must be a (count, m) matrix, got shape {gains.shape}")
        if not np.all(np.isfinite(gains) & (gains >= 0)):
            raise DomainError("gains must be finite and >= 0")
        gains.setflags(write=False)
        self.gains = gains
        self.seed = seed
        self._stats_cache: dict[tuple[float, int], tuple[np.ndarray, np.ndarray]] = {}

    @property
    def count(self) -> int:
        return self.gains.shape[0]

    @property
    def m(self) -> int:
        return self.gains.shape[1]

    @classmethod
    def draw(cls, model: FadingModel, m: int, count: int, seed: int) -> "SampleSet":
        return cls(draw_gain_matrix(model, m, count, seed), seed=seed)

    def prefix(self, m: int) -> "SampleSet":
        """Set built from the first m blocks of each realization."""
        if not 1 <= m <= self.m:
            raise DomainError(f"prefix length {m} outside 1..{self.m}")
        if m == self.m:
            return self
        return SampleSet(self.gains[:, :m], seed=self.seed)

    def stats(self, params: SystemParams) -> tuple[np.ndarray, np.ndarray]:
        """(mu, delta) arrays for every realization, cached."""
        if params.m != self.m:
            raise DomainError(f"params.m={params.m} does not match sample set m={self.m}")
        key = (params.snr_linear, params.n)
        hit = self._stats_cache.get(key)
        if hit is None:
            hit = rate_stats_arrays(self.gains, params)
            self._stats_cache[key] = hit
        return hit


@dataclass(frozen=True)
class EffectiveRateEstimate:
    """Monte Carlo throughput estimate in bits per channel use."""

    value: float
    std_error: float
    count: int


def _check_epsilon(epsilon: float) -> None:
    if not 0.0 < epsilon < 1.0:
        raise DomainError(f"epsilon must lie in (0,1), got {epsilon!r}")


def _check_theta_positive(params: SystemParams) -> None:
    if params.theta <= 0.0:
        raise DomainError(
            "theta must be > 0 here; use ergodic_rate_* for the theta = 0 limit")


def _check_rate(rate: float) -> None:
    if math.isnan(rate) or rate < 0.0:
        raise DomainError(f"rate must be >= 0, got {rate!r}")


def _psi_summands(epsilon: float, mu: np.ndarray, delta: np.ndarray,
                  params: SystemParams, clamp: bool) -> tuple[np.ndarray, float]:
    """Shifted summands u and shift L with psi = exp(L) * mean(u)."""
    r = mu - delta * q_inverse(epsilon)
    if clamp:
        r = np.maximum(r, 0.0)
    x = (-params.theta * params.nm) * r
    shift = max(float(x.max()), 0.0)
    u = epsilon * math.exp(-shift) + (1.0 - epsilon) * np.exp(x - shift)
    if not np.all(np.isfinite(u)):
        bad = int(np.flatnonzero(~np.isfinite(u))[0])
        raise ComputationError(f"non-finite throughput summand at realization {bad}")
    return u, shift


def log_psi(epsilon: float, samples: SampleSet, params: SystemParams,
            clamp: bool = False) -> float:
    """ln of the psi expectation, finite even where psi overflows a float.

    The optimizer minimizes this (same argmin, monotone transform)."""
    _check_epsilon(epsilon)
    _check_theta_positive(params)
    mu, delta = samples.stats(params)
    u, shift = _psi_summands(epsilon, mu, delta, params, clamp)
    return shift + math.log(float(np.mean(u)))


def psi(epsilon: float, samples: SampleSet, params: SystemParams,
        clamp: bool = False) -> float:
    """Inner expectation E[eps + (1-eps)*exp(-theta*n*m*R(z,eps))].

    Strictly convex in epsilon; its minimizer is the optimal error target.
    Returns inf if the value exceeds float range (the log-space variant used
    everywhere downstream never does).
    """
    lp = log_psi(epsilon, samples, params, clamp)
    return math.exp(lp) if lp < 709.0 else math.inf


def psi_derivative(epsilon: float, samples: SampleSet, params: SystemParams,
                   clamp: bool = False) -> float:
    """Analytic d(psi)/d(epsilon); a diagnostic for stationarity checks.

    Uses the chain rule through the rate lower bound and the inverse-Q
    derivative.  Not used by the optimizers (they are derivative-free); kept
    for verifying |psi'(eps*)| ~ 0 at reported optima.  Realizations pinned
    at zero rate by clamping contribute a zero derivative (their summand is
    constant in epsilon).
    """
    _check_epsilon(epsilon)
    _check_theta_positive(params)
    mu, delta = samples.stats(params)
    r = mu - delta * q_inverse(epsilon)
    a = params.theta * params.nm * delta  # x = a*Qinv(eps) - theta*nm*mu
    if clamp:
        active = r > 0.0
        r = np.maximum(r, 0.0)
    else:
        active = np.ones_like(r, dtype=bool)
    x = (-params.theta * params.nm) * r
    e = np.exp(x)
    term = 1.0 + ((1.0 - epsilon) * a * q_inverse_deriv(epsilon) - 1.0) * e
    return float(np.mean(np.where(active, term, 0.0)))


def effective_rate_variable(epsilon: float, samples: SampleSet, params: SystemParams,
                            clamp: bool = False) -> EffectiveRateEstimate:
    """Throughput of variable-rate transmission at error target epsilon.

    value = -ln(psi)/(theta*n*m); the standard error is propagated from the
    sample variance of the psi summand by the delta method.
    """
    _check_epsilon(epsilon)
    _check_theta_positive(params)
    mu, delta = samples.stats(params)
    u, shift = _psi_summands(epsilon, mu, delta, params, clamp)
    mean_u = float(np.mean(u))
    scale = params.theta * params.nm
    value = -(shift + math.log(mean_u)) / scale
    if u.size > 1:
        rel = float(np.std(u, ddof=1)) / (math.sqrt(u.size) * mean_u)
    else:
        rel = 0.0
    return EffectiveRateEstimate(value, rel / scale, u.size)


def _fixed_rate_means(rate: float, eps_z: np.ndarray) -> tuple[float, float, float]:
    """(mean eps, mean (1-eps), sample std of eps) for the fixed-rate summand."""
    a = float(np.mean(eps_z))
    b = float(np.mean(1.0 - eps_z))
    sd = float(np.std(eps_z, ddof=1)) if eps_z.size > 1 else 0.0
    return a, b, sd


def phi(rate: float, samples: SampleSet, params: SystemParams) -> float:
    """Inner expectation E[eps(z,R) + (1-eps(z,R))*exp(-theta*n*m*R)].

    Equals 1 at R = 0 and tends to 1 as R -> inf; its unique interior
    minimizer is the optimal fixed rate.
    """
    return 1.0 - phi_complement(rate, samples, params)


def phi_complement(rate: float, samples: SampleSet, params: SystemParams) -> float:
    """1 - phi(rate), computed directly.

    The complement keeps full precision where phi is within rounding of 1
    (R near 0 or very large), which matters when counting sign changes of
    grid differences; maximizing it is equivalent to minimizing phi.
    """
    _check_rate(rate)
    _check_theta_positive(params)
    mu, delta = samples.stats(params)
    eps_z = error_probability_arrays(mu, delta, rate)
    decay = -math.expm1(-params.theta * params.nm * rate)
    _, b, _ = _fixed_rate_means(rate, eps_z)
    return decay * b


def effective_rate_fixed(rate: float, samples: SampleSet, params: SystemParams) -> EffectiveRateEstimate:
    """Throughput of fixed-rate transmission at the given rate.

    value = -ln(phi)/(theta*n*m).  ln(phi) is taken through the complement
    when phi is near 1 and through logaddexp of the two mean terms otherwise,
    so R = 0 gives exactly 0 and huge theta*n*m*R cannot underflow to -inf.
    """
    _check_rate(rate)
    _check_theta_positive(params)
    mu, delta = samples.stats(params)
    eps_z = error_probability_arrays(mu, delta, rate)
    t = params.theta * params.nm * rate
    decay = -math.expm1(-t)
    a, b, sd = _fixed_rate_means(rate, eps_z)
    comp = decay * b
    if comp < 0.9:
        log_phi = math.log1p(-comp)
    else:
        log_a = math.log(a) if a > 0.0 else -math.inf
        log_b = math.log(b) if b > 0.0 else -math.inf
        log_phi = float(np.logaddexp(log_a, log_b - t))
    scale = params.theta * params.nm
    value = -log_phi / scale
    if sd == 0.0:
        se = 0.0
    else:
        se = decay * sd / (math.sqrt(eps_z.size) * math.exp(log_phi) * scale)
    return EffectiveRateEstimate(value, se, eps_z.size)


def ergodic_rate_variable(epsilon: float, samples: SampleSet, params: SystemParams,
                          clamp: bool = False) -> EffectiveRateEstimate:
    """theta -> 0 limit of variable-rate throughput: E[(1-eps)*R(z,eps)].

    params.theta is ignored; this is the no-queue-constraint (ergodic) value.
    """
    _check_epsilon(epsilon)
    mu, delta = samples.stats(params)
    r = mu - delta * q_inverse(epsilon)
    if clamp:
        r = np.maximum(r, 0.0)
    y = (1.0 - epsilon) * r
    se = float(np.std(y, ddof=1)) / math.sqrt(y.size) if y.size > 1 else 0.0
    return EffectiveRateEstimate(float(np.mean(y)), se, y.size)


def ergodic_rate_fixed(rate: float, samples: SampleSet, params: SystemParams) -> EffectiveRateEstimate:
    """theta -> 0 limit of fixed-rate throughput: E[(1-eps(z,R))]*R."""
    _check_rate(rate)
    mu, delta = samples.stats(params)
    eps_z = error_probability_arrays(mu, delta, rate)
    y = (1.0 - eps_z) * rate
    se = float(np.std(y, ddof=1)) / math.sqrt(y.size) if y.size > 1 else 0.0
    return EffectiveRateEstimate(float(np.mean(y)), se, y.size)


# ---------------------------------------------------------------------------
# Gauss-Laguerre quadrature oracle (m = 1, Rayleigh fading only)
# ---------------------------------------------------------------------------

_QUAD_NODES = 200


@lru_cache(maxsize=8)
def _laguerre_rule(mean_power: float) -> tuple[np.ndarray, np.ndarray]:
    # E_z f(z) for z ~ Exponential(mean_power) via sum_i w_i f(mean_power*x_i)
    x, w = roots_laguerre(_QUAD_NODES)
    z = mean_power * x
    z.setflags(write=False)
    w.setflags(write=False)
    return z, w


def _quad_stats(params: SystemParams, mean_power: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if params.m != 1:
        raise DomainError("quadrature oracle supports m = 1 only")
    if mean_power <= 0:
        raise DomainError(f"mean_power must be > 0, got {mean_power!r}")
    z, w = _laguerre_rule(float(mean_power))
    mu, delta = rate_stats_arrays(z[:, np.newaxis], params)
    return mu, delta, w


def effective_rate_variable_quadrature(epsilon: float, params: SystemParams,
                                       mean_power: float = 1.0,
                                       clamp: bool = False) -> float:
    """Quadrature counterpart of effective_rate_variable (m = 1, Rayleigh)."""
    _check_epsilon(epsilon)
    _check_theta_positive(params)
    mu, delta, w = _quad_stats(params, mean_power)
    r = mu - delta * q_inverse(epsilon)
    if clamp:
        r = np.maximum(r, 0.0)
    x = (-params.theta * params.nm) * r
    shift = max(float(x.max()), 0.0)
    u = epsilon * math.exp(-shift) + (1.0 - epsilon) * np.exp(x - shift)
    return -(shift + math.log(float(w @ u))) / (params.theta * params.nm)


def effective_rate_fixed_quadrature(rate: float, params: SystemParams,
                                    mean_power: float = 1.0) -> float:
    """Quadrature counterpart of effective_rate_fixed (m = 1, Rayleigh)."""
    _check_rate(rate)
    _check_theta_positive(params)
    mu, delta, w = _quad_stats(params, mean_power)
    eps_z = error_probability_arrays(mu, delta, rate)
    t = params.theta * params.nm * rate
    comp = -math.expm1(-t) * float(w @ (1.0 - eps_z))
    if comp < 0.9:
        log_phi = math.log1p(-comp)
    else:
        a = float(w @ eps_z)
        b = float(w @ (1.0 - eps_z))
        log_phi = float(np.logaddexp(math.log(a) if a > 0 else -math.inf,
                                     (math.log(b) if b > 0 else -math.inf) - t))
    return -log_phi / (params.theta * params.nm)


def ergodic_rate_variable_quadrature(epsilon: float, params: SystemParams,
                                     mean_power: float = 1.0,
                                     clamp: bool = False) -> float:
    """Quadrature counterpart of ergodic_rate_variable (m = 1, Rayleigh)."""
    _check_epsilon(epsilon)
    mu, delta, w = _quad_stats(params, mean_power)
    r = mu - delta * q_inverse(epsilon)
    if clamp:
        r = np.maximum(r, 0.0)
    return float(w @ ((1.0 - epsilon) * r))
