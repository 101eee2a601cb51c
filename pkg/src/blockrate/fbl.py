"""Finite-blocklength rate statistics for codewords spanning m fading blocks.

For gains z and linear SNR, the per-codeword mutual-information density has
mean and standard deviation

    mu    = (1/m) * sum_l log2(1 + SNR*z_l)
    delta = log2(e) * sqrt((1/m) * sum_l 2*SNR*z_l / (nm*(1 + SNR*z_l)))

in bits per channel use.  A decoding error probability target epsilon buys
the rate lower bound R = mu - delta*Q^{-1}(epsilon); conversely a fixed rate
R fails with probability Q((mu - R)/delta).  The Gaussian model behind these
formulas is validated here by an exact sampler: the centered density equals
a weighted sum of nm i.i.d. Laplace variates (zero mean, variance 2), drawn
by inverse CDF.

R can be negative for small epsilon and deep fades; the formula is evaluated
as printed by default, and `clamp` floors it at zero (zero service).  The
vanishing-parameter terms of the underlying achievability bound (the
constraint-set and e^{-nm*gamma} corrections) are neglected throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import SystemParams, substream, uniform_windows
from .errors import DomainError
from .special import q_function, q_inverse

LOG2E = math.log2(math.e)


@dataclass(frozen=True)
class RateStats:
    """Mean rate and dispersion (both bits per channel use) of one realization."""

    mu: float
    delta: float


@dataclass(frozen=True)
class VariableRate:
    """Transmitter knows z and picks the rate meeting error target epsilon.

    epsilon=None asks sweep/optimizer drivers to optimize it.  clamp_negative
    floors negative rate realizations at zero service.
    """

    epsilon: float | None = None
    clamp_negative: bool = False

    def __post_init__(self):
        if self.epsilon is not None and not 0.0 < self.epsilon < 1.0:
            raise DomainError(f"epsilon must lie in (0,1), got {self.epsilon!r}")

    def describe(self) -> str:
        target = "optimized-epsilon" if self.epsilon is None else f"epsilon={self.epsilon!r}"
        suffix = ", clamped" if self.clamp_negative else ""
        return f"variable-rate({target}{suffix})"


@dataclass(frozen=True)
class FixedRate:
    """Transmitter is blind to z and sends at a constant rate (bits/use).

    rate=None asks sweep/optimizer drivers to optimize it.
    """

    rate: float | None = None

    def __post_init__(self):
        if self.rate is not None and not (np.isfinite(self.rate) and self.rate >= 0):
            raise DomainError(f"rate must be finite and >= 0, got {self.rate!r}")

    def describe(self) -> str:
        target = "optimized-rate" if self.rate is None else f"rate={self.rate!r}"
        return f"fixed-rate({target})"


RatePolicy = VariableRate | FixedRate


def _check_realization(z: np.ndarray, params: SystemParams) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or z.size != params.m:
        raise DomainError(f"realization has length {z.size}, need m={params.m}")
    if not np.all(np.isfinite(z) & (z >= 0)):
        raise DomainError("gains must be finite and >= 0")
    return z


def rate_stats_arrays(gains: np.ndarray, params: SystemParams) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized (mu, delta) for a (count, m) gain matrix."""
    gains = np.asarray(gains, dtype=float)
    if gains.ndim != 2 or gains.shape[1] != params.m:
        raise DomainError(f"gain matrix width {gains.shape} does not match m={params.m}")
    s = params.snr_linear * gains
    mu = LOG2E * np.mean(np.log1p(s), axis=1)
    frac = s / (1.0 + s)
    delta = LOG2E * np.sqrt(frac.sum(axis=1) * (2.0 / (params.n * params.m * params.m)))
    return mu, delta


def rate_stats(z: np.ndarray, params: SystemParams) -> RateStats:
    """Mean rate and dispersion of the mutual-information density for gains z."""
    z = _check_realization(z, params)
    mu, delta = rate_stats_arrays(z[np.newaxis, :], params)
    return RateStats(float(mu[0]), float(delta[0]))


def rate_lower_bound(z: np.ndarray, params: SystemParams, epsilon: float,
                     clamp: bool = False) -> float:
    """Rate (bits/use) decodable with error probability epsilon; may be
    negative unless clamp=True."""
    if not 0.0 < epsilon < 1.0:
        raise DomainError(f"epsilon must lie in (0,1), got {epsilon!r}")
    st = rate_stats(z, params)
    r = st.mu - st.delta * q_inverse(epsilon)
    return max(r, 0.0) if clamp else r


def error_probability(z: np.ndarray, params: SystemParams, rate: float) -> float:
    """Decoding error probability Q((mu - rate)/delta) at a fixed rate.

    Degenerate all-zero gains (delta = 0) use the limit convention
    0 / 0.5 / 1 for rate below / at / above mu.
    """
    if math.isnan(rate) or rate < 0:
        raise DomainError(f"rate must be >= 0, got {rate!r}")
    st = rate_stats(z, params)
    if st.delta == 0.0:
        if rate < st.mu:
            return 0.0
        if rate > st.mu:
            return 1.0
        return 0.5
    if math.isinf(rate):
        return 1.0
    return q_function((st.mu - rate) / st.delta)


def error_probability_arrays(mu: np.ndarray, delta: np.ndarray, rate: float) -> np.ndarray:
    """Vectorized error probability from precomputed (mu, delta) arrays."""
    if math.isinf(rate):
        return np.ones_like(mu)
    eps = np.empty_like(mu)
    pos = delta > 0.0
    if pos.any():
        eps[pos] = q_function((mu[pos] - rate) / delta[pos])
    deg = ~pos
    if deg.any():
        eps[deg] = np.where(rate < mu[deg], 0.0, np.where(rate > mu[deg], 1.0, 0.5))
    return eps


def _laplace_from_uniform(u: np.ndarray) -> np.ndarray:
    # unit-scale Laplace (zero mean, variance 2) by inverse CDF; the clip
    # only guards the measure-zero u=0 corner of the [0,1) draw.
    c = u - 0.5
    t = np.maximum(-2.0 * np.abs(c), -1.0 + 2.0 ** -53)
    return -np.sign(c) * np.log1p(t)


def mi_density_samples_exact(z: np.ndarray, params: SystemParams, count: int,
                             seed: int, start: int = 0) -> np.ndarray:
    """Exact mutual-information-density samples (bits/use), one per index in
    [start, start+count), from Laplace-sum windows of nm draws each."""
    z = _check_realization(z, params)
    if count < 1:
        raise DomainError(f"count must be >= 1, got {count!r}")
    st = rate_stats(z, params)
    s = params.snr_linear * z
    weights = np.sqrt(s / (1.0 + s))  # per-block Laplace weights
    scale = LOG2E / params.nm
    out = np.empty(count)
    chunk = max(1, (1 << 24) // params.nm)  # cap the uniform buffer at ~128 MB
    for lo in range(0, count, chunk):
        hi = min(lo + chunk, count)
        u = uniform_windows(seed, start + lo, hi - lo, params.nm)
        w = _laplace_from_uniform(u).reshape(hi - lo, params.m, params.n)
        out[lo:hi] = st.mu + scale * (w.sum(axis=2) @ weights)
    return out


def mi_density_sample_exact(z: np.ndarray, params: SystemParams,
                            rng: np.random.Generator) -> float:
    """One exact mutual-information-density sample drawn from rng."""
    z = _check_realization(z, params)
    st = rate_stats(z, params)
    s = params.snr_linear * z
    weights = np.sqrt(s / (1.0 + s))
    w = _laplace_from_uniform(rng.random(params.nm)).reshape(params.m, params.n)
    return float(st.mu + (LOG2E / params.nm) * (w.sum(axis=1) @ weights))


def mi_sampler_stream(seed: int, index: int, params: SystemParams) -> np.random.Generator:
    """Substream handle whose window matches mi_density_samples_exact."""
    return substream(seed, index, params.nm)
