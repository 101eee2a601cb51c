"""Gaussian Q-function, its inverse, and the first derivative of the inverse.

Q(x) is evaluated as 0.5*erfc(x/sqrt(2)) through SciPy's Cephes erfc
(published rational approximations; relative error stays below ~1e-13 for
|x| <= 8 and the far tail underflows gracefully), so results are
bit-reproducible for a pinned SciPy build.  The inverse is a safeguarded
Newton iteration seeded with Acklam's rational approximation of the normal
quantile; any Newton step that leaves the maintained bracket is replaced by
a bisection step.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erfc

from .errors import DomainError

_SQRT2 = math.sqrt(2.0)
SQRT_2PI = math.sqrt(2.0 * math.pi)

# Acklam's rational approximation of the standard normal quantile.
_ACKLAM_A = (-3.969683028665376e+01, 2.209460984245205e+02,
             -2.759285104469687e+02, 1.383577518672690e+02,
             -3.066479806614716e+01, 2.506628277459239e+00)
_ACKLAM_B = (-5.447609879822406e+01, 1.615858368580409e+02,
             -1.556989798598866e+02, 6.680131188771972e+01,
             -1.328068155288572e+01)
_ACKLAM_C = (-7.784894002430293e-03, -3.223964580411365e-01,
             -2.400758277161838e+00, -2.549732539343734e+00,
             4.374664141464968e+00, 2.938163982698783e+00)
_ACKLAM_D = (7.784695709041462e-03, 3.224671290700398e-01,
             2.445134137142996e+00, 3.754408661907416e+00)
_ACKLAM_SPLIT = 0.02425


def q_function(x):
    """Upper-tail probability Q(x) of the standard normal distribution.

    Accepts a scalar or array; raises DomainError on non-finite input.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("q_function requires finite input")
    out = 0.5 * erfc(arr / _SQRT2)
    if arr.ndim == 0:
        return float(out)
    return out


def _norm_quantile(p: float) -> float:
    """Acklam's approximation of Phi^{-1}(p), |error| < 1.15e-9."""
    a, b, c, d = _ACKLAM_A, _ACKLAM_B, _ACKLAM_C, _ACKLAM_D
    if p < _ACKLAM_SPLIT:
        q = math.sqrt(-2.0 * math.log(p))
        return ((((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
                / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0))
    if p > 1.0 - _ACKLAM_SPLIT:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        return -((((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
                 / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0))
    q = p - 0.5
    r = q * q
    return ((((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
            / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0))


def q_inverse(p: float) -> float:
    """Solve Q(x) = p for x, 0 < p < 1.

    Safeguarded Newton: dQ/dx = -phi(x), so each step is
    x <- x + (Q(x) - p)/phi(x); steps that exit the running bracket fall
    back to bisection.  Converges to |Q(x) - p| at machine precision.
    """
    p = float(p)
    if not (0.0 < p < 1.0) or math.isnan(p):
        raise DomainError(f"q_inverse requires 0 < p < 1, got {p!r}")
    # Q^{-1}(p) = -Phi^{-1}(p); the lower-tail branch of the seed keeps full
    # precision for tiny p without forming 1 - p.
    x = -_norm_quantile(p)
    lo, hi = -40.0, 40.0
    for _ in range(100):
        q = q_function(x)
        if q > p:
            lo = x
        elif q < p:
            hi = x
        else:
            return x
        pdf = math.exp(-0.5 * x * x) / SQRT_2PI
        if pdf > 0.0 and math.isfinite(pdf):
            x_new = x + (q - p) / pdf
        else:
            x_new = 0.5 * (lo + hi)
        if not (lo < x_new < hi):
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= 1e-15 * max(1.0, abs(x)):
            return x_new
        x = x_new
    return x


def q_inverse_deriv(p: float) -> float:
    """First derivative of Q^{-1} at p; always negative.

    By the chain rule, d/dp Q^{-1}(p) = 1/Q'(x) = -sqrt(2*pi)*exp(+x^2/2)
    with x = Q^{-1}(p).  Note the positive half-x^2 exponent: a common
    misprint writes exp(-x^2/2), which fails finite-difference checks.
    """
    x = q_inverse(p)
    return -SQRT_2PI * math.exp(0.5 * x * x)
