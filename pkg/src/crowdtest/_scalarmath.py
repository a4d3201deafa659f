"""Scalar special functions for the jitted kernels.

Everything here is plain scalar math so that numba can compile it; the
vectorized public equivalents (scipy-backed) live in :mod:`crowdtest.prob`.
The cumulative Gaussian goes through ``erfc`` with a continued-fraction
log-domain path below z = -8, because the message updates divide by tail
values and cancellation there is fatal.
"""

import math

from ._backend import jit

SQRT2 = math.sqrt(2.0)
SQRT_2PI = math.sqrt(2.0 * math.pi)
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

_CF_DEPTH = 64


@jit
def std_normal_pdf(x):
    return math.exp(-0.5 * x * x) / SQRT_2PI


@jit
def std_normal_cdf(x):
    return 0.5 * math.erfc(-x / SQRT2)


@jit
def _mills_upper(u):
    # R(u) = Phi(-u)/phi(u) for u >= 8, by the Laplace continued fraction
    # R(u) = 1/(u + 1/(u + 2/(u + 3/(...)))).
    cf = 0.0
    for k in range(_CF_DEPTH, 0, -1):
        cf = k / (u + cf)
    return 1.0 / (u + cf)


@jit
def log_std_normal_cdf(x):
    if x >= -8.0:
        return math.log(0.5 * math.erfc(-x / SQRT2))
    return -0.5 * x * x - LOG_SQRT_2PI + math.log(_mills_upper(-x))


@jit
def pdf_over_cdf(z):
    # phi(z)/Phi(z); the tail needs the continued fraction, not division.
    if z >= -8.0:
        return std_normal_pdf(z) / std_normal_cdf(z)
    return 1.0 / _mills_upper(-z)


@jit
def std_normal_ppf(p):
    # Acklam's rational approximation refined by one Halley step.
    if p <= 0.0:
        return -math.inf
    if p >= 1.0:
        return math.inf
    if p < 0.02425:
        q = math.sqrt(-2.0 * math.log(p))
        x = (
            ((((-7.784894002430293e-03 * q - 3.223964580411365e-01) * q
               - 2.400758277161838e+00) * q - 2.549732539343734e+00) * q
             + 4.374664141464968e+00) * q + 2.938163982698783e+00
        ) / (
            (((7.784695709041462e-03 * q + 3.224671290700398e-01) * q
              + 2.445134137142996e+00) * q + 3.754408661907416e+00) * q + 1.0
        )
    elif p > 0.97575:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        x = -(
            ((((-7.784894002430293e-03 * q - 3.223964580411365e-01) * q
               - 2.400758277161838e+00) * q - 2.549732539343734e+00) * q
             + 4.374664141464968e+00) * q + 2.938163982698783e+00
        ) / (
            (((7.784695709041462e-03 * q + 3.224671290700398e-01) * q
              + 2.445134137142996e+00) * q + 3.754408661907416e+00) * q + 1.0
        )
    else:
        q = p - 0.5
        r = q * q
        x = (
            ((((-3.969683028665376e+01 * r + 2.209460984245205e+02) * r
               - 2.759285104469687e+02) * r + 1.383577518672690e+02) * r
             - 3.066479806614716e+01) * r + 2.506628277459239e+00
        ) * q / (
            ((((-5.447609879822406e+01 * r + 1.615858368580409e+02) * r
               - 1.556989798598866e+02) * r + 6.680131188771972e+01) * r
             - 1.328068155288572e+01) * r + 1.0
        )
    e = std_normal_cdf(x) - p
    u = e * SQRT_2PI * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


@jit
def gammainc_lower(a, x):
    """Regularized lower incomplete gamma P(a, x)."""
    if x <= 0.0:
        return 0.0
    if x < a + 1.0:
        # series representation
        term = 1.0 / a
        total = term
        n = 1
        while n < 4000:
            term *= x / (a + n)
            total += term
            if abs(term) < abs(total) * 1e-16:
                break
            n += 1
        return total * math.exp(-x + a * math.log(x) - math.lgamma(a))
    # Lentz continued fraction for Q(a, x)
    fpmin = 1e-300
    b = x + 1.0 - a
    c = 1.0 / fpmin
    d = 1.0 / b
    h = d
    i = 1
    while i < 4000:
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < fpmin:
            d = fpmin
        c = b + an / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
        i += 1
    q = math.exp(-x + a * math.log(x) - math.lgamma(a)) * h
    return 1.0 - q


@jit
def gamma_unit_ppf(a, p):
    """Quantile of Gamma(shape=a, scale=1).

    Wilson-Hilferty start, Newton refinement.  Above shape 1e5 the start is
    already accurate to far better than any tolerance used downstream and
    the refinement is skipped (the series/fraction grind at huge shapes).
    """
    if p <= 0.0:
        return 0.0
    z = std_normal_ppf(p)
    t = 1.0 - 1.0 / (9.0 * a) + z / (3.0 * math.sqrt(a))
    x = a * t * t * t
    if x <= 0.0:
        # deep lower tail at small shape: P(a, x) ~ x^a / Gamma(a+1)
        x = math.exp((math.log(p) + math.lgamma(a + 1.0)) / a)
    if a > 1e5:
        return x
    for _ in range(32):
        f = gammainc_lower(a, x) - p
        if abs(f) < 1e-13:
            break
        logpdf = (a - 1.0) * math.log(x) - x - math.lgamma(a)
        if logpdf < -690.0:
            break
        step = f / math.exp(logpdf)
        xn = x - step
        if xn <= 0.0:
            xn = 0.5 * x
        if abs(xn - x) <= 1e-14 * x:
            x = xn
            break
        x = xn
    return x
