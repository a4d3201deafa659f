"""Scalar probability primitives: Gaussian/Gamma/discrete parameterizations,
the probit response-correctness link, entropies, and the truncated-Gaussian
moment matching used by the message updates.

The Gamma distribution is kept in shape/scale form.  Note the upstream
naming clash: ``scale`` here is the Gamma scale parameter, unrelated to the
unit step function that appears in the integral form of the probit link.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sp

from . import _scalarmath as _sm

__all__ = [
    "Gaussian1D",
    "GammaDist",
    "Discrete",
    "NegligibleEvidenceError",
    "std_normal_pdf",
    "std_normal_cdf",
    "log_std_normal_cdf",
    "prob_correct",
    "gaussian_entropy",
    "probit_factor_moments",
    "VARIANCE_FLOOR",
]

# floor applied to any variance produced by moment matching
VARIANCE_FLOOR = 1e-10

# clamp variance used to represent point masses uniformly in message passing
POINT_MASS_VARIANCE = 1e-12


class NegligibleEvidenceError(ArithmeticError):
    """Likelihood mass under the prior fell below 1e-300."""


@dataclass(frozen=True)
class Gaussian1D:
    """Univariate Gaussian in (mean, variance) form."""

    mean: float
    variance: float

    def __post_init__(self):
        if not math.isfinite(self.mean):
            raise ValueError(f"mean must be finite, got {self.mean}")
        if not (self.variance > 0.0 and math.isfinite(self.variance)):
            raise ValueError(f"variance must be positive, got {self.variance}")

    @property
    def precision(self) -> float:
        return 1.0 / self.variance

    @property
    def precision_mean(self) -> float:
        return self.mean / self.variance

    @classmethod
    def from_natural(cls, precision: float, precision_mean: float) -> "Gaussian1D":
        if precision <= 0.0:
            raise ValueError(f"precision must be positive, got {precision}")
        return cls(mean=precision_mean / precision, variance=1.0 / precision)

    @classmethod
    def point_mass(cls, value: float) -> "Gaussian1D":
        return cls(mean=value, variance=POINT_MASS_VARIANCE)

    @property
    def sd(self) -> float:
        return math.sqrt(self.variance)

    def entropy(self) -> float:
        return gaussian_entropy(self.variance)


@dataclass(frozen=True)
class GammaDist:
    """Gamma distribution with shape k and scale theta (mean = k * theta)."""

    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0.0 and math.isfinite(self.shape)):
            raise ValueError(f"shape must be positive, got {self.shape}")
        if not (self.scale > 0.0 and math.isfinite(self.scale)):
            raise ValueError(f"scale must be positive, got {self.scale}")

    @property
    def mean(self) -> float:
        return self.shape * self.scale

    @property
    def variance(self) -> float:
        return self.shape * self.scale * self.scale

    @property
    def rate(self) -> float:
        return 1.0 / self.scale

    @classmethod
    def from_mean_variance(cls, mean: float, variance: float) -> "GammaDist":
        if mean <= 0.0 or variance <= 0.0:
            raise ValueError("mean and variance must be positive")
        return cls(shape=mean * mean / variance, scale=variance / mean)


class Discrete:
    """Distribution over a finite option set 0..n-1."""

    __slots__ = ("probs",)

    def __init__(self, probs):
        p = np.asarray(probs, dtype=np.float64)
        if p.ndim != 1 or p.size < 1:
            raise ValueError("probs must be a non-empty 1-D vector")
        if np.any(p < -1e-12) or np.any(p > 1.0 + 1e-12):
            raise ValueError(f"probabilities out of [0, 1]: {p}")
        if abs(float(p.sum()) - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {p.sum()}, not 1")
        p = np.clip(p, 0.0, 1.0)
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    def __len__(self) -> int:
        return int(self.probs.size)

    def __getitem__(self, k: int) -> float:
        return float(self.probs[k])

    def __eq__(self, other) -> bool:
        return isinstance(other, Discrete) and np.array_equal(self.probs, other.probs)

    def __repr__(self) -> str:
        return f"Discrete({np.array2string(self.probs, precision=4)})"

    @classmethod
    def uniform(cls, n: int) -> "Discrete":
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def point_mass(cls, k: int, n: int) -> "Discrete":
        p = np.zeros(n)
        p[k] = 1.0
        return cls(p)

    def mode(self, tie_eps: float = 0.0) -> int:
        """Most probable option; ties broken toward the lowest index.

        ``tie_eps`` widens the tie: options within tie_eps of the maximum
        count as tied (useful when probabilities carry solver noise).
        """
        if tie_eps > 0.0:
            top = float(self.probs.max())
            return int(np.nonzero(self.probs >= top - tie_eps)[0][0])
        return int(np.argmax(self.probs))

    def tv_distance(self, other: "Discrete") -> float:
        return 0.5 * float(np.abs(self.probs - other.probs).sum())


def std_normal_pdf(x):
    """Standard Gaussian density (2*pi)^(-1/2) * exp(-x^2/2)."""
    x = np.asarray(x, dtype=np.float64)
    out = np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    return float(out) if out.ndim == 0 else out


def std_normal_cdf(x):
    """Cumulative Gaussian, evaluated through the complementary error function."""
    x = np.asarray(x, dtype=np.float64)
    out = 0.5 * sp.erfc(-x / math.sqrt(2.0))
    return float(out) if out.ndim == 0 else out


def log_std_normal_cdf(x):
    """log(Phi(x)) with an asymptotic tail path; finite for any finite x."""
    x = np.asarray(x, dtype=np.float64)
    out = sp.log_ndtr(x)
    return float(out) if out.ndim == 0 else out


def prob_correct(t, tau):
    """P(correct | t, tau) = Phi(sqrt(tau) * t).

    ``t`` is the ability-difficulty gap; ``tau`` is the question's precision
    (discrimination): higher tau sharpens the transition around t = 0.
    """
    tau = np.asarray(tau, dtype=np.float64)
    if np.any(tau <= 0.0):
        raise ValueError(f"tau must be positive, got {tau}")
    return std_normal_cdf(np.sqrt(tau) * np.asarray(t, dtype=np.float64))


def gaussian_entropy(variance) -> float:
    """Entropy (nats) of a univariate Gaussian: 0.5 * ln(2*pi*e*variance)."""
    v = np.asarray(variance, dtype=np.float64)
    if np.any(v <= 0.0):
        raise ValueError(f"variance must be positive, got {variance}")
    out = 0.5 * np.log(2.0 * math.pi * math.e * v)
    return float(out) if out.ndim == 0 else out


def probit_factor_moments(prior_t: Gaussian1D, tau: float, observed_c: bool) -> Gaussian1D:
    """Gaussian projection of prior_t tilted by the correctness likelihood.

    Multiplies N(t; m, v) by Phi(sqrt(tau)*t) when the response was correct,
    by 1 - Phi(sqrt(tau)*t) otherwise, and moment-matches the result.  The
    closed form is the classic truncated-Gaussian update: with
    s^2 = v + 1/tau and z = +-m/s,

        mean' = m +- v/s * phi(z)/Phi(z)
        var'  = v - v^2/s^2 * r(z) * (z + r(z)),   r(z) = phi(z)/Phi(z)
    """
    if tau <= 0.0:
        raise ValueError(f"tau must be positive, got {tau}")
    m, v = prior_t.mean, prior_t.variance
    s2 = v + 1.0 / tau
    s = math.sqrt(s2)
    sign = 1.0 if observed_c else -1.0
    z = sign * m / s
    if _sm.log_std_normal_cdf(z) < math.log(1e-300):
        raise NegligibleEvidenceError(
            f"likelihood mass below 1e-300 for prior {prior_t}, tau {tau}"
        )
    r = _sm.pdf_over_cdf(z)
    mean = m + sign * v * r / s
    var = v - v * v * r * (z + r) / s2
    return Gaussian1D(mean=mean, variance=max(var, VARIANCE_FLOOR))
