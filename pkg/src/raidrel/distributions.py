"""Lifetime distributions and phase-type fitting.

Provides the four lifetime laws used by the disk models (exponential,
Weibull with optional location offset, Erlang-k, and a 3-state
infant-mortality phase type), raw-moment computation, closed-form
moment matching onto the 3-state chain, mean-matched Erlang fitting,
and a one-sample Kolmogorov-Smirnov exponentiality test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc

__all__ = [
    "Exponential",
    "Weibull",
    "ErlangK",
    "PhaseType3",
    "Moments",
    "MomentMatchIntermediates",
    "NoValidFit",
    "raw_moments",
    "fit_phase3",
    "fit_erlang",
    "mean",
    "density",
    "cdf",
    "hazard",
    "sample",
    "max_cdf_diff",
    "ks_exponentiality",
]

# Asymptotic one-sample KS critical values c(a), statistic threshold c(a)/sqrt(n).
_KS_CRITICAL = {0.20: 1.073, 0.10: 1.224, 0.05: 1.358, 0.01: 1.628}


class NoValidFit(ValueError):
    """Raised when the closed-form 3-state inversion has no admissible solution."""


def _check_times(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be nonnegative")
    return t


@dataclass(frozen=True)
class Exponential:
    """Constant-hazard lifetime; ``rate`` in events per hour."""

    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("rate must be positive")

    @classmethod
    def from_mean(cls, mean_hr: float) -> "Exponential":
        return cls(rate=1.0 / mean_hr)

    def raw_moment(self, r: int) -> float:
        return math.factorial(r) / self.rate**r

    def pdf(self, t):
        t = _check_times(t)
        return self.rate * np.exp(-self.rate * t)

    def cdf(self, t):
        t = _check_times(t)
        return -np.expm1(-self.rate * t)

    def hazard(self, t):
        t = _check_times(t)
        return np.full_like(t, self.rate, dtype=float)

    def sample(self, rng, size=None):
        u = rng.random(size)
        return -np.log1p(-u) / self.rate


@dataclass(frozen=True)
class Weibull:
    """Two- or three-parameter Weibull: shape, scale (hr), offset (hr).

    ``offset`` is the location parameter of the 3-parameter form; the
    cdf is identically 0 on [0, offset].
    """

    shape: float
    scale: float
    offset: float = 0.0

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0 and self.offset >= 0):
            raise ValueError("require shape>0, scale>0, offset>=0")

    def raw_moment(self, r: int) -> float:
        # binomial expansion of (offset + core)^r; core moments via Gamma
        total = 0.0
        for j in range(r + 1):
            core = self.scale**j * math.gamma(1.0 + j / self.shape)
            total += math.comb(r, j) * self.offset ** (r - j) * core
        return total

    def pdf(self, t):
        t = _check_times(t)
        z = np.maximum(t - self.offset, 0.0) / self.scale
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (self.shape / self.scale) * z ** (self.shape - 1.0) * np.exp(-(z**self.shape))
        return np.where(t < self.offset, 0.0, out)

    def cdf(self, t):
        t = _check_times(t)
        z = np.maximum(t - self.offset, 0.0) / self.scale
        return -np.expm1(-(z**self.shape))

    def hazard(self, t):
        t = _check_times(t)
        z = np.maximum(t - self.offset, 0.0) / self.scale
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (self.shape / self.scale) * z ** (self.shape - 1.0)
        return np.where(t < self.offset, 0.0, out)

    def sample(self, rng, size=None):
        u = rng.random(size)
        return self.offset + self.scale * (-np.log1p(-u)) ** (1.0 / self.shape)


@dataclass(frozen=True)
class ErlangK:
    """Erlang distribution: ``k`` exponential stages, each at rate ``lam`` per hour."""

    k: int
    lam: float

    def __post_init__(self):
        if not (isinstance(self.k, int) and self.k >= 1):
            raise ValueError("k must be a positive integer")
        if not self.lam > 0:
            raise ValueError("lam must be positive")

    def raw_moment(self, r: int) -> float:
        num = 1.0
        for i in range(r):
            num *= self.k + i
        return num / self.lam**r

    def pdf(self, t):
        t = _check_times(t)
        lt = self.lam * t
        return self.lam * lt ** (self.k - 1) * np.exp(-lt) / math.factorial(self.k - 1)

    def cdf(self, t):
        t = _check_times(t)
        return gammainc(self.k, self.lam * t)

    def hazard(self, t):
        t = _check_times(t)
        with np.errstate(divide="ignore", invalid="ignore"):
            h = self.pdf(t) / (1.0 - self.cdf(t))
        return h

    def sample(self, rng, size=None):
        shape = (self.k,) if size is None else (self.k,) + tuple(np.atleast_1d(size))
        draws = -np.log1p(-rng.random(shape)) / self.lam
        total = draws.sum(axis=0)
        return float(total) if size is None else total


@dataclass(frozen=True)
class PhaseType3:
    """3-state infant-mortality chain, absorbed at failure.

    Young -(sigma)-> BurntIn, Young -(alpha)-> Fail, BurntIn -(beta)-> Fail;
    the process starts in Young. sigma is the burn-in rate, alpha the
    pre-burn-in failure rate, beta the post-burn-in failure rate (per hour).
    """

    sigma: float
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.sigma > 0 and self.alpha > 0 and self.beta > 0):
            raise ValueError("all rates must be positive")

    def _weights(self):
        # survival = w1*exp(-beta t) + w2*exp(-a t) with a = sigma+alpha
        a = self.sigma + self.alpha
        d = a - self.beta
        return self.sigma / d, (self.alpha - self.beta) / d, a

    def _degenerate(self) -> bool:
        a = self.sigma + self.alpha
        return abs(a - self.beta) <= 1e-12 * (a + self.beta)

    def raw_moment(self, r: int) -> float:
        a = self.sigma + self.alpha
        if self._degenerate():
            # limiting law when beta == sigma+alpha
            return math.factorial(r) * (self.alpha + self.sigma * (r + 1)) / a ** (r + 1)
        w1, w2, a = self._weights()
        return math.factorial(r) * (w1 / self.beta**r + w2 / a**r)

    def survival(self, t):
        t = _check_times(t)
        if self._degenerate():
            a = self.sigma + self.alpha
            return np.exp(-a * t) * (1.0 + self.sigma * t)
        w1, w2, a = self._weights()
        return w1 * np.exp(-self.beta * t) + w2 * np.exp(-a * t)

    def pdf(self, t):
        t = _check_times(t)
        if self._degenerate():
            a = self.sigma + self.alpha
            return np.exp(-a * t) * (self.alpha + self.sigma * a * t)
        w1, w2, a = self._weights()
        return w1 * self.beta * np.exp(-self.beta * t) + w2 * a * np.exp(-a * t)

    def cdf(self, t):
        return 1.0 - self.survival(t)

    def hazard(self, t):
        return self.pdf(t) / self.survival(t)

    def hazard_slope(self, t):
        """Derivative of the hazard; nonnegative and decreasing when beta > alpha."""
        t = _check_times(t)
        a = self.sigma + self.alpha
        num = self.sigma * (self.beta - self.alpha) * np.exp(-(a + self.beta) * t)
        return num / self.survival(t) ** 2

    def sample(self, rng, size=None):
        a = self.sigma + self.alpha
        if size is None:
            t = -math.log1p(-rng.random()) / a
            if rng.random() < self.alpha / a:
                return t
            return t - math.log1p(-rng.random()) / self.beta
        t = -np.log1p(-rng.random(size)) / a
        burn = rng.random(size) >= self.alpha / a
        t = t + np.where(burn, -np.log1p(-rng.random(size)) / self.beta, 0.0)
        return t


Distribution = Exponential | Weibull | ErlangK | PhaseType3


@dataclass(frozen=True)
class Moments:
    """First three raw moments, in hr / hr^2 / hr^3."""

    mu1: float
    mu2: float
    mu3: float

    def __post_init__(self):
        if not self.mu1 > 0:
            raise ValueError("mu1 must be positive")
        if self.mu2 < self.mu1**2:
            raise ValueError("mu2 < mu1^2 implies negative variance")
        if not self.mu3 > 0:
            raise ValueError("mu3 must be positive")


@dataclass(frozen=True)
class MomentMatchIntermediates:
    """Discriminant ``x`` and denominator ``y`` of the closed-form inversion."""

    x: float
    y: float

    @property
    def admissible(self) -> bool:
        return self.x >= 0.0 and self.y != 0.0


def mean(dist: Distribution) -> float:
    return dist.raw_moment(1)


def raw_moments(dist: Distribution, r_max: int = 3) -> Moments:
    """First three raw (non-central) moments of ``dist``.

    ``r_max`` is validated against the supported range {1,2,3}; all three
    fields of the returned ``Moments`` are exact regardless.
    """
    if r_max not in (1, 2, 3):
        raise ValueError("r_max must be in {1,2,3}")
    if not isinstance(dist, (Exponential, Weibull, ErlangK, PhaseType3)):
        raise TypeError(f"unsupported distribution: {type(dist).__name__}")
    return Moments(dist.raw_moment(1), dist.raw_moment(2), dist.raw_moment(3))


def moment_match_intermediates(m: Moments) -> MomentMatchIntermediates:
    """Inversion intermediates, computed scale-free (rates in units of 1/mu1)."""
    m1 = 1.0
    c2 = m.mu2 / m.mu1**2 - 1.0
    c3 = m.mu3 / m.mu1**3 - 3.0 * (m.mu2 / m.mu1**2) + 2.0
    terms = (
        -2.0 * m1**6,
        6.0 * m1**4 * c2,
        -18.0 * m1**2 * c2**2,
        18.0 * c2**3,
        8.0 * m1**3 * c3,
        -12.0 * m1 * c2 * c3,
        c3**2,
    )
    x = math.fsum(terms)
    # boundary chains (beta == sigma+alpha) give x == 0 up to rounding
    if x < 0.0 and -x < 1e-12 * sum(abs(v) for v in terms):
        x = 0.0
    y = m1**4 + 3.0 * c2**2 - 2.0 * m1 * c3
    return MomentMatchIntermediates(x=x, y=y)


def fit_phase3(m: Moments) -> tuple[PhaseType3, PhaseType3]:
    """Match the 3-state chain to the given raw moments.

    The closed-form inversion works on (mean, variance, third central
    moment); both sign branches are returned. The two branches describe
    the same absorption-time law with the roles of the two exponential
    decay rates exchanged.

    Raises NoValidFit when the discriminant is negative or any resulting
    rate is non-positive (the Erlang route is then the usual fallback).
    """
    mu1 = m.mu1
    m1 = 1.0
    c2 = m.mu2 / mu1**2 - 1.0
    c3 = m.mu3 / mu1**3 - 3.0 * (m.mu2 / mu1**2) + 2.0

    inter = moment_match_intermediates(m)
    if not inter.admissible:
        raise NoValidFit(f"inversion inadmissible: x={inter.x:g}, y={inter.y:g}")
    sqrt_x = math.sqrt(inter.x)
    y = inter.y

    alpha = -2.0 * (m1**3 - 3.0 * m1 * c2 + c3) / y
    branches = []
    for sign in (+1.0, -1.0):
        sigma = (4.0 * m1**3 - 6.0 * m1 * c2 + c3 + sign * sqrt_x) / y
        beta = (2.0 * m1**3 - c3 - sign * sqrt_x) / y
        if not (sigma > 0.0 and alpha > 0.0 and beta > 0.0):
            raise NoValidFit(
                f"non-positive rate in branch {sign:+.0f}: "
                f"sigma={sigma:g}, alpha={alpha:g}, beta={beta:g}"
            )
        branches.append(PhaseType3(sigma=sigma / mu1, alpha=alpha / mu1, beta=beta / mu1))
    return branches[0], branches[1]


def fit_erlang(k: int, dist: Distribution) -> ErlangK:
    """Mean-matched Erlang-k: lam = k / mean(dist)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    mu = mean(dist)
    if not math.isfinite(mu) or mu <= 0:
        raise ValueError("distribution mean must be finite and positive")
    return ErlangK(k=k, lam=k / mu)


def density(dist: Distribution, t):
    return dist.pdf(t)


def cdf(dist: Distribution, t):
    return dist.cdf(t)


def hazard(dist: Distribution, t):
    return dist.hazard(t)


def sample(dist: Distribution, rng, size=None):
    """Draw variates using the caller's RNG stream (inverse transform based)."""
    return dist.sample(rng, size)


def max_cdf_diff(a: Distribution, b: Distribution, grid) -> tuple[float, float]:
    """Extrema of cdf(a,t) - cdf(b,t) over a time grid: (max, min)."""
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("grid must be non-empty")
    if np.any(grid < 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing and nonnegative")
    diff = np.asarray(a.cdf(grid)) - np.asarray(b.cdf(grid))
    return float(diff.max()), float(diff.min())


def ks_exponentiality(samples, significance: float = 0.05) -> tuple[float, bool]:
    """One-sample KS test against Exponential(rate = 1/sample mean).

    Uses the classical asymptotic critical values c(a)/sqrt(n). Because the
    rate is estimated from the same sample the test is conservative (the
    actual rejection rate of exponential data falls below the nominal
    level); this bias is accepted and documented.
    """
    if significance not in _KS_CRITICAL:
        raise ValueError(f"significance must be one of {sorted(_KS_CRITICAL)}")
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n < 8:
        raise ValueError("need at least 8 samples")
    m = x.mean()
    if not (m > 0) or x[0] == x[-1]:
        raise ValueError("degenerate sample")
    f = -np.expm1(-x / m)
    i = np.arange(1, n + 1)
    d = max(np.max(i / n - f), np.max(f - (i - 1) / n))
    reject = d > _KS_CRITICAL[significance] / math.sqrt(n)
    return float(d), bool(reject)
