"""Numerical kernel: Gaussian marginals, incomplete gamma, chi-squared quantiles,
binary entropy and the seeded random-stream contract.

Variances are in shot-noise units (1/2 for homodyne, 1 for heterodyne).
The incomplete gamma routines only ever form regularized quantities through a
log-scaled prefactor, so shapes in the 1e5 to 1e8 range (chi-squared tests after
tens of millions of control modes) never touch a factorial.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from statistics import NormalDist

import numpy as np

__all__ = [
    "RngStream",
    "gaussian_pdf",
    "gaussian_cdf",
    "gaussian_interval_prob",
    "sample_gaussian",
    "regularized_lower_gamma",
    "regularized_upper_gamma",
    "chi2_cdf",
    "chi2_sf",
    "chi2_quantile",
    "chi2_isf",
    "binary_entropy",
]

_LN_2PI = math.log(2.0 * math.pi)
_EPS = 1e-16
_TINY = 1e-300


def _check_variance(variance: float) -> None:
    if not variance > 0 or not math.isfinite(variance):
        raise ValueError(f"variance must be positive and finite, got {variance!r}")


# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------


@dataclass
class RngStream:
    """Counter-based random stream keyed by ``(master_seed, stream_id)``.

    Backed by numpy's Philox generator, whose 128-bit key is exactly the pair of
    ids; identical ids reproduce the identical sequence and distinct ids give
    independent streams. A stream is owned by one trial and never shared.
    """

    master_seed: int
    stream_id: int = 0
    _gen: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        for name in ("master_seed", "stream_id"):
            value = getattr(self, name)
            if not 0 <= value < 2**64:
                raise ValueError(f"{name} must fit in 64 unsigned bits, got {value}")
        key = np.array([self.master_seed, self.stream_id], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def derive(self, stream_id: int) -> RngStream:
        """A fresh stream under the same master seed."""
        return RngStream(self.master_seed, stream_id)

    def uniform(self) -> float:
        return float(self._gen.random())

    def normal(self, mean: float = 0.0, std: float = 1.0, size=None):
        if size is None:
            return float(self._gen.normal(mean, std))
        return self._gen.normal(mean, std, size)

    def bits(self, size: int) -> np.ndarray:
        return self._gen.integers(0, 2, size=size, dtype=np.int8)


def sample_gaussian(mean: float, variance: float, rng: RngStream) -> float:
    """One draw from N(mean, variance); zero variance returns ``mean``."""
    if variance == 0:
        return float(mean)
    _check_variance(variance)
    return rng.normal(mean, math.sqrt(variance))


# ---------------------------------------------------------------------------
# Gaussian marginal
# ---------------------------------------------------------------------------


def gaussian_pdf(x: float, mean: float, variance: float) -> float:
    _check_variance(variance)
    d = x - mean
    return math.exp(-d * d / (2.0 * variance)) / math.sqrt(2.0 * math.pi * variance)


def gaussian_cdf(x: float, variance: float) -> float:
    """CDF of the zero-mean Gaussian with the given variance."""
    _check_variance(variance)
    return 0.5 * math.erfc(-x / math.sqrt(2.0 * variance))


def _upper_tail(x: float, scale: float) -> float:
    # P(X > x) for X ~ N(0, scale^2 / 2) written through erfc; accurate in both tails
    return 0.5 * math.erfc(x / scale)


def gaussian_interval_prob(a: float, b: float, variance: float) -> float:
    """Probability mass of N(0, variance) on [a, b]; either end may be infinite."""
    _check_variance(variance)
    if a > b:
        raise ValueError(f"interval is reversed: a={a!r} > b={b!r}")
    scale = math.sqrt(2.0 * variance)
    if a >= 0:
        out = _upper_tail(a, scale) - _upper_tail(b, scale)
    elif b <= 0:
        out = _upper_tail(-b, scale) - _upper_tail(-a, scale)
    else:
        out = 1.0 - _upper_tail(-a, scale) - _upper_tail(b, scale)
    return min(1.0, max(0.0, out))


# ---------------------------------------------------------------------------
# Incomplete gamma
# ---------------------------------------------------------------------------


def _log1pmx(t: float) -> float:
    """log(1 + t) - t without cancellation for small t."""
    if abs(t) > 0.5:
        return math.log1p(t) - t
    # with y = t / (2 + t): log(1 + t) = 2 atanh(y) and t = 2y / (1 - y)
    y = t / (2.0 + t)
    y2 = y * y
    total = 0.0
    power = y * y2
    k = 3
    while True:
        contrib = power / k
        total += contrib
        if abs(contrib) <= 1e-17 * abs(total):
            break
        power *= y2
        k += 2
    return 2.0 * total - 2.0 * y2 / (1.0 - y)


def _stirling_error(a: float) -> float:
    """lgamma(a) - [(a - 1/2) ln a - a + ln(2 pi)/2]."""
    if a < 15.0:
        return math.lgamma(a) - ((a - 0.5) * math.log(a) - a + 0.5 * _LN_2PI)
    inv = 1.0 / a
    inv2 = inv * inv
    return inv * (1.0 / 12 - inv2 * (1.0 / 360 - inv2 * (1.0 / 1260 - inv2 / 1680)))


def _log_gamma_prefactor(a: float, x: float) -> float:
    """log of x^a e^{-x} / Gamma(a), evaluated around x = a to keep large shapes exact."""
    if x == 0:
        return -math.inf
    if a < 10.0:
        return a * math.log(x) - x - math.lgamma(a)
    t = (x - a) / a
    return 0.5 * math.log(a) - 0.5 * _LN_2PI - _stirling_error(a) + a * _log1pmx(t)


def _max_iterations(a: float) -> int:
    return int(50 * math.sqrt(a)) + 2000


def _lower_series(a: float, x: float) -> float:
    # P(a, x) = prefactor / a * sum_k x^k / ((a+1)...(a+k))
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_max_iterations(a)):
        ap += 1.0
        term *= x / ap
        total += term
        if term < total * _EPS:
            return total * math.exp(_log_gamma_prefactor(a, x))
    raise ArithmeticError(f"incomplete gamma series failed to converge (a={a}, x={x})")


def _upper_continued_fraction(a: float, x: float) -> float:
    # Q(a, x) = prefactor * 1/(x+1-a- 1(1-a)/(x+3-a- 2(2-a)/(x+5-a- ...))), modified Lentz
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _max_iterations(a)):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h * math.exp(_log_gamma_prefactor(a, x))
    raise ArithmeticError(f"incomplete gamma continued fraction failed (a={a}, x={x})")


def _check_gamma_args(shape: float, x: float) -> None:
    if not shape > 0 or not math.isfinite(shape):
        raise ValueError(f"shape must be positive and finite, got {shape!r}")
    if not x >= 0:
        raise ValueError(f"x must be non-negative, got {x!r}")


def regularized_lower_gamma(shape: float, x: float) -> float:
    """P(shape, x) = gamma(shape, x) / Gamma(shape)."""
    _check_gamma_args(shape, x)
    if x == 0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if x < shape + 1.0:
        return min(1.0, _lower_series(shape, x))
    return max(0.0, 1.0 - _upper_continued_fraction(shape, x))


def regularized_upper_gamma(shape: float, x: float) -> float:
    """Q(shape, x) = 1 - P(shape, x), computed directly in the upper tail."""
    _check_gamma_args(shape, x)
    if x == 0:
        return 1.0
    if math.isinf(x):
        return 0.0
    if x < shape + 1.0:
        return max(0.0, 1.0 - _lower_series(shape, x))
    return min(1.0, _upper_continued_fraction(shape, x))


def _log_gamma_density(shape: float, x: float) -> float:
    """log of the Gamma(shape, 1) density at x."""
    return _log_gamma_prefactor(shape, x) - math.log(x)


# ---------------------------------------------------------------------------
# Chi-squared
# ---------------------------------------------------------------------------


def chi2_cdf(dof: int, v: float) -> float:
    return regularized_lower_gamma(dof / 2.0, max(v, 0.0) / 2.0)


def chi2_sf(dof: int, v: float) -> float:
    return regularized_upper_gamma(dof / 2.0, max(v, 0.0) / 2.0)


def _check_dof(dof: int) -> None:
    if int(dof) != dof or dof < 1:
        raise ValueError(f"degrees of freedom must be a positive integer, got {dof!r}")


def _wilson_hilferty(dof: int, z: float) -> float:
    h = 2.0 / (9.0 * dof)
    return dof * max(1.0 - h + z * math.sqrt(h), 0.05) ** 3


@lru_cache(maxsize=1 << 20)
def _solve_gamma_tail(shape: float, target: float, upper: bool) -> float:
    """x with Q(shape, x) = target (upper) or P(shape, x) = target (lower).

    Newton on the log of the tail probability, safeguarded by a bracket that is
    tightened on every step and bisected whenever Newton leaves it.
    """
    tail = regularized_upper_gamma if upper else regularized_lower_gamma
    z = NormalDist().inv_cdf(1.0 - target if upper else target)
    x = 0.5 * _wilson_hilferty(int(round(2 * shape)), z) if shape >= 0.5 else shape
    log_target = math.log(target)
    lo, hi = 0.0, math.inf
    for _ in range(200):
        val = tail(shape, x)
        f = math.log(val) - log_target if val > 0.0 else -math.inf
        if abs(f) < 1e-13:
            return x
        # Q falls with x, P rises
        if (f > 0) == upper:
            lo = x
        else:
            hi = x
        candidate = math.nan
        if math.isfinite(f):
            dens = math.exp(_log_gamma_density(shape, x))
            slope = (-dens if upper else dens) / val
            if slope != 0:
                candidate = x - f / slope
        if not lo < candidate < hi:
            candidate = 0.5 * (lo + hi) if math.isfinite(hi) else 2.0 * x + 1.0
        if abs(candidate - x) <= 1e-15 * x:
            return candidate
        x = candidate
    raise ArithmeticError(f"chi-squared quantile did not converge (shape={shape}, target={target})")


def chi2_isf(dof: int, tail: float) -> float:
    """Value V with P(chi2_dof > V) = tail (inverse survival function)."""
    _check_dof(dof)
    if not 0.0 < tail < 1.0:
        raise ValueError(f"tail probability must lie in (0, 1), got {tail!r}")
    if tail <= 0.5:
        return 2.0 * _solve_gamma_tail(dof / 2.0, tail, True)
    return 2.0 * _solve_gamma_tail(dof / 2.0, 1.0 - tail, False)


def chi2_quantile(dof: int, prob: float) -> float:
    """The prob-quantile of the chi-squared distribution with ``dof`` degrees of freedom."""
    _check_dof(dof)
    if not 0.0 < prob < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {prob!r}")
    if prob <= 0.5:
        return 2.0 * _solve_gamma_tail(dof / 2.0, prob, False)
    return 2.0 * _solve_gamma_tail(dof / 2.0, 1.0 - prob, True)


# ---------------------------------------------------------------------------
# Entropy
# ---------------------------------------------------------------------------


def binary_entropy(p: float) -> float:
    """Shannon entropy of a Bernoulli(p) variable, in bits."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability must lie in [0, 1], got {p!r}")
    if p == 0.0 or p == 1.0:
        return 0.0
    q = p if p <= 0.5 else 1.0 - p  # evaluate on the smaller tail so log1p stays accurate
    h = -(q * math.log(q) + (1.0 - q) * math.log1p(-q)) / math.log(2.0)
    return min(1.0, h)  # rounding can exceed 1 by an ulp near q = 1/2
