"""Closed-form security analysis of the protocol under a Gaussian-cloner attack.

For ``N`` protocol runs with control probability ``c`` the eavesdropper survives
``cN`` chi-squared tests with probability ``P`` and collects ``I`` bits from the
``(1 - c)N`` message modes. Sweeping ``N`` traces the survival-versus-stolen
information curve; the cutoff point of that curve (``P`` = 1%) is the figure of
merit an attacker maximises over her cloner noise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .gauss_num import binary_entropy, chi2_isf, regularized_lower_gamma
from .lattice_codec import intrinsic_error
from .protocol_engine import ProtocolConfig
from .rep_code import RepCode, uncorrectable_prob

__all__ = [
    "SecurityScenario",
    "CurvePoint",
    "DetectionPoint",
    "survival_prob",
    "eve_bit_error",
    "stolen_info_basic",
    "stolen_info_coded",
    "stolen_info",
    "survival_vs_stolen_curve",
    "detection_point",
    "best_attack",
    "max_qdc_length",
    "delivered_bits",
    "default_sigma2_grid",
]


@dataclass(frozen=True)
class SecurityScenario:
    cfg: ProtocolConfig
    sigma2: float

    def __post_init__(self) -> None:
        if not self.sigma2 >= 0:
            raise ValueError(f"sigma2 must be non-negative, got {self.sigma2!r}")


@dataclass(frozen=True)
class CurvePoint:
    N: float
    I: float
    P: float


@dataclass(frozen=True)
class DetectionPoint:
    """Where the survival probability first drops to the cutoff."""

    sigma2: float
    M: int
    N: float
    I: float
    P: float
    alice_bits: float


def survival_prob(M: int, sigma2: float, r: float) -> float:
    """Probability that a cloner adding ``sigma2`` passes the test after ``M`` control modes.

    With v the sum of 2M squared residuals of variance ``1 + sigma2``, the test
    passes when v is below the (1 - r) chi-squared quantile, so the probability is
    a regularized lower incomplete gamma function. Zero control modes pass
    trivially.
    """
    if M < 0 or int(M) != M:
        raise ValueError(f"M must be a non-negative integer, got {M!r}")
    if sigma2 < 0:
        raise ValueError(f"sigma2 must be non-negative, got {sigma2!r}")
    if M == 0:
        return 1.0
    threshold = chi2_isf(2 * int(M), r)
    return regularized_lower_gamma(M, threshold / (2.0 * (1.0 + sigma2)))


def eve_bit_error(sigma2: float, omega: float) -> float:
    """Eavesdropper's physical bit error with the dual clone noise 1/(4 sigma2)."""
    if sigma2 <= 0:
        return 0.5
    return intrinsic_error(omega, 1.0 + 0.25 / sigma2)


def stolen_info_basic(sigma2: float, omega: float) -> float:
    """Bits per message mode the eavesdropper gains without coding."""
    return 2.0 * (1.0 - binary_entropy(eve_bit_error(sigma2, omega)))


def stolen_info_coded(sigma2: float, omega: float, code: RepCode) -> float:
    """Bits per message mode when two logical bits ride on ``n`` modes."""
    logical = uncorrectable_prob(code, eve_bit_error(sigma2, omega))
    return 2.0 * (1.0 - binary_entropy(logical)) / code.n


def stolen_info(sigma2: float, cfg: ProtocolConfig) -> float:
    return stolen_info_coded(sigma2, cfg.omega, cfg.code)


def delivered_bits(cfg: ProtocolConfig, N: float) -> float:
    """Expected logical message bits Alice gets across in ``N`` runs."""
    return 2.0 * (1.0 - cfg.c) * N / cfg.n


def survival_vs_stolen_curve(scenario: SecurityScenario, N_grid: Sequence[float]) -> list[CurvePoint]:
    cfg, s2 = scenario.cfg, scenario.sigma2
    grid = list(N_grid)
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("N_grid must be ascending")
    per_mm = stolen_info(s2, cfg)
    return [
        CurvePoint(N, (1.0 - cfg.c) * N * per_mm, survival_prob(int(round(cfg.c * N)), s2, cfg.r))
        for N in grid
    ]


def _first_failing_M(sigma2: float, r: float, cutoff: float) -> int:
    """Smallest M with survival_prob(M) <= cutoff (survival falls monotonically in M)."""
    if survival_prob(1, sigma2, r) <= cutoff:
        return 1
    lo, hi = 1, 2
    while survival_prob(hi, sigma2, r) > cutoff:
        lo, hi = hi, 2 * hi
        if hi > 2**40:
            raise ArithmeticError(f"survival never reaches the cutoff for sigma2={sigma2}")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if survival_prob(mid, sigma2, r) > cutoff:
            lo = mid
        else:
            hi = mid
    return hi


def detection_point(cfg: ProtocolConfig, sigma2: float, cutoff: float = 0.01) -> DetectionPoint:
    """The run count at which the eavesdropper's survival reaches ``cutoff``, and what she stole by then."""
    if not 0.0 < cutoff < 1.0:
        raise ValueError(f"cutoff must lie in (0, 1), got {cutoff!r}")
    if not sigma2 > 0:
        raise ValueError("a noiseless attack is never detected")
    if not 0.0 < cfg.c < 1.0:
        raise ValueError(f"c must lie strictly inside (0, 1), got {cfg.c!r}")
    M = _first_failing_M(sigma2, cfg.r, cutoff)
    N = M / cfg.c
    return DetectionPoint(
        sigma2=sigma2,
        M=M,
        N=N,
        I=(1.0 - cfg.c) * N * stolen_info(sigma2, cfg),
        P=survival_prob(M, sigma2, cfg.r),
        alice_bits=delivered_bits(cfg, N),
    )


def default_sigma2_grid(points: int = 61, lo: float = 1e-3, hi: float = 10.0) -> np.ndarray:
    return np.logspace(math.log10(lo), math.log10(hi), points)


def best_attack(
    cfg: ProtocolConfig, P_cutoff: float = 0.01, sigma2_grid: Sequence[float] | None = None
) -> tuple[float, float]:
    """Cloner noise maximising the bits stolen before detection, and that maximum.

    A logarithmic grid locates the maximum, which is then polished on log(sigma2)
    between the neighbouring grid points.
    """
    if not 0.0 < P_cutoff < 1.0:
        raise ValueError(f"cutoff must lie in (0, 1), got {P_cutoff!r}")
    grid = np.sort(np.asarray(default_sigma2_grid() if sigma2_grid is None else sigma2_grid, dtype=float))
    if grid.size < 3 or grid[0] <= 0:
        raise ValueError("sigma2 grid needs at least three positive points")
    values = [detection_point(cfg, float(s), P_cutoff).I for s in grid]
    k = int(np.argmax(values))
    best_s, best_I = float(grid[k]), float(values[k])
    lo = math.log(grid[max(k - 1, 0)])
    hi = math.log(grid[min(k + 1, grid.size - 1)])
    if hi > lo:
        res = minimize_scalar(
            lambda t: -detection_point(cfg, math.exp(t), P_cutoff).I,
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": 1e-4},
        )
        if -res.fun > best_I:
            best_s, best_I = math.exp(res.x), float(-res.fun)
    return best_s, best_I


def max_qdc_length(cfg: ProtocolConfig) -> float:
    """Message length (bits) reachable before about 1/r tests have run: 4(1-c)/(n c r)."""
    return 4.0 * (1.0 - cfg.c) / (cfg.n * cfg.c * cfg.r)
