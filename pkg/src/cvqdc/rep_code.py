"""Odd-length repetition code with majority-vote decoding."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

__all__ = ["RepCode", "encode", "majority_decode", "uncorrectable_prob", "critical_point"]


@dataclass(frozen=True)
class RepCode:
    """Codeword length ``n = 2m + 1``; any ``m`` flips are corrected."""

    n: int = 1

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 1 or self.n % 2 == 0:
            raise ValueError(f"repetition code length must be an odd positive integer, got {self.n!r}")

    @property
    def m(self) -> int:
        return (self.n - 1) // 2


def encode(bit: int, code: RepCode) -> list[int]:
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit!r}")
    return [bit] * code.n


def majority_decode(word: Sequence[int], code: RepCode) -> int:
    if len(word) != code.n:
        raise ValueError(f"codeword has length {len(word)}, expected {code.n}")
    return 1 if sum(word) > code.m else 0


def uncorrectable_prob(code: RepCode, p: float) -> float:
    """Probability that more than ``m`` of the ``n`` bits flip, flips i.i.d. with rate ``p``.

    Terms are formed from exact log-binomials, so long codes do not overflow.
    Above p = 1/2 the complementary tail is summed instead (odd n makes
    P_n(p) = 1 - P_n(1 - p) exact), which keeps the curve monotone near 1.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p!r}")
    n, m = code.n, code.m
    if m == 0:
        return p
    if p > 0.5:
        return 1.0 - _upper_tail(n, m, 1.0 - p)
    return _upper_tail(n, m, p)


def _upper_tail(n: int, m: int, p: float) -> float:
    """P(Binomial(n, p) > m) for p <= 1/2."""
    if p == 0.0:
        return 0.0
    log_p = math.log(p)
    log_q = math.log1p(-p)
    terms = [
        math.exp(math.log(math.comb(n, k)) + k * log_p + (n - k) * log_q)
        for k in range(m + 1, n + 1)
    ]
    return min(1.0, math.fsum(terms))


def critical_point(code: RepCode, target_logical_error: float = 0.01, tol: float = 1e-9) -> float:
    """Physical flip rate at which the logical error reaches ``target_logical_error``.

    Found by bisection on [0, 1/2], where the logical error is strictly increasing.
    """
    if not 0.0 < target_logical_error < 0.5:
        raise ValueError(f"target must lie in (0, 0.5), got {target_logical_error!r}")
    lo, hi = 0.0, 0.5
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if uncorrectable_prob(code, mid) < target_logical_error:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
