"""Square-lattice phase-space codec with Gaussian masking.

The phase space is tiled by square cells of side ``2*omega``; cell ``k`` along an
axis covers ``[2*omega*k - omega, 2*omega*k + omega)`` and its parity is one bit.
A bit pair is carried by the parities of the target cell along q and p.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gauss_num import RngStream, gaussian_interval_prob

__all__ = [
    "Amplitude",
    "BitPair",
    "LatticeConfig",
    "DEFAULT_MODULATION_VARIANCE",
    "cell_index",
    "decode_bit",
    "decode_bits",
    "nearest_center_with_parity",
    "nearest_centers_with_parity",
    "encode_pair",
    "decode_pair",
    "intrinsic_error",
]

DEFAULT_MODULATION_VARIANCE = 100.0
_TAIL_CUTOFF = 1e-15


@dataclass(frozen=True, slots=True)
class Amplitude:
    """A phase-space point as a pair of quadratures (shot-noise units)."""

    q: float
    p: float

    def __add__(self, other: Amplitude) -> Amplitude:
        return Amplitude(self.q + other.q, self.p + other.p)

    def __sub__(self, other: Amplitude) -> Amplitude:
        return Amplitude(self.q - other.q, self.p - other.p)

    @property
    def complex(self) -> complex:
        """Complex amplitude (q + ip) / sqrt(2)."""
        return complex(self.q, self.p) / math.sqrt(2.0)

    @classmethod
    def from_complex(cls, alpha: complex) -> Amplitude:
        return cls(math.sqrt(2.0) * alpha.real, math.sqrt(2.0) * alpha.imag)


@dataclass(frozen=True, slots=True)
class BitPair:
    u: int
    u_prime: int

    def __post_init__(self) -> None:
        if self.u not in (0, 1) or self.u_prime not in (0, 1):
            raise ValueError(f"bits must be 0 or 1, got ({self.u!r}, {self.u_prime!r})")


@dataclass(frozen=True)
class LatticeConfig:
    """Half-step ``omega`` and per-quadrature variance of the Gaussian signal."""

    omega: float
    modulation_variance: float = DEFAULT_MODULATION_VARIANCE

    def __post_init__(self) -> None:
        if not self.omega > 0 or not math.isfinite(self.omega):
            raise ValueError(f"omega must be positive, got {self.omega!r}")
        floor = 10.0 * max(1.0, self.omega**2)
        if not self.modulation_variance >= floor:
            raise ValueError(
                f"modulation_variance={self.modulation_variance!r} is below the highly "
                f"modulated floor 10*max(1, omega^2) = {floor:g}"
            )


def _check_omega(omega: float) -> None:
    if not omega > 0:
        raise ValueError(f"omega must be positive, got {omega!r}")


def cell_index(x: float, omega: float) -> int:
    """Index of the lattice cell containing ``x`` along one axis."""
    _check_omega(omega)
    return math.floor(x / (2.0 * omega) + 0.5)


def decode_bit(x: float, omega: float) -> int:
    """Parity of the cell containing ``x`` (Python's ``%`` maps -1 to 1)."""
    return cell_index(x, omega) % 2


def decode_bits(x: np.ndarray, omega: float) -> np.ndarray:
    """Vectorized :func:`decode_bit`."""
    _check_omega(omega)
    return (np.floor(np.asarray(x) / (2.0 * omega) + 0.5).astype(np.int64) % 2).astype(np.int8)


def nearest_center_with_parity(x: float, bit: int, omega: float) -> float:
    """The cell center ``2*omega*k`` with ``k % 2 == bit`` closest to ``x``.

    Equidistant candidates resolve toward the positive side.
    """
    _check_omega(omega)
    j = math.floor((x - 2.0 * omega * bit) / (4.0 * omega) + 0.5)
    return 2.0 * omega * (2 * j + bit)


def nearest_centers_with_parity(x: np.ndarray, bits: np.ndarray, omega: float) -> np.ndarray:
    """Vectorized :func:`nearest_center_with_parity`."""
    _check_omega(omega)
    bits = np.asarray(bits)
    j = np.floor((np.asarray(x) - 2.0 * omega * bits) / (4.0 * omega) + 0.5)
    return 2.0 * omega * (2.0 * j + bits)


def _mask_split(signal: float, bit: int, omega: float) -> tuple[float, float, float]:
    message = nearest_center_with_parity(signal, bit, omega)
    mask = signal - message
    # re-derive the transmitted value so that signal - mask == message holds bit-exactly
    return message + mask, mask, message


def encode_pair(
    bits: BitPair, cfg: LatticeConfig, rng: RngStream
) -> tuple[Amplitude, Amplitude, Amplitude]:
    """Lattice-encode and mask a bit pair.

    The signal is drawn from the modulation Gaussian first and the message is the
    nearest cell center of the requested parity, so the transmitted amplitude is
    Gaussian while each mask quadrature stays within ``2*omega``.

    Returns ``(message, mask, signal)``.
    """
    std = math.sqrt(cfg.modulation_variance)
    sq, mq, msq = _mask_split(rng.normal(0.0, std), bits.u, cfg.omega)
    sp, mp, msp = _mask_split(rng.normal(0.0, std), bits.u_prime, cfg.omega)
    return Amplitude(msq, msp), Amplitude(mq, mp), Amplitude(sq, sp)


def decode_pair(measured: Amplitude, mask: Amplitude, omega: float) -> BitPair:
    """Unmask a measured amplitude and read the cell parities."""
    return BitPair(decode_bit(measured.q - mask.q, omega), decode_bit(measured.p - mask.p, omega))


def intrinsic_error(omega: float, delta: float) -> float:
    """Per-bit probability that Gaussian noise of variance ``delta`` lands in an
    odd-offset cell, i.e. twice the N(0, delta) mass on the bands
    ``[(4j+1)omega, (4j+3)omega]``, j = 0, 1, ...
    """
    _check_omega(omega)
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta!r}")
    total = 0.0
    j = 0
    while True:
        term = gaussian_interval_prob((4 * j + 1) * omega, (4 * j + 3) * omega, delta)
        total += term
        if term < _TAIL_CUTOFF:
            break
        j += 1
    return 2.0 * total
