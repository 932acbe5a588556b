"""Channel models: the untouched channel and the individual Gaussian-cloner attack.

An attack is described by its measurement statistics only. Bob's heterodyne
outcome on a tapped mode is Gaussian around the signal with variance
``detection_variance + sigma_B^2``; the eavesdropper heterodynes her own clone
with variance ``detection_variance + sigma_E^2`` and the two noises are
independent given the signal.
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ProtocolOrderError
from .gauss_num import RngStream
from .lattice_codec import Amplitude, BitPair, decode_pair
from .rep_code import RepCode, majority_decode

__all__ = [
    "AttackModel",
    "IdentityChannel",
    "UgqcmAttack",
    "identity_channel",
    "ugqcm_tap",
    "eve_decode_mm",
    "eve_decode_logical",
    "make_attack",
]

HETERODYNE = 1.0


class AttackModel(ABC):
    """What happens to a signal between Alice and Bob."""

    #: added noise on Bob's side (sigma_B^2)
    bob_added_variance: float = 0.0

    def bob_variance(self, detection_variance: float = HETERODYNE) -> float:
        return detection_variance + self.bob_added_variance

    @property
    def eve_variance(self) -> float | None:
        """Total noise on the eavesdropper's heterodyne record, if there is one."""
        return None

    @abstractmethod
    def tap(
        self, signal: Amplitude, rng: RngStream, detection_variance: float = HETERODYNE
    ) -> tuple[float, Amplitude | None]:
        """Return Bob's measurement variance and the eavesdropper's outcome (or None)."""

    def tap_many(self, signal_q: np.ndarray, signal_p: np.ndarray, rng: RngStream):
        """Vectorized eavesdropper outcomes for a batch of signals (None without an eavesdropper)."""
        return None


class IdentityChannel(AttackModel):
    """No eavesdropper: Bob only sees his own shot noise."""

    sigma2 = 0.0

    def tap(self, signal, rng, detection_variance=HETERODYNE):
        return detection_variance, None

    def __repr__(self) -> str:
        return "IdentityChannel()"


@dataclass(frozen=True)
class UgqcmAttack(AttackModel):
    """Universal Gaussian cloner with added noise ``sigma2`` on Bob's clone.

    The eavesdropper's clone carries the dual noise ``1 / (4 * sigma2)``.
    """

    sigma2: float

    def __post_init__(self) -> None:
        if not self.sigma2 > 0 or not math.isfinite(self.sigma2):
            raise ValueError(f"cloner noise must be positive and finite, got {self.sigma2!r}")

    @property
    def bob_added_variance(self) -> float:  # type: ignore[override]
        return self.sigma2

    @property
    def sigma2_eve(self) -> float:
        return 0.25 / self.sigma2

    @property
    def eve_variance(self) -> float:
        return HETERODYNE + self.sigma2_eve

    def tap(self, signal, rng, detection_variance=HETERODYNE):
        std = math.sqrt(detection_variance + self.sigma2_eve)
        outcome = Amplitude(signal.q + rng.normal(0.0, std), signal.p + rng.normal(0.0, std))
        return detection_variance + self.sigma2, outcome

    def tap_many(self, signal_q, signal_p, rng):
        std = math.sqrt(self.eve_variance)
        return (
            signal_q + rng.normal(0.0, std, np.shape(signal_q)),
            signal_p + rng.normal(0.0, std, np.shape(signal_p)),
        )


def make_attack(sigma2: float | None) -> AttackModel:
    """UGQCM for positive ``sigma2``; the identity channel for 0 or None."""
    if not sigma2:
        return IdentityChannel()
    return UgqcmAttack(sigma2)


def identity_channel(signal: Amplitude) -> tuple[float, None]:
    return HETERODYNE, None


def ugqcm_tap(attack: UgqcmAttack, signal: Amplitude, rng: RngStream) -> tuple[float, Amplitude]:
    return attack.tap(signal, rng)


def eve_decode_mm(eve_outcome: Amplitude, mask: Amplitude | None, omega: float) -> BitPair:
    """Eavesdropper's bit pair once the mask is public; same rule as Bob's."""
    if mask is None:
        raise ProtocolOrderError("eavesdropper cannot decode a message mode before the mask is revealed")
    return decode_pair(eve_outcome, mask, omega)


def eve_decode_logical(bits: Sequence[int], code: RepCode) -> int:
    if len(bits) != code.n:
        raise ValueError(f"incomplete codeword: {len(bits)} of {code.n} physical bits collected")
    return majority_decode(bits, code)
