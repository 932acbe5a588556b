"""Continuous-variable quantum direct communication: lattice codec with Gaussian
masking, message/control-mode protocol with a chi-squared intrusion test, the
Gaussian-cloner attack, repetition-code hardening, and the matching security
analysis and Monte Carlo harness."""

from .adversary import IdentityChannel, UgqcmAttack, make_attack
from .analytics import best_attack, detection_point, max_qdc_length, survival_prob
from .errors import ProtocolOrderError
from .gauss_num import RngStream, binary_entropy, chi2_quantile, regularized_lower_gamma
from .lattice_codec import Amplitude, BitPair, LatticeConfig, intrinsic_error
from .protocol_engine import ProtocolConfig, make_config, preset, run_session
from .rep_code import RepCode, critical_point, uncorrectable_prob

__version__ = "0.1.0"

__all__ = [
    "Amplitude",
    "BitPair",
    "IdentityChannel",
    "LatticeConfig",
    "ProtocolConfig",
    "ProtocolOrderError",
    "RepCode",
    "RngStream",
    "UgqcmAttack",
    "best_attack",
    "binary_entropy",
    "chi2_quantile",
    "critical_point",
    "detection_point",
    "intrinsic_error",
    "make_attack",
    "make_config",
    "max_qdc_length",
    "preset",
    "regularized_lower_gamma",
    "run_session",
    "survival_prob",
    "uncorrectable_prob",
]
