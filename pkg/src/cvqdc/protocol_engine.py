"""Two-party protocol: message-mode / control-mode switching, masking, classical
announcements and Bob's sequential zero-tolerance chi-squared check.

A run is one transmitted mode. In a message mode (MM) Alice sends a masked
lattice-encoded bit pair and reveals the mask after Bob acknowledges detection;
in a control mode (CM) she sends a bare Gaussian signal and reveals it after the
acknowledgement, and Bob folds the residual into his running test statistic.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .adversary import AttackModel, eve_decode_logical, eve_decode_mm
from .errors import ProtocolOrderError
from .gauss_num import RngStream, chi2_isf
from .lattice_codec import (
    DEFAULT_MODULATION_VARIANCE,
    Amplitude,
    BitPair,
    LatticeConfig,
    decode_pair,
    encode_pair,
)
from .rep_code import RepCode, majority_decode

__all__ = [
    "Mode",
    "Verdict",
    "ProtocolConfig",
    "PRESETS",
    "make_config",
    "preset",
    "ControlState",
    "DetectionAck",
    "MaskReveal",
    "SignalReveal",
    "Abort",
    "ClassicalChannel",
    "SessionResult",
    "choose_mode",
    "alice_prepare_mm",
    "alice_prepare_cm",
    "bob_measure",
    "bob_control_update",
    "run_session",
    "check_transcript_order",
    "JsonlTranscript",
]

DEFAULT_MAX_RUNS = 10**6


class Mode(str, enum.Enum):
    MM = "MM"
    CM = "CM"


class Verdict(str, enum.Enum):
    CONTINUE = "continue"
    ABORT = "abort"


@dataclass(frozen=True)
class ProtocolConfig:
    lattice: LatticeConfig
    c: float
    r: float = 5e-7
    code: RepCode = field(default_factory=RepCode)
    detection_variance: float = 1.0
    noise_threshold: float = 0.0
    max_runs: int = DEFAULT_MAX_RUNS

    def __post_init__(self) -> None:
        # c = 0 and c = 1 are allowed as degenerate schedules for testing
        if not 0.0 <= self.c <= 1.0:
            raise ValueError(f"control-mode probability c must lie in [0, 1], got {self.c!r}")
        if not 0.0 < self.r < 1.0:
            raise ValueError(f"confidence level r must lie in (0, 1), got {self.r!r}")
        if not self.detection_variance > 0:
            raise ValueError(f"detection variance must be positive, got {self.detection_variance!r}")
        if self.noise_threshold != 0.0:
            raise ValueError("only the zero-tolerance test (noise_threshold = 0) is supported")
        if int(self.max_runs) != self.max_runs or self.max_runs < 1:
            raise ValueError(f"max_runs must be a positive integer, got {self.max_runs!r}")

    @property
    def omega(self) -> float:
        return self.lattice.omega

    @property
    def n(self) -> int:
        return self.code.n


PRESETS: dict[str, dict[str, float]] = {
    "basic": {"omega": 2.57, "c": 69 / 70, "r": 5e-7, "n": 1},
    "coded": {"omega": 1.0, "c": 0.5, "r": 5e-7, "n": 35},
}


def make_config(
    omega: float,
    c: float,
    r: float = 5e-7,
    n: int = 1,
    modulation_variance: float = DEFAULT_MODULATION_VARIANCE,
    max_runs: int = DEFAULT_MAX_RUNS,
) -> ProtocolConfig:
    return ProtocolConfig(
        lattice=LatticeConfig(omega, modulation_variance),
        c=c,
        r=r,
        code=RepCode(int(n)),
        max_runs=int(max_runs),
    )


def preset(name: str, **overrides) -> ProtocolConfig:
    """One of the two headline configurations, optionally with fields overridden."""
    try:
        params = dict(PRESETS[name])
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    params.update(overrides)
    return make_config(**params)


@dataclass(frozen=True)
class ControlState:
    """Number of control modes so far and the sum of their squared residual quadratures."""

    M: int = 0
    v: float = 0.0


# -- classical messages ------------------------------------------------------


@dataclass(frozen=True)
class DetectionAck:
    pass


@dataclass(frozen=True)
class MaskReveal:
    mask: Amplitude


@dataclass(frozen=True)
class SignalReveal:
    signal: Amplitude


@dataclass(frozen=True)
class Abort:
    reason: str


ClassicalMessage = DetectionAck | MaskReveal | SignalReveal | Abort
TranscriptSink = Callable[[dict], None]


class ClassicalChannel:
    """Authenticated classical side channel that enforces per-run message order.

    Every run goes: signal sent, Bob's detection acknowledged, then exactly one
    reveal matching the run's mode. Violations raise :class:`ProtocolOrderError`.
    """

    def __init__(self, sink: TranscriptSink | None = None) -> None:
        self._sink = sink
        self.run: int | None = None
        self.mode: Mode | None = None
        self._acked = False
        self._revealed = False

    def _emit(self, event: str, **payload) -> None:
        if self._sink is not None:
            self._sink({"run": self.run, "mode": self.mode.value if self.mode else None, "event": event, **payload})

    def signal_sent(self, run: int, mode: Mode, signal: Amplitude) -> None:
        self.run, self.mode = run, mode
        self._acked = False
        self._revealed = False
        self._emit("signal", q=signal.q, p=signal.p)

    def measured(self, beta: Amplitude) -> None:
        self._emit("measure", q=beta.q, p=beta.p)

    def send(self, msg: ClassicalMessage) -> None:
        if isinstance(msg, Abort):
            self._emit("abort", reason=msg.reason)
            return
        if self.run is None:
            raise ProtocolOrderError("classical message before any signal was sent")
        if isinstance(msg, DetectionAck):
            if self._acked:
                raise ProtocolOrderError(f"run {self.run}: detection acknowledged twice")
            self._acked = True
            self._emit("ack")
            return
        if not self._acked:
            raise ProtocolOrderError(f"run {self.run}: reveal before Bob's detection acknowledgement")
        if self._revealed:
            raise ProtocolOrderError(f"run {self.run}: second reveal in the same run")
        if isinstance(msg, MaskReveal):
            if self.mode is not Mode.MM:
                raise ProtocolOrderError(f"run {self.run}: mask revealed in a control mode")
            self._revealed = True
            self._emit("mask_reveal", q=msg.mask.q, p=msg.mask.p)
        elif isinstance(msg, SignalReveal):
            if self.mode is not Mode.CM:
                raise ProtocolOrderError(f"run {self.run}: signal revealed in a message mode")
            self._revealed = True
            self._emit("signal_reveal", q=msg.signal.q, p=msg.signal.p)
        else:
            raise TypeError(f"not a classical message: {msg!r}")

    def note(self, event: str, **payload) -> None:
        self._emit(event, **payload)


# -- the two parties ---------------------------------------------------------


def choose_mode(cfg: ProtocolConfig, rng: RngStream) -> Mode:
    """Control mode with probability ``c``, message mode otherwise."""
    return Mode.CM if rng.uniform() < cfg.c else Mode.MM


def alice_prepare_mm(bits: BitPair, cfg: ProtocolConfig, rng: RngStream) -> tuple[Amplitude, Amplitude]:
    """Signal to transmit and the mask Alice holds back until Bob acknowledges."""
    _, mask, signal = encode_pair(bits, cfg.lattice, rng)
    return signal, mask


def alice_prepare_cm(cfg: ProtocolConfig, rng: RngStream) -> Amplitude:
    std = math.sqrt(cfg.lattice.modulation_variance)
    return Amplitude(rng.normal(0.0, std), rng.normal(0.0, std))


def bob_measure(received_mean: Amplitude, received_variance: float, rng: RngStream) -> Amplitude:
    """Heterodyne outcome: each quadrature picks up independent N(0, received_variance) noise."""
    if received_variance < 0:
        raise ValueError(f"received variance must be non-negative, got {received_variance!r}")
    if received_variance == 0:
        return received_mean
    std = math.sqrt(received_variance)
    return Amplitude(received_mean.q + rng.normal(0.0, std), received_mean.p + rng.normal(0.0, std))


def bob_control_update(
    state: ControlState, tau: Amplitude, cfg: ProtocolConfig
) -> tuple[ControlState, Verdict]:
    """Fold one control residual into (M, v) and test against the chi-squared quantile.

    Residuals are measured in units of the detection shot noise, so ``v`` is
    chi-squared with ``2M`` degrees of freedom when nobody adds noise.
    """
    scale = cfg.detection_variance
    new = ControlState(state.M + 1, state.v + (tau.q * tau.q + tau.p * tau.p) / scale)
    threshold = chi2_isf(2 * new.M, cfg.r)
    return new, (Verdict.CONTINUE if new.v < threshold else Verdict.ABORT)


# -- sessions ----------------------------------------------------------------


@dataclass
class SessionResult:
    runs_executed: int = 0
    message_bits_sent: int = 0
    message_bits_delivered_correctly: int = 0
    aborted: bool = False
    abort_run_index: int | None = None
    control_modes: int = 0
    message_modes: int = 0
    control_v: float = 0.0
    physical_bits: int = 0
    bob_physical_errors: int = 0
    eve_physical_errors: int = 0
    eve_bit_record: list[tuple[int, int]] = field(default_factory=list)

    @property
    def bob_errors(self) -> int:
        return self.message_bits_sent - self.message_bits_delivered_correctly

    @property
    def efficiency(self) -> float:
        """Delivered message bits per transmitted mode."""
        return self.message_bits_sent / self.runs_executed if self.runs_executed else 0.0

    def to_dict(self) -> dict:
        return {
            "runs_executed": self.runs_executed,
            "message_bits_sent": self.message_bits_sent,
            "message_bits_delivered_correctly": self.message_bits_delivered_correctly,
            "aborted": self.aborted,
            "abort_run_index": self.abort_run_index,
            "control_modes": self.control_modes,
            "message_modes": self.message_modes,
            "control_v": self.control_v,
            "physical_bits": self.physical_bits,
            "bob_physical_errors": self.bob_physical_errors,
            "eve_physical_errors": self.eve_physical_errors,
            "eve_logical_bits": len(self.eve_bit_record),
            "eve_logical_errors": sum(1 for t, e in self.eve_bit_record if t != e),
        }


def _pairs(message: Sequence[int]) -> list[tuple[int, int]]:
    bits = [int(b) for b in message]
    if len(bits) % 2:
        raise ValueError(f"message length must be even (bit pairs), got {len(bits)}")
    if any(b not in (0, 1) for b in bits):
        raise ValueError("message must consist of 0/1 bits")
    return list(zip(bits[0::2], bits[1::2]))


def run_session(
    cfg: ProtocolConfig,
    attack: AttackModel,
    message: Sequence[int],
    master_seed: int,
    *,
    stream_id: int = 0,
    transcript: TranscriptSink | None = None,
) -> SessionResult:
    """Run the protocol until the message is delivered, ``max_runs`` is hit, or a
    control mode fails the chi-squared test.

    In coded mode every logical bit pair is sent as ``n`` identical physical pairs
    over successive message modes and majority-decoded by Bob (and by the
    eavesdropper when there is one). A codeword left incomplete at an abort is
    not counted. Message modes decoded before an abort stay delivered.
    """
    pairs = _pairs(message)
    rng = RngStream(master_seed, stream_id)
    chan = ClassicalChannel(transcript)
    code = cfg.code
    omega = cfg.omega
    delta = cfg.detection_variance
    res = SessionResult()
    state = ControlState()

    pair_idx = 0
    filled = 0
    bob_u: list[int] = []
    bob_up: list[int] = []
    eve_u: list[int] = []
    eve_up: list[int] = []

    run = 0
    while run < cfg.max_runs and pair_idx < len(pairs):
        mode = choose_mode(cfg, rng)
        if mode is Mode.CM:
            signal = alice_prepare_cm(cfg, rng)
            chan.signal_sent(run, mode, signal)
            bob_var, _ = attack.tap(signal, rng, delta)
            beta = bob_measure(signal, bob_var, rng)
            chan.measured(beta)
            chan.send(DetectionAck())
            chan.send(SignalReveal(signal))
            state, verdict = bob_control_update(state, beta - signal, cfg)
            res.control_modes += 1
            if transcript is not None:
                chan.note("verdict", M=state.M, v=state.v, threshold=chi2_isf(2 * state.M, cfg.r), verdict=verdict.value)
            if verdict is Verdict.ABORT:
                chan.send(Abort(f"chi-squared test failed after {state.M} control modes"))
                res.aborted = True
                res.abort_run_index = run
                run += 1
                break
        else:
            u, up = pairs[pair_idx]
            signal, mask = alice_prepare_mm(BitPair(u, up), cfg, rng)
            chan.signal_sent(run, mode, signal)
            bob_var, eve_outcome = attack.tap(signal, rng, delta)
            beta = bob_measure(signal, bob_var, rng)
            chan.measured(beta)
            chan.send(DetectionAck())
            chan.send(MaskReveal(mask))
            got = decode_pair(beta, mask, omega)
            res.message_modes += 1
            res.physical_bits += 2
            res.bob_physical_errors += (got.u != u) + (got.u_prime != up)
            bob_u.append(got.u)
            bob_up.append(got.u_prime)
            if eve_outcome is not None:
                eve = eve_decode_mm(eve_outcome, mask, omega)
                res.eve_physical_errors += (eve.u != u) + (eve.u_prime != up)
                eve_u.append(eve.u)
                eve_up.append(eve.u_prime)
            if transcript is not None:
                chan.note("decode", bits=[got.u, got.u_prime])
            filled += 1
            if filled == code.n:
                dec_u = majority_decode(bob_u, code)
                dec_up = majority_decode(bob_up, code)
                res.message_bits_sent += 2
                res.message_bits_delivered_correctly += (dec_u == u) + (dec_up == up)
                if eve_u:
                    res.eve_bit_record.append((u, eve_decode_logical(eve_u, code)))
                    res.eve_bit_record.append((up, eve_decode_logical(eve_up, code)))
                bob_u.clear()
                bob_up.clear()
                eve_u.clear()
                eve_up.clear()
                filled = 0
                pair_idx += 1
        run += 1

    res.runs_executed = run
    res.control_v = state.v
    return res


def check_transcript_order(events: Iterable[dict]) -> None:
    """Raise :class:`ProtocolOrderError` if any reveal precedes its detection ack."""
    acked: dict[int, bool] = {}
    for ev in events:
        run, kind = ev.get("run"), ev["event"]
        if kind == "signal":
            acked[run] = False
        elif kind == "ack":
            if run not in acked:
                raise ProtocolOrderError(f"run {run}: ack without a signal")
            acked[run] = True
        elif kind in ("mask_reveal", "signal_reveal"):
            if not acked.get(run, False):
                raise ProtocolOrderError(f"run {run}: {kind} before detection ack")
            if (kind == "mask_reveal") != (ev["mode"] == Mode.MM.value):
                raise ProtocolOrderError(f"run {run}: {kind} in a {ev['mode']} run")


class JsonlTranscript:
    """Transcript sink writing one JSON object per line.

    Keys: ``run`` (int), ``mode`` ("MM"/"CM"), ``event`` (one of signal, measure,
    ack, mask_reveal, signal_reveal, decode, verdict, abort) and the event
    payload (``q``/``p`` amplitudes, ``bits``, ``M``/``v``/``threshold``/``verdict``,
    ``reason``).
    """

    def __init__(self, fh) -> None:
        self._fh = fh

    def __call__(self, event: dict) -> None:
        self._fh.write(json.dumps(event, sort_keys=True) + "\n")
