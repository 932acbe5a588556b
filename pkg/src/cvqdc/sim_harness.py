"""Monte Carlo experiments: bit error rates, survival of the control test, and the
datasets behind the security-curve and repetition-code figures.

Every block of trials draws from its own stream ``(master_seed, block_index)``
and block results are integer tallies reduced in block order, so the output of
an experiment does not depend on how many worker processes ran it.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from statistics import NormalDist
from typing import Callable, Iterable, Sequence

import numpy as np

from .adversary import AttackModel, IdentityChannel, make_attack
from .analytics import SecurityScenario, detection_point, survival_prob, survival_vs_stolen_curve
from .gauss_num import RngStream, chi2_isf
from .lattice_codec import decode_bits, intrinsic_error, nearest_centers_with_parity
from .protocol_engine import ProtocolConfig, preset
from .rep_code import RepCode, uncorrectable_prob

__all__ = [
    "EstimateWithCI",
    "BerReport",
    "SurvivalEstimate",
    "ExperimentPlan",
    "wilson_interval",
    "estimate_ber",
    "estimate_survival",
    "reproduce_figures",
    "format_number",
    "write_csv",
    "default_N_grid",
    "curve_rows",
    "analytic_ber",
    "BER_COLUMNS",
    "CURVE_COLUMNS",
    "FIG5_COLUMNS",
    "CUTOFF_COLUMNS",
    "FIG_SIGMA2",
    "FIG5_CODES",
]

FIG_SIGMA2 = (0.01, 0.05, 0.1, 0.3, 1.0)
FIG5_CODES = (7, 15, 35, 103)
BLOCK_PAIRS = 4096
_Z95 = NormalDist().inv_cdf(0.975)


@dataclass(frozen=True)
class EstimateWithCI:
    estimate: float
    ci_low: float
    ci_high: float
    trials: int
    successes: int = 0

    def contains(self, value: float) -> bool:
        return self.ci_low <= value <= self.ci_high

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "trials": self.trials,
            "count": self.successes,
        }


def wilson_interval(successes: int, trials: int, z: float = _Z95) -> EstimateWithCI:
    """Frequency with its Wilson score interval (95% by default)."""
    if trials < 1:
        raise ValueError("need at least one trial")
    if not 0 <= successes <= trials:
        raise ValueError(f"successes={successes} outside [0, {trials}]")
    phat = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    centre = (phat + z2 / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z2 / (4 * trials * trials)) / denom
    # the bounds are exactly 0 / 1 at the extremes; rounding would leave a few ulps
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == trials else min(1.0, centre + half)
    return EstimateWithCI(phat, lo, hi, trials, successes)


def _run_blocks(fn: Callable, jobs: Sequence, workers: int) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


# ---------------------------------------------------------------------------
# Bit error rates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BerReport:
    """Per-bit error estimates; the logical ones are only filled in coded mode."""

    bob: EstimateWithCI
    eve: EstimateWithCI | None
    bob_logical: EstimateWithCI | None = None
    eve_logical: EstimateWithCI | None = None

    def to_dict(self) -> dict:
        return {k: (None if v is None else v.to_dict()) for k, v in self.__dict__.items()}


def _ber_block(job) -> tuple[int, int, int, int, int]:
    cfg, attack, master_seed, block, pairs = job
    rng = RngStream(master_seed, block)
    n = cfg.n
    omega = cfg.omega
    std = math.sqrt(cfg.lattice.modulation_variance)
    logical = rng.bits((pairs, 2))
    phys = np.repeat(logical, n, axis=0)
    u, up = phys[:, 0], phys[:, 1]
    sq = rng.normal(0.0, std, u.shape)
    sp = rng.normal(0.0, std, u.shape)
    mq = nearest_centers_with_parity(sq, u, omega)
    mp = nearest_centers_with_parity(sp, up, omega)
    kq, kp = sq - mq, sp - mp
    sq, sp = mq + kq, mp + kp
    eve = attack.tap_many(sq, sp, rng)
    bstd = math.sqrt(attack.bob_variance(cfg.detection_variance))
    bq = sq + rng.normal(0.0, bstd, u.shape)
    bp = sp + rng.normal(0.0, bstd, u.shape)
    truth = np.stack([u, up], axis=1)

    def tally(outq, outp):
        got = np.stack([decode_bits(outq - kq, omega), decode_bits(outp - kp, omega)], axis=1)
        phys_err = int(np.count_nonzero(got != truth))
        votes = got.reshape(pairs, n, 2).sum(axis=1)
        decoded = (votes > (n - 1) // 2).astype(np.int8)
        return phys_err, int(np.count_nonzero(decoded != logical))

    bob_phys, bob_log = tally(bq, bp)
    eve_phys, eve_log = tally(*eve) if eve is not None else (0, 0)
    return 2 * pairs * n, bob_phys, bob_log, eve_phys, eve_log


def estimate_ber(
    cfg: ProtocolConfig,
    attack: AttackModel,
    trials: int,
    master_seed: int,
    *,
    workers: int = 1,
    block_pairs: int = BLOCK_PAIRS,
) -> BerReport:
    """Bob's and the eavesdropper's error rates over ``trials`` message bits.

    Control modes do not touch message decoding, so only the message-mode chain
    (encode, mask, tap, heterodyne, unmask, decode, majority vote) is simulated,
    in array form. In coded mode ``trials`` counts logical bits and each costs
    ``n`` physical bits.
    """
    if trials < 1000:
        raise ValueError(f"estimate_ber needs at least 1000 trials, got {trials}")
    pairs = (trials + 1) // 2
    jobs = []
    block = 0
    while pairs > 0:
        take = min(block_pairs, pairs)
        jobs.append((cfg, attack, master_seed, block, take))
        pairs -= take
        block += 1
    totals = np.zeros(5, dtype=np.int64)
    for part in _run_blocks(_ber_block, jobs, workers):
        totals += np.asarray(part, dtype=np.int64)
    phys, bob_phys, bob_log, eve_phys, eve_log = (int(t) for t in totals)
    logical_bits = phys // cfg.n
    has_eve = attack.eve_variance is not None
    coded = cfg.n > 1
    return BerReport(
        bob=wilson_interval(bob_phys, phys),
        eve=wilson_interval(eve_phys, phys) if has_eve else None,
        bob_logical=wilson_interval(bob_log, logical_bits) if coded else None,
        eve_logical=wilson_interval(eve_log, logical_bits) if coded and has_eve else None,
    )


# ---------------------------------------------------------------------------
# Survival of the control test
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SurvivalEstimate:
    M: int
    terminal: EstimateWithCI
    sequential: EstimateWithCI
    analytic: float


def _survival_block(job) -> np.ndarray:
    cfg, sigma2, thresholds, master_seed, first, count, m_grid = job
    m_max = len(thresholds)
    noise_std = math.sqrt(cfg.detection_variance + sigma2)
    mod_std = math.sqrt(cfg.lattice.modulation_variance)
    idx = np.asarray(m_grid) - 1
    out = np.zeros((2, len(m_grid)), dtype=np.int64)
    for trial in range(first, first + count):
        rng = RngStream(master_seed, trial)
        signal = rng.normal(0.0, mod_std, (m_max, 2))
        beta = signal + rng.normal(0.0, noise_std, (m_max, 2))
        tau = beta - signal
        v = np.cumsum((tau * tau).sum(axis=1)) / cfg.detection_variance
        passed = v < thresholds
        out[0] += passed[idx]
        out[1] += np.logical_and.accumulate(passed)[idx]
    return out


def estimate_survival(
    cfg: ProtocolConfig,
    sigma2: float,
    M_grid: Sequence[int],
    trials: int,
    master_seed: int,
    *,
    workers: int = 1,
    block_trials: int = 1000,
) -> list[SurvivalEstimate]:
    """Empirical probability that an attack adding ``sigma2`` passes the control test.

    Each trial is one session's control-mode record on its own stream
    ``(master_seed, trial)``. For every M in ``M_grid`` it reports the fraction
    passing the single test at M (the quantity the closed form describes) and
    the fraction passing every test up to M (what a sequential session sees).
    """
    if trials < 1000:
        raise ValueError(f"estimate_survival needs at least 1000 trials, got {trials}")
    m_grid = sorted({int(m) for m in M_grid})
    if not m_grid or m_grid[0] < 1:
        raise ValueError("M_grid must contain positive integers")
    thresholds = np.array([chi2_isf(2 * m, cfg.r) for m in range(1, m_grid[-1] + 1)])
    jobs = [
        (cfg, sigma2, thresholds, master_seed, first, min(block_trials, trials - first), m_grid)
        for first in range(0, trials, block_trials)
    ]
    counts = np.zeros((2, len(m_grid)), dtype=np.int64)
    for part in _run_blocks(_survival_block, jobs, workers):
        counts += part
    return [
        SurvivalEstimate(
            M=m,
            terminal=wilson_interval(int(counts[0, i]), trials),
            sequential=wilson_interval(int(counts[1, i]), trials),
            analytic=survival_prob(m, sigma2, cfg.r),
        )
        for i, m in enumerate(m_grid)
    ]


# ---------------------------------------------------------------------------
# Experiment plans
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentPlan:
    configs: tuple[ProtocolConfig, ...]
    sigma2_values: tuple[float, ...]
    trials: int
    master_seed: int
    outputs: frozenset[str] = field(default_factory=lambda: frozenset({"ber"}))

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError("trials must be positive")
        if not self.configs or not self.sigma2_values:
            raise ValueError("experiment grid must be non-empty")
        unknown = set(self.outputs) - {"ber", "survival", "curves", "figures"}
        if unknown:
            raise ValueError(f"unknown outputs requested: {sorted(unknown)}")

    def ber_rows(self, workers: int = 1) -> list[dict]:
        """One BER row per (config, sigma2) with the analytic predictions alongside."""
        rows = []
        for cfg in self.configs:
            for s2 in self.sigma2_values:
                attack = make_attack(s2)
                rep = estimate_ber(cfg, attack, self.trials, self.master_seed, workers=workers)
                rows.append(
                    {
                        "channel": "identity" if isinstance(attack, IdentityChannel) else "ugqcm",
                        "sigma2": s2,
                        "bob_ber": rep.bob.estimate,
                        "bob_ci_lo": rep.bob.ci_low,
                        "bob_ci_hi": rep.bob.ci_high,
                        "eve_ber": rep.eve.estimate if rep.eve else "",
                        "eve_ci_lo": rep.eve.ci_low if rep.eve else "",
                        "eve_ci_hi": rep.eve.ci_high if rep.eve else "",
                        "trials": rep.bob.trials,
                    }
                )
        return rows


BER_COLUMNS = ["channel", "sigma2", "bob_ber", "bob_ci_lo", "bob_ci_hi", "eve_ber", "eve_ci_lo", "eve_ci_hi", "trials"]


# ---------------------------------------------------------------------------
# Figure datasets
# ---------------------------------------------------------------------------


def format_number(x, digits: int | None = None) -> str:
    """Integers verbatim, floats in shortest round-trip form unless ``digits`` is given."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if x.is_integer() and abs(x) < 1e15:
            return str(int(x))
        return repr(x) if digits is None else format(x, f".{digits}g")
    return str(x)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence], digits: int | None = None) -> Path:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_number(x, digits) for x in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def default_N_grid(decades: int = 7, per_decade: int = 40) -> list[int]:
    raw = np.logspace(0, decades, decades * per_decade + 1)
    return sorted({int(round(x)) for x in raw})


def curve_rows(cfg: ProtocolConfig, sigma2_values: Sequence[float], N_grid: Sequence[int]) -> list[tuple]:
    rows = []
    for s2 in sigma2_values:
        for pt in survival_vs_stolen_curve(SecurityScenario(cfg, s2), N_grid):
            rows.append((s2, pt.N, pt.I, pt.P))
    return rows


CURVE_COLUMNS = ["sigma2", "N", "I_bits", "P"]
FIG5_COLUMNS = ["n", "p", "Pn"]
CUTOFF_COLUMNS = ["preset", "sigma2", "M", "N", "I_bits", "P", "alice_bits"]


def reproduce_figures(
    out_dir: str | Path,
    *,
    sigma2_values: Sequence[float] = FIG_SIGMA2,
    N_grid: Sequence[int] | None = None,
    cutoff: float = 0.01,
    digits: int | None = None,
) -> dict[str, Path]:
    """Write the figure datasets into ``out_dir``.

    ``fig4a.csv`` / ``fig4b.csv``: survival versus stolen bits for the basic and
    coded presets, columns ``sigma2,N,I_bits,P``. ``fig5.csv``: logical error of
    repetition codes, columns ``n,p,Pn`` with p stepping by 0.005. ``fig4_cutoffs.csv``:
    where each curve crosses ``cutoff``, columns ``preset,sigma2,M,N,I_bits,P,alice_bits``.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror or exc}") from exc
    grid = default_N_grid() if N_grid is None else list(N_grid)
    paths = {}
    cut_rows = []
    for tag, name in (("fig4a", "basic"), ("fig4b", "coded")):
        cfg = preset(name)
        paths[tag] = write_csv(out / f"{tag}.csv", CURVE_COLUMNS, curve_rows(cfg, sigma2_values, grid), digits)
        for s2 in sigma2_values:
            d = detection_point(cfg, s2, cutoff)
            cut_rows.append((name, s2, d.M, d.N, d.I, d.P, d.alice_bits))
    paths["fig4_cutoffs"] = write_csv(out / "fig4_cutoffs.csv", CUTOFF_COLUMNS, cut_rows, digits)
    ps = [k / 200 for k in range(201)]
    fig5 = [(n, p, uncorrectable_prob(RepCode(n), p)) for n in FIG5_CODES for p in ps]
    paths["fig5"] = write_csv(out / "fig5.csv", FIG5_COLUMNS, fig5, digits)
    return paths


def analytic_ber(cfg: ProtocolConfig, attack: AttackModel) -> dict[str, float | None]:
    """Closed-form counterparts of :func:`estimate_ber`."""
    bob = intrinsic_error(cfg.omega, attack.bob_variance(cfg.detection_variance))
    eve = intrinsic_error(cfg.omega, attack.eve_variance) if attack.eve_variance is not None else None
    code = cfg.code
    return {
        "bob": bob,
        "eve": eve,
        "bob_logical": uncorrectable_prob(code, bob),
        "eve_logical": None if eve is None else uncorrectable_prob(code, eve),
    }
