"""Command-line front end.

Subcommands::

    cvqdc epsilon  --omega 2.57 --delta 1
    cvqdc pn       --n 35 --p 0.32 | --sweep | --target 0.01
    cvqdc survival --M 100 --sigma2 0.3 [--r 5e-7]
    cvqdc maxlen   --preset coded
    cvqdc curve    --preset basic --cutoff 0.01 [--sigma2 0.01,0.05] [--out curve.csv]
    cvqdc ber      --preset basic --sigma2 0,0.05,1 --trials 100000
    cvqdc simulate run.json --out results.json [--transcript log.jsonl]
    cvqdc figures  --out-dir figs/

Exit codes: 0 success, 2 usage or validation error, 3 I/O error.
The default seed is read from ``CVQDC_SEED`` when set; ``--seed`` wins over it.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Sequence

from . import analytics
from .adversary import make_attack
from .gauss_num import RngStream
from .lattice_codec import DEFAULT_MODULATION_VARIANCE, intrinsic_error
from .protocol_engine import DEFAULT_MAX_RUNS, PRESETS, JsonlTranscript, ProtocolConfig, make_config, run_session
from .rep_code import RepCode, critical_point, uncorrectable_prob
from .sim_harness import (
    BER_COLUMNS,
    CURVE_COLUMNS,
    FIG_SIGMA2,
    ExperimentPlan,
    analytic_ber,
    curve_rows,
    default_N_grid,
    estimate_ber,
    format_number,
    reproduce_figures,
    wilson_interval,
    write_csv,
)

SEED_ENV = "CVQDC_SEED"
EXIT_USAGE = 2
EXIT_IO = 3
# session streams live far above the block ids used by the BER estimator
SESSION_STREAM = 1 << 63
MESSAGE_STREAM = SESSION_STREAM + 1


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Run configuration file
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    """Contents of a ``simulate`` config file (JSON object, strict keys)."""

    omega: float = PRESETS["basic"]["omega"]
    c: float = PRESETS["basic"]["c"]
    r: float = PRESETS["basic"]["r"]
    n: int = 1
    modulation_variance: float = DEFAULT_MODULATION_VARIANCE
    sigma2: float = 0.0
    trials: int = 10_000
    seed: int | None = None
    max_runs: int = DEFAULT_MAX_RUNS

    def __post_init__(self) -> None:
        for name in ("omega", "c", "r", "modulation_variance", "sigma2"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                raise UsageError(f"config key {name!r} must be a finite number, got {value!r}")
        for name in ("n", "trials", "max_runs"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise UsageError(f"config key {name!r} must be an integer, got {value!r}")
        if self.seed is not None and (isinstance(self.seed, bool) or not isinstance(self.seed, int)):
            raise UsageError(f"config key 'seed' must be an integer, got {self.seed!r}")
        if self.sigma2 < 0:
            raise UsageError("sigma2 must be non-negative (0 means no eavesdropper)")
        if self.trials < 1000:
            raise UsageError("trials must be at least 1000")
        if self.trials % 2:
            raise UsageError("trials (message bits) must be even")
        try:
            self.protocol()
        except ValueError as exc:
            raise UsageError(str(exc)) from None

    def protocol(self) -> ProtocolConfig:
        if not 0.0 < self.c < 1.0:
            raise ValueError(f"c must lie strictly inside (0, 1), got {self.c!r}")
        return make_config(self.omega, self.c, self.r, self.n, self.modulation_variance, self.max_runs)

    @classmethod
    def from_mapping(cls, data: dict) -> RunConfig:
        if not isinstance(data, dict):
            raise UsageError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> RunConfig:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read config {path}: {exc.strerror or exc}") from None
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {path} is not valid JSON: {exc}") from None
        return cls.from_mapping(data)

    def dumps(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def resolve_seed(flag: int | None, configured: int | None = None) -> int:
    if flag is not None:
        return flag
    if configured is not None:
        return configured
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return 0


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _protocol_from_args(args) -> ProtocolConfig:
    if args.config:
        return RunConfig.load(args.config).protocol()
    params = dict(PRESETS[args.preset])
    return make_config(**params)


def _emit(line: str, out=None) -> None:
    (out or sys.stdout).write(line + "\n")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_epsilon(args) -> int:
    _emit(format(intrinsic_error(args.omega, args.delta), f".{args.digits or 6}g"))
    return 0


def cmd_pn(args) -> int:
    code = RepCode(args.n)
    if args.target is not None:
        _emit(format_number(critical_point(code, args.target), args.digits))
    elif args.sweep:
        steps = int(round(1.0 / args.step))
        rows = [(code.n, k / steps, uncorrectable_prob(code, k / steps)) for k in range(steps + 1)]
        _emit("n,p,Pn")
        for row in rows:
            _emit(",".join(format_number(x, args.digits) for x in row))
    elif args.p is not None:
        _emit(format_number(uncorrectable_prob(code, args.p), args.digits))
    else:
        raise UsageError("pn needs one of --p, --sweep or --target")
    return 0


def cmd_survival(args) -> int:
    _emit(format_number(analytics.survival_prob(args.M, args.sigma2, args.r), args.digits))
    return 0


def cmd_maxlen(args) -> int:
    cfg = _protocol_from_args(args)
    _emit(format_number(analytics.max_qdc_length(cfg), args.digits))
    return 0


def cmd_curve(args) -> int:
    cfg = _protocol_from_args(args)
    grid = default_N_grid(args.decades, args.per_decade)
    rows = curve_rows(cfg, args.sigma2, grid)
    best_s2, best_I = analytics.best_attack(cfg, args.cutoff)
    summary = f"best sigma2={format_number(best_s2, args.digits)}, I_at_cutoff={format_number(best_I, args.digits)}"
    if args.out:
        write_csv(Path(args.out), CURVE_COLUMNS, rows, args.digits)
        _emit(summary)
    else:
        _emit(",".join(CURVE_COLUMNS))
        for row in rows:
            _emit(",".join(format_number(x, args.digits) for x in row))
        _emit(summary, sys.stderr)
    return 0


def cmd_ber(args) -> int:
    cfg = _protocol_from_args(args)
    plan = ExperimentPlan((cfg,), tuple(args.sigma2), args.trials, resolve_seed(args.seed))
    rows = [[row[k] for k in BER_COLUMNS] for row in plan.ber_rows(workers=args.workers)]
    if args.out:
        write_csv(Path(args.out), BER_COLUMNS, rows, args.digits)
    else:
        _emit(",".join(BER_COLUMNS))
        for row in rows:
            _emit(",".join(format_number(x, args.digits) for x in row))
    return 0


def simulate(run: RunConfig, seed: int, transcript_path: str | None = None, workers: int = 1) -> dict:
    """Run one protocol session plus a BER estimate and collect everything as a JSON-ready dict."""
    cfg = run.protocol()
    attack = make_attack(run.sigma2)
    message = RngStream(seed, MESSAGE_STREAM).bits(run.trials).tolist()
    if transcript_path:
        try:
            with open(transcript_path, "w") as fh:
                session = run_session(cfg, attack, message, seed, stream_id=SESSION_STREAM, transcript=JsonlTranscript(fh))
        except OSError as exc:
            raise OSError(f"cannot write transcript {transcript_path}: {exc.strerror or exc}") from exc
    else:
        session = run_session(cfg, attack, message, seed, stream_id=SESSION_STREAM)
    ber = estimate_ber(cfg, attack, run.trials, seed, workers=workers)
    predicted = analytic_ber(cfg, attack)
    session_doc = session.to_dict()
    session_doc["efficiency"] = session.efficiency
    if session.message_bits_sent:
        session_doc["bob_ber"] = wilson_interval(session.bob_errors, session.message_bits_sent).to_dict()
    else:
        session_doc["bob_ber"] = None
    analytic_doc = {
        "bob_bit_error": predicted["bob"],
        "eve_bit_error": predicted["eve"],
        "bob_logical_error": predicted["bob_logical"],
        "eve_logical_error": predicted["eve_logical"],
        "max_qdc_length_bits": analytics.max_qdc_length(cfg),
        "efficiency": 2 * (1 - cfg.c) / cfg.n,
    }
    if run.sigma2 > 0:
        d = analytics.detection_point(cfg, run.sigma2, 0.01)
        analytic_doc["detection_at_1pct"] = {"M": d.M, "N": d.N, "I_bits": d.I, "alice_bits": d.alice_bits}
        analytic_doc["stolen_bits_per_mm"] = analytics.stolen_info(run.sigma2, cfg)
    return {
        "config": asdict(run) | {"seed": seed},
        "channel": "identity" if run.sigma2 == 0 else "ugqcm",
        "session": session_doc,
        "aborted": session.aborted,
        "ber": ber.to_dict(),
        "analytic": analytic_doc,
        "transcript": transcript_path,
    }


def cmd_simulate(args) -> int:
    run = RunConfig.load(args.config)
    seed = resolve_seed(args.seed, run.seed)
    doc = simulate(run, seed, args.transcript, args.workers)
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out:
        try:
            Path(args.out).write_text(text)
        except OSError as exc:
            raise OSError(f"cannot write results {args.out}: {exc.strerror or exc}") from exc
    else:
        sys.stdout.write(text)
    return 0


def cmd_figures(args) -> int:
    paths = reproduce_figures(args.out_dir, digits=args.digits)
    for name, path in paths.items():
        _emit(f"{name}: {path}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_protocol_source(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", choices=sorted(PRESETS), default="basic", help="headline parameter set (default: basic)")
    p.add_argument("--config", help="JSON run config; overrides --preset")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cvqdc",
        description="Continuous-variable quantum direct communication: analysis and simulation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("epsilon", help="intrinsic per-bit decoding error")
    p.add_argument("--omega", type=float, required=True)
    p.add_argument("--delta", type=float, default=1.0)
    p.set_defaults(func=cmd_epsilon)

    p = sub.add_parser("pn", help="repetition-code logical error or critical point")
    p.add_argument("--n", type=int, required=True)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--p", type=float)
    mode.add_argument("--sweep", action="store_true", help="CSV table over p in [0, 1]")
    mode.add_argument("--target", type=float, help="solve for p at this logical error")
    p.add_argument("--step", type=float, default=0.005)
    p.set_defaults(func=cmd_pn)

    p = sub.add_parser("survival", help="probability an attack passes M control modes")
    p.add_argument("--M", type=int, required=True)
    p.add_argument("--sigma2", type=float, required=True)
    p.add_argument("--r", type=float, default=5e-7)
    p.set_defaults(func=cmd_survival)

    p = sub.add_parser("maxlen", help="maximum message length bound in bits")
    _add_protocol_source(p)
    p.set_defaults(func=cmd_maxlen)

    p = sub.add_parser("curve", help="survival versus stolen bits, with the best attack")
    _add_protocol_source(p)
    p.add_argument("--sigma2", type=_float_list, default=list(FIG_SIGMA2))
    p.add_argument("--cutoff", type=float, default=0.01)
    p.add_argument("--decades", type=int, default=7)
    p.add_argument("--per-decade", type=int, default=40)
    p.add_argument("--out")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("ber", help="Monte Carlo bit error rates")
    _add_protocol_source(p)
    p.add_argument("--sigma2", type=_float_list, default=[0.0])
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_ber)

    p = sub.add_parser("simulate", help="run a configured session and BER experiment")
    p.add_argument("config")
    p.add_argument("--out")
    p.add_argument("--transcript", help="write the session transcript as JSON lines")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("figures", help="write the figure datasets")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_figures)

    for action in sub.choices.values():
        action.add_argument("--digits", type=int, default=None, help="significant digits for numeric output")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ValueError, ArithmeticError) as exc:
        print(f"cvqdc {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"cvqdc {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
