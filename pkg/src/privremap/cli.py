"""Command-line interface.

Payload (JSON or CSV) goes to stdout, diagnostics to stderr as one
``error_code: message`` line. Exit codes: 0 success/pass, 1 verification
failure, 2 usage or parameter error, 3 input-data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import analytic, sim, sweep, trace
from .estimators import SingularObservation
from .model import Adversary, Mechanism, ModelParams, ParameterError

log = logging.getLogger("privremap")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_DATA = 0, 1, 2, 3

MECHANISMS = {"none": Mechanism.NO_REMAP, "remap": Mechanism.REMAP, "randomized": Mechanism.RANDOMIZED}
_DEFAULT_P_H = {Mechanism.NO_REMAP: 0.0, Mechanism.REMAP: 1.0}


class UsageError(Exception):
    code = "usage_error"


class DataError(Exception):
    code = "data_error"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be in [0, 2^64), got {text}")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 2:
        raise argparse.ArgumentTypeError(f"need an integer >= 2, got {text}")
    return value


def _add_variances(p: argparse.ArgumentParser, with_w: bool = True) -> None:
    p.add_argument("--sigma2-mu", type=float)
    p.add_argument("--sigma2-s", type=float)
    p.add_argument("--sigma2-e", type=float)
    if with_w:
        p.add_argument("--sigma2-w", type=float)


def _add_model(p: argparse.ArgumentParser) -> None:
    _add_variances(p)
    p.add_argument("--p-h", type=float)
    p.add_argument("--mechanism", choices=sorted(MECHANISMS))
    p.add_argument("--adversary", choices=[a.value for a in Adversary])


def _add_run(p: argparse.ArgumentParser) -> None:
    p.add_argument("--samples", type=_positive_int)
    p.add_argument("--seed", type=_u64)
    p.add_argument("--threads", type=int, help="worker threads (default: PRIV_REMAP_THREADS, 0 = auto)")
    p.add_argument("--timing", action="store_true", help="include runtime_ms in the JSON payload")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="privremap", description=__doc__.splitlines()[0])
    parser.add_argument("--config", type=Path, help="JSON file whose keys mirror the flags")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("analytic", help="closed-form U, P and P-model")
    _add_model(p)

    p = sub.add_parser("simulate", help="Monte-Carlo estimate of U, P and P-model")
    _add_model(p)
    _add_run(p)

    p = sub.add_parser("verify", help="compare Monte-Carlo against closed forms")
    _add_model(p)
    _add_run(p)
    p.add_argument("--tolerance-sigmas", type=float)

    p = sub.add_parser("sweep", help="grid over sigma2_w and p_h, CSV output")
    _add_variances(p, with_w=False)
    p.add_argument("--adversary", choices=[a.value for a in Adversary])
    p.add_argument("--sigma2-w-grid")
    p.add_argument("--p-h-list")
    p.add_argument("--out", type=Path)
    p.add_argument("--jsonl", type=Path, help="also write one MetricsReport per line here")
    _add_run(p)

    p = sub.add_parser("protect", help="obfuscate/remap a trace file")
    _add_model(p)
    p.add_argument("--input", type=Path)
    p.add_argument("--output", type=Path)
    p.add_argument("--mu", help="'fit' or comma-separated per-coordinate means")
    p.add_argument("--seed", type=_u64)
    return parser


_DEFAULTS = {
    "adversary": Adversary.IMPERFECT.value,
    "samples": sim.DEFAULT_SAMPLES,
    "seed": 0,
    "tolerance_sigmas": 5.0,
    "mu": "fit",
    "threads": None,
}


def _merge_config(args: argparse.Namespace) -> argparse.Namespace:
    config = {}
    if args.config is not None:
        try:
            config = json.loads(args.config.read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise DataError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(config, dict):
            raise DataError("config file must hold a JSON object")
        config = {key.replace("-", "_"): value for key, value in config.items()}
    for key, value in vars(args).items():
        if value is None and key in config:
            setattr(args, key, config[key])
    for key, value in _DEFAULTS.items():
        if getattr(args, key, "absent") is None:
            setattr(args, key, value)
    return args


def _require(args: argparse.Namespace, *names: str) -> None:
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise UsageError(f"missing required {flags}")


def _model(
    args: argparse.Namespace, need_w: bool = True, need_e: bool = True
) -> tuple[ModelParams, Mechanism, Adversary]:
    adversary = Adversary(args.adversary)
    names = ["sigma2_mu", "sigma2_s"] + (["sigma2_w"] if need_w else [])
    if need_e and adversary is Adversary.IMPERFECT:
        names.append("sigma2_e")
    if hasattr(args, "mechanism"):
        names.append("mechanism")
    _require(args, *names)
    mechanism = MECHANISMS[args.mechanism] if hasattr(args, "mechanism") else Mechanism.RANDOMIZED
    p_h = getattr(args, "p_h", None)
    if p_h is None:
        if mechanism is Mechanism.RANDOMIZED and hasattr(args, "mechanism"):
            raise UsageError("--p-h is required with --mechanism randomized")
        p_h = _DEFAULT_P_H.get(mechanism, 0.0)
    sigma2_e = args.sigma2_e if args.sigma2_e is not None else 0.0
    params = ModelParams(
        float(args.sigma2_mu), float(args.sigma2_s), float(sigma2_e),
        float(args.sigma2_w) if need_w else 0.0, float(p_h),
    )
    return params, mechanism, adversary


def _dump(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _cmd_analytic(args) -> int:
    params, mechanism, adversary = _model(args)
    report = analytic.analytic_report(params, mechanism, adversary)
    sys.stdout.write(_dump(report.to_dict()))
    return EXIT_OK


def _cmd_simulate(args) -> int:
    params, mechanism, adversary = _model(args)
    report = sim.run_monte_carlo(params, mechanism, args.samples, args.seed, adversary, workers=args.threads)
    log.info("simulated %d samples in %.1f ms", report.n_samples, report.runtime_ms)
    sys.stdout.write(_dump(report.to_dict(timing=args.timing)))
    return EXIT_OK


def _cmd_verify(args) -> int:
    params, mechanism, adversary = _model(args)
    result = sim.verify(
        params, mechanism, args.samples, args.seed, float(args.tolerance_sigmas), adversary, workers=args.threads
    )
    sys.stdout.write(_dump(result.to_dict(timing=args.timing)))
    if not result.passed:
        print("verification_failed: empirical metrics outside tolerance", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _cmd_sweep(args) -> int:
    _require(args, "sigma2_w_grid", "p_h_list")
    base, _, adversary = _model(args, need_w=False)
    try:
        grid = sweep.parse_grid(str(args.sigma2_w_grid))
        p_list = [float(v) for v in str(args.p_h_list).split(",")]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        spec = sweep.SweepSpec(base, grid, p_list, args.samples, args.seed, adversary)
    except ParameterError:
        raise
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    reports = sweep.run_sweep(spec, workers=args.threads)
    text = sweep.emit_csv(reports)
    if args.out is not None:
        args.out.write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)
    if args.jsonl is not None:
        args.jsonl.write_text(sweep.emit_jsonl(reports, timing=args.timing), encoding="utf-8", newline="\n")
    return EXIT_OK


def _cmd_protect(args) -> int:
    _require(args, "input", "output")
    # the release is computed user-side, so the adversary's prior error is unused
    params, mechanism, _ = _model(args, need_e=False)
    if args.mechanism == "randomized" and args.p_h is None:
        raise UsageError("--p-h is required with --mechanism randomized")
    if str(args.mu) == "fit":
        mu_source = "fit"
    else:
        try:
            mu_source = [float(v) for v in str(args.mu).split(",")]
        except ValueError:
            raise UsageError(f"--mu must be 'fit' or comma-separated numbers, got {args.mu!r}") from None
    try:
        text = Path(args.input).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {args.input}: {exc.strerror}") from None
    protected = trace.protect(trace.read_trace(text), params, mechanism, mu_source, args.seed)
    try:
        Path(args.output).write_text(trace.write_trace(protected), encoding="utf-8", newline="\n")
    except OSError as exc:
        raise DataError(f"cannot write {args.output}: {exc.strerror}") from None
    return EXIT_OK


_COMMANDS = {
    "analytic": _cmd_analytic,
    "simulate": _cmd_simulate,
    "verify": _cmd_verify,
    "sweep": _cmd_sweep,
    "protect": _cmd_protect,
}


def _fail(code: str, message: str, status: int) -> int:
    print(f"{code}: {' '.join(str(message).split())}", file=sys.stderr)
    return status


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required: " + ", ".join(_COMMANDS))
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
        args = _merge_config(args)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        return _fail(UsageError.code, exc, EXIT_USAGE)
    except ParameterError as exc:
        return _fail(exc.code, exc, EXIT_USAGE)
    except (trace.TraceError, SingularObservation) as exc:
        return _fail(exc.code, exc, EXIT_DATA)
    except DataError as exc:
        return _fail(DataError.code, exc, EXIT_DATA)


if __name__ == "__main__":
    sys.exit(main())
