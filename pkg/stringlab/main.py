from __future__ import annotations

import argparse
import sys
from typing import Sequence

from pydantic import ValidationError

from stringlab import __version__
from stringlab.core.config import Settings, settings as default_settings
from stringlab.core.errors import ConfigurationError, DomainError, NumericalFailure, SpecParseError
from stringlab.core.log import get_logger, setup_logging
from stringlab.models.coeffs import validate_spec
from stringlab.repositories.catalog import list_builtin_specs
from stringlab.schemas.run import TASK_ORDER, RunManifest, SweepConfig
from stringlab.workflows.pipeline import run_pipeline

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_CRITERIA = 1
EXIT_INPUT = 2
EXIT_NUMERICAL = 3

BUILTIN_PREFIX = "builtin:"


def _floats(text: str) -> list[float]:
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from exc


def _zeta(text: str) -> tuple[float, float]:
    values = _floats(text)
    if len(values) != 2:
        raise argparse.ArgumentTypeError("--zeta expects RE,IM")
    return values[0], values[1]


def _tasks(text: str) -> list[str]:
    tasks = [t.strip() for t in text.split(",") if t.strip()]
    unknown = sorted(set(tasks) - set(TASK_ORDER))
    if unknown:
        raise argparse.ArgumentTypeError(f"unknown tasks {unknown}; choose from {list(TASK_ORDER)}")
    return tasks


def build_parser(settings: Settings) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stringlab", description="Spectral convergence laboratory for strings with a concentrated mass."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help="override STRINGLAB_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the requested tasks on one problem spec")
    run.add_argument("--spec", required=True, help=f"spec file path, or {BUILTIN_PREFIX}NAME for a bundled spec")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--tasks", type=_tasks, default=list(TASK_ORDER), help="comma separated subset of tasks")
    run.add_argument("--eps", type=_floats, default=list(settings.default_eps_grid), help="decreasing ε grid")
    run.add_argument("--n", type=int, default=settings.default_n_track, help="number of tracked eigenvalues")
    run.add_argument("--zeta", type=_zeta, default=(0.0, 1.0), help="resolvent point ζ as RE,IM")
    run.add_argument("--truncation", type=float, default=settings.default_truncation, help="Hausdorff cutoff Λ")
    run.add_argument("--seed", type=int, default=0, help="seed for randomized specs")
    run.add_argument("--format", dest="fmt", choices=("csv", "csv+svg"), default="csv+svg")

    listing = sub.add_parser("list-specs", help="list the bundled problem specs")
    listing.add_argument("--seed", type=int, default=0)
    return parser


def _manifest(args: argparse.Namespace) -> RunManifest:
    sweep = SweepConfig(
        eps_grid=args.eps,
        n_track=args.n,
        truncation=args.truncation,
        zeta_re=args.zeta[0],
        zeta_im=args.zeta[1],
    )
    source = {"spec_name": args.spec[len(BUILTIN_PREFIX):]} if args.spec.startswith(BUILTIN_PREFIX) else {"spec_path": args.spec}
    return RunManifest(sweep=sweep, outputs=args.out, tasks=args.tasks, seed=args.seed, fmt=args.fmt, **source)


def list_specs(seed: int, settings: Settings) -> int:
    for name, spec in list_builtin_specs(seed).items():
        status = "valid" if validate_spec(spec, settings).valid else "INVALID"
        print(f"{name}\ta={spec.a:g}\tb={spec.b:g}\talpha={spec.alpha:.6g}\tbeta={spec.beta:.6g}\t{status}")
    return EXIT_OK


def main(argv: Sequence[str] | None = None, settings: Settings | None = None) -> int:
    settings = settings or default_settings
    args = build_parser(settings).parse_args(argv)
    setup_logging(level=args.log_level)
    if args.command == "list-specs":
        return list_specs(args.seed, settings)
    try:
        manifest = _manifest(args)
        state = run_pipeline(manifest, settings)
    except (SpecParseError, ConfigurationError, DomainError, ValidationError) as exc:
        logger.error("run.input_error", error=str(exc))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalFailure as exc:
        logger.error("run.numerical_failure", error=str(exc), exc_info=True)
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return state["exit_code"]


if __name__ == "__main__":
    sys.exit(main())
