"""Command-line entry point: one subcommand per pipeline stage plus the full pipeline."""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Any, Callable, Literal, Sequence

from koopjet.config import (
    EXIT_CONFIG_ERROR,
    EXIT_INFEASIBLE,
    EXIT_NUMERICAL_FAILURE,
    EXIT_OK,
    EXIT_UNEXPECTED,
)
from koopjet.errors import ConfigurationError, InfeasibleDesignError, NumericalError
from koopjet.pipeline_config import CONTROLLER_NAMES, SCENARIO_NAMES, PipelineConfig, load_pipeline_config

logger = logging.getLogger("koopjet")


def parse_orders(text: str) -> list[int]:
    """`6`, `4..8` or `4,6,8` as a list of model orders."""
    try:
        if ".." in text:
            lo, hi = (int(part) for part in text.split("..", 1))
            orders: list[int] = list(range(lo, hi + 1))
        else:
            orders = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"Invalid order '{text}'; use 6, 4..8 or 4,6,8.") from None
    if not orders or min(orders) < 1:
        raise argparse.ArgumentTypeError(f"Order range '{text}' is empty or not positive.")
    return orders


def _modes(choice: str) -> tuple[Literal["real", "complex"], ...]:
    if choice == "both":
        return ("real", "complex")
    return (choice,)  # type: ignore[return-value]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="Pipeline JSON; the packaged default when omitted.")
    common.add_argument("--out", default=None, help="Output directory (overrides KOOPJET_OUT and the file).")
    common.add_argument("--seed", type=int, default=None, help="Root seed (overrides KOOPJET_SEED and the file).")
    common.add_argument("--verbose", action="store_true", help="Debug logging.")
    common.add_argument("--progress", action="store_true", help="Progress bars for long loops.")

    parser = argparse.ArgumentParser(prog="koopjet", description="Koopman/SINDy turbojet identification and control.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="Generate training and test datasets on the reference engine.")
    sub.add_parser("identify", parents=[common], help="Fit the SINDy model and validate it.")
    spectrum = sub.add_parser("spectrum", parents=[common], help="Build the Koopman eigenfunction model.")
    spectrum.add_argument("--order", type=parse_orders, default=None, help="Model order, e.g. 6 or 4..8.")
    spectrum.add_argument("--mode", choices=("real", "complex", "both"), default=None, help="Eigenvalue structure.")
    design = sub.add_parser("design", parents=[common], help="Design controllers.")
    design.add_argument("--controller", choices=(*CONTROLLER_NAMES, "all"), default="all")
    evaluate = sub.add_parser("evaluate", parents=[common], help="Closed-loop evaluation on the reference engine.")
    evaluate.add_argument("--scenario", choices=(*SCENARIO_NAMES, "all"), default="all")
    sub.add_parser("report", parents=[common], help="Merge evaluation summaries.")
    sub.add_parser("pipeline", parents=[common], help="Run every stage in order.")
    return parser


def configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def _dispatch(args: argparse.Namespace, config: PipelineConfig) -> dict[str, Any]:
    # Deferred so `--help` and config errors do not pay for the numerical imports.
    from koopjet.workflow import stages
    from koopjet.workflow.pipeline import run_pipeline

    commands: dict[str, Callable[[], dict[str, Any]]] = {
        "simulate": lambda: stages.simulate(config),
        "identify": lambda: stages.identify(config),
        "spectrum": lambda: stages.spectrum(config, args.order, _modes(args.mode) if args.mode else None),
        "design": lambda: stages.design(config, None if args.controller == "all" else [args.controller]),
        "evaluate": lambda: stages.evaluate(config, None if args.scenario == "all" else [args.scenario]),
        "report": lambda: stages.report(config),
        "pipeline": lambda: run_pipeline(config),
    }
    return commands[args.command]()


def main(argv: Sequence[str] | None = None) -> int:
    args: argparse.Namespace = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        config: PipelineConfig = load_pipeline_config(
            args.config, out_dir=args.out, seed=args.seed, progress=True if args.progress else None
        )
        output: dict[str, Any] = _dispatch(args, config)
    except ConfigurationError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG_ERROR
    except InfeasibleDesignError as e:
        logger.error(f"Design infeasible: {e} Best candidate: {e.report}")
        return EXIT_INFEASIBLE
    except NumericalError as e:
        logger.error(f"Numerical failure: {e}")
        return EXIT_NUMERICAL_FAILURE
    except Exception as e:
        logger.error(f"Unexpected failure: {e}", exc_info=True)
        return EXIT_UNEXPECTED

    if "equation" in output:
        print(output["equation"])
    if "mape" in output:
        print(f"MAPE: {output['mape']}")
    for name, path in sorted(output.get("artifacts", {}).items()):
        print(f"{name}: {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
