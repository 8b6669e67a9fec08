"""
Command-line interface.

    python -m xitrace xi --set operator.kind=zero --set grid.lambda_min=-1
    python -m xitrace trace --config harmonic.cfg
    python -m xitrace am --set am.coupling=1 --set am.p=1 --set am.q=2

Exit codes: 0 success, 2 descriptor/config error, 3 numerical-quality
failure (a diagnostics.json is written next to the other outputs).
"""

import argparse
import logging
import sys
from typing import List, Optional

from xitrace import __version__
from xitrace.config import LOG_FILE, LOG_FORMAT, LOG_LEVEL
from xitrace.descriptors import load_config
from xitrace.errors import DescriptorError, NumericalQualityError, XiTraceError
from xitrace.pipeline import COMMANDS, XiTracePipeline
from xitrace.reports import write_report

logger = logging.getLogger(__name__)

OUTPUT_HELP = """
outputs:
  xi       xi.csv       lambda, xi, uncertainty, converged
  trace    trace.json   value, expected, error, trace diagnostics (I(alpha) sequence), xi
  bands    bands.csv    band, lower, upper, gap_above, mu;  bands.json with gap-sum partial sums
  scatter  scatter.csv  lambda, R_abs, T_abs, xi, xi_bound, bound_ok, unitarity_defect
  am       am.csv       p, q, alpha, measure (and measure_in_window for approximant tables)
  borg     borg.json    eigenvalues, xi(0, .), reconstructed V(0), error
"""

DESCRIPTIONS = {
    "xi": "xi(x, lambda) on a lambda grid from the boundary phase of G",
    "trace": "reconstruct V(x) or v(n) from xi through the trace formula",
    "bands": "band edges, Dirichlet eigenvalues and gap sums of a periodic potential",
    "scatter": "reflection coefficients and xi from scattering data",
    "am": "almost-Mathieu spectral measures at rational frequencies",
    "borg": "V(0) of an even confining potential from its eigenvalues",
}


def configure_logging(verbose: bool = False) -> None:
    """Stream handler plus an optional file handler (XITRACE_LOG_FILE)."""
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if LOG_FILE:
        handlers.append(logging.FileHandler(LOG_FILE))
    level = logging.DEBUG if verbose else getattr(logging, LOG_LEVEL, logging.INFO)
    logging.basicConfig(level=level, format=LOG_FORMAT, handlers=handlers, force=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xitrace",
        description="Spectral shift function xi and trace formulas for Schrodinger and Jacobi operators.",
        epilog=OUTPUT_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", metavar="command")
    subparsers.required = True
    for name in COMMANDS:
        sub = subparsers.add_parser(name, help=DESCRIPTIONS[name], description=DESCRIPTIONS[name],
                                    epilog=OUTPUT_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
        sub.add_argument("--config", help="key=value configuration file")
        sub.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                         help="override a configuration key (repeatable)")
        sub.add_argument("--output-dir", help="output directory, '-' for stdout")
        sub.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return parser


def _write_diagnostics(error: Exception, config: Optional[dict], output_dir: str) -> None:
    payload = {
        "error_class": type(error).__name__,
        "message": str(error),
    }
    try:
        write_report(payload, "diagnostics", output_dir, config)
    except OSError as e:
        logger.error(f"Could not write diagnostics: {str(e)}")


def run(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments, run one subcommand, and return the exit code.

    Returns:
        0 on success, 2 on descriptor errors, 3 on numerical-quality failures
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 2
    configure_logging(args.verbose)

    config = None
    pipeline = None
    try:
        overrides = list(args.set)
        if args.output_dir:
            overrides.append(f"output.dir={args.output_dir}")
        config = load_config(args.config, overrides, XiTracePipeline._default_config())
        pipeline = XiTracePipeline(config)
        pipeline.run(args.command)
        return 0
    except DescriptorError as e:
        logger.error(f"Configuration error: {str(e)}")
        return e.exit_code
    except NumericalQualityError as e:
        logger.error(f"Numerical quality failure ({type(e).__name__}): {str(e)}")
        if pipeline is not None:
            _write_diagnostics(e, config, pipeline.output_dir)
        return e.exit_code
    except XiTraceError as e:
        logger.error(f"xitrace error: {str(e)}")
        return e.exit_code
    except ValueError as e:
        logger.error(f"Invalid input: {str(e)}")
        return DescriptorError.exit_code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
