"""
Module: cli.py
Description:
    Command-line front end.
        dict-gen       build the wavelet dictionary and write it
        matrix-select  greedy NUWS row selection for every M (selection,
                       matrix and coherence trajectory files)
        sweep          Monte-Carlo benchmark, writes the results table
        guarantee      evaluate the ZD-GroTh sufficient condition on an instance
        report         plot a results table as SVG
    Every error ends in one diagnostic line and a nonzero exit status.
"""

import argparse
import logging
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from .blocksparse import BlockSparseSignal, read_matrix, write_matrix
from .config import dump_config, load_config
from .detectors import bomp_recovery_condition, check_zd_guarantee, zd_bound_report, zd_groth
from .errors import (
    ArtifactError,
    ConfigError,
    UsageError,
    ValidationError,
    WhitespaceError,
)
from .log import setup_logging
from .nuws import (
    build_dictionary,
    greedy_select,
    random_subset_coherence,
    read_dictionary,
    write_dictionary,
    write_selection,
)
from .rfsim import ErrorCurve, run_sweep

logger = logging.getLogger(__name__)

# ==========================================
# CONFIGURATION
# ==========================================
PROG = "whitespace"

# (error class, exit status, message prefix); first match wins
EXIT_CODES = (
    (UsageError, 2, "usage error"),
    (ConfigError, 3, "config error"),
    (ValidationError, 4, "validation error"),
    (ArtifactError, 5, "artifact error"),
    (WhitespaceError, 6, "numerical error"),
)
ARTIFACT_EXIT = 5


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default="default",
                        help="config name in the config directory, or a YAML path")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config field (dotted keys, YAML values); repeatable")
    common.add_argument("--print-config", action="store_true",
                        help="print the effective config and exit")
    common.add_argument("--workers", type=int, default=None, help="sweep worker processes")
    common.add_argument("--verbose", action="store_true", help="debug logging")
    common.add_argument("--quiet", action="store_true", help="no progress bars")

    parser = _Parser(prog=PROG, description="Compressive RF whitespace detection benchmark.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("dict-gen", parents=[common], help="build the wavelet dictionary")
    p.add_argument("--out", default=None, help="dictionary file (default: artifacts dir)")

    p = sub.add_parser("matrix-select", parents=[common], help="greedy coherence-minimising selection")
    p.add_argument("--m", type=int, action="append", default=None,
                   help="select only this M (repeatable; default: m_values)")
    p.add_argument("--compare-random", action="store_true",
                   help="also report mu_B of seeded random selections")

    p = sub.add_parser("sweep", parents=[common], help="run the Monte-Carlo benchmark")
    p.add_argument("--out", default=None, help="results table (default: artifacts dir)")

    p = sub.add_parser("guarantee", parents=[common], help="check the ZD-GroTh guarantee on an instance")
    p.add_argument("--instance", required=True, help="YAML instance file (matrix, signal, noise_norm)")

    p = sub.add_parser("report", parents=[common], help="plot a results table")
    p.add_argument("--results", default=None, help="results table (default: artifacts dir)")
    p.add_argument("--out", default=None, help="SVG file (default: artifacts dir)")
    return parser


# ==========================================
# SUBCOMMANDS
# ==========================================

def cmd_dict_gen(config, args):
    grid = config.dictionary
    dictionary = build_dictionary(config.n, grid.tau_step, grid.rho_set, grid.halfperiod_set, grid.cap)
    path = write_dictionary(dictionary, args.out or config.artifacts.dictionary_path())
    logger.info("Dictionary with L=%d rows saved to %s", len(dictionary), path)
    return 0


def cmd_matrix_select(config, args):
    path = config.artifacts.dictionary_path()
    if not path.exists():
        raise ArtifactError(f"dictionary file not found: {path} [HINT] run dict-gen first")
    dictionary = read_dictionary(path)
    if dictionary.N != config.n:
        raise ArtifactError(f"dictionary was built for N={dictionary.N}, config has n={config.n}")

    plan = config.channel_plan()
    for m in args.m or config.m_values:
        result = greedy_select(dictionary, plan.partition, m,
                               candidates_per_step=config.selection.candidates_per_step,
                               seed=config.seed, progress=not args.quiet)
        write_selection(result.chosen, config.artifacts.selection_path(m))
        write_matrix(result.matrix, config.artifacts.matrix_path(m))

        trajectory = pd.DataFrame({
            "step": np.arange(1, m + 1),
            "row": result.chosen,
            "block_coherence": result.coherence_trajectory,
        })
        trajectory_path = config.artifacts.trajectory_path(m)
        trajectory.to_csv(trajectory_path, index=False, lineterminator="\n")
        logger.info("M=%d: mu_B=%.4f, selection saved to %s", m, result.final_coherence,
                    config.artifacts.selection_path(m))

        if args.compare_random:
            baseline = random_subset_coherence(dictionary, plan.partition, m,
                                               trials=config.selection.random_baseline_trials,
                                               seed=config.seed)
            logger.info("M=%d: random selections mu_B mean=%.4f min=%.4f (greedy %.4f)",
                        m, baseline.mean(), baseline.min(), result.final_coherence)
    return 0


def cmd_sweep(config, args):
    curve = run_sweep(config, workers=args.workers, progress=not args.quiet)
    path = curve.to_csv(args.out or config.artifacts.results_path())
    logger.info("Results (%d cells) saved to %s", len(curve), path)
    return 0


def load_instance(path):
    """Instance YAML: matrix (path relative to the file), signal ([re, im] pairs), noise_norm."""
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"instance file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ArtifactError(f"{path}: cannot parse instance ({e})") from e

    unknown = set(data) - {"matrix", "signal", "noise_norm"}
    if unknown:
        raise ArtifactError(f"{path}: unknown instance key(s) {sorted(unknown)}")
    if "matrix" not in data or "signal" not in data:
        raise ArtifactError(f"{path}: instance needs 'matrix' and 'signal'")

    A = read_matrix(path.parent / data["matrix"])
    try:
        values = np.array([complex(re, im) for re, im in data["signal"]])
        noise_norm = float(data.get("noise_norm", 0.0))
    except (TypeError, ValueError) as e:
        raise ArtifactError(f"{path}: signal must be a list of [re, im] pairs ({e})") from e
    return A, BlockSparseSignal(values, A.partition), noise_norm


def cmd_guarantee(config, args):
    A, x, noise_norm = load_instance(args.instance)
    report = check_zd_guarantee(A, x, noise_norm)
    detection = zd_groth(A, A.entries @ x.values)

    lines = [
        f"lhs (delta)      = {report.lhs:.6g}",
        f"rhs              = {report.rhs:.6g}",
        f"holds            = {str(report.holds).lower()}",
        f"mu_B             = {report.mu_b:.6g}",
        f"sigma_min        = {report.sigma_min:.6g}",
        f"||x_min||        = {report.min_used_norm:.6g}",
        f"||n||            = {report.noise_norm:.6g}",
        f"K                = {x.sparsity}",
    ]
    if report.mu_b > 0:
        lines.append(f"bomp threshold   = {0.5 * (1.0 / report.mu_b + 1.0):.6g}"
                     f" (K below: {str(bomp_recovery_condition(report.mu_b, x.sparsity)).lower()})")
    if noise_norm == 0.0:
        bounds = zd_bound_report(A, x)
        lines.append(f"unused min lambda = {bounds.actual_unused_min:.6g} <= {bounds.unused_upper_bound:.6g}")
        lines.append(f"used min lambda   = {bounds.actual_used_min:.6g} >= {bounds.used_lower_bound:.6g}")
    lines.append(f"zd-groth (noiseless) declares block {detection.declared_unused}"
                 f" ({'unused' if detection.declared_unused in x.unused_set else 'USED'})")
    print("\n".join(lines))
    return 0


def cmd_report(config, args):
    from plotting.plot_error_curves import emit_plot

    results = Path(args.results) if args.results else config.artifacts.results_path()
    if not results.exists():
        raise ArtifactError(f"results file not found: {results} [HINT] run sweep first")
    emit_plot(ErrorCurve.read_csv(results), args.out or config.artifacts.plot_path())
    return 0


COMMANDS = {
    "dict-gen": cmd_dict_gen,
    "matrix-select": cmd_matrix_select,
    "sweep": cmd_sweep,
    "guarantee": cmd_guarantee,
    "report": cmd_report,
}


def _exit_status(error):
    for cls, status, prefix in EXIT_CODES:
        if isinstance(error, cls):
            return status, prefix
    return ARTIFACT_EXIT, "artifact error"


def run_command(argv=None):
    """
    Parse argv, run one subcommand and return the process exit status.

    Parameters:
        argv (list of str, optional): arguments without the program name.

    Returns:
        int: 0 on success, 2-6 on failure (see EXIT_CODES).
    """
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        setup_logging()
        logger.error("usage error: %s", e)
        return 2
    except SystemExit as e:
        # --help
        return e.code or 0

    setup_logging(args.verbose)
    try:
        config = load_config(args.config, args.overrides, args.seed)
        if args.print_config:
            print(dump_config(config), end="")
            return 0
        return COMMANDS[args.command](config, args)
    except (WhitespaceError, OSError) as e:
        status, prefix = _exit_status(e)
        logger.error("%s: %s", prefix, e)
        return status
