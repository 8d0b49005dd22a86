"""
Module: plot_error_curves.py
Description:
    Error-rate curves from a sweep results table.
    One panel per M: x = SNR (dB), y = error rate on a log axis clipped
    below at 1/trials, one line per method with baselines dashed.
    Written as a standalone SVG with matplotlib's Agg canvas.

Usage:
    python features/plotting/plot_error_curves.py [results.csv] [out.svg]
"""

import logging
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

if __package__ in (None, ""):
    sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from whitespace_modules.errors import ArtifactError  # noqa: E402
from whitespace_modules.rfsim import ErrorCurve  # noqa: E402

logger = logging.getLogger("whitespace_modules.plotting")

# ==========================================
#        USER CONFIGURATION
# ==========================================

INPUT_RESULTS_PATH = "data/output/results.csv"
OUTPUT_PLOT_PATH = "data/output/error_curves.svg"

# Visualization Settings
METHOD_STYLES = {
    "random":       {"color": "black",  "linestyle": "--", "label": "Random"},
    "nyquist":      {"color": "blue",   "linestyle": "--", "label": "Nyquist (N samples)"},
    "bomp-elim":    {"color": "purple", "linestyle": "--", "label": "BOMP elimination"},
    "zd-groth":     {"color": "red",    "linestyle": "-",  "label": "ZD-GroTh"},
    "lmp":          {"color": "orange", "linestyle": "-",  "label": "LMP"},
    "lmp-residual": {"color": "brown",  "linestyle": "-",  "label": "LMP (residual)"},
}
PANEL_WIDTH = 4.5
PANEL_HEIGHT = 4.0
MARKER = "o"
SVG_HASH_SALT = "whitespace"
ZERO_NOTE = "all error rates 0: drawn at the 1/trials floor"


def build_figure(curve):
    """Return a matplotlib Figure with one log-scale panel per M in the curve."""
    table = curve.table[np.isfinite(curve.table["snr_db"])]
    if table.empty:
        raise ArtifactError("results table has no finite-SNR rows to plot")

    m_values = sorted(int(m) for m in table["m"].unique())
    fig, axes = plt.subplots(1, len(m_values), figsize=(PANEL_WIDTH * len(m_values), PANEL_HEIGHT),
                             squeeze=False)

    for ax, m in zip(axes[0], m_values):
        panel = table[table["m"] == m]
        floor = 1.0 / panel["trials"].max()

        for method in sorted(panel["method"].unique()):
            rows = panel[panel["method"] == method].sort_values("snr_db")
            style = METHOD_STYLES.get(method, {"color": "gray", "linestyle": "-", "label": method})
            rates = np.maximum(rows["error_rate"].to_numpy(dtype=float), 1.0 / rows["trials"].to_numpy())
            ax.plot(rows["snr_db"], rates, marker=MARKER, markersize=3, **style)

        if (panel["errors"] == 0).all():
            ax.text(0.5, 0.5, ZERO_NOTE, transform=ax.transAxes, ha="center", fontsize=8)

        ax.set_yscale("log")
        ax.set_ylim(bottom=floor, top=1.0)
        ax.set_title(f"M = {m} NUWS samples")
        ax.set_xlabel("Average SNR (dB)")
        ax.set_ylabel("Error rate")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend(fontsize=7, loc="lower left")

    fig.tight_layout()
    return fig


def emit_plot(results, out):
    """
    Write the error-curve SVG.

    Parameters:
        results (ErrorCurve, str or Path): curve, or path to a results table.
        out (str or Path): SVG file to write (parent folders are created).

    Returns:
        Path: the written file.
    """
    curve = results if isinstance(results, ErrorCurve) else ErrorCurve.read_csv(results)
    if len(curve) == 0:
        raise ArtifactError("results table is empty")

    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig = build_figure(curve)
    try:
        # fixed salt and metadata keep reruns byte-identical
        with matplotlib.rc_context({"svg.hashsalt": SVG_HASH_SALT}):
            fig.savefig(out, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)

    logger.info("Plot saved to %s", out)
    return out


if __name__ == "__main__":
    results_path = sys.argv[1] if len(sys.argv) > 1 else INPUT_RESULTS_PATH
    plot_path = sys.argv[2] if len(sys.argv) > 2 else OUTPUT_PLOT_PATH
    try:
        emit_plot(results_path, plot_path)
    except ArtifactError as e:
        print(f"[ERROR] {e}")
        print("[HINT] Run the sweep first: python main.py sweep")
        sys.exit(1)
    print(f"[INFO] Plot saved to {plot_path}")
