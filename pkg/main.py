import sys
from pathlib import Path

# The library lives in features/ next to this file
FEATURES_DIR = Path(__file__).resolve().parent / "features"
sys.path.insert(0, str(FEATURES_DIR))

from whitespace_modules.cli import run_command  # noqa: E402

# Steps of the full pipeline, run in order when main.py gets no arguments
PIPELINE = ["dict-gen", "matrix-select", "sweep", "report"]


def run_step(step, extra_args):
    """
    Runs one CLI subcommand and stops the pipeline if it fails.
    """
    print(f"\n--- Starting {step}...")
    status = run_command([step, *extra_args])
    if status != 0:
        print(f"\n--- ERROR: {step} failed with exit status {status}.")
        print("Please check the error output above for details.")
        sys.exit(status)
    print(f"--- {step} finished successfully.")


if __name__ == "__main__":
    args = sys.argv[1:]

    # A subcommand was given: behave like the plain CLI
    if args and not args[0].startswith("-"):
        sys.exit(run_command(args))

    # Otherwise run the whole pipeline; any flags (--config, --set, ...) go to every step
    for step in PIPELINE:
        run_step(step, args)

    print("\n\nAll pipeline steps complete! Plot: data/output/error_curves.svg")
