"""Run every experiment of the CLI on the calibrated synthetic dataset.

Writes one subdirectory per subcommand under --out and prints the summary
tables. Takes roughly 15 minutes on one CPU core with the default 10 seeds.

    python scripts/reproduce_synthetic.py --out runs/synthetic --jobs 4
"""

import argparse
import sys
from pathlib import Path

from lprvqa.cli import main as cli

DEFAULT_CONFIG = Path(__file__).resolve().parents[1] / "configs" / "synthetic.json"

STEPS = (
    ("run", []),
    ("ablate", []),
    ("sweep-tau", []),
    ("sweep-fps", []),
    ("trace-rank-acc", []),
)
SUMMARIES = {
    "run": "medians.csv",
    "ablate": "ablation.csv",
    "sweep-tau": "sweep_tau.csv",
    "sweep-fps": "sweep_fps.csv",
    "trace-rank-acc": "rank_accuracy_median.csv",
}


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", default=str(DEFAULT_CONFIG))
    p.add_argument("--out", default="runs/synthetic")
    p.add_argument("--seeds", default="10")
    p.add_argument("--jobs", default="1")
    p.add_argument("--only", nargs="+", choices=[s for s, _ in STEPS])
    args = p.parse_args()

    for name, extra in STEPS:
        if args.only and name not in args.only:
            continue
        out = Path(args.out) / name
        code = cli([name, "--config", args.config, "--out", str(out), "--seeds", args.seeds,
                    "--jobs", args.jobs, *extra])
        if code != 0:
            sys.exit(code)
        print(f"== {name}")
        print((out / SUMMARIES[name]).read_text())


if __name__ == "__main__":
    main()
