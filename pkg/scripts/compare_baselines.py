"""All six methods on one dataset (synthetic by default, or --manifest).

    python scripts/compare_baselines.py --labels 30,60,120 --seeds 10 --out runs/baselines
    python scripts/compare_baselines.py --manifest data/konvid/manifest.csv --out runs/konvid
"""

import argparse
import sys
from pathlib import Path

from lprvqa.cli import main as cli
from lprvqa.ssl import METHODS

DEFAULT_CONFIG = Path(__file__).resolve().parents[1] / "configs" / "synthetic.json"


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", default=str(DEFAULT_CONFIG))
    p.add_argument("--manifest")
    p.add_argument("--out", default="runs/baselines")
    p.add_argument("--labels", default="30,60,120")
    p.add_argument("--seeds", default="10")
    p.add_argument("--jobs", default="1")
    args = p.parse_args()

    argv = ["run", "--config", args.config, "--out", args.out, "--labels", args.labels,
            "--seeds", args.seeds, "--jobs", args.jobs, "--methods", ",".join(METHODS)]
    if args.manifest:
        argv += ["--manifest", args.manifest]
    code = cli(argv)
    if code == 0:
        print((Path(args.out) / "medians.csv").read_text())
    sys.exit(code)


if __name__ == "__main__":
    main()
