"""Paired supervised-vs-LPR comparison over synthetic generator settings.

Used to pick the generator knobs in configs/synthetic.json: for every split
seed both methods see the same split, so the per-seed SROCC difference is a
paired measurement.

    python scripts/calibrate_synthetic.py --labels 30 120 --seeds 5 \
        --content 2 3 --motion 6 8
"""

import argparse
import itertools
import json
import time
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from lprvqa.cli import config_from_dict
from lprvqa.dataset import generate_synthetic, make_split, materialize
from lprvqa.ssl import evaluate_model, train

DEFAULT_CONFIG = Path(__file__).resolve().parents[1] / "configs" / "synthetic.json"


def paired_gaps(spec, train_cfg, labels, seeds, methods=("supervised", "LPR")):
    records = generate_synthetic(**asdict(spec))
    out = {m: [] for m in methods}
    acc_delta = []
    for seed in seeds:
        data = materialize(records, make_split(records, labels, seed))
        for m in methods:
            cfg = train_cfg.with_(method=m, seed=seed)
            rep = train(data, cfg)
            res = evaluate_model(rep.student, data, cfg)
            out[m].append(np.nan if res.srocc is None else res.srocc)
            if m == "LPR" and rep.rank_accuracy:
                acc_delta.append(rep.rank_accuracy[-1] - rep.rank_accuracy[0])
    return {m: np.array(v) for m, v in out.items()}, np.array(acc_delta)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", default=str(DEFAULT_CONFIG))
    p.add_argument("--labels", type=int, nargs="+", default=[30, 120])
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--noise", type=float, nargs="+")
    p.add_argument("--content", type=float, nargs="+")
    p.add_argument("--motion", type=float, nargs="+")
    p.add_argument("--frame-noise", type=float, nargs="+")
    args = p.parse_args()

    exp = config_from_dict(json.loads(Path(args.config).read_text()))
    base = exp.synthetic
    grid = itertools.product(
        args.noise or [base.noise_scale],
        args.content or [base.content_scale],
        args.motion or [base.motion_scale],
        args.frame_noise or [base.frame_noise_scale],
    )
    for noise, content, motion, frame_noise in grid:
        spec = replace(base, noise_scale=noise, content_scale=content, motion_scale=motion,
                       frame_noise_scale=frame_noise)
        for n in args.labels:
            start = time.perf_counter()
            res, acc = paired_gaps(spec, exp.train, n, range(args.seeds))
            d = res["LPR"] - res["supervised"]
            print(f"noise={noise} content={content} motion={motion} frame_noise={frame_noise} "
                  f"labels={n}: supervised {np.nanmedian(res['supervised']):.4f} "
                  f"LPR {np.nanmedian(res['LPR']):.4f} "
                  f"median gap {np.nanmedian(res['LPR']) - np.nanmedian(res['supervised']):+.4f} "
                  f"paired {np.nanmean(d):+.4f} wins {int((d > 0).sum())}/{len(d)} "
                  f"acc delta {np.median(acc):+.4f} [{time.perf_counter() - start:.0f}s]",
                  flush=True)


if __name__ == "__main__":
    main()
