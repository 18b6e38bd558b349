#!/usr/bin/env python3
"""Paired ablation of codebook reordering and feature requantization.

Runs the same inputs and channel seeds through every combination of the
two receiver-side switches and prints a small table of mean feature MSE
per SNR, the digital-link analogue of an ablation study.

    python3 scripts/cr_ablation.py
"""

import argparse

import numpy as np

from vqlink.pipeline import LinkConfig, run_link, synthetic_features
from vqlink.quantizer import FitConfig, fit


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=100)
    ap.add_argument("--snr-dbs", default="0,5,10,15")
    args = ap.parse_args()

    train = synthetic_features(160, 8, 8, 16, seed=123)
    mlc = fit(train, (4, 4, 8, 16), FitConfig(seed=0))
    grid = synthetic_features(1, 8, 8, 16, seed=7)[0]

    variants = [("full", True, True), ("w/o CR", False, True),
                ("w/o requant", True, False), ("w/o both", False, False)]
    print(f"{'snr_db':>8} " + " ".join(f"{name:>12}" for name, _, _ in variants))
    for snr in (float(s) for s in args.snr_dbs.split(",")):
        cells = []
        for _, use_cr, use_rq in variants:
            mses = [
                run_link(grid, LinkConfig(levels=4, snr_db=snr, seed=seed, use_cr=use_cr,
                                          use_requantization=use_rq, codec="identity"),
                         mlc)[1].feature_mse
                for seed in range(args.seeds)
            ]
            cells.append(float(np.mean(mses)))
        print(f"{snr:>8.1f} " + " ".join(f"{c:>12.5f}" for c in cells))


if __name__ == "__main__":
    main()
