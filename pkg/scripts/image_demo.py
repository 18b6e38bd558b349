#!/usr/bin/env python3
"""End-to-end image transmission demo.

Builds a small synthetic PNG corpus, fits the patch basis and codebook,
then transmits one image at several SNRs, saving the reconstructions and
a received-constellation dump next to a CSV of link reports. Useful for
eyeballing what channel noise does to the decoded picture.

    python3 scripts/image_demo.py --out-dir demo/
"""

import argparse
from pathlib import Path

import numpy as np

from vqlink import feature_codec
from vqlink.cli import main as cli_main


def make_corpus(directory: Path, count: int = 8, side: int = 128) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    for seed in range(count):
        rng = np.random.default_rng(seed)
        coarse = rng.uniform(0, 1, size=(side // 16, side // 16, 3))
        img = np.kron(coarse, np.ones((16, 16, 1)))
        img = np.clip(img + rng.uniform(-0.05, 0.05, img.shape), 0, 1)
        feature_codec.save_image(directory / f"texture_{seed}.png", img)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="demo")
    ap.add_argument("--snr-dbs", default="0,10,20")
    args = ap.parse_args()

    out = Path(args.out_dir)
    corpus = out / "corpus"
    make_corpus(corpus)
    container = out / "container.json"
    assert cli_main(["fit", "--out", str(container), "--corpus", str(corpus)]) == 0

    image = corpus / "texture_0.png"
    for snr in args.snr_dbs.split(","):
        tag = snr.replace("-", "m")
        code = cli_main([
            "run", "--codebook", str(container), "--image", str(image),
            "--snr-db", snr, "--seed", "0",
            "--csv", str(out / f"report_snr{tag}.csv"),
            "--save-image", str(out / f"recon_snr{tag}.png"),
            "--dump-symbols", str(out / f"symbols_snr{tag}.csv"),
        ])
        assert code == 0
    print(f"demo artifacts in {out}/")


if __name__ == "__main__":
    main()
