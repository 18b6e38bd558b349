"""Experiment command line: fit, reorder, run, sweep, inspect.

Every command takes an optional --config JSON file whose keys mirror the
long option names (underscores for dashes); explicit flags override the
file, the file overrides built-in defaults. All commands are deterministic
given their merged configuration, including the bytes of emitted CSV and
container files.

Exit codes: 0 success, 1 runtime failure, 2 config or validation failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import feature_codec, pipeline, store
from .channel import ChannelConfig, transmit
from .modem import dump_symbols_csv, modulate, serialize_indices
from .pipeline import CONFIG_FIELDS, REPORT_FIELDS, LinkConfig
from .quantizer import FitConfig, fit, residual_energies, rvq_encode
from .reorder import gray_adjacent_distance, reorder_multilevel

CSV_SCHEMA = "# vqlink sweep csv v1"


class ConfigError(Exception):
    pass


def _load_config_file(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return data


def _merged(args, defaults: dict) -> dict:
    """flag > config file > default; rejects unknown config keys."""
    file_cfg = _load_config_file(args.config) if args.config else {}
    unknown = set(file_cfg) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    merged = {}
    for key, default in defaults.items():
        value = getattr(args, key)
        if value is None:
            value = file_cfg.get(key, default)
        merged[key] = value
    return merged


def _require(cfg: dict, key: str):
    if cfg[key] is None:
        raise ConfigError(f"missing required setting '{key}'")
    return cfg[key]


def _int_list(text, name: str) -> list[int]:
    try:
        return [int(v) for v in str(text).split(",") if v.strip() != ""]
    except ValueError:
        raise ConfigError(f"{name} must be a comma-separated integer list, got {text!r}") from None


def _float_list(text, name: str) -> list[float]:
    try:
        return [float(v) for v in str(text).split(",") if v.strip() != ""]
    except ValueError:
        raise ConfigError(f"{name} must be a comma-separated number list, got {text!r}") from None


def _fmt_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def _write_csv(path, rows, fields) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(CSV_SCHEMA + "\n")
        writer = csv.DictWriter(fh, fieldnames=list(fields))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt_cell(row.get(k)) for k in fields})


def _load_corpus_images(directory) -> list[np.ndarray]:
    root = Path(directory)
    if not root.is_dir():
        raise ConfigError(f"corpus directory {directory} does not exist")
    paths = sorted(root.glob("*.png")) + sorted(root.glob("*.PNG"))
    if not paths:
        raise ConfigError(f"corpus directory {directory} holds no .png files")
    return [feature_codec.load_image(p) for p in paths]


def cmd_fit(args) -> int:
    defaults = dict(out=None, synthetic=None, corpus=None, samples=512,
                    grid_height=8, grid_width=8, depth=4, heads=4, entries=8,
                    n_q=16, seed=0, feature_seed=0, max_iterations=100, tol=1e-8)
    cfg = _merged(args, defaults)
    out = _require(cfg, "out")
    shape = (int(cfg["depth"]), int(cfg["heads"]), int(cfg["entries"]), int(cfg["n_q"]))
    fit_cfg = FitConfig(max_iterations=int(cfg["max_iterations"]),
                        convergence_tol=float(cfg["tol"]), seed=int(cfg["seed"]))

    basis = None
    if cfg["corpus"]:
        images = _load_corpus_images(cfg["corpus"])
        total_patches = sum(
            -(-im.shape[0] // feature_codec.PATCH) * -(-im.shape[1] // feature_codec.PATCH)
            for im in images)
        if total_patches < max(shape[2], shape[3]):
            raise ConfigError(
                f"corpus supplies only {total_patches} patches, need at least {max(shape[2], shape[3])}")
        basis = feature_codec.fit_basis(images, n_q=shape[3], seed=int(cfg["seed"]))
        features = [feature_codec.encode(im, basis) for im in images]
    elif cfg["synthetic"]:
        features = pipeline.synthetic_features(int(cfg["samples"]), int(cfg["grid_height"]),
                                               int(cfg["grid_width"]), shape[3],
                                               seed=int(cfg["feature_seed"]))
    else:
        raise ConfigError("fit needs either --synthetic or --corpus DIR")

    mlc = fit(features, shape, fit_cfg)
    store.save_container(out, mlc, basis=basis)
    for d, energy in enumerate(residual_energies(features, mlc)):
        print(f"level {d} mean squared residual: {float(energy)!r}")
    print(f"wrote {out}")
    return 0


def cmd_reorder(args) -> int:
    defaults = dict(input=None, out=None, gray=True)
    cfg = _merged(args, defaults)
    container = store.load_container(_require(cfg, "input"))
    out = _require(cfg, "out")
    before = float(np.mean([gray_adjacent_distance(h) for lv in container.mlc.levels for h in lv.heads]))
    mlc, perms = reorder_multilevel(container.mlc, use_gray=bool(cfg["gray"]))
    after = float(np.mean([gray_adjacent_distance(h) for lv in mlc.levels for h in lv.heads]))
    store.save_container(out, mlc, cr_permutations=perms, basis=container.basis)
    print(f"gray-adjacent mean distance before: {before!r}")
    print(f"gray-adjacent mean distance after:  {after!r}")
    print(f"wrote {out}")
    return 0


def _link_config(cfg: dict, codec: str) -> LinkConfig:
    return LinkConfig(
        levels=int(cfg["levels"]),
        snr_db=float(cfg["snr_db"]),
        seed=int(cfg["seed"]),
        use_cr=bool(cfg["use_cr"]),
        use_requantization=bool(cfg["use_requantization"]),
        noiseless=bool(cfg["noiseless"]),
        codec=codec,
    )


def cmd_run(args) -> int:
    defaults = dict(codebook=None, image=None, grid_height=8, grid_width=8,
                    input_seed=0, levels=4, snr_db=10.0, seed=0, use_cr=True,
                    use_requantization=True, noiseless=False, csv=None,
                    save_image=None, dump_symbols=None)
    cfg = _merged(args, defaults)
    container = store.load_container(_require(cfg, "codebook"))

    if cfg["image"]:
        if container.basis is None:
            raise ConfigError("container has no patch basis; fit one with a --corpus")
        x = feature_codec.load_image(cfg["image"])
        link = _link_config(cfg, "patch")
    else:
        x = pipeline.synthetic_features(1, int(cfg["grid_height"]), int(cfg["grid_width"]),
                                        container.mlc.n_q, seed=int(cfg["input_seed"]))[0]
        link = _link_config(cfg, "identity")

    output, report = pipeline.run_link(x, link, container.mlc, container.basis)
    for field in REPORT_FIELDS:
        print(f"{field} {_fmt_cell(getattr(report, field)) or 'n/a'}")

    if cfg["csv"]:
        row = {"input_id": 0}
        row.update({k: getattr(link, k) for k in CONFIG_FIELDS})
        row.update({k: getattr(report, k) for k in REPORT_FIELDS})
        _write_csv(cfg["csv"], [row], ["input_id", *CONFIG_FIELDS, *REPORT_FIELDS])
    if cfg["save_image"]:
        if link.codec != "patch":
            raise ConfigError("--save-image needs an --image input")
        feature_codec.save_image(cfg["save_image"], output)
    if cfg["dump_symbols"]:
        # Re-run the transmit front end to expose the received symbols.
        mlc = reorder_multilevel(container.mlc, use_gray=True)[0] if link.use_cr else container.mlc
        z = feature_codec.encode(x, container.basis) if link.codec == "patch" else x
        stream = modulate(serialize_indices(rvq_encode(z, mlc, link.levels)))
        received = transmit(stream, ChannelConfig(link.snr_db, link.seed, link.noiseless))
        dump_symbols_csv(received, cfg["dump_symbols"])
    return 0


def cmd_sweep(args) -> int:
    defaults = dict(codebook=None, images=None, feature_count=4, grid_height=8,
                    grid_width=8, corpus_seed=0, snr_dbs="-5,0,5,10,15,20,25,30",
                    levels_list="1,2,3,4", seeds=20, seed_list=None, use_cr=True,
                    use_requantization=True, noiseless=False, csv=None,
                    aggregate_csv=None, jobs=1)
    cfg = _merged(args, defaults)
    container = store.load_container(_require(cfg, "codebook"))
    out_csv = _require(cfg, "csv")

    if cfg["images"]:
        if container.basis is None:
            raise ConfigError("container has no patch basis; fit one with a --corpus")
        corpus = _load_corpus_images(cfg["images"])
        codec = "patch"
    else:
        corpus = pipeline.synthetic_features(int(cfg["feature_count"]), int(cfg["grid_height"]),
                                             int(cfg["grid_width"]), container.mlc.n_q,
                                             seed=int(cfg["corpus_seed"]))
        codec = "identity"

    snrs = _float_list(cfg["snr_dbs"], "snr_dbs")
    levels_list = _int_list(cfg["levels_list"], "levels_list")
    if cfg["seed_list"] is not None:
        seeds = _int_list(cfg["seed_list"], "seed_list")
    else:
        seeds = list(range(int(cfg["seeds"])))
    if not snrs or not levels_list or not seeds:
        raise ConfigError("sweep grid must be non-empty")

    configs = [
        LinkConfig(levels=lv, snr_db=snr, seed=seed, use_cr=bool(cfg["use_cr"]),
                   use_requantization=bool(cfg["use_requantization"]),
                   noiseless=bool(cfg["noiseless"]), codec=codec)
        for lv in levels_list for snr in snrs for seed in seeds
    ]
    rows = pipeline.sweep(configs, corpus, container.mlc, container.basis,
                          jobs=max(1, int(cfg["jobs"])))
    _write_csv(out_csv, rows, ["input_id", *CONFIG_FIELDS, *REPORT_FIELDS])
    print(f"wrote {len(rows)} rows to {out_csv}")
    if cfg["aggregate_csv"]:
        agg = pipeline.aggregate(rows)
        fields = list(agg[0].keys())
        _write_csv(cfg["aggregate_csv"], agg, fields)
        print(f"wrote {len(agg)} aggregated rows to {cfg['aggregate_csv']}")
    return 0


def cmd_inspect(args) -> int:
    defaults = dict(codebook=None)
    cfg = _merged(args, defaults)
    container = store.load_container(_require(cfg, "codebook"))
    mlc = container.mlc
    print(f"D={mlc.depth} P={mlc.p} N={mlc.n} n_q={mlc.n_q} head_dim={mlc.head_dim}")
    print(f"joint states per cell: {mlc.levels[0].state_count()}")
    print(f"cr_permutations: {'present' if container.cr_permutations is not None else 'absent'}")
    print(f"patch basis: {'present' if container.basis is not None else 'absent'}")
    for d, level in enumerate(mlc.levels):
        norms = np.concatenate([np.linalg.norm(h.entries, axis=1) for h in level.heads])
        seps = []
        for h in level.heads:
            d2 = ((h.entries[:, None, :] - h.entries[None, :, :]) ** 2).sum(axis=2)
            seps.append(np.sqrt(d2[~np.eye(h.n, dtype=bool)].min()))
        gray_stat = np.mean([gray_adjacent_distance(h) for h in level.heads])
        print(f"level {d + 1}: entry norm mean {norms.mean():.6f}, "
              f"min separation {min(seps):.6f}, gray-adjacent distance {gray_stat:.6f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vqlink",
                                     description="Octonary residual-VQ link experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    boolean = argparse.BooleanOptionalAction

    p = sub.add_parser("fit", help="fit a codebook (and basis) and write a container")
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--synthetic", action=boolean, default=None,
                   help="fit on synthetic Gaussian feature grids")
    p.add_argument("--corpus", help="directory of PNG images")
    p.add_argument("--samples", type=int)
    p.add_argument("--grid-height", type=int)
    p.add_argument("--grid-width", type=int)
    p.add_argument("--depth", type=int)
    p.add_argument("--heads", type=int)
    p.add_argument("--entries", type=int)
    p.add_argument("--n-q", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--feature-seed", type=int)
    p.add_argument("--max-iterations", type=int)
    p.add_argument("--tol", type=float)
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser("reorder", help="apply codebook reordering to a container")
    p.add_argument("--config")
    p.add_argument("--in", dest="input")
    p.add_argument("--out")
    p.add_argument("--gray", action=boolean, default=None,
                   help="store the chain through the Gray sequence (default on)")
    p.set_defaults(handler=cmd_reorder)

    p = sub.add_parser("run", help="run a single link and print the report")
    p.add_argument("--config")
    p.add_argument("--codebook")
    p.add_argument("--image")
    p.add_argument("--grid-height", type=int)
    p.add_argument("--grid-width", type=int)
    p.add_argument("--input-seed", type=int)
    p.add_argument("--levels", type=int)
    p.add_argument("--snr-db", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--use-cr", action=boolean, default=None)
    p.add_argument("--use-requantization", action=boolean, default=None)
    p.add_argument("--noiseless", action=boolean, default=None)
    p.add_argument("--csv")
    p.add_argument("--save-image")
    p.add_argument("--dump-symbols")
    p.set_defaults(handler=cmd_run)

    p = sub.add_parser("sweep", help="run an SNR/level/seed grid and write CSV")
    p.add_argument("--config")
    p.add_argument("--codebook")
    p.add_argument("--images", help="directory of PNG inputs (default: synthetic features)")
    p.add_argument("--feature-count", type=int)
    p.add_argument("--grid-height", type=int)
    p.add_argument("--grid-width", type=int)
    p.add_argument("--corpus-seed", type=int)
    p.add_argument("--snr-dbs")
    p.add_argument("--levels-list")
    p.add_argument("--seeds", type=int, help="use seeds 0..N-1")
    p.add_argument("--seed-list", help="explicit comma-separated seeds")
    p.add_argument("--use-cr", action=boolean, default=None)
    p.add_argument("--use-requantization", action=boolean, default=None)
    p.add_argument("--noiseless", action=boolean, default=None)
    p.add_argument("--csv")
    p.add_argument("--aggregate-csv")
    p.add_argument("--jobs", type=int)
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("inspect", help="print container statistics")
    p.add_argument("--config")
    p.add_argument("--codebook")
    p.set_defaults(handler=cmd_inspect)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
