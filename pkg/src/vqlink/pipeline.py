"""End-to-end transceiver: codec -> quantizer -> modem -> channel -> retrieval.

run_link executes one transmission and reports link metrics; sweep runs a
grid of configurations over a corpus, one row per (config, input), with
deterministic ordering so reruns are byte-identical.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import feature_codec
from .channel import ChannelConfig, transmit
from .modem import demodulate, deserialize_indices, modulate, serialize_indices
from .quantizer import MultiLevelCodebook, requantize, rvq_decode, rvq_encode
from .reorder import reorder_multilevel

__all__ = [
    "LinkConfig",
    "LinkReport",
    "run_link",
    "compute_cbr",
    "compute_psnr",
    "sweep",
    "aggregate",
    "synthetic_features",
    "REPORT_FIELDS",
    "CONFIG_FIELDS",
]


@dataclass(frozen=True)
class LinkConfig:
    """One transmission setup.

    codec selects the input type: "identity" transmits a feature grid as
    is, "patch" encodes an image through a PatchBasis first. use_cr applies
    the Gray-mapped codebook reordering before encoding (reordering an
    already reordered codebook is a no-op, so stored containers may carry
    either form).
    """

    levels: int = 4
    snr_db: float = 10.0
    seed: int = 0
    use_cr: bool = True
    use_requantization: bool = True
    noiseless: bool = False
    codec: str = "identity"

    def __post_init__(self):
        if self.levels < 1:
            raise ValueError("levels must be >= 1")
        if self.codec not in ("identity", "patch"):
            raise ValueError(f"codec must be 'identity' or 'patch', got {self.codec!r}")
        if not self.noiseless and not np.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite unless noiseless")


@dataclass(frozen=True)
class LinkReport:
    ser: float
    ber: float
    index_error_rate: float
    feature_mse: float
    psnr_db: float | None
    cbr: float | None
    bits_transmitted: int
    symbols_transmitted: int


CONFIG_FIELDS = ("codec", "levels", "snr_db", "seed", "use_cr", "use_requantization", "noiseless")
REPORT_FIELDS = ("ser", "ber", "index_error_rate", "feature_mse", "psnr_db", "cbr",
                 "bits_transmitted", "symbols_transmitted")

_BITS_PER_INDEX = 3
_POPCOUNT = np.array([bin(v).count("1") for v in range(8)], dtype=np.int64)


def compute_cbr(height: int, width: int, symbols: int) -> float:
    """Channel bandwidth ratio: complex symbols per source dimension 3*H*W."""
    if height <= 0 or width <= 0:
        raise ValueError("image dimensions must be positive")
    if symbols < 0:
        raise ValueError("symbol count must be >= 0")
    return symbols / (3 * height * width)


def compute_psnr(a, b) -> float:
    """PSNR in dB for [0, 1]-scaled images; inf for identical inputs."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    mse = float(((a - b) ** 2).mean())
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def run_link(x, cfg: LinkConfig, mlc: MultiLevelCodebook,
             basis: feature_codec.PatchBasis | None = None):
    """Run one end-to-end transmission. Returns (output, LinkReport).

    The output matches the input kind: reconstructed image for the patch
    codec, received feature grid for the identity codec. feature_mse always
    compares the received feature against the transmitter's pre-quantization
    feature, so a noiseless run reports the pure quantization error.
    """
    if cfg.levels > mlc.depth:
        raise ValueError(f"levels={cfg.levels} exceeds codebook depth {mlc.depth}")
    if cfg.codec == "patch":
        if basis is None:
            raise ValueError("patch codec requires a basis")
        img = x
        z = feature_codec.encode(img, basis)
    else:
        z = np.asarray(x, dtype=np.float64)

    mlc_used = reorder_multilevel(mlc, use_gray=True)[0] if cfg.use_cr else mlc

    s_tx = rvq_encode(z, mlc_used, cfg.levels)
    seq_tx = serialize_indices(s_tx)
    stream = modulate(seq_tx)
    received = transmit(stream, ChannelConfig(cfg.snr_db, cfg.seed, cfg.noiseless))
    seq_rx = demodulate(received)
    s_rx = deserialize_indices(seq_rx, s_tx.shape)

    z_hat = rvq_decode(s_rx, mlc_used)
    if cfg.use_requantization:
        z_hat = requantize(z_hat, mlc_used, cfg.levels)

    n_idx = seq_tx.size
    wrong = seq_tx != seq_rx
    index_error_rate = float(wrong.mean())
    ber = float(_POPCOUNT[seq_tx ^ seq_rx].sum() / (_BITS_PER_INDEX * n_idx))
    # A complex symbol is in error when any real index it carries is wrong;
    # a padded final axis never counts.
    per_symbol = wrong[0::2].copy()
    per_symbol[:wrong[1::2].size] |= wrong[1::2]
    ser = float(per_symbol.mean())
    feature_mse = float(((z - z_hat) ** 2).mean())

    psnr_db = None
    cbr = None
    if cfg.codec == "patch":
        out = feature_codec.decode(z_hat, basis, out_hw=img.shape[:2])
        psnr_db = compute_psnr(img, out)
        cbr = compute_cbr(img.shape[0], img.shape[1], len(stream))
    else:
        out = z_hat

    report = LinkReport(
        ser=ser,
        ber=ber,
        index_error_rate=index_error_rate,
        feature_mse=feature_mse,
        psnr_db=psnr_db,
        cbr=cbr,
        bits_transmitted=_BITS_PER_INDEX * n_idx,
        symbols_transmitted=len(stream),
    )
    return out, report


def synthetic_features(count: int, h: int, w: int, n_q: int, seed: int = 0) -> list[np.ndarray]:
    """Standard Gaussian feature grids, the synthetic experiment corpus."""
    if min(count, h, w, n_q) < 1:
        raise ValueError("count, h, w and n_q must be positive")
    rng = np.random.default_rng(seed)
    return [rng.standard_normal((h, w, n_q)) for _ in range(count)]


def _run_row(task):
    input_id, x, cfg, mlc, basis = task
    _, report = run_link(x, cfg, mlc, basis)
    row = {"input_id": input_id}
    row.update({k: getattr(cfg, k) for k in CONFIG_FIELDS})
    row.update({k: getattr(report, k) for k in REPORT_FIELDS})
    return row


def sweep(configs, corpus, mlc: MultiLevelCodebook,
          basis: feature_codec.PatchBasis | None = None, jobs: int = 1) -> list[dict]:
    """Run every config against every corpus input, in grid order.

    Returns one row dict per (config, input). Rows are independent, so
    jobs > 1 fans them out over a thread pool; the merge order stays the
    deterministic grid order either way.
    """
    configs = list(configs)
    corpus = list(corpus)
    if not configs or not corpus:
        raise ValueError("sweep needs at least one config and one input")
    tasks = [(i, x, cfg, mlc, basis) for cfg in configs for i, x in enumerate(corpus)]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_row, tasks))
    return [_run_row(t) for t in tasks]


def aggregate(rows) -> list[dict]:
    """Mean and population std of the metrics across seeds.

    Groups rows by everything except the seed; metric columns that are
    absent (None) anywhere in a group are reported as None.
    """
    key_fields = ("input_id",) + tuple(k for k in CONFIG_FIELDS if k != "seed")
    groups: dict[tuple, list[dict]] = {}
    order: list[tuple] = []
    for row in rows:
        key = tuple(row[k] for k in key_fields)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(row)
    out = []
    for key in order:
        members = groups[key]
        agg = dict(zip(key_fields, key))
        agg["n_seeds"] = len(members)
        for metric in REPORT_FIELDS:
            values = [m[metric] for m in members]
            if any(v is None for v in values):
                agg[f"{metric}_mean"] = None
                agg[f"{metric}_std"] = None
            else:
                arr = np.asarray(values, dtype=np.float64)
                agg[f"{metric}_mean"] = float(arr.mean())
                agg[f"{metric}_std"] = float(arr.std())
        out.append(agg)
    return out
