"""AWGN channel with calibrated SNR.

SNR is defined against the total complex noise variance with unit average
symbol energy: sigma^2 = 10**(-snr_db/10), split evenly across the real
and imaginary components. Noise comes from numpy's PCG64 generator
(ziggurat normal sampling), so a seed pins the whole realization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .modem import SymbolStream

__all__ = ["ChannelConfig", "noise_variance", "transmit"]


@dataclass(frozen=True)
class ChannelConfig:
    snr_db: float = 10.0
    seed: int = 0
    noiseless: bool = False

    def __post_init__(self):
        if not self.noiseless and not np.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite unless noiseless")


def noise_variance(snr_db: float) -> float:
    """Total complex noise variance for unit-energy symbols."""
    return 10.0 ** (-snr_db / 10.0)


def transmit(x: SymbolStream, cfg: ChannelConfig) -> SymbolStream:
    """y = x + w with w circularly-symmetric complex Gaussian."""
    if cfg.noiseless:
        return SymbolStream(x.symbols, x.index_count)
    sigma2 = noise_variance(cfg.snr_db)
    rng = np.random.default_rng(cfg.seed)
    g = rng.standard_normal((len(x), 2))
    w = (g[:, 0] + 1j * g[:, 1]) * np.sqrt(sigma2 / 2.0)
    return SymbolStream(x.symbols + w, x.index_count)
