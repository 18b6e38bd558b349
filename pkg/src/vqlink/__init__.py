"""Digital semantic transmission chain built on octonary residual VQ.

Feature grids are quantized by a multi-head octonary multi-level codebook,
the indices ride a Gray-labelled 64-QAM constellation over an AWGN channel,
and the receiver retrieves (and optionally requantizes) the feature before
decoding. See README.md for the experiment CLI.
"""

from .channel import ChannelConfig, noise_variance, transmit
from .feature_codec import PatchBasis, fit_basis
from .modem import QAM64, ConstellationMap, SymbolStream, demodulate, deserialize_indices, modulate, serialize_indices
from .pipeline import LinkConfig, LinkReport, aggregate, compute_cbr, compute_psnr, run_link, sweep, synthetic_features
from .quantizer import (
    OCTONARY,
    Codebook,
    FitConfig,
    MultiHeadCodebook,
    MultiLevelCodebook,
    fit,
    moc_quantize,
    quantize_head,
    requantize,
    residual_energies,
    rvq_decode,
    rvq_encode,
)
from .reorder import apply_permutations, gray_adjacent_distance, gray_sequence, reorder_codebook, reorder_multilevel
from .store import Container, load_container, save_container

__version__ = "0.1.0"
