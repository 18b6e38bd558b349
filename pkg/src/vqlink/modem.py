"""Gray-labelled 64-QAM modem: one octonary index per quadrature axis.

Two consecutive indices form one complex symbol (first index drives I,
second drives Q). The 8 amplitude levels per axis are {-7,...,7}/sqrt(42),
which gives unit average symbol energy under uniform inputs, and the label
carried by the k-th ascending level is the k-th element of the Gray
sequence, so a one-level decision error flips exactly one bit of the 3-bit
label and lands on the neighbouring index in the Gray sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .reorder import gray_sequence

__all__ = [
    "ConstellationMap",
    "SymbolStream",
    "QAM64",
    "serialize_indices",
    "deserialize_indices",
    "modulate",
    "demodulate",
    "dump_symbols_csv",
]


@dataclass(frozen=True)
class ConstellationMap:
    """Per-axis amplitude levels and the 3-bit Gray labels they carry."""

    axis_levels: np.ndarray    # (8,) ascending amplitudes
    label_of_level: np.ndarray  # (8,) label carried by each ascending level
    energy_scale: float         # amplitude normalization constant

    def __post_init__(self):
        levels = np.asarray(self.axis_levels, dtype=np.float64)
        labels = np.asarray(self.label_of_level, dtype=np.int64)
        if levels.shape != labels.shape or levels.ndim != 1:
            raise ValueError("axis_levels and label_of_level must be matching 1-D arrays")
        if np.any(np.diff(levels) <= 0):
            raise ValueError("axis_levels must be strictly ascending")
        if sorted(labels.tolist()) != list(range(len(labels))):
            raise ValueError("label_of_level must be a permutation of 0..n-1")
        for a, b in zip(labels[:-1], labels[1:]):
            if bin(int(a) ^ int(b)).count("1") != 1:
                raise ValueError("adjacent levels must carry labels differing in one bit")
        levels = levels.copy()
        labels = labels.copy()
        levels.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "axis_levels", levels)
        object.__setattr__(self, "label_of_level", labels)
        position = np.empty(len(labels), dtype=np.int64)
        position[labels] = np.arange(len(labels))
        position.setflags(write=False)
        object.__setattr__(self, "_position_of_label", position)
        # Hard-decision candidate order: distance ties go to the smaller
        # amplitude magnitude, then to the lower level position.
        order = np.lexsort((np.arange(len(levels)), np.abs(levels)))
        order.setflags(write=False)
        object.__setattr__(self, "_decision_order", order)

    @property
    def n(self) -> int:
        return len(self.axis_levels)

    def position_of_label(self, labels) -> np.ndarray:
        return self._position_of_label[labels]


def _make_qam64() -> ConstellationMap:
    scale = 1.0 / math.sqrt(42.0)
    return ConstellationMap(
        axis_levels=np.arange(-7, 8, 2, dtype=np.float64) * scale,
        label_of_level=gray_sequence(8),
        energy_scale=scale,
    )


QAM64 = _make_qam64()


@dataclass(frozen=True)
class SymbolStream:
    """Complex symbol sequence plus the index count it carries (odd counts pad)."""

    symbols: np.ndarray
    index_count: int

    def __post_init__(self):
        sym = np.asarray(self.symbols, dtype=np.complex128)
        if sym.ndim != 1:
            raise ValueError("symbols must be a 1-D complex array")
        if self.index_count < 0 or -(-self.index_count // 2) != len(sym):
            raise ValueError(
                f"{len(sym)} symbols cannot carry {self.index_count} indices")
        sym = sym.copy()
        sym.setflags(write=False)
        object.__setattr__(self, "symbols", sym)

    def __len__(self) -> int:
        return len(self.symbols)


def serialize_indices(s) -> np.ndarray:
    """Flatten an index tensor level-major, then head, then row-major (h, w)."""
    s = np.asarray(s)
    if s.ndim != 4:
        raise ValueError(f"index tensor must have shape (L, P, h, w), got {s.shape}")
    return np.ascontiguousarray(s).reshape(-1)


def deserialize_indices(seq, shape) -> np.ndarray:
    """Inverse of serialize_indices given the original (L, P, h, w) shape."""
    seq = np.asarray(seq)
    if seq.ndim != 1:
        raise ValueError("index sequence must be 1-D")
    if len(shape) != 4:
        raise ValueError(f"shape must be (L, P, h, w), got {shape!r}")
    expected = int(np.prod(shape))
    if seq.size != expected:
        raise ValueError(f"sequence of {seq.size} indices does not fill shape {tuple(shape)}")
    return seq.reshape(shape)


def _check_index_sequence(indices, n: int) -> np.ndarray:
    indices = np.asarray(indices)
    if not np.issubdtype(indices.dtype, np.integer):
        raise ValueError("indices must be integers")
    if indices.ndim != 1:
        raise ValueError("indices must be a 1-D sequence")
    if indices.size and (indices.min() < 0 or indices.max() >= n):
        raise ValueError(f"indices must lie in [0, {n})")
    return indices.astype(np.int64)


def modulate(indices, cmap: ConstellationMap = QAM64) -> SymbolStream:
    """Map an octonary index sequence to constellation symbols.

    Index pairs (a, b) become I + jQ with I the amplitude whose label is a
    and Q the one labelled b; an odd-length sequence is padded with index 0
    (recorded via index_count so demodulation drops it).
    """
    indices = _check_index_sequence(indices, cmap.n)
    count = indices.size
    if count % 2:
        indices = np.append(indices, 0)
    amps = cmap.axis_levels[cmap.position_of_label(indices)]
    return SymbolStream(amps[0::2] + 1j * amps[1::2], index_count=count)


def demodulate(stream: SymbolStream, count: int | None = None,
               cmap: ConstellationMap = QAM64) -> np.ndarray:
    """Hard-decision demodulation back to an octonary index sequence.

    Each axis value decides for the nearest amplitude level (ties toward
    the smaller magnitude, then the lower level) and emits that level's
    label. Padding introduced by modulate is dropped.
    """
    if count is None:
        count = stream.index_count
    if count < 0 or -(-count // 2) != len(stream):
        raise ValueError(f"count {count} inconsistent with {len(stream)} symbols")
    axis = np.empty(2 * len(stream))
    axis[0::2] = stream.symbols.real
    axis[1::2] = stream.symbols.imag
    candidates = cmap.axis_levels[cmap._decision_order]
    nearest = np.abs(axis[:, None] - candidates[None, :]).argmin(axis=1)
    positions = cmap._decision_order[nearest]
    return cmap.label_of_level[positions][:count]


def dump_symbols_csv(stream: SymbolStream, path) -> None:
    """Write one I,Q row per symbol, for constellation scatter plots."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("i,q\n")
        for s in stream.symbols:
            fh.write(f"{float(s.real)!r},{float(s.imag)!r}\n")
