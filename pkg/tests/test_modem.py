import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vqlink.modem import (
    QAM64,
    ConstellationMap,
    SymbolStream,
    demodulate,
    deserialize_indices,
    dump_symbols_csv,
    modulate,
    serialize_indices,
)

HALF_GAP = 1.0 / math.sqrt(42.0)


class TestConstellation:
    def test_levels_are_scaled_odd_integers(self):
        assert np.allclose(QAM64.axis_levels * math.sqrt(42.0), np.arange(-7, 8, 2), atol=1e-12)

    def test_adjacent_levels_differ_in_one_label_bit(self):
        labels = QAM64.label_of_level
        for a, b in zip(labels[:-1], labels[1:]):
            assert bin(int(a) ^ int(b)).count("1") == 1

    def test_constructor_rejects_non_gray_labels(self):
        with pytest.raises(ValueError):
            ConstellationMap(axis_levels=np.arange(8.0),
                             label_of_level=np.arange(8), energy_scale=1.0)

    def test_constructor_rejects_non_monotone_levels(self):
        with pytest.raises(ValueError):
            ConstellationMap(axis_levels=np.zeros(8),
                             label_of_level=QAM64.label_of_level, energy_scale=1.0)


class TestSerialize:
    def test_single_index(self):
        s = np.full((1, 1, 1, 1), 5, dtype=np.int64)
        assert serialize_indices(s).tolist() == [5]

    def test_level_major_order(self):
        s = np.array([3, 6]).reshape(2, 1, 1, 1)
        assert serialize_indices(s).tolist() == [3, 6]

    def test_head_then_rows_then_columns(self):
        s = np.arange(8).reshape(1, 2, 2, 2)
        assert serialize_indices(s).tolist() == [0, 1, 2, 3, 4, 5, 6, 7]

    def test_deserialize_validates_size(self):
        with pytest.raises(ValueError):
            deserialize_indices(np.zeros(3, dtype=np.int64), (1, 1, 2, 2))

    @settings(max_examples=50, deadline=None)
    @given(shape=st.tuples(st.integers(1, 3), st.integers(1, 4),
                           st.integers(1, 5), st.integers(1, 5)),
           seed=st.integers(0, 2**31 - 1))
    def test_roundtrip(self, shape, seed):
        s = np.random.default_rng(seed).integers(0, 8, size=shape)
        assert np.array_equal(deserialize_indices(serialize_indices(s), shape), s)


class TestModulate:
    def test_mean_symbol_energy_is_one_in_closed_form(self):
        pairs = np.array(list(itertools.product(range(8), repeat=2))).reshape(-1)
        stream = modulate(pairs)
        assert abs(float((np.abs(stream.symbols) ** 2).mean()) - 1.0) <= 1e-12

    def test_mean_symbol_energy_monte_carlo(self):
        idx = np.random.default_rng(0).integers(0, 8, size=200_000)
        stream = modulate(idx)
        assert abs(float((np.abs(stream.symbols) ** 2).mean()) - 1.0) <= 0.01

    def test_index_zero_lands_on_the_level_labelled_zero(self):
        stream = modulate(np.array([0, 0]))
        pos = int(np.flatnonzero(QAM64.label_of_level == 0)[0])
        level = QAM64.axis_levels[pos]
        assert stream.symbols[0] == level + 1j * level

    def test_odd_length_pads_with_index_zero(self):
        stream = modulate(np.array([2, 5, 7]))
        assert len(stream) == 2
        assert stream.index_count == 3
        pad_axis = stream.symbols[1].imag
        assert pad_axis == QAM64.axis_levels[int(np.flatnonzero(QAM64.label_of_level == 0)[0])]

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            modulate(np.array([0, 8]))
        with pytest.raises(ValueError):
            modulate(np.array([-1]))
        with pytest.raises(ValueError):
            modulate(np.array([0.5]))


class TestDemodulate:
    def test_noiseless_roundtrip_over_all_pairs(self):
        pairs = np.array(list(itertools.product(range(8), repeat=2))).reshape(-1)
        assert np.array_equal(demodulate(modulate(pairs)), pairs)

    def test_padding_dropped(self):
        idx = np.array([1, 4, 6])
        assert np.array_equal(demodulate(modulate(idx)), idx)

    def test_sub_half_gap_displacement_keeps_every_decision(self):
        idx = np.arange(8)
        stream = modulate(np.repeat(idx, 2))
        for sign in (+1, -1):
            shifted = SymbolStream(stream.symbols + sign * 0.99 * HALF_GAP * (1 + 1j),
                                   stream.index_count)
            assert np.array_equal(demodulate(shifted), np.repeat(idx, 2))

    def test_one_level_slip_flips_exactly_one_label_bit(self):
        for pos in range(8):
            for step in (-1, 1):
                neighbour = pos + step
                if not 0 <= neighbour < 8:
                    continue
                sent = int(QAM64.label_of_level[pos])
                axis = QAM64.axis_levels[neighbour]
                got = demodulate(SymbolStream(np.array([axis + 1j * axis]), 2))
                assert bin(int(got[0]) ^ sent).count("1") == 1

    def test_count_inconsistent_with_stream(self):
        stream = modulate(np.array([1, 2, 3, 4]))
        with pytest.raises(ValueError):
            demodulate(stream, count=7)

    def test_tie_goes_to_smaller_magnitude(self):
        # Integer levels make the midpoints exact floats, so the ties are real.
        cmap = ConstellationMap(axis_levels=np.arange(-7.0, 8.0, 2.0),
                                label_of_level=QAM64.label_of_level,
                                energy_scale=1.0)
        # +-2.0 sit exactly between +-1 and +-3: smaller magnitude (+-1) wins.
        got = demodulate(SymbolStream(np.array([2.0 - 2.0j]), 2), cmap=cmap)
        assert got.tolist() == [int(cmap.label_of_level[4]), int(cmap.label_of_level[3])]
        # 0.0 sits between -1 and +1 with equal magnitude: lower level wins.
        got = demodulate(SymbolStream(np.array([0.0 + 0.0j]), 2), cmap=cmap)
        assert got.tolist() == [int(cmap.label_of_level[3])] * 2


def test_dump_symbols_csv(tmp_path):
    stream = modulate(np.array([0, 7, 3]))
    path = tmp_path / "syms.csv"
    dump_symbols_csv(stream, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "i,q"
    assert len(lines) == 1 + len(stream)
    i, q = map(float, lines[1].split(","))
    assert complex(i, q) == stream.symbols[0]


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), n=st.integers(1, 64))
def test_property_noiseless_roundtrip(seed, n):
    idx = np.random.default_rng(seed).integers(0, 8, size=n)
    assert np.array_equal(demodulate(modulate(idx)), idx)
