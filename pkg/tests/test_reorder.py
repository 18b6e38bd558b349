import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vqlink.quantizer import Codebook, MultiLevelCodebook, rvq_decode, rvq_encode
from vqlink.reorder import (
    apply_permutations,
    gray_adjacent_distance,
    gray_sequence,
    reorder_codebook,
    reorder_multilevel,
)

SCALAR_ENTRIES = [7.0, 1.0, 5.0, 0.0, 3.0, 2.0, 6.0, 4.0]


class TestGraySequence:
    def test_size_eight(self):
        assert gray_sequence(8).tolist() == [0, 1, 3, 2, 6, 7, 5, 4]

    def test_size_two(self):
        assert gray_sequence(2).tolist() == [0, 1]

    def test_size_four_matches_reflect_and_prefix(self):
        # reflect [0,1] -> [0,1,1,0], prefix the top bit on the second half
        assert gray_sequence(4).tolist() == [0, 1, 3, 2]

    @pytest.mark.parametrize("n", [0, 1, 3, 6, 12, 100])
    def test_rejects_non_powers_of_two(self, n):
        with pytest.raises(ValueError):
            gray_sequence(n)

    @pytest.mark.parametrize("n", [2, 4, 8, 16, 32, 64])
    def test_single_bit_steps_with_wraparound(self, n):
        g = gray_sequence(n)
        for a, b in zip(g, np.roll(g, -1)):
            assert bin(int(a) ^ int(b)).count("1") == 1


class TestReorderCodebook:
    def test_scalar_chain_hand_executed(self):
        # mean 3.5; nearest-to-previous with lowest-original-index ties:
        # 3 (ties 3/4), 2 (ties 2/4), 1, 0, 4, 5, 6, 7
        cb = Codebook(np.array(SCALAR_ENTRIES)[:, None])
        out, perm = reorder_codebook(cb, use_gray=False)
        assert out.entries.ravel().tolist() == [3, 2, 1, 0, 4, 5, 6, 7]
        assert perm.tolist() == [7, 2, 5, 3, 0, 1, 6, 4]

    def test_gray_mapping_places_chain_positions_at_gray_slots(self):
        cb = Codebook(np.array(SCALAR_ENTRIES)[:, None])
        plain, _ = reorder_codebook(cb, use_gray=False)
        gray, _ = reorder_codebook(cb, use_gray=True)
        g = gray_sequence(8)
        for i in range(8):
            assert gray.entries[g[i], 0] == plain.entries[i, 0]
        # chain position 2 lands at slot g[2] = 3
        assert gray.entries[3, 0] == plain.entries[2, 0]

    def test_entry_multiset_preserved(self):
        rng = np.random.default_rng(0)
        cb = Codebook(rng.standard_normal((8, 5)))
        for use_gray in (False, True):
            out, perm = reorder_codebook(cb, use_gray=use_gray)
            assert sorted(map(tuple, out.entries)) == sorted(map(tuple, cb.entries))
            assert sorted(perm.tolist()) == list(range(8))
            assert np.array_equal(out.entries[perm], cb.entries)

    def test_scalar_statistic_improves_exactly(self):
        # chain [3,2,1,0,4,5,6,7]: gaps 1,1,1,4,1,1,1 plus wrap |7-3| = 4
        cb = Codebook(np.array(SCALAR_ENTRIES)[:, None])
        out, _ = reorder_codebook(cb, use_gray=True)
        assert gray_adjacent_distance(cb) == 22 / 8
        assert gray_adjacent_distance(out) == 14 / 8

    def test_reordering_is_idempotent(self):
        rng = np.random.default_rng(1)
        cb = Codebook(rng.standard_normal((8, 6)))
        once, _ = reorder_codebook(cb, use_gray=True)
        twice, _ = reorder_codebook(once, use_gray=True)
        assert np.array_equal(once.entries, twice.entries)

    def test_non_power_of_two_with_gray_rejected(self):
        cb = Codebook(np.zeros((6, 2)) + np.arange(6)[:, None])
        with pytest.raises(ValueError):
            reorder_codebook(cb, use_gray=True)
        out, _ = reorder_codebook(cb, use_gray=False)
        assert out.n == 6


class TestReorderMultilevel:
    def test_single_head_single_level_matches_reorder_codebook(self):
        rng = np.random.default_rng(2)
        entries = rng.standard_normal((1, 1, 8, 4))
        mlc = MultiLevelCodebook.from_array(entries)
        got, perms = reorder_multilevel(mlc, use_gray=True)
        want, perm = reorder_codebook(Codebook(entries[0, 0]), use_gray=True)
        assert np.array_equal(got.levels[0].heads[0].entries, want.entries)
        assert np.array_equal(perms[0, 0], perm)

    def test_reconstruction_invariant_under_reordering(self, fitted_mlc):
        rng = np.random.default_rng(3)
        reordered, _ = reorder_multilevel(fitted_mlc, use_gray=True)
        z = rng.standard_normal((6, 4, 16))
        before = rvq_decode(rvq_encode(z, fitted_mlc), fitted_mlc)
        after = rvq_decode(rvq_encode(z, reordered), reordered)
        assert np.array_equal(before, after)

    def test_permutations_remap_existing_index_tensors(self, fitted_mlc):
        rng = np.random.default_rng(4)
        reordered, perms = reorder_multilevel(fitted_mlc, use_gray=True)
        z = rng.standard_normal((5, 5, 16))
        s_old = rvq_encode(z, fitted_mlc)
        s_new = apply_permutations(s_old, perms)
        assert np.array_equal(rvq_decode(s_new, reordered), rvq_decode(s_old, fitted_mlc))

    def test_apply_permutations_validates_shape(self):
        with pytest.raises(ValueError):
            apply_permutations(np.zeros((2, 2, 1, 1), dtype=np.int64), np.zeros((1, 2, 8), dtype=np.int64))

    def test_statistic_improves_on_average(self):
        deltas = []
        for seed in range(20):
            rng = np.random.default_rng(seed)
            cb = Codebook(rng.standard_normal((8, 8)))
            out, _ = reorder_codebook(cb, use_gray=True)
            deltas.append(gray_adjacent_distance(out) - gray_adjacent_distance(cb))
        assert np.mean(deltas) < 0


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), dim=st.integers(1, 6), use_gray=st.booleans())
def test_property_reorder_is_a_permutation(seed, dim, use_gray):
    rng = np.random.default_rng(seed)
    cb = Codebook(rng.standard_normal((8, dim)))
    out, perm = reorder_codebook(cb, use_gray=use_gray)
    assert np.array_equal(out.entries[perm], cb.entries)
    assert sorted(perm.tolist()) == list(range(8))
