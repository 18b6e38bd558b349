import json

import numpy as np
import pytest

from vqlink.feature_codec import PATCH_DIM, PatchBasis
from vqlink.quantizer import MultiLevelCodebook
from vqlink.reorder import reorder_multilevel
from vqlink.store import load_container, save_container


@pytest.fixture()
def mlc():
    rng = np.random.default_rng(0)
    return MultiLevelCodebook.from_array(rng.standard_normal((2, 2, 8, 3)))


@pytest.fixture()
def basis():
    rng = np.random.default_rng(1)
    rows = np.linalg.qr(rng.standard_normal((PATCH_DIM, 6)))[0].T
    return PatchBasis(rows=rows, mean=rng.uniform(0, 1, PATCH_DIM))


def test_roundtrip_codebook_only(tmp_path, mlc):
    path = tmp_path / "cb.json"
    save_container(path, mlc)
    loaded = load_container(path)
    assert np.array_equal(loaded.mlc.to_array(), mlc.to_array())
    assert loaded.cr_permutations is None
    assert loaded.basis is None


def test_roundtrip_with_permutations_and_basis(tmp_path, mlc, basis):
    reordered, perms = reorder_multilevel(mlc)
    path = tmp_path / "cb.json"
    save_container(path, reordered, cr_permutations=perms, basis=basis)
    loaded = load_container(path)
    assert np.array_equal(loaded.mlc.to_array(), reordered.to_array())
    assert np.array_equal(loaded.cr_permutations, perms)
    assert np.array_equal(loaded.basis.rows, basis.rows)
    assert np.array_equal(loaded.basis.mean, basis.mean)


def test_save_is_deterministic(tmp_path, mlc, basis):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    save_container(a, mlc, basis=basis)
    save_container(b, mlc, basis=basis)
    assert a.read_bytes() == b.read_bytes()


def test_save_rejects_non_octonary(tmp_path):
    small = MultiLevelCodebook.from_array(np.zeros((1, 1, 4, 2)))
    with pytest.raises(ValueError):
        save_container(tmp_path / "x.json", small)


def test_save_rejects_mismatched_basis(tmp_path, mlc):
    rng = np.random.default_rng(2)
    rows = np.linalg.qr(rng.standard_normal((PATCH_DIM, 4)))[0].T
    wrong = PatchBasis(rows=rows, mean=np.zeros(PATCH_DIM))
    with pytest.raises(ValueError):
        save_container(tmp_path / "x.json", mlc, basis=wrong)


def test_save_rejects_bad_permutation_shape(tmp_path, mlc):
    with pytest.raises(ValueError):
        save_container(tmp_path / "x.json", mlc, cr_permutations=np.zeros((1, 2, 8), dtype=int))


class TestLoaderRejections:
    def _doc(self, tmp_path, mlc, mutate):
        path = tmp_path / "cb.json"
        save_container(path, mlc)
        doc = json.loads(path.read_text())
        mutate(doc)
        path.write_text(json.dumps(doc))
        return path

    def test_rejects_wrong_version(self, tmp_path, mlc):
        path = self._doc(tmp_path, mlc, lambda d: d.update(version=99))
        with pytest.raises(ValueError):
            load_container(path)

    def test_rejects_non_octonary_header(self, tmp_path, mlc):
        path = self._doc(tmp_path, mlc, lambda d: d.update(N=16))
        with pytest.raises(ValueError):
            load_container(path)

    def test_rejects_shape_mismatch(self, tmp_path, mlc):
        path = self._doc(tmp_path, mlc, lambda d: d.update(D=3))
        with pytest.raises(ValueError):
            load_container(path)

    def test_rejects_non_finite_entries(self, tmp_path, mlc):
        def mutate(d):
            d["levels"][0][0][0][0] = 1e999  # json inf
        path = self._doc(tmp_path, mlc, mutate)
        with pytest.raises(ValueError):
            load_container(path)

    def test_rejects_invalid_permutation(self, tmp_path, mlc):
        def mutate(d):
            d["cr_permutations"] = [[[0] * 8] * 2] * 2
        path = self._doc(tmp_path, mlc, mutate)
        with pytest.raises(ValueError):
            load_container(path)

    def test_rejects_non_orthonormal_basis(self, tmp_path, mlc):
        def mutate(d):
            rows = np.ones((6, PATCH_DIM))
            d["basis"] = {"n_q": 6, "mean": [0.0] * PATCH_DIM, "rows": rows.tolist()}
        path = self._doc(tmp_path, mlc, mutate)
        with pytest.raises(ValueError):
            load_container(path)

    def test_rejects_basis_n_q_mismatch(self, tmp_path, mlc, basis):
        # basis has 6 channels but we claim a 4-channel codebook
        rng = np.random.default_rng(3)
        small = MultiLevelCodebook.from_array(rng.standard_normal((1, 1, 8, 4)))
        path = tmp_path / "cb.json"
        save_container(path, small)
        doc = json.loads(path.read_text())
        doc["basis"] = {"n_q": 6, "mean": basis.mean.tolist(), "rows": basis.rows.tolist()}
        path.write_text(json.dumps(doc))
        with pytest.raises(ValueError):
            load_container(path)

    def test_rejects_corrupt_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ValueError):
            load_container(path)

    def test_rejects_missing_header(self, tmp_path):
        path = tmp_path / "empty.json"
        path.write_text("{}")
        with pytest.raises(ValueError):
            load_container(path)


def test_floats_roundtrip_exactly(tmp_path):
    rng = np.random.default_rng(4)
    arr = rng.standard_normal((1, 1, 8, 2)) * np.pi
    mlc = MultiLevelCodebook.from_array(arr)
    path = tmp_path / "cb.json"
    save_container(path, mlc)
    assert np.array_equal(load_container(path).mlc.to_array(), arr)
