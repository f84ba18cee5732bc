import numpy as np
import pytest

from conftest import unit_columns
from sdrain.dictionary import (Dictionary, DictionaryFormatError, DictionarySet,
                               ksvd, ksvd_train, load_dictionary, normalize_atoms,
                               save_dictionary)
from sdrain.omp import OmpStop, omp_batch, codes_to_matrix


def test_normalize_examples():
    A = np.zeros((4, 3))
    A[:2, 0] = [3, 4]
    A[1, 1] = 1.0
    A[0, 2] = -1.0
    out = normalize_atoms(A)
    assert np.allclose(out[:, 0], [0.6, 0.8, 0, 0])
    assert np.array_equal(out[:, 1], A[:, 1])
    assert np.array_equal(out[:, 2], [1, 0, 0, 0])


def test_normalize_rejects_zero_column():
    with pytest.raises(ValueError):
        normalize_atoms(np.zeros((4, 2)))


def test_dictionary_validates_norms(rng):
    with pytest.raises(ValueError):
        Dictionary(2 * unit_columns(rng, 4, 3), "rain", 2)
    with pytest.raises(ValueError):
        Dictionary(unit_columns(rng, 4, 3), "snow", 2)


def test_orthonormal_training_set_recovered(rng):
    Q, _ = np.linalg.qr(rng.standard_normal((16, 16)))
    D = ksvd_train(Q, K=16, L=1, iters=5, seed=3, m=4)
    # every training vector is (up to sign) one learned atom
    proj = np.abs(D.atoms.T @ Q)
    assert np.allclose(proj.max(axis=0), 1.0, atol=1e-10)
    X = codes_to_matrix(omp_batch(Q, D.atoms, OmpStop.sparsity(1)), 16)
    assert np.mean((Q - D.atoms @ X) ** 2) < 1e-8


def test_rank_one_training_set(rng):
    v = rng.standard_normal(9)
    Y = np.outer(v, rng.uniform(0.5, 2.0, 40) * rng.choice([-1, 1], 40))
    D = ksvd_train(Y, K=1, L=1, iters=3, m=3)
    assert np.allclose(np.abs(D.atoms[:, 0]), np.abs(v) / np.linalg.norm(v), atol=1e-12)


def test_history_non_increasing_and_unit_norm(rng):
    truth = unit_columns(rng, 25, 40)
    X = np.zeros((40, 600))
    for j in range(600):
        X[rng.choice(40, 3, replace=False), j] = rng.standard_normal(3)
    Y = truth @ X + 0.01 * rng.standard_normal((25, 600))
    D, Xf, hist = ksvd(Y, Y[:, :40], L=3, iters=8)
    assert all(b <= a + 1e-9 for a, b in zip(hist, hist[1:]))
    assert hist[-1] < hist[0]
    assert np.allclose(np.linalg.norm(D, axis=0), 1.0, atol=1e-12)
    assert hist[-1] == pytest.approx(np.mean((Y - D @ Xf) ** 2), rel=1e-9)


def test_training_is_deterministic(rng):
    Y = rng.standard_normal((16, 200))
    a = ksvd_train(Y, K=20, iters=3, seed=7)
    b = ksvd_train(Y, K=20, iters=3, seed=7)
    assert np.array_equal(a.atoms, b.atoms)


def test_training_errors():
    with pytest.raises(ValueError):
        ksvd_train(np.ones((4, 3)), K=5)
    with pytest.raises(ValueError):
        ksvd_train(np.zeros((4, 10)), K=2)


def test_round_trip(tmp_path, rng):
    for kind in ("rain", "nonrain"):
        D = Dictionary(unit_columns(rng, 16, 7), kind, 4)
        save_dictionary(D, tmp_path / "d.sdic")
        back = load_dictionary(tmp_path / "d.sdic")
        assert back.kind == kind and back.m == 4
        assert back.atoms.tobytes() == D.atoms.tobytes()


def test_file_layout(tmp_path, rng):
    D = Dictionary(unit_columns(rng, 4, 3), "rain", 2)
    save_dictionary(D, tmp_path / "d.sdic")
    raw = (tmp_path / "d.sdic").read_bytes()
    assert raw[:4] == b"SDIC"
    assert raw[4:8] == (1).to_bytes(4, "little")
    assert raw[8] == 1
    assert raw[9:13] == (2).to_bytes(4, "little")
    assert raw[13:17] == (3).to_bytes(4, "little")
    assert np.frombuffer(raw[17:25], "<f8")[0] == D.atoms[0, 0]
    assert np.frombuffer(raw[25:33], "<f8")[0] == D.atoms[1, 0]


def test_corrupt_files(tmp_path, rng):
    D = Dictionary(unit_columns(rng, 4, 3), "rain", 2)
    path = tmp_path / "d.sdic"
    save_dictionary(D, path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-5])
    with pytest.raises(DictionaryFormatError, match="expected"):
        load_dictionary(path)
    path.write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(DictionaryFormatError, match="magic"):
        load_dictionary(path)
    path.write_bytes(raw[:9] + (1 << 20).to_bytes(4, "little") + raw[13:])
    with pytest.raises(DictionaryFormatError, match="dimensions"):
        load_dictionary(path)
    path.write_bytes(raw[:6])
    with pytest.raises(DictionaryFormatError, match="truncated"):
        load_dictionary(path)


def test_dictionary_set_joint(rng):
    a = Dictionary(unit_columns(rng, 4, 3), "nonrain", 2)
    b = Dictionary(unit_columns(rng, 4, 3), "rain", 2)
    s = DictionarySet(a, b)
    assert np.array_equal(s.joint()[:, 3:], b.atoms)
    with pytest.raises(ValueError):
        DictionarySet(a, Dictionary(unit_columns(rng, 4, 2), "rain", 2))
