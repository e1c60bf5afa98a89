import json

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from desne.dataio import (CoresetSelection, DataError, DatasetMatrix, load_dataset, normalize,
                          read_selection, save_raw_f32, target_count, write_selection)


def test_cifar_two_records(tmp_path):
    rng = np.random.default_rng(0)
    recs = [np.concatenate([[lab], rng.integers(0, 256, 3072)]).astype(np.uint8) for lab in (3, 7)]
    path = tmp_path / "c.bin"
    path.write_bytes(b"".join(r.tobytes() for r in recs))
    m = load_dataset(path, "cifar-binary")
    assert (m.n, m.d) == (2, 3072)
    assert m.labels.tolist() == [3, 7]
    np.testing.assert_array_equal(m.data[1], recs[1][1:] / 255.0)
    assert m.data.min() >= 0 and m.data.max() <= 1


def test_cifar_truncated(tmp_path):
    path = tmp_path / "c.bin"
    path.write_bytes(bytes(3073 + 10))
    with pytest.raises(DataError):
        load_dataset(path, "cifar-binary")


def test_raw_f32(tmp_path):
    path = tmp_path / "x.f32"
    path.write_bytes(np.arange(20, dtype="<f4").tobytes())
    path.with_name("x.f32.json").write_text(json.dumps({"n": 5, "d": 4, "endianness": "little"}))
    m = load_dataset(path, "raw-f32")
    assert m.data.shape == (5, 4)
    assert m.data[4, 3] == 19.0


def test_raw_f32_size_mismatch(tmp_path):
    path = tmp_path / "x.f32"
    path.write_bytes(bytes(76))
    path.with_name("x.f32.json").write_text(json.dumps({"n": 5, "d": 4}))
    with pytest.raises(DataError):
        load_dataset(path, "raw-f32")


def test_raw_f32_roundtrip_bit_exact(tmp_path):
    x = np.random.default_rng(1).normal(size=(7, 3)).astype(np.float32)
    m = DatasetMatrix(x, np.arange(7), (3,), "r")
    save_raw_f32(m, tmp_path / "r.f32")
    back = load_dataset(tmp_path / "r.f32", "raw-f32")
    assert np.array_equal(back.data.astype(np.float32), x)
    assert back.labels.tolist() == list(range(7))


def test_csv(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("0,0\n1,1\n")
    m = load_dataset(p, "csv")
    assert (m.n, m.d) == (2, 2) and m.labels is None
    p.write_text("0,x\n1,1\n")
    with pytest.raises(DataError):
        load_dataset(p, "csv")


def test_csv_label_column(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("0.5,0.1,2\n0.2,0.3,0\n")
    assert load_dataset(p, "csv").labels.tolist() == [2, 0]
    assert load_dataset(p, "csv", label_column=False).labels is None


def test_invariants():
    with pytest.raises(DataError):
        DatasetMatrix(np.zeros((1, 3)))
    with pytest.raises(DataError):
        DatasetMatrix(np.array([[0.0], [np.inf]]))
    with pytest.raises(DataError):
        DatasetMatrix(np.zeros((3, 2)), labels=[1, 2])


def test_normalize():
    m = DatasetMatrix(np.array([[0.0], [255.0]]))
    assert normalize(m, "unit-range").data.tolist() == [[0.0], [1.0]]
    c = DatasetMatrix(np.array([[1.0, 2.0], [1.0, 4.0], [1.0, 9.0]]))
    s = normalize(c, "per-feature-standardize").data
    assert not s[:, 0].any()
    assert abs(s[:, 1].mean()) < 1e-12 and abs(s[:, 1].std() - 1) < 1e-12
    assert normalize(c, "none") is c
    const = DatasetMatrix(np.full((3, 2), 2.0))
    assert normalize(const, "unit-range").data.tolist() == const.data.tolist()


@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=40))
def test_unit_range_bounds(vals):
    # A constant matrix is returned unchanged, so the bound only holds otherwise.
    assume(max(vals) > min(vals))
    out = normalize(DatasetMatrix(np.array(vals)[:, None]), "unit-range").data
    assert out.min() >= 0 and out.max() <= 1


def test_target_count_rounds_half_up():
    assert target_count(0.1, 1000) == 100
    assert target_count(0.1, 15) == 2
    assert target_count(0.3, 5) == 2  # 1.5, not banker's rounding


def test_manifest_roundtrip_and_bytes(tmp_path):
    sel = CoresetSelection(np.array([1, 4, 7]), 0.3, {1: 0, 4: 2, 7: 5}, 9, "src", {1: 1, 4: 0})
    write_selection(sel, tmp_path / "a.json")
    write_selection(sel, tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert read_selection(tmp_path / "a.json") == sel
    with pytest.raises(DataError):
        write_selection(sel, tmp_path)
    with pytest.raises(DataError):
        write_selection(sel, tmp_path / "missing" / "a.json")


@given(st.integers(2, 300).flatmap(lambda n: st.tuples(
    st.just(n),
    st.sampled_from([0.1, 0.2, 0.3, 0.55, 1.0]),
    st.integers(0, 2**63 - 1),
    st.randoms(use_true_random=False),
)))
def test_manifest_roundtrip_property(tmp_path_factory, args):
    n, kr, seed, rnd = args
    t = target_count(kr, n)
    if t == 0:
        return
    idx = sorted(rnd.sample(range(n), t))
    sel = CoresetSelection(np.array(idx), kr, {i: rnd.randrange(1024) for i in idx}, seed,
                           "s", {i: rnd.randrange(10) for i in idx}, n)
    path = tmp_path_factory.mktemp("m") / "sel.json"
    write_selection(sel, path)
    assert read_selection(path) == sel


def test_selection_invariants():
    with pytest.raises(DataError):
        CoresetSelection(np.array([3, 1]), 0.1)
    with pytest.raises(DataError):
        CoresetSelection(np.array([1, 2]), 0.1, n=10)  # round(0.1 * 10) = 1
    with pytest.raises(DataError):
        CoresetSelection(np.array([1]), 0.0)
