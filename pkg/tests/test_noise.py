import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from dpc.data import clean_dataset, make_blobs, read_csv, write_csv
from dpc.noise import cyclic_map, inject, inject_asymmetric, inject_symmetric


def _balanced(n, n_classes, seed=0):
    rng = np.random.default_rng(seed)
    return clean_dataset(rng.normal(size=(n, 3)), np.arange(n) % n_classes, n_classes)


def test_zero_rate_keeps_labels():
    ds = _balanced(500, 5)
    for noisy in (inject_symmetric(ds, 0.0), inject_asymmetric(ds, 0.0)):
        np.testing.assert_array_equal(noisy.y_noisy, ds.y_true)
        assert not noisy.corrupted.any()


def test_symmetric_rate_is_exact():
    noisy = inject_symmetric(_balanced(10000, 10), 0.5, seed=3)
    assert 0.49 <= noisy.noise_rate() <= 0.51
    assert noisy.corrupted.sum() == 5000


def test_symmetric_targets_are_uniform_over_wrong_classes():
    n_cls = 10
    ds = _balanced(20000, n_cls, seed=1)
    noisy = inject_symmetric(ds, 0.5, seed=2)
    flipped = noisy.corrupted
    offsets = (noisy.y_noisy[flipped] - ds.y_true[flipped]) % n_cls
    assert offsets.min() >= 1
    counts = np.bincount(offsets, minlength=n_cls)[1:]
    assert stats.chisquare(counts).pvalue > 1e-3


def test_asymmetric_per_class_fraction():
    ds = _balanced(3000, 3)
    noisy = inject_asymmetric(ds, 0.4, seed=5)
    for c in range(3):
        members = ds.y_true == c
        assert abs(noisy.corrupted[members].mean() - 0.4) <= 0.01
        assert np.all(noisy.y_noisy[members & noisy.corrupted] == (c + 1) % 3)


def test_asymmetric_custom_map():
    ds = _balanced(400, 4)
    noisy = inject_asymmetric(ds, 0.25, class_map=[3, 0, 3, 2])
    assert set(noisy.y_noisy[noisy.corrupted & (ds.y_true == 2)]) == {3}


def test_cyclic_map():
    np.testing.assert_array_equal(cyclic_map(4), [1, 2, 3, 0])


@pytest.mark.parametrize("kind", ["symmetric", "asymmetric"])
def test_same_seed_reproduces(kind):
    ds = _balanced(1000, 4)
    np.testing.assert_array_equal(inject(ds, kind, 0.3, seed=11).y_noisy, inject(ds, kind, 0.3, seed=11).y_noisy)
    assert not np.array_equal(inject(ds, kind, 0.3, seed=11).y_noisy, inject(ds, kind, 0.3, seed=12).y_noisy)


@given(st.sampled_from(["symmetric", "asymmetric"]), st.floats(0.0, 0.95), st.integers(0, 2**16))
def test_never_touches_features_or_truth(kind, rate, seed):
    ds = _balanced(200, 4)
    X, y = ds.X.copy(), ds.y_true.copy()
    noisy = inject(ds, kind, rate, seed=seed)
    np.testing.assert_array_equal(noisy.X, X)
    np.testing.assert_array_equal(noisy.y_true, y)
    np.testing.assert_array_equal(ds.y_noisy, y)
    np.testing.assert_array_equal(noisy.corrupted, noisy.y_noisy != y)
    assert abs(noisy.noise_rate() - rate) <= 0.5 / 200 * 4 + 1e-12


def test_errors():
    ds = _balanced(100, 3)
    with pytest.raises(ValueError):
        inject_symmetric(ds, 1.0)
    with pytest.raises(ValueError):
        inject_symmetric(ds, -0.1)
    with pytest.raises(ValueError):
        inject_asymmetric(ds, 0.2, class_map=[0, 2, 1])
    with pytest.raises(ValueError):
        inject_asymmetric(ds, 0.2, class_map=[1, 2])
    with pytest.raises(ValueError):
        inject(ds, "pairflip", 0.2)


def test_none_kind_is_identity():
    ds = _balanced(50, 3)
    assert not inject(ds, "none", 0.4).corrupted.any()


def test_csv_round_trip(tmp_path):
    ds = inject_symmetric(make_blobs(300, 3, 5, seed=1), 0.3, seed=2)
    write_csv(ds, tmp_path / "d.csv")
    back = read_csv(tmp_path / "d.csv")
    np.testing.assert_array_equal(back.X, ds.X)
    np.testing.assert_array_equal(back.y_true, ds.y_true)
    np.testing.assert_array_equal(back.y_noisy, ds.y_noisy)
    assert back.has_truth


def test_csv_without_noise_columns(tmp_path):
    ds = make_blobs(40, 2, 3, seed=1)
    write_csv(ds, tmp_path / "d.csv", with_noise=False)
    back = read_csv(tmp_path / "d.csv")
    assert not back.has_truth
    np.testing.assert_array_equal(back.y_noisy, ds.y_true)
    assert inject_symmetric(back, 0.5).has_truth


def test_csv_errors(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(ValueError):
        read_csv(empty)
    header_only = tmp_path / "h.csv"
    header_only.write_text("f0,label\n")
    with pytest.raises(ValueError):
        read_csv(header_only)
    no_label = tmp_path / "n.csv"
    no_label.write_text("f0,f1\n1,2\n")
    with pytest.raises(ValueError):
        read_csv(no_label)
