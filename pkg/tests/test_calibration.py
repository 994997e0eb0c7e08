import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from dpc.calibration import calibrated_softmax, gradient_shrinkage, logits_to_dirichlet, softmax
from dpc.gradcheck import numeric_grad
from dpc.losses import calibrated_cross_entropy, cross_entropy

CAT = [0.0, 2.0, 0.0, 0.0]
WEAK_CAT = [-2.0, 0.0, -2.0, -2.0]

logit_vectors = st.integers(2, 10).flatmap(
    lambda c: hnp.arrays(np.float64, c, elements=st.floats(-20, 20))
)


def _mp_calibrated(o, gamma, c):
    num = [mp.e ** mp.mpf(v) + gamma for v in o]
    return float(num[c] / sum(num))


def test_softmax_figure_one_pair():
    ref = float(mp.e**2 / (mp.e**2 + 3))
    assert softmax(CAT)[1] == pytest.approx(ref, abs=1e-15)
    assert softmax(CAT)[1] == pytest.approx(0.7112, abs=5e-5)
    np.testing.assert_allclose(softmax(WEAK_CAT), softmax(CAT), atol=1e-15)


def test_softmax_uniform():
    np.testing.assert_allclose(softmax([5.0, 5.0, 5.0]), np.full(3, 1 / 3), atol=1e-15)


def test_calibrated_softmax_figure_one_pair():
    p_cat = calibrated_softmax(CAT, 2.5)[1]
    p_weak = calibrated_softmax(WEAK_CAT, 2.5)[1]
    assert p_cat == pytest.approx(_mp_calibrated(CAT, 2.5, 1), abs=1e-14)
    assert p_weak == pytest.approx(_mp_calibrated(WEAK_CAT, 2.5, 1), abs=1e-14)
    assert p_cat == pytest.approx(0.4850, abs=5e-5)
    assert p_weak == pytest.approx(0.3069, abs=5e-5)
    assert p_weak < p_cat


@pytest.mark.parametrize("gamma", [1e-3, 1.0, 2.5, 100.0])
def test_calibrated_softmax_constant_logits_uniform(gamma):
    np.testing.assert_allclose(calibrated_softmax([3.0, 3.0, 3.0], gamma), np.full(3, 1 / 3), atol=1e-15)


def test_calibrated_softmax_no_overflow():
    p = calibrated_softmax([800.0, -800.0, 0.0], 2.5)
    assert np.all(np.isfinite(p))
    assert p.sum() == pytest.approx(1.0, abs=1e-12)


def test_rejects_single_class():
    with pytest.raises(ValueError):
        softmax([1.0])
    with pytest.raises(ValueError):
        calibrated_softmax([1.0], 1.0)


@given(logit_vectors, st.floats(-100, 100))
def test_softmax_translation_invariant(o, k):
    np.testing.assert_allclose(softmax(o + k), softmax(o), atol=1e-12)


@given(logit_vectors, st.floats(0.01, 50))
def test_calibrated_softmax_is_a_distribution(o, gamma):
    p = calibrated_softmax(o, gamma)
    assert np.all((p >= 0) & (p <= 1))
    assert p.sum() == pytest.approx(1.0, abs=1e-9)


@given(logit_vectors, st.floats(0.5, 20), st.floats(0.1, 10))
def test_calibrated_softmax_breaks_translation_invariance(o, gamma, k):
    if np.ptp(o) < 1e-3:
        return
    base = calibrated_softmax(o, gamma)
    shifted_down = calibrated_softmax(o - k, gamma)
    assert not np.allclose(base, shifted_down, rtol=0, atol=1e-15)
    # lowering all logits moves the top probability toward 1/C
    assert shifted_down.max() < base.max()
    assert shifted_down.max() > 1 / len(o)


def test_calibrated_softmax_max_decreases_monotonically_to_uniform(rng):
    o = rng.normal(size=5)
    tops = [calibrated_softmax(o + k, 2.0).max() for k in np.linspace(0, -10, 21)]
    assert np.all(np.diff(tops) < 0)
    assert calibrated_softmax(o - 60, 2.0).max() == pytest.approx(0.2, abs=1e-12)


def test_calibrated_softmax_limits(rng):
    for _ in range(50):
        o = rng.uniform(-10, 10, size=rng.integers(2, 11))
        np.testing.assert_allclose(calibrated_softmax(o, 1e-12), softmax(o), atol=1e-6)
        np.testing.assert_allclose(calibrated_softmax(o, 1e12), np.full(len(o), 1 / len(o)), atol=1e-6)


def test_logits_to_dirichlet_examples():
    np.testing.assert_allclose(logits_to_dirichlet([0.0, 0.0], 1.0).alpha, [2.0, 2.0])
    np.testing.assert_allclose(logits_to_dirichlet([np.log(4.0), 0.0], 2.0).alpha, [3.0, 1.5], rtol=1e-15)


def test_dirichlet_mean_is_calibrated_softmax(rng):
    for _ in range(100):
        o = rng.normal(scale=3, size=rng.integers(2, 11))
        d = logits_to_dirichlet(o, 2.5)
        np.testing.assert_allclose(d.mean(), calibrated_softmax(o, 2.5), atol=1e-12)
        assert np.all(d.alpha > 1)
        assert np.all(d.evidence >= 0)


def test_logits_to_dirichlet_rejects_bad_gamma():
    with pytest.raises(ValueError):
        logits_to_dirichlet([0.0, 1.0], 0.0)


def test_gradient_shrinkage_example():
    assert gradient_shrinkage(np.zeros(2), np.array([1, 0]), 1, 1.0) == pytest.approx(0.25, abs=1e-15)


def test_gradient_shrinkage_rejects_given_label():
    with pytest.raises(ValueError):
        gradient_shrinkage(np.zeros(3), np.array([0, 1, 0]), 1, 1.0)


def _fd_gap(o, y, c, gamma):
    d_soft = numeric_grad(lambda z: float(cross_entropy(z, y).value), o)[c]
    d_cal = numeric_grad(lambda z: float(calibrated_cross_entropy(z, y, gamma).value), o)[c]
    return d_soft - d_cal


def test_gradient_shrinkage_matches_finite_difference_gap(rng):
    assert gradient_shrinkage(np.zeros(2), np.array([1, 0]), 1, 1.0) == pytest.approx(
        _fd_gap(np.zeros(2), np.array([1.0, 0.0]), 1, 1.0), abs=1e-6
    )
    for _ in range(1000):
        n_cls = int(rng.choice([2, 5, 10]))
        o = rng.normal(scale=2, size=n_cls)
        y = np.eye(n_cls)[rng.integers(n_cls)]
        c = int(rng.choice(np.flatnonzero(y == 0)))
        gamma = 10.0 / n_cls
        closed = gradient_shrinkage(o, y, c, gamma)
        assert closed > 0
        e = np.zeros(n_cls)
        e[c] = 1e-5
        fd = (float(cross_entropy(o + e, y).value) - float(cross_entropy(o - e, y).value)) / 2e-5
        fd -= (
            float(calibrated_cross_entropy(o + e, y, gamma).value)
            - float(calibrated_cross_entropy(o - e, y, gamma).value)
        ) / 2e-5
        assert closed == pytest.approx(fd, abs=1e-6)


@given(logit_vectors, st.floats(1e-3, 1e3))
def test_gradient_shrinkage_positive(o, gamma):
    y = np.zeros(len(o))
    y[0] = 1
    for c in range(1, len(o)):
        assert gradient_shrinkage(o, y, c, gamma) > 0
