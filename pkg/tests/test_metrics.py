import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from windcond.errors import GridMismatchError, ZeroTruthError
from windcond.metrics import (
    CurveSample,
    DirectionGrid,
    mse_curve,
    signed_relative_error,
    weighted_mean,
    wimre,
    wimse,
)

pos = st.floats(0.1, 100.0)


def curves(m):
    return arrays(float, m, elements=pos)


def test_grid():
    g = DirectionGrid()
    assert g.m == 629 and len(g) == 629
    a = g.angles
    assert a[0] == 0.0 and a[-1] < 2 * math.pi
    assert np.all(np.diff(a) > 0)
    np.testing.assert_allclose(np.diff(a), 2 * math.pi / 629, atol=1e-12)


def test_curve_sample_length():
    with pytest.raises(GridMismatchError):
        CurveSample(DirectionGrid(5), np.ones(4))


def test_wimre_examples():
    g = np.array([2.0, 5.0])
    assert wimre(g, g, [1, 1]) == 0.0
    assert wimre(2 * g, g, [0.3, 7]) == pytest.approx(1.0, abs=1e-15)
    assert wimre(g * [1.1, 1.2], g, [1, 3]) == pytest.approx(0.175, abs=1e-15)


def test_wimre_zero_truth_names_angle():
    with pytest.raises(ZeroTruthError) as info:
        wimre(np.ones(4), [1.0, 1.0, 0.0, 1.0], np.ones(4))
    assert info.value.phi == pytest.approx(math.pi)
    assert isinstance(info.value, ZeroDivisionError)
    # zero weight masks a zero truth
    assert wimre(np.ones(4), [1.0, 1.0, 0.0, 1.0], [1, 1, 0, 1]) == 0.0


def test_grid_mismatch():
    with pytest.raises(GridMismatchError):
        wimre(np.ones(4), np.ones(5), np.ones(4))
    with pytest.raises(GridMismatchError):
        wimre(CurveSample(DirectionGrid(4), np.ones(4)), np.ones(5), np.ones(4))
    with pytest.raises(GridMismatchError):
        mse_curve([np.ones(3)], np.ones(4))


@given(st.data())
@settings(max_examples=60)
def test_wimre_rescaling_invariance(data):
    m = data.draw(st.integers(1, 50))
    est, tru, f = data.draw(curves(m)), data.draw(curves(m)), data.draw(curves(m))
    c, d = data.draw(pos), data.draw(pos)
    base = wimre(est, tru, f)
    assert abs(wimre(c * est, c * tru, f) - base) <= 1e-12 * max(1.0, base)
    assert abs(wimre(est, tru, d * f) - base) <= 1e-12 * max(1.0, base)


def test_wimre_grid_refinement_stable():
    coarse, fine = DirectionGrid(629), DirectionGrid(1258)

    def score(g):
        phi = g.angles
        truth = 8 + 2 * np.sin(phi)
        est = truth * (1 + 0.05 * np.cos(2 * phi + 0.3))
        f = np.exp(np.cos(phi - 1)) / (2 * np.pi * 1.2660658777520082)
        return wimre(est, truth, f)

    assert abs(score(fine) / score(coarse) - 1) < 0.005


def test_signed_and_weighted_mean():
    g = np.array([2.0, 4.0])
    assert signed_relative_error(g * [0.9, 1.3], g, [1, 1]) == pytest.approx(0.1)
    assert weighted_mean([1.0, 3.0], [1, 3]) == pytest.approx(2.5)


def test_mse_examples():
    t = np.linspace(1, 2, 7)
    curve, avg = mse_curve([t, t], t)
    assert avg == 0 and np.all(curve.values == 0)
    curve, avg = mse_curve([t + 1], t)
    np.testing.assert_allclose(curve.values, 1.0)
    curve, _ = mse_curve([t + 0.3, t - 0.3], t)
    np.testing.assert_allclose(curve.values, 0.09, rtol=1e-12)


def test_wimse_examples():
    t = np.array([1.0, 1.0])
    assert wimse([t, t], t, [1, 1]) == 0
    assert wimse([t + [2.0, 0.0]], t, [1, 1]) == pytest.approx(2.0)
    rng = np.random.default_rng(0)
    reps = [rng.normal(size=20) for _ in range(5)]
    truth = np.zeros(20)
    assert wimse(reps, truth, np.full(20, 0.7)) == pytest.approx(mse_curve(reps, truth)[1], rel=1e-12)


@given(st.data())
@settings(max_examples=40)
def test_wimse_nonnegative_and_zero_iff_exact(data):
    m = data.draw(st.integers(1, 20))
    truth = data.draw(curves(m))
    f = data.draw(curves(m))
    reps = [data.draw(curves(m)) for _ in range(data.draw(st.integers(1, 4)))]
    val = wimse(reps, truth, f)
    assert val >= 0
    assert (val == 0) == all(np.array_equal(r, truth) for r in reps)
    assert mse_curve(reps, truth)[1] >= 0
