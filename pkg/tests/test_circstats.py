import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special, stats

from windcond.circstats import (
    TWO_PI,
    VonMisesMixture,
    bessel_i0,
    bessel_i0e,
    bessel_i1e,
    circular_mean,
    circular_median,
    em_fit,
    inverse_mean_resultant_ratio,
    mean_resultant_ratio,
    mixture_pdf,
    mixture_sample,
    normalize_angle,
    select_components,
    vm_pdf,
)
from windcond.errors import InsufficientDataError

angles = st.floats(-50.0, 50.0, allow_nan=False)
kappas = st.floats(0.0, 200.0)


def i0_series(x):
    # independent oracle: sum (x/2)^(2m) / (m!)^2 in exact-ish float, stopped at machine precision
    total, term, m = 1.0, 1.0, 0
    while True:
        m += 1
        term *= (x / 2) ** 2 / (m * m)
        total += term
        if term < 1e-17 * total:
            return total


# ---------------------------------------------------------------- angles

@pytest.mark.parametrize("theta, expected", [(0.0, 0.0), (TWO_PI, 0.0), (-math.pi / 2, 3 * math.pi / 2)])
def test_normalize_examples(theta, expected):
    assert normalize_angle(theta) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_normalize_rejects_nonfinite(bad):
    with pytest.raises(ValueError):
        normalize_angle(bad)


@given(angles, st.integers(-20, 20))
def test_normalize_range_and_periodicity(theta, k):
    a = normalize_angle(theta)
    assert 0.0 <= a < TWO_PI
    b = normalize_angle(theta + TWO_PI * k)
    # congruent mod 2 pi up to the rounding of theta + 2 pi k
    assert min(abs(a - b), TWO_PI - abs(a - b)) < 1e-12


# ---------------------------------------------------------------- Bessel

@pytest.mark.parametrize("x, expected", [(0.0, 1.0), (1.0, 1.2660658778), (2.0, 2.2795853023)])
def test_bessel_i0_examples(x, expected):
    assert bessel_i0(x) == pytest.approx(expected, rel=1e-10)
    assert bessel_i0(x) == pytest.approx(i0_series(x), rel=1e-10)


@given(st.floats(0.0, 700.0))
def test_bessel_i0_matches_series_and_scipy(x):
    if x < 40:
        assert bessel_i0(x) == pytest.approx(i0_series(x), rel=1e-10)
    assert bessel_i0e(x) == pytest.approx(special.i0e(x), rel=1e-10)
    assert bessel_i1e(x) == pytest.approx(special.i1e(x), rel=1e-10, abs=1e-300)


def test_bessel_i0_even_and_overflow():
    assert bessel_i0(-2.0) == bessel_i0(2.0)
    with pytest.raises(OverflowError):
        bessel_i0(1000.0)


@given(st.floats(1e-6, 0.999))
def test_kappa_inversion_roundtrip(r):
    k = inverse_mean_resultant_ratio(r)
    if k < 1e4:
        assert mean_resultant_ratio(k) == pytest.approx(r, abs=1e-10)


def test_kappa_inversion_limits():
    assert inverse_mean_resultant_ratio(0.0) == 0.0
    assert inverse_mean_resultant_ratio(1.0) == 1e4


# ---------------------------------------------------------------- densities

def test_vm_pdf_examples():
    assert vm_pdf(1.0, 0.3, 0.0) == pytest.approx(1 / (2 * math.pi), rel=1e-12)
    assert vm_pdf(0.0, 0.0, 1.0) == pytest.approx(math.e / (2 * math.pi * i0_series(1.0)), rel=1e-12)
    # the quoted 0.3417107 is rounded; the exact value is 0.34171049
    assert vm_pdf(0.0, 0.0, 1.0) == pytest.approx(0.3417107, abs=3e-7)


@given(st.floats(0, TWO_PI), kappas)
@settings(max_examples=30)
def test_vm_pdf_normalizes(mu, kappa):
    # trapezoid on a periodic integrand is spectrally accurate
    phi = np.linspace(0, TWO_PI, 4096, endpoint=False)
    assert vm_pdf(phi, mu, kappa).sum() * TWO_PI / phi.size == pytest.approx(1.0, abs=1e-8)


@given(st.floats(0, TWO_PI), st.floats(0, TWO_PI), kappas)
@settings(max_examples=100)
def test_vm_pdf_reflection_symmetry(phi, mu, kappa):
    a = vm_pdf(phi, mu, kappa)
    b = vm_pdf(2 * mu - phi, mu, kappa)
    assert abs(a - b) <= 1e-12 * max(1.0, a)


@given(st.floats(0, TWO_PI), st.floats(0.01, 50))
def test_vm_pdf_peak_at_mu(mu, kappa):
    others = normalize_angle(mu + np.linspace(0.01, TWO_PI - 0.01, 50))
    assert np.all(vm_pdf(others, mu, kappa) < vm_pdf(mu, mu, kappa))


def test_vm_pdf_matches_scipy():
    phi = np.linspace(0, TWO_PI, 50)
    for kappa in (0.5, 3.0, 40.0):
        ref = stats.vonmises.pdf(phi, kappa, loc=1.0)
        np.testing.assert_allclose(vm_pdf(phi, 1.0, kappa), ref, rtol=1e-10)


@st.composite
def mixtures(draw):
    k = draw(st.integers(1, 5))
    w = np.array(draw(st.lists(st.floats(0.01, 1.0), min_size=k, max_size=k)))
    mus = draw(st.lists(st.floats(0, TWO_PI), min_size=k, max_size=k))
    ks = draw(st.lists(st.floats(0, 100), min_size=k, max_size=k))
    return VonMisesMixture(w / w.sum(), mus, ks)


@given(mixtures())
@settings(max_examples=50)
def test_mixture_normalizes_and_weights_sum(model):
    phi = np.linspace(0, TWO_PI, 4096, endpoint=False)
    assert mixture_pdf(phi, model).sum() * TWO_PI / phi.size == pytest.approx(1.0, abs=1e-8)
    assert model.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all((model.mus >= 0) & (model.mus < TWO_PI))


def test_mixture_examples():
    one = VonMisesMixture([1.0], [2.0], [3.0])
    phi = np.linspace(0, TWO_PI, 17)
    np.testing.assert_array_equal(one.pdf(phi), vm_pdf(phi, 2.0, 3.0))
    flat = VonMisesMixture([0.5, 0.5], [0.0, 1.0], [0.0, 0.0])
    np.testing.assert_allclose(flat.pdf(phi), 1 / (2 * math.pi), rtol=1e-14)
    val, _ = integrate.quad(lambda p: float(one.pdf(p)), 0, TWO_PI, epsabs=1e-12)
    assert val == pytest.approx(1.0, abs=1e-8)


def test_mixture_json_roundtrip_and_degrees():
    m = VonMisesMixture([0.25, 0.75], [0.5, 4.0], [2.0, 7.5])
    back = VonMisesMixture.from_json(m.to_json())
    assert back == m
    assert set(m.to_dict()) == {"weights", "mus_rad", "kappas"}
    deg = VonMisesMixture.from_dict({"weights": [1.0], "mus_deg": [90.0], "kappas": [1.0]})
    assert deg.mus[0] == pytest.approx(math.pi / 2)
    with pytest.raises(ValueError):
        VonMisesMixture.from_dict({"weights": [1.0], "mus": [90.0], "kappas": [1.0]})
    assert VonMisesMixture.from_dict({"weights": [1.0], "mus": [90.0], "kappas": [1.0]}, unit="deg") == deg


@pytest.mark.parametrize("bad", [
    dict(weights=[0.5, 0.4], mus=[0, 1], kappas=[1, 1]),
    dict(weights=[1.0], mus=[0], kappas=[-1]),
    dict(weights=[1.2, -0.2], mus=[0, 1], kappas=[1, 1]),
])
def test_mixture_rejects_invalid(bad):
    with pytest.raises(ValueError):
        VonMisesMixture(**bad)


# ---------------------------------------------------------------- medians

@pytest.mark.parametrize("data, expected", [
    ([0.1, 0.2, 0.3], 0.2),
    ([TWO_PI - 0.1, 0.0, 0.1], 0.0),
    ([1.234], 1.234),
])
def test_circular_median_examples(data, expected):
    assert circular_median(data) == pytest.approx(expected, abs=1e-15)


def test_circular_median_tie_goes_to_smallest():
    assert circular_median([1.0, 2.0]) == 1.0


def test_circular_median_empty():
    with pytest.raises(InsufficientDataError):
        circular_median([])


@given(st.lists(st.floats(0, TWO_PI - 1e-9), min_size=1, max_size=40), st.floats(-10, 10))
@settings(max_examples=50)
def test_circular_median_rotation_equivariant(data, shift):
    # the summed arc distance is rotation invariant; compare costs to avoid tie flips
    data = np.array(data)
    m0 = circular_median(data)
    m1 = circular_median(normalize_angle(data + shift))

    def cost(m, d):
        diff = np.abs(normalize_angle(d - m))
        return np.minimum(diff, TWO_PI - diff).sum()

    assert cost(m1, normalize_angle(data + shift)) == pytest.approx(cost(m0, data), abs=1e-9)


# ---------------------------------------------------------------- sampling

def test_sample_uniform_ks():
    x = mixture_sample(VonMisesMixture([1.0], [0.0], [0.0]), 10_000, seed=3)
    assert stats.kstest(x / TWO_PI, "uniform").statistic < 0.02


def test_sample_concentrated_mean():
    x = mixture_sample(VonMisesMixture([1.0], [1.0], [50.0]), 10_000, seed=4)
    assert abs(circular_mean(x) - 1.0) < 0.05


@pytest.mark.parametrize("kappa", [0.5, 4.0])
def test_sample_matches_scipy_vonmises(kappa):
    x = mixture_sample(VonMisesMixture([1.0], [math.pi], [kappa]), 20_000, seed=5)
    cdf = lambda t: stats.vonmises.cdf(t, kappa, loc=math.pi)  # noqa: E731
    # compare on (-pi + mu, pi + mu] = (0, 2 pi]
    assert stats.kstest(x, lambda t: cdf(t) - cdf(0.0)).pvalue > 1e-3


def test_sample_empty_and_deterministic():
    m = VonMisesMixture([0.3, 0.7], [1.0, 4.0], [2.0, 9.0])
    assert mixture_sample(m, 0, 1).size == 0
    np.testing.assert_array_equal(mixture_sample(m, 500, 9), mixture_sample(m, 500, 9))


# ---------------------------------------------------------------- EM

def test_em_recovers_single_vm():
    x = stats.vonmises.rvs(2.0, loc=math.pi, size=5000, random_state=11)
    fit = em_fit(x, 1, seed=0)
    assert abs(fit.mus[0] - math.pi) < 0.1
    assert abs(fit.kappas[0] - 2.0) < 0.2


def test_em_uniform_limit():
    x = np.random.default_rng(12).uniform(0, TWO_PI, 5000)
    assert em_fit(x, 1, seed=0).kappas[0] < 0.1


def test_em_monotone_loglik_and_weights():
    truth = VonMisesMixture([0.4, 0.35, 0.25], [0.5, 2.5, 4.5], [6.0, 3.0, 10.0])
    x = truth.sample(3000, 2)
    for k in (1, 2, 3, 4):
        fit = em_fit(x, k, seed=k)
        trace = np.array(fit.loglik_trace)
        assert np.all(np.diff(trace) >= -1e-9 * np.abs(trace[1:]))
        assert fit.weights.sum() == pytest.approx(1.0, abs=1e-12)
        assert fit.loglik == pytest.approx(fit.loglikelihood(x), rel=1e-9)


def test_em_is_deterministic_and_order_invariant():
    x = VonMisesMixture([0.5, 0.5], [1.0, 4.0], [5.0, 5.0]).sample(800, 3)
    a = em_fit(x, 2, seed=7)
    b = em_fit(x[::-1], 2, seed=7)
    assert a == b


def test_em_errors():
    with pytest.raises(InsufficientDataError):
        em_fit([], 1)
    with pytest.raises(InsufficientDataError):
        em_fit(np.linspace(0, 1, 15), 2)


def _bic_choice(model, trials, n, candidates):
    picks = []
    for seed in range(trials):
        x = model.sample(n, seed)
        picks.append(select_components(x, candidates, seed=seed).n_components)
    return np.array(picks)


def test_bic_single_vm_selects_one():
    picks = _bic_choice(VonMisesMixture([1.0], [2.0], [3.0]), 100, 500, range(1, 5))
    assert np.mean(picks == 1) >= 0.9


def test_bic_two_separated_components():
    picks = _bic_choice(VonMisesMixture([0.5, 0.5], [0.0, math.pi], [8.0, 8.0]), 100, 500, range(1, 5))
    assert np.mean(picks == 2) >= 0.9


def test_bic_singleton_range_and_permutation_invariance():
    model = VonMisesMixture([0.6, 0.4], [1.0, 3.5], [4.0, 2.0])
    x = model.sample(600, 21)
    assert select_components(x, [3], seed=1).n_components == 3
    perm = np.random.default_rng(0).permutation(x.size)
    assert select_components(x, range(1, 4), seed=1) == select_components(x[perm], range(1, 4), seed=1)


def test_bic_formula():
    x = VonMisesMixture([1.0], [2.0], [3.0]).sample(400, 1)
    fit = em_fit(x, 2, seed=0)
    assert fit.bic(x) == pytest.approx(-2 * fit.loglikelihood(x) + 5 * math.log(400), rel=1e-12)
