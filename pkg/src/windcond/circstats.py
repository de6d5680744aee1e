"""Circular primitives and the von Mises mixture model for wind direction.

All angles are radians. Public functions accept scalars or array-likes and
return numpy arrays (or floats for scalar input where noted).
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import special

from .errors import ComponentCollapseError, InsufficientDataError

TWO_PI = 2.0 * np.pi
KAPPA_MAX = 1e4
_LOG_2PI = math.log(TWO_PI)

# switch from power series to the large-argument expansion
_ASYMPTOTIC_FROM = 30.0


def normalize_angle(theta):
    """Map angle(s) into ``[0, 2*pi)``.

    Raises
    ------
    ValueError
        If any input is NaN or infinite.
    """
    arr = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("angle must be finite")
    out = np.mod(arr, TWO_PI)
    # np.mod can round tiny negatives up to exactly 2*pi
    out = np.where(out >= TWO_PI, 0.0, out)
    if out.ndim == 0:
        return float(out)
    return out


def _bessel_scaled(nu: int, x: np.ndarray) -> np.ndarray:
    """exp(-x) * I_nu(x) for nu in {0, 1} and x >= 0."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < _ASYMPTOTIC_FROM

    xs = x[small]
    if xs.size:
        # sum_m (x/2)^(2m+nu) / (m! (m+nu)!)
        q = 0.25 * xs * xs
        term = np.ones_like(xs) if nu == 0 else 0.5 * xs
        total = term.copy()
        m = 0
        while True:
            m += 1
            term = term * q / (m * (m + nu))
            total += term
            if np.all(term <= 1e-17 * total):
                break
        out[small] = total * np.exp(-xs)

    xl = x[~small]
    if xl.size:
        mu = 4.0 * nu * nu
        term = np.ones_like(xl)
        total = term.copy()
        for k in range(1, 40):
            term = -term * (mu - (2 * k - 1) ** 2) / (8.0 * k * xl)
            total += term
        out[~small] = total / np.sqrt(TWO_PI * xl)
    return out


def bessel_i0e(x):
    """Exponentially scaled modified Bessel function ``exp(-|x|) I0(x)``."""
    ax = np.abs(np.asarray(x, dtype=float))
    out = _bessel_scaled(0, np.atleast_1d(ax)).reshape(ax.shape)
    return float(out) if out.ndim == 0 else out


def bessel_i1e(x):
    """Exponentially scaled ``exp(-|x|) I1(x)``; I1 is odd."""
    arr = np.asarray(x, dtype=float)
    out = _bessel_scaled(1, np.atleast_1d(np.abs(arr))).reshape(arr.shape)
    out = np.sign(arr) * out
    return float(out) if out.ndim == 0 else out


def bessel_i0(x):
    """Modified Bessel function of the first kind, order zero.

    Power series below x = 30, large-argument expansion above; relative
    accuracy is better than 1e-13 over the representable range.

    Raises
    ------
    OverflowError
        When ``I0(x)`` exceeds the largest double (|x| > ~713.9).
    """
    ax = np.abs(np.asarray(x, dtype=float))
    with np.errstate(over="ignore"):
        # split exp to keep intermediate finite as long as the result is
        half = np.exp(0.5 * ax)
        out = (bessel_i0e(ax) * half) * half
    if np.any(~np.isfinite(out)):
        raise OverflowError("I0(x) not representable for |x| = %g" % float(np.max(ax)))
    return float(out) if np.ndim(out) == 0 else out


def log_bessel_i0(x):
    ax = np.abs(np.asarray(x, dtype=float))
    return np.log(bessel_i0e(ax)) + ax


def mean_resultant_ratio(kappa):
    """A(kappa) = I1(kappa) / I0(kappa)."""
    k = np.asarray(kappa, dtype=float)
    return bessel_i1e(k) / bessel_i0e(k)


def _fast_ratio(k):
    # compiled Bessel ratio for the EM inner loop
    return special.i1e(k) / special.i0e(k)


def inverse_mean_resultant_ratio(rbar, kappa_max: float = KAPPA_MAX, tol: float = 1e-12):
    """Solve ``A(kappa) = rbar`` by Newton iterations (vectorized).

    Starts from the Banerjee et al. approximation
    ``rbar (2 - rbar^2) / (1 - rbar^2)`` and caps the result at ``kappa_max``.
    """
    r = np.asarray(rbar, dtype=float)
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    out = np.zeros_like(r)
    capped = r >= _fast_ratio(kappa_max)
    out[capped] = kappa_max
    todo = (r > 1e-12) & ~capped
    rr = r[todo]
    k = np.clip(rr * (2.0 - rr * rr) / (1.0 - rr * rr), 1e-8, kappa_max)
    for _ in range(50):
        a = _fast_ratio(k)
        err = a - rr
        if np.all(np.abs(err) < tol):
            break
        deriv = 1.0 - a / k - a * a
        k_new = k - err / deriv
        k_new = np.where(k_new <= 0, 0.5 * k, k_new)
        k = np.minimum(k_new, kappa_max)
    out[todo] = k
    return float(out[0]) if scalar else out


def vm_pdf(phi, mu, kappa):
    """Von Mises density ``exp(kappa cos(phi - mu)) / (2 pi I0(kappa))``."""
    kappa = np.asarray(kappa, dtype=float)
    if np.any(kappa < 0):
        raise ValueError("kappa must be nonnegative")
    phi = np.asarray(phi, dtype=float)
    out = np.exp(kappa * (np.cos(phi - mu) - 1.0)) / (TWO_PI * bessel_i0e(kappa))
    return float(out) if out.ndim == 0 else out


def vm_logpdf(phi, mu, kappa):
    phi = np.asarray(phi, dtype=float)
    return kappa * (np.cos(phi - mu) - 1.0) - _LOG_2PI - np.log(bessel_i0e(kappa))


def circular_mean(angles, weights=None) -> float:
    a = np.asarray(angles, dtype=float)
    w = np.ones_like(a) if weights is None else np.asarray(weights, dtype=float)
    return normalize_angle(math.atan2(np.dot(w, np.sin(a)), np.dot(w, np.cos(a))))


def arc_distance(a, b):
    """Shortest angular distance between ``a`` and ``b``, in ``[0, pi]``."""
    d = np.abs(np.mod(a, TWO_PI) - np.mod(b, TWO_PI))
    return np.pi - np.abs(np.pi - d)


def circular_median(angles) -> float:
    """Data point minimizing the summed arc distance to all angles.

    Ties go to the smallest angle.
    """
    a = np.sort(normalize_angle(np.atleast_1d(np.asarray(angles, dtype=float))))
    if a.size == 0:
        raise InsufficientDataError("circular median of an empty sample")
    if a.size == 1:
        return float(a[0])
    cost = np.empty(a.size)
    chunk = max(1, 4_000_000 // a.size)
    for start in range(0, a.size, chunk):
        cand = a[start:start + chunk]
        cost[start:start + chunk] = arc_distance(cand[:, None], a[None, :]).sum(axis=1)
    # costs equal up to rounding count as ties
    cmin = cost.min()
    tied = cost <= cmin + 1e-12 * max(cmin, 1.0)
    return float(a[int(np.argmax(tied))])


@dataclass(frozen=True, eq=False)
class VonMisesMixture:
    """Finite mixture of von Mises densities on the circle.

    Diagnostics from fitting (``loglik``, ``n_obs``, ``loglik_trace``) are
    carried along but do not take part in equality.
    """

    weights: np.ndarray
    mus: np.ndarray
    kappas: np.ndarray
    loglik: float = field(default=float("nan"), compare=False)
    n_obs: int = field(default=0, compare=False)
    n_iter: int = field(default=0, compare=False)
    converged: bool = field(default=True, compare=False)
    loglik_trace: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).ravel()
        mu = normalize_angle(np.array(self.mus, dtype=float).ravel())
        k = np.array(self.kappas, dtype=float).ravel()
        mu = np.atleast_1d(mu)
        if not (w.size == mu.size == k.size) or w.size == 0:
            raise ValueError("weights, mus and kappas must have the same nonzero length")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be nonnegative and sum to one")
        if np.any(k < 0):
            raise ValueError("kappas must be nonnegative")
        w = w / w.sum()
        for name, val in (("weights", w), ("mus", mu), ("kappas", k)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    def __eq__(self, other):
        if not isinstance(other, VonMisesMixture):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, f), getattr(other, f)) for f in ("weights", "mus", "kappas")
        )

    __hash__ = None

    @property
    def n_components(self) -> int:
        return int(self.weights.size)

    @property
    def n_params(self) -> int:
        return 3 * self.n_components - 1

    def pdf(self, phi):
        phi = np.asarray(phi, dtype=float)
        dens = np.zeros(phi.shape)
        for w, mu, k in zip(self.weights, self.mus, self.kappas):
            dens = dens + w * vm_pdf(phi, mu, k)
        return dens

    def component_logpdf(self, phi) -> np.ndarray:
        """(n, n_components) array of log(w_j f_j(phi_i))."""
        phi = np.asarray(phi, dtype=float).ravel()
        with np.errstate(divide="ignore"):
            logw = np.log(self.weights)
        return logw[None, :] + vm_logpdf(phi[:, None], self.mus[None, :], self.kappas[None, :])

    def loglikelihood(self, phi) -> float:
        lp = self.component_logpdf(phi)
        return float(_logsumexp_rows(lp).sum())

    def bic(self, phi) -> float:
        n = np.asarray(phi).size
        return -2.0 * self.loglikelihood(phi) + self.n_params * math.log(n)

    def sample(self, count: int, seed=None) -> np.ndarray:
        return mixture_sample(self, count, seed)

    def to_dict(self) -> dict:
        return {
            "weights": [float(x) for x in self.weights],
            "mus_rad": [float(x) for x in self.mus],
            "kappas": [float(x) for x in self.kappas],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict, unit: str | None = None) -> "VonMisesMixture":
        if "mus_rad" in d:
            mus = np.asarray(d["mus_rad"], dtype=float)
        elif "mus_deg" in d or "mus" in d:
            key = "mus_deg" if "mus_deg" in d else "mus"
            if key == "mus" and unit is None:
                raise ValueError("unit flag ('rad' or 'deg') required for 'mus'")
            mus = np.asarray(d[key], dtype=float)
            if key == "mus_deg" or unit == "deg":
                mus = np.deg2rad(mus)
        else:
            raise ValueError("model JSON lacks mean directions")
        return cls(np.asarray(d["weights"], float), mus, np.asarray(d["kappas"], float))

    @classmethod
    def from_json(cls, text: str, unit: str | None = None) -> "VonMisesMixture":
        return cls.from_dict(json.loads(text), unit=unit)


def mixture_pdf(phi, model: VonMisesMixture):
    return model.pdf(phi)


def _logsumexp_rows(lp: np.ndarray) -> np.ndarray:
    m = lp.max(axis=1)
    return m + np.log(np.exp(lp - m[:, None]).sum(axis=1))


def _kmeanspp_init(x: np.ndarray, k: int, rng: np.random.Generator):
    n = x.size
    centers = [x[rng.integers(n)]]
    for _ in range(1, k):
        d = np.min(1.0 - np.cos(x[:, None] - np.asarray(centers)[None, :]), axis=1)
        total = d.sum()
        if total <= 0:
            centers.append(x[rng.integers(n)])
        else:
            centers.append(x[rng.choice(n, p=d / total)])
    centers = np.asarray(centers)
    labels = np.argmax(np.cos(x[:, None] - centers[None, :]), axis=1)
    weights = np.empty(k)
    mus = np.empty(k)
    kappas = np.empty(k)
    for j in range(k):
        members = x[labels == j]
        weights[j] = max(members.size, 1)
        if members.size == 0:
            mus[j], kappas[j] = centers[j], 1.0
            continue
        c, s = np.cos(members).mean(), np.sin(members).mean()
        mus[j] = math.atan2(s, c)
        kappas[j] = inverse_mean_resultant_ratio(math.hypot(c, s))
    return weights / weights.sum(), mus, kappas


def em_fit(
    directions,
    n_components: int,
    seed: int = 0,
    *,
    tol: float = 1e-8,
    max_iter: int = 500,
    n_init: int = 1,
    max_restarts: int = 10,
) -> VonMisesMixture:
    """Fit a von Mises mixture by expectation maximization.

    Parameters
    ----------
    directions : array_like
        Wind directions in radians.
    n_components : int
        Number of mixture components.
    seed : int
        Seeds the k-means++ style initialization and collapse restarts.
    tol : float
        Stop once the log-likelihood gain of an iteration is below ``tol``.
    max_iter : int
        Iteration cap.
    n_init : int
        Independent initializations; the highest likelihood fit is kept.

    Returns
    -------
    VonMisesMixture
        With ``loglik``, ``n_iter`` and the per-iteration ``loglik_trace``.
    """
    x = np.sort(normalize_angle(np.atleast_1d(np.asarray(directions, dtype=float))))
    if x.size == 0:
        raise InsufficientDataError("no directions to fit")
    if n_components < 1:
        raise ValueError("n_components must be positive")
    if x.size < 10 * n_components:
        raise InsufficientDataError(
            "need at least %d directions for %d components, got %d"
            % (10 * n_components, n_components, x.size)
        )
    ss = np.random.SeedSequence(seed)
    best = None
    for child in ss.spawn(n_init):
        fit = _em_single(x, n_components, np.random.default_rng(child), tol, max_iter, max_restarts)
        if best is None or fit.loglik > best.loglik:
            best = fit
    return best


def _em_single(x, k, rng, tol, max_iter, max_restarts):
    n = x.size
    cos_x, sin_x = np.cos(x), np.sin(x)
    weights, mus, kappas = _kmeanspp_init(x, k, rng)
    trace = []
    restarts = 0
    prev = -np.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        lp = np.log(weights)[None, :] + kappas[None, :] * (
            cos_x[:, None] * np.cos(mus)[None, :] + sin_x[:, None] * np.sin(mus)[None, :] - 1.0
        ) - _LOG_2PI - np.log(special.i0e(kappas))[None, :]
        norm = _logsumexp_rows(lp)
        ll = float(norm.sum())
        resp = np.exp(lp - norm[:, None])
        nk = resp.sum(axis=0)

        collapsed = np.flatnonzero(nk < 1e-8)
        if collapsed.size:
            restarts += collapsed.size
            if restarts > max_restarts:
                raise ComponentCollapseError(
                    "mixture component collapsed more than %d times" % max_restarts
                )
            for j in collapsed:
                mus[j] = x[rng.integers(n)]
                kappas[j] = 1.0
                weights[j] = 1.0 / k
            weights = weights / weights.sum()
            prev = -np.inf
            trace.append(ll)
            continue

        trace.append(ll)
        if ll - prev < tol:
            converged = True
            break
        prev = ll

        weights = nk / n
        c = resp.T @ cos_x
        s = resp.T @ sin_x
        mus = np.arctan2(s, c)
        rbar = np.minimum(np.hypot(c, s) / nk, 1.0)
        kappas = inverse_mean_resultant_ratio(rbar)

    model = VonMisesMixture(weights, mus, kappas)
    if not converged:
        # the cap was hit right after an M-step; score the returned parameters
        trace.append(model.loglikelihood(x))
    return VonMisesMixture(
        model.weights,
        model.mus,
        model.kappas,
        loglik=trace[-1],
        n_obs=n,
        n_iter=it,
        converged=converged,
        loglik_trace=tuple(trace),
    )


def select_components(
    directions,
    candidate_counts: Iterable[int] = range(1, 7),
    seed: int = 0,
    **em_kwargs,
) -> VonMisesMixture:
    """Choose the number of components by BIC.

    ``BIC = -2 loglik + (3 N - 1) ln n``; ties favour fewer components.
    Candidates whose fit fails (too few points, repeated collapse) are
    skipped with a warning; the error is raised only if every candidate
    fails.
    """
    x = np.sort(normalize_angle(np.atleast_1d(np.asarray(directions, dtype=float))))
    counts = sorted(set(int(c) for c in candidate_counts))
    if not counts:
        raise ValueError("candidate_counts is empty")
    best, best_bic, first_err = None, np.inf, None
    for k in counts:
        try:
            fit = em_fit(x, k, seed=seed, **em_kwargs)
        except (ComponentCollapseError, InsufficientDataError) as err:
            if len(counts) == 1:
                raise
            first_err = first_err or err
            warnings.warn("skipping %d-component candidate: %s" % (k, err), RuntimeWarning)
            continue
        bic = -2.0 * fit.loglik + fit.n_params * math.log(x.size)
        if bic < best_bic:
            best, best_bic = fit, bic
    if best is None:
        raise first_err
    return best


def _vonmises_best_fisher(mu: float, kappa: float, count: int, rng) -> np.ndarray:
    if count == 0:
        return np.empty(0)
    if kappa < 1e-8:
        return rng.uniform(0.0, TWO_PI, count)
    tau = 1.0 + math.sqrt(1.0 + 4.0 * kappa * kappa)
    rho = (tau - math.sqrt(2.0 * tau)) / (2.0 * kappa)
    r = (1.0 + rho * rho) / (2.0 * rho)
    out = np.empty(count)
    filled = 0
    while filled < count:
        m = max(16, int(1.3 * (count - filled)))
        u1, u2, u3 = rng.random(m), rng.random(m), rng.random(m)
        z = np.cos(np.pi * u1)
        f = (1.0 + r * z) / (r + z)
        c = kappa * (r - f)
        with np.errstate(divide="ignore", invalid="ignore"):
            ok = (c * (2.0 - c) - u2 > 0) | (np.log(c / u2) + 1.0 - c >= 0)
        theta = np.sign(u3[ok] - 0.5) * np.arccos(np.clip(f[ok], -1.0, 1.0))
        take = min(theta.size, count - filled)
        out[filled:filled + take] = theta[:take]
        filled += take
    return normalize_angle(out + mu) if count else out


def mixture_sample(model: VonMisesMixture, count: int, seed=None) -> np.ndarray:
    """Draw ``count`` i.i.d. directions from the mixture.

    Components are picked by weight; angles come from Best and Fisher's
    rejection sampler.
    """
    count = int(count)
    if count == 0:
        return np.empty(0)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    labels = rng.choice(model.n_components, size=count, p=model.weights)
    out = np.empty(count)
    for j in range(model.n_components):
        idx = np.flatnonzero(labels == j)
        out[idx] = _vonmises_best_fisher(model.mus[j], model.kappas[j], idx.size, rng)
    return np.atleast_1d(normalize_angle(out))
