"""Gaussian-mixture truths for simulation studies and their exact curves.

A truth is a bivariate normal mixture for ``(u, v)``. Its direction
density and directional speed quantiles are obtained numerically by
integrating the mixture density along rays from the origin.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from importlib import resources

import numpy as np
from scipy import integrate, optimize

from .data import WindData, to_cartesian, to_polar  # noqa: F401  (re-exported)
from .errors import QuadratureError
from .metrics import DirectionGrid

FIXTURES = ("plains-unimodal", "plains-bimodal", "mountain-multimodal")
QUAD_EPSABS = 1e-11


@dataclass(frozen=True, eq=False)
class GaussianMixtureTruth:
    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray
    name: str = ""

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        m = np.asarray(self.means, dtype=float).reshape(-1, 2)
        c = np.asarray(self.covs, dtype=float).reshape(-1, 2, 2)
        if not (w.size == m.shape[0] == c.shape[0]) or w.size == 0:
            raise ValueError("weights, means and covs disagree on the component count")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be nonnegative and sum to one")
        for k, cov in enumerate(c):
            if not np.allclose(cov, cov.T, rtol=0, atol=1e-12):
                raise ValueError("covariance %d is not symmetric" % k)
            if np.min(np.linalg.eigvalsh(cov)) <= 1e-10:
                raise ValueError("covariance %d is not positive definite" % k)
        for name, val in (("weights", w / w.sum()), ("means", m), ("covs", c)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def n_components(self) -> int:
        return int(self.weights.size)

    def pdf(self, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        out = np.zeros(np.broadcast(u, v).shape)
        for w, m, c in zip(self.weights, self.means, self.covs):
            p = np.linalg.inv(c)
            du, dv = u - m[0], v - m[1]
            q = p[0, 0] * du * du + 2 * p[0, 1] * du * dv + p[1, 1] * dv * dv
            out = out + w * np.exp(-0.5 * q) / (2 * np.pi * math.sqrt(np.linalg.det(c)))
        return out

    def sample_uv(self, count: int, rng) -> np.ndarray:
        labels = rng.choice(self.n_components, size=count, p=self.weights)
        out = np.empty((count, 2))
        for k in range(self.n_components):
            idx = np.flatnonzero(labels == k)
            L = np.linalg.cholesky(self.covs[k])
            out[idx] = self.means[k] + rng.standard_normal((idx.size, 2)) @ L.T
        return out

    def radial_limit(self) -> float:
        """Upper integration limit for speed; Gaussian tails beyond it are negligible."""
        spread = max(float(np.max(np.linalg.eigvalsh(c))) for c in self.covs)
        return float(np.max(np.linalg.norm(self.means, axis=1)) + 10.0 * math.sqrt(spread))

    def scaled(self, c: float) -> "GaussianMixtureTruth":
        """Means times ``c``, covariances times ``c**2``."""
        return GaussianMixtureTruth(self.weights, self.means * c, self.covs * c * c, self.name)

    def to_dict(self) -> dict:
        return {
            "weights": [float(w) for w in self.weights],
            "means": [[float(x) for x in m] for m in self.means],
            "covs": [[[float(x) for x in row] for row in c] for c in self.covs],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict, name: str = "") -> "GaussianMixtureTruth":
        return cls(np.asarray(d["weights"]), np.asarray(d["means"]), np.asarray(d["covs"]), name)

    @classmethod
    def from_json(cls, text: str, name: str = "") -> "GaussianMixtureTruth":
        return cls.from_dict(json.loads(text), name)


def load_fixture(name: str) -> GaussianMixtureTruth:
    """Load a shipped truth (e.g. ``"plains-unimodal"`` or ``"plains-unimodal-future"``)."""
    text = resources.files("windcond.fixtures").joinpath(name + ".json").read_text()
    return GaussianMixtureTruth.from_json(text, name)


def load_truth(spec: str) -> GaussianMixtureTruth:
    """Fixture name or path to a truth JSON file."""
    if spec.endswith(".json"):
        with open(spec) as fh:
            return GaussianMixtureTruth.from_json(fh.read(), spec)
    return load_fixture(spec)


def truth_sample(truth: GaussianMixtureTruth, count: int, years: int = 10, seed=None,
                 first_year: int = 0) -> WindData:
    """Draw ``count`` observations with year labels in equal consecutive runs.

    When ``count`` is not divisible by ``years`` the remainder joins the
    last year.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    count = int(count)
    if count == 0:
        return WindData([], [], [])
    uv = truth.sample_uv(count, rng)
    r, phi = to_polar(uv[:, 0], uv[:, 1])
    per = max(count // years, 1)
    year = first_year + np.minimum(np.arange(count) // per, years - 1)
    return WindData(r, phi, year)


class _Ray:
    """Mixture density restricted to the ray at angle ``phi``.

    Along ``s * (sin phi, cos phi)`` each component contributes
    ``c_k exp(-(a_k s^2 - 2 b_k s + d_k) / 2)``.
    """

    def __init__(self, truth: GaussianMixtureTruth, phi: float):
        e = np.array([math.sin(phi), math.cos(phi)])
        self.terms = []
        for w, m, c in zip(truth.weights, truth.means, truth.covs):
            p = np.linalg.inv(c)
            a = float(e @ p @ e)
            b = float(e @ p @ m)
            d = float(m @ p @ m)
            const = float(w) / (2 * math.pi * math.sqrt(np.linalg.det(c)))
            self.terms.append((const, a, b, d))
        self.limit = truth.radial_limit()

    def integrand(self, s: float) -> float:
        total = 0.0
        for const, a, b, d in self.terms:
            total += const * math.exp(-0.5 * (a * s * s - 2.0 * b * s + d))
        return s * total

    def mass(self, upper: float) -> float:
        val, err, *rest = integrate.quad(
            self.integrand, 0.0, upper, epsabs=QUAD_EPSABS, epsrel=1e-12, limit=200, full_output=1
        )
        if len(rest) > 1 and err > 1e-9:
            raise QuadratureError("radial quadrature did not converge (error %.3g)" % err)
        return val


def truth_direction_density(truth: GaussianMixtureTruth, phi) -> np.ndarray | float:
    """``f(phi) = int_0^inf r f_uv(r sin phi, r cos phi) dr``."""
    phis = np.atleast_1d(np.asarray(phi, dtype=float))
    out = np.array([_Ray(truth, p).mass(truth.radial_limit()) for p in phis])
    return float(out[0]) if np.ndim(phi) == 0 else out


def _ray_quantiles(ray: _Ray, taus, xtol=1e-10):
    total = ray.mass(ray.limit)
    qs = []
    for tau in taus:
        if not 0 < tau < 1:
            raise ValueError("tau must lie strictly inside (0, 1)")
        target = tau * total
        q = optimize.brentq(lambda r: ray.mass(r) - target, 0.0, ray.limit, xtol=xtol, rtol=1e-14)
        qs.append(q)
    return total, qs


def truth_conditional_quantile(truth: GaussianMixtureTruth, phi, tau):
    """Speed quantile of ``R | Phi = phi`` by root-finding on the radial CDF."""
    phis = np.atleast_1d(np.asarray(phi, dtype=float))
    out = np.array([_ray_quantiles(_Ray(truth, p), [tau])[1][0] for p in phis])
    return float(out[0]) if np.ndim(phi) == 0 else out


def truth_conditional_cdf(truth: GaussianMixtureTruth, phi: float, r: float) -> float:
    ray = _Ray(truth, phi)
    return ray.mass(r) / ray.mass(ray.limit)


@dataclass(frozen=True)
class TruthCurves:
    grid: DirectionGrid
    density: np.ndarray
    quantiles: dict  # tau -> array over grid


_CURVE_CACHE: dict = {}


def truth_curves(truth: GaussianMixtureTruth, taus=(0.5, 0.75, 0.95),
                 grid: DirectionGrid = DirectionGrid()) -> TruthCurves:
    """Direction density and quantile curves on ``grid``; cached per truth."""
    taus = tuple(float(t) for t in taus)
    key = (truth.to_json(), grid.m)
    cached = _CURVE_CACHE.get(key)
    missing = [t for t in taus if cached is None or t not in cached.quantiles]
    if cached is not None and not missing:
        return TruthCurves(grid, cached.density, {t: cached.quantiles[t] for t in taus})
    dens = np.empty(grid.m)
    q = {t: np.empty(grid.m) for t in missing}
    for i, phi in enumerate(grid.angles):
        total, vals = _ray_quantiles(_Ray(truth, phi), missing)
        dens[i] = total
        for t, v in zip(missing, vals):
            q[t][i] = v
    if cached is not None:
        q.update(cached.quantiles)
    _CURVE_CACHE[key] = TruthCurves(grid, dens, q)
    return TruthCurves(grid, dens, {t: q[t] for t in taus})


def fit_gaussian_mixture(u, v, max_components: int = 9, seed: int = 0) -> GaussianMixtureTruth:
    """Bivariate normal mixture for ``(u, v)`` data with BIC-chosen order.

    Uses scikit-learn's EM with covariance regularization ``1e-6``.
    """
    from sklearn.mixture import GaussianMixture

    X = np.column_stack([np.asarray(u, float), np.asarray(v, float)])
    best, best_bic = None, np.inf
    for k in range(1, max_components + 1):
        if X.shape[0] < 10 * k:
            break
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            gm = GaussianMixture(k, covariance_type="full", reg_covar=1e-6, random_state=seed).fit(X)
        bic = gm.bic(X)
        if bic < best_bic:
            best, best_bic = gm, bic
    covs = np.array([(c + c.T) / 2 for c in best.covariances_])
    return GaussianMixtureTruth(best.weights_, best.means_, covs, "fitted")
