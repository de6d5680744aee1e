"""Binned Weibull harmonic regression (BWHR) for directional wind speed.

Two stages: Weibull maximum-likelihood fits inside direction bins, then a
weighted harmonic regression of the per-bin shape and scale estimates on
direction, with weights ``1 / se**2``.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .circstats import TWO_PI, VonMisesMixture, circular_median, mixture_sample, normalize_angle
from .data import WindData, to_cartesian
from .errors import (
    DegenerateSampleError,
    InsufficientBinsError,
    InsufficientDataError,
    InvalidCurveError,
    SingularDesignError,
)
from .metrics import DirectionGrid
from .weibull import CALM_FLOOR, WeibullFit, clamp_calms, weibull_mle

SCHEMES = ("equal-width", "equal-frequency")
SUMMARIES = ("median", "midpoint")


@dataclass(frozen=True)
class BinningSpec:
    """How directions are binned.

    ``n_bins="auto"`` picks ``round(n / 200)`` bins, raised to ``2K + 2``
    when that is larger.
    """

    n_bins: int | str = 36
    scheme: str = "equal-width"
    summary: str = "median"

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError("scheme must be one of %s" % (SCHEMES,))
        if self.summary not in SUMMARIES:
            raise ValueError("summary must be one of %s" % (SUMMARIES,))
        if self.n_bins != "auto" and (int(self.n_bins) != self.n_bins or self.n_bins < 1):
            raise ValueError("n_bins must be a positive integer or 'auto'")

    def resolve(self, n: int, K: int = 0) -> int:
        if self.n_bins == "auto":
            return max(int(round(n / 200)), 2 * K + 2)
        return int(self.n_bins)


@dataclass(frozen=True)
class Bin:
    index: int
    lo: float
    hi: float
    members: np.ndarray = field(repr=False)

    @property
    def count(self) -> int:
        return int(self.members.size)

    @property
    def empty(self) -> bool:
        return self.members.size == 0

    def contains(self, phi: float) -> bool:
        return self.lo <= phi < self.hi


@dataclass(frozen=True)
class BinFit:
    bin_index: int
    summary_angle: float
    fit: WeibullFit
    count: int


def bin_directions(data: WindData, spec: BinningSpec = BinningSpec(), K: int = 0) -> list[Bin]:
    """Partition observations into direction bins.

    Equal-width arcs are ``[2 pi j / N, 2 pi (j+1) / N)`` starting at 0.
    Equal-frequency bins split the sorted directions into ``N`` runs whose
    sizes differ by at most one. Empty bins are kept.
    """
    n = len(data)
    if n == 0:
        raise InsufficientDataError("no observations to bin")
    nb = spec.resolve(n, K)
    phi = data.direction
    if spec.scheme == "equal-width":
        idx = np.floor(phi * nb / TWO_PI).astype(int)
        idx = np.minimum(idx, nb - 1)
        order = np.argsort(idx, kind="stable")
        splits = np.searchsorted(idx[order], np.arange(1, nb))
        groups = np.split(order, splits)
        edges = TWO_PI * np.arange(nb + 1) / nb
        return [Bin(j, float(edges[j]), float(edges[j + 1]), groups[j]) for j in range(nb)]

    order = np.argsort(phi, kind="stable")
    groups = np.array_split(order, nb)
    edges = [0.0]
    for left, right in zip(groups[:-1], groups[1:]):
        if left.size and right.size:
            edges.append(0.5 * (phi[left[-1]] + phi[right[0]]))
        else:
            edges.append(edges[-1])
    edges.append(TWO_PI)
    return [Bin(j, float(edges[j]), float(edges[j + 1]), groups[j]) for j in range(nb)]


def fit_bins(
    data: WindData,
    bins: Sequence[Bin],
    min_count: int = 5,
    *,
    summary: str = "median",
    min_bins: int = 0,
    calm_floor: float = CALM_FLOOR,
):
    """Weibull MLE in every bin holding at least ``min_count`` points.

    Returns
    -------
    fits : list of BinFit
    excluded : list of (bin_index, reason)

    Raises
    ------
    InsufficientBinsError
        Fewer than ``min_bins`` usable bins remain.
    """
    fits, excluded = [], []
    for b in bins:
        if b.count < min_count:
            excluded.append((b.index, "count %d < %d" % (b.count, min_count)))
            continue
        speeds = clamp_calms(data.speed[b.members], calm_floor)
        try:
            fit = weibull_mle(speeds)
        except DegenerateSampleError as err:
            warnings.warn("dropping bin %d: %s" % (b.index, err), RuntimeWarning)
            excluded.append((b.index, "degenerate: %s" % err))
            continue
        if summary == "median":
            angle = circular_median(data.direction[b.members])
        else:
            angle = 0.5 * (b.lo + b.hi)
        fits.append(BinFit(b.index, float(angle), fit, b.count))
    if len(fits) < min_bins:
        raise InsufficientBinsError(
            "%d usable bins, need at least %d" % (len(fits), min_bins)
        )
    return fits, excluded


def harmonic_design(phi, K: int) -> np.ndarray:
    """Columns ``[1, cos(phi), sin(phi), ..., cos(K phi), sin(K phi)]``."""
    phi = np.atleast_1d(normalize_angle(np.asarray(phi, dtype=float)))
    cols = [np.ones_like(phi)]
    for k in range(1, K + 1):
        cols.append(np.cos(k * phi))
        cols.append(np.sin(k * phi))
    return np.column_stack(cols)


@dataclass(frozen=True)
class HarmonicCoefficients:
    """``b0 + sum_k [a_k cos(k phi) + b_k sin(k phi)]``."""

    intercept: float
    pairs: tuple = ()

    @property
    def K(self) -> int:
        return len(self.pairs)

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.intercept] + [c for pair in self.pairs for c in pair])

    @classmethod
    def from_vector(cls, coef) -> "HarmonicCoefficients":
        coef = [float(c) for c in coef]
        if len(coef) % 2 != 1:
            raise ValueError("harmonic coefficient vector must have odd length 2K+1")
        pairs = tuple((coef[i], coef[i + 1]) for i in range(1, len(coef), 2))
        return cls(coef[0], pairs)

    def __call__(self, phi):
        phi = np.asarray(phi, dtype=float)
        out = harmonic_design(phi.ravel(), self.K) @ self.vector
        return float(out[0]) if phi.ndim == 0 else out.reshape(phi.shape)


def harmonic_wls(angles, values, weights, K: int) -> HarmonicCoefficients:
    """Weighted least-squares fit of an order-``K`` trigonometric polynomial.

    Solved through an SVD-based least-squares routine so that a
    rank-deficient design is detected rather than silently regularized.
    """
    angles = np.asarray(angles, dtype=float)
    y = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    if angles.size < 2 * K + 2:
        raise InsufficientBinsError(
            "harmonic regression of order %d needs %d points, got %d" % (K, 2 * K + 2, angles.size)
        )
    if np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be positive and finite")
    sw = np.sqrt(w)
    X = harmonic_design(angles, K)
    coef, _, rank, _ = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)
    if rank < X.shape[1]:
        raise SingularDesignError(
            "harmonic design has rank %d < %d parameters" % (rank, X.shape[1])
        )
    return HarmonicCoefficients.from_vector(coef)


@dataclass(frozen=True)
class DirectionalWeibullModel:
    """Weibull law for speed whose shape and scale vary with direction."""

    alpha_curve: HarmonicCoefficients
    beta_curve: HarmonicCoefficients
    binning: BinningSpec = BinningSpec()
    bin_fits: tuple = field(default=(), compare=False, repr=False)
    excluded: tuple = field(default=(), compare=False, repr=False)
    n_bins: int = 36

    def alpha(self, phi):
        return self.alpha_curve(phi)

    def beta(self, phi):
        return self.beta_curve(phi)

    def quantile(self, phi, tau):
        return conditional_quantile(self, phi, tau)

    def pdf(self, r, phi):
        a, b = self.alpha(phi), self.beta(phi)
        z = np.asarray(r, dtype=float) / b
        return (a / b) * z ** (a - 1.0) * np.exp(-(z ** a))

    def cdf(self, r, phi):
        a, b = self.alpha(phi), self.beta(phi)
        return -np.expm1(-((np.asarray(r, dtype=float) / b) ** a))

    def validate(self, grid: DirectionGrid = DirectionGrid()) -> None:
        phi = grid.angles
        for name, curve in (("alpha", self.alpha_curve), ("beta", self.beta_curve)):
            vals = curve(phi)
            bad = np.flatnonzero(~(vals > 0))
            if bad.size:
                at = float(phi[bad[0]])
                raise InvalidCurveError(
                    "%s(phi) = %.4g <= 0 at phi = %.4f rad" % (name, vals[bad[0]], at),
                    parameter=name,
                    phi=at,
                )

    def to_dict(self) -> dict:
        return {
            "K_alpha": self.alpha_curve.K,
            "K_beta": self.beta_curve.K,
            "alpha_coeffs": [float(c) for c in self.alpha_curve.vector],
            "beta_coeffs": [float(c) for c in self.beta_curve.vector],
            "n_bins": self.n_bins,
            "scheme": self.binning.scheme,
            "summary": self.binning.summary,
            "bins": [
                {
                    "bin_index": bf.bin_index,
                    "summary_angle": bf.summary_angle,
                    "count": bf.count,
                    "shape": bf.fit.params.shape,
                    "scale": bf.fit.params.scale,
                    "se_shape": bf.fit.se_shape,
                    "se_scale": bf.fit.se_scale,
                }
                for bf in self.bin_fits
            ],
            "excluded": [{"bin_index": i, "reason": why} for i, why in self.excluded],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "DirectionalWeibullModel":
        alpha = HarmonicCoefficients.from_vector(d["alpha_coeffs"])
        beta = HarmonicCoefficients.from_vector(d["beta_coeffs"])
        if alpha.K != d.get("K_alpha", alpha.K) or beta.K != d.get("K_beta", beta.K):
            raise ValueError("K_alpha/K_beta disagree with coefficient lengths")
        spec = BinningSpec(int(d.get("n_bins", 36)), d.get("scheme", "equal-width"), d.get("summary", "median"))
        return cls(alpha, beta, spec, n_bins=int(d.get("n_bins", 36)))

    @classmethod
    def from_json(cls, text: str) -> "DirectionalWeibullModel":
        return cls.from_dict(json.loads(text))


def bwhr_fit(
    data: WindData,
    spec: BinningSpec = BinningSpec(),
    K_alpha: int = 8,
    K_beta: int = 8,
    *,
    min_count: int = 5,
    calm_floor: float = CALM_FLOOR,
) -> DirectionalWeibullModel:
    """Fit the directional Weibull model.

    Raises
    ------
    InsufficientBinsError
        ``N < 2 max(K) + 2`` or too few usable bins after exclusions.
    SingularDesignError
        Degenerate harmonic design.
    InvalidCurveError
        A fitted shape or scale curve is not positive on the 629-point grid.
    """
    if len(data) == 0:
        raise InsufficientDataError("no observations")
    K = max(K_alpha, K_beta)
    nb = spec.resolve(len(data), K)
    if nb < 2 * K + 2:
        raise InsufficientBinsError("N = %d bins < 2K + 2 = %d" % (nb, 2 * K + 2))
    bins = bin_directions(data, spec, K)
    fits, excluded = fit_bins(
        data, bins, min_count, summary=spec.summary, min_bins=2 * K + 2, calm_floor=calm_floor
    )
    angles = np.array([bf.summary_angle for bf in fits])
    shape = np.array([bf.fit.params.shape for bf in fits])
    scale = np.array([bf.fit.params.scale for bf in fits])
    w_shape = 1.0 / np.array([bf.fit.se_shape for bf in fits]) ** 2
    w_scale = 1.0 / np.array([bf.fit.se_scale for bf in fits]) ** 2
    model = DirectionalWeibullModel(
        harmonic_wls(angles, shape, w_shape, K_alpha),
        harmonic_wls(angles, scale, w_scale, K_beta),
        spec,
        bin_fits=tuple(fits),
        excluded=tuple(excluded),
        n_bins=nb,
    )
    model.validate()
    return model


def conditional_quantile(model: DirectionalWeibullModel, phi, tau):
    """``beta(phi) * (-ln(1 - tau))**(1 / alpha(phi))``; broadcasts."""
    tau = np.asarray(tau, dtype=float)
    if np.any((tau <= 0) | (tau >= 1)):
        raise ValueError("tau must lie strictly inside (0, 1)")
    return model.beta(phi) * (-np.log1p(-tau)) ** (1.0 / model.alpha(phi))


def joint_simulate(
    direction_model: VonMisesMixture,
    speed_model: DirectionalWeibullModel,
    count: int,
    seed=None,
    *,
    return_polar: bool = False,
):
    """Simulate wind vectors from the fitted direction and speed models.

    Returns an ``(count, 2)`` array of ``(u, v)``; with ``return_polar``
    also the underlying speeds and directions.
    """
    rng = np.random.default_rng(seed)
    phi = mixture_sample(direction_model, count, rng)
    u01 = rng.random(phi.size)
    r = speed_model.beta(phi) * (-np.log1p(-u01)) ** (1.0 / speed_model.alpha(phi))
    u, v = to_cartesian(r, phi)
    uv = np.column_stack([np.atleast_1d(u), np.atleast_1d(v)]) if phi.size else np.empty((0, 2))
    if return_polar:
        return uv, r, phi
    return uv


def silverman_bandwidth(points) -> np.ndarray:
    """Per-axis bandwidths ``sigma * (4 / ((d + 2) n))**(1 / (d + 4))``."""
    pts = np.asarray(points, dtype=float)
    n, d = pts.shape
    sigma = pts.std(axis=0, ddof=1)
    if np.any(sigma <= 0):
        raise DegenerateSampleError("zero variance along an axis")
    return sigma * (4.0 / ((d + 2) * n)) ** (1.0 / (d + 4))


def density_grid(points, size: int = 101, pad: float = 4.0):
    """Axis vectors covering the data plus ``pad`` bandwidths per side."""
    pts = np.asarray(points, dtype=float)
    h = silverman_bandwidth(pts)
    lo = pts.min(axis=0) - pad * h
    hi = pts.max(axis=0) + pad * h
    return np.linspace(lo[0], hi[0], size), np.linspace(lo[1], hi[1], size)


def joint_density_estimate(points, u_grid, v_grid, bandwidth=None) -> np.ndarray:
    """Product-Gaussian kernel density of ``(u, v)`` points on a lattice.

    Returns an array of shape ``(len(u_grid), len(v_grid))``.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must have shape (n, 2)")
    if pts.shape[0] < 100:
        raise InsufficientDataError("density estimate needs at least 100 points")
    h = silverman_bandwidth(pts) if bandwidth is None else np.broadcast_to(np.asarray(bandwidth, float), (2,))
    ug = np.asarray(u_grid, dtype=float)
    vg = np.asarray(v_grid, dtype=float)
    ku = np.exp(-0.5 * ((ug[:, None] - pts[None, :, 0]) / h[0]) ** 2) / (math.sqrt(TWO_PI) * h[0])
    kv = np.exp(-0.5 * ((vg[:, None] - pts[None, :, 1]) / h[1]) ** 2) / (math.sqrt(TWO_PI) * h[1])
    return (ku @ kv.T) / pts.shape[0]
