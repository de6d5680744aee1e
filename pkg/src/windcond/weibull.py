"""Two-parameter Weibull distribution for wind speed.

Shape is called ``alpha`` and scale ``beta`` (m/s) throughout, matching the
directional model in :mod:`windcond.bwhr`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSampleError, InsufficientDataError

SHAPE_BRACKET = (1e-3, 1e3)
CALM_FLOOR = 0.01


@dataclass(frozen=True)
class WeibullParams:
    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise ValueError("Weibull shape and scale must be positive")


@dataclass(frozen=True)
class WeibullFit:
    params: WeibullParams
    se_shape: float
    se_scale: float
    loglik: float
    n: int
    cov: np.ndarray = None


def weibull_pdf(r, params: WeibullParams):
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("Weibull density is defined for r > 0")
    a, b = params.shape, params.scale
    z = r / b
    out = (a / b) * z ** (a - 1.0) * np.exp(-(z ** a))
    return float(out) if out.ndim == 0 else out


def weibull_cdf(r, params: WeibullParams):
    r = np.asarray(r, dtype=float)
    out = -np.expm1(-((np.maximum(r, 0.0) / params.scale) ** params.shape))
    return float(out) if out.ndim == 0 else out


def weibull_quantile(tau, params: WeibullParams):
    """``scale * (-ln(1 - tau))**(1/shape)`` for ``0 < tau < 1``."""
    tau = np.asarray(tau, dtype=float)
    if np.any((tau <= 0) | (tau >= 1)):
        raise ValueError("tau must lie strictly inside (0, 1)")
    out = params.scale * (-np.log1p(-tau)) ** (1.0 / params.shape)
    return float(out) if out.ndim == 0 else out


def weibull_sample(params: WeibullParams, count: int, seed=None) -> np.ndarray:
    """Inverse-CDF draws ``scale * (-ln(1 - U))**(1/shape)``."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    u = rng.random(int(count))
    return params.scale * (-np.log1p(-u)) ** (1.0 / params.shape)


def weibull_loglik(speeds, shape: float, scale: float) -> float:
    r = np.asarray(speeds, dtype=float)
    z = r / scale
    return float(
        r.size * (math.log(shape) - math.log(scale))
        + (shape - 1.0) * np.log(z).sum()
        - (z ** shape).sum()
    )


def _profile_score(alpha, logx, mean_logx):
    """Shape profile score and its derivative, for x = r / max(r) <= 1."""
    xa = np.exp(alpha * logx)
    s0 = xa.sum()
    s1 = (xa * logx).sum()
    s2 = (xa * logx * logx).sum()
    m1 = s1 / s0
    g = m1 - 1.0 / alpha - mean_logx
    dg = s2 / s0 - m1 * m1 + 1.0 / (alpha * alpha)
    return g, dg


def observed_information(speeds, shape: float, scale: float) -> np.ndarray:
    """Negative Hessian of the log-likelihood in (shape, scale)."""
    r = np.asarray(speeds, dtype=float)
    n = r.size
    a, b = shape, scale
    logz = np.log(r / b)
    za = np.exp(a * logz)
    s0 = za.sum()
    s1 = (za * logz).sum()
    s2 = (za * logz * logz).sum()
    h_aa = -n / a ** 2 - s2
    h_bb = n * a / b ** 2 - a * (a + 1.0) / b ** 2 * s0
    h_ab = -n / b + s0 / b + a / b * s1
    return -np.array([[h_aa, h_ab], [h_ab, h_bb]])


def weibull_mle(speeds) -> WeibullFit:
    """Maximum-likelihood Weibull fit with observed-information errors.

    The shape solves the profile score equation by Newton steps kept
    inside a shrinking bracket on ``[1e-3, 1e3]`` (bisection when a Newton
    step leaves it); the scale follows in closed form.

    Raises
    ------
    InsufficientDataError
        Fewer than five observations.
    ValueError
        A nonpositive or non-finite speed.
    DegenerateSampleError
        All speeds equal, or the information matrix is not positive definite.
    """
    r = np.asarray(speeds, dtype=float).ravel()
    if r.size < 5:
        raise InsufficientDataError("Weibull fit needs at least 5 speeds, got %d" % r.size)
    if not np.all(np.isfinite(r)) or np.any(r <= 0):
        raise ValueError("Weibull fit requires finite positive speeds")
    rmax = r.max()
    logx = np.log(r / rmax)
    if np.ptp(logx) <= 1e-12:
        raise DegenerateSampleError("all speeds are equal")
    mean_logx = logx.mean()

    lo, hi = SHAPE_BRACKET
    g_lo, _ = _profile_score(lo, logx, mean_logx)
    g_hi, _ = _profile_score(hi, logx, mean_logx)
    if not (g_lo < 0 < g_hi):
        raise DegenerateSampleError("shape estimate outside [%g, %g]" % (lo, hi))

    sd = logx.std()
    alpha = min(max(1.2825 / sd, lo * 10), hi / 10)  # moment start pi/sqrt(6)/sd
    for _ in range(200):
        g, dg = _profile_score(alpha, logx, mean_logx)
        if abs(g) < 1e-10:
            break
        if g < 0:
            lo = alpha
        else:
            hi = alpha
        step = alpha - g / dg
        alpha = step if lo < step < hi else 0.5 * (lo + hi)
    else:
        raise DegenerateSampleError("shape iteration did not converge")

    beta = rmax * np.mean(np.exp(alpha * logx)) ** (1.0 / alpha)
    info = observed_information(r, alpha, beta)
    try:
        np.linalg.cholesky(info)
    except np.linalg.LinAlgError:
        raise DegenerateSampleError("observed information is not positive definite") from None
    cov = np.linalg.inv(info)
    se = np.sqrt(np.diag(cov))
    if not np.all(np.isfinite(se)) or np.any(se <= 0):
        raise DegenerateSampleError("standard errors not computable")
    return WeibullFit(
        params=WeibullParams(float(alpha), float(beta)),
        se_shape=float(se[0]),
        se_scale=float(se[1]),
        loglik=weibull_loglik(r, alpha, beta),
        n=int(r.size),
        cov=cov,
    )


def clamp_calms(speeds, floor: float = CALM_FLOOR) -> np.ndarray:
    """Raise speeds below ``floor`` (calms) to ``floor``."""
    return np.maximum(np.asarray(speeds, dtype=float), floor)
