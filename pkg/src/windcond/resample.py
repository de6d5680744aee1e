"""Year-block bootstrap bands for directional curves.

Replicate ``i`` always draws from ``numpy.random.default_rng(seed + i)``, so
serial and parallel runs produce identical bands.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bpqr import PeriodicSplineBasis, bpqr_fit
from .bwhr import BinningSpec, bwhr_fit, conditional_quantile
from .circstats import em_fit
from .data import WindData
from .errors import InsufficientDataError, UnstableStatisticError, WindcondError
from .metrics import DirectionGrid

MAX_FAILURE_RATE = 0.10


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def block_resample(data: WindData, seed=None) -> WindData:
    """Draw as many year blocks as the data holds, with replacement.

    Blocks are taken in ascending year order before drawing, so the input
    row order does not matter. The ``j``-th drawn block is relabelled with
    the ``j``-th original year so the output again has one label per block.
    """
    if len(data) == 0:
        raise InsufficientDataError("cannot resample an empty dataset")
    blocks = data.blocks
    years = list(blocks)
    draws = _rng(seed).integers(0, len(years), size=len(years))
    idx = np.concatenate([blocks[years[d]] for d in draws])
    labels = np.concatenate([np.full(blocks[years[d]].size, years[j]) for j, d in enumerate(draws)])
    return WindData(data.speed[idx], data.direction[idx], labels)


def percentile_indices(n: int, level: float) -> tuple[int, int]:
    """1-based order statistics bounding a ``level`` percentile interval.

    Lower is the ``ceil(n (1 - level) / 2)``-th smallest value, upper its
    mirror ``n + 1 - lower``; for 500 replicates at 95% that is 13 and 488.
    """
    tail = round(n * (1.0 - level) / 2.0, 9)
    k = math.ceil(tail)
    if tail < 1:
        warnings.warn(
            "%d replicates at level %.3g leave %.3g expected samples per tail; "
            "percentile indices clamp to the extremes" % (n, level, tail),
            RuntimeWarning,
        )
        k = 1
    return k, n + 1 - k


@dataclass
class BootstrapBand:
    grid: DirectionGrid
    estimate: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float
    n_replicates: int
    failures: list = field(default_factory=list)

    @property
    def angles(self) -> np.ndarray:
        return self.grid.angles

    def covers(self, curve) -> np.ndarray:
        c = np.asarray(curve, dtype=float)
        return (self.lower <= c) & (c <= self.upper)

    def rows(self):
        for phi, e, lo, hi in zip(self.angles, self.estimate, self.lower, self.upper):
            yield float(phi), float(e), float(lo), float(hi), self.level


def _run_replicate(job):
    statistic, datasets, seeds = job
    try:
        resamples = [block_resample(d, s) for d, s in zip(datasets, seeds)]
        return np.asarray(statistic(*resamples), dtype=float), None
    except WindcondError as err:
        return None, "%s: %s" % (err.code, err)
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as err:
        return None, "%s: %s" % (type(err).__name__, err)


def _replicate_curves(statistic, datasets, seed, n_replicates, n_jobs):
    def seeds(i):
        if len(datasets) == 1:
            return (seed + i,)
        return tuple([seed + i, j] for j in range(len(datasets)))

    jobs = ((statistic, datasets, seeds(i)) for i in range(n_replicates))
    if n_jobs and n_jobs > 1:
        with ProcessPoolExecutor(n_jobs) as pool:
            results = list(pool.map(_run_replicate, jobs, chunksize=max(1, n_replicates // (4 * n_jobs))))
    else:
        results = [_run_replicate(j) for j in jobs]
    curves, failures = [], []
    for i, (curve, err) in enumerate(results):
        if err is None:
            curves.append(curve)
        else:
            failures.append((i, err))
    if len(failures) > MAX_FAILURE_RATE * n_replicates:
        raise UnstableStatisticError(
            "%d of %d bootstrap replicates failed" % (len(failures), n_replicates), failures
        )
    return np.vstack(curves), failures


def _band_from(curves, level):
    k_lo, k_hi = percentile_indices(curves.shape[0], level)
    srt = np.sort(curves, axis=0)
    return srt[k_lo - 1], srt[k_hi - 1]


def bootstrap_band(
    data: WindData,
    statistic: Callable[[WindData], np.ndarray],
    n_replicates: int = 500,
    level: float = 0.95,
    seed: int = 0,
    *,
    grid: DirectionGrid = DirectionGrid(),
    n_jobs: int = 1,
) -> BootstrapBand:
    """Pointwise percentile band of a curve-valued statistic.

    ``statistic`` maps a dataset to values on ``grid``. Replicates whose
    estimator raises are logged in ``failures`` and left out; more than 10%
    failures raise :class:`UnstableStatisticError`.
    """
    if n_replicates < 1:
        raise ValueError("n_replicates must be positive")
    if n_replicates < 100:
        warnings.warn("fewer than 100 bootstrap replicates", RuntimeWarning)
    estimate = np.asarray(statistic(data), dtype=float)
    curves, failures = _replicate_curves(statistic, (data,), seed, n_replicates, n_jobs)
    lower, upper = _band_from(curves, level)
    return BootstrapBand(grid, estimate, lower, upper, level, curves.shape[0], failures)


class QuantileCurve:
    """Picklable statistic: fitted ``tau`` quantile curve on a grid."""

    def __init__(self, tau, method="bwhr", grid=DirectionGrid(), binning=BinningSpec(),
                 K_alpha=8, K_beta=8, df=18):
        if method not in ("bwhr", "bpqr"):
            raise ValueError("method must be 'bwhr' or 'bpqr'")
        self.tau = tau
        self.method = method
        self.grid = grid
        self.binning = binning
        self.K_alpha, self.K_beta, self.df = K_alpha, K_beta, df

    def __call__(self, data: WindData) -> np.ndarray:
        phi = self.grid.angles
        if self.method == "bwhr":
            model = bwhr_fit(data, self.binning, self.K_alpha, self.K_beta)
            return conditional_quantile(model, phi, self.tau)
        return bpqr_fit(data, self.tau, PeriodicSplineBasis(self.df)).predict(phi)


class DirectionDensity:
    """Picklable statistic: von Mises mixture density with a fixed count."""

    def __init__(self, n_components, grid=DirectionGrid(), seed=0):
        self.n_components = n_components
        self.grid = grid
        self.seed = seed

    def __call__(self, data: WindData) -> np.ndarray:
        return em_fit(data.direction, self.n_components, self.seed).pdf(self.grid.angles)


@dataclass
class DifferenceBand:
    band: BootstrapBand
    marginal_difference: float
    marginal_lower: float
    marginal_upper: float
    mean_difference: float
    mean_lower: float
    mean_upper: float


class _DifferenceWithMarginal:
    def __init__(self, statistic, tau):
        self.statistic = statistic
        self.tau = tau

    def __call__(self, present, future):
        curve = self.statistic(future) - self.statistic(present)
        marginal = np.quantile(future.speed, self.tau) - np.quantile(present.speed, self.tau)
        return np.append(curve, marginal)


def quantile_difference_band(
    present: WindData,
    future: WindData,
    tau: float,
    method: str = "bwhr",
    n_replicates: int = 500,
    level: float = 0.95,
    seed: int = 0,
    *,
    grid: DirectionGrid = DirectionGrid(),
    n_jobs: int = 1,
    **fit_options,
) -> DifferenceBand:
    """Band for ``q_future(phi) - q_present(phi)`` at level ``tau``.

    The two datasets are block-resampled independently. Alongside the curve
    band this reports the direction-averaged difference and the difference
    of marginal (direction-free) speed quantiles, each with its percentile
    interval.
    """
    stat = _DifferenceWithMarginal(QuantileCurve(tau, method, grid, **fit_options), tau)
    estimate = stat(present, future)
    curves, failures = _replicate_curves(stat, (present, future), seed, n_replicates, n_jobs)
    lower, upper = _band_from(curves, level)
    mean_curves = curves[:, :-1].mean(axis=1)
    m_lo, m_hi = _band_from(mean_curves[:, None], level)
    band = BootstrapBand(grid, estimate[:-1], lower[:-1], upper[:-1], level, curves.shape[0], failures)
    return DifferenceBand(
        band,
        float(estimate[-1]), float(lower[-1]), float(upper[-1]),
        float(estimate[:-1].mean()), float(m_lo[0]), float(m_hi[0]),
    )
