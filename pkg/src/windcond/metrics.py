"""Direction-weighted error metrics for curves on a circular grid."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import GridMismatchError, ZeroTruthError

DEFAULT_GRID_SIZE = 629


@dataclass(frozen=True)
class DirectionGrid:
    """``m`` equally spaced angles ``2 pi i / m``, i = 0..m-1."""

    m: int = DEFAULT_GRID_SIZE

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("grid needs at least one point")

    @property
    def angles(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.m) / self.m

    def __len__(self):
        return self.m


@dataclass(frozen=True)
class CurveSample:
    grid: DirectionGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size != self.grid.m:
            raise GridMismatchError("curve has %d values for a %d-point grid" % (v.size, self.grid.m))
        object.__setattr__(self, "values", v)


def _values(curve, m=None):
    if isinstance(curve, CurveSample):
        return curve.values, curve.grid.m
    v = np.asarray(curve, dtype=float).ravel()
    return v, v.size


def _check_same(*curves):
    vals, sizes = zip(*(_values(c) for c in curves))
    if len(set(sizes)) != 1:
        raise GridMismatchError("curves live on different grids: %s" % (sizes,))
    grids = {c.grid for c in curves if isinstance(c, CurveSample)}
    if len(grids) > 1:
        raise GridMismatchError("curves live on different grids")
    return vals


def _grid_angle(i, m):
    return 2.0 * np.pi * i / m


def wimre(estimate, truth, weight_density) -> float:
    """Weighted integrated mean relative error.

    ``sum f_i |(ghat_i - g_i) / g_i| / sum f_i`` over the grid. Accepts
    :class:`CurveSample` objects or plain arrays on a shared grid.
    """
    est, tru, f = _check_same(estimate, truth, weight_density)
    bad = np.flatnonzero((tru == 0) & (f > 0))
    if bad.size:
        phi = _grid_angle(bad[0], tru.size)
        raise ZeroTruthError("truth is zero at phi=%.6f rad under positive weight" % phi, phi=phi)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(f > 0, np.abs((est - tru) / tru), 0.0)
    return float(np.sum(f * rel) / np.sum(f))


def signed_relative_error(estimate, truth, weight_density) -> float:
    """Like :func:`wimre` without the absolute value."""
    est, tru, f = _check_same(estimate, truth, weight_density)
    bad = np.flatnonzero((tru == 0) & (f > 0))
    if bad.size:
        phi = _grid_angle(bad[0], tru.size)
        raise ZeroTruthError("truth is zero at phi=%.6f rad under positive weight" % phi, phi=phi)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(f > 0, (est - tru) / tru, 0.0)
    return float(np.sum(f * rel) / np.sum(f))


def weighted_mean(curve, weight_density) -> float:
    v, f = _check_same(curve, weight_density)
    return float(np.sum(f * v) / np.sum(f))


def _stack(replicates, truth):
    tru, m = _values(truth)
    rows = []
    for rep in replicates:
        v, mm = _values(rep)
        if mm != m:
            raise GridMismatchError("replicate has %d points, truth has %d" % (mm, m))
        if isinstance(rep, CurveSample) and isinstance(truth, CurveSample) and rep.grid != truth.grid:
            raise GridMismatchError("replicate grid differs from truth grid")
        rows.append(v)
    if not rows:
        raise ValueError("need at least one replicate")
    return np.vstack(rows), tru


def mse_curve(replicate_estimates: Sequence, truth):
    """Pointwise mean squared error over replicates and its grid average.

    Returns
    -------
    (CurveSample, float)
    """
    est, tru = _stack(replicate_estimates, truth)
    mse = np.mean((est - tru[None, :]) ** 2, axis=0)
    grid = truth.grid if isinstance(truth, CurveSample) else DirectionGrid(tru.size)
    return CurveSample(grid, mse), float(mse.mean())


def wimse(replicate_estimates: Sequence, truth, weight_density) -> float:
    """Direction-density weighted integrated mean squared error.

    ``sum_i f_i MSE_i / sum_i f_i``.
    """
    est, tru = _stack(replicate_estimates, truth)
    f, m = _values(weight_density)
    if m != tru.size:
        raise GridMismatchError("weight density has %d points, truth has %d" % (m, tru.size))
    per_angle = f * np.mean((est - tru[None, :]) ** 2, axis=0)
    return float(per_angle.sum() / f.sum())
