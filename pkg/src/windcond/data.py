"""Wind observations and coordinate transforms.

Direction follows the ``(u, v) = (r sin(phi), r cos(phi))`` convention, so
``phi = 0`` points along the v axis and angles grow toward the u axis.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .circstats import normalize_angle


@dataclass(frozen=True)
class WindSample:
    speed: float
    direction: float
    year: int

    def __post_init__(self):
        if not self.speed >= 0:
            raise ValueError("speed must be nonnegative")
        object.__setattr__(self, "direction", normalize_angle(self.direction))


def to_polar(u, v):
    """Return ``(r, phi)`` with ``phi = atan2(u, v)`` wrapped to [0, 2 pi).

    The origin maps to ``(0, 0)``.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        raise ValueError("non-finite wind component")
    r = np.hypot(u, v)
    phi = normalize_angle(np.arctan2(u, v))
    if r.ndim == 0:
        return float(r), float(phi)
    return r, phi


def to_cartesian(r, phi):
    r = np.asarray(r, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if np.any(r < 0):
        raise ValueError("speed must be nonnegative")
    u = r * np.sin(phi)
    v = r * np.cos(phi)
    if u.ndim == 0:
        return float(u), float(v)
    return u, v


class WindData:
    """Column store of wind observations with year labels.

    Doubles as the blocked dataset for the year-block bootstrap: each
    distinct year label is one block.
    """

    __slots__ = ("speed", "direction", "year")

    def __init__(self, speed, direction, year=None):
        speed = np.asarray(speed, dtype=float).ravel()
        direction = np.asarray(direction, dtype=float).ravel()
        if year is None:
            year = np.zeros(speed.size, dtype=int)
        year = np.asarray(year).ravel().astype(int)
        if not (speed.size == direction.size == year.size):
            raise ValueError("speed, direction and year must have equal length")
        if np.any(speed < 0) or not np.all(np.isfinite(speed)):
            raise ValueError("speeds must be finite and nonnegative")
        direction = np.atleast_1d(normalize_angle(direction)) if direction.size else direction
        for name, arr in (("speed", speed), ("direction", direction), ("year", year)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __setattr__(self, name, value):
        raise AttributeError("WindData is immutable")

    def __reduce__(self):
        return (WindData, (self.speed, self.direction, self.year))

    def __len__(self):
        return int(self.speed.size)

    def __iter__(self) -> Iterator[WindSample]:
        for r, phi, y in zip(self.speed, self.direction, self.year):
            yield WindSample(float(r), float(phi), int(y))

    def __repr__(self):
        return "WindData(n=%d, years=%d)" % (len(self), self.years.size)

    @classmethod
    def from_samples(cls, samples) -> "WindData":
        samples = list(samples)
        return cls(
            [s.speed for s in samples],
            [s.direction for s in samples],
            [s.year for s in samples],
        )

    @classmethod
    def from_uv(cls, u, v, year=None) -> "WindData":
        r, phi = to_polar(np.atleast_1d(u), np.atleast_1d(v))
        return cls(r, phi, year)

    def uv(self):
        return to_cartesian(self.speed, self.direction)

    @property
    def years(self) -> np.ndarray:
        return np.unique(self.year)

    @property
    def blocks(self) -> dict:
        """Year label -> indices of its observations, years ascending."""
        return {int(y): np.flatnonzero(self.year == y) for y in self.years}

    def take(self, idx) -> "WindData":
        idx = np.asarray(idx, dtype=int)
        return WindData(self.speed[idx], self.direction[idx], self.year[idx])

    def with_speed(self, speed) -> "WindData":
        return WindData(speed, self.direction, self.year)


BlockedDataset = WindData
