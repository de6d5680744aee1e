"""Periodic B-spline quantile regression (BPQR) baseline.

Each quantile level is fitted separately: ``Q(tau | phi) = B(phi) @ coef``
where ``B`` is a periodic cubic B-spline basis on equally spaced knots.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .circstats import TWO_PI, normalize_angle
from .data import WindData
from .errors import ConvergenceError, InsufficientDataError

EPS_SCHEDULE = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6)


def _cardinal_bspline(x: np.ndarray, degree: int) -> np.ndarray:
    """Uniform B-spline of the given degree supported on ``[0, degree + 1)``."""
    # N_0 on [0, 1); N_p(x) = (x N_{p-1}(x) + (p+1-x) N_{p-1}(x-1)) / p
    vals = [((x - j >= 0) & (x - j < 1)).astype(float) for j in range(degree + 1)]
    for p in range(1, degree + 1):
        vals = [
            ((x - j) * vals[j] + (p + 1 - (x - j)) * vals[j + 1]) / p
            for j in range(degree + 1 - p)
        ]
    return vals[0]


@dataclass(frozen=True)
class PeriodicSplineBasis:
    """``df`` periodic B-splines of ``degree`` on knots ``2 pi j / df``."""

    df: int = 18
    degree: int = 3

    def __post_init__(self):
        if self.df < self.degree + 1:
            raise ValueError("df must be at least degree + 1")

    @property
    def knots(self) -> np.ndarray:
        return TWO_PI * np.arange(self.df) / self.df

    def evaluate(self, phi) -> np.ndarray:
        """Basis matrix of shape ``(len(phi), df)``; 1-d input for a scalar."""
        phi = np.asarray(phi, dtype=float)
        u = np.atleast_1d(normalize_angle(phi.ravel())) * self.df / TWO_PI
        x = np.mod(u[:, None] - np.arange(self.df)[None, :], self.df)
        B = _cardinal_bspline(x, self.degree)
        return B[0] if phi.ndim == 0 else B


def pspline_basis_eval(phi, basis: PeriodicSplineBasis = PeriodicSplineBasis()) -> np.ndarray:
    return basis.evaluate(phi)


def pinball_loss(residual, tau: float):
    """Check loss ``y (tau - 1{y < 0})``."""
    y = np.asarray(residual, dtype=float)
    out = y * (tau - (y < 0))
    return float(out) if out.ndim == 0 else out


@dataclass
class QRSolution:
    coef: np.ndarray
    objective: float
    n_iter: int
    stage_objectives: list = field(default_factory=list)
    traces: list = field(default_factory=list, repr=False)


def _smoothed_objective(r, tau, eps):
    return float(np.sum(pinball_loss(r, tau)) - 0.5 * eps * np.sum(np.log(eps + np.abs(r))))


def quantile_regression(
    X,
    y,
    tau: float,
    *,
    eps_schedule=EPS_SCHEDULE,
    rtol: float = 1e-9,
    max_iter: int = 10_000,
    keep_trace: bool = False,
) -> QRSolution:
    """Minimize ``sum pinball(y - X b)`` by majorize-minimize reweighting.

    For a fixed smoothing ``eps`` each step solves the weighted normal
    equations ``X' W X b = X' W y + (2 tau - 1) X' 1`` with
    ``W = diag(1 / (eps + |r|))``, which never increases the smoothed
    objective ``sum pinball(r) - eps/2 sum log(eps + |r|)`` (Hunter and
    Lange, 2000). ``eps`` is annealed through ``eps_schedule``; a stage ends
    when the relative improvement drops below ``rtol``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if not 0 < tau < 1:
        raise ValueError("tau must lie strictly inside (0, 1)")
    n, p = X.shape
    if n <= p:
        raise InsufficientDataError("need more observations (%d) than coefficients (%d)" % (n, p))
    coef = np.linalg.lstsq(X, y, rcond=None)[0]
    shift = (2.0 * tau - 1.0) * X.sum(axis=0)
    total = 0
    stage_objs, traces = [], []
    for eps in eps_schedule:
        r = y - X @ coef
        obj = _smoothed_objective(r, tau, eps)
        trace = [obj]
        while True:
            if total >= max_iter:
                raise ConvergenceError(
                    "quantile regression did not converge in %d iterations" % max_iter,
                    last_iterate=coef,
                )
            w = 1.0 / (eps + np.abs(r))
            Xw = X * w[:, None]
            new = np.linalg.solve(X.T @ Xw, Xw.T @ y + shift)
            total += 1
            r_new = y - X @ new
            obj_new = _smoothed_objective(r_new, tau, eps)
            if obj_new > obj:
                # round-off only; keep the better iterate
                break
            coef, r = new, r_new
            improvement = obj - obj_new
            obj = obj_new
            if keep_trace:
                trace.append(obj)
            if improvement <= rtol * max(abs(obj), 1e-300):
                break
        stage_objs.append(obj)
        if keep_trace:
            traces.append(trace)
    final = float(np.sum(pinball_loss(y - X @ coef, tau)))
    return QRSolution(coef, final, total, stage_objs, traces)


@dataclass(frozen=True)
class BpqrModel:
    tau: float
    basis: PeriodicSplineBasis
    coefficients: np.ndarray
    objective: float = field(default=float("nan"), compare=False)
    n_iter: int = field(default=0, compare=False)

    def predict(self, phi):
        phi = np.asarray(phi, dtype=float)
        out = self.basis.evaluate(phi) @ np.asarray(self.coefficients)
        return float(out) if phi.ndim == 0 else out

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "df": self.basis.df,
            "degree": self.basis.degree,
            "coefficients": [float(c) for c in self.coefficients],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "BpqrModel":
        basis = PeriodicSplineBasis(int(d["df"]), int(d.get("degree", 3)))
        return cls(float(d["tau"]), basis, np.asarray(d["coefficients"], dtype=float))


def bpqr_fit(data: WindData, tau: float, basis: PeriodicSplineBasis = PeriodicSplineBasis(), **solver) -> BpqrModel:
    """Fit the ``tau`` quantile curve of speed on direction."""
    n = len(data)
    if n <= basis.df:
        raise InsufficientDataError("BPQR needs more than df = %d observations, got %d" % (basis.df, n))
    X = basis.evaluate(data.direction)
    sol = quantile_regression(X, data.speed, tau, **solver)
    return BpqrModel(float(tau), basis, sol.coef, objective=sol.objective, n_iter=sol.n_iter)


def bpqr_predict(model: BpqrModel, phi):
    return model.predict(phi)
