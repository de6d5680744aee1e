"""Exception types raised by the estimators.

Every error carries a short machine-readable ``code`` so the CLI can emit it
as JSON and study drivers can triage replicate failures.
"""


class WindcondError(Exception):
    code = "windcond_error"

    def to_dict(self):
        return {"error": self.code, "message": str(self)}


class InsufficientDataError(WindcondError, ValueError):
    code = "insufficient_data"


class DegenerateSampleError(WindcondError, ValueError):
    code = "degenerate_sample"


class ComponentCollapseError(WindcondError, RuntimeError):
    code = "component_collapse"


class InsufficientBinsError(WindcondError, ValueError):
    code = "insufficient_bins"


class SingularDesignError(WindcondError, ValueError):
    code = "singular_design"


class InvalidCurveError(WindcondError, ValueError):
    code = "invalid_curve"

    def __init__(self, message, parameter=None, phi=None):
        super().__init__(message)
        self.parameter = parameter
        self.phi = phi

    def to_dict(self):
        d = super().to_dict()
        d.update(parameter=self.parameter, phi=self.phi)
        return d


class ConvergenceError(WindcondError, RuntimeError):
    code = "convergence"

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class UnstableStatisticError(WindcondError, RuntimeError):
    code = "unstable_statistic"

    def __init__(self, message, failures=None):
        super().__init__(message)
        self.failures = list(failures or [])

    def to_dict(self):
        d = super().to_dict()
        d["failures"] = [list(f) for f in self.failures]
        return d


class QuadratureError(WindcondError, RuntimeError):
    code = "quadrature"


class GridMismatchError(WindcondError, ValueError):
    code = "grid_mismatch"


class ZeroTruthError(WindcondError, ZeroDivisionError):
    code = "zero_truth"

    def __init__(self, message, phi=None):
        super().__init__(message)
        self.phi = phi
