"""Joint wind speed and direction modeling by conditional decomposition."""
from .bpqr import BpqrModel, PeriodicSplineBasis, bpqr_fit
from .bwhr import BinningSpec, DirectionalWeibullModel, bwhr_fit, conditional_quantile, joint_simulate
from .circstats import VonMisesMixture, em_fit, select_components
from .data import WindData, WindSample, to_cartesian, to_polar
from .errors import WindcondError
from .metrics import DirectionGrid, wimre, wimse
from .resample import block_resample, bootstrap_band, quantile_difference_band
from .study import StudyConfig, run_study
from .synth import GaussianMixtureTruth, load_fixture, truth_curves, truth_sample
from .weibull import WeibullParams, weibull_mle

__all__ = [
    "BinningSpec", "BpqrModel", "DirectionGrid", "DirectionalWeibullModel", "GaussianMixtureTruth",
    "PeriodicSplineBasis", "StudyConfig", "VonMisesMixture", "WeibullParams", "WindData", "WindSample",
    "WindcondError", "block_resample", "bootstrap_band", "bpqr_fit", "bwhr_fit", "conditional_quantile",
    "em_fit", "joint_simulate", "load_fixture", "quantile_difference_band", "run_study", "select_components",
    "to_cartesian", "to_polar", "truth_curves", "truth_sample", "weibull_mle", "wimre", "wimse",
]
