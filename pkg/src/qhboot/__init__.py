"""Bootstrap of plug-in estimators for quasi-Hadamard differentiable functionals."""
from qhboot._backend import COMPILED
from qhboot.bootstrap import BootstrapScheme, bootstrap_ecdf, draw_weights, validate_circular_params
from qhboot.datagen import AR1, GARCH11, IID, sample, true_cdf
from qhboot.errors import ConfigError, Divergent, IllConditioned, NonCDF, NotApplicable, QHBootError
from qhboot.functionals import (
    AVaR,
    IDENTITY,
    Normal,
    StudentT,
    Uniform,
    VARIANCE_KERNEL,
    distortion_derivative,
    distortion_value,
    vfunctional_value,
)
from qhboot.metrics import DiscreteMeasure, bl_distance, weighted_ks
from qhboot.stepfn import StepFunction, WeightFunction, ecdf

__version__ = "0.1.0"
