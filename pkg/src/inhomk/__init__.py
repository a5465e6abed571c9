"""
Globally intensity-reweighted K-function and pair correlation estimators for
second-order intensity-reweighted stationary point processes.
"""

__version__ = "0.1.0"

from .geometry import UNIT_SQUARE, Window, angular_overlap_integral, contains, isotropized_edge_factor, overlap_volume
from .pattern import BivariatePattern, PointPattern, load_csv, pair_iteration, save_csv
from .kernel_intensity import (
    IntensityModel,
    Kernel1D,
    Kernel2D,
    KernelIntensity,
    KnownIntensity,
    ParametricIntensity,
    bandwidth_cvl,
    bandwidth_lcv,
    edge_weight,
    rho_bar,
    rho_hat,
    rho_parametric,
)
from .gamma import (
    AnalyticGamma,
    GammaFunction,
    SampleBank,
    build_interpolated_gamma,
    gamma12_iso_mc,
    gamma12_mc,
    gamma_iso_mc,
    gamma_mc,
)
from .estimators_k import (
    CurveEstimate,
    k12_global,
    k12_global_iso,
    k12_local,
    k12_local_iso,
    k_global,
    k_global_iso,
    k_local,
    k_local_iso,
    l_transform,
)
from .estimators_pcf import (
    SurfaceEstimate,
    c_global,
    c_global_iso,
    c_local,
    c_local_iso,
    c_partial,
    g_global,
    g_global_iso,
    g_local,
    g_local_iso,
)
