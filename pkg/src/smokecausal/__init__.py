"""Bayesian spatial causal estimation of fire-contributed PM2.5.

Fuses sparse monitor observations with paired fire / no-fire numerical-model
fields, estimates the spatially resolved causal effect by Gibbs sampling,
kriges it to a grid and converts county exposure into health burden.
"""

from .burden import AgeRateTable, CountyTable, burden, burden_ci, burden_table
from .crossval import cv_metrics, kfold_split, tau_selection
from .data import (
    GridTable,
    PanelDataset,
    RegionBlock,
    collinearity_screen,
    load_grid,
    load_panel,
    load_sites,
    partition_regions,
    smoke_indicator,
)
from .diagnostics import covariance_curves, ess, residual_acf, variogram_gof
from .gibbs import (
    ChainConfig,
    GibbsSampler,
    ModelState,
    PosteriorSamples,
    estimate_ranges,
    initial_state,
    recover_sigma_gamma,
    run_chain,
)
from .inference import (
    CausalEffectPosterior,
    KrigeKernel,
    causal_effect,
    credible_interval,
    krige,
    percent_of_total,
)
from .simulate import (
    BiasFields,
    TrueParams,
    ols_mean_recovery,
    simulate_bias_fields,
    simulate_panel,
)
from .spatial import (
    CovarianceParams,
    SiteSet,
    Variogram,
    distance_matrix,
    empirical_variogram,
    exp_correlation,
    fit_range,
    obs_covariance,
)

__version__ = "0.1.0"

__all__ = [
    "AgeRateTable",
    "BiasFields",
    "CausalEffectPosterior",
    "ChainConfig",
    "CountyTable",
    "CovarianceParams",
    "GibbsSampler",
    "GridTable",
    "KrigeKernel",
    "ModelState",
    "PanelDataset",
    "PosteriorSamples",
    "RegionBlock",
    "SiteSet",
    "TrueParams",
    "Variogram",
    "burden",
    "burden_ci",
    "burden_table",
    "causal_effect",
    "collinearity_screen",
    "covariance_curves",
    "credible_interval",
    "cv_metrics",
    "distance_matrix",
    "empirical_variogram",
    "ess",
    "estimate_ranges",
    "exp_correlation",
    "fit_range",
    "initial_state",
    "kfold_split",
    "krige",
    "load_grid",
    "load_panel",
    "load_sites",
    "obs_covariance",
    "ols_mean_recovery",
    "partition_regions",
    "percent_of_total",
    "recover_sigma_gamma",
    "residual_acf",
    "run_chain",
    "simulate_bias_fields",
    "simulate_panel",
    "smoke_indicator",
    "tau_selection",
    "variogram_gof",
]
