"""
Numerical laboratory for McKean-Vlasov equations.

This package simulates distribution dependent SDEs with
interacting particle systems, computes stationary measures by
Picard iteration on the measure argument, counts stationary
states along parameter grids, and evaluates explicit
uniqueness and convergence-rate certificates from structural
constants.

The fixed points of a phase scan are grouped with a subclass
of :class:`objectgraph.ObjectGraph`.

This module provides annotation for use with
`Mypy <https://mypy.readthedocs.io/en/latest/>`_.
"""
__version__ = "1.0"

from ._clusters import FixedPointGraph, FixedPointNode, Proximity
from ._config import RunConfig, parse_config
from ._errors import (
    ConfigError,
    ConvergenceError,
    DegenerateInputError,
    MeasureError,
    ModelError,
    MVLabError,
    NonErgodicError,
    SimulationDiverged,
)
from ._fixedpoint import (
    ErgodicityEstimate,
    ExponentialFit,
    FixedPointConfig,
    PhaseCell,
    PhaseScanReport,
    SelfConsistencyRoot,
    StationaryDensity,
    StationaryResult,
    apply_T,
    estimate_contraction,
    estimate_ergodicity,
    fit_exponential_rate,
    measure_convergence,
    phase_scan,
    picard_solve,
    sample_density_1d,
    self_consistency_roots,
    stationary_density_1d,
)
from ._measures import (
    EmpiricalMeasure,
    GaussianMeasure,
    WassersteinEstimate,
    bootstrap_se,
    gaussian_kl,
    gaussian_w2,
    noise_floor,
    pth_moment,
    wasserstein,
    wasserstein_1d,
    wasserstein_assignment,
    wasserstein_lp,
    wasserstein_sinkhorn,
)
from ._models import (
    AssumptionConstants,
    ModelSpec,
    ViolationReport,
    a2_sigma_factor,
    available_models,
    builtin_model,
    check_dissipativity,
    check_ellipticity,
    eval_diffusion,
    eval_drift,
    register_model,
)
from ._rates import (
    RateCertificate,
    RateInputs,
    TabulatedKappa,
    available_theorems,
    certificates,
    cor25_certificate,
    cor26_delta0,
    delta0_prop21,
    delta0_thm22,
    delta1_thm23_general,
    delta2_thm24,
    gamma_thm23,
    gamma_thm24,
    k0_pka_condition,
    k_constant,
    kappa_t_from_constants,
    m_hat_general,
    phi_cor25,
    phi_thm23,
    thm23_p2_certificate,
)
from ._simulate import (
    CoupledPath,
    SimConfig,
    Trajectory,
    simulate_decoupled,
    simulate_mv,
    simulate_synchronous_pair,
)

__all__ = (
    "AssumptionConstants",
    "ConfigError",
    "ConvergenceError",
    "CoupledPath",
    "DegenerateInputError",
    "EmpiricalMeasure",
    "ErgodicityEstimate",
    "ExponentialFit",
    "FixedPointConfig",
    "FixedPointGraph",
    "FixedPointNode",
    "GaussianMeasure",
    "MVLabError",
    "MeasureError",
    "ModelError",
    "ModelSpec",
    "NonErgodicError",
    "PhaseCell",
    "PhaseScanReport",
    "Proximity",
    "RateCertificate",
    "RateInputs",
    "RunConfig",
    "SelfConsistencyRoot",
    "SimConfig",
    "SimulationDiverged",
    "StationaryDensity",
    "StationaryResult",
    "TabulatedKappa",
    "Trajectory",
    "ViolationReport",
    "WassersteinEstimate",
    "a2_sigma_factor",
    "apply_T",
    "available_models",
    "available_theorems",
    "bootstrap_se",
    "builtin_model",
    "certificates",
    "check_dissipativity",
    "check_ellipticity",
    "cor25_certificate",
    "cor26_delta0",
    "delta0_prop21",
    "delta0_thm22",
    "delta1_thm23_general",
    "delta2_thm24",
    "estimate_contraction",
    "estimate_ergodicity",
    "eval_diffusion",
    "eval_drift",
    "fit_exponential_rate",
    "gamma_thm23",
    "gamma_thm24",
    "gaussian_kl",
    "gaussian_w2",
    "k0_pka_condition",
    "k_constant",
    "kappa_t_from_constants",
    "m_hat_general",
    "measure_convergence",
    "noise_floor",
    "parse_config",
    "phase_scan",
    "phi_cor25",
    "phi_thm23",
    "picard_solve",
    "pth_moment",
    "register_model",
    "sample_density_1d",
    "self_consistency_roots",
    "simulate_decoupled",
    "simulate_mv",
    "simulate_synchronous_pair",
    "stationary_density_1d",
    "thm23_p2_certificate",
    "wasserstein",
    "wasserstein_1d",
    "wasserstein_assignment",
    "wasserstein_lp",
    "wasserstein_sinkhorn",
)
