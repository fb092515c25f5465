"""Distorted valuation, estimation and allocation for bilateral gamma Lévy models."""

from .distortions import (
    ExpDistortionParams,
    IdentityPair,
    bg2bg_pair,
    exp_distortion_pair,
    rebate_family_distortion,
    validate_distortion,
)
from .driver import GridFunction, choquet_driver, distorted_density, psi_monotone
from .errors import (
    ConfigurationError,
    DataError,
    DomainError,
    InvariantError,
    NumericalError,
    SpectralLevyError,
)
from .estimation import OptionChain, ReturnSeries, calibrate_spreads, dm_estimate, gmm_estimate
from .levy import BGParams, MBGParams, bg_char_exponent, bg_levy_density, bg_mean_rate, make_jump_grid
from .portfolio import (
    PortfolioSpec,
    RebateSpec,
    myopic_allocate,
    optimal_amount_and_weights,
    optimal_theta_small_investor,
)
from .pricing import DistortedPricer, FourierEngine, FourierSpec, PIDEGrid, drift_triple, pide_solve_explicit

__version__ = "0.1.0"
