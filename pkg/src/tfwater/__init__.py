"""Capacity of LTV Gaussian channels and rate-distortion of nonstationary Gaussian sources.

Exact eigenvalue waterfilling is compared with time-frequency waterfilling
over the Weyl symbol of the filter, with closed forms for the Gaussian
symbol.
"""

__version__ = "0.1.0"

from .errors import ConvergenceError, DomainError, GridTooSmallError, TFWaterError
from .special import HermiteBasis, hermite_fn, lambert_w0, lambert_wm1
from .weyl import (
    DiscreteOperator,
    Grid2D,
    MomentSummary,
    SampledSymbol,
    SpectralData,
    WeylSymbol,
    compose_check,
    gaussian_symbol,
    kernel_to_symbol,
    spectrum,
    symbol_moments,
    symbol_to_kernel,
    szego_gap,
    trace_identity_check,
)
from .heat import HeatChannelModel, closed_form_capacity, closed_form_rate, eoc
from .waterfilling import (
    ReverseWaterfillResult,
    TFIntegralResult,
    WaterfillResult,
    reverse_waterfill_discrete,
    tf_capacity,
    tf_rate,
    waterfill_discrete,
)
from .source import SourceConfig, empirical_wvs, sample_realization, wvs
from .coding import CodingConfig, DecodingReport, heat_coding_config, simulate
