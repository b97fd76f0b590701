"""Outage capacity of SIMO/MISO/MIMO diversity channels under i.i.d. Rayleigh fading."""

from outcap.errors import (
    AsymptoticRegimeError,
    ConvergenceError,
    DomainError,
    GaInvalidRegimeError,
    NonMonotoneError,
    OutcapError,
    UnsupportedExactCdfError,
)
from outcap.mimo_bounds import (
    EdgeConstant,
    MimoBoundReport,
    asymptotic_benchmark,
    frobenius_mean,
    outage_capacity_bounds,
    snr_bounds,
)
from outcap.montecarlo import McEstimate, McSettings, empirical_quantile, ks_distance, mc_outage_capacity, sample_combiner_snr
from outcap.numerics import (
    RootSolveSettings,
    harmonic_number,
    invert_monotone_cdf,
    q_function,
    q_inverse,
    regularized_lower_gamma,
)
from outcap.outage import (
    ApproximationReport,
    CapacityReport,
    asymptotic_gap,
    awgn_capacity,
    gap_vs_branch_benchmark,
    gap_vs_combiner_benchmark,
    outage_capacity,
    ratio_vs_combiner_benchmark,
)
from outcap.snr_models import (
    ChannelConfig,
    DiversityScheme,
    SnrQuantile,
    combiner_cdf,
    combiner_quantile,
    config_for_combiner_snr,
    ga_quantile,
    mean_combiner_snr,
)

__version__ = "0.1.0"
