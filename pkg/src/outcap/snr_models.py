"""Combiner-SNR distributions for each diversity scheme under i.i.d. Rayleigh fading.

All SNRs are linear.  Sum-type schemes (MRC, MRT) have a gamma-distributed
combiner SNR with shape equal to the diversity order; max-type schemes (SC, ST,
STC) have the CDF of the maximum of i.i.d. exponentials.  Optimal MIMO
beamforming has no closed-form CDF here; see :mod:`outcap.mimo_bounds`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from outcap._validation import check_count, check_nonnegative, check_positive, check_probability
from outcap.errors import DomainError, GaInvalidRegimeError, UnsupportedExactCdfError
from outcap.numerics import (
    DEFAULT_ROOT_SETTINGS,
    RootSolveSettings,
    harmonic_number,
    invert_monotone_cdf,
    q_inverse,
    regularized_lower_gamma,
)

MAX_ANTENNAS = 1_000_000


class DiversityScheme(str, enum.Enum):
    MRC = "mrc"
    SC = "sc"
    MRT = "mrt"
    ST = "st"
    MIMO_OPTIMAL = "mimo-opt"
    STC = "stc"

    @property
    def is_sum(self) -> bool:
        return self in (DiversityScheme.MRC, DiversityScheme.MRT)

    @property
    def is_selection(self) -> bool:
        return self in (DiversityScheme.SC, DiversityScheme.ST, DiversityScheme.STC)


class QuantileMethod(str, enum.Enum):
    CLOSED_FORM = "closed_form"
    NUMERIC_INVERSION = "numeric_inversion"
    GAUSSIAN_APPROX = "gaussian_approx"
    BOUND_LOWER = "bound_lower"
    BOUND_UPPER = "bound_upper"


@dataclass(frozen=True)
class ChannelConfig:
    """Scheme, antenna counts and per-link average SNR (linear).

    ``m`` counts receive antennas and ``n`` transmit antennas.  For optimal MIMO
    beamforming ``branch_snr`` is the unit-gain link SNR rho.
    """

    scheme: DiversityScheme
    m: int = 1
    n: int = 1
    branch_snr: float = 1.0

    def __post_init__(self):
        scheme = DiversityScheme(self.scheme)
        object.__setattr__(self, "scheme", scheme)
        m = check_count(self.m, "m")
        n = check_count(self.n, "n")
        if m > MAX_ANTENNAS or n > MAX_ANTENNAS:
            raise DomainError(f"antenna counts limited to {MAX_ANTENNAS}, got m={m}, n={n}")
        if scheme in (DiversityScheme.MRC, DiversityScheme.SC) and n != 1:
            raise DomainError(f"{scheme.value} is a receive-diversity scheme and needs n=1, got n={n}")
        if scheme in (DiversityScheme.MRT, DiversityScheme.ST) and m != 1:
            raise DomainError(f"{scheme.value} is a transmit-diversity scheme and needs m=1, got m={m}")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "branch_snr", check_positive(self.branch_snr, "branch_snr"))

    @property
    def diversity_order(self) -> int:
        if self.scheme in (DiversityScheme.MRC, DiversityScheme.SC):
            return self.m
        if self.scheme in (DiversityScheme.MRT, DiversityScheme.ST):
            return self.n
        return self.m * self.n

    def with_branch_snr(self, branch_snr: float) -> "ChannelConfig":
        return ChannelConfig(self.scheme, self.m, self.n, branch_snr)


@dataclass(frozen=True)
class SnrQuantile:
    """SNR outage threshold gamma0 = F^-1(eps) with provenance of how it was found."""

    gamma0: float
    method: QuantileMethod
    residual: float = 0.0
    iterations: int = 0


def _require_exact(cfg: ChannelConfig):
    if cfg.scheme is DiversityScheme.MIMO_OPTIMAL:
        raise UnsupportedExactCdfError(
            "exact combiner CDF of optimal MIMO beamforming is unknown; use outcap.mimo_bounds"
        )


def _selection_cdf(order: int, x):
    # (1 - e^-x)^d evaluated in log space so large d keeps precision
    if np.ndim(x) == 0:
        if x == 0:
            return 0.0
        return math.exp(order * math.log(-math.expm1(-x)))
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.exp(order * np.log(-np.expm1(-x)))


def combiner_cdf(cfg: ChannelConfig, gamma):
    """CDF of the combiner SNR at ``gamma`` (scalar or array, linear)."""
    _require_exact(cfg)
    if np.ndim(gamma) == 0:
        x = check_nonnegative(gamma, "gamma") / cfg.branch_snr
    else:
        gamma = np.asarray(gamma, dtype=float)
        if np.any(gamma < 0):
            raise DomainError("gamma must be nonnegative")
        x = gamma / cfg.branch_snr
    if cfg.scheme.is_sum:
        return regularized_lower_gamma(cfg.diversity_order, x)
    return _selection_cdf(cfg.diversity_order, x)


def normalized_sum_quantile(order: float, eps: float,
                            settings: RootSolveSettings = DEFAULT_ROOT_SETTINGS):
    """Quantile of a unit-scale gamma variate with shape ``order`` (may be non-integer)."""
    return invert_monotone_cdf(
        lambda x: regularized_lower_gamma(order, x), eps, bracket_hint=float(order), settings=settings
    )


def selection_factor(order: int, eps: float) -> float:
    """ln(1 / (1 - eps**(1/d))): the max-of-d-exponentials quantile at unit scale."""
    log_p = math.log(eps) / order
    p = math.exp(log_p)
    # 1 - p is exact via expm1 when p is near 1, and log1p keeps small p exact
    return -math.log1p(-p) if p < 0.5 else -math.log(-math.expm1(log_p))


def combiner_quantile(cfg: ChannelConfig, eps: float,
                      settings: RootSolveSettings = DEFAULT_ROOT_SETTINGS) -> SnrQuantile:
    """Exact SNR outage threshold F^-1(eps)."""
    _require_exact(cfg)
    eps = check_probability(eps)
    d = cfg.diversity_order
    if cfg.scheme.is_selection:
        return SnrQuantile(cfg.branch_snr * selection_factor(d, eps), QuantileMethod.CLOSED_FORM)
    root = normalized_sum_quantile(d, eps, settings)
    return SnrQuantile(cfg.branch_snr * root.x, QuantileMethod.NUMERIC_INVERSION,
                       root.residual, root.iterations)


def mean_combiner_snr(cfg: ChannelConfig):
    """Average combiner SNR; an ``(lower, upper)`` tuple for optimal MIMO."""
    if cfg.scheme is DiversityScheme.MIMO_OPTIMAL:
        return (cfg.branch_snr * max(cfg.m, cfg.n), cfg.branch_snr * cfg.m * cfg.n)
    d = cfg.diversity_order
    if cfg.scheme.is_sum:
        return d * cfg.branch_snr
    return cfg.branch_snr * harmonic_number(d)


def combiner_gain(cfg: ChannelConfig) -> float:
    """Ratio of mean combiner SNR to branch SNR (d or H_d)."""
    _require_exact(cfg)
    d = cfg.diversity_order
    return float(d) if cfg.scheme.is_sum else harmonic_number(d)


def config_for_combiner_snr(scheme, m: int, n: int, combiner_snr: float) -> ChannelConfig:
    """Build a config whose mean combiner SNR equals ``combiner_snr``.

    The branch SNR is back-solved with the exact gain (d for MRC/MRT, H_d for
    selection schemes).
    """
    probe = ChannelConfig(scheme, m, n, 1.0)
    combiner_snr = check_positive(combiner_snr, "combiner_snr")
    return probe.with_branch_snr(combiner_snr / combiner_gain(probe))


def ga_quantile(cfg: ChannelConfig, eps: float) -> SnrQuantile:
    """Central-limit (Gaussian) approximation of the MRC/MRT outage threshold.

    gamma0 ~= gbar * (d - sqrt(d) * Q^-1(eps)).  Raises
    :class:`GaInvalidRegimeError` when this would be negative, i.e. when
    ``d < Q^-1(eps)**2``.
    """
    if not cfg.scheme.is_sum:
        raise DomainError(f"Gaussian approximation applies to MRC/MRT only, not {cfg.scheme.value}")
    eps = check_probability(eps)
    d = cfg.diversity_order
    z = q_inverse(eps)
    root_d = math.sqrt(d)
    if root_d < z * (1.0 - 1e-12):
        raise GaInvalidRegimeError(
            f"GA needs d >= Q^-1(eps)^2 = {z * z:.4g}, got d={d}"
        )
    gamma0 = max(0.0, cfg.branch_snr * (d - root_d * z))
    return SnrQuantile(gamma0, QuantileMethod.GAUSSIAN_APPROX)
