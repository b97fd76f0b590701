"""Outage capacity of SIMO/MISO diversity channels and its AWGN benchmarks.

Capacities are in b/s/Hz (log base 2).  Two AWGN references are reported:
one at the branch SNR and one at the mean combiner SNR, the latter removing
the array gain so the gap tends to zero from below as diversity grows.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from outcap._validation import check_nonnegative, check_probability
from outcap.errors import DomainError
from outcap.numerics import harmonic_number, q_inverse
from outcap.snr_models import (
    ChannelConfig,
    DiversityScheme,
    QuantileMethod,
    combiner_gain,
    combiner_quantile,
    ga_quantile,
    mean_combiner_snr,
    selection_factor,
)

# machine-checkable stand-ins for ">> 1" and "<< 1"
HIGH_SNR_THRESHOLD = 10.0
LOW_SNR_THRESHOLD = 0.1


class Method(str, enum.Enum):
    EXACT = "exact"
    GAUSSIAN_APPROX = "gaussian_approx"


class Regime(str, enum.Enum):
    HIGH_SNR = "high_snr"
    LOW_SNR = "low_snr"


@dataclass(frozen=True)
class CapacityReport:
    outage_capacity: float
    benchmark_branch: float
    benchmark_combiner: float
    gap_vs_branch: float
    gap_vs_combiner: float
    ratio_vs_combiner: float
    method: QuantileMethod
    gamma0: float
    branch_snr: float
    combiner_snr: float


@dataclass(frozen=True)
class ValidityFlag:
    name: str
    value: float
    threshold: float
    held: bool


@dataclass(frozen=True)
class ApproximationReport:
    regime: Regime
    value: float
    validity_flags: tuple[ValidityFlag, ...]

    @property
    def valid(self) -> bool:
        return all(flag.held for flag in self.validity_flags)


def awgn_capacity(gamma: float) -> float:
    """log2(1 + gamma)."""
    gamma = check_nonnegative(gamma, "gamma")
    return math.log2(1.0 + gamma)


def _quantile(cfg: ChannelConfig, eps: float, method):
    method = Method(method)
    if method is Method.GAUSSIAN_APPROX:
        return ga_quantile(cfg, eps)
    return combiner_quantile(cfg, eps)


def _reject_mimo(cfg: ChannelConfig):
    if cfg.scheme is DiversityScheme.MIMO_OPTIMAL:
        raise DomainError("optimal MIMO outage capacity is bounded, not exact; use outcap.mimo_bounds")


def outage_capacity(cfg: ChannelConfig, eps: float, quantile_method="exact") -> CapacityReport:
    """Outage capacity C(F^-1(eps)) with gap and ratio against both AWGN benchmarks."""
    _reject_mimo(cfg)
    eps = check_probability(eps)
    q = _quantile(cfg, eps, quantile_method)
    c_eps = awgn_capacity(q.gamma0)
    gbar_c = mean_combiner_snr(cfg)
    c_branch = awgn_capacity(cfg.branch_snr)
    c_comb = awgn_capacity(gbar_c)
    return CapacityReport(
        outage_capacity=c_eps,
        benchmark_branch=c_branch,
        benchmark_combiner=c_comb,
        gap_vs_branch=c_eps - c_branch,
        gap_vs_combiner=c_eps - c_comb,
        ratio_vs_combiner=c_eps / c_comb,
        method=q.method,
        gamma0=q.gamma0,
        branch_snr=cfg.branch_snr,
        combiner_snr=gbar_c,
    )


def gap_vs_branch_benchmark(cfg: ChannelConfig, eps: float, method="exact") -> float:
    return outage_capacity(cfg, eps, method).gap_vs_branch


def gap_vs_combiner_benchmark(cfg: ChannelConfig, eps: float, method="exact") -> float:
    """C_eps - C(mean combiner SNR).

    To hold the combiner SNR fixed across diversity orders build ``cfg`` with
    :func:`outcap.snr_models.config_for_combiner_snr`.
    """
    return outage_capacity(cfg, eps, method).gap_vs_combiner


def ratio_vs_combiner_benchmark(cfg: ChannelConfig, eps: float, method="exact") -> float:
    return outage_capacity(cfg, eps, method).ratio_vs_combiner


def combiner_threshold_factor(cfg: ChannelConfig, eps: float, method="exact") -> float:
    """gamma0 / mean combiner SNR, independent of the SNR level.

    For SC this is (1/H_d) ln(1/(1 - eps**(1/d))); for GA-MRC it is
    1 - Q^-1(eps)/sqrt(d).  Its log2 is the high-SNR limit of the combiner gap
    and the value itself is the low-SNR limit of the combiner ratio.
    """
    _reject_mimo(cfg)
    unit = cfg.with_branch_snr(1.0)
    return _quantile(unit, eps, method).gamma0 / combiner_gain(unit)


def selection_combiner_factor(order: int, eps: float) -> float:
    """(1/H_d) ln(1/(1 - eps**(1/d))); tends to 1 as d grows."""
    eps = check_probability(eps)
    return selection_factor(order, eps) / harmonic_number(order)


def gap_limit_high_snr(cfg: ChannelConfig, eps: float, method="exact") -> float:
    """Combiner gap as the mean combiner SNR tends to infinity."""
    return math.log2(combiner_threshold_factor(cfg, eps, method))


def ratio_limit_low_snr(cfg: ChannelConfig, eps: float, method="exact") -> float:
    """Combiner ratio as the mean combiner SNR tends to zero."""
    return combiner_threshold_factor(cfg, eps, method)


def _flags(regime: Regime, gbar_c: float, factor: float) -> tuple[ValidityFlag, ...]:
    shifted = gbar_c * factor
    if regime is Regime.HIGH_SNR:
        return (
            ValidityFlag("combiner_snr>>1", gbar_c, HIGH_SNR_THRESHOLD, gbar_c > HIGH_SNR_THRESHOLD),
            ValidityFlag("threshold_snr>>1", shifted, HIGH_SNR_THRESHOLD, shifted > HIGH_SNR_THRESHOLD),
        )
    return (
        ValidityFlag("combiner_snr<<1", gbar_c, LOW_SNR_THRESHOLD, gbar_c < LOW_SNR_THRESHOLD),
        ValidityFlag("threshold_snr<<1", shifted, LOW_SNR_THRESHOLD, shifted < LOW_SNR_THRESHOLD),
    )


def asymptotic_gap(cfg: ChannelConfig, eps: float, regime) -> ApproximationReport:
    """Closed-form large-diversity approximations.

    high_snr returns a capacity gap (b/s/Hz):
      MRC/MRT  -Q^-1(eps) / (sqrt(d) ln 2)
      SC/ST/STC  -ln(-ln eps) / (ln d ln 2)
    low_snr returns a capacity ratio:
      MRC/MRT  1 - Q^-1(eps)/sqrt(d)
      SC/ST/STC  (1/H_d) ln(1/(1 - eps**(1/d)))
    The validity flags record whether the SNR conditions behind each formula
    held at the config's mean combiner SNR.
    """
    _reject_mimo(cfg)
    eps = check_probability(eps)
    regime = Regime(regime)
    d = cfg.diversity_order
    gbar_c = mean_combiner_snr(cfg)
    if cfg.scheme.is_sum:
        factor = 1.0 - q_inverse(eps) / math.sqrt(d)
        if regime is Regime.HIGH_SNR:
            value = -q_inverse(eps) / (math.sqrt(d) * math.log(2.0))
        else:
            value = factor
    else:
        factor = selection_combiner_factor(d, eps)
        if regime is Regime.HIGH_SNR:
            if d < 2:
                raise DomainError("selection high-SNR approximation needs d >= 2")
            value = -math.log(-math.log(eps)) / (math.log(d) * math.log(2.0))
        else:
            value = factor
    return ApproximationReport(regime, value, _flags(regime, gbar_c, factor))
