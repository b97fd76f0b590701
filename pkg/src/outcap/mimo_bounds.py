"""Outage-capacity bounds and large-array benchmark for optimal MIMO beamforming.

With unit-variance entries, sigma_max^2 of H lies between ||H||_F^2 / min(M, N)
and ||H||_F^2, and ||H||_F^2 is a sum of MN unit-mean exponentials.  Both
bounds are therefore MRC channels of diversity MN, at link SNR rho (upper) and
rho / min(M, N) (lower).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

from outcap._validation import check_probability
from outcap.errors import AsymptoticRegimeError, DomainError
from outcap.outage import awgn_capacity
from outcap.snr_models import ChannelConfig, DiversityScheme, normalized_sum_quantile

ASYMPTOTIC_ANTENNA_FLOOR = 16


class EdgeConstant(str, enum.Enum):
    # sigma_max^2 -> c (1 + sqrt(M/N))^2 N with c = 2 (doubled) or 1 (Marchenko-Pastur edge)
    DOUBLED = "doubled"
    MARCHENKO_PASTUR = "marchenko_pastur"

    @property
    def factor(self) -> float:
        return 2.0 if self is EdgeConstant.DOUBLED else 1.0


@dataclass(frozen=True)
class SnrBounds:
    per_branch_upper: float
    per_branch_lower: float
    mean_lower: float
    mean_upper: float


@dataclass(frozen=True)
class MimoBoundReport:
    mean_lower: float
    mean_upper: float
    per_branch_upper: float
    per_branch_lower: float
    capacity_lower: float
    capacity_upper: float
    benchmark_lower: float
    benchmark_upper: float
    asymptotic_benchmark: Optional[float] = None
    edge_constant: Optional[EdgeConstant] = None


def _require_mimo(cfg: ChannelConfig):
    if cfg.scheme is not DiversityScheme.MIMO_OPTIMAL:
        raise DomainError(f"expected scheme mimo-opt, got {cfg.scheme.value}")


def snr_bounds(cfg: ChannelConfig) -> SnrBounds:
    _require_mimo(cfg)
    rho = cfg.branch_snr
    return SnrBounds(
        per_branch_upper=rho,
        per_branch_lower=rho / min(cfg.m, cfg.n),
        mean_lower=rho * max(cfg.m, cfg.n),
        mean_upper=rho * cfg.m * cfg.n,
    )


def frobenius_mean(cfg: ChannelConfig) -> int:
    """E||H||_F^2 for unit-variance entries."""
    _require_mimo(cfg)
    return cfg.m * cfg.n


def effective_diversity(cfg: ChannelConfig, edge_constant="doubled") -> float:
    """Large-array limit of sigma_max^2, i.e. the equivalent MRC branch count."""
    _require_mimo(cfg)
    y = cfg.m / cfg.n
    return EdgeConstant(edge_constant).factor * (1.0 + math.sqrt(y)) ** 2 * cfg.n


def asymptotic_benchmark(
    cfg: ChannelConfig,
    eps: float,
    edge_constant="doubled",
    integer_order: bool = False,
    floor: int = ASYMPTOTIC_ANTENNA_FLOOR,
) -> float:
    """Outage capacity of MRC with the effective diversity at link SNR rho.

    The effective order is used as a real gamma shape unless
    ``integer_order`` rounds it up to a whole number of branches.
    """
    _require_mimo(cfg)
    eps = check_probability(eps)
    if min(cfg.m, cfg.n) < floor:
        raise AsymptoticRegimeError(
            f"asymptotic benchmark needs m, n >= {floor}, got m={cfg.m}, n={cfg.n}"
        )
    order = effective_diversity(cfg, edge_constant)
    if integer_order:
        order = math.ceil(order - 1e-9)
    return awgn_capacity(cfg.branch_snr * normalized_sum_quantile(order, eps).x)


def outage_capacity_bounds(
    cfg: ChannelConfig,
    eps: float,
    edge_constant=None,
    integer_order: bool = False,
) -> MimoBoundReport:
    """Lower/upper outage-capacity bounds; adds the asymptotic benchmark when
    ``edge_constant`` is given and both antenna counts clear the floor."""
    b = snr_bounds(cfg)
    eps = check_probability(eps)
    # one quantile serves both bounds: they differ only in the scale parameter
    x0 = normalized_sum_quantile(cfg.m * cfg.n, eps).x
    asym = None
    if edge_constant is not None:
        edge_constant = EdgeConstant(edge_constant)
        asym = asymptotic_benchmark(cfg, eps, edge_constant, integer_order)
    return MimoBoundReport(
        mean_lower=b.mean_lower,
        mean_upper=b.mean_upper,
        per_branch_upper=b.per_branch_upper,
        per_branch_lower=b.per_branch_lower,
        capacity_lower=awgn_capacity(b.per_branch_lower * x0),
        capacity_upper=awgn_capacity(b.per_branch_upper * x0),
        benchmark_lower=awgn_capacity(b.mean_lower),
        benchmark_upper=awgn_capacity(b.mean_upper),
        asymptotic_benchmark=asym,
        edge_constant=edge_constant,
    )
