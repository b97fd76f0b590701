"""Seeded Monte Carlo oracle for the analytic combiner-SNR models.

Channel gains are drawn from first principles (unit-variance circularly
symmetric complex Gaussians) and combined per scheme; nothing here calls the
analytic CDFs except :func:`ks_distance`, which compares against them.

Reproducibility contract: a given ``(seed, chunks)`` pair always yields the
same samples.  Different chunk counts use different substreams and are not
expected to agree sample-for-sample.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.stats import binom

from outcap._validation import check_count, check_probability
from outcap.errors import DomainError
from outcap.snr_models import ChannelConfig, DiversityScheme

log = logging.getLogger(__name__)

THREADS_ENV = "OUTCAP_MC_THREADS"
_BLOCK_ENTRIES = 1 << 20


@dataclass(frozen=True)
class McSettings:
    samples: int = 100_000
    seed: int = 42
    chunks: int = 1
    power_iter_tol: float = 1e-10
    power_iter_max: int = 500

    def __post_init__(self):
        check_count(self.samples, "samples", 1)
        check_count(self.chunks, "chunks", 1)
        if not 0 <= self.seed < 2**64:
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.chunks > self.samples:
            raise DomainError("chunks cannot exceed samples")
        if not self.power_iter_tol > 0:
            raise DomainError("power_iter_tol must be positive")
        check_count(self.power_iter_max, "power_iter_max", 1)


@dataclass(frozen=True)
class McEstimate:
    quantile_gamma0: float
    ci_low: float
    ci_high: float
    quantile_ci_halfwidth: float
    ci_reliable: bool
    sample_mean: float
    sample_mean_stderr: float
    samples_used: int
    eps: float
    seed: Optional[int] = None
    ks_statistic: Optional[float] = None


@dataclass(frozen=True)
class McCapacity:
    value: float
    ci_low: float
    ci_high: float
    stderr: float
    reliable: bool


@dataclass
class SampleStats:
    """Bookkeeping from a sampling run."""

    power_iter_fallbacks: int = 0


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def draw_gains(rng: np.random.Generator, batch: int, m: int, n: int) -> np.ndarray:
    """(batch, m, n) i.i.d. CN(0, 1) gains: E|h|^2 = 1, variance 1/2 per component."""
    parts = rng.standard_normal((batch, m, n, 2))
    return (parts[..., 0] + 1j * parts[..., 1]) * math.sqrt(0.5)


def largest_eigenvalue(gram: np.ndarray, tol: float = 1e-10, max_iter: int = 500):
    """Largest eigenvalue of a batch of Hermitian PSD matrices by power iteration.

    Starts from the all-ones vector and stops when the Rayleigh quotient's
    relative change drops below ``tol``.  Returns ``(values, converged)``.
    """
    gram = np.asarray(gram)
    if gram.ndim == 2:
        vals, ok = largest_eigenvalue(gram[None], tol, max_iter)
        return vals[0], ok[0]
    batch, k, _ = gram.shape
    v = np.ones((batch, k), dtype=gram.dtype) / math.sqrt(k)
    lam = np.zeros(batch)
    converged = np.zeros(batch, dtype=bool)
    for _ in range(max_iter):
        w = np.matmul(gram, v[:, :, None])[:, :, 0]
        lam_new = np.real(np.sum(v.conj() * w, axis=1))
        norm = np.linalg.norm(w, axis=1)
        norm[norm == 0] = 1.0
        v = w / norm[:, None]
        converged = np.abs(lam_new - lam) <= tol * np.abs(lam_new)
        lam = lam_new
        if converged.all():
            break
    return lam, converged


def _sigma_max_sq(h: np.ndarray, settings: McSettings, stats: SampleStats) -> np.ndarray:
    # work with the smaller Gram matrix; both share the nonzero spectrum
    if h.shape[1] >= h.shape[2]:
        gram = np.matmul(h.conj().transpose(0, 2, 1), h)
    else:
        gram = np.matmul(h, h.conj().transpose(0, 2, 1))
    lam, ok = largest_eigenvalue(gram, settings.power_iter_tol, settings.power_iter_max)
    if not ok.all():
        bad = ~ok
        lam[bad] = np.linalg.eigvalsh(gram[bad])[:, -1]
        stats.power_iter_fallbacks += int(bad.sum())
    return lam


def _gain_shape(cfg: ChannelConfig) -> tuple[int, int]:
    if cfg.scheme in (DiversityScheme.MRC, DiversityScheme.SC):
        return cfg.m, 1
    if cfg.scheme in (DiversityScheme.MRT, DiversityScheme.ST):
        return 1, cfg.n
    return cfg.m, cfg.n


def _sample_chunk(cfg: ChannelConfig, count: int, rng: np.random.Generator,
                  settings: McSettings, stats: SampleStats) -> np.ndarray:
    m, n = _gain_shape(cfg)
    block = max(1, _BLOCK_ENTRIES // (m * n))
    out = np.empty(count)
    for start in range(0, count, block):
        size = min(block, count - start)
        h = draw_gains(rng, size, m, n)
        if cfg.scheme is DiversityScheme.MIMO_OPTIMAL:
            snr = _sigma_max_sq(h, settings, stats)
        else:
            power = (h.real ** 2 + h.imag ** 2).reshape(size, m * n)
            snr = power.sum(axis=1) if cfg.scheme.is_sum else power.max(axis=1)
        out[start:start + size] = cfg.branch_snr * snr
    return out


def _chunk_sizes(samples: int, chunks: int) -> list[int]:
    base, extra = divmod(samples, chunks)
    return [base + (1 if i < extra else 0) for i in range(chunks)]


def _thread_count(chunks: int) -> int:
    env = os.environ.get(THREADS_ENV)
    threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(threads, chunks))


def sample_combiner_snr(cfg: ChannelConfig, settings: McSettings,
                        stats: Optional[SampleStats] = None) -> np.ndarray:
    """Draw ``settings.samples`` combiner SNRs (linear) for ``cfg``.

    Each chunk gets its own generator spawned from ``SeedSequence(seed)``;
    chunks may run on threads but are concatenated in chunk order.
    """
    stats = stats if stats is not None else SampleStats()
    seeds = np.random.SeedSequence(settings.seed).spawn(settings.chunks)
    sizes = _chunk_sizes(settings.samples, settings.chunks)
    chunk_stats = [SampleStats() for _ in sizes]

    def run(i):
        rng = np.random.Generator(np.random.Philox(seeds[i]))
        return _sample_chunk(cfg, sizes[i], rng, settings, chunk_stats[i])

    threads = _thread_count(settings.chunks)
    if threads == 1:
        parts = [run(i) for i in range(settings.chunks)]
    else:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(run, range(settings.chunks)))
    stats.power_iter_fallbacks += sum(s.power_iter_fallbacks for s in chunk_stats)
    if stats.power_iter_fallbacks:
        log.info("%d samples resolved by direct eigensolve", stats.power_iter_fallbacks)
    return np.concatenate(parts)


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------

def _order_stat_ci(n: int, eps: float, level: float) -> tuple[int, int]:
    # 1-based ranks (l, u) with P(X_(l) <= xi_eps < X_(u)) >= level
    alpha = 1.0 - level
    lo = int(binom.ppf(alpha / 2, n, eps))
    hi = int(binom.ppf(1 - alpha / 2, n, eps)) + 1
    return max(lo, 1), min(hi, n)


def empirical_quantile(samples, eps: float, level: float = 0.95,
                       seed: Optional[int] = None,
                       cdf: Optional[Callable] = None) -> McEstimate:
    """Nearest-rank quantile at rank ceil(eps n) with a distribution-free CI.

    The CI is flagged unreliable when ``n < ceil(10 / eps)``.  When ``cdf`` is
    given the KS distance against it is included.
    """
    eps = check_probability(eps)
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise DomainError("empty sample set")
    rank = min(max(math.ceil(eps * n), 1), n)
    q = x[rank - 1]
    lo, hi = _order_stat_ci(n, eps, level)
    ci_low, ci_high = x[lo - 1], x[hi - 1]
    return McEstimate(
        quantile_gamma0=float(q),
        ci_low=float(ci_low),
        ci_high=float(ci_high),
        quantile_ci_halfwidth=float(0.5 * (ci_high - ci_low)),
        ci_reliable=n >= math.ceil(10.0 / eps),
        sample_mean=float(x.mean()),
        sample_mean_stderr=float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
        samples_used=n,
        eps=eps,
        seed=seed,
        ks_statistic=_ks_sorted(x, cdf) if cdf is not None else None,
    )


def _ks_sorted(x: np.ndarray, cdf: Callable) -> float:
    n = x.size
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n), 0.0))


def ks_distance(samples, analytic_cdf: Callable) -> float:
    """Sup-norm distance between the empirical CDF and ``analytic_cdf``.

    ``analytic_cdf`` must accept a sorted numpy array.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size == 0:
        raise DomainError("empty sample set")
    return _ks_sorted(x, analytic_cdf)


def ks_critical_value(n: int, level: float = 0.99) -> float:
    """Asymptotic one-sample KS critical value (1.63/sqrt(n) at 99%)."""
    coeff = {0.90: 1.22, 0.95: 1.36, 0.99: 1.63}[level]
    return coeff / math.sqrt(n)


def _log2_1p(x: float) -> float:
    return math.log2(1.0 + x)


def capacity_from_estimate(est: McEstimate, z: float = 1.959963984540054) -> McCapacity:
    """Map a quantile estimate through log2(1 + .); stderr is the CI width over 2z."""
    lo, hi = _log2_1p(est.ci_low), _log2_1p(est.ci_high)
    return McCapacity(
        value=_log2_1p(est.quantile_gamma0),
        ci_low=lo,
        ci_high=hi,
        stderr=(hi - lo) / (2.0 * z),
        reliable=est.ci_reliable,
    )


def mc_outage_capacity(cfg: ChannelConfig, eps: float, settings: McSettings) -> McCapacity:
    samples = sample_combiner_snr(cfg, settings)
    return capacity_from_estimate(empirical_quantile(samples, eps, seed=settings.seed))
