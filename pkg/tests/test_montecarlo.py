import math

import numpy as np
import pytest

from outcap.errors import DomainError
from outcap.mimo_bounds import outage_capacity_bounds
from outcap.montecarlo import (
    THREADS_ENV,
    McSettings,
    SampleStats,
    capacity_from_estimate,
    draw_gains,
    empirical_quantile,
    ks_critical_value,
    ks_distance,
    largest_eigenvalue,
    mc_outage_capacity,
    sample_combiner_snr,
)
from outcap.numerics import harmonic_number
from outcap.snr_models import ChannelConfig, combiner_cdf, combiner_quantile

POWER_ITER_TOL = 1e-8
MEAN_SIGMAS = 3.0
SINGLE_BRANCH_C = math.log2(1 + math.log(1 / 0.9))


def cdf_of(cfg):
    return lambda g: combiner_cdf(cfg, g)


class TestSettings:
    @pytest.mark.parametrize("kw", [dict(samples=0), dict(chunks=0), dict(samples=5, chunks=6),
                                    dict(seed=-1), dict(seed=2**64), dict(power_iter_tol=0)])
    def test_rejects(self, kw):
        with pytest.raises(DomainError):
            McSettings(**kw)


class TestSampling:
    def test_gain_variance(self):
        h = draw_gains(np.random.default_rng(1), 200_000, 1, 1)
        assert h.shape == (200_000, 1, 1)
        assert np.mean(np.abs(h) ** 2) == pytest.approx(1.0, abs=0.01)
        assert np.var(h.real) == pytest.approx(0.5, abs=0.01)
        assert abs(np.mean(h)) < 0.01

    def test_deterministic_per_seed_and_chunks(self):
        cfg = ChannelConfig("mrc", 4)
        s = McSettings(samples=10_000, seed=7, chunks=3)
        a = sample_combiner_snr(cfg, s)
        b = sample_combiner_snr(cfg, s)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, sample_combiner_snr(cfg, McSettings(samples=10_000, seed=8, chunks=3)))

    def test_thread_count_does_not_change_samples(self, monkeypatch):
        cfg = ChannelConfig("stc", 3, 2)
        s = McSettings(samples=20_000, seed=3, chunks=4)
        monkeypatch.setenv(THREADS_ENV, "1")
        serial = sample_combiner_snr(cfg, s)
        monkeypatch.setenv(THREADS_ENV, "4")
        assert np.array_equal(serial, sample_combiner_snr(cfg, s))

    def test_estimate_bit_identical(self):
        cfg = ChannelConfig("sc", 10)
        s = McSettings(samples=5_000, seed=11)
        est = [empirical_quantile(sample_combiner_snr(cfg, s), 0.1, seed=s.seed, cdf=cdf_of(cfg)) for _ in range(2)]
        assert est[0] == est[1]

    def test_scheme_equivalences_share_samples(self):
        s = McSettings(samples=2_000, seed=5)
        assert np.array_equal(sample_combiner_snr(ChannelConfig("mrc", 6), s),
                              sample_combiner_snr(ChannelConfig("mrt", 1, 6), s))
        assert np.array_equal(sample_combiner_snr(ChannelConfig("sc", 6), s),
                              sample_combiner_snr(ChannelConfig("st", 1, 6), s))

    def test_single_branch_is_unit_exponential(self):
        x = sample_combiner_snr(ChannelConfig("mrc", 1), McSettings(samples=200_000, seed=2))
        assert x.mean() == pytest.approx(1.0, abs=MEAN_SIGMAS / math.sqrt(x.size))
        assert ks_distance(x, lambda g: 1 - np.exp(-g)) < ks_critical_value(x.size)

    def test_vector_mimo_equals_norm(self):
        s = McSettings(samples=3_000, seed=9)
        mimo = sample_combiner_snr(ChannelConfig("mimo-opt", 5, 1), s)
        mrc = sample_combiner_snr(ChannelConfig("mrc", 5), s)
        np.testing.assert_allclose(mimo, mrc, rtol=1e-12)

    def test_stc_mean(self):
        x = sample_combiner_snr(ChannelConfig("stc", 3, 2), McSettings(samples=400_000, seed=4))
        stderr = x.std(ddof=1) / math.sqrt(x.size)
        assert abs(x.mean() - 2.45) < MEAN_SIGMAS * stderr

    def test_branch_snr_scales(self):
        s = McSettings(samples=1_000, seed=1)
        a = sample_combiner_snr(ChannelConfig("sc", 3, 1, 1.0), s)
        b = sample_combiner_snr(ChannelConfig("sc", 3, 1, 4.0), s)
        np.testing.assert_allclose(b, 4 * a, rtol=1e-15)


class TestPowerIteration:
    @staticmethod
    def _with_singular_values(sv, seed):
        rng = np.random.default_rng(seed)
        k = len(sv)
        u, _ = np.linalg.qr(rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k)))
        v, _ = np.linalg.qr(rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k)))
        return u @ np.diag(sv) @ v.conj().T

    @pytest.mark.parametrize("sv", [(2.0, 1.0), (3.0, 0.5), (1.5, 1.2, 0.3), (4.0, 2.0, 1.0)])
    def test_known_spectrum(self, sv):
        h = self._with_singular_values(sv, seed=len(sv))
        lam, ok = largest_eigenvalue(h.conj().T @ h)
        assert ok
        assert lam == pytest.approx(max(sv) ** 2, rel=POWER_ITER_TOL)

    def test_real_symmetric(self):
        lam, ok = largest_eigenvalue(np.array([[2.0, 1.0], [1.0, 2.0]]))
        assert ok and lam == pytest.approx(3.0, rel=1e-12)

    def test_batched_matches_eigvalsh(self):
        h = draw_gains(np.random.default_rng(0), 50, 6, 4)
        gram = np.matmul(h.conj().transpose(0, 2, 1), h)
        lam, ok = largest_eigenvalue(gram, tol=1e-13, max_iter=5000)
        ref = np.linalg.eigvalsh(gram)[:, -1]
        np.testing.assert_allclose(lam[ok], ref[ok], rtol=1e-8)
        assert ok.mean() > 0.9

    def test_fallback_counted(self):
        stats = SampleStats()
        s = McSettings(samples=200, seed=1, power_iter_max=2)
        x = sample_combiner_snr(ChannelConfig("mimo-opt", 8, 8), s, stats)
        assert stats.power_iter_fallbacks > 0
        exact = McSettings(samples=200, seed=1, power_iter_tol=1e-14, power_iter_max=10_000)
        np.testing.assert_allclose(x, sample_combiner_snr(ChannelConfig("mimo-opt", 8, 8), exact), rtol=1e-8)


class TestEmpiricalQuantile:
    def test_degenerate(self):
        est = empirical_quantile(np.full(1000, 2.5), 0.3)
        assert est.quantile_gamma0 == 2.5
        assert est.ci_low == est.ci_high == 2.5 and est.quantile_ci_halfwidth == 0

    def test_nearest_rank(self):
        est = empirical_quantile(np.arange(1, 101, dtype=float), 0.1)
        assert est.quantile_gamma0 == 10.0
        assert est.ci_low <= 10.0 <= est.ci_high

    def test_mrc_two_branch_example(self):
        cfg = ChannelConfig("mrc", 2)
        est = empirical_quantile(sample_combiner_snr(cfg, McSettings(samples=10**6, seed=42)), 0.1)
        target = combiner_quantile(cfg, 0.1).gamma0
        assert est.ci_low <= target <= est.ci_high
        assert est.quantile_ci_halfwidth < 0.003

    def test_reliability_flag(self):
        x = np.random.default_rng(0).exponential(size=100)
        assert empirical_quantile(x, 0.5).ci_reliable
        assert not empirical_quantile(x[:10], 0.5).ci_reliable
        assert not empirical_quantile(x, 1e-3).ci_reliable

    def test_empty(self):
        with pytest.raises(DomainError):
            empirical_quantile([], 0.1)

    def test_coverage_over_seeds(self):
        """Analytic quantile inside the 95% CI in >= 93% of (scheme, d, eps, seed) cells.

        Runs at n = 1e4 per cell to keep the suite fast; the CI is exact for
        any n so coverage does not depend on the sample size.
        """
        cells, hits = 0, 0
        for scheme in ("mrc", "sc", "mrt", "st", "stc"):
            for d in (1, 2, 10, 100):
                if scheme in ("mrt", "st"):
                    cfg = ChannelConfig(scheme, 1, d)
                elif scheme == "stc":
                    cfg = ChannelConfig(scheme, d, 1)
                else:
                    cfg = ChannelConfig(scheme, d)
                for seed in range(20):
                    x = sample_combiner_snr(cfg, McSettings(samples=10_000, seed=1000 + seed))
                    for eps in (1e-2, 1e-1):
                        est = empirical_quantile(x, eps)
                        target = combiner_quantile(cfg, eps).gamma0
                        cells += 1
                        hits += est.ci_low <= target <= est.ci_high
        assert hits / cells >= 0.93


class TestKsDistance:
    def test_matched_cdf(self):
        cfg = ChannelConfig("mrc", 10)
        x = sample_combiner_snr(cfg, McSettings(samples=10**6, seed=42))
        assert ks_distance(x, cdf_of(cfg)) < 0.00163

    def test_constant_samples(self):
        assert ks_distance(np.full(100, 1.0), lambda g: 1 - np.exp(-g)) >= 0.5

    def test_cross_scheme_negative_control(self):
        x = sample_combiner_snr(ChannelConfig("mrc", 10), McSettings(samples=10**5, seed=1))
        d = ks_distance(x, cdf_of(ChannelConfig("sc", 10)))
        assert d > 50 * ks_critical_value(x.size)

    def test_range(self):
        x = np.random.default_rng(0).exponential(size=50)
        assert 0 <= ks_distance(x, lambda g: 1 - np.exp(-g)) <= 1

    def test_critical_value(self):
        assert ks_critical_value(10**6) == pytest.approx(0.00163)


class TestCapacity:
    def test_single_branch(self):
        cap = mc_outage_capacity(ChannelConfig("mrc", 1), 0.1, McSettings(samples=10**6, seed=42))
        assert cap.ci_low <= SINGLE_BRANCH_C <= cap.ci_high
        assert cap.reliable

    def test_mimo_within_bounds(self):
        cfg = ChannelConfig("mimo-opt", 100, 2)
        cap = mc_outage_capacity(cfg, 0.1, McSettings(samples=10**4, seed=42))
        rep = outage_capacity_bounds(cfg, 0.1)
        assert rep.capacity_lower <= cap.value <= rep.capacity_upper

    def test_unreliable_propagates(self):
        cap = mc_outage_capacity(ChannelConfig("mrc", 2), 0.5, McSettings(samples=10, seed=1))
        assert not cap.reliable
        cap = mc_outage_capacity(ChannelConfig("mrc", 2), 0.5, McSettings(samples=100, seed=1))
        assert cap.reliable

    def test_stderr_from_ci(self):
        est = empirical_quantile(np.linspace(0, 1, 1001), 0.5)
        cap = capacity_from_estimate(est)
        assert cap.stderr == pytest.approx((cap.ci_high - cap.ci_low) / (2 * 1.959963984540054))
