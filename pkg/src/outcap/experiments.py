"""Parameter sweeps to CSV and the cross-module validation suite."""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field, fields
from typing import Optional, TextIO

import numpy as np

from outcap import mimo_bounds, montecarlo, outage, snr_models
from outcap.errors import AsymptoticRegimeError, DomainError, GaInvalidRegimeError
from outcap.numerics import EULER_GAMMA, regularized_lower_gamma
from outcap.snr_models import ChannelConfig, DiversityScheme

SIMO_QUANTITIES = ("outage_capacity", "gap_branch", "gap_combiner", "ratio_combiner")
MIMO_QUANTITIES = ("bounds", "asymptotic")
ALL_QUANTITIES = SIMO_QUANTITIES + ("ga_variant",) + MIMO_QUANTITIES

_REPORT_FIELDS = {
    "outage_capacity": "outage_capacity",
    "gap_branch": "gap_vs_branch",
    "gap_combiner": "gap_vs_combiner",
    "ratio_combiner": "ratio_vs_combiner",
}
_BOUND_COLUMNS = ("capacity_lower", "capacity_upper", "mean_lower", "mean_upper",
                  "benchmark_lower", "benchmark_upper")


class SnrReference(str, enum.Enum):
    BRANCH = "branch"
    COMBINER = "combiner"
    LINK = "link"


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(value: float) -> float:
    return 10.0 * math.log10(value)


def format_number(value) -> str:
    if value is None:
        return ""
    return f"{value:.9g}"


def _split(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


@dataclass(frozen=True)
class SweepSpec:
    """One swept variable over a grid, everything else held fixed.

    The grid is either ``grid`` (explicit values) or ``start/stop/points`` with
    ``spacing`` linear or log.  Antenna grids are rounded to integers and
    de-duplicated.
    """

    scheme: str = "mrc"
    variable: str = "m"
    grid: Optional[tuple[float, ...]] = None
    start: Optional[float] = None
    stop: Optional[float] = None
    points: Optional[int] = None
    spacing: str = "linear"
    m: int = 1
    n: int = 1
    snr_db: float = 0.0
    snr_ref: str = "branch"
    eps: tuple[float, ...] = (0.1,)
    outputs: tuple[str, ...] = ("outage_capacity",)
    edge_constant: str = "doubled"

    def __post_init__(self):
        scheme = DiversityScheme(self.scheme)
        if self.variable not in ("m", "n", "snr_db"):
            raise DomainError(f"variable must be m, n or snr_db, got {self.variable!r}")
        if self.spacing not in ("linear", "log"):
            raise DomainError(f"spacing must be linear or log, got {self.spacing!r}")
        ref = SnrReference(self.snr_ref)
        if (ref is SnrReference.LINK) != (scheme is DiversityScheme.MIMO_OPTIMAL):
            raise DomainError("snr_ref=link is for mimo-opt, and mimo-opt needs snr_ref=link")
        if not self.eps:
            raise DomainError("eps list is empty")
        for q in self.outputs:
            if q not in ALL_QUANTITIES:
                raise DomainError(f"unknown output {q!r}")
            if scheme is DiversityScheme.MIMO_OPTIMAL and q not in MIMO_QUANTITIES:
                raise DomainError(f"{q} is not available for mimo-opt")
            if scheme is not DiversityScheme.MIMO_OPTIMAL and q in MIMO_QUANTITIES:
                raise DomainError(f"{q} is only available for mimo-opt")
            if q == "ga_variant" and not scheme.is_sum:
                raise DomainError("ga_variant needs an MRC/MRT scheme")
        if not self.outputs:
            raise DomainError("no outputs requested")
        if (self.grid is None) == (self.start is None):
            raise DomainError("give either an explicit grid or start/stop/points")
        raw = self.raw_grid()
        if len(raw) == 0:
            raise DomainError("grid is empty")
        if any(b <= a for a, b in zip(raw, raw[1:])):
            raise DomainError("grid must be strictly increasing")
        if self.spacing == "log" and self.grid is None and raw[0] <= 0:
            raise DomainError("log spacing needs positive endpoints")

    def raw_grid(self) -> list[float]:
        if self.grid is not None:
            return [float(v) for v in self.grid]
        if self.points is None or self.points < 1:
            raise DomainError("points must be >= 1")
        if self.points == 1:
            return [float(self.start)]
        if self.spacing == "log":
            if self.start <= 0 or self.stop <= 0:
                raise DomainError("log spacing needs positive endpoints")
            values = np.logspace(math.log10(self.start), math.log10(self.stop), self.points)
        else:
            values = np.linspace(self.start, self.stop, self.points)
        return [float(v) for v in values]

    def values(self) -> list:
        raw = self.raw_grid()
        if self.variable == "snr_db":
            return raw
        out: list[int] = []
        for v in raw:
            k = max(1, int(round(v)))
            if not out or k > out[-1]:
                out.append(k)
        return out

    # config-file round trip -------------------------------------------------

    def to_config(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            if isinstance(value, tuple):
                value = ",".join(repr(v) if isinstance(v, float) else str(v) for v in value)
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_mapping(cls, mapping: dict) -> "SweepSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(mapping) - known
        if unknown:
            raise DomainError(f"unknown sweep keys: {sorted(unknown)}")
        kw = {}
        for key, value in mapping.items():
            if value is None:
                continue
            if key in ("grid", "eps"):
                kw[key] = tuple(float(v) for v in (_split(value) if isinstance(value, str) else value))
            elif key == "outputs":
                kw[key] = tuple(_split(value) if isinstance(value, str) else value)
            elif key in ("start", "stop", "snr_db"):
                kw[key] = float(value)
            elif key in ("points", "m", "n"):
                kw[key] = int(value)
            else:
                kw[key] = str(value)
        return cls(**kw)

    @classmethod
    def from_config(cls, text: str) -> "SweepSpec":
        return cls.from_mapping(parse_key_values(text))


def parse_key_values(text: str) -> dict:
    """Parse ``key = value`` lines; blank lines and ``#`` comments are ignored."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DomainError(f"line {lineno}: expected key = value")
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def config_at(spec: SweepSpec, value) -> ChannelConfig:
    m = value if spec.variable == "m" else spec.m
    n = value if spec.variable == "n" else spec.n
    snr_db = value if spec.variable == "snr_db" else spec.snr_db
    scheme = DiversityScheme(spec.scheme)
    if scheme in (DiversityScheme.MRC, DiversityScheme.SC):
        n = 1
    elif scheme in (DiversityScheme.MRT, DiversityScheme.ST):
        m = 1
    snr = db_to_linear(snr_db)
    if SnrReference(spec.snr_ref) is SnrReference.COMBINER:
        return snr_models.config_for_combiner_snr(scheme, m, n, snr)
    return ChannelConfig(scheme, m, n, snr)


def sweep_columns(spec: SweepSpec) -> list[str]:
    cols = [spec.variable, "eps", "method"]
    simo = [q for q in spec.outputs if q in SIMO_QUANTITIES]
    cols += simo
    if "ga_variant" in spec.outputs:
        cols += [f"{q}_ga" for q in (simo or ["outage_capacity"])] + ["ga_flag"]
    if "bounds" in spec.outputs:
        cols += list(_BOUND_COLUMNS)
    if "asymptotic" in spec.outputs:
        cols += ["asymptotic", "asymptotic_flag"]
    return cols


def _row(spec: SweepSpec, value, eps: float) -> dict:
    cfg = config_at(spec, value)
    row = {spec.variable: value if spec.variable != "snr_db" else format_number(value),
           "eps": format_number(eps)}
    if cfg.scheme is DiversityScheme.MIMO_OPTIMAL:
        row["method"] = "bounds"
        if "bounds" in spec.outputs:
            rep = mimo_bounds.outage_capacity_bounds(cfg, eps)
            for col in _BOUND_COLUMNS:
                row[col] = format_number(getattr(rep, col))
        if "asymptotic" in spec.outputs:
            try:
                row["asymptotic"] = format_number(
                    mimo_bounds.asymptotic_benchmark(cfg, eps, spec.edge_constant))
                row["asymptotic_flag"] = "ok"
            except AsymptoticRegimeError as exc:
                row["asymptotic"], row["asymptotic_flag"] = "", exc.code
        return row
    exact = outage.outage_capacity(cfg, eps, "exact")
    row["method"] = exact.method.value
    simo = [q for q in spec.outputs if q in SIMO_QUANTITIES]
    for q in simo:
        row[q] = format_number(getattr(exact, _REPORT_FIELDS[q]))
    if "ga_variant" in spec.outputs:
        try:
            ga = outage.outage_capacity(cfg, eps, "gaussian_approx")
            flag = "ok"
        except GaInvalidRegimeError as exc:
            ga, flag = None, exc.code
        for q in simo or ["outage_capacity"]:
            row[f"{q}_ga"] = "" if ga is None else format_number(getattr(ga, _REPORT_FIELDS[q]))
        row["ga_flag"] = flag
    return row


def run_sweep(spec: SweepSpec, out: TextIO) -> int:
    """Write one CSV row per grid point per eps, in grid order; returns the row count."""
    cols = sweep_columns(spec)
    writer = csv.DictWriter(out, fieldnames=cols, lineterminator="\n")
    writer.writeheader()
    count = 0
    for value in spec.values():
        for eps in spec.eps:
            writer.writerow(_row(spec, value, eps))
            count += 1
    return count


# ---------------------------------------------------------------------------
# Validation suite
# ---------------------------------------------------------------------------

PASS, FAIL, SKIP, INFO = "pass", "fail", "skipped-unreliable", "info"


@dataclass(frozen=True)
class Check:
    name: str
    expected: str
    observed: str
    tol: str
    verdict: str

    def line(self) -> str:
        return "\t".join((self.name, self.expected, self.observed, self.tol, self.verdict))


@dataclass
class ValidationSummary:
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.verdict != FAIL for c in self.checks)

    def add(self, name, expected, observed, tol, ok: Optional[bool], verdict=None):
        if verdict is None:
            verdict = PASS if ok else FAIL
        fmt = lambda v: v if isinstance(v, str) else format_number(v)
        self.checks.append(Check(name, fmt(expected), fmt(observed), fmt(tol), verdict))

    def to_text(self) -> str:
        header = "name\texpected\tobserved\ttol\tverdict"
        return "\n".join([header] + [c.line() for c in self.checks]) + "\n"


def _check_analytic(summary: ValidationSummary):
    for d, target in ((100, -0.94), (1000, -0.59), (10000, -0.43)):
        gap = math.log2(outage.selection_combiner_factor(d, 1e-3))
        summary.add(f"sc_gap_limit_M{d}", target, gap, 0.01, abs(gap - target) <= 0.01)

    worst = 0.0
    for d in (1, 2, 5, 10, 50, 100, 1000, 10000):
        for eps in (1e-4, 1e-3, 1e-2, 1e-1, 0.5):
            g0 = snr_models.combiner_quantile(ChannelConfig("mrc", d), eps).gamma0
            worst = max(worst, abs(regularized_lower_gamma(d, g0) - eps) / eps)
    summary.add("mrc_quantile_round_trip", 0.0, worst, 1e-9, worst <= 1e-9)

    errs = []
    for d in (10, 100, 1000, 10000):
        cfg = ChannelConfig("mrc", d)
        ex = snr_models.combiner_quantile(cfg, 0.1).gamma0
        errs.append(abs(snr_models.ga_quantile(cfg, 0.1).gamma0 - ex) / ex)
    ok = all(b < a for a, b in zip(errs, errs[1:])) and errs[2] < 0.02
    summary.add("ga_convergence_eps0.1", "<0.02@M=1000", errs[2], 0.02, ok)

    ok, worst_gap = True, -math.inf
    for eps in (1e-3, 1e-1):
        for scheme in ("mrc", "sc"):
            for d in (10, 100, 1000, 10000, 100000):
                for snr_db in (-10.0, 10.0, 30.0):
                    cfg = snr_models.config_for_combiner_snr(scheme, d, 1, db_to_linear(snr_db))
                    rep = outage.outage_capacity(cfg, eps)
                    worst_gap = max(worst_gap, rep.gap_vs_combiner)
                    ok &= rep.gap_vs_combiner < 0 and 0 < rep.ratio_vs_combiner < 1
    summary.add("combiner_gap_negative_ratio_in_01", "<0", worst_gap, 0.0, ok)

    factors = [outage.selection_combiner_factor(10 ** k, 0.1) for k in range(1, 8)]
    ok = all(b > a for a, b in zip(factors, factors[1:])) and factors[-1] < 1
    summary.add("sc_factor_increasing_below_one", "<1", factors[-1], 0.0, ok)
    # 1 - factor ~ (gamma + ln(-ln eps)) / (ln M + gamma): the (ln M)^-1 approach
    rate = (1 - factors[-1]) * (math.log(1e7) + EULER_GAMMA)
    target = EULER_GAMMA + math.log(-math.log(0.1))
    summary.add("sc_factor_log_rate", target, rate, 1e-4, abs(rate - target) <= 1e-4 * target)


def _mc_cells():
    yield "mrc", ChannelConfig("mrc", 2)
    yield "mrc", ChannelConfig("mrc", 10)
    yield "mrc", ChannelConfig("mrc", 100)
    yield "sc", ChannelConfig("sc", 2)
    yield "sc", ChannelConfig("sc", 10)
    yield "sc", ChannelConfig("sc", 100)
    yield "stc", ChannelConfig("stc", 2, 1)
    yield "stc", ChannelConfig("stc", 5, 2)
    yield "stc", ChannelConfig("stc", 10, 10)


def _check_monte_carlo(summary: ValidationSummary, settings: montecarlo.McSettings,
                       inject_mismatch: bool):
    n = settings.samples
    crit = montecarlo.ks_critical_value(n)
    cells = list(_mc_cells())
    quantile_eps = (0.1, 1e-3)
    # Bonferroni: the whole family of quantile CIs holds at 95%
    level = 1.0 - 0.05 / (len(cells) * len(quantile_eps))
    for label, cfg in cells:
        d = cfg.diversity_order
        samples = montecarlo.sample_combiner_snr(cfg, settings)
        tag = f"{label}_d{d}"
        cdf_cfg = cfg
        if inject_mismatch:
            # negative control: compare against the other family's CDF
            other = "sc" if cfg.scheme.is_sum else "mrc"
            cdf_cfg = ChannelConfig(other, d)
        ks = montecarlo.ks_distance(samples, lambda x: snr_models.combiner_cdf(cdf_cfg, x))
        summary.add(f"ks_{tag}", f"<{format_number(crit)}", ks, crit, ks < crit)

        mean = snr_models.mean_combiner_snr(cfg)
        est = montecarlo.empirical_quantile(samples, 0.1)
        dev = abs(est.sample_mean - mean)
        summary.add(f"mean_{tag}", mean, est.sample_mean, 3 * est.sample_mean_stderr,
                    dev <= 3 * est.sample_mean_stderr)

        for eps in quantile_eps:
            est = montecarlo.empirical_quantile(samples, eps, level=level)
            target = snr_models.combiner_quantile(cfg, eps).gamma0
            name = f"quantile_in_ci_{tag}_eps{eps:g}"
            if not est.ci_reliable:
                summary.add(name, target, est.quantile_gamma0, "ci95", None, SKIP)
                continue
            ok = est.ci_low <= target <= est.ci_high
            summary.add(name, target, est.quantile_gamma0,
                        f"ci{level:.4f}[{format_number(est.ci_low)},{format_number(est.ci_high)}]", ok)


def _check_mimo(summary: ValidationSummary, settings: montecarlo.McSettings):
    mc = montecarlo.McSettings(samples=min(settings.samples, 10_000), seed=settings.seed,
                               chunks=min(settings.chunks, min(settings.samples, 10_000)))
    for m, n in ((100, 2), (64, 4)):
        base = montecarlo.sample_combiner_snr(ChannelConfig("mimo-opt", m, n, 1.0), mc)
        for snr_db in (-10.0, 10.0, 30.0):
            rho = db_to_linear(snr_db)
            cfg = ChannelConfig("mimo-opt", m, n, rho)
            rep = mimo_bounds.outage_capacity_bounds(cfg, 0.1)
            cap = montecarlo.capacity_from_estimate(montecarlo.empirical_quantile(rho * base, 0.1))
            name = f"mimo_sandwich_{m}x{n}_{snr_db:g}dB"
            if not cap.reliable:
                summary.add(name, "", cap.value, "", None, SKIP)
                continue
            ok = rep.capacity_lower - 3 * cap.stderr <= cap.value <= rep.capacity_upper + 3 * cap.stderr
            summary.add(name, f"[{format_number(rep.capacity_lower)},{format_number(rep.capacity_upper)}]",
                        cap.value, 3 * cap.stderr, ok)

    result = edge_constant_comparison(100, 100, min(settings.samples, 1000), settings.seed)
    for const in mimo_bounds.EdgeConstant:
        err = result.relative_errors[const]
        summary.add(f"doubly_massive_edge_{const.value}", result.predicted[const],
                    result.sample_mean, 0.05, None, INFO + (":within5%" if err < 0.05 else ":outside5%"))


@dataclass(frozen=True)
class EdgeComparison:
    m: int
    n: int
    samples: int
    sample_mean: float
    sample_stderr: float
    predicted: dict
    relative_errors: dict

    @property
    def closer(self) -> mimo_bounds.EdgeConstant:
        return min(self.relative_errors, key=self.relative_errors.get)


def edge_constant_comparison(m: int, n: int, samples: int, seed: int = 42) -> EdgeComparison:
    """Compare the MC mean of sigma_max^2 / N with both candidate edge constants."""
    cfg = ChannelConfig("mimo-opt", m, n, 1.0)
    x = montecarlo.sample_combiner_snr(cfg, montecarlo.McSettings(samples=samples, seed=seed)) / n
    mean = float(x.mean())
    predicted, errors = {}, {}
    for const in mimo_bounds.EdgeConstant:
        p = mimo_bounds.effective_diversity(cfg, const) / n
        predicted[const] = p
        errors[const] = abs(mean - p) / p
    return EdgeComparison(m, n, samples, mean, float(x.std(ddof=1) / math.sqrt(samples)),
                          predicted, errors)


def run_validation(settings: montecarlo.McSettings, report_path=None,
                   inject_mismatch: bool = False) -> ValidationSummary:
    """Run the analytic and Monte Carlo cross-checks.

    Writes a tab-separated report (name, expected, observed, tol, verdict) to
    ``report_path`` when given.
    """
    summary = ValidationSummary()
    _check_analytic(summary)
    _check_monte_carlo(summary, settings, inject_mismatch)
    _check_mimo(summary, settings)
    if report_path is not None:
        if isinstance(report_path, io.TextIOBase):
            report_path.write(summary.to_text())
        else:
            with open(report_path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(summary.to_text())
    return summary
