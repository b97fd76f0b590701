"""Special functions and root finding used by the analytic SNR models.

Everything here is pure and reentrant.  ``regularized_lower_gamma`` accepts a
scalar or a numpy array for ``x`` (the array path exists so KS statistics over
millions of samples stay cheap); all other functions are scalar.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from outcap._validation import check_finite, check_probability
from outcap.errors import ConvergenceError, DomainError, NonMonotoneError

EULER_GAMMA = 0.57721566490153286061

_EPS = np.finfo(float).eps
_FPMIN = 1e-300
_POISSON_SUM_MAX_SHAPE = 50
_STIRLING_MIN_SHAPE = 20.0
_HARMONIC_DIRECT_MAX = 1000


@dataclass(frozen=True)
class RootSolveSettings:
    """Tolerances for :func:`invert_monotone_cdf`.

    The residual target is ``|f(x) - eps| <= rel_tol * eps + abs_tol``.
    """

    rel_tol: float = 1e-12
    abs_tol: float = 0.0
    max_iter: int = 200

    def __post_init__(self):
        if not (math.isfinite(self.rel_tol) and self.rel_tol > 0):
            raise DomainError(f"rel_tol must be positive, got {self.rel_tol!r}")
        if not (math.isfinite(self.abs_tol) and self.abs_tol >= 0):
            raise DomainError(f"abs_tol must be >= 0, got {self.abs_tol!r}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise DomainError(f"max_iter must be a positive integer, got {self.max_iter!r}")


DEFAULT_ROOT_SETTINGS = RootSolveSettings()


@dataclass(frozen=True)
class RootResult:
    x: float
    residual: float
    iterations: int


# ---------------------------------------------------------------------------
# Incomplete gamma
# ---------------------------------------------------------------------------

def _stirling_remainder(a: float) -> float:
    # lgamma(a + 1) - (a ln a - a), asymptotic series; truncation < 1e-17 for a >= 20
    inv = 1.0 / a
    inv2 = inv * inv
    series = inv * (1 / 12 - inv2 * (1 / 360 - inv2 * (1 / 1260 - inv2 * (1 / 1680 - inv2 / 1188))))
    return 0.5 * math.log(2 * math.pi * a) + series


def _log_prefactor(a: float, x):
    """log(x**a * exp(-x) / Gamma(a + 1)), scalar or array ``x > 0``."""
    log, log1p = (np.log, np.log1p) if isinstance(x, np.ndarray) else (math.log, math.log1p)
    if a < _STIRLING_MIN_SHAPE:
        return a * log(x) - x - math.lgamma(a + 1)
    t = (x - a) / a
    # log1p only near x = a, where it matters; x/a can underflow far below it
    if isinstance(x, np.ndarray):
        with np.errstate(divide="ignore", invalid="ignore"):
            log_ratio = np.where(t > -0.5, np.log1p(np.maximum(t, -0.5)), np.log(x) - math.log(a))
    else:
        log_ratio = log1p(t) if t > -0.5 else log(x) - log(a)
    return a * (log_ratio - t) - _stirling_remainder(a)


def _max_terms(a: float) -> int:
    return 1000 + 20 * int(math.sqrt(a))


def _is_small_integer(a: float) -> bool:
    return a == int(a) and a <= _POISSON_SUM_MAX_SHAPE


def _p_series(a: float, x: float) -> float:
    term = 1.0
    total = 1.0
    for n in range(1, _max_terms(a)):
        term *= x / (a + n)
        total += term
        if term < total * _EPS:
            return math.exp(_log_prefactor(a, x)) * total
    raise ConvergenceError(f"gamma series did not converge for a={a}, x={x}")


def _q_continued_fraction(a: float, x: float) -> float:
    # modified Lentz evaluation of the Legendre continued fraction for Q(a, x)
    b = x + 1.0 - a
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, _max_terms(a)):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return math.exp(_log_prefactor(a, x) + math.log(a)) * h
    raise ConvergenceError(f"gamma continued fraction did not converge for a={a}, x={x}")


def _q_poisson_sum(a: int, x: float) -> float:
    log_x = math.log(x)
    return math.fsum(math.exp(-x + k * log_x - math.lgamma(k + 1)) for k in range(int(a)))


def _gammainc_scalar(a: float, x: float) -> float:
    if x == 0.0:
        return 0.0
    if _is_small_integer(a) and x >= a:
        return 1.0 - _q_poisson_sum(a, x)
    if x < a + 1.0:
        return min(1.0, _p_series(a, x))
    return max(0.0, 1.0 - _q_continued_fraction(a, x))


def _p_series_array(a: float, x: np.ndarray) -> np.ndarray:
    term = np.ones_like(x)
    total = np.ones_like(x)
    for n in range(1, _max_terms(a)):
        term *= x / (a + n)
        total += term
        if np.all(term < total * _EPS):
            return np.minimum(1.0, np.exp(_log_prefactor(a, x)) * total)
    raise ConvergenceError(f"gamma series did not converge for a={a}")


def _q_continued_fraction_array(a: float, x: np.ndarray) -> np.ndarray:
    b = x + 1.0 - a
    c = np.full_like(x, 1.0 / _FPMIN)
    d = 1.0 / b
    h = d.copy()
    for i in range(1, _max_terms(a)):
        an = -i * (i - a)
        b = b + 2.0
        d = an * d + b
        d[np.abs(d) < _FPMIN] = _FPMIN
        c = b + an / c
        c[np.abs(c) < _FPMIN] = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if np.all(np.abs(delta - 1.0) < _EPS):
            return np.exp(_log_prefactor(a, x) + math.log(a)) * h
    raise ConvergenceError(f"gamma continued fraction did not converge for a={a}")


def _q_poisson_sum_array(a: int, x: np.ndarray) -> np.ndarray:
    # Kahan-compensated sum of Poisson terms
    log_x = np.log(x)
    total = np.zeros_like(x)
    comp = np.zeros_like(x)
    for k in range(int(a)):
        y = np.exp(-x + k * log_x - math.lgamma(k + 1)) - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total


def _gammainc_array(a: float, x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x, dtype=float)
    rest = x > 0
    if _is_small_integer(a):
        fast = x >= a
        if fast.any():
            out[fast] = 1.0 - _q_poisson_sum_array(a, x[fast])
        rest &= ~fast
    series = rest & (x < a + 1.0)
    frac = rest & ~series
    if series.any():
        out[series] = _p_series_array(a, x[series])
    if frac.any():
        out[frac] = np.maximum(0.0, 1.0 - _q_continued_fraction_array(a, x[frac]))
    return out


def regularized_lower_gamma(a: float, x):
    """Regularized lower incomplete gamma function P(a, x).

    For integer ``a`` this is the CDF of a sum of ``a`` unit-mean exponentials,
    i.e. the MRC combiner-SNR CDF in units of the branch SNR.  ``x`` may be a
    scalar or an array of nonnegative finite values.
    """
    a = check_finite(a, "a")
    if a <= 0:
        raise DomainError(f"shape a must be positive, got {a}")
    if np.ndim(x) == 0:
        x = check_finite(x, "x")
        if x < 0:
            raise DomainError(f"x must be nonnegative, got {x}")
        return _gammainc_scalar(a, x)
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("x contains non-finite values")
    if np.any(x < 0):
        raise DomainError("x must be nonnegative")
    return _gammainc_array(a, x)


# ---------------------------------------------------------------------------
# Gaussian tail
# ---------------------------------------------------------------------------

def q_function(x: float) -> float:
    """Standard Gaussian tail probability Q(x) = 1 - Phi(x)."""
    x = check_finite(x, "x")
    return 0.5 * math.erfc(x / math.sqrt(2.0))


# Acklam's rational approximation to the normal quantile (|rel err| < 1.15e-9)
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def _acklam_upper(p: float) -> float:
    """Rational estimate of Q^-1(p) for 0 < p <= 0.5."""
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
        den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        return -num / den
    q = p - 0.5
    r = q * q
    num = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
    den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
    return -num / den


def q_inverse(eps: float) -> float:
    """Inverse of :func:`q_function` on (0, 1).

    The root is always solved in the smaller tail, so
    ``q_inverse(1 - e) == -q_inverse(e)`` up to the representation of ``1 - e``.
    """
    eps = check_probability(eps, "eps")
    p = min(eps, 1.0 - eps)
    z = _acklam_upper(p)
    for _ in range(2):
        z += (q_function(z) - p) / (math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi))
    return z if eps <= 0.5 else -z


# ---------------------------------------------------------------------------
# Harmonic numbers
# ---------------------------------------------------------------------------

@lru_cache(maxsize=4096)
def harmonic_number(n: int) -> float:
    """Partial harmonic sum H_n = 1 + 1/2 + ... + 1/n.

    Exact (compensated) summation up to n = 1000; above that the asymptotic
    expansion ln n + gamma + 1/(2n) - 1/(12n^2) + 1/(120n^4), whose truncation
    error is below 1e-20 there.
    """
    if isinstance(n, bool) or int(n) != n:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if n <= _HARMONIC_DIRECT_MAX:
        return math.fsum(1.0 / k for k in range(1, n + 1))
    inv2 = 1.0 / (n * n)
    return math.log(n) + EULER_GAMMA + 0.5 / n - inv2 / 12 + inv2 * inv2 / 120


# ---------------------------------------------------------------------------
# Root finding
# ---------------------------------------------------------------------------

def invert_monotone_cdf(
    f: Callable[[float], float],
    eps: float,
    bracket_hint: float = 1.0,
    settings: RootSolveSettings = DEFAULT_ROOT_SETTINGS,
) -> RootResult:
    """Solve ``f(x) = eps`` for a nondecreasing ``f`` on ``[0, inf)``.

    The bracket grows geometrically from ``bracket_hint`` until it straddles
    ``eps``; it is then shrunk with Illinois-modified false position, falling
    back to bisection whenever the interpolated point stalls.
    """
    eps = check_probability(eps, "eps")
    if not (math.isfinite(bracket_hint) and bracket_hint > 0):
        raise DomainError(f"bracket_hint must be positive, got {bracket_hint!r}")
    tol = settings.rel_tol * eps + settings.abs_tol

    lo, f_lo = 0.0, f(0.0)
    if f_lo > eps + tol:
        raise DomainError(f"f(0) = {f_lo} exceeds eps = {eps}")
    if abs(f_lo - eps) <= tol:
        return RootResult(0.0, abs(f_lo - eps), 0)

    hi, f_hi = bracket_hint, f(bracket_hint)
    iterations = 1
    while f_hi < eps - tol:
        if f_hi < f_lo - tol:
            raise NonMonotoneError(f"f decreased between {lo} and {hi}")
        lo, f_lo = hi, f_hi
        hi *= 2.0
        f_hi = f(hi)
        iterations += 1
        if iterations > settings.max_iter or not math.isfinite(hi):
            raise ConvergenceError(f"could not bracket eps={eps} after {iterations} expansions")
    if abs(f_hi - eps) <= tol:
        return RootResult(hi, abs(f_hi - eps), iterations)

    g_lo, g_hi = f_lo - eps, f_hi - eps
    best_x, best_r = (lo, -g_lo) if -g_lo < g_hi else (hi, g_hi)
    side = 0
    width = hi - lo
    while iterations < settings.max_iter:
        iterations += 1
        x = hi - g_hi * (hi - lo) / (g_hi - g_lo)
        if not lo < x < hi:
            x = 0.5 * (lo + hi)
        fx = f(x)
        if fx < f_lo - tol or fx > f_hi + tol:
            raise NonMonotoneError(f"f({x}) = {fx} outside [{f_lo}, {f_hi}]")
        gx = fx - eps
        if abs(gx) < best_r:
            best_x, best_r = x, abs(gx)
        if abs(gx) <= tol:
            return RootResult(x, abs(gx), iterations)
        if gx < 0:
            lo, f_lo, g_lo = x, fx, gx
            if side == -1:
                g_hi *= 0.5
            side = -1
        else:
            hi, f_hi, g_hi = x, fx, gx
            if side == 1:
                g_lo *= 0.5
            side = 1
        if hi - lo > 0.5 * width:
            # slow progress: force a bisection step next time round
            mid = 0.5 * (lo + hi)
            fm = f(mid)
            iterations += 1
            gm = fm - eps
            if abs(gm) < best_r:
                best_x, best_r = mid, abs(gm)
            if abs(gm) <= tol:
                return RootResult(mid, abs(gm), iterations)
            if gm < 0:
                lo, f_lo, g_lo = mid, fm, gm
            else:
                hi, f_hi, g_hi = mid, fm, gm
            side = 0
        width = hi - lo
        if width <= 4 * _EPS * hi:
            # bracket is at floating resolution; best point is as good as it gets
            return RootResult(best_x, best_r, iterations)
    raise ConvergenceError(
        f"no root within tolerance after {settings.max_iter} iterations (residual {best_r:.3g})"
    )
