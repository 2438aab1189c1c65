"""Finite-precision sampling stack behind the state generators.

Pipeline: Box-Muller -> rounded Gaussian draws -> Gamma rejection
sampling on a dyadic grid -> symmetric Beta values rounded to 2**-m.

Everything is a deterministic function of its inputs.  The tape-driven
entry points (`sample_rounded_gaussian`, `sample_rounded_beta`) define a
frozen bit layout (see README); golden vectors pin it.  Branch decisions
and the final grid rounding are made by correctly-rounded MPFR
evaluation at the internal grid precision plus GUARD_BITS; that
evaluation *is* the reference semantics, and the vectorized fast path in
`_fastpath` reproduces it bit for bit.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from fractions import Fraction

import gmpy2
import numpy as np

from .numerics import GUARD_BITS, FixedPointValue, as_exact_fraction
from .tape import RandomTape

__all__ = [
    "GammaEnvelopeConsts",
    "accept_curve_slope",
    "accept_curve_slope_bound",
    "beta_sample_exact",
    "beta_sample_grid",
    "box_muller",
    "branch_consistency_check",
    "gamma_sample_mt",
    "gamma_sample_mt_batch",
    "internal_grid_bits",
    "randomness_budget_beta",
    "randomness_budget_gaussian",
    "sample_rounded_beta",
    "sample_rounded_beta_many",
    "sample_rounded_gaussian",
    "sample_rounded_gaussian_many",
]


# --------------------------------------------------------------------------
# Box-Muller and the Gamma rejection sampler (real-valued, float64)
# --------------------------------------------------------------------------

def box_muller(x: float, y: float) -> tuple[float, float]:
    """Map uniforms x in (0,1], y in [0,1) to two standard normals."""
    if x <= 0:
        raise ValueError("x must be positive (log of zero)")
    r = math.sqrt(-2.0 * math.log(x))
    return r * math.cos(2.0 * math.pi * y), r * math.sin(2.0 * math.pi * y)


@dataclass(frozen=True, slots=True)
class GammaEnvelopeConsts:
    """Envelope constants for the squeeze-free Gamma rejection sampler."""

    alpha: float
    d: float
    c: float

    @classmethod
    def for_alpha(cls, alpha: float) -> "GammaEnvelopeConsts":
        if alpha < 1:
            raise ValueError("alpha must be >= 1")
        d = alpha - 1.0 / 3.0
        return cls(alpha=alpha, d=d, c=1.0 / math.sqrt(9.0 * d))


def gamma_sample_mt(alpha: float, x: float, u: float) -> float | None:
    """One Marsaglia-Tsang trial for Gamma(alpha, 1), alpha >= 1.

    x plays the standard-normal proposal, u the uniform accept draw.
    Returns d*(1+c*x)**3 on accept, None on reject.
    """
    if not 0.0 < u < 1.0:
        raise ValueError("u must lie in (0, 1)")
    env = GammaEnvelopeConsts.for_alpha(alpha)
    one_plus = 1.0 + env.c * x
    if one_plus <= 0.0:
        return None
    v = one_plus ** 3
    if math.log(u) < 0.5 * x * x + env.d - env.d * v + env.d * math.log(v):
        return env.d * v
    return None


def gamma_sample_mt_batch(alpha: float, xs: np.ndarray, us: np.ndarray):
    """Vectorized gamma_sample_mt.  Returns (values, accept_mask)."""
    env = GammaEnvelopeConsts.for_alpha(alpha)
    xs = np.asarray(xs, dtype=float)
    us = np.asarray(us, dtype=float)
    one_plus = 1.0 + env.c * xs
    ok = one_plus > 0.0
    v = np.where(ok, one_plus, 1.0) ** 3
    with np.errstate(divide="ignore"):
        accept = ok & (np.log(us) < 0.5 * xs * xs + env.d - env.d * v + env.d * np.log(v))
    return env.d * v, accept


# --------------------------------------------------------------------------
# Acceptance-curve slope bound (sets the internal grid width)
# --------------------------------------------------------------------------

_eta_lock = threading.Lock()
_eta_cache: float | None = None

# Safety factor applied on top of the numeric maximization.
_ETA_SAFETY = 1.25


def accept_curve_slope(alpha: float, x) -> np.ndarray | float:
    """Derivative of the Gamma-sampler acceptance curve exp(s(x)).

    s(x) = x^2/2 + d - d(1+cx)^3 + d ln (1+cx)^3 with d = alpha - 1/3,
    c = 1/sqrt(9d); the slope is -(c^2/3) x^3 (1+cx)^(3d-1)
    exp(x^2/2 + d - d(1+cx)^3), and it vanishes at x = 0 and at both ends
    of the domain (-1/c, +inf).
    """
    env = GammaEnvelopeConsts.for_alpha(alpha)
    return _signed_slope(env.c, np.asarray(x, dtype=float))


def _signed_slope(c: float, xs: np.ndarray):
    d = 1.0 / (9.0 * c * c)
    one_plus = 1.0 + c * xs
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        log_mag = (
            math.log(c * c / 3.0)
            + 3.0 * np.log(np.abs(xs))
            + (3.0 * d - 1.0) * np.log(one_plus)
            + 0.5 * xs * xs + d - d * one_plus ** 3
        )
        mag = np.exp(log_mag)
    mag = np.where((one_plus > 0) & (xs != 0) & np.isfinite(mag), mag, 0.0)
    out = -np.sign(xs) * mag
    return float(out) if out.ndim == 0 else out


def _max_slope_for_c(c: float) -> float:
    lo = -1.0 / c
    xs = np.concatenate([
        lo + abs(lo) * np.geomspace(1e-9, 1.0, 1200)[:-1],
        np.geomspace(1e-3, 50.0 / c, 1200),
    ])
    mags = np.abs(_signed_slope(c, xs))
    best_i = int(np.argmax(mags))
    best_x, best = xs[best_i], float(mags[best_i])
    # Local refinement: shrink a bracket around the grid argmax.
    width = abs(lo) * 0.5
    for _ in range(40):
        grid = np.linspace(best_x - width, best_x + width, 65)
        grid = grid[grid > lo]
        mags = np.abs(_signed_slope(c, grid))
        i = int(np.argmax(mags))
        best_x, best = grid[i], max(best, float(mags[i]))
        width *= 0.25
    return best


def accept_curve_slope_bound() -> float:
    """Cached numeric upper bound on sup |d/dx exp(s(x))| over alpha >= 1.

    alpha >= 1 is c in (0, 1/sqrt(6)]; the sup is finite there and is
    attained at alpha = 1.  Computed once by grid maximization with local
    refinement, then inflated by a safety factor.  Always >= 1.
    """
    global _eta_cache
    if _eta_cache is None:
        with _eta_lock:
            if _eta_cache is None:
                c_max = 1.0 / math.sqrt(6.0)
                cs = np.concatenate([
                    np.geomspace(1e-4, c_max, 160),
                    1.0 / np.sqrt(9.0 * np.arange(1, 65) - 3.0),
                ])
                raw = max(_max_slope_for_c(float(c)) for c in cs)
                _eta_cache = max(1.0, _ETA_SAFETY * raw)
    return _eta_cache


def internal_grid_bits(m: int) -> int:
    """Internal grid precision m1 = 3m + 3 + ceil(log2(eta + 3))."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return 3 * m + 3 + math.ceil(math.log2(accept_curve_slope_bound() + 3.0))


def randomness_budget_gaussian(m1: int) -> int:
    """Tape bits consumed by one rounded-Gaussian draw at grid 2**-m1."""
    return 2 * (m1 + GUARD_BITS)


def randomness_budget_beta(m: int, alpha: int = 1) -> int:
    """Tape bits consumed by one rounded-Beta draw at grid 2**-m.

    Independent of alpha; the parameter is kept so callers can state the
    distribution they are budgeting for.
    """
    m1 = internal_grid_bits(m)
    return 2 * m * (randomness_budget_gaussian(m1) + m1)


# --------------------------------------------------------------------------
# Rounded Gaussian draws (tape -> grid value)
# --------------------------------------------------------------------------

def _gaussian_from_fields(m1: int, bound_b: float, kx: int, ky: int) -> int:
    """Grid numerator of one rounded-Gaussian draw from its two uniform fields.

    X = (kx+1)/2**k in (0,1], Y = ky/2**k in [0,1) with k = m1+GUARD_BITS;
    z = sqrt(-2 ln X) cos(2 pi Y); |z| > bound_b clips to 0, otherwise z is
    floored onto the 2**-m1 grid.
    """
    k = m1 + GUARD_BITS
    with gmpy2.context(precision=k):
        x = gmpy2.mpfr(kx + 1) / (1 << k)
        y = gmpy2.mpfr(ky) / (1 << k)
        z = gmpy2.sqrt(-2 * gmpy2.log(x)) * gmpy2.cos(2 * gmpy2.const_pi() * y)
        if abs(z) > bound_b:
            return 0
        return int(gmpy2.floor(z * (1 << m1)))


def sample_rounded_gaussian(m1: int, bound_b: float, tape: RandomTape) -> FixedPointValue:
    """Draw from the clipped-and-floored standard normal on grid 2**-m1.

    Consumes randomness_budget_gaussian(m1) bits: kx then ky, each
    m1+GUARD_BITS wide, MSB-first.
    """
    if m1 < 1:
        raise ValueError("m1 must be >= 1")
    k = m1 + GUARD_BITS
    kx = tape.read_int(k)
    ky = tape.read_int(k)
    return FixedPointValue(_gaussian_from_fields(m1, bound_b, kx, ky), m1)


def sample_rounded_gaussian_many(m1: int, bound_b: float, count: int, rng) -> np.ndarray:
    """Vectorized rounded-Gaussian draws; int64 grid numerators.

    Statistically identical to fresh random tapes (the tape fields are
    uniform bits); bit-identical to the scalar path on the drawn fields.
    """
    from . import _fastpath

    return _fastpath.rounded_gaussian_many(m1, bound_b, count, rng)


# --------------------------------------------------------------------------
# Grid-rounding consistency checker for the Gamma sampler
# --------------------------------------------------------------------------

def _grid_bits_of_step(eps) -> int:
    f = as_exact_fraction(eps)
    if f.numerator != 1 or f.denominator & (f.denominator - 1):
        raise ValueError("eps must be a power-of-two grid step")
    return f.denominator.bit_length() - 1


def branch_consistency_check(eps, alpha: int, x: float, u: float) -> bool:
    """True iff the Gamma sampler takes the same branch on exact and
    grid-floored inputs.

    Compares the proposal-validity indicator (1+cx)^3 > 0 and the accept
    indicator u < exp(s(x)) between (x, u) and (floor(x/eps)*eps,
    floor(u/eps)*eps).  When both validity indicators are false the
    sampler rejects either way, which counts as agreement.
    """
    bits = _grid_bits_of_step(eps)
    xf = as_exact_fraction(x)
    uf = as_exact_fraction(u)
    xt = Fraction(math.floor(xf * (1 << bits)), 1 << bits)
    ut = Fraction(math.floor(uf * (1 << bits)), 1 << bits)
    with gmpy2.context(precision=bits + GUARD_BITS):
        nine_d = 9 * alpha - 3
        c = 1 / gmpy2.sqrt(gmpy2.mpfr(nine_d))
        valid = _mpfr_of(xf) * c + 1 > 0
        valid_t = _mpfr_of(xt) * c + 1 > 0
        if valid != valid_t:
            return False
        if not valid:
            return True
        return _accept_indicator(nine_d, c, xf, uf) == _accept_indicator(nine_d, c, xt, ut)


def _mpfr_of(f: Fraction):
    return gmpy2.mpfr(f.numerator) / f.denominator


def _accept_indicator(nine_d: int, c, xf: Fraction, uf: Fraction) -> bool:
    # ln u < s(x) = x^2/2 + d - d v + d ln v, v = (1+cx)^3; caller
    # guarantees v > 0.  ln(0) is -inf and always accepts.
    d = gmpy2.mpfr(nine_d) / 9
    x = _mpfr_of(xf)
    v = (1 + c * x) ** 3
    s = x * x / 2 + d - d * v + d * gmpy2.log(v)
    if uf == 0:
        return True
    return gmpy2.log(_mpfr_of(uf)) < s


# --------------------------------------------------------------------------
# Beta samplers
# --------------------------------------------------------------------------

def beta_sample_exact(m: int, alpha: int, xs, us) -> float | None:
    """Idealized symmetric-Beta sampler (real-valued inputs, float64).

    Retries the Gamma sampler up to m times per numerator/denominator
    draw; xs[0::2]/us[0::2] feed the first loop, xs[1::2]/us[1::2] the
    second.  Returns a/(a+b) or None when either loop exhausts.
    """
    if len(xs) != 2 * m or len(us) != 2 * m:
        raise ValueError("need exactly 2m proposal and accept values")
    a = _first_gamma_accept(alpha, xs[0::2], us[0::2])
    b = _first_gamma_accept(alpha, xs[1::2], us[1::2])
    if a is None or b is None:
        return None
    return a / (a + b)


def _first_gamma_accept(alpha, xs, us):
    for x, u in zip(xs, us):
        value = gamma_sample_mt(alpha, x, u)
        if value is not None:
            return value
    return None


def _rounded_gamma_accepts(m1: int, alpha: int, x_num: int, u_num: int) -> bool:
    """Accept decision of the grid Gamma sampler at working precision.

    x = x_num/2**m1 and u = u_num/2**m1 are exact grid values; u_num 0
    stands for u = 0 whose log is -inf, accepting whenever the proposal
    is valid.
    """
    with gmpy2.context(precision=m1 + GUARD_BITS):
        nine_d = 9 * alpha - 3
        c = 1 / gmpy2.sqrt(gmpy2.mpfr(nine_d))
        x = gmpy2.mpfr(x_num) / (1 << m1)
        one_plus = 1 + c * x
        if one_plus <= 0:
            return False
        if u_num == 0:
            return True
        d = gmpy2.mpfr(nine_d) / 9
        v = one_plus ** 3
        s = x * x / 2 + d - d * v + d * gmpy2.log(v)
        return gmpy2.log(gmpy2.mpfr(u_num) / (1 << m1)) < s


def _beta_grid_core(m: int, m1: int, alpha: int, x_nums, u_nums) -> int:
    """Output numerator (grid 2**-m) of the grid Beta sampler."""
    xa = _first_grid_accept(m1, alpha, x_nums[0::2], u_nums[0::2])
    xb = _first_grid_accept(m1, alpha, x_nums[1::2], u_nums[1::2])
    if xa is None or xb is None:
        return 1 << (m - 1)  # fall back to 1/2
    with gmpy2.context(precision=m1 + GUARD_BITS):
        c = 1 / gmpy2.sqrt(gmpy2.mpfr(9 * alpha - 3))
        pa = (1 + c * (gmpy2.mpfr(xa) / (1 << m1))) ** 3
        pb = (1 + c * (gmpy2.mpfr(xb) / (1 << m1))) ** 3
        ratio = pa / (pa + pb)
        return int(gmpy2.floor(ratio * (1 << m) + gmpy2.mpfr(1) / 2))


def _first_grid_accept(m1, alpha, x_nums, u_nums):
    for x_num, u_num in zip(x_nums, u_nums):
        if _rounded_gamma_accepts(m1, alpha, x_num, u_num):
            return x_num
    return None


def beta_sample_grid(m: int, alpha: int, xs, us) -> FixedPointValue:
    """Finite-precision symmetric-Beta sampler on grid 2**-m.

    xs: 2m rounded-Gaussian grid values (|x| <= 2m, precision
    internal_grid_bits(m)); us: 2m uniform grid values in [0, 1).  Total:
    always returns a grid value in [0, 1], exactly 1/2 when either retry
    loop exhausts.
    """
    m1 = internal_grid_bits(m)
    if len(xs) != 2 * m or len(us) != 2 * m:
        raise ValueError("need exactly 2m proposal and accept values")
    x_nums, u_nums = [], []
    for x in xs:
        if x.precision_bits != m1:
            raise ValueError(f"proposal values must sit on the 2**-{m1} grid")
        if abs(x.numerator) > 2 * m << m1:
            raise ValueError("proposal value exceeds the clip bound 2m")
        x_nums.append(x.numerator)
    for u in us:
        if u.precision_bits != m1:
            raise ValueError(f"accept values must sit on the 2**-{m1} grid")
        if not 0 <= u.numerator < 1 << m1:
            raise ValueError("accept values must lie in [0, 1)")
        u_nums.append(u.numerator)
    return FixedPointValue(_beta_grid_core(m, m1, alpha, x_nums, u_nums), m)


def _beta_from_fields(m: int, alpha: int, kxs, kys, kus) -> int:
    """Grid numerator of one rounded-Beta draw from its 2m field triples."""
    m1 = internal_grid_bits(m)
    x_nums = [_gaussian_from_fields(m1, 2 * m, kx, ky) for kx, ky in zip(kxs, kys)]
    # The all-zero uniform block maps to 2**-m1 so the accept log stays finite.
    u_nums = [max(int(ku), 1) for ku in kus]
    return _beta_grid_core(m, m1, alpha, x_nums, u_nums)


def sample_rounded_beta(m: int, alpha: int, tape: RandomTape) -> FixedPointValue:
    """Deterministic rounded-Beta(alpha, alpha) draw on grid 2**-m.

    Consumes randomness_budget_beta(m) bits in the fixed order x_1, u_1,
    x_2, u_2, ... where each x block is two (m1+GUARD_BITS)-bit fields
    and each u block is m1 bits.
    """
    if alpha < 1:
        raise ValueError("alpha must be >= 1")
    m1 = internal_grid_bits(m)
    k = m1 + GUARD_BITS
    kxs, kys, kus = [], [], []
    for _ in range(2 * m):
        kxs.append(tape.read_int(k))
        kys.append(tape.read_int(k))
        kus.append(tape.read_int(m1))
    return FixedPointValue(_beta_from_fields(m, alpha, kxs, kys, kus), m)


def sample_rounded_beta_many(m: int, alpha: int, count: int, rng) -> np.ndarray:
    """Vectorized rounded-Beta draws; int64 numerators on grid 2**-m.

    Statistically identical to fresh random tapes; bit-identical to the
    scalar path on the drawn fields (escalating near-boundary cases to
    the MPFR path).
    """
    from . import _fastpath

    return _fastpath.rounded_beta_many(m, alpha, count, rng)
