"""Shared test utilities, including the double-tracked Beta sampler that
runs the real-valued and grid pipelines side by side.

`beta_sample_checked` exists only as a test oracle: it certifies, trial
by trial, that the grid sampler follows the exact sampler's branches,
and refuses (returning a sentinel) whenever rounding could have changed
a branch or the final rounded outputs disagree.  On any value-returning
trace the production grid sampler must emit the same numerator.
"""

from __future__ import annotations

import math
from fractions import Fraction

from haarforge.numerics import FixedPointValue, round_half_up
from haarforge.sampling import (_beta_grid_core, _rounded_gamma_accepts,
                                branch_consistency_check, gamma_sample_mt,
                                internal_grid_bits)

FAIL = "fail"                 # both retry loops exhausted
REJECT_ROUNDING = "reject"    # rounding could have flipped a branch


def _floor_to_grid(value: float, m1: int) -> int:
    return math.floor(Fraction(value) * (1 << m1))


def beta_sample_checked(m: int, alpha: int, xs, us):
    """Run the exact and grid Beta pipelines in lockstep.

    Returns the output grid numerator when every rounding guard passes,
    FAIL when the retry loops exhaust, REJECT_ROUNDING when a guard
    trips.
    """
    if len(xs) != 2 * m or len(us) != 2 * m:
        raise ValueError("need exactly 2m proposal and accept values")
    m1 = internal_grid_bits(m)
    eps = Fraction(1, 1 << m1)

    picks = []
    for lane in (0, 1):
        exact_pick = grid_pick = None
        for x, u in zip(xs[lane::2], us[lane::2]):
            if abs(x) > 2 * m or not branch_consistency_check(eps, alpha, x, u):
                return REJECT_ROUNDING
            x_num, u_num = _floor_to_grid(x, m1), _floor_to_grid(u, m1)
            if _rounded_gamma_accepts(m1, alpha, x_num, u_num):
                exact_pick = gamma_sample_mt(alpha, x, u)
                grid_pick = x_num
                break
        picks.append((exact_pick, grid_pick))

    (a, xa_num), (b, xb_num) = picks
    if a is None or b is None:
        return FAIL
    exact_out = round_half_up(a / (a + b), m).numerator
    grid_out = _beta_grid_core(m, m1, alpha,
                               [xa_num, xb_num] + [0] * (2 * m - 2),
                               [1, 1] + [0] * (2 * m - 2))
    if exact_out != grid_out:
        return REJECT_ROUNDING
    return grid_out


def grid_value(value: float, m1: int) -> FixedPointValue:
    return FixedPointValue(_floor_to_grid(value, m1), m1)
