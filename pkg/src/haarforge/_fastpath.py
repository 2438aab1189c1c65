"""Vectorized fast path for the tape-driven samplers.

float64 evaluation with margin filters: any draw whose branch decision,
clip test, or grid rounding lands within the filter tolerance of a
boundary is recomputed with the scalar MPFR path, so outputs are
bit-identical to the scalar functions for every drawn field.  Error
budget: the float64 pipeline computes z to ~2**-43 absolute (log1p keeps
the X~1 end accurate) and the accept-test margin to ~2**-40; the filter
tolerances below leave two-plus orders of slack on top of that.

Only grids with m1 + GUARD_BITS <= 64 are supported (fields must fit in
uint64); wider grids take the scalar path.
"""

from __future__ import annotations

import numpy as np

from .numerics import GUARD_BITS
from . import sampling

# Distance of z*2**m1 from an integer below which the floor is escalated.
_FLOOR_TOL = 2.0 ** -10
# Distance of |z| from the clip bound below which the clip test is escalated.
_CLIP_TOL = 2.0 ** -34
# Margin of the log accept inequality / proposal validity below which the
# Gamma accept decision is escalated.
_ACCEPT_TOL = 2.0 ** -30
# Distance of ratio*2**m + 1/2 from an integer below which the final
# rounding is escalated.
_ROUND_TOL = 2.0 ** -26


def _check_width(m1: int) -> int:
    k = m1 + GUARD_BITS
    if k > 64:
        raise ValueError("fast path supports m1 + GUARD_BITS <= 64")
    return k


def _draw_fields(k: int, shape, rng):
    return rng.integers(0, 1 << k, size=shape, dtype=np.uint64, endpoint=False)


def _gaussian_from_fields_batch(m1: int, bound_b: float, kx, ky):
    """float64 rounded-Gaussian numerators plus an escalation mask."""
    k = _check_width(m1)
    scale = 2.0 ** -k
    # X = (kx+1)/2**k; computing ln X as log1p(-(2**k-1-kx)/2**k) keeps
    # absolute accuracy when X is near 1 and z near 0.
    dist = (np.uint64((1 << k) - 1) - kx).astype(np.float64)
    radius = np.sqrt(-2.0 * np.log1p(-dist * scale))
    z = radius * np.cos((2.0 * np.pi) * (ky.astype(np.float64) * scale))
    y = z * 2.0 ** m1
    g = np.floor(y)
    frac = y - g
    clip = np.abs(z) > bound_b
    uncertain = (
        (frac < _FLOOR_TOL)
        | (frac > 1.0 - _FLOOR_TOL)
        | (np.abs(np.abs(z) - bound_b) < _CLIP_TOL)
    )
    return np.where(clip, 0.0, g).astype(np.int64), uncertain


def rounded_gaussian_many(m1: int, bound_b: float, count: int, rng) -> np.ndarray:
    k = _check_width(m1)
    kx = _draw_fields(k, count, rng)
    ky = _draw_fields(k, count, rng)
    nums, uncertain = _gaussian_from_fields_batch(m1, bound_b, kx, ky)
    for i in np.flatnonzero(uncertain):
        nums[i] = sampling._gaussian_from_fields(m1, bound_b, int(kx[i]), int(ky[i]))
    return nums


def _gamma_accept_batch(m1: int, alpha: int, x_nums, u_nums):
    """float64 grid Gamma accept decisions plus an escalation mask."""
    scale = 2.0 ** -m1
    x = x_nums.astype(np.float64) * scale
    u = u_nums.astype(np.float64) * scale
    c = 1.0 / np.sqrt(9.0 * alpha - 3.0)
    d = alpha - 1.0 / 3.0
    one_plus = 1.0 + c * x
    valid = one_plus > 0.0
    safe = np.where(valid, one_plus, 1.0)
    v = safe ** 3
    with np.errstate(divide="ignore"):
        margin = 0.5 * x * x + d - d * v + d * np.log(v) - np.log(u)
    accept = valid & (margin > 0.0)
    uncertain = (np.abs(one_plus) < _ACCEPT_TOL) | (valid & (np.abs(margin) < _ACCEPT_TOL))
    return accept, uncertain


def _first_accept_index(accept):
    """Index of the first True per row of an accept matrix, -1 if none."""
    any_hit = accept.any(axis=1)
    idx = np.argmax(accept, axis=1)
    return np.where(any_hit, idx, -1)


def rounded_beta_many(m: int, alpha: int, count: int, rng) -> np.ndarray:
    m1 = sampling.internal_grid_bits(m)
    k = _check_width(m1)
    kx = _draw_fields(k, (count, 2 * m), rng)
    ky = _draw_fields(k, (count, 2 * m), rng)
    ku = _draw_fields(m1, (count, 2 * m), rng)

    x_nums, g_unc = _gaussian_from_fields_batch(m1, 2 * m, kx, ky)
    u_nums = np.maximum(ku.astype(np.int64), 1)  # all-zero block -> 2**-m1
    accept, a_unc = _gamma_accept_batch(m1, alpha, x_nums, u_nums)
    escalate = (g_unc | a_unc).any(axis=1)

    ia = _first_accept_index(accept[:, 0::2])
    ib = _first_accept_index(accept[:, 1::2])
    fallback = (ia < 0) | (ib < 0)

    rows = np.arange(count)
    xa = x_nums[rows, 2 * np.maximum(ia, 0)].astype(np.float64) * 2.0 ** -m1
    xb = x_nums[rows, 2 * np.maximum(ib, 0) + 1].astype(np.float64) * 2.0 ** -m1
    c = 1.0 / np.sqrt(9.0 * alpha - 3.0)
    pa = (1.0 + c * xa) ** 3
    pb = (1.0 + c * xb) ** 3
    # Fallback rows may hold junk picks; park them at 1/2 before the cast.
    with np.errstate(invalid="ignore", divide="ignore"):
        y = np.where(fallback, 0.5, pa / (pa + pb)) * 2.0 ** m + 0.5
    g = np.floor(y)
    frac = y - g
    escalate |= ~fallback & ((frac < _ROUND_TOL) | (frac > 1.0 - _ROUND_TOL))

    out = np.where(fallback, 1 << (m - 1), g.astype(np.int64))
    for i in np.flatnonzero(escalate):
        out[i] = sampling._beta_from_fields(
            m, alpha, kx[i].tolist(), ky[i].tolist(), ku[i].tolist()
        )
    return out
