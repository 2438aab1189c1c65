import math
from fractions import Fraction

import gmpy2
import numpy as np
import pytest
import scipy.special

from haarforge import _fastpath
from haarforge import sampling as S
from haarforge.numerics import FixedPointValue
from haarforge.tape import RandomTape, TapeExhausted

from helpers import FAIL, REJECT_ROUNDING, beta_sample_checked, grid_value


class TestBoxMuller:
    def test_log_of_one_gives_zero(self):
        assert S.box_muller(1.0, 0.7) == pytest.approx((0.0, 0.0), abs=1e-12)

    def test_radius_two(self):
        z0, z1 = S.box_muller(math.exp(-2.0), 0.0)
        assert z0 == pytest.approx(2.0, abs=1e-12)
        assert z1 == pytest.approx(0.0, abs=1e-12)

    def test_quarter_turn(self):
        z0, z1 = S.box_muller(math.exp(-0.5), 0.25)
        assert z0 == pytest.approx(0.0, abs=1e-12)
        assert z1 == pytest.approx(1.0, abs=1e-12)

    def test_domain_error(self):
        with pytest.raises(ValueError):
            S.box_muller(0.0, 0.5)


class TestGammaSampler:
    def test_center_accepts(self):
        # x = 0 makes the proposal (1+cx)^3 = 1 and the accept test
        # ln(0.5) < 0, so the output is d * 1 = 2/3.
        assert S.gamma_sample_mt(1, 0.0, 0.5) == pytest.approx(2.0 / 3.0, rel=1e-15)

    def test_proposal_boundary_rejects(self):
        assert S.gamma_sample_mt(1, -math.sqrt(6.0), 0.9) is None

    def test_u_domain(self):
        with pytest.raises(ValueError):
            S.gamma_sample_mt(1, 0.0, 0.0)
        with pytest.raises(ValueError):
            S.gamma_sample_mt(1, 0.0, 1.0)

    def test_envelope_constants(self):
        for alpha in range(1, 101):
            env = S.GammaEnvelopeConsts.for_alpha(alpha)
            assert env.d > 0
            assert 0 < env.c <= 1 / math.sqrt(6.0) + 1e-15

    @pytest.mark.parametrize("alpha", [1, 2, 100])
    def test_acceptance_rate_quick(self, alpha):
        rng = np.random.default_rng(42)
        _, accept = S.gamma_sample_mt_batch(alpha, rng.normal(size=20_000),
                                            rng.random(size=20_000))
        assert accept.mean() >= 0.94

    def test_accepted_law_quick(self):
        rng = np.random.default_rng(7)
        values, accept = S.gamma_sample_mt_batch(2, rng.normal(size=100_000),
                                                 rng.random(size=100_000))
        kept = np.sort(values[accept])
        gaps = np.abs(np.arange(1, len(kept) + 1) / len(kept)
                      - scipy.special.gammainc(2, kept))
        assert gaps.max() <= 0.01

    def test_envelope_inequality(self):
        # s(x) = x^2/2 + d - d v + d ln v never exceeds 0 on the valid
        # domain; checked at high precision on random (alpha, x) pairs.
        rng = np.random.default_rng(3)
        with gmpy2.context(precision=140):
            for _ in range(10_000):
                alpha = int(rng.integers(1, 50))
                nine_d = 9 * alpha - 3
                c = 1 / gmpy2.sqrt(gmpy2.mpfr(nine_d))
                d = gmpy2.mpfr(nine_d) / 9
                x = gmpy2.mpfr(float(rng.normal() * 3))
                if 1 + c * x <= 0:
                    continue
                v = (1 + c * x) ** 3
                s = x * x / 2 + d - d * v + d * gmpy2.log(v)
                assert s <= 1e-9


class TestBranchConsistency:
    def test_grid_inputs_always_pass(self):
        assert S.branch_consistency_check(2.0 ** -20, 1, 1.0, 0.5)

    def test_flooring_across_proposal_boundary_fails(self):
        # -1/c = -sqrt(6) ~ -2.449 for alpha 1: x = -2.3 is valid but its
        # half-step floor -2.5 is not, so the indicators disagree.
        c = 1 / math.sqrt(6.0)
        assert (1 + c * -2.3) ** 3 > 0
        assert (1 + c * -2.5) ** 3 < 0
        assert not S.branch_consistency_check(0.5, 1, -2.3, 0.9)

    def test_eps_must_be_power_of_two(self):
        with pytest.raises(ValueError):
            S.branch_consistency_check(0.3, 1, 0.1, 0.5)

    @pytest.mark.parametrize("alpha", [1, 3])
    def test_pass_implies_same_branch(self, alpha):
        bits = 12
        eps = Fraction(1, 1 << bits)
        rng = np.random.default_rng(11)
        checked = 0
        for _ in range(400):
            x = float(rng.normal())
            u = float(rng.uniform(2.0 ** -bits, 1.0))
            if not S.branch_consistency_check(eps, alpha, x, u):
                continue
            checked += 1
            xt = math.floor(x / eps) * float(eps)
            ut = math.floor(u / eps) * float(eps)
            assert ((S.gamma_sample_mt(alpha, x, u) is None)
                    == (S.gamma_sample_mt(alpha, xt, ut) is None))
        assert checked > 300  # the checker passes on typical inputs


class TestSlopeBound:
    def test_zero_at_origin(self):
        for alpha in (1, 2, 5):
            assert S.accept_curve_slope(alpha, 0.0) == 0.0

    def test_vanishes_at_domain_ends(self):
        c = 1 / math.sqrt(6.0)
        assert abs(S.accept_curve_slope(1, -1 / c + 1e-9)) < 1e-6
        assert abs(S.accept_curve_slope(1, 200.0)) < 1e-12

    def test_bound_dominates_grid(self):
        eta = S.accept_curve_slope_bound()
        assert eta >= 1.0
        worst = 0.0
        for alpha in [1, 2, 3, 5, 9, 17, 65]:
            c = 1 / math.sqrt(9.0 * alpha - 3.0)
            xs = np.concatenate([
                -1 / c + (1 / c) * np.geomspace(1e-8, 1.0, 600)[:-1],
                np.geomspace(1e-3, 50.0 / c, 600),
            ])
            worst = max(worst, float(np.max(np.abs(S.accept_curve_slope(alpha, xs)))))
        assert eta >= worst

    def test_internal_grid_width(self):
        eta = S.accept_curve_slope_bound()
        pad = math.ceil(math.log2(eta + 3.0))
        for m in range(1, 13):
            m1 = S.internal_grid_bits(m)
            assert m1 == 3 * m + 3 + pad
            assert m1 > 3 * m + 4

    def test_budgets(self):
        for m in (1, 4, 8):
            m1 = S.internal_grid_bits(m)
            assert S.randomness_budget_gaussian(m1) == 2 * (m1 + 32)
            assert S.randomness_budget_beta(m) == 2 * m * (2 * (m1 + 32) + m1)


class TestRoundedGaussian:
    def test_all_ones_block_is_zero(self):
        # kx all ones means X = 1, so the Box-Muller radius is 0.
        m1 = 12
        nbits = S.randomness_budget_gaussian(m1)
        tape = RandomTape(bytes([0xFF] * (nbits // 8)), nbits)
        assert S.sample_rounded_gaussian(m1, 8.0, tape).numerator == 0

    def test_clipped_to_bound(self):
        m1, bound = 10, 2.0
        for i in range(300):
            tape = RandomTape.from_seed(i.to_bytes(4, "big"),
                                        S.randomness_budget_gaussian(m1))
            v = S.sample_rounded_gaussian(m1, bound, tape)
            assert abs(v.as_fraction()) <= bound
            assert v.precision_bits == m1

    def test_deterministic_and_exhausting(self):
        m1 = 20
        nbits = S.randomness_budget_gaussian(m1)
        data = RandomTape.from_seed(b"g", nbits)
        v1 = S.sample_rounded_gaussian(m1, 10.0, RandomTape.from_seed(b"g", nbits))
        v2 = S.sample_rounded_gaussian(m1, 10.0, RandomTape.from_seed(b"g", nbits))
        assert v1 == v2
        short = RandomTape.from_seed(b"g", nbits - 1)
        with pytest.raises(TapeExhausted):
            S.sample_rounded_gaussian(m1, 10.0, short)

    def test_law_quick(self):
        from haarforge.verify import grid_cdf_distance, rounded_gaussian_masses

        rng = np.random.default_rng(5)
        nums = S.sample_rounded_gaussian_many(10, 8.0, 50_000, rng)
        assert grid_cdf_distance(nums, rounded_gaussian_masses(10, 8.0)) <= 0.01


class TestBetaSamplers:
    def test_exact_sampler_center(self):
        m = 4
        assert S.beta_sample_exact(m, 1, [0.0] * (2 * m), [0.5] * (2 * m)) == 0.5

    def test_exact_sampler_exhausts(self):
        m = 3
        xs = [-math.sqrt(6.0)] * (2 * m)
        assert S.beta_sample_exact(m, 1, xs, [0.5] * (2 * m)) is None

    def test_grid_sampler_center(self):
        m = 4
        m1 = S.internal_grid_bits(m)
        xs = [FixedPointValue(0, m1)] * (2 * m)
        us = [FixedPointValue(1 << (m1 - 1), m1)] * (2 * m)
        out = S.beta_sample_grid(m, 1, xs, us)
        assert out == FixedPointValue(1 << (m - 1), m)

    def test_grid_sampler_fallback_is_half(self):
        m = 2
        m1 = S.internal_grid_bits(m)
        xs = [FixedPointValue(-(2 * m) << m1, m1)] * (2 * m)
        us = [FixedPointValue(1, m1)] * (2 * m)
        assert S.beta_sample_grid(m, 1, xs, us).as_fraction() == Fraction(1, 2)

    def test_grid_sampler_validation(self):
        m = 2
        m1 = S.internal_grid_bits(m)
        good_x = [FixedPointValue(0, m1)] * (2 * m)
        good_u = [FixedPointValue(1, m1)] * (2 * m)
        with pytest.raises(ValueError):
            S.beta_sample_grid(m, 1, good_x[:-1], good_u)
        with pytest.raises(ValueError):
            S.beta_sample_grid(m, 1, [FixedPointValue(0, m1 + 1)] * (2 * m), good_u)
        with pytest.raises(ValueError):
            S.beta_sample_grid(m, 1, good_x, [FixedPointValue(1 << m1, m1)] * (2 * m))

    def test_tape_budget_and_determinism(self):
        m, alpha = 4, 2
        nbits = S.randomness_budget_beta(m)
        tape = RandomTape.from_seed(b"b", nbits)
        v1 = S.sample_rounded_beta(m, alpha, tape)
        assert tape.remaining == 0
        v2 = S.sample_rounded_beta(m, alpha, RandomTape.from_seed(b"b", nbits))
        assert v1 == v2
        assert 0 <= v1.as_fraction() <= 1

    def test_outputs_stay_on_grid(self):
        m, alpha = 3, 4
        nbits = S.randomness_budget_beta(m)
        for i in range(200):
            tape = RandomTape.from_seed(i.to_bytes(4, "big"), nbits, label=b"grid")
            v = S.sample_rounded_beta(m, alpha, tape)
            assert v.precision_bits == m
            assert 0 <= v.numerator <= 1 << m

    def test_coarsest_grid_masses(self):
        # At one output bit the uniform Beta(1,1) law rounds to {0, 1/2, 1}
        # with masses (1/4, 1/2, 1/4); the sampler gets one retry per loop
        # at m = 1, so the fall-back-to-1/2 branch fires with probability
        # 1 - p^2 where p ~ 0.9517 is the Gamma acceptance rate.
        rng = np.random.default_rng(9)
        nums = S.sample_rounded_beta_many(1, 1, 50_000, rng)
        freq = {k: c / len(nums) for k, c in zip(*np.unique(nums, return_counts=True))}
        fallback = 1.0 - 0.9516677 ** 2
        assert freq[0] == pytest.approx(0.25 * (1 - fallback), abs=0.01)
        assert freq[1] == pytest.approx(0.50 * (1 - fallback) + fallback, abs=0.01)
        assert freq[2] == pytest.approx(0.25 * (1 - fallback), abs=0.01)
        mean = float(nums.mean()) / 2.0
        assert mean == pytest.approx(0.5, abs=0.01)  # symmetric law

    def test_law_matches_oracle_quick(self):
        from haarforge.verify import rounded_beta_masses, tv_distance_discrete

        rng = np.random.default_rng(10)
        nums = S.sample_rounded_beta_many(4, 1, 50_000, rng)
        hist = {int(k): int(c) for k, c in zip(*np.unique(nums, return_counts=True))}
        assert tv_distance_discrete(hist, rounded_beta_masses(4, 1)) <= 0.02


class _ReplayRng:
    """Feeds pre-drawn field arrays to the batch path."""

    def __init__(self, fields):
        self.fields = list(fields)

    def integers(self, low, high, size=None, dtype=None, endpoint=False):
        return self.fields.pop(0)


class TestFastPathEquivalence:
    @pytest.mark.parametrize("m,alpha", [(2, 1), (4, 1), (8, 2), (8, 4)])
    def test_beta_batch_matches_scalar(self, m, alpha):
        m1 = S.internal_grid_bits(m)
        k = m1 + 32
        rng = np.random.default_rng(1234 + m + alpha)
        count = 300
        kx = rng.integers(0, 1 << k, size=(count, 2 * m), dtype=np.uint64)
        ky = rng.integers(0, 1 << k, size=(count, 2 * m), dtype=np.uint64)
        ku = rng.integers(0, 1 << m1, size=(count, 2 * m), dtype=np.uint64)
        scalar = np.array([
            S._beta_from_fields(m, alpha, kx[i].tolist(), ky[i].tolist(), ku[i].tolist())
            for i in range(count)
        ])
        batch = _fastpath.rounded_beta_many(m, alpha, count, _ReplayRng([kx, ky, ku]))
        np.testing.assert_array_equal(batch, scalar)

    def test_gaussian_batch_matches_scalar(self):
        m1, bound = 20, 10.0
        k = m1 + 32
        rng = np.random.default_rng(77)
        kx = rng.integers(0, 1 << k, size=500, dtype=np.uint64)
        ky = rng.integers(0, 1 << k, size=500, dtype=np.uint64)
        batch = _fastpath.rounded_gaussian_many(m1, bound, 500, _ReplayRng([kx, ky]))
        scalar = np.array([S._gaussian_from_fields(m1, bound, int(a), int(b))
                           for a, b in zip(kx, ky)])
        np.testing.assert_array_equal(batch, scalar)

    def test_wide_grids_are_rejected(self):
        with pytest.raises(ValueError):
            _fastpath.rounded_beta_many(11, 1, 10, np.random.default_rng(0))


class TestCheckedTraceOracle:
    @pytest.mark.parametrize("alpha", [1, 2])
    def test_grid_sampler_matches_checked_traces(self, alpha):
        m = 3
        m1 = S.internal_grid_bits(m)
        rng = np.random.default_rng(2024 + alpha)
        values = 0
        for _ in range(400):
            xs = [float(v) for v in rng.normal(size=2 * m)]
            us = [float(v) for v in rng.uniform(size=2 * m)]
            outcome = beta_sample_checked(m, alpha, xs, us)
            if outcome in (FAIL, REJECT_ROUNDING):
                continue
            values += 1
            got = S.beta_sample_grid(
                m, alpha,
                [grid_value(x, m1) for x in xs],
                [grid_value(u, m1) for u in us],
            )
            assert got.numerator == outcome
        assert values > 300  # rounding guards rarely trip on honest inputs


class TestRatioMapPartials:
    def test_partials_bounded_away_from_origin(self):
        # The output rounding analysis leans on the ratio map
        # f(x, y) = x^3 / (x^3 + y^3) having partials inside (0, 1/delta)
        # and (-1/delta, 0) once either coordinate exceeds delta.
        delta = 0.1
        xs = np.linspace(0.005, 3.0, 120)
        ys = np.linspace(0.005, 3.0, 120)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        keep = (gx > delta) | (gy > delta)
        dfdx = 3.0 * gx**2 * gy**3 / (gx**3 + gy**3) ** 2
        dfdy = -3.0 * gy**2 * gx**3 / (gx**3 + gy**3) ** 2
        assert np.all(dfdx[keep] > 0) and np.all(dfdx[keep] < 1 / delta)
        assert np.all(dfdy[keep] < 0) and np.all(dfdy[keep] > -1 / delta)
        # spot-check the closed form against central differences
        h = 1e-7
        for x, y in ((0.2, 0.9), (1.4, 0.15), (2.0, 2.0)):
            f = lambda a, b: a**3 / (a**3 + b**3)
            num = (f(x + h, y) - f(x - h, y)) / (2 * h)
            assert num == pytest.approx(3 * x**2 * y**3 / (x**3 + y**3) ** 2, rel=1e-5)


class TestExactSamplerFailureRate:
    def test_no_failures_at_eight_rounds(self):
        # With eight retries per loop the failure probability is below
        # 2**-31; 10^5 honest runs should show none.
        m, alpha = 8, 1
        rng = np.random.default_rng(31)
        xs = rng.normal(size=(100_000, 2 * m))
        us = rng.uniform(size=(100_000, 2 * m))
        _, accept = S.gamma_sample_mt_batch(alpha, xs, us)
        lane_a = accept[:, 0::2].any(axis=1)
        lane_b = accept[:, 1::2].any(axis=1)
        assert int((~(lane_a & lane_b)).sum()) == 0


class TestSlopeCacheConcurrency:
    def test_first_use_is_thread_safe(self, monkeypatch):
        import threading

        import haarforge.sampling as mod

        monkeypatch.setattr(mod, "_eta_cache", None)
        results = []

        def worker():
            results.append(mod.accept_curve_slope_bound())

        threads = [threading.Thread(target=worker) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert len(set(results)) == 1 and results[0] >= 1.0
