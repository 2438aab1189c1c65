import math
from fractions import Fraction

import numpy as np
import pytest

from haarforge import golden
from haarforge.generator import (PrecisionConfig, StateParams,
                                 assemble_isometry, build_params_from_oracle,
                                 build_state, generate_prfs_column,
                                 generate_prs, load_state_bin, load_state_json,
                                 make_oracle, perturb_params, save_state_bin,
                                 save_state_json, state_json_text,
                                 theta_from_beta)
from haarforge.verify import (ks_test, state_perturbation_bound,
                              trace_distance_pure)
from haarforge.numerics import regularized_incomplete_beta


def _uniform_params(n: int, rng, grid_bits: int = 24) -> StateParams:
    params = StateParams(n=n)
    for t in range(n):
        for z in range(1 << t):
            params.betas[(t, z)] = Fraction(
                int(rng.integers(0, (1 << grid_bits) + 1)), 1 << grid_bits)
    for z in range(1 << n):
        params.phases[z] = Fraction(int(rng.integers(0, 1 << grid_bits)),
                                    1 << grid_bits)
    return params


class TestPrecisionConfig:
    def test_derived_parameters(self):
        cfg = PrecisionConfig(n=3, lam=10, m=2)
        assert cfg.lambda_prime == 14
        assert cfg.eps1 == Fraction(1, 1 << 17)
        assert cfg.eps2 == Fraction(1, 1 << 14)
        assert cfg.beta_grid_bits == cfg.theta_bits == 17
        assert cfg.oracle_input_bits == 6

    def test_validation(self):
        with pytest.raises(ValueError):
            PrecisionConfig(n=0, lam=4)
        with pytest.raises(ValueError):
            PrecisionConfig(n=1, lam=0)
        with pytest.raises(ValueError):
            PrecisionConfig(n=1, lam=4, m=-1)


class TestThetaFromBeta:
    def test_endpoints(self):
        cfg = PrecisionConfig(n=2, lam=8)
        theta, amp_sq = theta_from_beta(Fraction(1), cfg)
        assert theta.numerator == 0 and amp_sq == 1.0
        theta, amp_sq = theta_from_beta(Fraction(0), cfg)
        assert theta.as_fraction() == Fraction(1, 4)
        assert amp_sq <= 1e-20

    def test_half_gives_eighth_turn(self):
        cfg = PrecisionConfig(n=2, lam=8)
        theta, amp_sq = theta_from_beta(Fraction(1, 2), cfg)
        assert theta.as_fraction() == Fraction(1, 8)
        assert amp_sq == pytest.approx(0.5, abs=2 * math.pi * float(cfg.eps1))

    def test_angle_realizes_beta_within_grid_error(self):
        cfg = PrecisionConfig(n=3, lam=12)
        rng = np.random.default_rng(4)
        tol = 2 * math.pi * float(cfg.eps1)
        for _ in range(300):
            b = Fraction(int(rng.integers(0, (1 << cfg.beta_grid_bits) + 1)),
                         1 << cfg.beta_grid_bits)
            theta, amp_sq = theta_from_beta(b, cfg)
            assert Fraction(0) <= theta.as_fraction() <= Fraction(1, 4)
            assert abs(amp_sq - float(b)) <= tol


class TestBuildState:
    def test_single_qubit_certain(self):
        cfg = PrecisionConfig(n=1, lam=4)
        params = StateParams(n=1, betas={(0, 0): Fraction(1)},
                             phases={0: Fraction(0), 1: Fraction(0)})
        np.testing.assert_allclose(build_state(params, cfg), [1.0, 0.0], atol=1e-15)

    def test_single_qubit_minus(self):
        cfg = PrecisionConfig(n=1, lam=4)
        params = StateParams(n=1, betas={(0, 0): Fraction(1, 2)},
                             phases={0: Fraction(0), 1: Fraction(1, 2)})
        expected = np.array([1.0, -1.0]) / math.sqrt(2.0)
        np.testing.assert_allclose(build_state(params, cfg), expected, atol=1e-15)

    def test_two_qubit_correlated(self):
        cfg = PrecisionConfig(n=2, lam=4)
        params = StateParams(
            n=2,
            betas={(0, 0): Fraction(1, 2), (1, 0): Fraction(1), (1, 1): Fraction(0)},
            phases={z: Fraction(0) for z in range(4)},
        )
        expected = np.array([1.0, 0.0, 0.0, 1.0]) / math.sqrt(2.0)
        np.testing.assert_allclose(build_state(params, cfg), expected, atol=1e-15)

    def test_incomplete_params_rejected(self):
        cfg = PrecisionConfig(n=2, lam=4)
        with pytest.raises(ValueError):
            build_state(StateParams(n=2), cfg)

    def test_unit_norm_and_exact_tree_conservation(self):
        rng = np.random.default_rng(12)
        for _ in range(100):
            n = int(rng.integers(1, 6))
            params = _uniform_params(n, rng)
            state = build_state(params, PrecisionConfig(n=n, lam=6))
            assert abs(np.linalg.norm(state) - 1.0) <= 1e-12
            # telescoping check in exact arithmetic: per-leaf products
            # computed independently sum to exactly 1
            total = Fraction(0)
            for z in range(1 << n):
                weight = Fraction(1)
                for t in range(n):
                    b = params.betas[(t, z >> (n - t))]
                    weight *= b if ((z >> (n - t - 1)) & 1) == 0 else 1 - b
                total += weight
            assert total == 1


class TestGeneratePrs:
    def test_deterministic(self):
        cfg = PrecisionConfig(n=2, lam=6)
        a = generate_prs(make_oracle(cfg, "random", seed=b"det"), cfg)
        b = generate_prs(make_oracle(cfg, "random", seed=b"det"), cfg)
        np.testing.assert_array_equal(a, b)

    def test_unit_norm_many_seeds(self):
        cfg = PrecisionConfig(n=3, lam=8)
        for i in range(100):
            psi = generate_prs(make_oracle(cfg, "random", seed=bytes([i])), cfg)
            assert abs(np.linalg.norm(psi) - 1.0) <= 1e-12

    def test_golden_state(self):
        amps, n, m = load_state_json_from_text(golden.shipped_text(golden.STATE_FILE))
        cfg = PrecisionConfig(**golden._STATE_CFG)
        fresh = generate_prs(make_oracle(cfg, "random", seed=golden._STATE_SEED), cfg)
        np.testing.assert_array_equal(fresh, amps)

    def test_requires_m_zero(self):
        cfg = PrecisionConfig(n=2, lam=6, m=1)
        with pytest.raises(ValueError):
            generate_prs(make_oracle(cfg, "random", seed=b"x"), cfg)

    def test_params_deterministic_and_leaf_level_uniform(self):
        cfg = PrecisionConfig(n=1, lam=16)
        oracle = make_oracle(cfg, "random", seed=b"once")
        p1 = build_params_from_oracle(oracle, cfg)
        p2 = build_params_from_oracle(oracle, cfg)
        assert p1.betas == p2.betas and p1.phases == p2.phases
        # the deepest level draws Beta(1, 1): the root value over fresh
        # oracles is uniform on [0, 1]
        draws = []
        for i in range(30_000):
            orc = make_oracle(cfg, "random", seed=b"u" + i.to_bytes(4, "big"))
            draws.append(float(build_params_from_oracle(orc, cfg).betas[(0, 0)]))
        stat, p = ks_test(np.sort(draws), lambda x: x)
        assert stat <= 0.015 and p >= 1e-4

    def test_marginal_law_quick(self):
        cfg = PrecisionConfig(n=3, lam=12)
        dim = 1 << cfg.n
        probs = []
        for i in range(2000):
            psi = generate_prs(make_oracle(cfg, "random", seed=b"m" + bytes([i % 256, i // 256])), cfg)
            probs.append(abs(psi[0]) ** 2)
        stat, p = ks_test(np.sort(probs),
                          lambda x: regularized_incomplete_beta(1, dim - 1, x))
        assert p >= 0.001


class TestPrfsColumns:
    def test_deterministic_per_input(self):
        cfg = PrecisionConfig(n=2, lam=4, m=2)
        oracle = make_oracle(cfg, "random", seed=b"col")
        np.testing.assert_array_equal(generate_prfs_column(oracle, cfg, 3),
                                      generate_prfs_column(oracle, cfg, 3))

    def test_columns_assemble_to_isometry(self):
        cfg = PrecisionConfig(n=2, lam=4, m=2)
        oracle = make_oracle(cfg, "random", seed=b"iso")
        cols = [generate_prfs_column(oracle, cfg, x) for x in range(4)]
        v = assemble_isometry(cols, cfg.m)
        gram = v.conj().T @ v
        assert np.max(np.abs(gram - np.eye(4))) <= 1e-9

    def test_independent_columns_overlap_like_haar(self):
        cfg = PrecisionConfig(n=3, lam=8, m=1)
        overlaps = []
        for i in range(400):
            oracle = make_oracle(cfg, "random", seed=b"ov" + i.to_bytes(2, "big"))
            psi0 = generate_prfs_column(oracle, cfg, 0)
            psi1 = generate_prfs_column(oracle, cfg, 1)
            overlaps.append(abs(np.vdot(psi0, psi1)) ** 2)
        mean = float(np.mean(overlaps))
        sigma = float(np.std(overlaps, ddof=1)) / math.sqrt(len(overlaps))
        assert abs(mean - 1.0 / 8.0) <= 4 * sigma

    def test_requires_m_positive(self):
        cfg = PrecisionConfig(n=2, lam=4)
        with pytest.raises(ValueError):
            generate_prfs_column(make_oracle(cfg, "random", seed=b"x"), cfg, 0)


class TestPerturbation:
    def test_zero_deltas_change_nothing(self):
        rng = np.random.default_rng(1)
        params = _uniform_params(3, rng)
        moved = perturb_params(params, 0.0, 0.0, rng)
        assert moved.betas == params.betas and moved.phases == params.phases

    def test_extremes_stay_in_range(self):
        rng = np.random.default_rng(2)
        params = StateParams(n=1, betas={(0, 0): Fraction(0)},
                             phases={0: Fraction(0), 1: Fraction(999, 1000)})
        for _ in range(200):
            moved = perturb_params(params, 0.25, 0.25, rng)
            assert 0 <= moved.betas[(0, 0)] <= 1
            assert all(0 <= u < 1 for u in moved.phases.values())
            assert abs(moved.betas[(0, 0)] - params.betas[(0, 0)]) < 0.25

    def test_trace_distance_bound_quick(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            n = int(rng.integers(2, 5))
            cfg = PrecisionConfig(n=n, lam=6)
            d1 = 2.0 ** -int(rng.integers(4, 13))
            d2 = 2.0 ** -int(rng.integers(4, 13))
            params = _uniform_params(n, rng)
            moved = perturb_params(params, d1, d2, rng)
            td = trace_distance_pure(build_state(params, cfg),
                                     build_state(moved, cfg))
            assert td < state_perturbation_bound(n, d1, d2)


class TestStateFiles:
    def test_json_round_trip(self, tmp_path):
        cfg = PrecisionConfig(n=2, lam=4)
        psi = generate_prs(make_oracle(cfg, "random", seed=b"io"), cfg)
        path = tmp_path / "state.json"
        save_state_json(path, psi, cfg.n)
        amps, n, m = load_state_json(path)
        assert (n, m) == (2, 0)
        np.testing.assert_array_equal(amps, psi)

    def test_json_rejects_other_formats(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"format": "something-else", "version": 1}')
        with pytest.raises(ValueError):
            load_state_json(path)

    def test_bin_round_trip(self, tmp_path):
        cfg = PrecisionConfig(n=3, lam=4)
        psi = generate_prs(make_oracle(cfg, "random", seed=b"bin"), cfg)
        path = tmp_path / "state.bin"
        save_state_bin(path, psi)
        np.testing.assert_array_equal(load_state_bin(path), psi)
        assert path.stat().st_size == 16 * len(psi)


def load_state_json_from_text(text: str):
    import json

    doc = json.loads(text)
    amps = np.array([complex(re, im) for re, im in doc["amplitudes"]],
                    dtype=np.complex128)
    return amps, doc["n"], doc["m"]
