"""Statistical and exact verification: distances, Haar moments, sampler
laws, perturbation bounds, and the distinguisher experiment.

Every battery is deterministic given its seed; verdicts are reproducible
from the recorded raw statistics.  The distinguishing bounds quantify
over all efficient adversaries, while any finite test battery only
lower-bounds adversarial power, so battery output reports observed
advantage next to the theoretical envelope rather than claiming to
verify the envelope itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.special

from . import circuit
from .generator import (PrecisionConfig, StateParams, build_params_from_oracle,
                        build_state, generate_prs, generate_prfs_column,
                        make_oracle, perturb_params)
from .numerics import regularized_incomplete_beta
from .sampling import (gamma_sample_mt_batch, internal_grid_bits,
                       sample_rounded_beta_many, sample_rounded_gaussian_many)

MIN_KS_SAMPLES = 30


# --------------------------------------------------------------------------
# Distances and moments
# --------------------------------------------------------------------------

def trace_distance_pure(a: np.ndarray, b: np.ndarray) -> float:
    """Trace distance sqrt(1 - |<a|b>|^2) between unit vectors.

    Computed as the norm of the projection residual a - <b|a> b, which
    equals the same quantity without the catastrophic cancellation the
    direct formula suffers for nearly identical states; evaluated in
    both argument orders so the result is exactly symmetric.
    """
    if a.shape != b.shape:
        raise ValueError("states must share a dimension")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if abs(na - 1.0) > 1e-9 or abs(nb - 1.0) > 1e-9:
        raise ValueError("states must be unit norm")
    an, bn = a / na, b / nb
    r_ab = float(np.linalg.norm(an - np.vdot(bn, an) * bn))
    r_ba = float(np.linalg.norm(bn - np.vdot(an, bn) * an))
    return min(1.0, 0.5 * (r_ab + r_ba))


def haar_sample(n: int, rng) -> np.ndarray:
    """Haar-random n-qubit state: a normalized complex Gaussian vector."""
    if n < 1:
        raise ValueError("n must be >= 1")
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return (v / np.linalg.norm(v)).astype(np.complex128)


def overlap_moment(ensemble, t: int) -> tuple[float, float]:
    """Mean of |<psi_i|psi_j>|^(2t) over distinct pairs, with a standard
    error from the per-state pair means (U-statistic asymptotics).

    Haar references: 1/N at t = 1 and 2/(N(N+1)) at t = 2.
    """
    if t not in (1, 2):
        raise ValueError("only moments t = 1, 2 are supported")
    k = len(ensemble)
    if k < 2:
        raise ValueError("need at least two states")
    mat = np.asarray(ensemble)
    gram = np.abs(mat @ mat.conj().T) ** (2 * t)
    np.fill_diagonal(gram, 0.0)
    estimate = float(gram.sum() / (k * (k - 1)))
    per_state = gram.sum(axis=1) / (k - 1)
    std_error = 2.0 * float(np.std(per_state, ddof=1)) / math.sqrt(k)
    return estimate, std_error


def haar_moment_reference(n: int, t: int) -> float:
    dim = 1 << n
    return 1.0 / dim if t == 1 else 2.0 / (dim * (dim + 1))


# --------------------------------------------------------------------------
# Classical test statistics
# --------------------------------------------------------------------------

def _kolmogorov_sf(y: float) -> float:
    """Asymptotic two-sided Kolmogorov survival function."""
    if y < 1.1e-16:
        return 1.0
    total, sign, k = 0.0, 1.0, 1
    while True:
        term = math.exp(-2.0 * k * k * y * y)
        total += sign * term
        if term <= 1e-18 * max(total, 1e-300) or k > 200:
            break
        sign = -sign
        k += 1
    return max(0.0, min(1.0, 2.0 * total))


def ks_test(samples, cdf) -> tuple[float, float]:
    """One-sample two-sided Kolmogorov-Smirnov test against a CDF oracle.

    samples must be sorted ascending and NaN-free; the p-value uses the
    asymptotic Kolmogorov distribution, adequate at the enforced minimum
    sample count.
    """
    xs = np.asarray(samples, dtype=float)
    if xs.ndim != 1 or len(xs) < MIN_KS_SAMPLES:
        raise ValueError(f"need at least {MIN_KS_SAMPLES} samples")
    if np.any(np.isnan(xs)):
        raise ValueError("samples contain NaN")
    if np.any(np.diff(xs) < 0):
        raise ValueError("samples must be sorted ascending")
    n = len(xs)
    f = np.asarray(cdf(xs), dtype=float)
    grid = np.arange(1, n + 1) / n
    d = float(max(np.max(grid - f), np.max(f - (grid - 1.0 / n))))
    return d, _kolmogorov_sf(math.sqrt(n) * d)


def ks_statistic_two_sample(a, b) -> float:
    """Two-sample KS statistic: the best single-threshold separation of
    the two empirical distributions."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    both = np.concatenate([a, b])
    ca = np.searchsorted(a, both, side="right") / len(a)
    cb = np.searchsorted(b, both, side="right") / len(b)
    return float(np.max(np.abs(ca - cb)))


def tv_distance_discrete(hist: dict, exact: dict) -> float:
    """Half the L1 distance between an empirical histogram (counts) and
    exact probabilities over an aligned grid."""
    extra = set(hist) - set(exact)
    if extra:
        raise ValueError(f"histogram keys outside the exact support: {sorted(extra)[:4]}")
    total = sum(hist.values())
    if total <= 0:
        raise ValueError("empty histogram")
    acc = 0.0
    for key, p in exact.items():
        acc += abs(hist.get(key, 0) / total - p)
    return 0.5 * acc


# --------------------------------------------------------------------------
# Exact law oracles for the rounded samplers
# --------------------------------------------------------------------------

def rounded_beta_masses(m: int, alpha: int) -> dict[int, float]:
    """Exact masses of the rounded symmetric Beta law on grid 2**-m,
    keyed by grid numerator (round-half-up cells)."""
    edges = (np.arange(1 << m, dtype=float) + 0.5) / (1 << m)
    cdf = np.concatenate([[0.0],
                          regularized_incomplete_beta(alpha, alpha, edges),
                          [1.0]])
    return {k: float(cdf[k + 1] - cdf[k]) for k in range((1 << m) + 1)}


def rounded_gaussian_masses(m1: int, bound_b: float) -> dict[int, float]:
    """Exact masses of the clipped-and-floored standard normal on grid
    2**-m1, keyed by grid numerator; the clip mass |z| > bound_b lands
    on 0."""
    eps = 2.0 ** -m1
    lo = math.floor(-bound_b / eps)
    hi = math.ceil(bound_b / eps)
    ks = np.arange(lo, hi)
    left = np.maximum(ks * eps, -bound_b)
    right = np.minimum((ks + 1) * eps, bound_b)
    masses = scipy.special.ndtr(right) - scipy.special.ndtr(left)
    out = {int(k): float(p) for k, p in zip(ks, masses) if p > 0 or k == 0}
    clip = 2.0 * scipy.special.ndtr(-bound_b)
    out[0] = out.get(0, 0.0) + clip
    return out


def grid_cdf_distance(numerators, masses: dict[int, float]) -> float:
    """sup_t |empirical CDF - exact CDF| for samples on a dyadic grid."""
    support = np.array(sorted(masses), dtype=np.int64)
    exact_cdf = np.cumsum([masses[k] for k in support])
    counts = np.zeros(len(support), dtype=np.int64)
    idx = np.searchsorted(support, np.asarray(numerators, dtype=np.int64))
    if np.any(idx >= len(support)) or np.any(support[idx] != numerators):
        raise ValueError("sample off the exact support")
    np.add.at(counts, idx, 1)
    emp_cdf = np.cumsum(counts) / len(numerators)
    return float(np.max(np.abs(emp_cdf - exact_cdf)))


# --------------------------------------------------------------------------
# Perturbation bounds and Choi machinery
# --------------------------------------------------------------------------

def state_perturbation_bound(n: int, delta1: float, delta2: float) -> float:
    """Trace-distance envelope sqrt(2^n * n * delta1) + 2 pi delta2 for
    states whose Beta values moved by < delta1 and phases by < delta2."""
    return math.sqrt((1 << n) * n * delta1) + 2.0 * math.pi * delta2


def isometry_perturbation_bound(n: int, m: int, delta1: float, delta2: float) -> float:
    """Half-diamond-norm envelope 2^m (sqrt(2^n n d1) + 2 pi d2) for
    keyed-state isometries under the same parameter perturbation."""
    return (1 << m) * state_perturbation_bound(n, delta1, delta2)


def haar_distinguishing_bound(n: int, lam: int, queries: int) -> float:
    """Theoretical envelope on any l-query distinguisher's advantage
    against the truly-random backend:
    (1 + sqrt(2 pi)) l sqrt(n) 2^(-lam/2) + 2 pi l 2^-lam + 2^-lam."""
    return ((1.0 + math.sqrt(2.0 * math.pi)) * queries * math.sqrt(n) * 2.0 ** (-lam / 2.0)
            + 2.0 * math.pi * queries * 2.0 ** -lam + 2.0 ** -lam)


def choi_of_isometry(columns) -> np.ndarray:
    """Choi matrix of the channel rho -> V rho V^dag for the isometry V
    whose action on basis input x is the given column.

    For an isometry the Choi matrix is the rank-one operator w w^dag
    with w = sum_x column_x tensor e_x; its trace is 2^m.
    """
    cols = [np.asarray(c, dtype=np.complex128) for c in columns]
    m_dim = len(cols)
    v = np.stack(cols, axis=1)
    if np.max(np.abs(v.conj().T @ v - np.eye(m_dim))) > 1e-9:
        raise ValueError("columns are not an isometry")
    w = np.zeros(len(cols[0]) * m_dim, dtype=np.complex128)
    for x, col in enumerate(cols):
        w += np.kron(col, np.eye(m_dim)[:, x])
    return np.outer(w, w.conj())


def choi_trace_distance(j1: np.ndarray, j2: np.ndarray) -> float:
    """Trace norm ||J1 - J2||_1 via the eigenvalues of the Hermitian
    difference; upper-bounds the diamond-norm distance of the channels."""
    if j1.shape != j2.shape:
        raise ValueError("Choi matrices must share a shape")
    eigs = np.linalg.eigvalsh(j1 - j2)
    return float(np.sum(np.abs(eigs)))


# --------------------------------------------------------------------------
# State sources and the distinguisher experiment
# --------------------------------------------------------------------------

def make_state_source(name: str, cfg: PrecisionConfig, master_seed: bytes):
    """A callable index -> n-qubit state for a named backend.

    "haar": normalized Gaussian vectors; "random": truly-random-function
    generator; "prf": keyed generator (fresh key per state); "zero-phase":
    the random backend with all phases forced to 0 (a deliberately broken
    generator with real amplitudes, used to confirm test power).
    """
    if name == "haar":
        def source(index: int) -> np.ndarray:
            rng = np.random.default_rng(_child_seed(master_seed, index))
            return haar_sample(cfg.n, rng)
        return source
    if name in ("random", "prf"):
        def source(index: int) -> np.ndarray:
            seed = master_seed + index.to_bytes(8, "big")
            return generate_prs(make_oracle(cfg, name, seed=seed), cfg)
        return source
    if name == "zero-phase":
        def source(index: int) -> np.ndarray:
            seed = master_seed + index.to_bytes(8, "big")
            oracle = make_oracle(cfg, "random", seed=seed)
            params = build_params_from_oracle(oracle, cfg)
            params.phases = {z: Fraction(0) for z in params.phases}
            return build_state(params, cfg)
        return source
    raise ValueError(f"unknown state source {name!r}")


def _child_seed(master_seed: bytes, index: int) -> int:
    import hashlib

    digest = hashlib.blake2b(master_seed + index.to_bytes(8, "big"),
                             digest_size=8).digest()
    return int.from_bytes(digest, "big")


def _ensemble_features(source, offset: int, num_states: int, n: int) -> np.ndarray:
    states = [source(offset + i) for i in range(num_states)]
    m1, _ = overlap_moment(states, 1)
    m2, _ = overlap_moment(states, 2)
    marginals = np.array([abs(s[0]) ** 2 for s in states])
    ref = 1 << n
    ks_stat = float(np.max(np.abs(
        np.arange(1, num_states + 1) / num_states
        - (1.0 - (1.0 - np.sort(marginals)) ** (ref - 1)))))
    return np.array([m1, m2, float(marginals.mean()), ks_stat])


@dataclass
class DistinguisherReport:
    """Outcome of the fixed distinguisher battery on two backends."""

    backend_a: str
    backend_b: str
    num_queries: int
    trials: int
    observed_statistic: float
    null_mean: float
    null_std: float
    advantage: float
    ci_halfwidth: float
    theory_bound: float
    per_feature: dict[str, float]

    def consistent_with_zero(self) -> bool:
        return self.advantage <= self.ci_halfwidth

    def to_dict(self) -> dict:
        return {
            "backend_a": self.backend_a,
            "backend_b": self.backend_b,
            "num_queries": self.num_queries,
            "trials": self.trials,
            "observed_statistic": self.observed_statistic,
            "null_mean": self.null_mean,
            "null_std": self.null_std,
            "advantage": self.advantage,
            "ci_halfwidth": self.ci_halfwidth,
            "theory_bound": self.theory_bound,
            "per_feature": self.per_feature,
        }


_FEATURE_NAMES = ("overlap_t1", "overlap_t2", "marginal_mean", "marginal_ks")


def distinguisher_experiment(cfg: PrecisionConfig, backend_a: str, backend_b: str,
                             num_queries: int, trials: int, seed: bytes,
                             permutations: int = 200) -> DistinguisherReport:
    """Run a fixed battery of moment/KS distinguishers on state ensembles
    from two backends.

    Each trial draws num_queries fresh states per backend and reduces
    them to moment/marginal features; the reported statistic is the best
    single-threshold separation (two-sample KS) over features, bias-
    corrected by a label-permutation null.  The theoretical envelope for
    the configured (n, lam, l) is reported alongside.
    """
    if trials < 4:
        raise ValueError("need at least 4 trials per backend")
    source_a = make_state_source(backend_a, cfg, b"A|" + seed)
    source_b = make_state_source(backend_b, cfg, b"B|" + seed)
    feats_a = np.array([_ensemble_features(source_a, t * num_queries, num_queries, cfg.n)
                        for t in range(trials)])
    feats_b = np.array([_ensemble_features(source_b, t * num_queries, num_queries, cfg.n)
                        for t in range(trials)])

    def max_ks(fa, fb):
        return max(ks_statistic_two_sample(fa[:, j], fb[:, j])
                   for j in range(fa.shape[1]))

    observed = max_ks(feats_a, feats_b)
    rng = np.random.default_rng(_child_seed(b"perm|" + seed, 0))
    pooled = np.concatenate([feats_a, feats_b])
    null = np.empty(permutations)
    for p in range(permutations):
        order = rng.permutation(len(pooled))
        null[p] = max_ks(pooled[order[:trials]], pooled[order[trials:]])
    null_mean, null_std = float(null.mean()), float(null.std(ddof=1))
    per_feature = {
        name: ks_statistic_two_sample(feats_a[:, j], feats_b[:, j])
        for j, name in enumerate(_FEATURE_NAMES)
    }
    return DistinguisherReport(
        backend_a=backend_a,
        backend_b=backend_b,
        num_queries=num_queries,
        trials=trials,
        observed_statistic=observed,
        null_mean=null_mean,
        null_std=null_std,
        advantage=max(0.0, observed - null_mean),
        ci_halfwidth=3.0 * null_std,
        theory_bound=haar_distinguishing_bound(cfg.n, cfg.lam, num_queries),
        per_feature=per_feature,
    )


# --------------------------------------------------------------------------
# Batteries
# --------------------------------------------------------------------------

@dataclass
class EnsembleReport:
    """Verdicts plus the raw statistics they were derived from."""

    name: str
    verdicts: dict[str, bool] = field(default_factory=dict)
    statistics: dict[str, float] = field(default_factory=dict)
    ensemble_size: int = 0
    raw: dict[str, list] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def record(self, key: str, ok: bool, **stats):
        self.verdicts[key] = bool(ok)
        for stat_key, value in stats.items():
            self.statistics[f"{key}.{stat_key}"] = float(value)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "ensemble_size": self.ensemble_size,
            "verdicts": self.verdicts,
            "statistics": self.statistics,
        }


def battery_sampler_distance(seed: int = 20240901, gamma_draws: int = 100_000,
                             beta_draws: int = 1_000_000,
                             gaussian_draws: int = 1_000_000) -> EnsembleReport:
    """Sampler laws: Gamma acceptance rate and KS fit, rounded-Beta TV
    distance against exact masses, rounded-Gaussian CDF distance."""
    report = EnsembleReport(name="sampler-distance")
    rng = np.random.default_rng(seed)
    for alpha in (1, 2, 5, 100):
        xs = rng.normal(size=gamma_draws)
        us = rng.random(size=gamma_draws)
        values, accept = gamma_sample_mt_batch(alpha, xs, us)
        rate = float(accept.mean())
        report.record(f"gamma-accept-alpha{alpha}", rate >= 0.94, rate=rate)
    for alpha in (1, 2, 5):
        xs = rng.normal(size=gamma_draws * 10)
        us = rng.random(size=gamma_draws * 10)
        values, accept = gamma_sample_mt_batch(alpha, xs, us)
        kept = np.sort(values[accept])
        stat, _ = ks_test(kept, lambda v, a=alpha: scipy.special.gammainc(a, v))
        report.record(f"gamma-ks-alpha{alpha}", stat <= 0.005, ks=stat)
    for m, alpha in ((4, 1), (8, 2), (8, 4)):
        nums = sample_rounded_beta_many(m, alpha, beta_draws, rng)
        hist = {int(k): int(c) for k, c in zip(*np.unique(nums, return_counts=True))}
        masses = rounded_beta_masses(m, alpha)
        tv = tv_distance_discrete(hist, masses)
        report.record(f"beta-tv-m{m}-alpha{alpha}", tv <= 0.01, tv=tv)
        report.raw[f"grid-law:beta-m{m}-alpha{alpha}"] = {"hist": hist, "exact": masses}
    m1, bound = 20, 10.0
    nums = sample_rounded_gaussian_many(m1, bound, gaussian_draws, rng)
    dist = grid_cdf_distance(nums, rounded_gaussian_masses(m1, bound))
    report.record("gaussian-cdf-distance", dist <= 0.005, distance=dist)
    report.ensemble_size = beta_draws
    return report


def _embed_column(x: int, m: int, psi: np.ndarray) -> np.ndarray:
    """Lift an n-qubit state into the x-block of a keyed-isometry column."""
    col = np.zeros(len(psi) << m, dtype=np.complex128)
    col[x * len(psi):(x + 1) * len(psi)] = psi
    return col


def _random_params(n: int, grid_bits: int, rng) -> StateParams:
    params = StateParams(n=n)
    for t in range(n):
        for z in range(1 << t):
            params.betas[(t, z)] = Fraction(int(rng.integers(0, (1 << grid_bits) + 1)),
                                            1 << grid_bits)
    for z in range(1 << n):
        params.phases[z] = Fraction(int(rng.integers(0, 1 << grid_bits)),
                                    1 << grid_bits)
    return params


def battery_perturbation_bounds(trials: int = 1000, choi_trials: int = 200,
                                seed: int = 20240902) -> EnsembleReport:
    """Hard inequalities: the trace-distance perturbation envelope on
    random states and the Choi trace-norm envelope on keyed isometries."""
    report = EnsembleReport(name="lemma-bounds")
    rng = np.random.default_rng(seed)
    deltas = [2.0 ** -e for e in range(4, 13)]
    failures = 0
    worst = 0.0
    for trial in range(trials):
        n = int(rng.integers(2, 7))
        cfg = PrecisionConfig(n=n, lam=8)
        d1, d2 = rng.choice(deltas), rng.choice(deltas)
        params = _random_params(n, 20, rng)
        moved = perturb_params(params, d1, d2, rng)
        td = trace_distance_pure(build_state(params, cfg), build_state(moved, cfg))
        bound = state_perturbation_bound(n, d1, d2)
        worst = max(worst, td / bound)
        failures += td >= bound
    report.record("state-perturbation", failures == 0,
                  failures=failures, worst_ratio=worst)

    n = m = 2
    cfg = PrecisionConfig(n=n, lam=8, m=m)
    failures = 0
    worst = 0.0
    for trial in range(choi_trials):
        d1, d2 = rng.choice(deltas), rng.choice(deltas)
        base_cols, moved_cols = [], []
        for x in range(1 << m):
            params = _random_params(n, 20, rng)
            moved = perturb_params(params, d1, d2, rng)
            base_cols.append(_embed_column(x, m, build_state(params, cfg)))
            moved_cols.append(_embed_column(x, m, build_state(moved, cfg)))
        j1 = choi_of_isometry(base_cols)
        j2 = choi_of_isometry(moved_cols)
        half_norm = 0.5 * choi_trace_distance(j1, j2)
        bound = isometry_perturbation_bound(n, m, d1, d2)
        worst = max(worst, half_norm / bound)
        failures += half_norm >= bound
    report.record("isometry-perturbation", failures == 0,
                  failures=failures, worst_ratio=worst)
    report.ensemble_size = trials
    return report


def battery_haar_moments(n: int = 3, lam: int = 16, backend: str = "random",
                         ensemble_size: int = 2000,
                         seed: bytes = b"haar-moments") -> EnsembleReport:
    """Haar-moment agreement between generated and reference ensembles;
    the reference sigma comes from the same-size Haar ensemble."""
    cfg = PrecisionConfig(n=n, lam=lam)
    report = EnsembleReport(name="haar-moments")
    report.ensemble_size = ensemble_size
    report.statistics["n"] = float(n)
    gen_source = make_state_source(backend, cfg, b"gen|" + seed)
    haar_source = make_state_source("haar", cfg, b"ref|" + seed)
    generated = [gen_source(i) for i in range(ensemble_size)]
    reference = [haar_source(i) for i in range(ensemble_size)]
    raw_overlaps = {}
    for t in (1, 2):
        target = haar_moment_reference(n, t)
        est_g, se_g = overlap_moment(generated, t)
        est_h, se_h = overlap_moment(reference, t)
        report.record(f"generated-t{t}", abs(est_g - target) <= 3 * se_h,
                      estimate=est_g, target=target, sigma=se_h)
        report.record(f"haar-t{t}", abs(est_h - target) <= 3 * se_h,
                      estimate=est_h, target=target, sigma=se_h)
        cross_sigma = math.hypot(se_g, se_h)
        report.record(f"cross-t{t}", abs(est_g - est_h) <= 3 * cross_sigma,
                      difference=est_g - est_h, sigma=cross_sigma)
    mat = np.asarray(generated)
    gram = np.abs(mat @ mat.conj().T) ** 2
    report.raw["pairwise_overlap_sq"] = gram[np.triu_indices(len(generated), 1)].tolist()
    return report


def battery_marginal(n: int = 3, lam: int = 16, backend: str = "random",
                     count: int = 10_000, seed: bytes = b"marginal") -> EnsembleReport:
    """KS fit of the first-basis-state probability against its Beta
    marginal law Beta(1, 2^n - 1)."""
    cfg = PrecisionConfig(n=n, lam=lam)
    report = EnsembleReport(name="marginal")
    report.ensemble_size = count
    report.statistics["n"] = float(n)
    source = make_state_source(backend, cfg, b"marg|" + seed)
    marginals = np.sort([abs(source(i)[0]) ** 2 for i in range(count)])
    dim = 1 << n
    stat, p = ks_test(marginals,
                      lambda x: regularized_incomplete_beta(1, dim - 1, x))
    report.record("marginal-ks", p >= 0.01, statistic=stat, p_value=p)
    report.raw["marginals"] = marginals.tolist()
    return report


def battery_isometry(n: int = 2, m: int = 2, lam: int = 8,
                     backend: str = "random",
                     seed: bytes = b"isometry") -> EnsembleReport:
    """Keyed-isometry health at gate level: V^dag V = I on the assembled
    columns, ancilla hygiene implicit in every circuit run, and agreement
    with the direct column construction."""
    cfg = PrecisionConfig(n=n, lam=lam, m=m)
    report = EnsembleReport(name="isometry")
    oracle = make_oracle(cfg, backend, seed=b"iso|" + seed)
    columns = []
    worst_td = 0.0
    for x in range(1 << m):
        basis = np.zeros(1 << m, dtype=np.complex128)
        basis[x] = 1.0
        full = circuit.run_full_circuit_keyed(oracle, cfg, basis)
        columns.append(full)
        col = generate_prfs_column(oracle, cfg, x)
        direct = np.zeros_like(full)
        direct[x * (1 << n):(x + 1) * (1 << n)] = col
        worst_td = max(worst_td, trace_distance_pure(full, direct))
    v = np.stack(columns, axis=1)
    gram_err = float(np.max(np.abs(v.conj().T @ v - np.eye(1 << m))))
    report.record("isometry-gram", gram_err <= 1e-9, max_error=gram_err)
    report.record("column-equivalence", worst_td <= 1e-9, worst_td=worst_td)
    report.ensemble_size = 1 << m
    return report


def battery_path_equivalence(pairs=None, seeds_per_pair: int = 3,
                             seed: bytes = b"path-eq") -> EnsembleReport:
    """Trace distance between the gate-level and direct constructions on
    a sweep of (n, lam) instances."""
    report = EnsembleReport(name="path-equivalence")
    if pairs is None:
        pairs = [(n, lam) for n in range(1, 5) for lam in range(1, 9)]
    worst = 0.0
    runs = 0
    for n, lam in pairs:
        cfg = PrecisionConfig(n=n, lam=lam)
        for s in range(seeds_per_pair):
            oracle = make_oracle(cfg, "random",
                                 seed=b"pe|" + seed + bytes([n, lam, s]))
            td = trace_distance_pure(circuit.run_full_circuit(oracle, cfg),
                                     generate_prs(oracle, cfg))
            worst = max(worst, td)
            runs += 1
    report.record("path-equivalence", worst <= 1e-9, worst_td=worst, runs=runs)
    report.ensemble_size = runs
    return report


def battery_golden(seed: int = 0) -> EnsembleReport:
    """Recheck the golden vectors shipped with the package."""
    from . import golden

    report = EnsembleReport(name="golden")
    for name, ok, detail in golden.check_all():
        report.record(name, ok, **detail)
    return report


BATTERIES = {
    "sampler-distance": battery_sampler_distance,
    "lemma-bounds": battery_perturbation_bounds,
    "haar-moments": battery_haar_moments,
    "marginal": battery_marginal,
    "isometry": battery_isometry,
    "path-equivalence": battery_path_equivalence,
    "golden": battery_golden,
}
