"""Command-line surface: generate states, run verification batteries,
and run distinguisher experiments.

Exit codes: 0 pass, 1 battery/test failure, 2 usage or configuration
error, 3 I/O error.  Every subcommand is deterministic given its seeds;
seeds and keys come from explicit flags or the HAARFORGE_SEED /
HAARFORGE_KEY environment variables, never from OS entropy unless
--fresh-entropy is passed (whose output is labeled nonreproducible).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="haarforge",
        description="Scalable pseudorandom quantum state generation and verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate one state and write it to a file")
    _add_size_flags(gen)
    gen.add_argument("--backend", choices=("random", "prf"), default="random")
    gen.add_argument("--seed", help="hex master seed (or HAARFORGE_SEED)")
    gen.add_argument("--key", help="hex PRF key material (or HAARFORGE_KEY)")
    gen.add_argument("--x", type=int, default=0,
                     help="basis input selecting the column when m > 0")
    gen.add_argument("--fresh-entropy", action="store_true",
                     help="seed from the OS; output is NOT reproducible")
    gen.add_argument("--out", help="output path (default: print summary only)")
    gen.add_argument("--format", choices=("json", "bin"), default="json")

    ver = sub.add_parser("verify", help="run a verification battery")
    _add_size_flags(ver)
    ver.add_argument("--battery", default="default",
                     help="battery name or 'default' (see --list-batteries)")
    ver.add_argument("--list-batteries", action="store_true")
    ver.add_argument("--backend", choices=("random", "prf"), default="random")
    ver.add_argument("--seed", help="hex seed for the test batteries")
    ver.add_argument("--ensemble", type=int, help="ensemble size where applicable")
    ver.add_argument("--trials", type=int, help="trial count where applicable")
    ver.add_argument("--out", help="directory for the JSON/CSV/figure report")
    ver.add_argument("--json", action="store_true", help="print the report as JSON")

    dis = sub.add_parser("distinguish", help="run the distinguisher experiment")
    _add_size_flags(dis)
    dis.add_argument("--backend-a", required=True,
                     choices=("random", "prf", "haar", "zero-phase"))
    dis.add_argument("--backend-b", required=True,
                     choices=("random", "prf", "haar", "zero-phase"))
    dis.add_argument("--queries", type=int, default=40,
                     help="states drawn per trial (the adversary's l)")
    dis.add_argument("--trials", type=int, default=24)
    dis.add_argument("--seed", help="hex seed")
    dis.add_argument("--out", help="directory for the JSON report and figure")
    dis.add_argument("--json", action="store_true")
    return parser


def _add_size_flags(sub):
    sub.add_argument("--n", type=int, default=3, help="output qubits")
    sub.add_argument("--m", type=int, default=0, help="input qubits (0 = plain)")
    sub.add_argument("--lambda", dest="lam", type=int, default=16,
                     help="security parameter")


def _seed_bytes(args, required: bool = True) -> bytes | None:
    if getattr(args, "fresh_entropy", False):
        print("warning: --fresh-entropy output is not reproducible", file=sys.stderr)
        return os.urandom(32)
    raw = args.seed or os.environ.get("HAARFORGE_SEED")
    if raw is None:
        if required:
            raise _ConfigError("a --seed (or HAARFORGE_SEED) is required")
        return None
    try:
        return bytes.fromhex(raw)
    except ValueError as exc:
        raise _ConfigError(f"seed is not valid hex: {exc}") from exc


class _ConfigError(Exception):
    pass


def _cmd_generate(args) -> int:
    from .generator import (PrecisionConfig, generate_prfs_column, generate_prs,
                            make_oracle, save_state_bin, save_state_json)
    from .oracle import PrfKey

    cfg = PrecisionConfig(n=args.n, lam=args.lam, m=args.m)
    if args.backend == "prf":
        raw = args.key or os.environ.get("HAARFORGE_KEY")
        if raw is None and not args.fresh_entropy:
            raise _ConfigError("--backend prf needs --key (or HAARFORGE_KEY)")
        if raw is not None:
            try:
                key = PrfKey.from_hex(raw, cfg.n, cfg.m, cfg.lam)
            except ValueError as exc:
                raise _ConfigError(str(exc)) from exc
            oracle = make_oracle(cfg, "prf", key=key)
        else:
            oracle = make_oracle(cfg, "prf", seed=_seed_bytes(args))
    else:
        oracle = make_oracle(cfg, "random", seed=_seed_bytes(args))

    if cfg.m == 0:
        amps = generate_prs(oracle, cfg)
    else:
        if not 0 <= args.x < 1 << cfg.m:
            raise _ConfigError(f"--x must lie in [0, {1 << cfg.m})")
        amps = generate_prfs_column(oracle, cfg, args.x)

    norm = float(np.linalg.norm(amps))
    head = ", ".join(f"{a.real:+.6f}{a.imag:+.6f}j" for a in amps[:4])
    print(f"n={cfg.n} m={cfg.m} lambda={cfg.lam} norm={norm:.12f}")
    print(f"first amplitudes: {head}{' ...' if len(amps) > 4 else ''}")
    if args.out:
        try:
            if args.format == "json":
                save_state_json(args.out, amps, cfg.n, cfg.m)
            else:
                save_state_bin(args.out, amps)
        except OSError as exc:
            print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
            return 3
        print(f"wrote {args.out} ({args.format})")
    return 0


_DEFAULT_SEQUENCE = ("golden", "sampler-distance", "lemma-bounds", "haar-moments",
                     "marginal", "isometry", "path-equivalence")


def _run_battery(name: str, args, seed: bytes) -> "EnsembleReport":
    from . import verify

    if name == "sampler-distance":
        return verify.battery_sampler_distance(
            seed=int.from_bytes(seed[:4], "big") or 1)
    if name == "lemma-bounds":
        return verify.battery_perturbation_bounds(
            trials=args.trials or 1000,
            seed=int.from_bytes(seed[:4], "big") or 1)
    if name == "haar-moments":
        return verify.battery_haar_moments(
            n=args.n, lam=args.lam, backend=args.backend,
            ensemble_size=args.ensemble or 2000, seed=seed)
    if name == "marginal":
        return verify.battery_marginal(
            n=args.n, lam=args.lam, backend=args.backend,
            count=args.ensemble or 10_000, seed=seed)
    if name == "isometry":
        return verify.battery_isometry(
            n=min(args.n, 2), m=2, lam=min(args.lam, 8),
            backend=args.backend, seed=seed)
    if name == "path-equivalence":
        return verify.battery_path_equivalence(seed=seed)
    if name == "golden":
        return verify.battery_golden()
    raise _ConfigError(f"unknown battery {name!r}")


def _cmd_verify(args) -> int:
    from . import report as report_mod
    from . import verify

    if args.list_batteries:
        print("\n".join(sorted([*verify.BATTERIES, "default"])))
        return 0
    seed = _seed_bytes(args, required=False) or b"haarforge-verify"
    names = _DEFAULT_SEQUENCE if args.battery == "default" else (args.battery,)
    reports = []
    for name in names:
        started = time.perf_counter()
        rep = _run_battery(name, args, seed)
        elapsed = time.perf_counter() - started
        reports.append(rep)
        status = "ok" if rep.passed else "FAIL"
        print(f"[{status}] {rep.name} ({elapsed:.1f}s)")
        for key, verdict in rep.verdicts.items():
            if not verdict:
                stats = {k: v for k, v in rep.statistics.items()
                         if k.startswith(key + ".")}
                print(f"    failed: {key} {stats}", file=sys.stderr)
    if args.json:
        print(json.dumps({"format": report_mod.REPORT_FORMAT,
                          "version": report_mod.REPORT_FORMAT_VERSION,
                          "batteries": [r.to_dict() for r in reports]}, indent=1))
    if args.out:
        try:
            os.makedirs(args.out, exist_ok=True)
            report_mod.write_report_json(
                os.path.join(args.out, "report.json"), reports)
            for rep in reports:
                report_mod.emit_battery_outputs(rep, args.out)
        except OSError as exc:
            print(f"error: cannot write report: {exc}", file=sys.stderr)
            return 3
        print(f"report written to {args.out}")
    return 0 if all(r.passed for r in reports) else 1


def _cmd_distinguish(args) -> int:
    from . import report as report_mod
    from .generator import PrecisionConfig
    from .verify import distinguisher_experiment

    cfg = PrecisionConfig(n=args.n, lam=args.lam, m=args.m)
    seed = _seed_bytes(args, required=False) or b"haarforge-distinguish"
    rep = distinguisher_experiment(cfg, args.backend_a, args.backend_b,
                                   num_queries=args.queries, trials=args.trials,
                                   seed=seed)
    verdict = "consistent with zero" if rep.consistent_with_zero() else "SEPARABLE"
    print(f"advantage estimate: {rep.advantage:.4f} "
          f"(3-sigma null width {rep.ci_halfwidth:.4f}) -> {verdict}")
    print(f"theory envelope for l={rep.num_queries}: {rep.theory_bound:.4g}")
    payload = rep.to_dict()
    if args.json:
        print(json.dumps(payload, indent=1))
    if args.out:
        try:
            os.makedirs(args.out, exist_ok=True)
            with open(os.path.join(args.out, "distinguish.json"), "w") as fh:
                json.dump(payload, fh, indent=1)
                fh.write("\n")
            report_mod.render_distinguisher_figure(
                os.path.join(args.out, "distinguish.png"), rep)
        except OSError as exc:
            print(f"error: cannot write report: {exc}", file=sys.stderr)
            return 3
        print(f"report written to {args.out}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "generate":
            return _cmd_generate(args)
        if args.command == "verify":
            return _cmd_verify(args)
        return _cmd_distinguish(args)
    except _ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
