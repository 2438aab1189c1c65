"""Golden vectors: frozen (input -> output) pairs shipped with the package.

They pin three public contracts across releases: the samplers' tape
layout (tape hex -> grid numerator), the keyed oracle's output streams
(index -> hex), and one reference state file.  `check_all` recomputes
everything and compares byte-for-byte; `python -m haarforge.golden
<dir>` regenerates the files after an intentional contract change.
"""

from __future__ import annotations

import csv
import hashlib
import io
from importlib import resources

from ..generator import PrecisionConfig, generate_prs, make_oracle, state_json_text
from ..oracle import KeyedPrfOracle, PrfKey
from ..sampling import (randomness_budget_beta, randomness_budget_gaussian,
                       internal_grid_bits, sample_rounded_beta,
                       sample_rounded_gaussian)
from ..tape import RandomTape

BETA_FILE = "beta_vectors.csv"
GAUSSIAN_FILE = "gaussian_vectors.csv"
PRF_FILE = "prf_vectors.csv"
STATE_FILE = "state_n2_lambda4.json"
CLI_STATE_FILE = "cli_state_n1_lambda8.json"

_BETA_CASES = [(m, alpha, rep) for m in (1, 2, 4, 8) for alpha in (1, 4)
               for rep in range(2)]
_GAUSSIAN_CASES = [(m1, bound, rep) for m1, bound in ((12, 8.0), (20, 10.0), (30, 16.0))
                   for rep in range(2)]

_PRF_KEY_HEX = "c0ffee"  # lam = 24 bits of key material
_PRF_PARAMS = {"n": 2, "m": 1, "lam": 8}
_PRF_INDICES = (0, 1, 5, 12, 15)

_STATE_SEED = bytes(8)
_STATE_CFG = {"n": 2, "lam": 4}
_CLI_STATE_SEED = bytes(8)
_CLI_STATE_CFG = {"n": 1, "lam": 8}


def _tape_bytes(label: str, nbits: int) -> bytes:
    return hashlib.shake_256(b"haarforge-golden|" + label.encode()).digest(
        (nbits + 7) // 8)


def beta_rows() -> list[dict]:
    rows = []
    for m, alpha, rep in _BETA_CASES:
        nbits = randomness_budget_beta(m)
        data = _tape_bytes(f"beta|{m}|{alpha}|{rep}", nbits)
        value = sample_rounded_beta(m, alpha, RandomTape(data, nbits))
        rows.append({"m": m, "alpha": alpha, "tape_hex": data.hex(),
                     "numerator": value.numerator})
    return rows


def gaussian_rows() -> list[dict]:
    rows = []
    for m1, bound, rep in _GAUSSIAN_CASES:
        nbits = randomness_budget_gaussian(m1)
        data = _tape_bytes(f"gauss|{m1}|{bound}|{rep}", nbits)
        value = sample_rounded_gaussian(m1, bound, RandomTape(data, nbits))
        rows.append({"m1": m1, "bound": bound, "tape_hex": data.hex(),
                     "numerator": value.numerator})
    return rows


def _prf_oracle() -> KeyedPrfOracle:
    p = _PRF_PARAMS
    cfg = PrecisionConfig(n=p["n"], lam=p["lam"], m=p["m"])
    key = PrfKey.from_hex(_PRF_KEY_HEX, p["n"], p["m"], 24)
    return KeyedPrfOracle(cfg.oracle_input_bits, cfg.oracle_output_bytes, key)


def prf_rows() -> list[dict]:
    oracle = _prf_oracle()
    return [{"index": i, "output_hex": oracle.eval(i).hex()} for i in _PRF_INDICES]


def state_text() -> str:
    cfg = PrecisionConfig(**_STATE_CFG)
    amps = generate_prs(make_oracle(cfg, "random", seed=_STATE_SEED), cfg)
    return state_json_text(amps, cfg.n)


def cli_state_text() -> str:
    cfg = PrecisionConfig(**_CLI_STATE_CFG)
    amps = generate_prs(make_oracle(cfg, "random", seed=_CLI_STATE_SEED), cfg)
    return state_json_text(amps, cfg.n)


def _csv_text(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


_GENERATORS = {
    BETA_FILE: lambda: _csv_text(beta_rows()),
    GAUSSIAN_FILE: lambda: _csv_text(gaussian_rows()),
    PRF_FILE: lambda: _csv_text(prf_rows()),
    STATE_FILE: state_text,
    CLI_STATE_FILE: cli_state_text,
}


def shipped_text(name: str) -> str:
    return resources.files("haarforge.golden").joinpath(name).read_text()


def check_all() -> list[tuple[str, bool, dict]]:
    """Recompute every golden file and compare byte-for-byte with the
    shipped copy.  Returns (name, ok, detail) per file."""
    results = []
    for name, generate in _GENERATORS.items():
        try:
            shipped = shipped_text(name)
        except FileNotFoundError:
            results.append((name, False, {"missing": 1.0}))
            continue
        fresh = generate()
        if fresh == shipped:
            results.append((name, True, {}))
        else:
            line = next((i for i, (a, b) in enumerate(
                zip(shipped.splitlines(), fresh.splitlines()), 1) if a != b),
                min(len(shipped.splitlines()), len(fresh.splitlines())) + 1)
            results.append((name, False, {"first_mismatch_line": float(line)}))
    return results


def regenerate(target_dir) -> list[str]:
    """Rewrite every golden file under target_dir; returns the paths."""
    import pathlib

    target = pathlib.Path(target_dir)
    target.mkdir(parents=True, exist_ok=True)
    written = []
    for name, generate in _GENERATORS.items():
        path = target / name
        path.write_text(generate())
        written.append(str(path))
    return written
