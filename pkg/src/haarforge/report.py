"""Report rendering: JSON and CSV alongside matplotlib figures.

The verify and distinguish commands hand their battery reports here;
given an output directory this writes a schema-versioned JSON report,
CSV files of the raw statistics, and PNG figures comparing empirical
laws against their exact reference curves.
"""

from __future__ import annotations

import json
import pathlib

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

REPORT_FORMAT = "haarforge-report"
REPORT_FORMAT_VERSION = 1


def write_report_json(path, batteries) -> None:
    doc = {
        "format": REPORT_FORMAT,
        "version": REPORT_FORMAT_VERSION,
        "batteries": [b.to_dict() for b in batteries],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def write_column_csv(path, header: str, values) -> None:
    np.savetxt(path, np.asarray(values), header=header, comments="")


def render_overlap_figure(path, overlaps, n: int) -> None:
    """Histogram of pairwise squared overlaps against the Haar density
    (N-1)(1-x)^(N-2)."""
    dim = 1 << n
    xs = np.linspace(0, 1, 400)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(overlaps, bins=80, density=True, alpha=0.6, label="generated pairs")
    ax.plot(xs, (dim - 1) * (1 - xs) ** (dim - 2), "r-", label="Haar reference")
    ax.set_xlabel(r"$|\langle\psi_i|\psi_j\rangle|^2$")
    ax.set_ylabel("density")
    ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_marginal_figure(path, marginals, n: int) -> None:
    """Histogram of the first-basis-state probability against its Beta
    marginal density (N-1)(1-x)^(N-2)."""
    dim = 1 << n
    xs = np.linspace(0, 1, 400)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(marginals, bins=80, density=True, alpha=0.6, label="generated")
    ax.plot(xs, (dim - 1) * (1 - xs) ** (dim - 2), "r-", label="exact marginal")
    ax.set_xlabel(r"$|\langle 0\cdots0|\psi\rangle|^2$")
    ax.set_ylabel("density")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_grid_law_figure(path, hist: dict, exact: dict, title: str) -> None:
    """Empirical vs exact masses over a dyadic grid."""
    total = sum(hist.values())
    keys = sorted(exact)
    emp = [hist.get(k, 0) / total for k in keys]
    ref = [exact[k] for k in keys]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(keys, emp, ".", ms=3, label="empirical")
    ax.plot(keys, ref, "r-", lw=1, label="exact")
    ax.set_xlabel("grid numerator")
    ax.set_ylabel("mass")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_distinguisher_figure(path, report) -> None:
    names = list(report.per_feature)
    values = [report.per_feature[k] for k in names]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(names, values, alpha=0.7, label="per-feature separation")
    ax.axhline(report.null_mean, color="k", ls="--", label="null mean")
    ax.axhline(report.null_mean + report.ci_halfwidth, color="k", ls=":",
               label="null + 3 sigma")
    ax.set_ylabel("two-sample KS statistic")
    ax.set_title(f"{report.backend_a} vs {report.backend_b}")
    ax.tick_params(axis="x", rotation=20)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def emit_battery_outputs(report, out_dir) -> list[str]:
    """Write a battery's raw data as CSV plus figures; returns paths."""
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    overlaps = report.raw.get("pairwise_overlap_sq")
    if overlaps:
        csv_path = out / f"{report.name}-overlaps.csv"
        write_column_csv(csv_path, "pairwise_overlap_sq", overlaps)
        fig_path = out / f"{report.name}-overlaps.png"
        render_overlap_figure(fig_path, overlaps, int(report.statistics["n"]))
        written += [str(csv_path), str(fig_path)]
    marginals = report.raw.get("marginals")
    if marginals:
        csv_path = out / f"{report.name}-marginals.csv"
        write_column_csv(csv_path, "marginal_probability", marginals)
        fig_path = out / f"{report.name}-marginals.png"
        render_marginal_figure(fig_path, marginals, int(report.statistics["n"]))
        written += [str(csv_path), str(fig_path)]
    for key, payload in report.raw.items():
        if key.startswith("grid-law:"):
            label = key.split(":", 1)[1]
            fig_path = out / f"{report.name}-{label}.png"
            render_grid_law_figure(fig_path, payload["hist"], payload["exact"], label)
            written.append(str(fig_path))
    return written
