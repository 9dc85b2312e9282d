"""Comparison report: per-size summary table plus the four benchmark figures.

Consumes the results store (quantum sweep records), the local-search
summary CSV, a depth fit, and optionally a local-optima census, and emits
into a report directory:

  summary.csv                 per-size comparison table
  fig_sweep.csv/.svg          mean measurement probability vs depth
  fig_required_iterations.*   interpolated depth-to-target vs size, with fit
  fig_comparison.*            success probabilities and evaluation counts
  fig_local_optima.*          census medians with exponential fit (optional)
  report.json                 manifest with lineage hash and warnings

All inputs must carry the same library lineage hash; mixing data from
different instance libraries is an error. Missing inputs degrade the
report (columns left empty, manifest flagged partial) instead of failing.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from qwoa_bench.bench import (
    DEFAULT_TARGET,
    MIN_DEPTH,
    ExponentialFit,
    QuadraticFit,
    SweepSummary,
    four_shot_probability,
    load_results,
    mean_ci,
    read_fit_json,
    round_half_up,
    summarize_results,
)
from qwoa_bench.graphs import SchemaError
from qwoa_bench.landscape import fit_exponential_to_medians, read_census_csv
from qwoa_bench.local_search import VARIANTS, read_ls_csv
from qwoa_bench.simulator import grover_required_iterations

REPORT_SCHEMA = "qwoa-report v1"
SVG_HASHSALT = "qwoa-bench"

SUMMARY_FIELDS = (
    "n",
    "p",
    "quantum_meas_prob",
    "quantum_four_shot",
    "four_shot_ci_lo",
    "four_shot_ci_hi",
    "quantum_evals",
    "grover_iterations",
    "steepest_ascent_p_solve",
    "steepest_ascent_ci_lo",
    "steepest_ascent_ci_hi",
    "steepest_ascent_mean_evals",
    "first_improvement_p_solve",
    "first_improvement_ci_lo",
    "first_improvement_ci_hi",
    "first_improvement_mean_evals",
)


@dataclass
class ReportOutput:
    out_dir: Path
    files: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    partial: bool = False


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _load_fit(fit_path, lineage: str):
    body = read_fit_json(fit_path)
    if body["config_hash"] != lineage:
        raise SchemaError(
            f"{fit_path}: config_hash {body['config_hash']} does not match results {lineage}"
        )
    coeffs = body["coefficients"]
    if body["model"] == "quadratic":
        return QuadraticFit(
            a=coeffs["a"], b=coeffs["b"], c=coeffs["c"],
            residual_norm=body["residual_norm"],
        )
    if body["model"] == "exponential":
        return ExponentialFit(
            amplitude=coeffs["amplitude"], rate=coeffs["rate"],
            residual_norm=body["residual_norm"],
        )
    raise SchemaError(f"{fit_path}: unknown model {body['model']!r}")


def _new_figure():
    plt.rcParams["svg.hashsalt"] = SVG_HASHSALT
    return plt.subplots(figsize=(6.0, 4.0))


def _save_svg(fig, path: Path) -> None:
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def comparison_report(
    results_path: Path | str,
    out_dir: Path | str,
    ls_path: Path | str | None = None,
    fit_path: Path | str | None = None,
    census_path: Path | str | None = None,
    target: float = DEFAULT_TARGET,
    bootstrap: bool = False,
) -> ReportOutput:
    """Build the full report directory from stored benchmark artifacts."""
    out = ReportOutput(out_dir=Path(out_dir))
    out.out_dir.mkdir(parents=True, exist_ok=True)

    rows, lineage = load_results(results_path)

    ls_rows: list[dict] = []
    if ls_path is not None:
        ls_rows, ls_hash = read_ls_csv(ls_path)
        if ls_hash != lineage:
            raise SchemaError(
                f"{ls_path}: config_hash {ls_hash} does not match results {lineage}"
            )
    else:
        out.warnings.append("no local-search input; classical columns omitted")
        out.partial = True

    fit = None
    if fit_path is not None:
        fit = _load_fit(fit_path, lineage)
    else:
        out.warnings.append("no depth fit; using deepest swept depth per size")

    census = None
    if census_path is not None:
        census, census_hash = read_census_csv(census_path)
        if census_hash != lineage:
            raise SchemaError(
                f"{census_path}: config_hash {census_hash} does not match results {lineage}"
            )

    summaries = summarize_results(rows, target, bootstrap=bootstrap)
    summary_rows = _summary_table(rows, ls_rows, fit, target, bootstrap, out)

    _write_summary_csv(summary_rows, out.out_dir / "summary.csv", lineage)
    out.files.append("summary.csv")

    _fig_sweep(summaries, target, out, lineage)
    _fig_required_iterations(summaries, fit, out, lineage)
    _fig_comparison(summary_rows, out, lineage)
    if census is not None:
        _fig_local_optima(census, out, lineage)

    manifest = {
        "schema": REPORT_SCHEMA,
        "config_hash": lineage,
        "target": float(target),
        "files": sorted(out.files),
        "warnings": out.warnings,
        "partial": out.partial,
    }
    with open(out.out_dir / "report.json", "w") as f:
        json.dump(manifest, f, sort_keys=True, indent=2)
        f.write("\n")
    out.files.append("report.json")
    return out


# --- summary table -----------------------------------------------------------


def _summary_table(
    rows: list[dict],
    ls_rows: list[dict],
    fit,
    target: float,
    bootstrap: bool,
    out: ReportOutput,
) -> list[dict]:
    by_n: dict[int, dict[int, list[dict]]] = {}
    for row in rows:
        by_n.setdefault(int(row["n"]), {}).setdefault(int(row["p"]), []).append(row)

    ls_by_n: dict[int, dict[str, list[dict]]] = {}
    for row in ls_rows:
        ls_by_n.setdefault(int(row["n"]), {}).setdefault(row["variant"], []).append(row)

    table = []
    for n in sorted(by_n):
        available = sorted(by_n[n])
        if fit is not None:
            p_want = max(MIN_DEPTH, round_half_up(fit.predict(n)))
            if p_want in by_n[n]:
                p_rep = p_want
            else:
                p_rep = min(available, key=lambda q: (abs(q - p_want), q))
                out.warnings.append(
                    f"n={n}: no records at fitted depth {p_want}, using nearest swept {p_rep}"
                )
                out.partial = True
        else:
            p_rep = available[-1]

        recs = by_n[n][p_rep]
        probs = np.array([float(r["meas_prob"]) for r in recs])
        shots = np.array([four_shot_probability(float(q)) for q in probs])
        four_mean, (four_lo, four_hi) = mean_ci(shots, bootstrap=bootstrap)

        degeneracies = {int(r["instance_id"]): int(r["degeneracy"]) for r in recs}
        grover_iters = [
            grover_required_iterations(2**n, m, target) for m in degeneracies.values()
        ]

        entry = {
            "n": n,
            "p": p_rep,
            "quantum_meas_prob": float(probs.mean()),
            "quantum_four_shot": four_mean,
            "four_shot_ci_lo": four_lo,
            "four_shot_ci_hi": four_hi,
            "quantum_evals": 4 * p_rep,
            "grover_iterations": float(np.mean(grover_iters)),
        }
        for variant in VARIANTS:
            vrows = ls_by_n.get(n, {}).get(variant, [])
            if vrows:
                ps = np.array([r["p_solve"] for r in vrows])
                mean, (lo, hi) = mean_ci(ps, bootstrap=bootstrap)
                entry[f"{variant}_p_solve"] = mean
                entry[f"{variant}_ci_lo"] = lo
                entry[f"{variant}_ci_hi"] = hi
                entry[f"{variant}_mean_evals"] = float(
                    np.mean([r["mean_evals"] for r in vrows])
                )
            else:
                if ls_rows:
                    out.warnings.append(f"n={n}: no {variant} local-search rows")
                    out.partial = True
                entry[f"{variant}_p_solve"] = None
                entry[f"{variant}_ci_lo"] = None
                entry[f"{variant}_ci_hi"] = None
                entry[f"{variant}_mean_evals"] = None
        table.append(entry)
    return table


def _write_summary_csv(summary_rows: list[dict], path: Path, lineage: str) -> None:
    with open(path, "w", newline="") as f:
        f.write(f"# config_hash={lineage}\n")
        writer = csv.writer(f)
        writer.writerow(SUMMARY_FIELDS)
        for entry in summary_rows:
            writer.writerow([_fmt(entry[k]) if k not in ("n", "p", "quantum_evals") else str(entry[k]) for k in SUMMARY_FIELDS])


# --- figures -----------------------------------------------------------------


def _fig_sweep(summaries: list[SweepSummary], target: float, out: ReportOutput, lineage: str) -> None:
    path_csv = out.out_dir / "fig_sweep.csv"
    with open(path_csv, "w", newline="") as f:
        f.write(f"# config_hash={lineage}\n")
        writer = csv.writer(f)
        writer.writerow(["n", "p", "mean", "ci_lo", "ci_hi", "count"])
        for s in summaries:
            for p in sorted(s.per_p):
                st = s.per_p[p]
                writer.writerow([s.n, p, _fmt(st.mean), _fmt(st.ci_lo), _fmt(st.ci_hi), st.count])
    out.files.append("fig_sweep.csv")

    fig, ax = _new_figure()
    for s in summaries:
        depths = sorted(s.per_p)
        means = [s.per_p[p].mean for p in depths]
        yerr = [
            [s.per_p[p].mean - s.per_p[p].ci_lo for p in depths],
            [s.per_p[p].ci_hi - s.per_p[p].mean for p in depths],
        ]
        ax.errorbar(depths, means, yerr=yerr, marker="o", capsize=3, label=f"n={s.n}")
    ax.axhline(target, color="gray", linestyle="--", linewidth=1)
    ax.set_xlabel("circuit depth p")
    ax.set_ylabel("mean optimal measurement probability")
    ax.legend(fontsize=8)
    _save_svg(fig, out.out_dir / "fig_sweep.svg")
    out.files.append("fig_sweep.svg")


def _fig_required_iterations(summaries, fit, out: ReportOutput, lineage: str) -> None:
    pts = [s for s in summaries if s.p_star is not None]
    if not pts:
        out.warnings.append("no bracketed sizes; required-iterations figure skipped")
        out.partial = True
        return
    path_csv = out.out_dir / "fig_required_iterations.csv"
    with open(path_csv, "w", newline="") as f:
        f.write(f"# config_hash={lineage}\n")
        writer = csv.writer(f)
        writer.writerow(["n", "p_star", "p_ci_lo", "p_ci_hi", "fit_value"])
        for s in pts:
            fv = fit.predict(s.n) if fit is not None else None
            writer.writerow(
                [s.n, _fmt(s.p_star), _fmt(s.p_star_ci[0]), _fmt(s.p_star_ci[1]), _fmt(fv)]
            )
    out.files.append("fig_required_iterations.csv")

    fig, ax = _new_figure()
    ns = [s.n for s in pts]
    stars = [s.p_star for s in pts]
    yerr = [
        [s.p_star - s.p_star_ci[0] for s in pts],
        [s.p_star_ci[1] - s.p_star for s in pts],
    ]
    ax.errorbar(ns, stars, yerr=yerr, fmt="o", capsize=3, label="interpolated depth")
    if fit is not None:
        grid = np.linspace(min(ns), max(ns), 101)
        ax.plot(grid, [fit.predict(x) for x in grid], "-", label="fit")
    ax.set_xlabel("problem size n")
    ax.set_ylabel("depth to target probability")
    ax.legend(fontsize=8)
    _save_svg(fig, out.out_dir / "fig_required_iterations.svg")
    out.files.append("fig_required_iterations.svg")


def _fig_comparison(summary_rows: list[dict], out: ReportOutput, lineage: str) -> None:
    path_csv = out.out_dir / "fig_comparison.csv"
    cols = [
        "n",
        "quantum_four_shot",
        "steepest_ascent_p_solve",
        "first_improvement_p_solve",
        "quantum_evals",
        "steepest_ascent_mean_evals",
        "first_improvement_mean_evals",
        "grover_iterations",
    ]
    with open(path_csv, "w", newline="") as f:
        f.write(f"# config_hash={lineage}\n")
        writer = csv.writer(f)
        writer.writerow(cols)
        for entry in summary_rows:
            writer.writerow([_fmt(entry[c]) if c != "n" else str(entry[c]) for c in cols])
    out.files.append("fig_comparison.csv")

    ns = [e["n"] for e in summary_rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 4.0))
    plt.rcParams["svg.hashsalt"] = SVG_HASHSALT
    ax1.plot(ns, [e["quantum_four_shot"] for e in summary_rows], "o-", label="quantum, 4 shots")
    for variant, marker in zip(VARIANTS, ("s--", "^--")):
        vals = [e[f"{variant}_p_solve"] for e in summary_rows]
        if any(v is not None for v in vals):
            ax1.plot(ns, vals, marker, label=variant.replace("_", " "))
    ax1.set_xlabel("problem size n")
    ax1.set_ylabel("success probability")
    ax1.legend(fontsize=8)

    ax2.plot(ns, [e["quantum_evals"] for e in summary_rows], "o-", label="quantum 4p")
    for variant, marker in zip(VARIANTS, ("s--", "^--")):
        vals = [e[f"{variant}_mean_evals"] for e in summary_rows]
        if any(v is not None for v in vals):
            ax2.plot(ns, vals, marker, label=variant.replace("_", " "))
    ax2.plot(ns, [e["grover_iterations"] for e in summary_rows], "d:", label="amplitude amplification")
    ax2.set_xlabel("problem size n")
    ax2.set_ylabel("evaluations / iterations")
    ax2.set_yscale("log")
    ax2.legend(fontsize=8)
    _save_svg(fig, out.out_dir / "fig_comparison.svg")
    out.files.append("fig_comparison.svg")


def _fig_local_optima(census, out: ReportOutput, lineage: str) -> None:
    medians = census.medians()
    fit_vals: dict[int, float] = {}
    if len(medians) >= 3:
        a, r, _resid = fit_exponential_to_medians(medians)
        fit_vals = {n: a * r**n for n in medians}
    else:
        out.warnings.append("census has fewer than 3 sizes; exponential fit skipped")

    path_csv = out.out_dir / "fig_local_optima.csv"
    with open(path_csv, "w", newline="") as f:
        f.write(f"# config_hash={lineage}\n")
        writer = csv.writer(f)
        writer.writerow(["n", "median_count", "fit_value"])
        for n in sorted(medians):
            writer.writerow([n, _fmt(medians[n]), _fmt(fit_vals.get(n))])
    out.files.append("fig_local_optima.csv")

    fig, ax = _new_figure()
    ns = sorted(medians)
    ax.semilogy(ns, [medians[n] for n in ns], "o", label="median count")
    if fit_vals:
        ax.semilogy(ns, [fit_vals[n] for n in ns], "-", label="exponential fit")
    ax.set_xlabel("problem size n")
    ax.set_ylabel("local optima per instance")
    ax.legend(fontsize=8)
    _save_svg(fig, out.out_dir / "fig_local_optima.svg")
    out.files.append("fig_local_optima.svg")
