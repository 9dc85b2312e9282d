"""Command-line pipeline: generate, census, sweep, interp, fit, ls, report.

Every subcommand reads flags first, then a flat key=value --config file,
then built-in defaults. Data artifacts embed the library lineage hash so
downstream stages refuse to mix results from different libraries.

Exit codes: 0 success, 2 invalid configuration or inputs, 3 sweep or
interpolation failed to bracket the target, 4 I/O failure. The worker
count for sweeps is capped by the QWOA_THREADS environment variable.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np
import scipy

import qwoa_bench
from qwoa_bench import bench
from qwoa_bench.bench import (
    NoBracketError,
    OptimizerConfig,
    ResultsStore,
    SweepConfig,
    load_results,
    optimizer_hash,
    read_pstar_csv,
    resolve_workers,
    summarize_results,
    write_fit_json,
    write_pstar_csv,
)
from qwoa_bench.graphs import LibraryConfig, SchemaError, generate_library, load_library, save_library
from qwoa_bench.landscape import census_library, write_census_csv
from qwoa_bench.local_search import survey_library, write_ls_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNBRACKETED = 3
EXIT_IO = 4

VARIANT_FLAGS = {
    "steepest": ("steepest_ascent",),
    "firstimp": ("first_improvement",),
    "both": ("steepest_ascent", "first_improvement"),
}


def parse_sizes(text: str) -> tuple[int, ...]:
    """Sizes grammar: "10,12,14", "10..16" (inclusive), or "10..16..2"."""
    text = text.strip()
    if ".." in text:
        parts = text.split("..")
        if len(parts) not in (2, 3):
            raise ValueError(f"bad size range {text!r}")
        lo, hi = int(parts[0]), int(parts[1])
        step = int(parts[2]) if len(parts) == 3 else 1
        if step < 1 or hi < lo:
            raise ValueError(f"bad size range {text!r}")
        return tuple(range(lo, hi + 1, step))
    return tuple(int(tok) for tok in text.split(","))


def parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"bad boolean {text!r}")


def load_config_file(path: str) -> dict[str, str]:
    cfg: dict[str, str] = {}
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            cfg[key.strip()] = value.strip()
    return cfg


class _Resolver:
    """Flag value if given, else config-file value, else default.

    Remembers every resolved value so the run manifest can record the
    configuration the command actually used.
    """

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.cfg = load_config_file(args.config) if args.config else {}
        self.used: dict[str, object] = {}

    def get(self, key: str, conv, default):
        val = getattr(self.args, key, None)
        if val is None:
            raw = self.cfg.get(key)
            val = conv(raw) if raw is not None else default
        if isinstance(val, tuple):
            self.used[key] = list(val)
        else:
            self.used[key] = val
        return val


def write_run_manifest(r: _Resolver, command: str, primary: Path | str, started: float) -> None:
    """Sidecar run manifest next to the command's primary output.

    Directories get a run.json inside; files get <name>.run.json beside
    them. Timing makes this file intentionally non-reproducible, so it is
    a sidecar rather than part of any data artifact.
    """
    primary = Path(primary)
    if primary.is_dir():
        path = primary / "run.json"
    else:
        path = primary.with_name(primary.name + ".run.json")
    manifest = {
        "schema": "qwoa-run v1",
        "command": command,
        "config": r.used,
        "versions": {
            "qwoa_bench": qwoa_bench.__version__,
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "started_unix": started,
        "elapsed_seconds": time.time() - started,
    }
    with open(path, "w") as f:
        json.dump(manifest, f, sort_keys=True, indent=2)
        f.write("\n")


# --- subcommands -------------------------------------------------------------


def cmd_gen(args) -> int:
    r = _Resolver(args)
    cfg = LibraryConfig(
        seed=r.get("seed", int, 42),
        sizes=r.get("sizes", parse_sizes, tuple(range(10, 17, 2))),
        per_size=r.get("per_size", int, 100),
        edge_prob=r.get("edge_prob", float, 0.5),
        weight_dist=r.get("weight_dist", str, "uniform(0,1]"),
    )
    out_dir = Path(r.get("out", str, "library"))
    lib = generate_library(cfg)
    manifest = save_library(lib, out_dir)
    print(f"wrote {manifest} ({len(lib.graphs)} instances, config_hash={lib.hash})")
    write_run_manifest(r, "gen", out_dir, args.started)
    return EXIT_OK


def cmd_census(args) -> int:
    r = _Resolver(args)
    lib = load_library(Path(r.get("library", str, "library")) / "manifest.json")
    census = census_library(lib)
    out = r.get("out", str, "census.csv")
    write_census_csv(census, out, lib.hash)
    for n, median in census.medians().items():
        count = len(census.per_size_counts[n])
        print(f"n={n} instances={count} median_local_optima={median:g}")
    print(f"wrote {out}")
    write_run_manifest(r, "census", out, args.started)
    return EXIT_OK


def cmd_sweep(args) -> int:
    r = _Resolver(args)
    lib = load_library(Path(r.get("library", str, "library")) / "manifest.json")
    n = r.get("n", int, None)
    if n is None:
        raise ValueError("sweep requires --n")
    instances = lib.at_size(n)
    if not instances:
        raise ValueError(f"library has no instances at n={n}")
    opt_cfg = OptimizerConfig(n_starts=r.get("starts", int, 4))
    sweep_cfg = SweepConfig(
        target=r.get("target", float, bench.DEFAULT_TARGET),
        p_start=r.get("p_start", int, bench.MIN_DEPTH),
        p_cap=r.get("p_cap", int, 64),
        optimizer=opt_cfg,
        bootstrap=r.get("bootstrap", parse_bool, False),
        workers=resolve_workers(r.get("workers", int, None)),
    )
    out = r.get("out", str, "results.jsonl")
    store = ResultsStore(out, lib.hash, optimizer_hash(opt_cfg))
    summary = bench.run_sweep(instances, n, config=sweep_cfg, store=store)
    for p, st in summary.per_p.items():
        print(
            f"n={n} p={p} mean={st.mean:.6f} ci=[{st.ci_lo:.6f},{st.ci_hi:.6f}] "
            f"instances={st.count}"
        )
    if summary.p_star is not None:
        lo, hi = summary.p_star_ci
        print(f"n={n} p_star={summary.p_star:.4f} ci=[{lo:.4f},{hi:.4f}]")
    flags = []
    if summary.at_boundary:
        flags.append("at_boundary")
    if not summary.monotone:
        flags.append("non_monotone")
    if not summary.bracketed:
        flags.append("unbracketed")
    if flags:
        print(f"n={n} flags: {', '.join(flags)}")
    print(f"wrote {out}")
    write_run_manifest(r, "sweep", out, args.started)
    if not summary.bracketed:
        return EXIT_UNBRACKETED
    return EXIT_OK


def cmd_interp(args) -> int:
    r = _Resolver(args)
    results = r.get("results", str, "results.jsonl")
    rows, lineage = load_results(results)
    target = r.get("target", float, bench.DEFAULT_TARGET)
    summaries = summarize_results(rows, target, bootstrap=r.get("bootstrap", parse_bool, False))
    out = r.get("out", str, "pstar.csv")
    write_pstar_csv(summaries, out, lineage)
    for s in summaries:
        if s.p_star is not None:
            lo, hi = s.p_star_ci
            print(f"n={s.n} p_star={s.p_star:.4f} ci=[{lo:.4f},{hi:.4f}]")
        else:
            print(f"n={s.n} unbracketed over swept depths {sorted(s.per_p)}")
    print(f"wrote {out}")
    write_run_manifest(r, "interp", out, args.started)
    if not any(s.bracketed for s in summaries):
        return EXIT_UNBRACKETED
    return EXIT_OK


def cmd_fit(args) -> int:
    r = _Resolver(args)
    pstar_path = r.get("pstar", str, "pstar.csv")
    rows, lineage = read_pstar_csv(pstar_path)
    if lineage is None:
        raise SchemaError(f"{pstar_path}: missing config_hash header")
    points = {row["n"]: row["p_star"] for row in rows if row["p_star"] is not None}
    model = r.get("model", str, "quadratic")
    if model == "quadratic":
        fit = bench.fit_required_iterations(points)
        print(
            f"p(n) = {fit.a:.6g} n^2 + {fit.b:.6g} n + {fit.c:.6g} "
            f"(residual {fit.residual_norm:.3g})"
        )
    elif model == "exponential":
        fit = bench.fit_exponential_iterations(points)
        print(
            f"p(n) = {fit.amplitude:.6g} * {fit.rate:.6g}^n "
            f"(log-residual {fit.residual_norm:.3g})"
        )
    else:
        raise ValueError(f"unknown model {model!r} (quadratic or exponential)")
    out = r.get("out", str, "fit.json")
    write_fit_json(fit, points, out, lineage)
    print(f"wrote {out}")
    write_run_manifest(r, "fit", out, args.started)
    return EXIT_OK


def cmd_ls(args) -> int:
    r = _Resolver(args)
    lib = load_library(Path(r.get("library", str, "library")) / "manifest.json")
    variant_flag = r.get("variant", str, "both")
    if variant_flag not in VARIANT_FLAGS:
        raise ValueError(f"unknown variant {variant_flag!r} (steepest, firstimp, both)")
    sizes = r.get("sizes", parse_sizes, None)
    items = lib.items()
    if sizes is not None:
        wanted = set(sizes)
        items = [(n, idx, g) for n, idx, g in items if n in wanted]
        if not items:
            raise ValueError(f"library has no instances at sizes {sorted(wanted)}")
    rows = survey_library(
        items,
        variants=VARIANT_FLAGS[variant_flag],
        runs=r.get("runs", int, 1000),
        seed=r.get("seed", int, lib.config.seed),
    )
    out = r.get("out", str, "ls.csv")
    write_ls_csv(rows, out, lib.hash)
    print(f"wrote {out} ({len(rows)} rows)")
    write_run_manifest(r, "ls", out, args.started)
    return EXIT_OK


def cmd_report(args) -> int:
    from qwoa_bench.report import comparison_report

    r = _Resolver(args)
    quantum = r.get("quantum", str, "results.jsonl")
    out = comparison_report(
        results_path=quantum,
        out_dir=r.get("out", str, "report"),
        ls_path=r.get("ls", str, None),
        fit_path=r.get("fit", str, None),
        census_path=r.get("census", str, None),
        target=r.get("target", float, bench.DEFAULT_TARGET),
        bootstrap=r.get("bootstrap", parse_bool, False),
    )
    for name in sorted(out.files):
        print(f"wrote {out.out_dir / name}")
    for w in out.warnings:
        print(f"warning: {w}")
    if out.partial:
        print("report is partial")
    write_run_manifest(r, "report", out.out_dir, args.started)
    return EXIT_OK


# --- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qwoa-bench",
        description="Benchmark a fixed-parameter quantum-walk maxcut heuristic "
        "against classical local search.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key=value config file")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="generate an instance library")
    p.add_argument("--sizes", type=parse_sizes)
    p.add_argument("--per-size", dest="per_size", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--edge-prob", dest="edge_prob", type=float)
    p.add_argument("--weight-dist", dest="weight_dist")
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("census", parents=[common], help="count local optima per instance")
    p.add_argument("--library")
    p.add_argument("--out")
    p.set_defaults(func=cmd_census)

    p = sub.add_parser("sweep", parents=[common], help="depth sweep at one size")
    p.add_argument("--library")
    p.add_argument("--n", type=int)
    p.add_argument("--target", type=float)
    p.add_argument("--p-start", dest="p_start", type=int)
    p.add_argument("--p-cap", dest="p_cap", type=int)
    p.add_argument("--starts", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--bootstrap", action="store_true", default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("interp", parents=[common], help="interpolate depth to target")
    p.add_argument("--results")
    p.add_argument("--target", type=float)
    p.add_argument("--bootstrap", action="store_true", default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_interp)

    p = sub.add_parser("fit", parents=[common], help="fit required depth vs size")
    p.add_argument("--pstar")
    p.add_argument("--model", choices=("quadratic", "exponential"))
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("ls", parents=[common], help="local-search solve probabilities")
    p.add_argument("--library")
    p.add_argument("--variant", choices=tuple(VARIANT_FLAGS))
    p.add_argument("--runs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--sizes", type=parse_sizes)
    p.add_argument("--out")
    p.set_defaults(func=cmd_ls)

    p = sub.add_parser("report", parents=[common], help="comparison report and figures")
    p.add_argument("--quantum")
    p.add_argument("--ls")
    p.add_argument("--fit")
    p.add_argument("--census")
    p.add_argument("--target", type=float)
    p.add_argument("--bootstrap", action="store_true", default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.started = time.time()
    try:
        return args.func(args)
    except NoBracketError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNBRACKETED
    except (SchemaError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
