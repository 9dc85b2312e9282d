"""Scaling methodology: depth sweeps, interpolation, fits, results store.

The central experiment fixes a problem size n, optimizes the three
schedule parameters for every library instance at increasing circuit depth
p, and finds the real-valued depth p_star at which the mean measurement
probability of an optimal solution crosses a target (10% in the headline
runs). Crossings are located by linear interpolation of the mean curve;
the confidence region comes from interpolating the per-depth 95% CI
curves the same way. p_star(n) is then fit with a quadratic (or an
exponential, for comparison).

Optimization runs are the cost center, so every (instance, depth) result
is appended to a JSON-lines store keyed by the optimizer-config hash plus
(n, instance_id, p); reruns resume from the store instead of recomputing.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from qwoa_bench.graphs import SchemaError, WeightedGraph, config_hash
from qwoa_bench.landscape import ObjectiveTable, build_objective_table
from qwoa_bench.schedule import (
    OptimizerConfig,
    ScheduleParams,
    expand_schedule,
    optimize,
)
from qwoa_bench.simulator import evolve, optimal_probability

RESULTS_SCHEMA = "qwoa-results v1"
FIT_SCHEMA = "qwoa-fit v1"
NORMAL_CI_Z = 1.96
DEFAULT_TARGET = 0.10
MIN_DEPTH = 2

PSTAR_CSV_FIELDS = (
    "n",
    "target",
    "p_lo",
    "p_hi",
    "p_star",
    "p_ci_lo",
    "p_ci_hi",
    "bracketed",
    "at_boundary",
    "monotone",
)


class NoBracketError(ValueError):
    """The mean curve never crosses the target over the swept depths."""


@dataclass(frozen=True)
class ExperimentRecord:
    n: int
    instance_id: int
    p: int
    params: ScheduleParams
    expectation: float
    meas_prob: float
    n_evals: int
    degeneracy: int
    converged: bool

    def __post_init__(self):
        if self.p < MIN_DEPTH:
            raise ValueError(f"records require p >= {MIN_DEPTH}, got {self.p}")
        if not 0.0 <= self.meas_prob <= 1.0:
            raise ValueError(f"meas_prob {self.meas_prob} outside [0, 1]")


@dataclass(frozen=True)
class DepthStats:
    mean: float
    ci_lo: float
    ci_hi: float
    count: int


@dataclass
class SweepSummary:
    n: int
    target: float
    per_p: dict[int, DepthStats]
    p_star: float | None
    p_star_ci: tuple[float, float] | None
    bracketed: bool
    at_boundary: bool
    monotone: bool


def optimizer_hash(cfg: OptimizerConfig) -> str:
    """Lineage hash of everything that influences optimization output."""
    payload = {
        "x0": [cfg.x0.gamma, cfg.x0.t, cfg.x0.beta],
        "n_starts": cfg.n_starts,
        "lhs_seed": cfg.lhs_seed,
        "maxiter": cfg.maxiter,
        "pgtol": cfg.pgtol,
        "ftol": cfg.ftol,
        "fd_step": cfg.fd_step,
    }
    return config_hash(payload)


def resolve_workers(requested: int | None = None) -> int:
    """Worker count: explicit request, capped by QWOA_THREADS, else 1."""
    env = os.environ.get("QWOA_THREADS")
    cap = None
    if env is not None:
        cap = max(1, int(env))
    if requested is None:
        requested = cap if cap is not None else 1
    if cap is not None:
        requested = min(requested, cap)
    return max(1, requested)


# --- results store ---------------------------------------------------------


def _record_to_row(rec: ExperimentRecord, lib_hash: str, opt_hash: str) -> dict:
    return {
        "schema": RESULTS_SCHEMA,
        "config_hash": lib_hash,
        "opt_hash": opt_hash,
        "n": rec.n,
        "instance_id": rec.instance_id,
        "p": rec.p,
        "gamma": float(rec.params.gamma),
        "t": float(rec.params.t),
        "beta": float(rec.params.beta),
        "expectation": float(rec.expectation),
        "meas_prob": float(rec.meas_prob),
        "n_evals": int(rec.n_evals),
        "degeneracy": int(rec.degeneracy),
        "converged": bool(rec.converged),
    }


def _row_to_record(row: dict) -> ExperimentRecord:
    return ExperimentRecord(
        n=int(row["n"]),
        instance_id=int(row["instance_id"]),
        p=int(row["p"]),
        params=ScheduleParams(float(row["gamma"]), float(row["t"]), float(row["beta"])),
        expectation=float(row["expectation"]),
        meas_prob=float(row["meas_prob"]),
        n_evals=int(row["n_evals"]),
        degeneracy=int(row["degeneracy"]),
        converged=bool(row["converged"]),
    )


class ResultsStore:
    """Append-only JSON-lines record store with idempotent resume.

    Rows are keyed by (opt_hash, n, instance_id, p). A single store holds
    records for exactly one instance library; mixing lineage hashes is an
    error rather than a silent aggregation of incomparable runs.
    """

    def __init__(self, path: Path | str, lib_hash: str, opt_hash: str):
        self.path = Path(path)
        self.lib_hash = lib_hash
        self.opt_hash = opt_hash
        self._index: dict[tuple[str, int, int, int], dict] = {}
        if self.path.exists():
            for row in _read_jsonl(self.path):
                if row["config_hash"] != lib_hash:
                    raise SchemaError(
                        f"{self.path}: store carries config_hash {row['config_hash']}, "
                        f"library is {lib_hash}"
                    )
                self._index[_row_key(row)] = row

    def get(self, n: int, instance_id: int, p: int) -> ExperimentRecord | None:
        row = self._index.get((self.opt_hash, n, instance_id, p))
        return _row_to_record(row) if row is not None else None

    def append(self, rec: ExperimentRecord) -> None:
        row = _record_to_row(rec, self.lib_hash, self.opt_hash)
        key = _row_key(row)
        if key in self._index:
            return
        self._index[key] = row
        with open(self.path, "a") as f:
            f.write(json.dumps(row, sort_keys=True, separators=(",", ":")) + "\n")

    def records(self) -> list[ExperimentRecord]:
        rows = sorted(self._index.values(), key=lambda r: (r["n"], r["instance_id"], r["p"]))
        return [_row_to_record(r) for r in rows]


def _row_key(row: dict) -> tuple[str, int, int, int]:
    return (row["opt_hash"], int(row["n"]), int(row["instance_id"]), int(row["p"]))


def _read_jsonl(path: Path | str) -> list[dict]:
    rows = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{lineno}: bad JSON line: {exc}") from exc
    return rows


def load_results(path: Path | str) -> tuple[list[dict], str]:
    """All rows from a results file, which must carry a single lineage."""
    rows = _read_jsonl(path)
    if not rows:
        raise SchemaError(f"{path}: no records")
    hashes = {r["config_hash"] for r in rows}
    if len(hashes) != 1:
        raise SchemaError(f"{path}: mixed config_hash values {sorted(hashes)}")
    opt_hashes = {r["opt_hash"] for r in rows}
    if len(opt_hashes) != 1:
        raise SchemaError(f"{path}: mixed opt_hash values {sorted(opt_hashes)}")
    return rows, hashes.pop()


# --- per-depth statistics ---------------------------------------------------


def mean_ci(
    values: np.ndarray,
    bootstrap: bool = False,
    n_resamples: int = 10_000,
    seed: int = 7,
) -> tuple[float, tuple[float, float]]:
    """Sample mean with a 95% CI (normal approximation or bootstrap)."""
    values = np.asarray(values, dtype=np.float64)
    k = values.size
    if k < 1:
        raise ValueError("need at least one value")
    mean = float(values.mean())
    if k == 1:
        return mean, (mean, mean)
    if bootstrap:
        rng = np.random.Generator(np.random.PCG64(seed))
        picks = rng.integers(0, k, size=(n_resamples, k))
        means = values[picks].mean(axis=1)
        lo, hi = np.percentile(means, [2.5, 97.5])
        return mean, (float(lo), float(hi))
    se = float(values.std(ddof=1)) / np.sqrt(k)
    return mean, (mean - NORMAL_CI_Z * se, mean + NORMAL_CI_Z * se)


def depth_stats(
    records: list[ExperimentRecord], bootstrap: bool = False, seed: int = 7
) -> DepthStats:
    probs = np.array([r.meas_prob for r in records], dtype=np.float64)
    mean, (lo, hi) = mean_ci(probs, bootstrap=bootstrap, seed=seed)
    return DepthStats(mean=mean, ci_lo=float(lo), ci_hi=float(hi), count=probs.size)


# --- optimization dispatch ---------------------------------------------------


def _optimize_one(
    g: WeightedGraph, n: int, instance_id: int, p: int, cfg: OptimizerConfig,
    table: ObjectiveTable | None = None,
) -> ExperimentRecord:
    if table is None:
        table = build_objective_table(g)
    result = optimize(table, p, config=cfg)
    schedule = expand_schedule(result.params, p, table.sigma)
    meas_prob = optimal_probability(evolve(table, schedule), table)
    return ExperimentRecord(
        n=n,
        instance_id=instance_id,
        p=p,
        params=result.params,
        expectation=result.expectation,
        meas_prob=float(meas_prob),
        n_evals=result.n_evals,
        degeneracy=table.degeneracy,
        converged=result.converged,
    )


def _pool_task(args) -> ExperimentRecord:
    n, instance_id, p, edges, cfg = args
    g = WeightedGraph(n=n, edges=edges)
    return _optimize_one(g, n, instance_id, p, cfg)


def run_size_depth(
    instances: list[tuple[int, WeightedGraph]],
    n: int,
    p: int,
    cfg: OptimizerConfig,
    store: ResultsStore | None = None,
    workers: int = 1,
    tables: dict[int, ObjectiveTable] | None = None,
) -> list[ExperimentRecord]:
    """Optimize every instance at one (n, p), resuming from the store.

    instances holds (instance_id, graph) pairs. With workers > 1 the
    missing optimizations run in a process pool; the parent is the single
    writer. A tables cache avoids rebuilding objective tables across p.
    """
    if p < MIN_DEPTH:
        raise ValueError(f"need p >= {MIN_DEPTH}, got {p}")
    done: dict[int, ExperimentRecord] = {}
    missing: list[tuple[int, WeightedGraph]] = []
    for instance_id, g in instances:
        rec = store.get(n, instance_id, p) if store is not None else None
        if rec is not None:
            done[instance_id] = rec
        else:
            missing.append((instance_id, g))

    if missing and workers > 1:
        tasks = [(n, iid, p, g.edges, cfg) for iid, g in missing]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            fresh = list(pool.map(_pool_task, tasks, chunksize=1))
    else:
        fresh = []
        for instance_id, g in missing:
            table = None
            if tables is not None:
                table = tables.get(instance_id)
                if table is None:
                    table = build_objective_table(g)
                    tables[instance_id] = table
            fresh.append(_optimize_one(g, n, instance_id, p, cfg, table=table))

    for rec in fresh:
        if store is not None:
            store.append(rec)
        done[rec.instance_id] = rec
    return [done[iid] for iid, _ in instances]


@dataclass
class SweepConfig:
    target: float = DEFAULT_TARGET
    p_start: int = MIN_DEPTH
    p_cap: int = 64
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    bootstrap: bool = False
    workers: int = 1


def run_sweep(
    instances: list[tuple[int, WeightedGraph]],
    n: int,
    config: SweepConfig | None = None,
    store: ResultsStore | None = None,
) -> SweepSummary:
    """Adaptive depth sweep at size n until the target is bracketed.

    Starts at config.p_start and sweeps upward while the mean measurement
    probability is below target, or downward (to the p >= 2 floor) if the
    start already exceeds it. Stops as soon as consecutive depths bracket
    the target; hitting p_cap first yields an unbracketed summary.
    """
    cfg = config or SweepConfig()
    if not 0.0 < cfg.target < 1.0:
        raise ValueError(f"target must lie in (0, 1), got {cfg.target}")
    if not instances:
        raise ValueError(f"no instances at size {n}")
    tables: dict[int, ObjectiveTable] = {}
    per_p: dict[int, DepthStats] = {}

    def stats_at(p: int) -> DepthStats:
        if p not in per_p:
            records = run_size_depth(
                instances, n, p, cfg.optimizer, store=store,
                workers=cfg.workers, tables=tables,
            )
            per_p[p] = depth_stats(records, bootstrap=cfg.bootstrap)
        return per_p[p]

    p = max(MIN_DEPTH, cfg.p_start)
    at_boundary = False
    bracketed = False
    if stats_at(p).mean < cfg.target:
        while stats_at(p).mean < cfg.target and p < cfg.p_cap:
            p += 1
            stats_at(p)
        bracketed = per_p[p].mean >= cfg.target
    else:
        while p > MIN_DEPTH and stats_at(p - 1).mean >= cfg.target:
            p -= 1
        if p == MIN_DEPTH and per_p[p].mean >= cfg.target:
            at_boundary = True
        bracketed = True

    means = [per_p[q].mean for q in sorted(per_p)]
    monotone = all(b >= a for a, b in zip(means, means[1:]))

    p_star: float | None = None
    p_star_ci: tuple[float, float] | None = None
    if at_boundary:
        p_star = float(MIN_DEPTH)
        p_star_ci = (float(MIN_DEPTH), float(MIN_DEPTH))
    elif bracketed:
        p_star, p_star_ci = interpolate_p_star(per_p, cfg.target)
    return SweepSummary(
        n=n,
        target=cfg.target,
        per_p=dict(sorted(per_p.items())),
        p_star=p_star,
        p_star_ci=p_star_ci,
        bracketed=bracketed,
        at_boundary=at_boundary,
        monotone=monotone,
    )


# --- interpolation -----------------------------------------------------------


def _cross_depth(points: list[tuple[int, float]], target: float) -> float:
    """Depth at which a piecewise-linear curve first reaches target.

    Clamps to the swept range: returns the first depth if the curve starts
    at or above target, the last if it never gets there.
    """
    if points[0][1] >= target:
        return float(points[0][0])
    for (p0, v0), (p1, v1) in zip(points, points[1:]):
        if v0 <= target <= v1:
            if v1 == v0:
                return float(p0)
            return p0 + (target - v0) * (p1 - p0) / (v1 - v0)
    return float(points[-1][0])


def interpolate_p_star(
    per_p: dict[int, DepthStats], target: float
) -> tuple[float, tuple[float, float]]:
    """Linear interpolation of the mean curve to the target crossing.

    Returns (p_star, (p_lo, p_hi)) where the interval comes from the same
    interpolation applied to the CI curves: the upper CI bound crosses the
    target earliest (optimistic depth), the lower bound latest.
    """
    depths = sorted(per_p)
    means = [(p, per_p[p].mean) for p in depths]
    for (p, m) in means:
        if m == target:
            lo = _cross_depth([(q, per_p[q].ci_hi) for q in depths], target)
            hi = _cross_depth([(q, per_p[q].ci_lo) for q in depths], target)
            return float(p), (min(lo, float(p)), max(hi, float(p)))
    for (p0, m0), (p1, m1) in zip(means, means[1:]):
        if m0 < target <= m1:
            if p1 != p0 + 1:
                raise NoBracketError(
                    f"bracketing depths {p0}, {p1} are not consecutive"
                )
            p_star = p0 + (target - m0) / (m1 - m0)
            lo = _cross_depth([(q, per_p[q].ci_hi) for q in depths], target)
            hi = _cross_depth([(q, per_p[q].ci_lo) for q in depths], target)
            return p_star, (min(lo, p_star), max(hi, p_star))
    raise NoBracketError(
        f"means over depths {depths} never bracket target {target}"
    )


def summarize_results(
    rows: list[dict], target: float, bootstrap: bool = False
) -> list[SweepSummary]:
    """Group stored rows by size and locate the target crossing per size."""
    by_n: dict[int, dict[int, list[float]]] = {}
    for row in rows:
        by_n.setdefault(int(row["n"]), {}).setdefault(int(row["p"]), []).append(
            float(row["meas_prob"])
        )
    summaries = []
    for n in sorted(by_n):
        per_p: dict[int, DepthStats] = {}
        for p in sorted(by_n[n]):
            probs = np.array(by_n[n][p])
            mean, (lo, hi) = mean_ci(probs, bootstrap=bootstrap)
            per_p[p] = DepthStats(mean=mean, ci_lo=float(lo), ci_hi=float(hi), count=probs.size)
        means = [per_p[q].mean for q in sorted(per_p)]
        monotone = all(b >= a for a, b in zip(means, means[1:]))
        at_boundary = per_p[min(per_p)].mean >= target and min(per_p) == MIN_DEPTH
        try:
            if at_boundary:
                p_star, ci = float(MIN_DEPTH), (float(MIN_DEPTH), float(MIN_DEPTH))
            else:
                p_star, ci = interpolate_p_star(per_p, target)
            bracketed = True
        except NoBracketError:
            p_star, ci, bracketed = None, None, False
        summaries.append(
            SweepSummary(
                n=n,
                target=target,
                per_p=per_p,
                p_star=p_star,
                p_star_ci=ci,
                bracketed=bracketed,
                at_boundary=at_boundary,
                monotone=monotone,
            )
        )
    return summaries


def write_pstar_csv(summaries: list[SweepSummary], path: Path | str, lineage: str) -> None:
    import csv

    with open(path, "w", newline="") as f:
        f.write(f"# config_hash={lineage}\n")
        writer = csv.writer(f)
        writer.writerow(PSTAR_CSV_FIELDS)
        for s in sorted(summaries, key=lambda s: s.n):
            depths = sorted(s.per_p)
            below = [p for p in depths if s.per_p[p].mean < s.target]
            at_or_above = [p for p in depths if s.per_p[p].mean >= s.target]
            p_lo = below[-1] if below else (depths[0] if depths else "")
            p_hi = at_or_above[0] if at_or_above else (depths[-1] if depths else "")
            writer.writerow(
                [
                    s.n,
                    repr(float(s.target)),
                    p_lo,
                    p_hi,
                    repr(float(s.p_star)) if s.p_star is not None else "",
                    repr(float(s.p_star_ci[0])) if s.p_star_ci else "",
                    repr(float(s.p_star_ci[1])) if s.p_star_ci else "",
                    int(s.bracketed),
                    int(s.at_boundary),
                    int(s.monotone),
                ]
            )


def read_pstar_csv(path: Path | str) -> tuple[list[dict], str | None]:
    import csv

    chash = None
    rows = []
    with open(path, newline="") as f:
        first = f.readline()
        if first.startswith("#"):
            if "config_hash=" in first:
                chash = first.split("config_hash=", 1)[1].strip()
        else:
            f.seek(0)
        for rec in csv.DictReader(f):
            rows.append(
                {
                    "n": int(rec["n"]),
                    "target": float(rec["target"]),
                    "p_lo": int(rec["p_lo"]) if rec["p_lo"] else None,
                    "p_hi": int(rec["p_hi"]) if rec["p_hi"] else None,
                    "p_star": float(rec["p_star"]) if rec["p_star"] else None,
                    "p_ci_lo": float(rec["p_ci_lo"]) if rec["p_ci_lo"] else None,
                    "p_ci_hi": float(rec["p_ci_hi"]) if rec["p_ci_hi"] else None,
                    "bracketed": bool(int(rec["bracketed"])),
                    "at_boundary": bool(int(rec["at_boundary"])),
                    "monotone": bool(int(rec["monotone"])),
                }
            )
    return rows, chash


# --- fits --------------------------------------------------------------------


@dataclass(frozen=True)
class QuadraticFit:
    a: float
    b: float
    c: float
    residual_norm: float

    def predict(self, n: float) -> float:
        return self.a * n * n + self.b * n + self.c


@dataclass(frozen=True)
class ExponentialFit:
    amplitude: float
    rate: float  # multiplicative growth per unit n
    residual_norm: float  # in log space

    def predict(self, n: float) -> float:
        return self.amplitude * self.rate**n


def fit_required_iterations(points: dict[int, float]) -> QuadraticFit:
    """Least-squares quadratic through (n, p_star) points."""
    if len(points) < 3:
        raise ValueError(f"need at least 3 sizes for a quadratic fit, got {len(points)}")
    ns = np.array(sorted(points), dtype=np.float64)
    ps = np.array([points[int(n)] for n in ns], dtype=np.float64)
    coeffs, residuals, rank, _, _ = np.polyfit(ns, ps, 2, full=True)
    if rank < 3:
        raise ValueError("rank-deficient quadratic fit (degenerate size values)")
    residual_norm = float(np.sqrt(residuals[0])) if residuals.size else 0.0
    return QuadraticFit(
        a=float(coeffs[0]), b=float(coeffs[1]), c=float(coeffs[2]),
        residual_norm=residual_norm,
    )


def fit_exponential_iterations(points: dict[int, float]) -> ExponentialFit:
    """Least-squares line through (n, log p_star): p = amplitude * rate^n."""
    if len(points) < 2:
        raise ValueError(f"need at least 2 sizes for an exponential fit, got {len(points)}")
    ns = np.array(sorted(points), dtype=np.float64)
    ps = np.array([points[int(n)] for n in ns], dtype=np.float64)
    if np.any(ps <= 0):
        raise ValueError("exponential fit requires positive depths")
    slope, intercept = np.polyfit(ns, np.log(ps), 1)
    resid = np.log(ps) - (slope * ns + intercept)
    return ExponentialFit(
        amplitude=float(np.exp(intercept)),
        rate=float(np.exp(slope)),
        residual_norm=float(np.linalg.norm(resid)),
    )


def round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def write_fit_json(
    fit: QuadraticFit | ExponentialFit,
    points: dict[int, float],
    path: Path | str,
    lineage: str,
) -> None:
    if isinstance(fit, QuadraticFit):
        body = {
            "model": "quadratic",
            "coefficients": {"a": fit.a, "b": fit.b, "c": fit.c},
            "residual_norm": fit.residual_norm,
        }
    else:
        body = {
            "model": "exponential",
            "coefficients": {"amplitude": fit.amplitude, "rate": fit.rate},
            "residual_norm": fit.residual_norm,
        }
    body["schema"] = FIT_SCHEMA
    body["config_hash"] = lineage
    body["points"] = {str(n): float(p) for n, p in sorted(points.items())}
    with open(path, "w") as f:
        json.dump(body, f, sort_keys=True, indent=2)
        f.write("\n")


def read_fit_json(path: Path | str) -> dict:
    with open(path) as f:
        body = json.load(f)
    if body.get("schema") != FIT_SCHEMA:
        raise SchemaError(f"{path}: not a {FIT_SCHEMA} file")
    return body


# --- comparison metrics ------------------------------------------------------


def four_shot_probability(meas_prob: float) -> float:
    """Chance that at least one of four measurements hits an optimum."""
    if not 0.0 <= meas_prob <= 1.0:
        raise ValueError(f"meas_prob {meas_prob} outside [0, 1]")
    return 1.0 - (1.0 - meas_prob) ** 4


def amplification(meas_prob: float, degeneracy: int, n: int) -> float:
    """Measurement probability relative to the equal-superposition baseline."""
    baseline = degeneracy / float(2**n)
    return meas_prob / baseline
