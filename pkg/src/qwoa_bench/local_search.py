"""Single-flip local-search baselines with exact evaluation accounting.

Two hill-climbing variants over the n-bit cut landscape: steepest ascent
(examine all n flips, take the strictly best, ties to the lowest index)
and first improvement (scan flips in a fresh random order each sweep, take
the first strict improvement). Both use O(deg) incremental gain updates,
but the evaluation count charges one unit per neighbor examined, which is
the implementation-independent convention.

For steepest ascent the dynamics are deterministic given the start, so the
solve probability has an exact value: the measure of the basin of
attraction of the optimal set, computed here by following the successor
map from every one of the 2^n starts at once.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from qwoa_bench.graphs import WeightedGraph
from qwoa_bench.landscape import build_objective_table, flipped_bit_view

VARIANTS = ("steepest_ascent", "first_improvement")
EXACT_BASIN_CAP = 16
SOLVE_TOL = 1e-9
WILSON_Z = 1.959963984540054  # two-sided 95%

LS_CSV_FIELDS = ("n", "instance_id", "variant", "runs", "p_solve", "ci_lo", "ci_hi", "mean_evals")


@dataclass(frozen=True)
class LocalSearchRun:
    """One hill-climbing trajectory; states are bitmask ints (bit i = vertex i)."""

    variant: str
    start: int
    final: int
    final_value: float
    n_evals: int
    solved: bool


def cut_value_of_state(g: WeightedGraph, state: int) -> float:
    total = 0.0
    for i, j, w in g.edges:
        if ((state >> i) ^ (state >> j)) & 1:
            total += w
    return total


def _initial_gains(g: WeightedGraph, state: int) -> np.ndarray:
    # gain[v] = change in cut value if vertex v flips side
    gains = np.zeros(g.n, dtype=np.float64)
    for i, j, w in g.edges:
        cut = ((state >> i) ^ (state >> j)) & 1
        contrib = w * (1.0 - 2.0 * cut)
        gains[i] += contrib
        gains[j] += contrib
    return gains


def run_local_search(
    g: WeightedGraph,
    variant: str,
    rng: np.random.Generator,
    optimum: float | None = None,
    start: int | None = None,
    debug_check: bool = False,
) -> LocalSearchRun:
    """Hill-climb from a uniform random start until no strict improvement.

    Pass `optimum` (the exact maximum cut value) to avoid recomputing the
    full landscape; `start` overrides the random initial state. With
    debug_check every accepted move cross-checks the incremental value
    against a from-scratch recomputation.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}, expected one of {VARIANTS}")
    n = g.n
    if start is None:
        start = int(rng.integers(0, 1 << n))
    if not 0 <= start < (1 << n):
        raise ValueError(f"start {start} out of range for n={n}")
    if optimum is None:
        optimum = build_objective_table(g).optimum

    adj = g.adjacency()
    state = start
    value = cut_value_of_state(g, state)
    gains = _initial_gains(g, state)
    n_evals = 0

    def flip(v: int) -> None:
        nonlocal state, value
        value += float(gains[v])
        for u, w in adj[v]:
            was_cut = ((state >> u) ^ (state >> v)) & 1
            gains[u] += 2.0 * w * (2.0 * was_cut - 1.0)
        gains[v] = -gains[v]
        state ^= 1 << v
        if debug_check:
            fresh = cut_value_of_state(g, state)
            if abs(fresh - value) > 1e-9:
                raise AssertionError(
                    f"incremental value {value} drifted from recomputed {fresh}"
                )

    if variant == "steepest_ascent":
        while True:
            n_evals += n
            best = int(np.argmax(gains))  # first max = lowest flipped index
            if gains[best] <= 0.0:
                break
            flip(best)
    else:
        improved = True
        while improved:
            improved = False
            for pos, v in enumerate(rng.permutation(n)):
                if gains[v] > 0.0:
                    n_evals += pos + 1
                    flip(int(v))
                    improved = True
                    break
            else:
                n_evals += n

    solved = abs(value - optimum) <= SOLVE_TOL * max(1.0, optimum)
    return LocalSearchRun(
        variant=variant,
        start=start,
        final=state,
        final_value=value,
        n_evals=n_evals,
        solved=solved,
    )


def wilson_interval(successes: int, trials: int, z: float = WILSON_Z) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise ValueError("need at least one trial")
    phat = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (phat + z2 / (2.0 * trials)) / denom
    half = (z / denom) * np.sqrt(phat * (1.0 - phat) / trials + z2 / (4.0 * trials * trials))
    return (max(0.0, center - half), min(1.0, center + half))


def estimate_solve_probability(
    g: WeightedGraph,
    variant: str,
    runs: int,
    rng: np.random.Generator,
    optimum: float | None = None,
) -> tuple[float, tuple[float, float], float]:
    """Monte Carlo solve probability with a Wilson 95% interval.

    Returns (p_solve, (ci_lo, ci_hi), mean_evals) over `runs` independent
    uniform random starts.
    """
    if runs < 1:
        raise ValueError(f"need runs >= 1, got {runs}")
    if optimum is None:
        optimum = build_objective_table(g).optimum
    solved = 0
    total_evals = 0
    for _ in range(runs):
        run = run_local_search(g, variant, rng, optimum=optimum)
        solved += run.solved
        total_evals += run.n_evals
    p_solve = solved / runs
    return p_solve, wilson_interval(solved, runs), total_evals / runs


def exact_solve_probability(g: WeightedGraph, variant: str = "steepest_ascent") -> float:
    """Exact basin measure of the optimal set under steepest ascent.

    Builds the deterministic successor map over all 2^n states and iterates
    it to its fixed points by pointer doubling. Only steepest ascent has a
    deterministic map; first improvement's scan order is random.
    """
    if variant != "steepest_ascent":
        raise ValueError(f"exact basins require a deterministic variant, got {variant!r}")
    if g.n > EXACT_BASIN_CAP:
        raise ValueError(f"n={g.n} exceeds exact-basin cap {EXACT_BASIN_CAP}")
    table = build_objective_table(g)
    values = table.values
    size = values.size
    idx = np.arange(size, dtype=np.int64)

    deltas = np.empty((g.n, size), dtype=np.float64)
    for bit in range(g.n):
        deltas[bit] = flipped_bit_view(values, bit) - values
    best_bit = deltas.argmax(axis=0)  # first max = lowest flipped index
    best_gain = deltas[best_bit, idx]
    succ = np.where(best_gain > 0.0, idx ^ (np.int64(1) << best_bit), idx)

    while True:
        doubled = succ[succ]
        if np.array_equal(doubled, succ):
            break
        succ = doubled

    tol = SOLVE_TOL * max(1.0, table.optimum)
    return float(np.count_nonzero(values[succ] >= table.optimum - tol) / size)


def survey_rng(seed: int, n: int, index: int, variant: str) -> np.random.Generator:
    """Independent stream per (size, instance, variant) for survey runs."""
    vcode = VARIANTS.index(variant)
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(n, index, vcode))
    return np.random.Generator(np.random.PCG64(ss))


def survey_library(
    library_items: list[tuple[int, int, WeightedGraph]],
    variants: tuple[str, ...],
    runs: int,
    seed: int,
    optima: dict[tuple[int, int], float] | None = None,
) -> list[dict]:
    """Solve-probability rows over (instance, variant) pairs.

    library_items holds (n, instance_id, graph) triples; optima maps
    (n, instance_id) to the exact maximum cut when already known.
    """
    rows = []
    for n, index, g in library_items:
        opt = optima.get((n, index)) if optima else None
        if opt is None:
            opt = build_objective_table(g).optimum
        for variant in variants:
            rng = survey_rng(seed, n, index, variant)
            p_solve, (lo, hi), mean_evals = estimate_solve_probability(
                g, variant, runs, rng, optimum=opt
            )
            rows.append(
                {
                    "n": n,
                    "instance_id": index,
                    "variant": variant,
                    "runs": runs,
                    "p_solve": p_solve,
                    "ci_lo": lo,
                    "ci_hi": hi,
                    "mean_evals": mean_evals,
                }
            )
    return rows


def fit_evals_exponent(sizes: np.ndarray, mean_evals: np.ndarray) -> float:
    """Least-squares slope of log(mean_evals) against log(n)."""
    sizes = np.asarray(sizes, dtype=np.float64)
    mean_evals = np.asarray(mean_evals, dtype=np.float64)
    if sizes.size < 2:
        raise ValueError("need at least two sizes to fit a growth exponent")
    slope, _ = np.polyfit(np.log(sizes), np.log(mean_evals), 1)
    return float(slope)


def write_ls_csv(rows: list[dict], path: Path | str, config_hash: str) -> None:
    with open(path, "w", newline="") as f:
        f.write(f"# config_hash={config_hash}\n")
        writer = csv.writer(f)
        writer.writerow(LS_CSV_FIELDS)
        ordered = sorted(rows, key=lambda r: (r["n"], r["instance_id"], r["variant"]))
        for r in ordered:
            writer.writerow(
                [
                    r["n"],
                    r["instance_id"],
                    r["variant"],
                    r["runs"],
                    repr(float(r["p_solve"])),
                    repr(float(r["ci_lo"])),
                    repr(float(r["ci_hi"])),
                    repr(float(r["mean_evals"])),
                ]
            )


def read_ls_csv(path: Path | str) -> tuple[list[dict], str | None]:
    chash = None
    rows = []
    with open(path, newline="") as f:
        first = f.readline()
        if first.startswith("#"):
            if "config_hash=" in first:
                chash = first.split("config_hash=", 1)[1].strip()
        else:
            f.seek(0)
        reader = csv.DictReader(f)
        for rec in reader:
            rows.append(
                {
                    "n": int(rec["n"]),
                    "instance_id": int(rec["instance_id"]),
                    "variant": rec["variant"],
                    "runs": int(rec["runs"]),
                    "p_solve": float(rec["p_solve"]),
                    "ci_lo": float(rec["ci_lo"]),
                    "ci_hi": float(rec["ci_hi"]),
                    "mean_evals": float(rec["mean_evals"]),
                }
            )
    return rows, chash
