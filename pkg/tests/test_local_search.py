from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from qwoa_bench.graphs import LibraryConfig, WeightedGraph, generate_instance, generate_library, instance_rng
from qwoa_bench.landscape import build_objective_table
from qwoa_bench.local_search import (
    LS_CSV_FIELDS,
    VARIANTS,
    cut_value_of_state,
    estimate_solve_probability,
    exact_solve_probability,
    fit_evals_exponent,
    read_ls_csv,
    run_local_search,
    survey_library,
    survey_rng,
    wilson_interval,
    write_ls_csv,
)

SINGLE_EDGE = WeightedGraph(2, ((0, 1, 1.0),))
TRIANGLE = WeightedGraph(3, ((0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)))
PATH3 = WeightedGraph(3, ((0, 1, 1.0), (1, 2, 1.0)))


def random_instance(n: int, seed: int) -> WeightedGraph:
    return generate_instance(n, 0.5, "uniform(0,1]", instance_rng(seed, n, 0))


def test_single_edge_steepest_from_all_zero() -> None:
    run = run_local_search(SINGLE_EDGE, "steepest_ascent", np.random.default_rng(0), start=0b00)
    assert run.final in (0b01, 0b10)
    assert run.final == 0b01  # ties break to the lowest flipped index
    assert run.solved
    assert run.final_value == 1.0
    # one improving step (2 neighbor evals) plus the confirming sweep (2)
    assert run.n_evals == 4


def test_single_edge_first_improvement_from_all_zero() -> None:
    # Whatever the scan order, the first neighbor improves (1 eval), then a
    # full failed sweep (2 evals) certifies local optimality.
    for seed in range(5):
        run = run_local_search(
            SINGLE_EDGE, "first_improvement", np.random.default_rng(seed), start=0b00
        )
        assert run.solved
        assert run.final in (0b01, 0b10)
        assert run.n_evals == 3


def test_path_graph_steepest_from_all_zero() -> None:
    run = run_local_search(PATH3, "steepest_ascent", np.random.default_rng(0), start=0b000)
    assert run.final == 0b010
    assert run.final_value == 2.0
    assert run.solved
    assert run.n_evals == 6  # one step of 3 evals + confirming sweep of 3


def test_every_start_on_path_graph_solves() -> None:
    for start in range(8):
        run = run_local_search(PATH3, "steepest_ascent", np.random.default_rng(0), start=start)
        assert run.solved
        assert run.final in (0b010, 0b101)


def test_final_states_are_local_maxima() -> None:
    for seed in range(4):
        g = random_instance(8, seed)
        table = build_objective_table(g)
        v = table.values
        rng = np.random.default_rng(100 + seed)
        for variant in VARIANTS:
            for _ in range(25):
                run = run_local_search(g, variant, rng, optimum=table.optimum)
                assert all(
                    v[run.final] >= v[run.final ^ (1 << bit)] for bit in range(g.n)
                )
                assert run.final_value == pytest.approx(float(v[run.final]), abs=1e-9)
                assert run.n_evals >= g.n


def test_solved_flag_matches_landscape_oracle() -> None:
    g = random_instance(12, 5)
    table = build_objective_table(g)
    rng = np.random.default_rng(7)
    runs = [run_local_search(g, "steepest_ascent", rng, optimum=table.optimum) for _ in range(200)]
    for run in runs:
        exact = abs(run.final_value - table.optimum) <= 1e-9 * max(1.0, table.optimum)
        assert run.solved == exact
    fraction = sum(r.solved for r in runs) / len(runs)
    assert 0.0 <= fraction <= 1.0


def test_incremental_values_survive_debug_check() -> None:
    for seed in range(3):
        g = random_instance(10, 200 + seed)
        rng = np.random.default_rng(seed)
        for variant in VARIANTS:
            for _ in range(10):
                run_local_search(g, variant, rng, debug_check=True)


def test_runs_reproduce_bit_exactly() -> None:
    g = random_instance(9, 6)
    for variant in VARIANTS:
        a = [run_local_search(g, variant, np.random.default_rng(42)) for _ in range(20)]
        b = [run_local_search(g, variant, np.random.default_rng(42)) for _ in range(20)]
        assert a == b


def test_input_validation() -> None:
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        run_local_search(SINGLE_EDGE, "tabu", rng)
    with pytest.raises(ValueError):
        run_local_search(SINGLE_EDGE, "steepest_ascent", rng, start=4)
    with pytest.raises(ValueError):
        estimate_solve_probability(SINGLE_EDGE, "steepest_ascent", 0, rng)
    with pytest.raises(ValueError):
        exact_solve_probability(SINGLE_EDGE, "first_improvement")
    with pytest.raises(ValueError):
        exact_solve_probability(WeightedGraph(17, ((0, 1, 1.0),)))


def test_wilson_interval_against_direct_formula() -> None:
    from scipy.stats import norm

    z = float(norm.ppf(0.975))
    for successes, trials in ((0, 1), (1, 1), (3, 10), (97, 100), (500, 1000)):
        lo, hi = wilson_interval(successes, trials)
        phat = successes / trials
        denom = 1.0 + z * z / trials
        center = (phat + z * z / (2 * trials)) / denom
        half = (z / denom) * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials))
        assert lo == pytest.approx(max(0.0, center - half), abs=1e-12)
        assert hi == pytest.approx(min(1.0, center + half), abs=1e-12)
        assert 0.0 <= lo <= phat <= hi <= 1.0
    with pytest.raises(ValueError):
        wilson_interval(0, 0)


def test_wilson_interval_single_run_is_wide() -> None:
    lo, hi = wilson_interval(1, 1)
    assert lo == pytest.approx(0.2065, abs=5e-4)
    assert hi == 1.0
    lo0, hi0 = wilson_interval(0, 1)
    assert lo0 == 0.0
    assert hi0 == pytest.approx(1.0 - 0.2065, abs=5e-4)


def test_triangle_and_single_edge_solve_always() -> None:
    assert exact_solve_probability(SINGLE_EDGE) == 1.0
    assert exact_solve_probability(TRIANGLE) == 1.0
    # every non-optimum of the triangle has an improving flip directly into
    # the optimal set, so both variants always solve it
    for variant in VARIANTS:
        p_solve, (lo, hi), mean_evals = estimate_solve_probability(
            TRIANGLE, variant, 200, np.random.default_rng(1)
        )
        assert p_solve == 1.0
        assert p_solve >= 6.0 / 8.0
        assert hi == 1.0
        assert mean_evals >= TRIANGLE.n


def test_exact_basin_matches_per_start_trajectories() -> None:
    # Follow the deterministic steepest-ascent map from every start through
    # the run-level implementation; the vectorized basin computation must
    # produce the same fraction.
    for seed in range(4):
        g = random_instance(8, 300 + seed)
        table = build_objective_table(g)
        solved = sum(
            run_local_search(
                g, "steepest_ascent", np.random.default_rng(0), optimum=table.optimum, start=b
            ).solved
            for b in range(1 << g.n)
        )
        assert exact_solve_probability(g) == pytest.approx(solved / (1 << g.n), abs=1e-15)


def test_monte_carlo_within_ci_of_exact_basin() -> None:
    g = random_instance(10, 9)
    exact = exact_solve_probability(g)
    assert 0.0 < exact <= 1.0
    p_solve, (lo, hi), _mean = estimate_solve_probability(
        g, "steepest_ascent", 10_000, np.random.default_rng(11)
    )
    assert lo <= exact <= hi
    assert p_solve == pytest.approx(exact, abs=0.02)


def test_survey_rng_streams() -> None:
    a = survey_rng(42, 10, 3, "steepest_ascent")
    b = survey_rng(42, 10, 3, "steepest_ascent")
    c = survey_rng(42, 10, 3, "first_improvement")
    first_a = a.integers(1 << 20)
    assert first_a == b.integers(1 << 20)
    assert first_a != c.integers(1 << 20)


def test_survey_library_rows_and_csv_round_trip(tmp_path: Path) -> None:
    lib = generate_library(LibraryConfig(seed=3, sizes=(6, 8), per_size=2))
    rows = survey_library(lib.items(), VARIANTS, runs=50, seed=lib.config.seed)
    assert len(rows) == 8
    for row in rows:
        assert set(row) == set(LS_CSV_FIELDS)
        assert row["runs"] == 50
        assert 0.0 <= row["ci_lo"] <= row["p_solve"] <= row["ci_hi"] <= 1.0
        assert row["mean_evals"] >= row["n"]
    path = tmp_path / "ls.csv"
    write_ls_csv(rows, path, "abc123")
    back, chash = read_ls_csv(path)
    assert chash == "abc123"
    ordered = sorted(rows, key=lambda r: (r["n"], r["instance_id"], r["variant"]))
    assert back == ordered


def test_survey_reuses_known_optima() -> None:
    lib = generate_library(LibraryConfig(seed=3, sizes=(6,), per_size=2))
    optima = {
        (n, idx): build_objective_table(g).optimum for n, idx, g in lib.items()
    }
    with_opt = survey_library(lib.items(), ("steepest_ascent",), runs=30, seed=3, optima=optima)
    without = survey_library(lib.items(), ("steepest_ascent",), runs=30, seed=3)
    assert with_opt == without


def test_fit_evals_exponent_recovers_power_law() -> None:
    sizes = np.array([8, 10, 12, 14, 16])
    evals = 3.0 * sizes.astype(float) ** 2.2
    assert fit_evals_exponent(sizes, evals) == pytest.approx(2.2, abs=1e-12)
    with pytest.raises(ValueError):
        fit_evals_exponent(np.array([8]), np.array([10.0]))


def test_mean_evals_grow_with_size() -> None:
    small = generate_library(LibraryConfig(seed=5, sizes=(8,), per_size=3))
    large = generate_library(LibraryConfig(seed=5, sizes=(14,), per_size=3))
    mean_at = {}
    for lib, n in ((small, 8), (large, 14)):
        rows = survey_library(lib.items(), ("steepest_ascent",), runs=100, seed=5)
        mean_at[n] = float(np.mean([r["mean_evals"] for r in rows]))
    assert mean_at[14] > mean_at[8]


def test_cut_value_of_state_matches_table() -> None:
    g = random_instance(7, 13)
    table = build_objective_table(g)
    for b in range(0, 1 << 7, 9):
        assert cut_value_of_state(g, b) == pytest.approx(float(table.values[b]), abs=1e-12)
