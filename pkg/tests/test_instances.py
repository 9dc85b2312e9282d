from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from qwoa_bench.graphs import (
    Library,
    LibraryConfig,
    SchemaError,
    WeightedGraph,
    canonical_weight_dist,
    generate_instance,
    generate_library,
    instance_rng,
    load_instance,
    load_library,
    parse_weight_dist,
    save_instance,
    save_library,
    _sample_instance,
)

GOLDEN_DIR = Path(__file__).parent / "data" / "golden_library"


def test_forced_single_edge() -> None:
    g = generate_instance(2, 1.0, "uniform(0,1]", instance_rng(0, 2, 0))
    assert g.n == 2
    assert g.m == 1
    i, j, w = g.edges[0]
    assert (i, j) == (0, 1)
    assert 0.0 < w <= 1.0


def test_regeneration_is_bit_identical() -> None:
    a = generate_instance(10, 0.5, "uniform(0,1]", instance_rng(42, 10, 0))
    b = generate_instance(10, 0.5, "uniform(0,1]", instance_rng(42, 10, 0))
    assert a.n == b.n
    assert a.edges == b.edges  # exact float equality, not approx


def test_library_regeneration_is_bit_identical() -> None:
    cfg = LibraryConfig(seed=42, sizes=(6, 8), per_size=5)
    first = generate_library(cfg)
    second = generate_library(cfg)
    assert first.graphs.keys() == second.graphs.keys()
    for key in first.graphs:
        assert first.graphs[key].edges == second.graphs[key].edges
    assert first.resamples == second.resamples


def test_instances_regenerable_without_predecessors() -> None:
    # The stream-splitting rule promises any (n, index) is reachable alone.
    lib = generate_library(LibraryConfig(seed=13, sizes=(7,), per_size=6))
    for idx, g in lib.at_size(7):
        solo = generate_instance(7, 0.5, "uniform(0,1]", instance_rng(13, 7, idx))
        assert solo.edges == g.edges


def test_mean_edge_count_matches_truncated_binomial_law() -> None:
    # Zero-edge draws are rejected, so edge counts follow binomial(6, 0.5)
    # conditioned on being positive. Compute that law's mean and variance
    # here from the pmf as an independent oracle.
    n, p, pairs = 4, 0.5, 6
    pmf = [math.comb(pairs, k) * p**k * (1 - p) ** (pairs - k) for k in range(pairs + 1)]
    keep = 1.0 - pmf[0]
    mean = sum(k * pmf[k] for k in range(1, pairs + 1)) / keep
    second = sum(k * k * pmf[k] for k in range(1, pairs + 1)) / keep
    var = second - mean * mean

    trials = 10_000
    counts = [
        generate_instance(n, p, "uniform(0,1]", instance_rng(seed, n, 0)).m
        for seed in range(trials)
    ]
    se = math.sqrt(var / trials)
    assert abs(np.mean(counts) - mean) < 3.0 * se
    # Sanity: the truncated mean sits just above the untruncated 3.0.
    assert mean == pytest.approx(3.0 * 64 / 63)


def test_edge_density_converges_to_edge_prob() -> None:
    # At n=10 the zero-edge rejection probability is 0.7^45 ~ 1e-7, so the
    # plain binomial law applies to the pooled pair-inclusion count.
    n, prob, trials = 10, 0.3, 2000
    pairs = n * (n - 1) // 2
    total = sum(
        generate_instance(n, prob, "uniform(0,1]", instance_rng(seed, n, 1)).m
        for seed in range(trials)
    )
    draws = trials * pairs
    se = math.sqrt(draws * prob * (1 - prob))
    assert abs(total - draws * prob) < 3.0 * se


def test_zero_edge_rejection_counted_and_never_surfaced() -> None:
    rejected_somewhere = False
    for seed in range(400):
        g, resamples = _sample_instance(2, 0.1, "uniform(0,1]", instance_rng(seed, 2, 0))
        assert g.m >= 1
        rejected_somewhere = rejected_somewhere or resamples > 0
    # At edge_prob=0.1 and one candidate pair, rejections are near certain.
    assert rejected_somewhere


def test_generated_graphs_satisfy_invariants() -> None:
    lo, hi = 0.5, 2.0
    for seed in range(50):
        g = generate_instance(9, 0.4, "uniform(0.5,2]", instance_rng(seed, 9, 3))
        assert 1 <= g.m <= 9 * 8 // 2
        seen = set()
        for i, j, w in g.edges:
            assert 0 <= i < j < g.n
            assert (i, j) not in seen
            seen.add((i, j))
            assert lo < w <= hi


def test_weight_dist_parsing() -> None:
    assert parse_weight_dist("uniform") == (0.0, 1.0)
    assert parse_weight_dist("uniform(0,1]") == (0.0, 1.0)
    assert parse_weight_dist("uniform(0.5, 2]") == (0.5, 2.0)
    assert canonical_weight_dist("uniform") == "uniform(0,1]"
    with pytest.raises(ValueError):
        parse_weight_dist("normal(0,1)")
    with pytest.raises(ValueError):
        parse_weight_dist("uniform(2,1]")
    with pytest.raises(ValueError):
        parse_weight_dist("uniform(-1,1]")


def test_invalid_generation_parameters() -> None:
    rng = instance_rng(0, 5, 0)
    with pytest.raises(ValueError):
        generate_instance(1, 0.5, "uniform", rng)
    with pytest.raises(ValueError):
        generate_instance(5, 0.0, "uniform", rng)
    with pytest.raises(ValueError):
        generate_instance(5, 1.5, "uniform", rng)


def test_weighted_graph_rejects_invalid_edges() -> None:
    with pytest.raises(ValueError):
        WeightedGraph(1, ())
    with pytest.raises(ValueError):
        WeightedGraph(3, ((0, 0, 1.0),))
    with pytest.raises(ValueError):
        WeightedGraph(3, ((1, 0, 1.0),))
    with pytest.raises(ValueError):
        WeightedGraph(3, ((0, 3, 1.0),))
    with pytest.raises(ValueError):
        WeightedGraph(3, ((0, 1, 1.0), (0, 1, 2.0)))
    with pytest.raises(ValueError):
        WeightedGraph(3, ((0, 1, 0.0),))
    with pytest.raises(ValueError):
        WeightedGraph(3, ((0, 1, float("nan")),))


def test_library_config_validation() -> None:
    with pytest.raises(ValueError):
        LibraryConfig(seed=0, sizes=(), per_size=1)
    with pytest.raises(ValueError):
        LibraryConfig(seed=0, sizes=(4,), per_size=0)
    with pytest.raises(ValueError):
        LibraryConfig(seed=0, sizes=(1,), per_size=1)
    with pytest.raises(ValueError):
        LibraryConfig(seed=0, sizes=(4,), per_size=1, edge_prob=0.0)


def test_instance_round_trip(tmp_path: Path) -> None:
    for seed in range(10):
        g = generate_instance(8, 0.6, "uniform(0,1]", instance_rng(seed, 8, 2))
        path = tmp_path / f"g{seed}.txt"
        save_instance(g, path)
        back = load_instance(path)
        assert back.n == g.n
        assert back.edges == g.edges  # weights bit-exact via repr round-trip


def test_library_round_trip(tmp_path: Path) -> None:
    cfg = LibraryConfig(seed=5, sizes=(4, 6), per_size=4)
    lib = generate_library(cfg)
    manifest = save_library(lib, tmp_path / "lib")
    back = load_library(manifest)
    assert back.config == cfg
    assert back.hash == lib.hash
    assert back.graphs.keys() == lib.graphs.keys()
    for key in lib.graphs:
        assert back.graphs[key].edges == lib.graphs[key].edges
    assert back.resamples == lib.resamples
    # Loading by directory works too.
    again = load_library(tmp_path / "lib")
    assert again.graphs.keys() == lib.graphs.keys()


def test_truncated_instance_file_is_schema_error(tmp_path: Path) -> None:
    g = generate_instance(8, 0.6, "uniform(0,1]", instance_rng(1, 8, 0))
    path = tmp_path / "g.txt"
    save_instance(g, path)
    full = path.read_text(encoding="utf-8").splitlines()
    # Drop the checksum trailer, then drop an edge line as well.
    for cut in (full[:-1], full[:-2]):
        path.write_text("\n".join(cut) + "\n", encoding="utf-8")
        with pytest.raises(SchemaError):
            load_instance(path)


def test_corrupted_instance_payload_is_schema_error(tmp_path: Path) -> None:
    g = generate_instance(8, 0.6, "uniform(0,1]", instance_rng(2, 8, 0))
    path = tmp_path / "g.txt"
    save_instance(g, path)
    lines = path.read_text(encoding="utf-8").splitlines()
    i, j, w = g.edges[0]
    lines[1] = f"{i} {j} {float(w * 2)!r}"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    with pytest.raises(SchemaError):
        load_instance(path)


def test_manifest_hash_mismatch_is_schema_error(tmp_path: Path) -> None:
    lib = generate_library(LibraryConfig(seed=5, sizes=(4,), per_size=2))
    manifest = save_library(lib, tmp_path / "lib")
    text = manifest.read_text(encoding="utf-8")
    manifest.write_text(text.replace('"per_size": 2', '"per_size": 3'), encoding="utf-8")
    with pytest.raises(SchemaError):
        load_library(manifest)


def test_golden_library_matches_regeneration() -> None:
    # The golden directory was written once by save_library and committed;
    # loading it must equal regenerating from the same config.
    golden = load_library(GOLDEN_DIR / "manifest.json")
    cfg = LibraryConfig(seed=7, sizes=(4, 5), per_size=3)
    assert golden.config == cfg
    fresh = generate_library(cfg)
    assert golden.graphs.keys() == fresh.graphs.keys()
    for key in fresh.graphs:
        assert golden.graphs[key].edges == fresh.graphs[key].edges


def test_library_at_size_ordering() -> None:
    lib = generate_library(LibraryConfig(seed=3, sizes=(4, 5), per_size=4))
    entries = lib.at_size(5)
    assert [idx for idx, _ in entries] == [0, 1, 2, 3]
    assert all(g.n == 5 for _, g in entries)
    assert len(lib.items()) == 8


def test_scaled_graph() -> None:
    g = WeightedGraph(3, ((0, 1, 1.5), (1, 2, 2.0)))
    s = g.scaled(2.0)
    assert s.edges == ((0, 1, 3.0), (1, 2, 4.0))
    with pytest.raises(ValueError):
        g.scaled(0.0)


def test_adjacency_lists_both_directions() -> None:
    g = WeightedGraph(3, ((0, 1, 1.5), (1, 2, 2.0)))
    adj = g.adjacency()
    assert adj[0] == [(1, 1.5)]
    assert sorted(adj[1]) == [(0, 1.5), (2, 2.0)]
    assert adj[2] == [(1, 2.0)]


def test_hash_distinguishes_configs() -> None:
    base = LibraryConfig(seed=42, sizes=(10,), per_size=5)
    assert base.hash != LibraryConfig(seed=43, sizes=(10,), per_size=5).hash
    assert base.hash != LibraryConfig(seed=42, sizes=(12,), per_size=5).hash
    assert base.hash == LibraryConfig(seed=42, sizes=(10,), per_size=5, weight_dist="uniform").hash
