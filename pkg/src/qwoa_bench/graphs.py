"""Weighted maxcut problem instances: generation, serialization, libraries.

Instances are Erdos-Renyi-Gilbert graphs with i.i.d. edge weights. Generation
is fully deterministic: every instance is drawn from its own child RNG stream
keyed by (library seed, vertex count, instance index), so any single instance
can be regenerated without generating its predecessors.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SCHEMA_TAG = "maxcut v1"
MANIFEST_SCHEMA = "maxcut-library v1"
BIT_GENERATOR = "PCG64"

_UNIFORM_RE = re.compile(r"^uniform\(\s*([^,\s]+)\s*,\s*([^\]\s]+)\s*\]$")


class SchemaError(ValueError):
    """An instance or manifest file does not conform to the on-disk schema."""


@dataclass(frozen=True)
class WeightedGraph:
    """A weighted undirected graph; the maxcut problem instance.

    Edges are (i, j, w) with 0 <= i < j < n and w finite and strictly
    positive. No self-loops, no duplicates.
    """

    n: int
    edges: tuple[tuple[int, int, float], ...]

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError(f"need at least 2 vertices, got n={self.n}")
        seen = set()
        for i, j, w in self.edges:
            if not 0 <= i < j < self.n:
                raise ValueError(f"edge ({i},{j}) violates 0 <= i < j < n={self.n}")
            if (i, j) in seen:
                raise ValueError(f"duplicate edge ({i},{j})")
            seen.add((i, j))
            if not np.isfinite(w) or w <= 0.0:
                raise ValueError(f"edge ({i},{j}) has non-positive or non-finite weight {w}")

    @property
    def m(self) -> int:
        return len(self.edges)

    def adjacency(self) -> list[list[tuple[int, float]]]:
        """Per-vertex list of (neighbor, weight)."""
        adj: list[list[tuple[int, float]]] = [[] for _ in range(self.n)]
        for i, j, w in self.edges:
            adj[i].append((j, w))
            adj[j].append((i, w))
        return adj

    def scaled(self, c: float) -> "WeightedGraph":
        """Copy with all weights multiplied by c > 0."""
        if c <= 0:
            raise ValueError("scale factor must be positive")
        return WeightedGraph(self.n, tuple((i, j, w * c) for i, j, w in self.edges))


def parse_weight_dist(descriptor: str) -> tuple[float, float]:
    """Parse a weight-distribution descriptor into uniform bounds (lo, hi].

    Supported: "uniform" (alias for "uniform(0,1]") and "uniform(lo,hi]"
    with 0 <= lo < hi. Weights are drawn from the half-open interval (lo, hi],
    keeping them strictly positive.
    """
    if descriptor == "uniform":
        return 0.0, 1.0
    m = _UNIFORM_RE.match(descriptor.strip())
    if m is None:
        raise ValueError(f"unsupported weight distribution descriptor: {descriptor!r}")
    lo, hi = float(m.group(1)), float(m.group(2))
    if not (0.0 <= lo < hi) or not np.isfinite(hi):
        raise ValueError(f"need 0 <= lo < hi in {descriptor!r}")
    return lo, hi


def canonical_weight_dist(descriptor: str) -> str:
    lo, hi = parse_weight_dist(descriptor)
    return f"uniform({lo:g},{hi:g}]"


def _sample_instance(
    n: int,
    edge_prob: float,
    weight_dist: str,
    rng: np.random.Generator,
) -> tuple[WeightedGraph, int]:
    """Draw one graph; returns (graph, number of zero-edge rejections)."""
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    if not 0.0 < edge_prob <= 1.0:
        raise ValueError(f"edge probability must be in (0, 1], got {edge_prob}")
    lo, hi = parse_weight_dist(weight_dist)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    resamples = 0
    while True:
        include = rng.random(len(pairs)) < edge_prob
        k = int(include.sum())
        if k == 0:
            # A maxcut instance with no edges is degenerate; redraw.
            resamples += 1
            continue
        u = rng.random(k)
        weights = hi - (hi - lo) * u  # maps [0,1) onto (lo, hi]
        edges = tuple(
            (i, j, float(w))
            for (i, j), w in zip((p for p, inc in zip(pairs, include) if inc), weights)
        )
        return WeightedGraph(n, edges), resamples


def generate_instance(
    n: int,
    edge_prob: float,
    weight_dist: str,
    rng: np.random.Generator,
) -> WeightedGraph:
    """Generate one Erdos-Renyi-Gilbert weighted graph from the given stream."""
    graph, _ = _sample_instance(n, edge_prob, weight_dist, rng)
    return graph


def instance_rng(seed: int, n: int, index: int) -> np.random.Generator:
    """Child RNG stream for instance `index` at size `n`.

    Stream-splitting rule: SeedSequence(seed) spawned with key (n, index),
    backed by PCG64. Regenerating any instance needs only this triple.
    """
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(n, index))
    return np.random.Generator(np.random.PCG64(ss))


def config_hash(payload: dict) -> str:
    """Short stable hash of a JSON-serializable config dict."""
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class LibraryConfig:
    """Identity of a benchmark library; hashing it fixes the lineage."""

    seed: int
    sizes: tuple[int, ...]
    per_size: int
    edge_prob: float = 0.5
    weight_dist: str = "uniform(0,1]"

    def __post_init__(self) -> None:
        if self.per_size < 1:
            raise ValueError("per_size must be >= 1")
        if len(self.sizes) == 0 or any(n < 2 for n in self.sizes):
            raise ValueError("sizes must be non-empty with every n >= 2")
        if not 0.0 < self.edge_prob <= 1.0:
            raise ValueError(f"edge probability must be in (0, 1], got {self.edge_prob}")
        parse_weight_dist(self.weight_dist)

    def payload(self) -> dict:
        return {
            "kind": "maxcut-library",
            "seed": int(self.seed),
            "sizes": [int(n) for n in self.sizes],
            "per_size": int(self.per_size),
            "edge_prob": float(self.edge_prob),
            "weight_dist": canonical_weight_dist(self.weight_dist),
            "bit_generator": BIT_GENERATOR,
        }

    @property
    def hash(self) -> str:
        return config_hash(self.payload())


@dataclass
class Library:
    """A generated (or loaded) set of instances plus its identity."""

    config: LibraryConfig
    graphs: dict[tuple[int, int], WeightedGraph]
    resamples: dict[tuple[int, int], int] = field(default_factory=dict)

    @property
    def hash(self) -> str:
        return self.config.hash

    def at_size(self, n: int) -> list[tuple[int, WeightedGraph]]:
        """(index, graph) pairs for one size, in index order."""
        return [
            (idx, self.graphs[(size, idx)])
            for (size, idx) in sorted(self.graphs)
            if size == n
        ]

    def items(self) -> list[tuple[int, int, WeightedGraph]]:
        return [(n, idx, self.graphs[(n, idx)]) for (n, idx) in sorted(self.graphs)]


def generate_library(cfg: LibraryConfig) -> Library:
    graphs: dict[tuple[int, int], WeightedGraph] = {}
    resamples: dict[tuple[int, int], int] = {}
    for n in cfg.sizes:
        for idx in range(cfg.per_size):
            rng = instance_rng(cfg.seed, n, idx)
            g, rej = _sample_instance(n, cfg.edge_prob, cfg.weight_dist, rng)
            graphs[(n, idx)] = g
            resamples[(n, idx)] = rej
    return Library(cfg, graphs, resamples)


def instance_lines(g: WeightedGraph) -> list[str]:
    """Canonical text lines for an instance, without the checksum trailer."""
    lines = [f"{SCHEMA_TAG} n={g.n} m={g.m}"]
    for i, j, w in g.edges:
        lines.append(f"{i} {j} {float(w)!r}")
    return lines


def _checksum(lines: list[str]) -> str:
    canonical = ("\n".join(lines) + "\n").encode("utf-8")
    return hashlib.sha256(canonical).hexdigest()


def save_instance(g: WeightedGraph, path: Path | str) -> None:
    lines = instance_lines(g)
    body = "\n".join(lines) + "\n" + f"checksum={_checksum(lines)}\n"
    Path(path).write_text(body, encoding="utf-8")


def load_instance(path: Path | str) -> WeightedGraph:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if len(lines) < 2 or not lines[-1].startswith("checksum="):
        raise SchemaError(f"{path}: missing checksum trailer (truncated file?)")
    body, trailer = lines[:-1], lines[-1]
    expected = trailer.split("=", 1)[1].strip()
    if _checksum(body) != expected:
        raise SchemaError(f"{path}: checksum mismatch")
    header = body[0].split()
    if len(header) != 4 or " ".join(header[:2]) != SCHEMA_TAG:
        raise SchemaError(f"{path}: bad header {body[0]!r} (expected '{SCHEMA_TAG} n=.. m=..')")
    try:
        n = int(header[2].removeprefix("n="))
        m = int(header[3].removeprefix("m="))
    except ValueError as exc:
        raise SchemaError(f"{path}: unparseable header {body[0]!r}") from exc
    if len(body) - 1 != m:
        raise SchemaError(f"{path}: header claims m={m} but found {len(body) - 1} edge lines")
    edges = []
    for line in body[1:]:
        parts = line.split()
        if len(parts) != 3:
            raise SchemaError(f"{path}: bad edge line {line!r}")
        edges.append((int(parts[0]), int(parts[1]), float(parts[2])))
    try:
        return WeightedGraph(n, tuple(edges))
    except ValueError as exc:
        raise SchemaError(f"{path}: invalid graph: {exc}") from exc


def _instance_relpath(n: int, idx: int) -> str:
    return f"instances/n{n:02d}_i{idx:04d}.txt"


def save_library(lib: Library, out_dir: Path | str) -> Path:
    """Write manifest.json plus one text file per instance; returns manifest path."""
    out = Path(out_dir)
    (out / "instances").mkdir(parents=True, exist_ok=True)
    entries = []
    for n, idx, g in lib.items():
        rel = _instance_relpath(n, idx)
        save_instance(g, out / rel)
        entries.append(
            {
                "n": int(n),
                "index": int(idx),
                "path": rel,
                "resamples": int(lib.resamples.get((n, idx), 0)),
            }
        )
    manifest = dict(lib.config.payload())
    manifest["schema"] = MANIFEST_SCHEMA
    manifest["config_hash"] = lib.hash
    manifest["instances"] = entries
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest_path


def load_library(path: Path | str) -> Library:
    """Load a library directory (or its manifest.json) written by save_library."""
    p = Path(path)
    manifest_path = p / "manifest.json" if p.is_dir() else p
    root = manifest_path.parent
    # missing or unreadable files propagate as OSError; only content is ours
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{manifest_path}: unreadable manifest: {exc}") from exc
    if manifest.get("schema") != MANIFEST_SCHEMA:
        raise SchemaError(f"{manifest_path}: schema mismatch (got {manifest.get('schema')!r})")
    cfg = LibraryConfig(
        seed=int(manifest["seed"]),
        sizes=tuple(int(n) for n in manifest["sizes"]),
        per_size=int(manifest["per_size"]),
        edge_prob=float(manifest["edge_prob"]),
        weight_dist=str(manifest["weight_dist"]),
    )
    if manifest.get("config_hash") != cfg.hash:
        raise SchemaError(f"{manifest_path}: config_hash does not match manifest contents")
    graphs: dict[tuple[int, int], WeightedGraph] = {}
    resamples: dict[tuple[int, int], int] = {}
    for entry in manifest["instances"]:
        n, idx = int(entry["n"]), int(entry["index"])
        g = load_instance(root / entry["path"])
        if g.n != n:
            raise SchemaError(f"{entry['path']}: vertex count {g.n} disagrees with manifest n={n}")
        graphs[(n, idx)] = g
        resamples[(n, idx)] = int(entry.get("resamples", 0))
    return Library(cfg, graphs, resamples)
