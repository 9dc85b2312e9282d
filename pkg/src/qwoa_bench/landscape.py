"""Exhaustive objective landscape: cut values for all 2^n bitstrings.

Bit order convention (used everywhere in this package): bit i of the array
index is vertex i, bit 0 least significant. The cut value of index b is the
total weight of edges whose endpoints fall on opposite sides of the
partition encoded by b.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from qwoa_bench.graphs import Library, WeightedGraph

DEFAULT_QUBIT_CAP = 28
TABLE_MAGIC = b"MAXCUTC1"
_CHUNK = 1 << 22


class QubitCapError(ValueError):
    """Requested table/state size exceeds the configured memory budget."""


@dataclass
class ObjectiveTable:
    """Cut value per bitstring plus the landscape statistics used downstream.

    sigma is the population standard deviation over all 2^n values.
    optima_set holds every index achieving the maximum, sorted ascending;
    it is closed under bitwise complement, so degeneracy is even.
    """

    n: int
    values: np.ndarray
    sigma: float
    optimum: float
    optima_set: np.ndarray
    degeneracy: int


def cut_values(g: WeightedGraph) -> np.ndarray:
    """Dense float64 array of cut values for all 2^n bitstrings."""
    size = 1 << g.n
    out = np.zeros(size, dtype=np.float64)
    for start in range(0, size, _CHUNK):
        stop = min(start + _CHUNK, size)
        idx = np.arange(start, stop, dtype=np.uint64)
        acc = out[start:stop]
        for i, j, w in g.edges:
            acc += w * (((idx >> np.uint64(i)) ^ (idx >> np.uint64(j))) & np.uint64(1))
    return out


def build_objective_table(g: WeightedGraph, max_qubits: int = DEFAULT_QUBIT_CAP) -> ObjectiveTable:
    if g.n > max_qubits:
        raise QubitCapError(
            f"n={g.n} exceeds the qubit cap of {max_qubits} "
            f"(a full table stores 2^{g.n} values); raise max_qubits explicitly if intended"
        )
    values = cut_values(g)
    optimum = float(values.max())
    optima = np.flatnonzero(values == optimum).astype(np.int64)
    return ObjectiveTable(
        n=g.n,
        values=values,
        sigma=float(values.std()),
        optimum=optimum,
        optima_set=optima,
        degeneracy=int(optima.size),
    )


def flipped_bit_view(values: np.ndarray, bit: int) -> np.ndarray:
    """values[b ^ (1 << bit)] for all b, without building an index array."""
    return values.reshape(-1, 2, 1 << bit)[:, ::-1, :].reshape(values.shape)


def count_local_optima(table: ObjectiveTable) -> int:
    """Number of single-flip local maxima (plateau-inclusive).

    b counts as a local maximum iff no single bit flip strictly improves the
    cut, i.e. values[b] >= values[b ^ e_i] for every i. With continuous
    i.i.d. weights exact ties have measure zero, so >= and > coincide
    almost surely.
    """
    v = table.values
    mask = np.ones(v.shape, dtype=bool)
    for bit in range(table.n):
        mask &= v >= flipped_bit_view(v, bit)
    return int(mask.sum())


@dataclass
class LocalOptimaCensus:
    """Per-instance local-optima counts across a library."""

    rows: list[tuple[int, int, int]]  # (n, instance_id, count)

    @property
    def per_size_counts(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for n, _idx, count in self.rows:
            out.setdefault(n, []).append(count)
        return out

    def medians(self) -> dict[int, float]:
        return {n: float(np.median(c)) for n, c in sorted(self.per_size_counts.items())}


def census_library(lib: Library, max_qubits: int = DEFAULT_QUBIT_CAP) -> LocalOptimaCensus:
    rows = []
    for n, idx, g in lib.items():
        table = build_objective_table(g, max_qubits=max_qubits)
        rows.append((n, idx, count_local_optima(table)))
    return LocalOptimaCensus(rows)


def write_census_csv(census: LocalOptimaCensus, path: Path | str, config_hash: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        f.write(f"# config_hash={config_hash}\n")
        w = csv.writer(f)
        w.writerow(["n", "instance_id", "local_optima_count"])
        for n, idx, count in census.rows:
            w.writerow([n, idx, count])


def read_census_csv(path: Path | str) -> tuple[LocalOptimaCensus, str | None]:
    rows = []
    chash = None
    with open(path, newline="", encoding="utf-8") as f:
        data_lines = []
        for line in f:
            if line.startswith("#"):
                if "config_hash=" in line:
                    chash = line.split("config_hash=", 1)[1].strip()
                continue
            data_lines.append(line)
        for rec in csv.DictReader(data_lines):
            rows.append((int(rec["n"]), int(rec["instance_id"]), int(rec["local_optima_count"])))
    return LocalOptimaCensus(rows), chash


def fit_exponential_to_medians(medians: dict[int, float]) -> tuple[float, float, float]:
    """Least-squares fit median(n) ~ a * r**n on log-medians.

    Returns (a, r, residual_norm) where residual_norm is the 2-norm of the
    log-space residuals. Requires at least 3 sizes and positive medians.
    """
    if len(medians) < 3:
        raise ValueError(f"need at least 3 sizes to fit, got {len(medians)}")
    ns = np.array(sorted(medians), dtype=np.float64)
    med = np.array([medians[int(n)] for n in ns], dtype=np.float64)
    if np.any(med <= 0):
        raise ValueError("all medians must be positive for a log-space fit")
    logm = np.log(med)
    design = np.vstack([np.ones_like(ns), ns]).T
    coef, *_ = np.linalg.lstsq(design, logm, rcond=None)
    resid = logm - design @ coef
    return float(np.exp(coef[0])), float(np.exp(coef[1])), float(np.linalg.norm(resid))


def dump_table(table: ObjectiveTable, path: Path | str) -> None:
    """Debug dump: 16-byte header (magic + n) then little-endian float64 values."""
    with open(path, "wb") as f:
        f.write(TABLE_MAGIC)
        f.write(struct.pack("<Q", table.n))
        f.write(table.values.astype("<f8", copy=False).tobytes())


def load_table_values(path: Path | str) -> tuple[int, np.ndarray]:
    raw = Path(path).read_bytes()
    if raw[:8] != TABLE_MAGIC:
        raise ValueError(f"{path}: bad magic {raw[:8]!r}")
    (n,) = struct.unpack("<Q", raw[8:16])
    values = np.frombuffer(raw[16:], dtype="<f8")
    if values.size != 1 << n:
        raise ValueError(f"{path}: expected 2^{n} values, found {values.size}")
    return int(n), values.astype(np.float64)
