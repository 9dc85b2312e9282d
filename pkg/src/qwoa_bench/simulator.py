"""Exact statevector simulation of the non-variational QWOA circuit.

The phase separator is applied as a single diagonal pass exp(-i*gamma*C_b)
(the per-edge two-qubit blocks compose to exactly this diagonal), and the
mixer as n single-qubit passes with the kernel of exp(-i*t*X):

    [[cos t, -i sin t],
     [-i sin t, cos t]]

Sign conventions are fixed here once and cross-checked against the
gate-level reference in `gates`. Double-precision complex throughout.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from qwoa_bench.landscape import DEFAULT_QUBIT_CAP, ObjectiveTable, QubitCapError


@dataclass
class Statevector:
    n: int
    amps: np.ndarray  # complex128, length 2^n

    def norm_sq(self) -> float:
        return float(np.vdot(self.amps, self.amps).real)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amps) ** 2


@dataclass(frozen=True)
class LayerSchedule:
    """Per-layer phase strengths and mixing durations; lengths equal p >= 1."""

    gammas: tuple[float, ...]
    times: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.gammas) != len(self.times) or len(self.gammas) < 1:
            raise ValueError("gammas and times must have equal length p >= 1")
        if not all(math.isfinite(x) for x in self.gammas + self.times):
            raise ValueError("schedule entries must be finite")

    @property
    def p(self) -> int:
        return len(self.gammas)


def equal_superposition(n: int, max_qubits: int = DEFAULT_QUBIT_CAP) -> Statevector:
    """Uniform superposition over all 2^n basis states, amplitude 2^(-n/2)."""
    if not 2 <= n <= max_qubits:
        raise QubitCapError(f"n={n} outside supported range [2, {max_qubits}]")
    amps = np.full(1 << n, 2.0 ** (-n / 2.0), dtype=np.complex128)
    return Statevector(n, amps)


def _check_dims(psi: Statevector, table: ObjectiveTable) -> None:
    if psi.n != table.n or psi.amps.size != table.values.size:
        raise ValueError(f"dimension mismatch: state n={psi.n}, table n={table.n}")


def apply_phase_separator(
    psi: Statevector,
    table: ObjectiveTable,
    gamma_k: float,
    inplace: bool = False,
) -> Statevector:
    """Multiply amplitude b by exp(-i * gamma_k * C_b)."""
    _check_dims(psi, table)
    amps = psi.amps if inplace else psi.amps.copy()
    amps *= np.exp(table.values * (-1j * gamma_k))
    return Statevector(psi.n, amps)


def _mixer_inplace(amps: np.ndarray, n: int, t_k) -> None:
    """Apply exp(-i*t*X) on every qubit; amps may carry leading batch axes.

    t_k is a scalar, or an array broadcastable over the batch axes (one
    angle per batch row). One pass per qubit, paired indices within each
    stride block.
    """
    c = np.cos(t_k)
    s = -1j * np.sin(t_k)
    if np.ndim(t_k) > 0:
        # align with the (blocks, stride) axes that follow the batch axes
        c = c.reshape(c.shape + (1, 1))
        s = s.reshape(s.shape + (1, 1))
    lead = amps.shape[:-1]
    size = amps.shape[-1]
    for q in range(n):
        view = amps.reshape(lead + (size >> (q + 1), 2, 1 << q))
        a0 = view[..., 0, :].copy()
        a1 = view[..., 1, :]
        view[..., 0, :] = c * a0 + s * a1
        view[..., 1, :] = c * a1 + s * a0


def apply_mixer(psi: Statevector, t_k: float, inplace: bool = False) -> Statevector:
    amps = psi.amps if inplace else psi.amps.copy()
    _mixer_inplace(amps, psi.n, float(t_k))
    return Statevector(psi.n, amps)


def evolve(
    table: ObjectiveTable,
    schedule: LayerSchedule,
    max_qubits: int = DEFAULT_QUBIT_CAP,
) -> Statevector:
    """Equal superposition, then p layers of phase separator + mixer."""
    psi = equal_superposition(table.n, max_qubits=max_qubits)
    for gamma_k, t_k in zip(schedule.gammas, schedule.times):
        apply_phase_separator(psi, table, gamma_k, inplace=True)
        _mixer_inplace(psi.amps, psi.n, float(t_k))
    return psi


def evolve_batch(
    table: ObjectiveTable,
    schedules: list[LayerSchedule],
    max_qubits: int = DEFAULT_QUBIT_CAP,
) -> np.ndarray:
    """Evolve several schedules of equal depth at once; returns (k, 2^n) amplitudes.

    Equivalent to stacking evolve() over the schedules; used to batch the
    finite-difference probes of the optimizer into single array passes.
    """
    if not schedules:
        raise ValueError("need at least one schedule")
    p = schedules[0].p
    if any(s.p != p for s in schedules):
        raise ValueError("all schedules in a batch must share the same depth")
    if table.n > max_qubits:
        raise QubitCapError(f"n={table.n} exceeds the qubit cap of {max_qubits}")
    k = len(schedules)
    size = 1 << table.n
    amps = np.full((k, size), 2.0 ** (-table.n / 2.0), dtype=np.complex128)
    gammas = np.array([s.gammas for s in schedules], dtype=np.float64)  # (k, p)
    times = np.array([s.times for s in schedules], dtype=np.float64)
    for layer in range(p):
        amps *= np.exp(table.values[None, :] * (-1j * gammas[:, layer, None]))
        _mixer_inplace(amps, table.n, times[:, layer])
    return amps


def expectation(psi: Statevector, table: ObjectiveTable) -> float:
    """Sum_b |amps_b|^2 * C_b."""
    _check_dims(psi, table)
    probs = psi.amps.real**2 + psi.amps.imag**2
    return float(probs @ table.values)


def optimal_probability(psi: Statevector, table: ObjectiveTable) -> float:
    """Total probability of measuring any globally optimal bitstring."""
    _check_dims(psi, table)
    a = psi.amps[table.optima_set]
    return float(np.sum(a.real**2 + a.imag**2))


def expectation_batch(amps: np.ndarray, table: ObjectiveTable) -> np.ndarray:
    probs = amps.real**2 + amps.imag**2
    return probs @ table.values


# ---------------------------------------------------------------------------
# Grover baseline (analytic; amplitude amplification over an unstructured
# search space with M marked states out of N).
# ---------------------------------------------------------------------------


def grover_success_probability(big_n: int, marked: int, iterations: int) -> float:
    """sin^2((2p+1) * theta) with theta = arcsin(sqrt(M/N))."""
    if not 1 <= marked <= big_n:
        raise ValueError(f"need 1 <= M <= N, got M={marked}, N={big_n}")
    if iterations < 0:
        raise ValueError("iteration count must be >= 0")
    theta = math.asin(math.sqrt(marked / big_n))
    return math.sin((2 * iterations + 1) * theta) ** 2


def grover_required_iterations(
    big_n: int,
    marked: int,
    target: float,
    max_iterations: int = 10_000_000,
) -> int:
    """Smallest p >= 0 with success probability >= target (0 if M/N >= target)."""
    if not 0.0 < target <= 1.0:
        raise ValueError(f"target must be in (0, 1], got {target}")
    if not 1 <= marked <= big_n:
        raise ValueError(f"need 1 <= M <= N, got M={marked}, N={big_n}")
    if marked / big_n >= target:
        return 0
    theta = math.asin(math.sqrt(marked / big_n))
    block = 65536
    for start in range(0, max_iterations, block):
        ps = np.arange(start, min(start + block, max_iterations), dtype=np.float64)
        success = np.sin((2.0 * ps + 1.0) * theta) ** 2
        hits = np.flatnonzero(success >= target)
        if hits.size:
            return int(ps[hits[0]])
    raise ValueError(f"target {target} not reached within {max_iterations} iterations")


# ---------------------------------------------------------------------------
# Debug serialization
# ---------------------------------------------------------------------------

STATEVECTOR_MAGIC = b"QWOAPSI1"


def dump_statevector(psi: Statevector, path: Path | str) -> None:
    """Binary dump: 8-byte magic, n, then 2^n little-endian (re, im) doubles."""
    with open(path, "wb") as f:
        f.write(STATEVECTOR_MAGIC)
        f.write(struct.pack("<Q", psi.n))
        interleaved = np.empty(2 * psi.amps.size, dtype="<f8")
        interleaved[0::2] = psi.amps.real
        interleaved[1::2] = psi.amps.imag
        f.write(interleaved.tobytes())


def load_statevector(path: Path | str) -> Statevector:
    raw = Path(path).read_bytes()
    if raw[:8] != STATEVECTOR_MAGIC:
        raise ValueError(f"{path}: bad magic {raw[:8]!r}")
    (n,) = struct.unpack("<Q", raw[8:16])
    flat = np.frombuffer(raw[16:], dtype="<f8")
    if flat.size != 2 << n:
        raise ValueError(f"{path}: expected 2*2^{n} doubles, found {flat.size}")
    amps = flat[0::2] + 1j * flat[1::2]
    return Statevector(int(n), amps.astype(np.complex128))
