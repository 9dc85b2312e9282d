"""Gate-level reference circuit, kept as a cross-validation oracle.

Builds the same evolution as `simulator.evolve` but gate by gate: Hadamards,
then per edge a CNOT / P(-gamma*w) / CNOT block, then Rx(2t) on every qubit.
Deliberately written with index gathers rather than the fast path's strided
views, so the two implementations share no kernel code.
"""

from __future__ import annotations

import math

import numpy as np

from qwoa_bench.graphs import WeightedGraph
from qwoa_bench.simulator import LayerSchedule, Statevector

_SQRT2 = math.sqrt(2.0)
_HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=np.complex128) / _SQRT2


def apply_single_qubit(amps: np.ndarray, qubit: int, u: np.ndarray) -> np.ndarray:
    """Apply a 2x2 unitary to one qubit of a 2^n amplitude vector."""
    idx = np.arange(amps.size)
    i0 = idx[(idx >> qubit) & 1 == 0]
    i1 = i0 + (1 << qubit)
    out = amps.copy()
    out[i0] = u[0, 0] * amps[i0] + u[0, 1] * amps[i1]
    out[i1] = u[1, 0] * amps[i0] + u[1, 1] * amps[i1]
    return out


def apply_cnot(amps: np.ndarray, control: int, target: int) -> np.ndarray:
    """Swap target-bit pairs wherever the control bit is set."""
    idx = np.arange(amps.size)
    sel = ((idx >> control) & 1 == 1) & ((idx >> target) & 1 == 0)
    i0 = idx[sel]
    i1 = i0 + (1 << target)
    out = amps.copy()
    out[i0], out[i1] = amps[i1], amps[i0]
    return out


def apply_phase_gate(amps: np.ndarray, qubit: int, phi: float) -> np.ndarray:
    """P(phi) = diag(1, e^{i phi}) on one qubit."""
    idx = np.arange(amps.size)
    out = amps.copy()
    hot = (idx >> qubit) & 1 == 1
    out[hot] = amps[hot] * np.exp(1j * phi)
    return out


def rx_matrix(angle: float) -> np.ndarray:
    """Rx(angle) = exp(-i * angle/2 * X)."""
    c = math.cos(angle / 2.0)
    s = math.sin(angle / 2.0)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)


def reference_evolve(g: WeightedGraph, schedule: LayerSchedule) -> Statevector:
    """Full circuit from |0...0>: Hadamards, then per layer the edge blocks
    and the per-qubit Rx(2t) rotations."""
    amps = np.zeros(1 << g.n, dtype=np.complex128)
    amps[0] = 1.0
    for q in range(g.n):
        amps = apply_single_qubit(amps, q, _HADAMARD)
    for gamma_k, t_k in zip(schedule.gammas, schedule.times):
        for i, j, w in g.edges:
            amps = apply_cnot(amps, i, j)
            amps = apply_phase_gate(amps, j, -gamma_k * w)
            amps = apply_cnot(amps, i, j)
        rx = rx_matrix(2.0 * t_k)
        for q in range(g.n):
            amps = apply_single_qubit(amps, q, rx)
    return Statevector(g.n, amps)
