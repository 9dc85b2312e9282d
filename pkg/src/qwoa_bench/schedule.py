"""Three-parameter schedules and their box-constrained optimization.

The heuristic is non-variational: regardless of depth p, the per-layer
phase strengths and mixing durations derive from just (gamma, t, beta).
gamma_k ramps linearly up from (gamma/sigma)*beta to gamma/sigma while t_k
ramps down from t to t*beta; sigma is the objective's standard deviation,
which makes the applied phases invariant under rescaling of the weights.

Optimization maximizes the expectation value (by minimizing its negation)
with L-BFGS-B under box constraints, gradients by central finite
differences. The objective is an exact simulation, hence deterministic and
smooth, so finite differences are accurate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from qwoa_bench.landscape import ObjectiveTable
from qwoa_bench.simulator import (
    LayerSchedule,
    evolve,
    evolve_batch,
    expectation,
    expectation_batch,
)

GAMMA_BOUNDS = (0.0, 5.0)
TIME_BOUNDS = (0.0, 0.7)
RAMP_BOUNDS = (0.0, 0.5)
BOUNDS = (GAMMA_BOUNDS, TIME_BOUNDS, RAMP_BOUNDS)


class NonFiniteObjectiveError(RuntimeError):
    """The simulated objective returned a non-finite value; carries the trace."""

    def __init__(self, message: str, trace: list[dict]):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class ScheduleParams:
    """The three continuous parameters: phase scale, mixing-time scale, ramp."""

    gamma: float
    t: float
    beta: float

    def as_array(self) -> np.ndarray:
        return np.array([self.gamma, self.t, self.beta], dtype=np.float64)

    def in_bounds(self) -> bool:
        return all(
            lo <= x <= hi for x, (lo, hi) in zip((self.gamma, self.t, self.beta), BOUNDS)
        )

    @staticmethod
    def from_array(x: np.ndarray) -> "ScheduleParams":
        return ScheduleParams(float(x[0]), float(x[1]), float(x[2]))


DEFAULT_X0 = ScheduleParams(gamma=0.75, t=0.35, beta=0.25)


def expand_schedule(params: ScheduleParams, p: int, sigma: float) -> LayerSchedule:
    """Expand (gamma, t, beta) into the p-layer schedule.

    gamma_k = (gamma/sigma) * (beta + (k-1)/(p-1) * (1-beta))
    t_k     = t * (1 + (k-1)/(p-1) * (beta-1))

    For p = 1 the ramp fraction is 0/0; the convention here is the upper
    endpoints gamma_1 = gamma/sigma, t_1 = t.
    """
    if p < 1:
        raise ValueError(f"need p >= 1, got {p}")
    if sigma <= 0:
        raise ValueError(f"need sigma > 0, got {sigma}")
    if p == 1:
        return LayerSchedule(gammas=(params.gamma / sigma,), times=(params.t,))
    frac = np.arange(p, dtype=np.float64) / (p - 1)
    gammas = (params.gamma / sigma) * (params.beta + frac * (1.0 - params.beta))
    times = params.t * (1.0 + frac * (params.beta - 1.0))
    return LayerSchedule(gammas=tuple(float(x) for x in gammas), times=tuple(float(x) for x in times))


def objective(params: ScheduleParams, p: int, table: ObjectiveTable) -> float:
    """Negative expectation value of the evolved state (to be minimized)."""
    if not params.in_bounds():
        raise ValueError(f"params {params} outside bounds {BOUNDS}")
    schedule = expand_schedule(params, p, table.sigma)
    return -expectation(evolve(table, schedule), table)


@dataclass
class OptimizerConfig:
    x0: ScheduleParams = DEFAULT_X0
    n_starts: int = 4  # first start is x0; the rest come from a Latin hypercube
    lhs_seed: int = 1952
    maxiter: int = 500
    pgtol: float = 1e-6
    ftol: float = 1e-10
    fd_step: float = 1e-6
    keep_trace: bool = False


@dataclass
class OptimizationResult:
    params: ScheduleParams
    expectation: float
    n_evals: int
    converged: bool
    trace: list[dict] | None = None


class _Evaluator:
    """Counts every simulator evaluation and tracks the best point seen.

    The gradient batches its 2*d probe points into a single multi-schedule
    evolution; each probe still counts as one objective evaluation.
    """

    def __init__(self, table: ObjectiveTable, p: int, keep_trace: bool = False):
        self.table = table
        self.p = p
        self.n_evals = 0
        self.best_x: np.ndarray | None = None
        self.best_f = np.inf
        self.trace: list[dict] | None = [] if keep_trace else None

    def _record(self, x: np.ndarray, f: float) -> None:
        self.n_evals += 1
        if not np.isfinite(f):
            raise NonFiniteObjectiveError(
                f"non-finite objective {f} at x={x.tolist()}", self.trace or []
            )
        if f < self.best_f:
            self.best_f = f
            self.best_x = x.copy()
        if self.trace is not None:
            self.trace.append(
                {
                    "eval": self.n_evals,
                    "gamma": float(x[0]),
                    "t": float(x[1]),
                    "beta": float(x[2]),
                    "value": float(f),
                }
            )

    def value(self, x: np.ndarray) -> float:
        schedule = expand_schedule(ScheduleParams.from_array(x), self.p, self.table.sigma)
        f = -expectation(evolve(self.table, schedule), self.table)
        self._record(np.asarray(x, dtype=np.float64), f)
        return f

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        d = x.size
        step = np.maximum(1e-6, 1e-6 * np.abs(x))
        points = []
        for i in range(d):
            lo, hi = BOUNDS[i]
            xp, xm = x.copy(), x.copy()
            xp[i] = min(x[i] + step[i], hi)  # one-sided at an active bound
            xm[i] = max(x[i] - step[i], lo)
            points.append(xp)
            points.append(xm)
        schedules = [
            expand_schedule(ScheduleParams.from_array(pt), self.p, self.table.sigma)
            for pt in points
        ]
        values = -expectation_batch(evolve_batch(self.table, schedules), self.table)
        for pt, f in zip(points, values):
            self._record(pt, float(f))
        grad = np.empty(d)
        for i in range(d):
            denom = points[2 * i][i] - points[2 * i + 1][i]
            grad[i] = (values[2 * i] - values[2 * i + 1]) / denom
        return grad


def write_trace_jsonl(trace: list[dict], path: Path | str) -> None:
    """Write an evaluation trace as JSON lines, one entry per evaluation."""
    with open(path, "w", encoding="utf-8") as f:
        for entry in trace:
            f.write(json.dumps(entry, sort_keys=True, separators=(",", ":")) + "\n")


def read_trace_jsonl(path: Path | str) -> list[dict]:
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def _latin_hypercube_starts(k: int, seed: int) -> list[ScheduleParams]:
    if k <= 0:
        return []
    sampler = qmc.LatinHypercube(d=3, seed=seed)
    unit = sampler.random(k)
    lows = np.array([b[0] for b in BOUNDS])
    highs = np.array([b[1] for b in BOUNDS])
    scaled = qmc.scale(unit, lows, highs)
    return [ScheduleParams.from_array(row) for row in scaled]


def optimize(
    table: ObjectiveTable,
    p: int,
    x0: ScheduleParams | None = None,
    config: OptimizerConfig | None = None,
) -> OptimizationResult:
    """Maximize the expectation value over the parameter box.

    Multi-start L-BFGS-B: x0 first, then config.n_starts - 1 Latin-hypercube
    points, keeping the best final value. Never returns a point worse than
    x0 (the best evaluation ever seen wins, and x0 is always evaluated).
    """
    cfg = config or OptimizerConfig()
    start = x0 or cfg.x0
    if not start.in_bounds():
        raise ValueError(f"x0 {start} outside bounds {BOUNDS}")
    if p < 1:
        raise ValueError(f"need p >= 1, got {p}")
    ev = _Evaluator(table, p, keep_trace=cfg.keep_trace)
    starts = [start] + _latin_hypercube_starts(cfg.n_starts - 1, cfg.lhs_seed)
    best_result = None
    best_f = np.inf
    for s in starts:
        res = minimize(
            ev.value,
            s.as_array(),
            jac=ev.gradient,
            method="L-BFGS-B",
            bounds=BOUNDS,
            options={"maxiter": cfg.maxiter, "ftol": cfg.ftol, "gtol": cfg.pgtol},
        )
        if res.fun < best_f:
            best_f = res.fun
            best_result = res
    # The tracked best point can beat the final iterate of every start.
    assert ev.best_x is not None
    params = ScheduleParams.from_array(np.clip(ev.best_x, [b[0] for b in BOUNDS], [b[1] for b in BOUNDS]))
    return OptimizationResult(
        params=params,
        expectation=-ev.best_f,
        n_evals=ev.n_evals,
        converged=bool(best_result.success),
        trace=ev.trace,
    )
