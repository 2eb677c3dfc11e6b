"""Iterative precoder design: the one-layer SCA loop and the two-layer Dinkelbach baseline."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .channel import InvalidConfigError, Scenario
from .conic import DEFAULT_TOL, solve
from .model import LN2, rate_report, scalarized_objective, stream_rates, total_power
from .subproblems import (SubproblemError, SubproblemSpec, build, build_parametric, extract, initial_precoder,
                          initialize, precoder_from_solution)

log = logging.getLogger(__name__)

CONVERGED = "converged"
MAX_ITERS = "max_iters"
SOLVER_FAILURE = "solver_failure"


@dataclass(frozen=True)
class RunOptions:
    tol: float = 1e-6
    max_iters: int = 200
    record_trace: bool = True
    timer: bool = False
    solver_tol: float = DEFAULT_TOL
    inner_tol: float = 1e-5
    inner_max_iters: int = 100

    def __post_init__(self):
        if not self.tol > 0:
            raise InvalidConfigError("tol must be positive")
        if self.max_iters < 1 or self.inner_max_iters < 1:
            raise InvalidConfigError("iteration limits must be >= 1")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    surrogate_objective: float
    objective: float
    se: float
    ee: float
    transmit_power: float
    wall_time: float


@dataclass
class RunTrace:
    method: str
    F: np.ndarray
    status: str
    iterations: int
    records: list[IterationRecord] = field(default_factory=list)
    inner_iterations: int = 0
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    @property
    def objective(self) -> float:
        return self.records[-1].objective

    @property
    def surrogate_objectives(self) -> np.ndarray:
        return np.array([r.surrogate_objective for r in self.records])

    @property
    def wall_time(self) -> float:
        return self.records[-1].wall_time if self.records else 0.0


def method_name(strategy: str, bound: str | None = None, dinkelbach: bool = False) -> str:
    if dinkelbach:
        return f"{strategy}-D-MMSE"
    return f"{strategy}-{'SOCP' if bound == 'LB1' else 'GCP'}"


def _converged(new: float, old: float, tol: float) -> bool:
    return abs(new - old) < tol * max(1.0, abs(new))


class _Recorder:
    def __init__(self, opts: RunOptions, s: Scenario):
        self.opts = opts
        self.s = s
        self.records: list[IterationRecord] = []
        self.t0 = time.perf_counter()

    def add(self, n: int, surrogate: float, objective: float, F: np.ndarray):
        if not self.opts.record_trace and self.records:
            self.records.pop()
        rep = rate_report(F, self.s)
        elapsed = time.perf_counter() - self.t0 if self.opts.timer else 0.0
        self.records.append(IterationRecord(n, surrogate, objective, rep.sum_se_bits, rep.ee,
                                            rep.transmit_power_w, elapsed))


def sca_solve(spec: SubproblemSpec, s: Scenario, opts: RunOptions = RunOptions()) -> RunTrace:
    """Successive convex approximation for one scalarized SE-EE problem.

    Each iteration solves the convex subproblem built at the current point and
    moves to its optimum. Stops when the subproblem objective changes by less
    than ``opts.tol`` (relative to ``max(1, |objective|)``).
    """
    rec = _Recorder(opts, s)
    state = initialize(spec, s)
    rec.add(0, state.objective, state.objective, state.F)
    prev = state.objective
    status, message, n = MAX_ITERS, "", 0
    for n in range(1, opts.max_iters + 1):
        try:
            sol = solve(build(spec, state, s), opts.solver_tol)
            nxt = extract(sol, spec, s)
        except SubproblemError as exc:
            status, message, n = SOLVER_FAILURE, str(exc), n - 1
            log.warning("SCA stopped at iteration %d: %s", n + 1, exc)
            break
        surrogate = sol.objective / LN2
        state = nxt
        rec.add(n, surrogate, state.objective, state.F)
        if _converged(surrogate, prev, opts.tol):
            status = CONVERGED
            break
        prev = surrogate
    return RunTrace(method=method_name(spec.strategy, spec.bound), F=state.F, status=status, iterations=n,
                    records=rec.records, message=message)


def maximize_se(s: Scenario, bound: str = "LB2", strategy: str = "RS", opts: RunOptions = RunOptions()) -> RunTrace:
    """Sum-SE maximization under the power budget only."""
    return sca_solve(SubproblemSpec("se", bound, strategy, 0.0), s, opts)


def maximize_ee(s: Scenario, bound: str = "LB2", strategy: str = "RS", opts: RunOptions = RunOptions()) -> RunTrace:
    """EE maximization with the rate-dependent power model."""
    return sca_solve(SubproblemSpec("ee", bound, strategy, 1.0), s, opts)


def _parametric_value(F, s, w, lam, g_ref, norm):
    f = float(stream_rates(F, s).sum())
    g = total_power(F, s, f / LN2)
    return (w / g_ref) * (f - lam * g) + (1.0 - w) * f / norm, f, g


def dinkelbach_wmmse(strategy: str, w: float, s: Scenario, opts: RunOptions = RunOptions(),
                     normalizer: float | None = None) -> RunTrace:
    """Dinkelbach outer loop over the EE ratio with weighted-MMSE inner ascent.

    The outer loop fixes ``lam`` (nats/W) and approximately solves
    ``max (w / g_t) (f - lam g) + (1 - w) f / normalizer`` by repeated
    weighted-MMSE surrogate steps, each a conic program. ``g_t`` is the
    consumed power at the start of the outer iteration, which keeps the
    fixed point stationary for the weighted-sum objective when ``w < 1``.
    """
    if strategy not in ("RS", "NoRS"):
        raise InvalidConfigError(f"unknown strategy {strategy!r}")
    if not 0.0 <= w <= 1.0:
        raise InvalidConfigError(f"weight must lie in [0, 1], got {w}")
    rs = strategy == "RS"
    norm = s.p_circuit if normalizer is None else normalizer
    rec = _Recorder(opts, s)
    F = initial_precoder(s, rs)
    obj0 = scalarized_objective("weighted_sum", w, F, s, normalizer)
    rec.add(0, obj0, obj0, F)
    lam = 0.0
    status, message, n, inner_total = MAX_ITERS, "", 0, 0
    for n in range(1, opts.max_iters + 1):
        _, f, g_ref = _parametric_value(F, s, w, lam, 1.0, norm)
        prev = last = None
        failed = False
        for _ in range(opts.inner_max_iters):
            sol = solve(build_parametric(strategy, w, lam, g_ref, F, s, normalizer), opts.solver_tol)
            if not sol.ok:
                failed = True
                message = f"inner subproblem not solved: {sol.status}"
                break
            inner_total += 1
            F = precoder_from_solution(sol, s, rs)
            last = sol.objective
            if prev is not None and _converged(sol.objective, prev, opts.inner_tol):
                break
            prev = sol.objective
        if failed:
            status, n = SOLVER_FAILURE, n - 1
            log.warning("Dinkelbach stopped: %s", message)
            break
        _, f, g = _parametric_value(F, s, w, lam, g_ref, norm)
        objective = scalarized_objective("weighted_sum", w, F, s, normalizer)
        rec.add(n, last, objective, F)
        lam_next = f / g
        if f - lam * g < opts.tol * g:
            status = CONVERGED
            break
        lam = lam_next
    return RunTrace(method=method_name(strategy, dinkelbach=True), F=F, status=status, iterations=n,
                    records=rec.records, inner_iterations=inner_total, message=message)

