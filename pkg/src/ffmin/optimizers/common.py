"""Shared optimizer plumbing: stop criteria, traces, line-search adapters.

Every driver in this package follows the same bookkeeping contract:

  * one trace record per iteration (plus record 0 at the start point),
  * the record's cumulative oracle-call counts are snapshots of the
    oracle's own counters at the moment the record is appended,
  * best-so-far f is non-increasing along the records,
  * identical inputs give identical traces except for wall-clock columns.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..linesearch import (
    FOUND,
    NO_RELAXATION,
    LineSearchResult,
    LsHConfig,
    LsParConfig,
    ls_h,
    ls_par,
)

CONVERGED = "converged"
ITERATION_BUDGET = "iteration_budget"
LINESEARCH_FAILURE = "linesearch_failure"
TIME_BUDGET = "time_budget"
ORACLE_BUDGET = "oracle_budget"
HORIZON_COMPLETE = "horizon_complete"

# statuses that mean "the run ended the way the method intended"
SUCCESS_STATUSES = (CONVERGED, HORIZON_COMPLETE)


class DivergenceError(RuntimeError):
    """Objective blew up or became non-finite during a fixed-step run."""


@dataclass(frozen=True)
class StopCriteria:
    """Termination bounds. At least one budget must be finite.

    The gradient test is ||g|| <= max(gradient_norm_tol,
    gradient_norm_rtol * max(1, ||g(x0)||)); pass gradient_norm_rtol=0 to
    disable the relative part (useful when running to a fixed horizon).
    """

    max_iterations: int | None = 10_000
    max_oracle_calls: int | None = None
    gradient_norm_tol: float = 0.0
    gradient_norm_rtol: float = 1e-6
    max_wall_time: float | None = None
    stop_on_linesearch_failure: bool = True

    def __post_init__(self):
        if (
            self.max_iterations is None
            and self.max_oracle_calls is None
            and self.max_wall_time is None
        ):
            raise ValueError("at least one of the iteration/oracle/time budgets must be set")
        if self.gradient_norm_tol < 0 or self.gradient_norm_rtol < 0:
            raise ValueError("gradient tolerances must be >= 0")

    def threshold(self, g0_norm: float) -> float:
        return max(self.gradient_norm_tol, self.gradient_norm_rtol * max(1.0, g0_norm))


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    f: float
    grad_norm: float
    step: float
    value_calls: int
    grad_calls: int
    wall_seconds: float
    best_f: float


@dataclass
class OptimizerTrace:
    meta: dict = field(default_factory=dict)
    records: list = field(default_factory=list)
    status: str | None = None

    def append(self, rec: TraceRecord):
        self.records.append(rec)

    @property
    def iterations(self):
        return self.records[-1].iteration if self.records else 0


@dataclass
class OptimizeResult:
    x: np.ndarray
    f: float
    grad_norm: float
    status: str
    trace: OptimizerTrace

    @property
    def iterations(self):
        return self.trace.iterations


class Run:
    """Per-run bookkeeping shared by all drivers."""

    def __init__(self, oracle, stop: StopCriteria, meta: dict):
        self.oracle = oracle
        self.stop = stop
        self.trace = OptimizerTrace(meta=dict(meta))
        self.t0 = time.perf_counter()
        self.best_f = math.inf
        self.best_x = None
        self.threshold = 0.0

    def elapsed(self):
        return time.perf_counter() - self.t0

    def init_threshold(self, g0_norm):
        self.threshold = self.stop.threshold(g0_norm)

    def update_best(self, x, f):
        if f < self.best_f:
            self.best_f = f
            self.best_x = np.array(x, dtype=np.float64, copy=True)

    def record(self, iteration, f, grad_norm, step):
        self.trace.append(
            TraceRecord(
                iteration=int(iteration),
                f=float(f),
                grad_norm=float(grad_norm),
                step=float(step),
                value_calls=self.oracle.value_calls,
                grad_calls=self.oracle.grad_calls,
                wall_seconds=self.elapsed(),
                best_f=self.best_f,
            )
        )

    def budget_status(self, iterations_done):
        """Status if some budget is already exhausted, else None."""
        s = self.stop
        if s.max_iterations is not None and iterations_done >= s.max_iterations:
            return ITERATION_BUDGET
        if s.max_wall_time is not None and self.elapsed() >= s.max_wall_time:
            return TIME_BUDGET
        if (
            s.max_oracle_calls is not None
            and self.oracle.value_calls + self.oracle.grad_calls >= s.max_oracle_calls
        ):
            return ORACLE_BUDGET
        return None

    def finish(self, status, x, f, grad_norm) -> OptimizeResult:
        self.trace.status = status
        return OptimizeResult(
            x=np.array(x, dtype=np.float64, copy=True),
            f=float(f),
            grad_norm=float(grad_norm),
            status=status,
            trace=self.trace,
        )

    def finish_best(self, status, fallback_x, fallback_f, grad_norm) -> OptimizeResult:
        """Like finish, but report the best-so-far point.

        A converged run returns the final iterate: that is the point whose
        gradient satisfied the stop test, and near machine precision the
        lowest recorded f can belong to an earlier, less stationary point.
        """
        if status != CONVERGED and self.best_x is not None and self.best_f <= fallback_f:
            return self.finish(status, self.best_x, self.best_f, grad_norm)
        return self.finish(status, fallback_x, fallback_f, grad_norm)


def check_finite(f, g, where):
    if not math.isfinite(f) or not np.all(np.isfinite(g)):
        raise DivergenceError(f"non-finite objective or gradient at {where}")


class LineSearcher:
    """Warm-started wrapper around ls_h / ls_par.

    Keeps the accepted step of the previous iteration as the next h0. On
    no_relaxation it retries once from the configured initial h0 before
    reporting failure, and resets its warm start either way.
    """

    def __init__(self, kind: str, config=None):
        if kind not in ("h", "par"):
            raise ValueError(f"line search kind must be 'h' or 'par', got {kind!r}")
        self.kind = kind
        if config is None:
            config = LsHConfig() if kind == "h" else LsParConfig()
        self.config = config
        self.h = config.h0

    @property
    def needs_gradient(self):
        return self.kind == "par" and self.config.use_gradient_start

    def reset(self):
        self.h = self.config.h0

    def describe(self):
        return {"kind": self.kind, **vars(self.config)}

    def _invoke(self, oracle, x, r, f0, g0, h0):
        if self.kind == "h":
            cfg = LsHConfig(h0=h0, eps_h=self.config.eps_h,
                            k_plus=self.config.k_plus, k_minus=self.config.k_minus)
            return ls_h(oracle, x, r, cfg, f0)
        cfg = LsParConfig(h0=h0, K=self.config.K,
                          use_gradient_start=self.config.use_gradient_start,
                          trust=self.config.trust)
        return ls_par(oracle, x, r, cfg, f0, g0)

    def search(self, oracle, x, r, f0, g0=None) -> LineSearchResult:
        res = self._invoke(oracle, x, r, f0, g0, self.h)
        if res.status == NO_RELAXATION and self.h != self.config.h0:
            retry = self._invoke(oracle, x, r, f0, g0, self.config.h0)
            res = LineSearchResult(
                retry.h, retry.f_at_step, res.oracle_calls + retry.oracle_calls,
                retry.status,
            )
        if res.status == FOUND:
            self.h = abs(res.h)
        else:
            self.reset()
        return res


def make_linesearch(kind: str, **overrides) -> LineSearcher:
    """Build a LineSearcher from a kind string and config field overrides."""
    if kind == "h":
        return LineSearcher("h", LsHConfig(**overrides))
    if kind == "par":
        return LineSearcher("par", LsParConfig(**overrides))
    raise ValueError(f"unknown line search kind {kind!r}")
