"""Mixed-precision Runge--Kutta time stepping for the linear model problems.

State vectors and stage vectors are always binary64.  The precision policy
selects the arithmetic of the low-precision pieces: every implicit stage
solve (operator, preconditioner, Krylov basis) and every ``f^eps`` term.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import krylov
from .exceptions import NonFiniteState
from .krylov import SolveReport, StoppingCriterion
from .linalg import Precision, as_precision, convert
from .operators import Equation, ProblemSpec, heat_exact, stage_operator
from .precond import FastDiagPreconditioner, build_for_operator
from .tableaux import ButcherTableau, parse_method
from .timing import Timer

__all__ = [
    "PrecisionPolicy",
    "IntegrationConfig",
    "StepTrace",
    "IntegrationResult",
    "Stepper",
    "step",
    "integrate",
    "temporal_errors",
    "temporal_order",
    "fit_slope",
]


@dataclass(frozen=True)
class PrecisionPolicy:
    implicit: Precision = Precision.F64

    def __post_init__(self):
        object.__setattr__(self, "implicit", as_precision(self.implicit))


@dataclass(frozen=True, eq=False)
class IntegrationConfig:
    method: ButcherTableau
    tau: float
    problem: ProblemSpec
    tol: float = 1e-6
    t_end: float = 0.1
    policy: PrecisionPolicy = PrecisionPolicy()
    max_iter: int = krylov.MAX_ITER

    def __post_init__(self):
        if isinstance(self.method, str):
            object.__setattr__(self, "method", parse_method(self.method))
        if not isinstance(self.policy, PrecisionPolicy):
            object.__setattr__(self, "policy", PrecisionPolicy(self.policy))
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        steps = self.t_end / self.tau
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps) or round(steps) < 1:
            raise ValueError(f"tau={self.tau} does not divide t_end={self.t_end}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.tau))

    def with_(self, **kw) -> "IntegrationConfig":
        fields = dict(method=self.method, tau=self.tau, problem=self.problem, tol=self.tol,
                      t_end=self.t_end, policy=self.policy, max_iter=self.max_iter)
        fields.update(kw)
        return IntegrationConfig(**fields)


@dataclass
class StepTrace:
    reports: list[SolveReport] = field(default_factory=list)
    timer: Timer = field(default_factory=Timer)
    wall: list[float] = field(default_factory=list)
    stencil_f32_calls: int = 0

    def extend(self, other: "StepTrace"):
        self.reports.extend(other.reports)
        self.timer.merge(other.timer)
        self.wall.extend(other.wall)
        self.stencil_f32_calls += other.stencil_f32_calls

    @property
    def iterations(self) -> list[int]:
        return [r.iterations for r in self.reports]

    @property
    def mean_iterations(self) -> float:
        its = self.iterations
        return float(np.mean(its)) if its else 0.0

    @property
    def failed(self) -> bool:
        return any(not r.converged for r in self.reports)


@dataclass
class IntegrationResult:
    u: np.ndarray
    t: float
    trace: StepTrace
    error_max: float | None = None
    error_l2: float | None = None
    wall_seconds: float = 0.0

    @property
    def mean_iterations(self) -> float:
        return self.trace.mean_iterations

    @property
    def failed(self) -> bool:
        return self.trace.failed


class Stepper:
    """Caches one preconditioner per distinct implicit diagonal coefficient."""

    def __init__(self, cfg: IntegrationConfig):
        self.cfg = cfg
        self._stage = {}

    def _stage_system(self, a: float):
        if a not in self._stage:
            cfg = self.cfg
            prec = cfg.policy.implicit
            op = stage_operator(cfg.problem, cfg.tau, a)
            P = build_for_operator(op, prec)
            self._stage[a] = (op, P)
        return self._stage[a]

    def _solve(self, a: float, rhs: np.ndarray, trace: StepTrace) -> np.ndarray:
        cfg = self.cfg
        op, P = self._stage_system(a)
        prec = cfg.policy.implicit
        b = convert(rhs, prec)
        if cfg.problem.complex_solves:
            b = b.astype(prec.dtype(complex_=True))
        if prec is Precision.F32:
            trace.stencil_f32_calls += 1
        crit = StoppingCriterion(cfg.tol, cfg.max_iter)
        solver = krylov.gmres if cfg.problem.complex_solves else krylov.cg
        # initial guess: the right-hand side itself
        y, report = solver(op.matvec, P, b, b.copy(), crit, timer=trace.timer)
        trace.reports.append(report)
        if np.iscomplexobj(y):
            y = y.real
        return convert(np.ascontiguousarray(y), Precision.F64)

    def _f(self, y, low: bool, trace: StepTrace) -> np.ndarray:
        prec = self.cfg.policy.implicit if low else Precision.F64
        if prec is Precision.F32:
            trace.stencil_f32_calls += 1
        return self.cfg.problem.rhs(y, prec, trace.timer)

    def step(self, u: np.ndarray, t: float = 0.0):
        cfg = self.cfg
        tab = cfg.method
        tau = cfg.tau
        q = tab.q
        trace = StepTrace()
        t0 = time.perf_counter()
        # which evaluations are needed later on
        need_hi = [bool(np.any(tab.A_high[i + 1:, i] != 0) or tab.b[i] != 0) for i in range(q)]
        need_lo = [bool(np.any(tab.A_eps[i + 1:, i] != 0)) for i in range(q)]
        f_hi = [None] * q
        f_lo = [None] * q
        for i in range(q):
            with trace.timer.section("axpy"):
                rhs = u.copy()
                for j in range(i):
                    if tab.A_high[i, j] != 0:
                        rhs += (tau * tab.A_high[i, j]) * f_hi[j]
                    if tab.A_eps[i, j] != 0:
                        rhs += (tau * tab.A_eps[i, j]) * f_lo[j]
            if not np.all(np.isfinite(rhs)):
                raise NonFiniteState(f"non-finite right-hand side for stage {i + 1}")
            a = tab.A_eps[i, i] + tab.A_high[i, i]
            if a != 0:
                if cfg.problem.forcing is not None:
                    rhs += (tau * a) * cfg.problem.forcing
                y = self._solve(a, rhs, trace)
            else:
                y = rhs
            if not np.all(np.isfinite(y)):
                raise NonFiniteState(f"non-finite values in stage {i + 1}")
            if need_hi[i]:
                f_hi[i] = self._f(y, False, trace)
            if need_lo[i]:
                f_lo[i] = self._f(y, True, trace)
        with trace.timer.section("axpy"):
            u_next = u.copy()
            for i in range(q):
                if tab.b[i] != 0:
                    u_next += (tau * tab.b[i]) * f_hi[i]
        if not np.all(np.isfinite(u_next)):
            raise NonFiniteState("non-finite state after update")
        trace.wall.append(time.perf_counter() - t0)
        return u_next, trace


def step(cfg: IntegrationConfig, u: np.ndarray, t: float = 0.0):
    """Advance one step; returns ``(u_next, StepTrace)``."""
    return Stepper(cfg).step(u, t)


def integrate(cfg: IntegrationConfig, reference: np.ndarray | None = None,
              analytic: bool = True) -> IntegrationResult:
    """Run ``t_end / tau`` steps from the problem's initial state.

    Heat errors are measured against the analytic solution (unless
    ``analytic`` is false); advection errors only when a ``reference`` final
    state is supplied.
    """
    stepper = Stepper(cfg)
    u = cfg.problem.initial_state.astype(np.float64).copy()
    trace = StepTrace()
    t = 0.0
    t0 = time.perf_counter()
    for k in range(cfg.n_steps):
        u, tr = stepper.step(u, t)
        trace.extend(tr)
        t = (k + 1) * cfg.tau
    wall = time.perf_counter() - t0
    result = IntegrationResult(u, t, trace, wall_seconds=wall)
    if reference is None and analytic and cfg.problem.equation is Equation.Heat:
        reference = heat_exact(cfg.problem, t)
    if reference is not None:
        result.error_max, result.error_l2 = error_norms(u - reference, cfg.problem.h)
    return result


def error_norms(e: np.ndarray, h: float) -> tuple[float, float]:
    """Discrete max norm and ``sqrt(h^3 * sum e^2)``."""
    return float(np.max(np.abs(e))), float(math.sqrt(h ** 3 * float(np.sum(e * e))))


def fit_slope(taus, errors) -> float:
    """Least-squares slope of log(error) against log(tau)."""
    return float(np.polyfit(np.log(np.asarray(taus, float)), np.log(np.asarray(errors, float)), 1)[0])


def temporal_errors(template: IntegrationConfig, taus, ref_factor: int = 16, ref_tol: float = 1e-12):
    """Final-time errors against a same-grid fine-step reference.

    The reference uses the same method with ``min(taus)/ref_factor`` in
    binary64 at ``ref_tol``, which removes the spatial error floor.
    Returns a list of ``(tau, error_max, error_l2)``.
    """
    taus = [float(t) for t in taus]
    if not taus:
        raise ValueError("empty tau list")
    ref_cfg = template.with_(tau=min(taus) / ref_factor, tol=ref_tol, policy=PrecisionPolicy(Precision.F64))
    ref = integrate(ref_cfg, analytic=False).u
    rows = []
    for tau in taus:
        res = integrate(template.with_(tau=tau), reference=ref)
        rows.append((tau, res.error_max, res.error_l2))
    return rows


def temporal_order(template: IntegrationConfig, taus, **kw) -> float:
    """Fitted temporal convergence order over a geometric ``taus`` sequence."""
    if len(taus) < 3:
        raise ValueError("need at least three step sizes")
    rows = temporal_errors(template, taus, **kw)
    return fit_slope([r[0] for r in rows], [r[1] for r in rows])
