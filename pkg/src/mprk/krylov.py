"""Preconditioned CG and left-preconditioned GMRES.

Both solvers run entirely in the dtype of the right-hand side; operator and
preconditioner are callables that map such vectors to vectors of the same
dtype.  Convergence is "abs-or-rel": ``||r|| <= tol`` or
``||r|| / ||r_0|| <= tol``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .exceptions import BreakdownDetected, NonFiniteState
from .timing import Timer

__all__ = ["StoppingCriterion", "SolveReport", "cg", "gmres", "identity"]

MAX_ITER = 40


@dataclass(frozen=True)
class StoppingCriterion:
    tol: float
    max_iter: int = MAX_ITER

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")

    def satisfied(self, rnorm: float, r0norm: float) -> bool:
        if rnorm <= self.tol:
            return True
        return r0norm > 0 and rnorm / r0norm <= self.tol


@dataclass
class SolveReport:
    iterations: int = 0
    residual_history: list[float] = field(default_factory=list)
    converged: bool = False
    status: str = "running"  # converged | max_iter | breakdown
    true_residual: float = float("nan")
    replacements: int = 0  # explicit-residual checks that overruled the recursive one
    timings: dict = field(default_factory=dict)


def identity(x, timer=None):
    return x


def _call_precond(P, v, timer):
    try:
        return P(v, timer=timer)
    except TypeError:
        return P(v)


def _norm(v) -> float:
    return float(np.linalg.norm(v))


def cg(op: Callable, P: Callable, b: np.ndarray, x0: np.ndarray | None, crit: StoppingCriterion,
       timer: Timer | None = None):
    """Preconditioned conjugate gradients.

    The recursively updated residual drives the stopping test.  When it
    claims convergence the explicit residual ``b - A x`` (same precision) is
    checked too; if that check fails the recursion is restarted from the
    explicit residual, so a solve below the attainable accuracy of the
    working precision runs into ``max_iter`` instead of reporting success.

    Returns
    -------
    x : ndarray
        Final iterate (also when the iteration cap is hit).
    report : SolveReport
    """
    own = Timer()
    report = SolveReport()
    dtype = b.dtype
    with own.section("solver"):
        x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=dtype)
        r = b - op(x) if x0 is not None else b.copy()
        rn0 = _norm(r)
        report.residual_history.append(rn0)
        if crit.satisfied(rn0, rn0) or rn0 == 0.0:
            report.converged = True
        else:
            z = _call_precond(P, r, own)
            p = z.copy()
            rz = np.vdot(r, z).real
            for k in range(1, crit.max_iter + 1):
                Ap = op(p)
                pAp = np.vdot(p, Ap).real
                if not np.isfinite(pAp):
                    raise NonFiniteState(f"inner product overflowed at iteration {k}")
                if not pAp > 0:
                    report.status = "breakdown"
                    report.iterations = k - 1
                    raise BreakdownDetected(f"p^T A p = {pAp} at iteration {k}")
                alpha = rz / pAp
                x += alpha * p
                r -= alpha * Ap
                rn = _norm(r)
                report.iterations = k
                if crit.satisfied(rn, rn0) or rn == 0.0:
                    r_true = b - op(x)
                    rn_true = _norm(r_true)
                    if crit.satisfied(rn_true, rn0) or rn_true == 0.0:
                        report.residual_history.append(rn)
                        report.converged = True
                        break
                    # restart from the explicit residual
                    report.replacements += 1
                    r, rn = r_true, rn_true
                    report.residual_history.append(rn)
                    z = _call_precond(P, r, own)
                    p = z.copy()
                    rz = np.vdot(r, z).real
                    continue
                report.residual_history.append(rn)
                z = _call_precond(P, r, own)
                rz_new = np.vdot(r, z).real
                if rz_new < 0:
                    report.status = "breakdown"
                    raise BreakdownDetected(f"r^T P^-1 r = {rz_new} at iteration {k}")
                p = z + (rz_new / rz) * p
                rz = rz_new
    report.true_residual = _norm(b - op(x))
    report.status = "converged" if report.converged else "max_iter"
    _finish(report, own, timer)
    return x, report


def _givens(a, b):
    """Rotation ``(c, s)`` with real ``c`` such that ``[c s; -conj(s) c] [a; b] = [r; 0]``."""
    abs_a = abs(a)
    if abs_a == 0:
        return a.real * 0, (a * 0 + 1)
    r = np.hypot(abs_a, abs(b))
    phase = a / abs_a
    return abs_a / r, phase * np.conj(b) / r


def gmres(op: Callable, P: Callable, b: np.ndarray, x0: np.ndarray | None, crit: StoppingCriterion,
          timer: Timer | None = None):
    """Non-restarted, left-preconditioned GMRES (modified Gram--Schmidt, Givens).

    The stopping test uses the preconditioned residual estimate
    ``|g_{j+1}|``.  A claimed convergence is confirmed against the explicitly
    computed preconditioned residual; if that fails, the explicit value is
    what counts for the iteration and the Arnoldi process continues.
    ``residual_history`` holds the running minimum of these per-iteration
    values, so it is nonincreasing and its last entry passes the stopping
    test exactly when the solve converged.
    """
    own = Timer()
    report = SolveReport()
    dtype = b.dtype
    m = crit.max_iter
    with own.section("solver"):
        x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=dtype)
        r = b - op(x) if x0 is not None else b.copy()
        r = _call_precond(P, r, own).astype(dtype, copy=False)
        beta = _norm(r)
        report.residual_history.append(beta)
        if crit.satisfied(beta, beta) or beta == 0.0:
            report.converged = True
        else:
            V = np.zeros((m + 1, b.size), dtype=dtype)
            H = np.zeros((m + 1, m), dtype=dtype)
            cs = np.zeros(m, dtype=dtype)
            sn = np.zeros(m, dtype=dtype)
            g = np.zeros(m + 1, dtype=dtype)
            g[0] = beta
            V[0] = r / dtype.type(beta)
            best = beta
            k = 0
            for j in range(m):
                w = _call_precond(P, op(V[j]), own).astype(dtype, copy=False)
                for i in range(j + 1):
                    H[i, j] = np.vdot(V[i], w)
                    w = w - H[i, j] * V[i]
                hnext = _norm(w)
                H[j + 1, j] = hnext
                for i in range(j):
                    t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                    H[i + 1, j] = -np.conj(sn[i]) * H[i, j] + cs[i] * H[i + 1, j]
                    H[i, j] = t
                c, s = _givens(H[j, j], H[j + 1, j])
                cs[j], sn[j] = c, s
                H[j, j] = c * H[j, j] + s * H[j + 1, j]
                H[j + 1, j] = 0
                g[j + 1] = -np.conj(s) * g[j]
                g[j] = c * g[j]
                res = float(abs(g[j + 1]))
                k = j + 1
                report.iterations = k
                if crit.satisfied(res, beta) or hnext == 0.0:
                    xk = x + V[:k].T @ _back_substitute(H[:k, :k], g[:k])
                    rk = _norm(_call_precond(P, b - op(xk), own))
                    if crit.satisfied(rk, beta) or rk == 0.0:
                        report.residual_history.append(min(best, rk))
                        report.converged = True
                        break
                    report.replacements += 1
                    res = rk
                best = min(best, res)
                report.residual_history.append(best)
                if hnext == 0.0:
                    break
                V[j + 1] = w / dtype.type(hnext)
            y = _back_substitute(H[:k, :k], g[:k])
            x = x + V[:k].T @ y
    report.true_residual = _norm(b - op(x))
    report.status = "converged" if report.converged else "max_iter"
    _finish(report, own, timer)
    return x, report


def _back_substitute(R, g):
    k = R.shape[0]
    y = np.zeros(k, dtype=R.dtype)
    for i in range(k - 1, -1, -1):
        y[i] = (g[i] - R[i, i + 1:] @ y[i + 1:]) / R[i, i]
    return y


def _finish(report: SolveReport, own: Timer, timer: Timer | None):
    report.timings = own.as_dict()
    if timer is not None:
        timer.merge(own)
