"""Self-checks behind ``mprk verify``.

Each check returns ``(passed, detail)``.  The registry order is the print
order.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from .linalg import Precision, StencilKind
from .operators import KronSumOperator, dense_kron_sum
from .precond import apply_tensor, build_for_operator
from .stability import corrected_midpoint_reference, stability_function
from .tableaux import ButcherTableau, Method, builtin, midpoint_corrected, validate

__all__ = ["CHECKS", "run_checks", "corrupted_builtins"]

ORACLE_TOL = 1e-12


def _random_left_half_plane(rng, count, radius=10.0):
    r = radius * np.sqrt(rng.uniform(0.0, 1.0, count))
    theta = rng.uniform(np.pi / 2, 3 * np.pi / 2, count)
    return r * np.exp(1j * theta)


def check_midpoint_closed_form(**_):
    rng = np.random.default_rng(2024)
    zs = _random_left_half_plane(rng, 200)
    worst = 0.0
    for p in range(9):
        t = midpoint_corrected(p)
        for z in zs:
            worst = max(worst, abs(stability_function(t, z) - corrected_midpoint_reference(z)))
    return worst <= ORACLE_TOL, f"max deviation {worst:.3e} over p=0..8, 200 z"


def check_tableaux(tableaux: list[ButcherTableau] | None = None, **_):
    tableaux = tableaux if tableaux is not None else [builtin(m) for m in Method]
    problems = {t.name: validate(t) for t in tableaux}
    bad = {k: v for k, v in problems.items() if v}
    if bad:
        return False, "; ".join(f"{k}: {', '.join(v)}" for k, v in bad.items())
    return True, f"{len(tableaux)} tableaux valid"


def check_tensor_kernels(n: int = 3, **_):
    rng = np.random.default_rng(7)
    Q = rng.standard_normal((n, n))
    x = rng.standard_normal(n ** 3)
    eye = np.eye(n)
    dense = {
        "R": np.kron(np.kron(eye, eye), Q),
        "M": np.kron(np.kron(eye, Q), eye),
        "L": np.kron(np.kron(Q, eye), eye),
    }
    worst = max(float(np.max(np.abs(apply_tensor(s, Q, x) - dense[s] @ x))) for s in dense)
    return worst <= ORACLE_TOL, f"max deviation {worst:.3e} (n={n})"


def check_preconditioner(n: int = 3, **_):
    rng = np.random.default_rng(11)
    worst = 0.0
    for kind, gamma in ((StencilKind.DirichletLaplace1D, 0.7), (StencilKind.PeriodicCentralDiff1D, 0.3)):
        if kind is StencilKind.PeriodicCentralDiff1D and n < 3:
            continue  # no Fourier factor below n=3
        op = KronSumOperator(n, kind, 1.0, gamma)
        P = build_for_operator(op, Precision.F64)
        x = rng.standard_normal(n ** 3)
        ref = np.linalg.solve(op.dense(), x)
        worst = max(worst, float(np.max(np.abs(P(x) - ref))))
    return worst <= ORACLE_TOL, f"max deviation {worst:.3e} (n={n})"


def check_stencils(n: int = 3, **_):
    rng = np.random.default_rng(13)
    worst = 0.0
    for kind in StencilKind:
        op = KronSumOperator(n, kind, 0.25, -1.5)
        x = rng.standard_normal(n ** 3)
        ref = dense_kron_sum(kind, n, 0.25, -1.5) @ x
        worst = max(worst, float(np.max(np.abs(op.matvec(x) - ref))))
    return worst <= ORACLE_TOL, f"max deviation {worst:.3e} (n={n})"


CHECKS: dict[str, Callable] = {
    "midpoint-closed-form": check_midpoint_closed_form,
    "tableau-validation": check_tableaux,
    "kron-tensor-kernels": check_tensor_kernels,
    "kron-preconditioner": check_preconditioner,
    "kron-stencils": check_stencils,
}


def corrupted_builtins() -> list[ButcherTableau]:
    """Built-ins with one weight nudged; used to exercise the failure path."""
    out = [builtin(m) for m in Method]
    t = out[1]
    b = t.b.copy()
    b[0] += 1e-6
    out[1] = ButcherTableau(t.name, t.A_high, t.A_eps, b)
    return out


def run_checks(tableaux: list[ButcherTableau] | None = None) -> list[tuple[str, bool, str]]:
    results = []
    for name, fn in CHECKS.items():
        try:
            ok, detail = fn(tableaux=tableaux)
        except Exception as exc:  # a crashing check is a failing check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append((name, bool(ok), detail))
    return results
