import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mprk.exceptions import BreakdownDetected
from mprk.krylov import MAX_ITER, StoppingCriterion, cg, gmres, identity
from mprk.linalg import Precision
from mprk.operators import advection_problem, heat_problem, stage_operator
from mprk.precond import build
from mprk.timing import Timer


def _check_report(rep, crit):
    assert len(rep.residual_history) == rep.iterations + 1
    assert rep.iterations <= crit.max_iter
    assert rep.converged == crit.satisfied(rep.residual_history[-1], rep.residual_history[0]) or (
        rep.converged and rep.residual_history[-1] == 0)


def test_criterion_abs_or_rel():
    c = StoppingCriterion(1e-3)
    assert c.max_iter == MAX_ITER == 40
    assert c.satisfied(1e-4, 1e6)
    assert c.satisfied(0.5, 1e3)
    assert not c.satisfied(0.5, 10.0)
    with pytest.raises(ValueError):
        StoppingCriterion(0.0)
    with pytest.raises(ValueError):
        StoppingCriterion(1e-3, 0)


def test_cg_identity(rng):
    b = rng.standard_normal(10)
    crit = StoppingCriterion(1e-12)
    x, rep = cg(identity, identity, b, None, crit)
    assert rep.iterations <= 1 and rep.converged
    np.testing.assert_allclose(x, b)
    _check_report(rep, crit)


def test_gmres_identity(rng):
    b = rng.standard_normal(10)
    crit = StoppingCriterion(1e-12)
    x, rep = gmres(identity, identity, b, None, crit)
    assert rep.iterations == 1 and rep.converged
    np.testing.assert_allclose(x, b)
    _check_report(rep, crit)


def test_cg_dense_oracle(rng):
    op = stage_operator(heat_problem(3), 0.05, 0.5)
    D = op.dense()
    b = rng.standard_normal(27)
    crit = StoppingCriterion(1e-14)
    x, rep = cg(op.matvec, identity, b, None, crit)
    assert rep.converged
    ref = np.linalg.solve(D, b)
    assert np.max(np.abs(x - ref)) <= 1e-10 * np.max(np.abs(ref))
    _check_report(rep, crit)


def test_gmres_complex_2x2():
    A = np.array([[1, 1j], [-1j, 2]])
    b = np.array([1 + 2j, -0.5j])
    crit = StoppingCriterion(1e-14)
    x, rep = gmres(lambda v: A @ v, identity, b, None, crit)
    assert np.max(np.abs(x - np.linalg.solve(A, b))) <= 1e-12
    assert rep.converged


def test_gmres_nonsymmetric_dense(rng):
    op = stage_operator(advection_problem(4), 0.05, 0.5)
    b = (rng.standard_normal(64) + 0j)
    crit = StoppingCriterion(1e-13)
    x, rep = gmres(op.matvec, identity, b, None, crit)
    np.testing.assert_allclose(x, np.linalg.solve(op.dense(), b), atol=1e-10)
    _check_report(rep, crit)
    assert all(a >= b for a, b in zip(rep.residual_history, rep.residual_history[1:]))


def _heat_stage(n=32, tau=1 / 40, a=0.5):
    p = heat_problem(n)
    return stage_operator(p, tau, a), p


def test_heat_exact_precond_one_iteration(rng):
    op, p = _heat_stage()
    P = build(p, 1 / 40, 0.5)
    b = p.forcing + rng.standard_normal(p.N) * 0.01
    crit = StoppingCriterion(1e-4)
    x, rep = cg(op.matvec, P, b, b.copy(), crit)
    assert rep.converged and rep.iterations == 1
    _check_report(rep, crit)


@pytest.mark.parametrize("tol", [1e-6])
def test_precision_degradation_weak_inequality(tol):
    op, p = _heat_stage()
    b = heat_problem(32).forcing * 0.3 + 0.01
    its = {}
    for prec in (Precision.F64, Precision.F32):
        P = build(p, 1 / 40, 0.5, prec)
        bb = b.astype(prec.dtype())
        _, rep = cg(op.matvec, P, bb, bb.copy(), StoppingCriterion(tol))
        its[prec] = rep.iterations
    assert its[Precision.F32] >= its[Precision.F64]


def test_f32_stagnation_hits_cap():
    op, p = _heat_stage()
    P = build(p, 1 / 40, 0.5, Precision.F32)
    b = (p.forcing * 0.3 + 0.01).astype(np.float32)
    crit = StoppingCriterion(1e-8)
    x, rep = cg(op.matvec, P, b, b.copy(), crit)
    assert not rep.converged and rep.status == "max_iter" and rep.iterations == 40
    assert x.dtype == np.float32
    _check_report(rep, crit)


def test_f32_gmres_stagnation_hits_cap():
    p = advection_problem(16)
    op = stage_operator(p, 1 / 640, 0.5)
    P = build(p, 1 / 640, 0.5, Precision.F32)
    b = p.initial_state.astype(np.complex64)
    crit = StoppingCriterion(1e-8)
    x, rep = gmres(op.matvec, P, b, b.copy(), crit)
    assert not rep.converged and rep.iterations == 40
    _check_report(rep, crit)
    assert all(a >= b for a, b in zip(rep.residual_history, rep.residual_history[1:]))


def test_cg_breakdown_on_indefinite(rng):
    b = rng.standard_normal(5)
    with pytest.raises(BreakdownDetected):
        cg(lambda v: -v, identity, b, None, StoppingCriterion(1e-10))


def test_timings_merge_into_caller():
    op, p = _heat_stage(n=8)
    P = build(p, 1 / 40, 0.5)
    t = Timer()
    b = p.forcing.copy()
    _, rep = cg(op.matvec, P, b, b.copy(), StoppingCriterion(1e-6), timer=t)
    assert t.count("solver") == 1 and t.count("precond") >= 1
    assert "solver" in rep.timings


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 12), st.floats(0.01, 10.0), st.integers(0, 2 ** 31))
def test_gmres_history_monotone_and_bounded(n, shift, seed):
    r = np.random.default_rng(seed)
    A = r.standard_normal((n, n)) + shift * np.eye(n)
    b = r.standard_normal(n)
    crit = StoppingCriterion(1e-10)
    x, rep = gmres(lambda v: A @ v, identity, b, None, crit)
    h = rep.residual_history
    assert all(a >= b * (1 - 1e-12) for a, b in zip(h, h[1:]))
    _check_report(rep, crit)
