import numpy as np
import pytest

from mprk.exceptions import NonFiniteState
from mprk.linalg import Precision
from mprk.operators import KronSumOperator, advection_problem, heat_exact, heat_problem
from mprk.stepper import (
    IntegrationConfig,
    PrecisionPolicy,
    Stepper,
    error_norms,
    fit_slope,
    integrate,
    step,
    temporal_errors,
    temporal_order,
)
from mprk.tableaux import parse_method
from mprk.timing import LABELS

METHODS = ["4s3pA", "4s3pB", "4s3pC", "midpoint0", "midpoint1", "midpoint3"]


def _dense_step(tab, K, g, u, tau):
    """Stage-by-stage computation with dense matrices (oracle)."""
    N = K.shape[0]
    I = np.eye(N)
    ys, fs = [], []
    for i in range(tab.q):
        rhs = u + tau * sum(tab.A[i, j] * fs[j] for j in range(i))
        a = tab.A[i, i]
        y = np.linalg.solve(I - tau * a * K, rhs + tau * a * g) if a else rhs
        ys.append(y)
        fs.append(K @ y + g)
    return u + tau * sum(tab.b[i] * fs[i] for i in range(tab.q))


@pytest.mark.parametrize("method", METHODS)
def test_one_step_matches_dense_oracle(method, rng):
    p = heat_problem(3)
    cfg = IntegrationConfig(method, 0.05, p, tol=1e-13)
    u = rng.standard_normal(27)
    u1, trace = step(cfg, u)
    ref = _dense_step(cfg.method, p.K.dense(), p.forcing, u, 0.05)
    assert np.max(np.abs(u1 - ref)) <= 1e-10 * np.max(np.abs(ref))
    assert set(trace.timer.as_dict()) <= set(LABELS)


def test_midpoint_from_zero_is_resolvent_times_forcing():
    # [DERIVED] u1 = tau (I - tau K/2)^-1 g for u0 = 0
    p = heat_problem(3)
    K = p.K.dense()
    tau = 0.1
    u1, _ = step(IntegrationConfig("midpoint1", tau, p, tol=1e-12), np.zeros(27))
    ref = tau * np.linalg.solve(np.eye(27) - 0.5 * tau * K, p.forcing)
    assert np.max(np.abs(u1 - ref)) <= 1e-10 * np.max(np.abs(ref))


@pytest.mark.parametrize("method", ["4s3pB", "midpoint2"])
def test_advection_one_step_dense(method, rng):
    p = advection_problem(3)
    cfg = IntegrationConfig(method, 0.01, p, tol=1e-13)
    u = rng.standard_normal(27)
    u1, _ = step(cfg, u)
    ref = _dense_step(cfg.method, p.K.dense(), np.zeros(27), u, 0.01)
    assert np.max(np.abs(u1 - ref)) <= 1e-10 * np.max(np.abs(ref))


@pytest.mark.parametrize("method", METHODS)
def test_zero_speed_advection_is_identity(method, rng):
    from dataclasses import replace
    p = advection_problem(4)
    p = replace(p, K=KronSumOperator(4, p.K.kind, 0.0, 0.0))
    u = rng.uniform(0.1, 1, 64)
    u1, _ = step(IntegrationConfig(method, 0.01, p, tol=1e-10), u)
    np.testing.assert_allclose(u1, u, atol=1e-15)


@pytest.mark.parametrize("method,solves", [("4s3pA", 2), ("4s3pB", 4), ("4s3pC", 4), ("midpoint5", 1)])
def test_solve_count(method, solves):
    _, trace = step(IntegrationConfig(method, 0.025, heat_problem(4)), np.zeros(64))
    assert len(trace.reports) == solves


@pytest.mark.parametrize("method", ["4s3pA", "4s3pB", "4s3pC", "midpoint2"])
def test_f32_stencil_calls_only_for_eps_terms(method):
    tab = parse_method(method)
    p = heat_problem(4)
    _, t64 = step(IntegrationConfig(tab, 0.025, p), np.zeros(64))
    assert t64.stencil_f32_calls == 0
    _, t32 = step(IntegrationConfig(tab, 0.025, p, policy=PrecisionPolicy(Precision.F32)), np.zeros(64))
    eps_terms = sum(bool(np.any(tab.A_eps[i + 1:, i] != 0)) for i in range(tab.q))
    assert t32.stencil_f32_calls == eps_terms + len(tab.implicit_stages())


def test_f64_policy_bitwise_reproducible(rng):
    cfg = IntegrationConfig("4s3pB", 0.025, heat_problem(5))
    u = rng.standard_normal(125)
    a, _ = step(cfg, u)
    b, _ = step(cfg, u)
    assert np.array_equal(a, b)


def test_config_validation():
    p = heat_problem(4)
    with pytest.raises(ValueError):
        IntegrationConfig("4s3pB", 0.03, p)
    with pytest.raises(ValueError):
        IntegrationConfig("4s3pB", -0.1, p)
    cfg = IntegrationConfig("4s3pB", 1 / 30, p)
    assert cfg.n_steps == 3
    assert cfg.with_(tau=0.05).n_steps == 2


def test_heat_error_shrinks_with_refinement():
    errs = []
    for n, tau in ((8, 1 / 20), (16, 1 / 40)):
        res = integrate(IntegrationConfig("midpoint1", tau, heat_problem(n), tol=1e-10))
        errs.append(res.error_max)
        h = 1 / (n - 1)
        assert res.error_max <= 5.0 * (tau ** 2 + h ** 2)
    assert errs[1] < errs[0]


def test_heat_f64_one_iteration_per_solve():
    res = integrate(IntegrationConfig("4s3pC", 1 / 40, heat_problem(16), tol=1e-6))
    assert res.mean_iterations == 1.0 and not res.failed


def test_advection_conservation():
    p = advection_problem(8)
    cfg = IntegrationConfig("4s3pB", 1 / 160, p, tol=1e-13, t_end=1 / 40)
    stepper = Stepper(cfg)
    u = p.initial_state.copy()
    for _ in range(cfg.n_steps):
        u_new, _ = stepper.step(u)
        assert abs(u_new.sum() - u.sum()) <= 1e-8
        u = u_new


def test_corrector_divergence_guard():
    # (tau/2) * spectral radius of K is about 15 here, so corrector steps amplify the
    # low-precision solve error instead of removing it
    p = heat_problem(8)
    rho = 12 * 49
    assert 0.05 / 2 * rho > 1
    errs = {}
    for k in (1, 12):
        cfg = IntegrationConfig(f"midpoint{k}", 0.05, p, tol=1e-3, policy=PrecisionPolicy(Precision.F32))
        try:
            errs[k] = integrate(cfg).error_max
        except NonFiniteState:
            errs[k] = np.inf
    assert errs[12] > errs[1]


def test_error_norms():
    e = np.array([3.0, -4.0])
    assert error_norms(e, 0.5) == (4.0, np.sqrt(0.125 * 25))


def test_fit_slope_exact():
    taus = [0.1, 0.05, 0.025]
    assert fit_slope(taus, [3 * t ** 2 for t in taus]) == pytest.approx(2.0)


def test_temporal_order_needs_three():
    cfg = IntegrationConfig("midpoint1", 0.1, heat_problem(4))
    with pytest.raises(ValueError):
        temporal_order(cfg, [0.1, 0.05])


def test_temporal_errors_against_reference():
    cfg = IntegrationConfig("4s3pB", 0.1, heat_problem(6), tol=1e-10)
    rows = temporal_errors(cfg, [0.1, 0.05, 0.025])
    assert [r[0] for r in rows] == [0.1, 0.05, 0.025]
    assert rows[0][1] > rows[1][1] > rows[2][1] > 0


def test_integrate_heat_reports_analytic_error():
    res = integrate(IntegrationConfig("4s3pB", 0.05, heat_problem(6)))
    ref = heat_exact(heat_problem(6), 0.1)
    assert res.error_max == pytest.approx(np.max(np.abs(res.u - ref)))
    assert res.t == pytest.approx(0.1)


def test_advection_error_only_with_reference():
    p = advection_problem(6)
    res = integrate(IntegrationConfig("4s3pB", 0.05, p))
    assert res.error_max is None
    res2 = integrate(IntegrationConfig("4s3pB", 0.05, p), reference=res.u)
    assert res2.error_max == 0.0


def test_unstable_method_signals_nonfinite():
    # 4s3pA is not A-stable: |R| is about 2e3 at the stiffest mode here (z ~ -1e5)
    cfg = IntegrationConfig("4s3pA", 10.0, heat_problem(32), tol=1e-6, t_end=2000.0)
    with pytest.raises(NonFiniteState):
        integrate(cfg)
