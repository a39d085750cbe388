import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from tikhonov_inertial.ode import (
    TRAJECTORY_COLUMNS,
    FlowParams,
    PhaseState,
    integrate,
    lipschitz_envelope,
    phase_rhs,
    special_case,
)
from tikhonov_inertial.problems import make_logbarrier2d, make_quadratic2d, make_zero_problem

QUAD_FLOW = FlowParams(alpha=3.5, beta=4.0, a=1.0, p=1.2, q=0.9, delta_theta=1.0)


@pytest.fixture(scope="module")
def runs61():
    o = make_quadratic2d()
    return {s: integrate(special_case(QUAD_FLOW, s), o, [1.0, 1.0], [-1.0, -1.0], 100.0) for s in "689"}


# parameters ---------------------------------------------------------------------


@pytest.mark.parametrize("kw", [dict(alpha=0.0), dict(alpha=1.0, beta=-1.0), dict(alpha=1.0, q=1.0),
                                dict(alpha=1.0, delta_c=0.0), dict(alpha=1.0, t0=0.0),
                                dict(alpha=1.0, delta_theta=-1.0)])
def test_params_validation(kw):
    with pytest.raises(ValueError):
        FlowParams(**kw)


def test_time_scaling_growth_condition():
    P = FlowParams(alpha=1.0, delta_theta=2.0)
    assert P.condition_b_holds(2.5)
    assert not P.condition_b_holds(2.0)
    assert P.condition_b_holds()  # default witness theta + 1
    t = np.linspace(1, 50, 20)
    np.testing.assert_allclose(t * P.delta_dot(t) / P.delta(t), 2.0)


def test_special_cases_map_parameters():
    s6 = special_case(QUAD_FLOW, "6")
    assert (s6.beta, s6.delta_theta, s6.delta_c) == (0.0, 0.0, 1.0)
    assert (s6.p, s6.q) == (QUAD_FLOW.p, QUAD_FLOW.q)
    s8 = special_case(QUAD_FLOW, "8")
    assert (s8.p, s8.q, s8.beta) == (0.0, 0.0, QUAD_FLOW.beta)
    assert special_case(QUAD_FLOW, 9) == QUAD_FLOW
    with pytest.raises(ValueError):
        special_case(QUAD_FLOW, "7")


# right-hand side ------------------------------------------------------------------


def test_rhs_at_minimizer_only_tikhonov_survives():
    P = FlowParams(alpha=3.5, beta=4.0, a=1.0, p=1.2, q=0.9, delta_theta=1.0)
    xd, yd = phase_rhs(1.0, PhaseState(1.0, [0.5, 0.5], [0.0, 0.0]), P, make_quadratic2d())
    np.testing.assert_array_equal(xd, [0.0, 0.0])
    np.testing.assert_array_equal(yd, [-0.5, -0.5])


def test_rhs_hand_value():
    xd, yd = phase_rhs(1.0, PhaseState(1.0, [1.0, 1.0], [39.0, 39.0]), QUAD_FLOW, make_quadratic2d())
    np.testing.assert_array_equal(xd, [-1.0, -1.0])
    np.testing.assert_array_equal(yd, [-7.5, -7.5])


@settings(max_examples=50, deadline=None)
@given(st.floats(1, 100), st.floats(0.1, 5), st.floats(0, 0.99),
       st.lists(st.floats(-10, 10), min_size=3, max_size=3))
def test_rhs_free_motion(t, alpha, q, v):
    P = FlowParams(alpha=alpha, beta=2.0, q=q, delta_theta=1.0)
    y = np.array(v[1:])
    xd, yd = phase_rhs(t, PhaseState(t, [v[0], 0.0], y), P, make_zero_problem(2))
    np.testing.assert_array_equal(xd, y)
    np.testing.assert_allclose(yd, -(alpha / t ** q) * y, rtol=1e-15)


def test_rhs_rejects_time_before_start():
    with pytest.raises(ValueError):
        phase_rhs(0.5, PhaseState(0.5, [0.0, 0.0], [0.0, 0.0]), QUAD_FLOW, make_quadratic2d())


def _direct_rhs6(t, x, v, P, o):
    # x'' + alpha/t^q x' + grad g + a/t^p x = 0, written for (x, x')
    return v, -(P.alpha / t ** P.q) * v - o.gradient(x) - (P.a / t ** P.p) * x


def _direct_rhs8(t, x, y, P, o):
    # constant damping and weight, Hessian-free form
    g = o.gradient(x)
    return y - P.beta * g, -P.alpha * y - (P.delta(t) - P.beta * P.alpha) * g - P.a * x


@settings(max_examples=50, deadline=None)
@given(st.floats(1, 200), st.lists(st.floats(-5, 5), min_size=4, max_size=4))
def test_special_case_rhs_match_direct_forms(t, v):
    o = make_quadratic2d()
    x, y = np.array(v[:2]), np.array(v[2:])
    for system, direct in (("6", _direct_rhs6), ("8", _direct_rhs8)):
        xd, yd = phase_rhs(t, PhaseState(t, x, y), special_case(QUAD_FLOW, system), o)
        dx, dy = direct(t, x, y, QUAD_FLOW if system == "6" else special_case(QUAD_FLOW, "8"), o)
        scale = 1 + np.abs(dy)
        assert np.max(np.abs(xd - dx)) <= 1e-14 * (1 + np.max(np.abs(dx)))
        assert np.max(np.abs(yd - dy) / scale) <= 1e-14


@settings(max_examples=50, deadline=None)
@given(st.floats(1, 50), st.lists(st.floats(-0.5, 3), min_size=4, max_size=4))
def test_reformulation_recovers_second_order_equation(t, v):
    # x'' = y' - beta Hess g x' must equal the original second-order right-hand side
    o = make_logbarrier2d()
    x, y = np.array(v[:2]), np.array(v[2:])
    P = QUAD_FLOW
    xd, yd = phase_rhs(t, PhaseState(t, x, y), P, o)
    H = o.hessian(x)
    xdd = yd - P.beta * H @ xd
    orig = (-(P.alpha / t ** P.q) * xd - P.beta * H @ xd - P.delta(t) * o.gradient(x)
            - (P.a / t ** P.p) * x)
    np.testing.assert_allclose(xdd, orig, rtol=1e-12, atol=1e-12 * (1 + np.abs(orig).max()))


# Lipschitz envelope -----------------------------------------------------------------


def test_envelope_hand_value():
    r2 = np.sqrt(2)
    expected = r2 + 3.5 * r2 + 80 * r2 + 2 * 20 * 13 + 2
    assert lipschitz_envelope(1.0, QUAD_FLOW, 20.0) == pytest.approx(expected, rel=1e-15)
    assert expected == pytest.approx(641.50, abs=5e-3)


@settings(max_examples=30, deadline=None)
@given(st.floats(1, 1e3), st.floats(0.1, 10), st.floats(0, 0.99))
def test_envelope_collapse(t, alpha, q):
    P = FlowParams(alpha=alpha, q=q)
    assert lipschitz_envelope(t, P, 0.0) == pytest.approx(np.sqrt(2) * (1 + alpha / t ** q), rel=1e-14)


def test_envelope_growth_rate():
    L = 20.0
    ratios = [lipschitz_envelope(t, QUAD_FLOW, L) / t for t in (1e4, 1e6, 1e8)]
    assert abs(ratios[-1] - 2 * L) < abs(ratios[0] - 2 * L)
    assert ratios[-1] == pytest.approx(2 * L, rel=1e-5)


# integrator ---------------------------------------------------------------------------


def test_free_particle_at_rest_stays_put():
    P = FlowParams(alpha=2.0, beta=1.0, q=0.5, delta_theta=1.0)
    tr = integrate(P, make_zero_problem(3), [1.0, -2.0, 0.5], np.zeros(3), 50.0)
    assert np.all(tr.x == np.array([1.0, -2.0, 0.5]))
    assert np.all(tr.velocity == 0.0)


def test_linear_damping_closed_form():
    P = FlowParams(alpha=2.0, q=0.0)
    rtol, atol = 1e-8, 1e-10
    tr = integrate(P, make_zero_problem(1), [0.0], [1.0], 20.0, rtol=rtol, atol=atol, n_samples=200)
    exact = (1 - np.exp(-2 * (tr.t - 1))) / 2
    assert np.max(np.abs(tr.x[:, 0] - exact)) <= 10 * max(rtol, atol)


def test_matches_reference_integrator(runs61):
    o = make_quadratic2d()
    P = QUAD_FLOW

    def f(t, z):
        xd, yd = phase_rhs(t, PhaseState(t, z[:2], z[2:]), P, o)
        return np.concatenate([xd, yd])

    z0 = np.concatenate([[1.0, 1.0], np.array([-1.0, -1.0]) + P.beta * o.gradient(np.array([1.0, 1.0]))])
    tr = runs61["9"]
    ref = solve_ivp(f, (1.0, 100.0), z0, method="DOP853", rtol=1e-11, atol=1e-13, t_eval=tr.t)
    assert np.max(np.abs(ref.y[:2].T - tr.x)) < 1e-4
    assert np.max(np.abs(ref.y[:2, -1] - tr.x[-1])) < 1e-5


def test_example_approaches_min_norm_point(runs61):
    tr = runs61["9"]
    assert np.linalg.norm(tr.x[-1] - 0.5) < 2e-2
    assert tr.dist_min_norm[-1] < tr.dist_min_norm[0]


def test_trajectory_structure(runs61):
    for tr in runs61.values():
        assert np.all(np.diff(tr.t) > 0)
        assert tr.accepted >= 1
        assert tr.x.shape == tr.y.shape == tr.velocity.shape == (len(tr), 2)
        assert tr.t[0] == 1.0 and tr.t[-1] == 100.0
        assert tr.avg_step == pytest.approx(99.0 / tr.accepted)


def test_step_count_ordering(runs61):
    assert runs61["9"].accepted >= runs61["6"].accepted


def test_velocity_is_reconstructed_exactly(runs61):
    o = make_quadratic2d()
    tr = runs61["9"]
    for i in (0, 50, 399):
        np.testing.assert_array_equal(tr.velocity[i], tr.y[i] - QUAD_FLOW.beta * o.gradient(tr.x[i]))


def test_reformulation_consistency_dense_output():
    # centred differences of the dense output approximate x' = y - beta grad g;
    # a local state error tau shows up as tau / h_step in the difference
    # quotient and as beta L tau in the reconstructed velocity
    o = make_quadratic2d()
    rtol, atol = 1e-8, 1e-10
    grid = np.linspace(5.0, 6.0, 2001)
    tr = integrate(QUAD_FLOW, o, [1.0, 1.0], [-1.0, -1.0], 6.0, rtol=rtol, atol=atol, t_eval=grid)
    dt = grid[1] - grid[0]
    fd = (tr.x[2:] - tr.x[:-2]) / (2 * dt)
    err = np.abs(fd - tr.velocity[1:-1]).max(axis=1)
    tau = atol + rtol * np.abs(np.hstack([tr.x, tr.y])).max(axis=1)[1:-1]
    allowed = 10 * tau * (1 / tr.step_size[1:-1] + QUAD_FLOW.beta * o.lipschitz_grad)
    assert np.all(err <= allowed)


def test_tolerance_halving_is_self_consistent():
    o = make_quadratic2d()
    coarse = integrate(QUAD_FLOW, o, [1.0, 1.0], [-1.0, -1.0], 100.0, rtol=1e-6, atol=1e-9)
    fine = integrate(QUAD_FLOW, o, [1.0, 1.0], [-1.0, -1.0], 100.0, rtol=5e-7, atol=5e-10)
    assert np.linalg.norm(coarse.x[-1] - fine.x[-1]) < 10 * 1e-6


def test_logbarrier_run_stays_interior_and_converges():
    P = FlowParams(alpha=2.0, beta=4.0, a=1.0, p=1.2, q=0.9, delta_theta=1.0)
    o = make_logbarrier2d()
    tr = integrate(P, o, [1.0, 1.0], [1.0, 1.0], 250.0)
    assert np.all(tr.x > -1)
    assert tr.dist_min_norm[-1] < 1e-3


def test_record_steps():
    tr = integrate(QUAD_FLOW, make_quadratic2d(), [1.0, 1.0], [-1.0, -1.0], 3.0, record_steps=True)
    assert len(tr.step_times) == tr.accepted + 1
    assert tr.step_states.shape == (tr.accepted + 1, 4)
    assert np.all(np.diff(tr.step_times) > 0)


def test_bad_inputs():
    o = make_quadratic2d()
    with pytest.raises(ValueError):
        integrate(QUAD_FLOW, o, [1.0, 1.0], [0.0, 0.0], 1.0)
    with pytest.raises(ValueError):
        integrate(QUAD_FLOW, o, [1.0, 1.0], [0.0, 0.0], 5.0, t_eval=[2.0, 1.5])
    with pytest.raises(RuntimeError):
        integrate(QUAD_FLOW, o, [1.0, 1.0], [0.0, 0.0], 100.0, max_steps=10)


def test_csv_layout(tmp_path, runs61):
    tr = runs61["6"]
    path = tmp_path / "traj.csv"
    tr.to_csv(path)
    raw = path.read_bytes()
    assert b"\r" not in raw
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == TRAJECTORY_COLUMNS(2)
    assert len(rows) == len(tr) + 1
    assert float(rows[-1][1]) == tr.x[-1, 0]
    # energy columns are empty until an auditor fills them
    assert rows[1][rows[0].index("energy_Eb")] == ""
