import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings, strategies as st

from virialkit.averaging import (
    IntegratorSettings,
    Trajectory,
    bound_growth,
    detect_period,
    integrate,
    integrate_dynamics,
    time_average,
    virial_report,
)
from virialkit.errors import GuardTripped, PeriodExceedsSpan, StepSizeUnderflow
from virialkit.models import build, kepler_lagrangian


def oscillator(t, s):
    return np.array([s[1], -s[0]])


def uniform_traj(t_max, n, fn):
    times = np.linspace(0.0, t_max, n)
    return Trajectory(times, np.column_stack([fn(times)]), IntegratorSettings(t_max))


# -- settings and integration -----------------------------------------------------


@pytest.mark.parametrize(
    "kwargs",
    [dict(t_max=1.0, rtol=0.0), dict(t_max=1.0, atol=-1.0), dict(t_max=0.0), dict(t_max=1.0, dense_dt=0.5)],
)
def test_settings_validation(kwargs):
    with pytest.raises(ValueError):
        IntegratorSettings(**kwargs)


def test_constant_field():
    traj = integrate(lambda t, s: np.zeros(2), [3.0, -1.0], IntegratorSettings(5.0))
    npt.assert_array_equal(traj.states, np.broadcast_to([3.0, -1.0], traj.states.shape))
    assert traj.times[0] == 0.0 and traj.times[-1] == 5.0
    assert np.all(np.diff(traj.times) > 0)
    assert not traj.aborted


def test_oscillator_returns_after_two_pi():
    traj = integrate(oscillator, [1.0, 0.0], IntegratorSettings(2 * np.pi))
    npt.assert_allclose(traj.states[-1], [1.0, 0.0], atol=1e-8)
    npt.assert_allclose(traj(np.pi / 2), [0.0, -1.0], atol=1e-8)


def test_method_selection():
    traj = integrate(oscillator, [1.0, 0.0], IntegratorSettings(2 * np.pi, method="DOP853"))
    assert traj.stats["method"] == "DOP853"
    npt.assert_allclose(traj.states[-1], [1.0, 0.0], atol=1e-8)


def test_kepler_collision_trips_guard():
    dyn = build("kepler_quasi").dynamics("tq")
    s0 = [1.0, 0.0, -0.5, 0.0]  # radial infall, no angular momentum
    with pytest.raises(GuardTripped) as info:
        integrate_dynamics(dyn, s0, IntegratorSettings(10.0))
    partial = info.value.trajectory
    assert partial.aborted and partial.span < 10.0
    npt.assert_allclose(partial.states[-1, 0], 1e-3, rtol=1e-6)
    traj = integrate_dynamics(dyn, s0, IntegratorSettings(10.0), raise_on_guard=False)
    assert traj.aborted and traj.times[-1] == partial.times[-1]


def test_initial_state_outside_guard():
    with pytest.raises(GuardTripped):
        integrate(oscillator, [1.0, 0.0], IntegratorSettings(1.0), guard=lambda s: s[0] < 0)


def test_blow_up_is_step_size_underflow():
    with pytest.raises(StepSizeUnderflow):
        integrate(lambda t, s: s**2, [1.0], IntegratorSettings(2.0))


def test_integration_order():
    def error(rtol):
        traj = integrate(oscillator, [1.0, 0.0], IntegratorSettings(10.0, rtol=rtol, atol=rtol * 1e-2))
        return np.linalg.norm(traj.states[-1] - [np.cos(10.0), -np.sin(10.0)])

    assert error(1e-6) / error(1e-8) >= 10**1.5


# -- time averages -----------------------------------------------------------------


def test_constant_average():
    res = time_average(lambda s: np.full(len(s), 3.0), uniform_traj(10.0, 101, np.sin))
    assert res.value == 3.0 and res.half_value == 3.0 and res.converged
    assert res.boundary_term is None and not res.bound_warning


def test_sin_over_one_period():
    traj = uniform_traj(4 * np.pi, 2001, lambda t: t)
    res = time_average(lambda s: np.sin(s[:, 0]), traj, period=2 * np.pi)
    assert abs(res.value) <= 1e-6
    npt.assert_allclose(res.span, 2 * np.pi)


def test_period_exceeds_span():
    with pytest.raises(PeriodExceedsSpan):
        time_average(lambda s: s[:, 0], uniform_traj(1.0, 11, np.cos), period=2.0)


def test_cesaro_not_converged_for_drift():
    res = time_average(lambda s: s[:, 0], uniform_traj(10.0, 101, lambda t: t))
    assert not res.converged
    npt.assert_allclose([res.value, res.half_value], [5.0, 2.5])


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-5, 5), b=st.floats(-5, 5))
def test_average_is_linear(a, b):
    traj = uniform_traj(7.0, 301, lambda t: t)
    f, g = (lambda s: np.cos(s[:, 0])), (lambda s: s[:, 0] ** 2)
    lhs = time_average(lambda s: a * f(s) + b * g(s), traj).value
    rhs = a * time_average(f, traj).value + b * time_average(g, traj).value
    npt.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


def test_kepler_virial_over_one_period():
    m = build("kepler_quasi")
    dyn = m.dynamics("tq")
    L = kepler_lagrangian(1.0, 1.0)
    traj = integrate_dynamics(dyn, m.initial_state("eccentric", "tq"), IntegratorSettings(2 * np.pi + 0.5, dense_dt=1e-3))

    def two_T_plus_V(s):
        q, w = s[:, :2], s[:, 2:]
        return 2 * L.kinetic(q, w).value + L.potential(q, w).value

    assert abs(time_average(two_T_plus_V, traj, period=2 * np.pi).value) <= 1e-6


def test_bound_growth():
    assert bound_growth(np.linspace(0, 10, 30))
    assert not bound_growth(np.sin(np.linspace(0, 30, 300)))
    assert not bound_growth(np.array([1.0, 2.0]))


# -- period detection -----------------------------------------------------------------


def test_period_oscillator():
    traj = integrate(oscillator, [1.0, 0.0], IntegratorSettings(15.0))
    npt.assert_allclose(detect_period(traj), 2 * np.pi, atol=1e-6)
    npt.assert_allclose(detect_period(traj, field_fn=oscillator), 2 * np.pi, atol=1e-6)


def test_period_kepler():
    m = build("kepler_quasi")
    dyn = m.dynamics("tq")
    traj = integrate_dynamics(dyn, m.initial_state("eccentric", "tq"), IntegratorSettings(9.5))
    npt.assert_allclose(detect_period(traj, field_fn=dyn.field, angles=dyn.angles), 2 * np.pi, atol=1e-5)


def test_period_absent_for_drift():
    traj = integrate(lambda t, s: np.array([1.0, 0.0]), [0.0, 1.0], IntegratorSettings(10.0))
    assert detect_period(traj) is None


def test_period_t_min_skips_early_returns():
    traj = integrate(oscillator, [1.0, 0.0], IntegratorSettings(15.0))
    npt.assert_allclose(detect_period(traj, t_min=7.0), 4 * np.pi, atol=1e-6)


# -- virial reports ----------------------------------------------------------------------


def test_report_on_periodic_orbit():
    m = build("kepler_quasi")
    dyn = m.dynamics("tq")
    traj = integrate_dynamics(dyn, m.initial_state("eccentric", "tq"), IntegratorSettings(2 * np.pi, dense_dt=2e-3))
    rep = virial_report(dyn, traj, period=2 * np.pi)
    assert rep.consistent
    for e in rep.entries.values():
        assert abs(e.boundary_term) < 1e-7
        assert abs(e.cesaro) < 1e-7
        assert abs(e.periodic) < 1e-7


def test_report_heavy_top_gamma_bound():
    m = build("heavy_top")
    dyn = m.dynamics("algebroid_l")
    T = 100.0
    traj = integrate_dynamics(dyn, m.initial_state("default", "algebroid_l"), IntegratorSettings(T, rtol=1e-10, method="DOP853"))
    rep = virial_report(dyn, traj, names=["gamma_x", "gamma_y", "gamma_z"])
    for e in rep.entries.values():
        assert e.consistent
        assert abs(e.cesaro) <= 2 * e.max_abs_G / T
    assert rep.drift["gamma_norm"] < 1e-9


def test_free_particle_bound_warning():
    m = build("oscillator", {"k": 0.0, "q0": 0.0, "v0": 1.0})
    dyn = m.dynamics("tstarq")
    traj = integrate_dynamics(dyn, m.initial_state("default", "tstarq"), IntegratorSettings(10.0))
    rep = virial_report(dyn, traj)
    e = rep.entries["dilation"]
    # the integrand p^2/m is constant, so the average is 1, not 0, and the monitor explains why
    assert e.bound_warning
    npt.assert_allclose(e.cesaro, 1.0, rtol=1e-10)
    assert rep.consistent


@pytest.mark.parametrize(
    "name, formalism",
    [
        ("kepler_quasi", "tq"),
        ("kepler_quasi", "algebroid_l"),
        ("kepler_cotangent", "tstarq"),
        ("rigid_body_lagrangian", "algebroid_l"),
        ("rigid_body_hamiltonian", "algebroid_h"),
        ("heavy_top", "algebroid_l"),
        ("heavy_top", "algebroid_h"),
        ("oscillator", "tq"),
        ("oscillator", "tstarq"),
    ],
)
def test_master_identity_short_runs(name, formalism):
    m = build(name)
    dyn = m.dynamics(formalism)
    preset = next(iter(m.initial_states))
    traj = integrate_dynamics(dyn, m.initial_state(preset, formalism), IntegratorSettings(5.0))
    rep = virial_report(dyn, traj)
    bad = {k: (e.residual, e.tolerance) for k, e in rep.entries.items() if not e.consistent}
    assert not bad
