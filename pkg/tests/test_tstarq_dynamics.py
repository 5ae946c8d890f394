import numpy as np
import numpy.testing as npt
from hypothesis import given, settings, strategies as st
from scipy.integrate import simpson

from conftest import _d1, anharmonic_hamiltonian, twisted_frame
from virialkit.averaging import IntegratorSettings, integrate
from virialkit.frames import coordinate_frame
from virialkit.jets import BundleJet, Jet, SectionField, SectionValue, constant_section
from virialkit.models import (
    dilation_field,
    kepler_hamiltonian,
    kepler_lagrangian,
    oscillator_hamiltonian,
    oscillator_lagrangian,
    polar_frame,
)
from virialkit.tq_dynamics import lagrangian_flow_field
from virialkit.tstarq_dynamics import (
    canonical_two_form,
    complete_lift_tstarq,
    hamiltonian_flow_field,
    linear_virial_bracket,
    linear_virial_function,
    virial_bracket_tstarq,
    virial_integrand_tstarq,
)

POLAR = polar_frame(1e-3)
KEPLER_H = kepler_hamiltonian(1.0, 1.0)


def cubic_function():
    def fn(q, p):
        x, y, z = q[..., 0], q[..., 1], q[..., 2]
        value = p[..., 0] * p[..., 1] * z + np.cos(x) * p[..., 2] + y
        d_base = np.stack([-np.sin(x) * p[..., 2], np.ones_like(y), p[..., 0] * p[..., 1]], -1)
        d_fibre = np.stack([p[..., 1] * z, p[..., 0] * z, np.cos(x)], -1)
        return Jet(value, d_base, d_fibre)

    return BundleJet(fn, name="cubic")


def swirl_field():
    def fn(x):
        f = np.stack([x[..., 1], -x[..., 0] * x[..., 2], np.sin(x[..., 0])], -1)
        jac = np.zeros(x.shape[:-1] + (3, 3))
        jac[..., 0, 1] = 1.0
        jac[..., 1, 0] = -x[..., 2]
        jac[..., 1, 2] = -x[..., 0]
        jac[..., 2, 0] = np.cos(x[..., 0])
        return SectionValue(f, jac)

    return SectionField(fn, name="swirl")


states = st.tuples(
    st.lists(st.floats(-0.4, 0.4), min_size=3, max_size=3),
    st.lists(st.floats(-3, 3), min_size=3, max_size=3),
)


# -- flow field ------------------------------------------------------------------


def test_flow_oscillator():
    qdot, pdot = hamiltonian_flow_field(oscillator_hamiltonian(1.0, 1.0), coordinate_frame(1), [0.4], [-1.1])
    npt.assert_allclose(qdot, [-1.1])
    npt.assert_allclose(pdot, [-0.4])


def test_flow_kepler_circular():
    qdot, pdot = hamiltonian_flow_field(KEPLER_H, POLAR, [1.0, 0.0], [0.0, 1.0])
    npt.assert_allclose(qdot, [0.0, 1.0], atol=1e-15)
    npt.assert_allclose(pdot, [0.0, 0.0], atol=1e-15)


def test_flow_free_momenta_conserved(rng):
    def fn(q, p):
        return Jet(0.5 * np.sum(p**2, -1), np.zeros_like(q), p)

    _, pdot = hamiltonian_flow_field(BundleJet(fn), coordinate_frame(3), rng.normal(size=3), rng.normal(size=3))
    npt.assert_allclose(pdot, 0.0)


def test_coordinate_frame_matches_hamilton(rng):
    H = anharmonic_hamiltonian()
    value = lambda q, p: float(H(q, p).value)
    for _ in range(5):
        q, p = rng.uniform(-0.5, 0.5, 3), rng.normal(size=3)
        qdot, pdot = hamiltonian_flow_field(H, coordinate_frame(3), q, p)
        dHdp = [_d1(lambda u: value(q, u), p, i, 1e-3) for i in range(3)]
        dHdq = [_d1(lambda x: value(x, p), q, i, 1e-3) for i in range(3)]
        npt.assert_allclose(qdot, dHdp, rtol=1e-8, atol=1e-8)
        npt.assert_allclose(pdot, -np.array(dHdq), rtol=1e-8, atol=1e-8)


def test_flow_into_canonical_form_is_dH(twisted, rng):
    H = anharmonic_hamiltonian()
    for _ in range(10):
        q, p = rng.uniform(-0.4, 0.4, 3), rng.normal(size=3)
        _, pdot = hamiltonian_flow_field(H, twisted, q, p)
        h = H(q, p)
        gamma_vec = np.concatenate([h.d_fibre, pdot])
        dH = np.concatenate([twisted.beta(q).T @ h.d_base, h.d_fibre])
        npt.assert_allclose(gamma_vec @ canonical_two_form(twisted, q, p), dH, rtol=1e-12, atol=1e-12)


# -- linear virial functions ------------------------------------------------------


def test_linear_zero_field(rng):
    g = linear_virial_function(constant_section([0.0, 0.0], 2))([1.2, 0.3], rng.normal(size=2))
    assert g.value == 0.0
    npt.assert_array_equal(g.d_base, 0.0)
    npt.assert_array_equal(g.d_fibre, 0.0)


def test_linear_kepler_dilation():
    npt.assert_allclose(linear_virial_function(dilation_field())([2.0, 0.0], [3.0, 2.0]).value, 6.0)


def test_linear_translation_has_no_vertical(rng):
    base, vertical = complete_lift_tstarq(constant_section([1.0, 2.0, -1.0], 3), coordinate_frame(3), rng.normal(size=3), rng.normal(size=3))
    npt.assert_allclose(base, [1.0, 2.0, -1.0])
    npt.assert_allclose(vertical, 0.0)


def test_lift_is_hamiltonian_field_of_linear_function(twisted, rng):
    D = swirl_field()
    G = linear_virial_function(D)
    for _ in range(5):
        q, p = rng.uniform(-0.4, 0.4, 3), rng.normal(size=3)
        base, vertical = complete_lift_tstarq(D, twisted, q, p)
        qdot, pdot = hamiltonian_flow_field(G, twisted, q, p)
        npt.assert_allclose(base, qdot, rtol=1e-13, atol=1e-14)
        npt.assert_allclose(vertical, pdot, rtol=1e-13, atol=1e-14)


# -- virial integrands ---------------------------------------------------------------


def test_integrand_of_H_is_zero(twisted, rng):
    H = anharmonic_hamiltonian()
    q, p = rng.uniform(-0.4, 0.4, 3), rng.normal(size=3)
    npt.assert_allclose(virial_integrand_tstarq(H, H, twisted, q, p), 0.0, atol=1e-13)


def test_integrand_oscillator_qp():
    def fn(q, p):
        return Jet(q[..., 0] * p[..., 0], p, q)

    G, H, frame = BundleJet(fn), oscillator_hamiltonian(1.0, 1.0), coordinate_frame(1)
    npt.assert_allclose(virial_integrand_tstarq(G, H, frame, [1.0], [1.0]), 0.0)
    npt.assert_allclose(virial_integrand_tstarq(G, H, frame, [1.0], [2.0]), 3.0)


def test_integrand_kepler_circular():
    G = linear_virial_function(dilation_field())
    npt.assert_allclose(virial_integrand_tstarq(G, KEPLER_H, POLAR, [1.0, 0.0], [0.0, 1.0]), 0.0, atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(states)
def test_antisymmetry(s):
    q, p = s
    frame, H, G = twisted_frame(), anharmonic_hamiltonian(), cubic_function()
    a = virial_integrand_tstarq(G, H, frame, q, p)
    b = virial_integrand_tstarq(H, G, frame, q, p)
    npt.assert_allclose(a, -b, rtol=1e-10, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(states)
def test_brackets_equal_minus_integrand(s):
    q, p = s
    frame, H, D = twisted_frame(), anharmonic_hamiltonian(), swirl_field()
    G = cubic_function()
    npt.assert_allclose(virial_bracket_tstarq(G, H, frame, q, p), -virial_integrand_tstarq(G, H, frame, q, p), rtol=1e-10, atol=1e-12)
    lin = virial_integrand_tstarq(linear_virial_function(D), H, frame, q, p)
    npt.assert_allclose(linear_virial_bracket(D, H, frame, q, p), -lin, rtol=1e-10, atol=1e-12)


# -- along trajectories ----------------------------------------------------------------


def _hflow(H, frame, n):
    return lambda t, s: np.concatenate(hamiltonian_flow_field(H, frame, s[:n], s[n:]))


def _lflow(L, frame, n):
    return lambda t, s: np.concatenate(lagrangian_flow_field(L, frame, s[:n], s[n:]))


def test_boundary_identity(twisted):
    H, G = anharmonic_hamiltonian(), linear_virial_function(swirl_field())
    s0 = np.array([0.1, 0.0, -0.1, 0.2, -0.1, 0.1])
    traj = integrate(_hflow(H, twisted, 3), s0, IntegratorSettings(0.5, dense_dt=5e-4), guard=lambda s: twisted.domain_guard(s[:3]))
    q, p = traj.states[:, :3], traj.states[:, 3:]
    rate = np.array([virial_integrand_tstarq(G, H, twisted, a, b) for a, b in zip(q, p)])
    g = G(q, p).value
    npt.assert_allclose(simpson(rate, x=traj.times), g[-1] - g[0], rtol=1e-8, atol=1e-10)
    h = H(q, p).value
    assert np.max(np.abs(h - h[0])) <= 1e-8 * (1 + abs(h[0]))


def test_legendre_consistency_kepler():
    L, H = kepler_lagrangian(1.0, 1.0), KEPLER_H
    s0 = np.array([0.5, 0.0, 0.0, np.sqrt(0.75)])
    cfg = IntegratorSettings(20.0, rtol=1e-12, atol=1e-14, dense_dt=0.01)
    lag = integrate(_lflow(L, POLAR, 2), s0, cfg)
    pi0 = L(s0[:2], s0[2:]).d_fibre
    ham = integrate(_hflow(H, POLAR, 2), np.concatenate([s0[:2], pi0]), cfg)
    pi = L(lag.states[:, :2], lag.states[:, 2:]).d_fibre
    npt.assert_allclose(ham.states[:, :2], lag.states[:, :2], atol=1e-8)
    npt.assert_allclose(ham.states[:, 2:], pi, atol=1e-8)


def test_legendre_consistency_oscillator():
    L, H = oscillator_lagrangian(2.0, 3.0), oscillator_hamiltonian(2.0, 3.0)
    cfg = IntegratorSettings(20.0, rtol=1e-12, atol=1e-14, dense_dt=0.01)
    lag = integrate(_lflow(L, coordinate_frame(1), 1), [1.0, 0.5], cfg)
    ham = integrate(_hflow(H, coordinate_frame(1), 1), [1.0, 1.0], cfg)
    npt.assert_allclose(ham.states[:, 0], lag.states[:, 0], atol=1e-8)
    npt.assert_allclose(ham.states[:, 1], 2.0 * lag.states[:, 1], atol=1e-8)
