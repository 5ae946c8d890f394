import numpy as np
import numpy.testing as npt
from hypothesis import given, settings, strategies as st

from conftest import _d1, anharmonic_hamiltonian, twisted_frame
from virialkit.algebroid import lie_algebra, tangent_algebroid_from_frame
from virialkit.algebroid_hamiltonian import (
    algebroid_hamilton_field,
    canonical_symplectic_section,
    hamiltonian_section,
    linear_dual_function,
    virial_bracket_dual,
    virial_integrand_dual,
)
from virialkit.averaging import IntegratorSettings, detect_period, integrate, time_average
from virialkit.frames import coordinate_frame
from virialkit.jets import BundleJet, Jet, SectionField, SectionValue, constant_section
from virialkit.models import heavy_top_algebroid, heavy_top_hamiltonian, rigid_body_hamiltonian, so3
from virialkit.tstarq_dynamics import hamiltonian_flow_field

I = np.diag([1.0, 2.0, 3.0])
POINT = np.zeros(0)


def casimir():
    return BundleJet(lambda x, mu: Jet(np.sum(mu * mu, -1), np.zeros(mu.shape[:-1] + (0,)), 2 * mu), name="casimir")


def heavy_top_state(rng):
    g = rng.normal(size=3)
    return g / np.linalg.norm(g), rng.normal(size=3)


def swirl_section():
    def fn(x):
        s = np.stack([x[..., 1] * x[..., 2], np.cos(x[..., 0]), 1.0 + 0 * x[..., 0]], -1)
        jac = np.zeros(x.shape[:-1] + (3, 3))
        jac[..., 0, 1], jac[..., 0, 2] = x[..., 2], x[..., 1]
        jac[..., 1, 0] = -np.sin(x[..., 0])
        return SectionValue(s, jac)

    return SectionField(fn)


# -- canonical symplectic section ----------------------------------------------


def test_abelian_is_canonical():
    S = canonical_symplectic_section(lie_algebra(np.zeros((2, 2, 2))), POINT, [0.3, 1.0])
    npt.assert_array_equal(S.matrix, [[0, 0, 1, 0], [0, 0, 0, 1], [-1, 0, 0, 0], [0, -1, 0, 0]])
    npt.assert_array_equal(S.liouville, [0.3, 1.0])


def test_so3_block():
    S = canonical_symplectic_section(so3(), POINT, [1.0, 1.0, 1.0])
    npt.assert_array_equal(S.matrix[:3, :3], [[0, 1, -1], [-1, 0, 1], [1, -1, 0]])


def test_antisymmetric(rng):
    g, mu = heavy_top_state(rng)
    M = canonical_symplectic_section(heavy_top_algebroid(), g, mu).matrix
    npt.assert_array_equal(M + M.T, 0.0)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-0.4, 0.4), min_size=3, max_size=3), st.lists(st.floats(-3, 3), min_size=3, max_size=3))
def test_symplectic_consistency(x, mu):
    # Hamiltonian section contracted into omega_A is (rho^T dH/dx, dH/dmu)
    A, H = tangent_algebroid_from_frame(twisted_frame()), anharmonic_hamiltonian()
    comps = hamiltonian_section(H, A, x, mu)
    h = H(np.array(x), np.array(mu))
    expected = np.concatenate([A.rho(np.array(x)).T @ h.d_base, h.d_fibre])
    got = comps @ canonical_symplectic_section(A, x, mu).matrix
    npt.assert_allclose(got, expected, rtol=1e-10, atol=1e-10)


def test_symplectic_consistency_heavy_top(rng):
    A, H = heavy_top_algebroid(), heavy_top_hamiltonian(I, 1.3, np.array([0.0, 0.0, 1.0]))
    for _ in range(5):
        g, mu = heavy_top_state(rng)
        h = H(g, mu)
        got = hamiltonian_section(H, A, g, mu) @ canonical_symplectic_section(A, g, mu).matrix
        npt.assert_allclose(got, np.concatenate([A.rho(g).T @ h.d_base, h.d_fibre]), rtol=1e-12, atol=1e-12)


# -- Hamiltonian field --------------------------------------------------------------


def test_rigid_body_field():
    _, mudot = algebroid_hamilton_field(rigid_body_hamiltonian(I), so3(), POINT, [1.0, 1.0, 1.0])
    npt.assert_allclose(mudot, [-1 / 6, 2 / 3, -1 / 2], rtol=1e-14)
    npt.assert_allclose(mudot, np.cross([1, 1, 1], np.linalg.solve(I, [1, 1, 1])), rtol=1e-14)


def test_abelian_over_point_conserves_mu():
    _, mudot = algebroid_hamilton_field(rigid_body_hamiltonian(I), lie_algebra(np.zeros((3, 3, 3))), POINT, [1.0, -2.0, 0.5])
    npt.assert_array_equal(mudot, 0.0)


def test_identity_tangent_algebroid_is_canonical(rng):
    A, H = tangent_algebroid_from_frame(coordinate_frame(3)), anharmonic_hamiltonian()
    value = lambda q, p: float(H(q, p).value)
    for _ in range(3):
        q, p = rng.uniform(-0.5, 0.5, 3), rng.normal(size=3)
        xdot, mudot = algebroid_hamilton_field(H, A, q, p)
        npt.assert_allclose(xdot, [_d1(lambda u: value(q, u), p, i, 1e-3) for i in range(3)], rtol=1e-8, atol=1e-8)
        npt.assert_allclose(mudot, [-_d1(lambda u: value(u, p), q, i, 1e-3) for i in range(3)], rtol=1e-8, atol=1e-8)


def test_tangent_algebroid_matches_tstarq(twisted, rng):
    A, H = tangent_algebroid_from_frame(twisted), anharmonic_hamiltonian()
    for _ in range(5):
        q, p = rng.uniform(-0.4, 0.4, 3), rng.normal(size=3)
        for a, b in zip(algebroid_hamilton_field(H, A, q, p), hamiltonian_flow_field(H, twisted, q, p)):
            npt.assert_allclose(a, b, rtol=1e-12, atol=1e-14)


# -- virial integrand ----------------------------------------------------------------


def test_integrand_of_H_vanishes(rng):
    A, H = heavy_top_algebroid(), heavy_top_hamiltonian(I, 1.3, np.array([0.0, 0.0, 1.0]))
    g, mu = heavy_top_state(rng)
    npt.assert_allclose(virial_integrand_dual(H, H, A, g, mu), 0.0, atol=1e-13)


def test_rigid_body_linear_G():
    G = linear_dual_function(constant_section([1.0, 0.0, 0.0], 0))
    npt.assert_allclose(virial_integrand_dual(G, rigid_body_hamiltonian(I), so3(), POINT, [1.0, 1.0, 1.0]), -1 / 6, rtol=1e-14)


def test_casimir_integrand_vanishes(rng):
    mu = rng.normal(size=3)
    npt.assert_allclose(virial_integrand_dual(casimir(), rigid_body_hamiltonian(I), so3(), POINT, mu), 0.0, atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-0.4, 0.4), min_size=3, max_size=3), st.lists(st.floats(-3, 3), min_size=3, max_size=3))
def test_bracket_is_integrand(x, mu):
    A, H = tangent_algebroid_from_frame(twisted_frame()), anharmonic_hamiltonian()
    G = linear_dual_function(swirl_section())
    npt.assert_allclose(virial_bracket_dual(G, H, A, x, mu), virial_integrand_dual(G, H, A, x, mu), rtol=1e-10, atol=1e-12)


# -- along trajectories -----------------------------------------------------------------


def _flow(H, A):
    n = A.dim_base
    return lambda t, s: np.concatenate(algebroid_hamilton_field(H, A, s[:n], s[n:]))


def test_casimir_conservation():
    traj = integrate(_flow(rigid_body_hamiltonian(I), so3()), [1.0, 2.0, 3.0], IntegratorSettings(50.0, rtol=1e-11, atol=1e-13))
    c = np.sum(traj.states**2, -1)
    assert np.max(np.abs(c / c[0] - 1)) < 1e-8


def test_boundary_identity_heavy_top():
    A, H = heavy_top_algebroid(), heavy_top_hamiltonian(I, 1.3, np.array([0.0, 0.0, 1.0]))
    G = linear_dual_function(swirl_section())
    s0 = np.array([0.6, 0.0, 0.8, 0.4, -0.5, 2.0])
    traj = integrate(_flow(H, A), s0, IntegratorSettings(10.0, dense_dt=1e-3))
    x, mu = traj.states[:, :3], traj.states[:, 3:]
    res = time_average(lambda s: virial_integrand_dual(G, H, A, s[:, :3], s[:, 3:]), traj, G=lambda s: G(s[:, :3], s[:, 3:]).value)
    npt.assert_allclose(res.value, res.boundary_term, atol=1e-7)


def test_lie_poisson_average_vanishes_over_period():
    H, A = rigid_body_hamiltonian(I), so3()
    traj = integrate(_flow(H, A), [1.0, 2.0, 3.0], IntegratorSettings(20.0, rtol=1e-12, atol=1e-14, dense_dt=0.01))
    tau = detect_period(traj, field_fn=_flow(H, A))
    assert tau is not None and tau < 20.0
    for a in range(3):
        # mu_g C^g_ab dH/dmu_b = -mudot_a
        F = lambda s: np.einsum("cb,...c,...b->...", A.C(POINT)[:, a, :], s, s @ np.linalg.inv(I))
        avg = time_average(F, traj, period=tau)
        npt.assert_allclose(avg.value, 0.0, atol=1e-6)
