import numpy as np
import pytest

from virialkit import frames
from virialkit.jets import BundleJet, Jet


def twisted_frame() -> frames.FrameField:
    """A non-holonomic 3-D frame with hand-written Jacobian, used by property tests."""

    def beta(q):
        x, y, z = q[..., 0], q[..., 1], q[..., 2]
        B = np.zeros(q.shape[:-1] + (3, 3))
        B[..., 0, 0] = 1.0
        B[..., 0, 1] = z
        B[..., 1, 1] = 1.0
        B[..., 1, 2] = np.sin(x)
        B[..., 2, 0] = 0.5 * y**2
        B[..., 2, 2] = 2.0 + np.cos(z)
        return B

    def beta_jac(q):
        x, y, z = q[..., 0], q[..., 1], q[..., 2]
        dB = np.zeros(q.shape[:-1] + (3, 3, 3))
        dB[..., 0, 1, 2] = 1.0
        dB[..., 1, 2, 0] = np.cos(x)
        dB[..., 2, 0, 1] = y
        dB[..., 2, 2, 2] = -np.sin(z)
        return dB

    def guard(q):
        return np.all(np.abs(q) < 0.6, axis=-1)

    return frames.FrameField(3, beta, beta_jac, guard, name="twisted")


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


@pytest.fixture
def twisted():
    return twisted_frame()


def gyroscopic_lagrangian():
    """``L = 1/2 sum m_a(q) w_a^2 + a(q) . w - V(q)`` on three dimensions."""

    def parts(q):
        x, y, z = q[..., 0], q[..., 1], q[..., 2]
        o, zero = np.ones_like(x), np.zeros_like(x)
        m = np.stack([1 + x**2, 2 + np.sin(y), 1.5 + x * z], axis=-1)
        dm = np.stack(  # [a, i]
            [
                np.stack([2 * x, zero, zero], -1),
                np.stack([zero, np.cos(y), zero], -1),
                np.stack([z, zero, x], -1),
            ],
            axis=-2,
        )
        a = np.stack([y, zero, x * z], axis=-1)
        da = np.stack(
            [np.stack([zero, o, zero], -1), np.stack([zero, zero, zero], -1), np.stack([z, zero, x], -1)], axis=-2
        )
        V = x**2 + np.cos(y) * z
        dV = np.stack([2 * x, -np.sin(y) * z, np.cos(y)], axis=-1)
        return m, dm, a, da, V, dV

    def fn(q, w):
        m, dm, a, da, V, dV = parts(q)
        value = 0.5 * np.sum(m * w**2, -1) + np.sum(a * w, -1) - V
        d_base = 0.5 * np.einsum("...ai,...a->...i", dm, w**2) + np.einsum("...ai,...a->...i", da, w) - dV
        d_fibre = m * w + a
        d2_fibre = m[..., :, None] * np.eye(3)
        d2_bf = np.einsum("...ai,...a->...ia", dm, w) + np.swapaxes(da, -1, -2)
        return Jet(value, d_base, d_fibre, d2_fibre, d2_bf)

    return BundleJet(fn, name="gyroscopic")


def free_particle_lagrangian(n: int, m: float = 1.0):

    def kinetic(q, w):
        batch = np.broadcast_shapes(q.shape[:-1], w.shape[:-1])
        return Jet(
            0.5 * m * np.sum(w**2, -1),
            np.zeros(batch + (n,)),
            m * w,
            np.broadcast_to(m * np.eye(n), batch + (n, n)),
            np.zeros(batch + (n, n)),
        )

    def potential(q, w):
        batch = np.broadcast_shapes(q.shape[:-1], w.shape[:-1])
        z = np.zeros(batch + (n,))
        return Jet(np.zeros(batch), z, z, np.zeros(batch + (n, n)), np.zeros(batch + (n, n)))

    return BundleJet(kinetic, name="free", kinetic=BundleJet(kinetic), potential=BundleJet(potential))


def _d1(f, x, i, h):
    e = np.zeros_like(x)
    e[i] = h
    return (-f(x + 2 * e) + 8 * f(x + e) - 8 * f(x - e) + f(x - 2 * e)) / (12 * h)


def fd_euler_lagrange(L, q, v, h=1e-3):
    """Coordinate accelerations of ``L(q, v)`` from finite differences of values only."""
    q, v = np.asarray(q, float), np.asarray(v, float)
    n = q.size

    def dv(a):
        return lambda qq, vv: _d1(lambda u: L(qq, u), vv, a, h)

    dLdq = np.array([_d1(lambda x: L(x, v), q, i, h) for i in range(n)])
    M = np.array([[_d1(lambda u: dv(a)(q, u), v, b, h) for b in range(n)] for a in range(n)])
    C = np.array([[_d1(lambda x: dv(a)(x, v), q, i, h) for i in range(n)] for a in range(n)])
    return np.linalg.solve(M, dLdq - C @ v)


def anharmonic_hamiltonian():
    """``H = 1/2 sum c_a(q) pi_a^2 + q0 q1^2 + q2^4``, positive ``c``."""

    def fn(q, p):
        x, y, z = q[..., 0], q[..., 1], q[..., 2]
        zero = np.zeros_like(x)
        c = np.stack([1 + x**2, 2 + np.sin(y), 1.5 + 0 * z], -1)
        dc = np.stack([np.stack([2 * x, zero, zero], -1), np.stack([zero, np.cos(y), zero], -1), np.zeros(x.shape + (3,))], -2)
        value = 0.5 * np.sum(c * p**2, -1) + x * y**2 + z**4
        d_base = 0.5 * np.einsum("...ai,...a->...i", dc, p**2) + np.stack([y**2, 2 * x * y, 4 * z**3], -1)
        return Jet(value, d_base, c * p)

    return BundleJet(fn, name="anharmonic")


def pytest_terminal_summary(terminalreporter):
    module = __import__("sys").modules.get("test_acceptance")
    lines = getattr(module, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
