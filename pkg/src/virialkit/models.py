"""Registry of built-in mechanical models.

Each model is built by :func:`build` into a validated
:class:`ModelDescriptor` that can produce :class:`~virialkit.system.Dynamics`
for every formalism it supports.

so(3) convention: ``C^c_{ab} = epsilon_{abc}`` (the cross product), which
yields Euler's equations ``I dw/dt = I w x w`` and ``dmu/dt = mu x I^-1 mu``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Callable, Optional

import numpy as np

from . import algebroid as alg
from . import algebroid_hamiltonian as ah
from . import algebroid_lagrangian as al
from . import frames
from . import tq_dynamics as tq
from . import tstarq_dynamics as tsq
from .errors import InvalidParams, JetMismatch, UnknownModel, ValidationFailure
from .jets import BundleJet, Jet, SectionField, SectionValue, bundle_jet_errors, constant_section, require, section_errors
from .system import Dynamics, VirialFunction

AXES = ("x", "y", "z")
STRUCTURE_TOL = 1e-8
JET_TOL = 1e-5


@dataclass(frozen=True)
class Constant:
    value: float
    provenance: str  # "closed form", "derived", ...


@dataclass
class ModelDescriptor:
    name: str
    formalisms: tuple[str, ...]
    params: dict[str, Any]
    units: dict[str, str]
    initial_states: dict[str, dict[str, np.ndarray]]
    constants: dict[str, Constant]
    builders: dict[str, Callable[[], Dynamics]] = field(repr=False, default_factory=dict)
    description: str = ""
    frame: Optional[frames.FrameField] = field(repr=False, default=None)
    jets: dict[str, BundleJet] = field(repr=False, default_factory=dict)
    sections: dict[str, SectionField] = field(repr=False, default_factory=dict)
    algebroids: list[alg.AlgebroidLocal] = field(repr=False, default_factory=list)
    checks: dict[str, float] = field(default_factory=dict)

    def dynamics(self, formalism: str | None = None) -> Dynamics:
        formalism = formalism or self.formalisms[0]
        if formalism not in self.builders:
            raise InvalidParams(f"model {self.name} has no {formalism} formalism (has {', '.join(self.formalisms)})")
        dyn = self.builders[formalism]()
        geometry = self.frame if formalism in ("tq", "tstarq") else self.algebroids[0]
        return replace(dyn, section_virial=section_virial_factory(formalism, self.jets[formalism], geometry, dyn.dim_base))

    def initial_state(self, preset: str | None = None, formalism: str | None = None) -> np.ndarray:
        formalism = formalism or self.formalisms[0]
        preset = preset or next(iter(self.initial_states))
        try:
            return np.array(self.initial_states[preset][formalism], dtype=float)
        except KeyError:
            raise InvalidParams(f"model {self.name} has no initial state {preset!r} for {formalism}") from None

    def virial_names(self) -> dict[str, list[str]]:
        return {f: list(self.dynamics(f).virials) for f in self.formalisms}


def section_virial_factory(formalism: str, jet: BundleJet, geometry, dim_base: int):
    """Virial functions fibre-linear along a constant section (frame or basis components)."""

    def make(components, name: str) -> VirialFunction:
        sec = constant_section(np.asarray(components, dtype=float), dim_base, name)
        if formalism == "tq":
            G = tq.theta_virial(jet, sec, name)

            def integrand(x, y):
                return tq.virial_integrand_tq(G, jet, geometry, x, y)

        elif formalism == "tstarq":
            G = tsq.linear_virial_function(sec, name)

            def integrand(x, y):
                return tsq.virial_integrand_tstarq(G, jet, geometry, x, y)

        elif formalism == "algebroid_l":
            G = al.virial_function_from_section(jet, sec, name)

            def integrand(x, y):
                return al.virial_integrand_section(jet, sec, geometry, x, y)

        else:
            G = ah.linear_dual_function(sec, name)

            def integrand(x, y):
                return ah.virial_integrand_dual(G, jet, geometry, x, y)

        return VirialFunction(name, G, integrand, f"fibre-linear along the constant section {list(components)}")

    return make


def _merge(defaults: dict, overrides: dict | None, name: str) -> dict:
    overrides = dict(overrides or {})
    unknown = set(overrides) - set(defaults)
    if unknown:
        raise InvalidParams(f"unknown parameters for {name}: {sorted(unknown)}")
    out = dict(defaults)
    out.update(overrides)
    return out


def _positive(params: dict, *keys: str) -> None:
    for k in keys:
        v = params[k]
        if not (np.isscalar(v) and np.isfinite(v) and v > 0):
            raise InvalidParams(f"parameter {k} must be a positive number, got {v!r}")


def inertia_matrix(value) -> np.ndarray:
    """Symmetric positive definite inertia from a diagonal or a full 3x3 matrix."""
    I = np.asarray(value, dtype=float)
    if I.shape == (3,):
        I = np.diag(I)
    if I.shape != (3, 3) or not np.all(np.isfinite(I)):
        raise InvalidParams(f"inertia must be 3 diagonal entries or a 3x3 matrix, got shape {I.shape}")
    if np.max(np.abs(I - I.T)) > 1e-12 * np.max(np.abs(I)):
        raise InvalidParams("inertia tensor is not symmetric")
    eig = np.linalg.eigvalsh(I)
    if eig[0] <= 0:
        raise InvalidParams(f"inertia tensor is not positive definite (eigenvalues {eig.tolist()})")
    return I


def _bcast(a: np.ndarray, shape: tuple) -> np.ndarray:
    """Read-only broadcast that skips the call when no batching is needed."""
    return a if a.shape == shape else np.broadcast_to(a, shape)


# -- Kepler problem in polar quasi-velocities --------------------------------


def polar_frame(r_min: float = 0.0) -> frames.FrameField:
    """``X_1 = d/dr``, ``X_2 = r^-2 d/dtheta`` on the punctured plane."""

    def beta(q):
        r = q[..., 0]
        B = np.zeros(q.shape[:-1] + (2, 2))
        B[..., 0, 0] = 1.0
        B[..., 1, 1] = 1.0 / r**2
        return B

    def beta_jac(q):
        r = q[..., 0]
        dB = np.zeros(q.shape[:-1] + (2, 2, 2))
        dB[..., 1, 1, 0] = -2.0 / r**3
        return dB

    def guard(q):
        return q[..., 0] > r_min

    return frames.FrameField(2, beta, beta_jac, guard, name="polar")


def kepler_lagrangian(m: float, k: float) -> BundleJet:
    """``L = m/2 (w1^2 + w2^2 / r^2) + k / r`` with ``w2 = r^2 dtheta/dt``."""

    def kinetic(q, w):
        r, w1, w2 = q[..., 0], w[..., 0], w[..., 1]
        z = np.zeros_like(r)
        value = 0.5 * m * (w1**2 + w2**2 / r**2)
        d_base = np.stack([-m * w2**2 / r**3, z], axis=-1)
        d_fibre = np.stack([m * w1, m * w2 / r**2], axis=-1)
        d2_fibre = np.zeros(r.shape + (2, 2))
        d2_fibre[..., 0, 0] = m
        d2_fibre[..., 1, 1] = m / r**2
        d2_bf = np.zeros(r.shape + (2, 2))
        d2_bf[..., 0, 1] = -2.0 * m * w2 / r**3
        return Jet(value, d_base, d_fibre, d2_fibre, d2_bf)

    def potential(q, w):
        r = q[..., 0]
        z = np.zeros(r.shape + (2,))
        d_base = np.stack([k / r**2, np.zeros_like(r)], axis=-1)
        return Jet(-k / r, d_base, z, np.zeros(r.shape + (2, 2)), np.zeros(r.shape + (2, 2)))

    def lagrangian(q, w):
        t, v = kinetic(q, w), potential(q, w)
        return Jet(*(a - b for a, b in zip(t, v)))

    T = BundleJet(kinetic, name="kepler_T")
    V = BundleJet(potential, name="kepler_V")
    return BundleJet(lagrangian, name="kepler_L", kinetic=T, potential=V)


def kepler_hamiltonian(m: float, k: float) -> BundleJet:
    """``H = pi1^2 / 2m + r^2 pi2^2 / 2m - k / r``."""

    def fn(q, pi):
        r, p1, p2 = q[..., 0], pi[..., 0], pi[..., 1]
        value = (p1**2 + r**2 * p2**2) / (2 * m) - k / r
        d_base = np.stack([r * p2**2 / m + k / r**2, np.zeros_like(r)], axis=-1)
        d_fibre = np.stack([p1 / m, r**2 * p2 / m], axis=-1)
        return Jet(value, d_base, d_fibre)

    return BundleJet(fn, name="kepler_H")


def dilation_field() -> SectionField:
    """``D = r d/dr``: frame components ``(r, 0)``."""

    def fn(q):
        f = np.zeros(q.shape[:-1] + (2,))
        f[..., 0] = q[..., 0]
        jac = np.zeros(q.shape[:-1] + (2, 2))
        jac[..., 0, 0] = 1.0
        return SectionValue(f, jac)

    return SectionField(fn, name="dilation")


def coordinate_jet(index: int, on_fibre: bool, dim_base: int, dim_fibre: int, name: str = "") -> BundleJet:
    """The coordinate function ``x^index`` (or ``y^index``) as a jet."""

    def fn(x, y):
        batch = np.broadcast_shapes(x.shape[:-1], y.shape[:-1])
        d_base = np.zeros(batch + (dim_base,))
        d_fibre = np.zeros(batch + (dim_fibre,))
        if on_fibre:
            d_fibre[..., index] = 1.0
            value = np.broadcast_to(y[..., index], batch)
        else:
            d_base[..., index] = 1.0
            value = np.broadcast_to(x[..., index], batch)
        return Jet(np.array(value), d_base, d_fibre)

    return BundleJet(fn, name=name)


def _kepler_params(params):
    p = _merge({"m": 1.0, "k": 1.0, "a": 1.0, "e": 0.5, "r_min": None}, params, "kepler")
    _positive(p, "m", "k", "a")
    if not (0.0 <= p["e"] < 1.0):
        raise InvalidParams(f"eccentricity must lie in [0, 1), got {p['e']!r}")
    if p["r_min"] is None:
        p["r_min"] = 1e-3 * p["a"]
    _positive(p, "r_min")
    return p


def _kepler_states(p) -> dict[str, dict[str, np.ndarray]]:
    m, k, a, e = p["m"], p["k"], p["a"], p["e"]
    r_p = a * (1.0 - e)
    w2 = np.sqrt(k * a * (1.0 - e**2) / m)  # r^2 dtheta/dt is conserved
    w2_circ = np.sqrt(k * a / m)
    tq_ecc = np.array([r_p, 0.0, 0.0, w2])
    tq_circ = np.array([a, 0.0, 0.0, w2_circ])

    def cot(s):
        return np.array([s[0], s[1], m * s[2], m * s[3] / s[0] ** 2])

    return {
        "eccentric": {"tq": tq_ecc, "algebroid_l": tq_ecc, "tstarq": cot(tq_ecc)},
        "circular": {"tq": tq_circ, "algebroid_l": tq_circ, "tstarq": cot(tq_circ)},
    }


def _kepler_descriptor(name: str, formalisms, params) -> ModelDescriptor:
    p = _kepler_params(params)
    m, k, a = p["m"], p["k"], p["a"]
    frame = polar_frame(p["r_min"])
    L = kepler_lagrangian(m, k)
    H = kepler_hamiltonian(m, k)
    D = dilation_field()
    names_tq = ("r", "theta", "w1", "w2")

    def guard(q):
        return q[..., 0] > p["r_min"]

    def build_tq():
        G = tq.theta_virial(L, D, name="dilation")

        def mechanical(q, w):
            lhs, rhs = tq.mechanical_virial_sides(L, D, frame, q, w)
            return lhs - rhs

        virials = {
            "dilation": VirialFunction(
                "dilation", G, lambda q, w: tq.virial_integrand_tq(G, L, frame, q, w), "G = m r w1, integrand Gamma_L(G)"
            ),
            "dilation_lift": VirialFunction(
                "dilation_lift", G, lambda q, w: tq.lift_integrand_tq(L, D, frame, q, w), "G = m r w1, integrand D^c(L)"
            ),
            "dilation_mechanical": VirialFunction(
                "dilation_mechanical", G, mechanical, "G = m r w1, integrand D^c(T) - D(V) = 2T + V"
            ),
            "dilation_boltzmann": VirialFunction(
                "dilation_boltzmann",
                G,
                lambda q, w: -tq.virial_bracket_tq(G, L, frame, q, w),
                "G = m r w1, integrand minus the Boltzmann-form bracket",
            ),
            "radial_velocity": VirialFunction(
                "radial_velocity",
                coordinate_jet(0, True, 2, 2, "w1"),
                lambda q, w: tq.virial_integrand_tq(coordinate_jet(0, True, 2, 2), L, frame, q, w),
                "G = w1",
            ),
        }
        return Dynamics(
            name,
            "tq",
            2,
            2,
            names_tq,
            lambda q, w: tq.lagrangian_flow_field(L, frame, q, w),
            lambda q, w: tq.energy(L, q, w),
            guard,
            virials,
            {"w2": lambda q, w: w[..., 1]},
            angles=(1,),
        )

    def build_algebroid_l():
        A = alg.tangent_algebroid_from_frame(frame)
        G = al.virial_function_from_section(L, D, name="dilation")
        w1 = coordinate_jet(0, True, 2, 2, "w1")
        virials = {
            "dilation": VirialFunction(
                "dilation", G, lambda x, y: al.virial_integrand_section(L, D, A, x, y), "G = m r w1, integrand rho(D^c) L"
            ),
            "radial_velocity": VirialFunction(
                "radial_velocity", w1, lambda x, y: al.virial_integrand_fibre(w1, L, A, x, y), "G = w1"
            ),
        }
        return Dynamics(
            name,
            "algebroid_l",
            2,
            2,
            names_tq,
            lambda x, y: al.algebroid_lagrange_field(L, A, x, y),
            lambda x, y: al.energy_algebroid(L, x, y),
            guard,
            virials,
            {"w2": lambda x, y: y[..., 1]},
            angles=(1,),
        )

    def build_tstarq():
        G = tsq.linear_virial_function(D, name="dilation")
        virials = {
            "dilation": VirialFunction(
                "dilation", G, lambda q, pi: tsq.virial_integrand_tstarq(G, H, frame, q, pi), "G = pi1 r, integrand X_H(G)"
            ),
            "dilation_linear": VirialFunction(
                "dilation_linear",
                G,
                lambda q, pi: -tsq.linear_virial_bracket(D, H, frame, q, pi),
                "G = pi1 r, integrand minus the fibre-linear bracket",
            ),
            "dilation_bracket": VirialFunction(
                "dilation_bracket",
                G,
                lambda q, pi: -tsq.virial_bracket_tstarq(G, H, frame, q, pi),
                "G = pi1 r, integrand minus the quasi-momentum bracket",
            ),
        }
        return Dynamics(
            name,
            "tstarq",
            2,
            2,
            ("r", "theta", "pi1", "pi2"),
            lambda q, pi: tsq.hamiltonian_flow_field(H, frame, q, pi),
            lambda q, pi: H(q, pi).value,
            guard,
            virials,
            {"p_theta": lambda q, pi: q[..., 0] ** 2 * pi[..., 1]},
            angles=(1,),
        )

    builders = {"tq": build_tq, "algebroid_l": build_algebroid_l, "tstarq": build_tstarq}
    desc = ModelDescriptor(
        name,
        tuple(formalisms),
        p,
        {"m": "mass", "k": "energy*length (gravitational constant times both masses)", "a": "length", "e": "1", "r_min": "length"},
        _kepler_states(p),
        {
            "period": Constant(2 * np.pi * np.sqrt(a**3 * m / k), "closed form (Kepler's third law)"),
            "energy": Constant(-k / (2 * a), "closed form (vis-viva)"),
            "virial_2T_plus_V": Constant(0.0, "closed form (<2T> = -<V>)"),
        },
        {f: builders[f] for f in formalisms},
        description=(
            "planar Kepler problem in quasi-momenta pi1 = m dr/dt, pi2 = m dtheta/dt"
            if formalisms == ("tstarq",)
            else "planar Kepler problem in quasi-velocities w1 = dr/dt, w2 = r^2 dtheta/dt"
        ),
        frame=frame,
        jets={"tq": L, "algebroid_l": L, "tstarq": H},
        sections={"dilation": D},
        algebroids=[alg.tangent_algebroid_from_frame(frame)] if "algebroid_l" in formalisms else [],
    )
    return desc


# -- 1-D harmonic oscillator --------------------------------------------------


def oscillator_lagrangian(m: float, k: float) -> BundleJet:
    def kinetic(q, w):
        z = np.zeros(q.shape[:-1] + (1, 1))
        return Jet(0.5 * m * w[..., 0] ** 2, np.zeros_like(q), m * w, z + m, z)

    def potential(q, w):
        z = np.zeros(q.shape[:-1] + (1, 1))
        return Jet(0.5 * k * q[..., 0] ** 2, k * q, np.zeros_like(w), z, z)

    def fn(q, w):
        t, v = kinetic(q, w), potential(q, w)
        return Jet(*(a - b for a, b in zip(t, v)))

    return BundleJet(fn, name="oscillator_L", kinetic=BundleJet(kinetic), potential=BundleJet(potential))


def oscillator_hamiltonian(m: float, k: float) -> BundleJet:
    def fn(q, p):
        return Jet(0.5 * p[..., 0] ** 2 / m + 0.5 * k * q[..., 0] ** 2, k * q, p / m)

    return BundleJet(fn, name="oscillator_H")


def _oscillator_descriptor(params) -> ModelDescriptor:
    p = _merge({"m": 1.0, "k": 1.0, "q0": 1.0, "v0": 0.0}, params, "oscillator")
    _positive(p, "m")
    if not (np.isfinite(p["k"]) and p["k"] >= 0):
        raise InvalidParams("stiffness k must be >= 0 (k = 0 is the free particle)")
    m, k = p["m"], p["k"]
    frame = frames.coordinate_frame(1)
    L = oscillator_lagrangian(m, k)
    H = oscillator_hamiltonian(m, k)
    D = SectionField(lambda q: SectionValue(q.copy(), np.ones(q.shape + (1,))), name="dilation")

    def always(x):
        return np.ones(x.shape[:-1], dtype=bool)

    def build_tq():
        G = tq.theta_virial(L, D, name="dilation")
        virials = {
            "dilation": VirialFunction(
                "dilation", G, lambda q, w: tq.virial_integrand_tq(G, L, frame, q, w), "G = m q w"
            ),
            "dilation_lift": VirialFunction(
                "dilation_lift", G, lambda q, w: tq.lift_integrand_tq(L, D, frame, q, w), "G = m q w, integrand D^c(L)"
            ),
        }
        return Dynamics(
            "oscillator", "tq", 1, 1, ("q", "w"),
            lambda q, w: tq.lagrangian_flow_field(L, frame, q, w),
            lambda q, w: tq.energy(L, q, w),
            always, virials,
        )

    def build_tstarq():
        G = tsq.linear_virial_function(D, name="dilation")
        virials = {
            "dilation": VirialFunction(
                "dilation", G, lambda q, pi: tsq.virial_integrand_tstarq(G, H, frame, q, pi), "G = q pi"
            ),
        }
        return Dynamics(
            "oscillator", "tstarq", 1, 1, ("q", "pi"),
            lambda q, pi: tsq.hamiltonian_flow_field(H, frame, q, pi),
            lambda q, pi: H(q, pi).value,
            always, virials,
        )

    s = np.array([p["q0"], p["v0"]])
    constants = {"energy": Constant(0.5 * m * p["v0"] ** 2 + 0.5 * k * p["q0"] ** 2, "closed form")}
    if k > 0:
        constants["period"] = Constant(2 * np.pi * np.sqrt(m / k), "closed form")
    desc = ModelDescriptor(
        "oscillator",
        ("tq", "tstarq"),
        p,
        {"m": "mass", "k": "force/length", "q0": "length", "v0": "length/time"},
        {"default": {"tq": s, "tstarq": np.array([s[0], m * s[1]])}},
        constants,
        {"tq": build_tq, "tstarq": build_tstarq},
        description="1-D harmonic oscillator (free particle when k = 0)",
        frame=frame,
        jets={"tq": L, "tstarq": H},
        sections={"dilation": D},
    )
    return desc


# -- rigid body and heavy top on so(3) ----------------------------------------


def so3() -> alg.AlgebroidLocal:
    return alg.lie_algebra(alg.levi_civita(), name="so(3)")


def rigid_body_lagrangian(I: np.ndarray) -> BundleJet:
    """``L = 1/2 w . I w`` over a point."""

    def fn(x, y):
        batch = y.shape[:-1]
        Iy = np.einsum("ab,...b->...a", I, y)
        return Jet(
            0.5 * np.einsum("...a,...a->...", y, Iy),
            np.zeros(batch + (0,)),
            Iy,
            np.broadcast_to(I, batch + (3, 3)).copy(),
            np.zeros(batch + (0, 3)),
        )

    return BundleJet(fn, name="rigid_body_L")


def rigid_body_hamiltonian(I: np.ndarray) -> BundleJet:
    """``H = 1/2 mu . I^-1 mu``."""
    Iinv = np.linalg.inv(I)

    def fn(x, mu):
        Om = np.einsum("ab,...b->...a", Iinv, mu)
        return Jet(0.5 * np.einsum("...a,...a->...", mu, Om), np.zeros(mu.shape[:-1] + (0,)), Om)

    return BundleJet(fn, name="rigid_body_H")


def heavy_top_algebroid() -> alg.AlgebroidLocal:
    """Action algebroid ``R^3 x so(3)`` restricted near the unit sphere: ``rho(gamma) a = gamma x a``."""
    eps = alg.levi_civita()  # eps[c, a, b] = epsilon_{abc}
    # rho[i, a] = epsilon_{i j a} gamma_j, so drho[i, a, j] = epsilon_{i j a}
    drho = np.einsum("aij->iaj", eps)

    def rho(x):
        return np.einsum("iaj,...j->...ia", drho, x)

    def rho_jac(x):
        return np.broadcast_to(drho, x.shape[:-1] + (3, 3, 3))

    def C(x):
        return np.broadcast_to(eps, x.shape[:-1] + (3, 3, 3))

    def C_jac(x):
        return np.zeros(x.shape[:-1] + (3, 3, 3, 3))

    def guard(x):
        return np.sum(x * x, axis=-1) > 0.25

    return alg.AlgebroidLocal(3, 3, rho, rho_jac, C, C_jac, guard, name="S2 x so(3)")


def heavy_top_lagrangian(I: np.ndarray, mgl: float, e: np.ndarray) -> BundleJet:
    """``L = 1/2 w . I w - mgl gamma . e``."""
    I = np.array(I, dtype=float)
    ge = mgl * np.asarray(e, dtype=float)
    neg_ge = -ge
    zero = np.zeros((3, 3))

    def kinetic(x, y):
        batch = np.broadcast_shapes(x.shape[:-1], y.shape[:-1])
        Iy = _bcast(y @ I, batch + (3,))
        return Jet(
            0.5 * np.sum(y * Iy, axis=-1) + np.zeros(batch),
            np.zeros(batch + (3,)),
            Iy,
            _bcast(I, batch + (3, 3)),
            _bcast(zero, batch + (3, 3)),
        )

    def potential(x, y):
        batch = np.broadcast_shapes(x.shape[:-1], y.shape[:-1])
        return Jet(
            x @ ge + np.zeros(batch),
            _bcast(ge, batch + (3,)),
            np.zeros(batch + (3,)),
            _bcast(zero, batch + (3, 3)),
            _bcast(zero, batch + (3, 3)),
        )

    def fn(x, y):
        batch = np.broadcast_shapes(x.shape[:-1], y.shape[:-1])
        Iy = _bcast(y @ I, batch + (3,))
        return Jet(
            0.5 * np.sum(y * Iy, axis=-1) - x @ ge,
            _bcast(neg_ge, batch + (3,)),
            Iy,
            _bcast(I, batch + (3, 3)),
            _bcast(zero, batch + (3, 3)),
        )

    return BundleJet(fn, name="heavy_top_L", kinetic=BundleJet(kinetic), potential=BundleJet(potential))


def heavy_top_hamiltonian(I: np.ndarray, mgl: float, e: np.ndarray) -> BundleJet:
    """``H = 1/2 mu . I^-1 mu + mgl gamma . e``."""
    Iinv = np.linalg.inv(I)

    def fn(x, mu):
        batch = np.broadcast_shapes(x.shape[:-1], mu.shape[:-1])
        Om = np.einsum("ab,...b->...a", Iinv, mu)
        return Jet(
            0.5 * np.einsum("...a,...a->...", mu, Om) + mgl * np.einsum("...i,i->...", x, e),
            np.broadcast_to(mgl * e, batch + (3,)).copy(),
            Om,
        )

    return BundleJet(fn, name="heavy_top_H")


def _project_gamma(states: np.ndarray) -> np.ndarray:
    """Rescale sampled gamma back to the unit sphere (off by default)."""
    out = np.array(states, dtype=float)
    out[..., :3] /= np.linalg.norm(out[..., :3], axis=-1, keepdims=True)
    return out


def heavy_top_parts(I, mgl, e) -> tuple[BundleJet, alg.AlgebroidLocal]:
    return heavy_top_lagrangian(np.asarray(I, float), float(mgl), np.asarray(e, float)), heavy_top_algebroid()


def _axis_virials(prefix: str, make_G, make_integrand, description: str) -> dict[str, VirialFunction]:
    out = {}
    for i, ax in enumerate(AXES):
        a = np.eye(3)[i]
        G = make_G(a, f"{prefix}_{ax}")
        out[f"{prefix}_{ax}"] = VirialFunction(f"{prefix}_{ax}", G, make_integrand(a, G), description.format(ax=ax))
    return out


def _rigid_params(params):
    p = _merge({"inertia": [1.0, 2.0, 3.0], "omega0": [1.0, 1.0, 1.0]}, params, "rigid_body")
    I = inertia_matrix(p["inertia"])
    w0 = np.asarray(p["omega0"], dtype=float)
    if w0.shape != (3,):
        raise InvalidParams("omega0 must have 3 components")
    return p, I, w0


def _rigid_body_descriptor(name: str, params) -> ModelDescriptor:
    p, I, w0 = _rigid_params(params)
    A = so3()
    L = rigid_body_lagrangian(I)
    H = rigid_body_hamiltonian(I)

    def always(x):
        return np.ones(x.shape[:-1], dtype=bool)

    def build_l():
        def section(a):
            return constant_section(a, 0)

        virials = _axis_virials(
            "momentum",
            lambda a, n: al.virial_function_from_section(L, section(a), name=n),
            lambda a, G: (lambda x, y, a=a: al.virial_integrand_section(L, section(a), A, x, y)),
            "G = e_{ax} . I w, integrand rho(sigma^c) L",
        )
        virials.update(
            _axis_virials(
                "fibre_momentum",
                lambda a, n: al.virial_function_from_section(L, section(a), name=n),
                lambda a, G: (lambda x, y, G=G: al.virial_integrand_fibre(G, L, A, x, y)),
                "G = e_{ax} . I w, integrand rho(Gamma_L) G",
            )
        )
        return Dynamics(
            name, "algebroid_l", 0, 3, ("omega_x", "omega_y", "omega_z"),
            lambda x, y: al.algebroid_lagrange_field(L, A, x, y),
            lambda x, y: al.energy_algebroid(L, x, y),
            always, virials,
            {"momentum_norm2": lambda x, y: np.sum(np.einsum("ab,...b->...a", I, y) ** 2, axis=-1)},
        )

    def build_h():
        virials = _axis_virials(
            "mu",
            lambda a, n: ah.linear_dual_function(constant_section(a, 0), name=n),
            lambda a, G: (lambda x, mu, G=G: ah.virial_integrand_dual(G, H, A, x, mu)),
            "G = e_{ax} . mu, integrand X_H(G)",
        )
        casimir = BundleJet(lambda x, mu: Jet(np.sum(mu**2, axis=-1), np.zeros(mu.shape[:-1] + (0,)), 2 * mu), "casimir")
        virials["casimir"] = VirialFunction(
            "casimir", casimir, lambda x, mu: ah.virial_integrand_dual(casimir, H, A, x, mu), "G = |mu|^2"
        )
        return Dynamics(
            name, "algebroid_h", 0, 3, ("mu_x", "mu_y", "mu_z"),
            lambda x, mu: ah.algebroid_hamilton_field(H, A, x, mu),
            lambda x, mu: H(x, mu).value,
            always, virials,
            {"casimir": lambda x, mu: np.sum(mu**2, axis=-1)},
        )

    formalism = "algebroid_l" if name == "rigid_body_lagrangian" else "algebroid_h"
    builders = {"algebroid_l": build_l, "algebroid_h": build_h}
    desc = ModelDescriptor(
        name,
        (formalism,),
        {"inertia": I.tolist(), "omega0": w0.tolist()},
        {"inertia": "mass*length^2", "omega0": "1/time"},
        {"default": {"algebroid_l": w0, "algebroid_h": I @ w0}},
        {
            "energy": Constant(0.5 * w0 @ I @ w0, "closed form"),
            "momentum_norm2": Constant(float(np.sum((I @ w0) ** 2)), "closed form"),
        },
        {formalism: builders[formalism]},
        description="free rigid body on so(3)",
        jets={"algebroid_l": L, "algebroid_h": H},
        algebroids=[A],
    )
    return desc


def _heavy_top_descriptor(params) -> ModelDescriptor:
    p = _merge(
        {
            "inertia": [1.0, 1.0, 2.0],
            "mgl": 1.0,
            "e": [0.0, 0.0, 1.0],
            "gamma0": [0.6, 0.0, 0.8],
            "omega0": [0.3, -0.4, 1.5],
            "project_gamma": False,
        },
        params,
        "heavy_top",
    )
    I = inertia_matrix(p["inertia"])
    _positive(p, "mgl")
    e = np.asarray(p["e"], dtype=float)
    if e.shape != (3,) or not np.isclose(np.linalg.norm(e), 1.0):
        raise InvalidParams("axis e must be a unit 3-vector")
    g0 = np.asarray(p["gamma0"], dtype=float)
    w0 = np.asarray(p["omega0"], dtype=float)
    if g0.shape != (3,) or not np.isclose(np.linalg.norm(g0), 1.0):
        raise InvalidParams("gamma0 must be a unit 3-vector")
    mgl = float(p["mgl"])
    project = _project_gamma if p["project_gamma"] else None
    A = heavy_top_algebroid()
    L = heavy_top_lagrangian(I, mgl, e)
    H = heavy_top_hamiltonian(I, mgl, e)
    names_x = ("gamma_x", "gamma_y", "gamma_z")

    def gamma_jet(a, n):
        return BundleJet(
            lambda x, y, a=a: Jet(
                np.einsum("...i,i->...", x, a), np.broadcast_to(a, x.shape).copy(), np.zeros(y.shape)
            ),
            n,
        )

    def monitors(y_to_momentum):
        return {
            "gamma_norm": lambda x, y: np.linalg.norm(x, axis=-1),
            "casimir_gamma_momentum": lambda x, y: np.einsum("...i,...i->...", x, y_to_momentum(y)),
        }

    def build_l():
        def section(a):
            return constant_section(a, 3)

        virials = _axis_virials(
            "gamma",
            gamma_jet,
            lambda a, G: (lambda x, y, G=G: al.virial_integrand_fibre(G, L, A, x, y)),
            "G = e_{ax} . gamma, integrand rho(Gamma_L) G = (gamma x w)_{ax}",
        )
        virials.update(
            _axis_virials(
                "momentum",
                lambda a, n: al.virial_function_from_section(L, section(a), name=n),
                lambda a, G: (lambda x, y, a=a: al.virial_integrand_section(L, section(a), A, x, y)),
                "G = e_{ax} . I w, integrand rho(sigma^c) L = (I w x w + mgl gamma x e)_{ax}",
            )
        )
        return Dynamics(
            "heavy_top", "algebroid_l", 3, 3, names_x + ("omega_x", "omega_y", "omega_z"),
            lambda x, y: al.algebroid_lagrange_field(L, A, x, y),
            lambda x, y: al.energy_algebroid(L, x, y),
            A.domain_guard, virials,
            monitors(lambda y: np.einsum("ab,...b->...a", I, y)),
            project=project,
        )

    def build_h():
        virials = _axis_virials(
            "gamma",
            gamma_jet,
            lambda a, G: (lambda x, mu, G=G: ah.virial_integrand_dual(G, H, A, x, mu)),
            "G = e_{ax} . gamma, integrand X_H(G)",
        )
        virials.update(
            _axis_virials(
                "mu",
                lambda a, n: ah.linear_dual_function(constant_section(a, 3), name=n),
                lambda a, G: (lambda x, mu, G=G: ah.virial_integrand_dual(G, H, A, x, mu)),
                "G = e_{ax} . mu, integrand X_H(G)",
            )
        )
        return Dynamics(
            "heavy_top", "algebroid_h", 3, 3, names_x + ("mu_x", "mu_y", "mu_z"),
            lambda x, mu: ah.algebroid_hamilton_field(H, A, x, mu),
            lambda x, mu: H(x, mu).value,
            A.domain_guard, virials,
            monitors(lambda mu: mu),
            project=project,
        )

    desc = ModelDescriptor(
        "heavy_top",
        ("algebroid_l", "algebroid_h"),
        {
            "inertia": I.tolist(),
            "mgl": mgl,
            "e": e.tolist(),
            "gamma0": g0.tolist(),
            "omega0": w0.tolist(),
            "project_gamma": bool(p["project_gamma"]),
        },
        {"inertia": "mass*length^2", "mgl": "energy", "e": "1", "gamma0": "1", "omega0": "1/time", "project_gamma": "flag"},
        {"default": {"algebroid_l": np.concatenate([g0, w0]), "algebroid_h": np.concatenate([g0, I @ w0])}},
        {"energy": Constant(0.5 * w0 @ I @ w0 + mgl * g0 @ e, "closed form")},
        {"algebroid_l": build_l, "algebroid_h": build_h},
        description="heavy top on the action algebroid S2 x so(3) -> S2; gamma in ambient coordinates",
        jets={"algebroid_l": L, "algebroid_h": H},
        algebroids=[A],
    )
    return desc


# -- registry -----------------------------------------------------------------

REGISTRY: dict[str, Callable[[dict | None], ModelDescriptor]] = {
    "kepler_quasi": lambda p: _kepler_descriptor("kepler_quasi", ("tq", "algebroid_l"), p),
    "kepler_cotangent": lambda p: _kepler_descriptor("kepler_cotangent", ("tstarq",), p),
    "rigid_body_lagrangian": lambda p: _rigid_body_descriptor("rigid_body_lagrangian", p),
    "rigid_body_hamiltonian": lambda p: _rigid_body_descriptor("rigid_body_hamiltonian", p),
    "heavy_top": _heavy_top_descriptor,
    "oscillator": _oscillator_descriptor,
}


def model_names() -> list[str]:
    return list(REGISTRY)


def _sample_states(desc: ModelDescriptor, formalism: str, n: int, rng) -> np.ndarray:
    s0 = np.concatenate([desc.initial_state(k, formalism) for k in desc.initial_states if formalism in desc.initial_states[k]])
    s0 = s0.reshape(-1, desc.dynamics(formalism).dim)
    picks = s0[rng.integers(len(s0), size=n)]
    return picks * (1.0 + 0.1 * rng.uniform(-1, 1, size=picks.shape)) + 0.05 * rng.normal(size=picks.shape)


def validate(desc: ModelDescriptor, n_points: int = 8, seed: int = 1) -> dict[str, float]:
    """Registration checks: frame and jet Jacobians, structure equations, chart guard.

    Returns the worst residual per check; raises :class:`ValidationFailure`
    naming the failing invariant.
    """
    rng = np.random.default_rng(seed)
    checks: dict[str, float] = {}
    try:
        for formalism in desc.formalisms:
            dyn = desc.dynamics(formalism)
            s_init = desc.initial_state(None, formalism)
            if not np.all(dyn.in_chart(s_init)):
                raise ValidationFailure(f"{desc.name}: initial state outside the chart")
            states = [s for s in _sample_states(desc, formalism, n_points, rng) if np.all(dyn.in_chart(s))]
            jet = desc.jets[formalism]
            worst = {}
            for s in states:
                x, y = dyn.split(s)
                for k, v in bundle_jet_errors(jet, x, y).items():
                    worst[k] = max(worst.get(k, 0.0), v)
                for vf in dyn.virials.values():
                    for k, v in bundle_jet_errors(vf.G, x, y).items():
                        worst[f"virial.{k}"] = max(worst.get(f"virial.{k}", 0.0), v)
                if desc.frame is not None:
                    worst["frame.beta_jac"] = max(worst.get("frame.beta_jac", 0.0), frames.beta_jac_error(desc.frame, x))
                for sec in desc.sections.values():
                    worst["section.jac"] = max(worst.get("section.jac", 0.0), section_errors(sec, x)["jac"])
            require(worst, JET_TOL, f"{desc.name}/{formalism} jets")
            checks.update({f"{formalism}.{k}": v for k, v in worst.items()})
            for A in desc.algebroids:
                if A.dim_base != dyn.dim_base:
                    continue
                rep = alg.check_structure_equations(A, [dyn.split(s)[0] for s in states])
                checks[f"{formalism}.structure.anchor"] = rep.anchor
                checks[f"{formalism}.structure.jacobi"] = rep.jacobi
                checks[f"{formalism}.structure.antisymmetry"] = rep.antisymmetry
                if rep.max() > STRUCTURE_TOL:
                    raise ValidationFailure(
                        f"{desc.name}: structure equations of {A.name} violated (residual {rep.max():.3e})"
                    )
    except JetMismatch as exc:
        raise ValidationFailure(str(exc)) from exc
    return checks


def build(name: str, params: dict | None = None, check: bool = True) -> ModelDescriptor:
    """Build (and by default validate) a registered model."""
    try:
        factory = REGISTRY[name]
    except KeyError:
        raise UnknownModel(f"unknown model {name!r}; known: {', '.join(REGISTRY)}") from None
    desc = factory(params)
    if check:
        desc.checks = validate(desc)
    return desc
