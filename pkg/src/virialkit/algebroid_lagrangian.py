"""Lagrangian dynamics on the A-tangent of a Lie algebroid A.

States are pairs ``(x, y)``: base coordinates and fibre coordinates of A.
Lagrangians are :class:`~virialkit.jets.BundleJet` objects with both
second-order fields.
"""

from __future__ import annotations

import functools
from typing import NamedTuple, Optional

import numpy as np

from .algebroid import AlgebroidLocal, check_base
from .jets import BundleJet, Jet, SectionField
from .tq_dynamics import inverse_hessian


def energy_algebroid(lagrangian: BundleJet, x, y) -> np.ndarray:
    """``E_L = y^a dL/dy^a - L``."""
    j = lagrangian(x, y)
    return np.einsum("...a,...a->...", np.asarray(y, dtype=float), j.d_fibre) - j.value


def cartan_two_section(lagrangian: BundleJet, algebroid: AlgebroidLocal, x, y) -> np.ndarray:
    """Cartan 2-section in the basis ``{X^a, V^a}``, layout ``[[A, H], [-H, 0]]``."""
    x = check_base(algebroid, x)
    j = lagrangian(x, y)
    inverse_hessian(j.d2_fibre)
    # M[b, a] = rho^i_b d2L/dx^i dy^a
    M = np.einsum("...ib,...ia->...ba", algebroid.rho(x), j.d2_base_fibre)
    A = np.swapaxes(M, -1, -2) - M + np.einsum("...c,...cab->...ab", j.d_fibre, algebroid.C(x))
    H = j.d2_fibre
    top = np.concatenate([A, H], axis=-1)
    bottom = np.concatenate([-H, np.zeros_like(H)], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def algebroid_lagrange_field(lagrangian: BundleJet, algebroid: AlgebroidLocal, x, y):
    """``(xdot, ydot)`` of the dynamical section ``Gamma_L``."""
    x = check_base(algebroid, x)
    y = np.asarray(y, dtype=float)
    j = lagrangian(x, y)
    W = inverse_hessian(j.d2_fibre)
    rho = algebroid.rho(x)
    xdot = (rho @ y[..., None])[..., 0]
    # force_t = rho^i_t dL/dx^i - xdot^i d2L/dx^i dy^t - C^c_{tb} y^b dL/dy^c
    force = (
        (j.d_base[..., None, :] @ rho)[..., 0, :]
        - (xdot[..., None, :] @ j.d2_base_fibre)[..., 0, :]
        - np.einsum("...ctb,...b,...c->...t", algebroid.C(x), y, j.d_fibre)
    )
    return xdot, (W @ force[..., None])[..., 0]


class SectionLift(NamedTuple):
    horizontal: np.ndarray  # components along X_a
    vertical: np.ndarray  # components along V_a


def _lift(section: SectionField, algebroid: AlgebroidLocal, x, y, sign: float) -> SectionLift:
    x = check_base(algebroid, x)
    y = np.asarray(y, dtype=float)
    s, sjac = section(x)
    flow = np.einsum("...ib,...b->...i", algebroid.rho(x), y)
    vertical = np.einsum("...i,...ai->...a", flow, sjac) + sign * np.einsum(
        "...abc,...b,...c->...a", algebroid.C(x), s, y
    )
    return SectionLift(s, vertical)


def _lift_integrand(lagrangian, section, algebroid, x, y, sign):
    lift = _lift(section, algebroid, x, y, sign)
    j = lagrangian(x, y)
    base = np.einsum("...ia,...a->...i", algebroid.rho(np.asarray(x, dtype=float)), lift.horizontal)
    return np.einsum("...i,...i->...", base, j.d_base) + np.einsum("...a,...a->...", lift.vertical, j.d_fibre)


@functools.lru_cache(maxsize=None)
def lift_sign(n_states: int = 100, seed: int = 0) -> float:
    """Sign of the bracket term in the complete lift of a section.

    Chosen by testing ``Gamma_L <theta_L, sigma> = rho(sigma^c) L`` on the
    heavy top at random states with affine sections; raises if neither sign
    satisfies it.
    """
    from .models import heavy_top_parts

    lagrangian, algebroid = heavy_top_parts(np.diag([1.0, 2.0, 3.0]), 1.3, np.array([0.0, 0.0, 1.0]))
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n_states, 3))
    x /= np.linalg.norm(x, axis=-1, keepdims=True)
    y = rng.normal(size=(n_states, 3))
    a, M = rng.normal(size=3), rng.normal(size=(3, 3))
    section = SectionField(
        lambda u: (a + np.einsum("ij,...j->...i", M, u), np.broadcast_to(M, u.shape[:-1] + (3, 3)))
    )
    G = virial_function_from_section(lagrangian, section)
    xdot, ydot = algebroid_lagrange_field(lagrangian, algebroid, x, y)
    g = G(x, y)
    rate = np.einsum("...i,...i->...", xdot, g.d_base) + np.einsum("...a,...a->...", ydot, g.d_fibre)
    scale = 1.0 + np.max(np.abs(rate))
    for sign in (1.0, -1.0):
        if np.max(np.abs(_lift_integrand(lagrangian, section, algebroid, x, y, sign) - rate)) < 1e-10 * scale:
            return sign
    raise RuntimeError("neither sign of the complete-lift bracket term reproduces the defining identity")


def complete_lift_section(
    section: SectionField, algebroid: AlgebroidLocal, x, y, sign: Optional[float] = None
) -> SectionLift:
    """Complete lift ``sigma^c`` of a section to the A-tangent of A."""
    return _lift(section, algebroid, x, y, lift_sign() if sign is None else sign)


def virial_function_from_section(lagrangian: BundleJet, section: SectionField, name: str = "") -> BundleJet:
    """``G = <theta_L, sigma^c> = sigma^a dL/dy^a``."""

    def fn(x, y):
        j = lagrangian(x, y)
        s, sjac = section(x)
        value = np.einsum("...a,...a->...", j.d_fibre, s)
        d_base = np.einsum("...ia,...a->...i", j.d2_base_fibre, s) + np.einsum("...a,...ai->...i", j.d_fibre, sjac)
        return Jet(value, d_base, np.einsum("...ba,...a->...b", j.d2_fibre, s))

    return BundleJet(fn, name=name)


def virial_integrand_section(lagrangian: BundleJet, section: SectionField, algebroid: AlgebroidLocal, x, y):
    """``rho(sigma^c) L``; equals ``dG/dt`` for ``G = <theta_L, sigma^c>``."""
    inverse_hessian(lagrangian(x, y).d2_fibre)
    return _lift_integrand(lagrangian, section, algebroid, x, y, lift_sign())


def virial_integrand_fibre(G: BundleJet, lagrangian: BundleJet, algebroid: AlgebroidLocal, x, y) -> np.ndarray:
    """``rho(Gamma_L) G = rho^i_a y^a dG/dx^i + f^a dG/dy^a``."""
    xdot, ydot = algebroid_lagrange_field(lagrangian, algebroid, x, y)
    g = G(x, y)
    return np.einsum("...i,...i->...", xdot, g.d_base) + np.einsum("...a,...a->...", ydot, g.d_fibre)
