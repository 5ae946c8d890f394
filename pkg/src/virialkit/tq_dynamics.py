"""Lagrangian mechanics on TQ in quasi-velocities.

States are pairs ``(q, w)`` of chart coordinates and quasi-velocities in a
:class:`~virialkit.frames.FrameField`. Lagrangians are
:class:`~virialkit.jets.BundleJet` objects with both second-order fields.

Every virial integrand returned here is ``dG/dt`` along the flow of the
Lagrangian dynamics, so its time average equals the boundary term
``(G(T) - G(0)) / T``.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import DegenerateLagrangian, NotMechanicalType
from .frames import COND_CAP, FrameField, check_chart, hamel_symbols
from .jets import BundleJet, Jet, SectionField


def _norm1(M: np.ndarray):
    return np.abs(M).sum(axis=-2).max(axis=-1)


def inverse_hessian(hess: np.ndarray, cap: float = COND_CAP) -> np.ndarray:
    """``W = inv(d2L/dw dw)`` with a cap on the 1-norm condition number."""
    try:
        W = np.linalg.inv(hess)
    except np.linalg.LinAlgError:
        raise DegenerateLagrangian("fibre Hessian is singular") from None
    cond = _norm1(hess) * _norm1(W)
    if not np.all(cond <= cap):  # also rejects NaN
        raise DegenerateLagrangian(f"fibre Hessian condition number {np.max(cond):.3e} exceeds {cap:g}")
    return W


def energy(lagrangian: BundleJet, q, w) -> np.ndarray:
    """``E_L = w^a dL/dw^a - L``."""
    j = lagrangian(q, w)
    return np.einsum("...a,...a->...", np.asarray(w, dtype=float), j.d_fibre) - j.value


def _frame_derivatives(j: Jet, B: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # X_l(L) and X_l(dL/dw^m) expanded through the analytic jet
    XL = np.einsum("...il,...i->...l", B, j.d_base)
    XLw = np.einsum("...il,...im->...lm", B, j.d2_base_fibre)
    return XL, XLw


def cartan_two_form(lagrangian: BundleJet, frame: FrameField, q, w) -> np.ndarray:
    """Matrix of the Cartan 2-form in the basis ``{alpha^m, dw^j}``.

    ``omega(u, v) = u @ Omega @ v``; the layout is ``[[A, H], [-H, 0]]``
    with ``H`` the fibre Hessian and ``A`` the antisymmetric
    ``alpha^m ^ alpha^l`` block.
    """
    q = check_chart(frame, q)
    j = lagrangian(q, w)
    inverse_hessian(j.d2_fibre)
    gamma = hamel_symbols(frame, q)
    _, XLw = _frame_derivatives(j, frame.beta(q))
    # XLw[l, m] = X_l(dL/dw^m), so A[m, l] gains X_l(dL/dw^m) - X_m(dL/dw^l)
    A = np.einsum("...kml,...k->...ml", gamma, j.d_fibre) + np.swapaxes(XLw, -1, -2) - XLw
    H = j.d2_fibre
    top = np.concatenate([A, H], axis=-1)
    bottom = np.concatenate([-H, np.zeros_like(H)], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def lagrangian_flow_field(lagrangian: BundleJet, frame: FrameField, q, w) -> tuple[np.ndarray, np.ndarray]:
    """``(qdot, wdot)`` of the Lagrangian dynamical field in quasi-velocities."""
    q = check_chart(frame, q)
    w = np.asarray(w, dtype=float)
    j = lagrangian(q, w)
    W = inverse_hessian(j.d2_fibre)
    B = frame.beta(q)
    gamma = hamel_symbols(frame, q)
    XL, XLw = _frame_derivatives(j, B)
    force = (
        np.einsum("...m,...kml,...k->...l", w, gamma, j.d_fibre)
        - np.einsum("...m,...ml->...l", w, XLw)
        + XL
    )
    qdot = np.einsum("...ij,...j->...i", B, w)
    wdot = np.einsum("...rl,...l->...r", W, force)
    return qdot, wdot


class Lift(NamedTuple):
    base: np.ndarray  # coordinate components of f^i X_i
    frame_base: np.ndarray  # f^i
    vertical: np.ndarray  # components along d/dw^i


def complete_lift_tq(field: SectionField, frame: FrameField, q, w) -> Lift:
    """Complete lift ``D^c`` of ``D = f^i X_i`` to TQ."""
    q = check_chart(frame, q)
    w = np.asarray(w, dtype=float)
    B = frame.beta(q)
    f, fjac = field(q)
    Xf = np.einsum("...pk,...ip->...ik", B, fjac)  # [i, k] = X_k(f^i)
    gf = np.einsum("...ikj,...j->...ik", hamel_symbols(frame, q), f)
    vertical = np.einsum("...ik,...k->...i", Xf + gf, w)
    return Lift(np.einsum("...ij,...j->...i", B, f), f, vertical)


def apply_lift(lift: Lift, j: Jet) -> np.ndarray:
    """Derivative of a bundle function along a lifted vector."""
    return np.einsum("...i,...i->...", lift.base, j.d_base) + np.einsum(
        "...i,...i->...", lift.vertical, j.d_fibre
    )


def virial_integrand_tq(G: BundleJet, lagrangian: BundleJet, frame: FrameField, q, w) -> np.ndarray:
    """``Gamma_L(G)``: rate of change of ``G`` along the Lagrangian flow."""
    qdot, wdot = lagrangian_flow_field(lagrangian, frame, q, w)
    g = G(q, w)
    return np.einsum("...i,...i->...", qdot, g.d_base) + np.einsum("...i,...i->...", wdot, g.d_fibre)


def virial_bracket_tq(G: BundleJet, lagrangian: BundleJet, frame: FrameField, q, w) -> np.ndarray:
    """The Boltzmann-form bracket, evaluated term by term from its closed form.

    Equals ``-virial_integrand_tq`` at every regular state; kept separate as
    an independent evaluation path.
    """
    q = check_chart(frame, q)
    w = np.asarray(w, dtype=float)
    j = lagrangian(q, w)
    g = G(q, w)
    W = inverse_hessian(j.d2_fibre)
    B = frame.beta(q)
    gamma = hamel_symbols(frame, q)
    XL, XLw = _frame_derivatives(j, B)
    bracket = (
        np.einsum("...m,...ml->...l", w, XLw)
        - XL
        - np.einsum("...m,...kml,...k->...l", w, gamma, j.d_fibre)
    )
    XG = np.einsum("...ij,...i->...j", B, g.d_base)
    return np.einsum("...r,...rl,...l->...", g.d_fibre, W, bracket) - np.einsum("...j,...j->...", w, XG)


def theta_virial(lagrangian: BundleJet, field: SectionField, name: str = "") -> BundleJet:
    """The fibre-linear virial function ``G = <theta_L, D^c> = f^k dL/dw^k``."""

    def fn(q, w):
        j = lagrangian(q, w)
        f, fjac = field(q)
        value = np.einsum("...k,...k->...", j.d_fibre, f)
        d_base = np.einsum("...ik,...k->...i", j.d2_base_fibre, f) + np.einsum("...k,...ki->...i", j.d_fibre, fjac)
        d_fibre = np.einsum("...ak,...k->...a", j.d2_fibre, f)
        return Jet(value, d_base, d_fibre)

    return BundleJet(fn, name=name)


def lift_integrand_tq(lagrangian: BundleJet, field: SectionField, frame: FrameField, q, w) -> np.ndarray:
    """``D^c(L)``, which equals ``Gamma_L`` applied to :func:`theta_virial`."""
    return apply_lift(complete_lift_tq(field, frame, q, w), lagrangian(q, w))


def mechanical_virial_sides(lagrangian: BundleJet, field: SectionField, frame: FrameField, q, w):
    """``(D^c(T), D(V))`` for a Lagrangian of mechanical type ``L = T - V``."""
    if not lagrangian.is_mechanical:
        raise NotMechanicalType(f"Lagrangian {lagrangian.name or '?'} has no kinetic/potential split")
    lift = complete_lift_tq(field, frame, q, w)
    lhs = apply_lift(lift, lagrangian.kinetic(q, w))
    rhs = np.einsum("...i,...i->...", lift.base, lagrangian.potential(q, w).d_base)
    return lhs, rhs
