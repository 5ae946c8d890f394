"""Hamiltonian mechanics on T*Q in quasi-momenta.

States are pairs ``(q, pi)``. Hamiltonians and virial functions are
:class:`~virialkit.jets.BundleJet` objects whose fibre variable is ``pi``.
"""

from __future__ import annotations

import numpy as np

from .frames import FrameField, check_chart, hamel_symbols
from .jets import BundleJet, Jet, SectionField


def hamiltonian_flow_field(hamiltonian: BundleJet, frame: FrameField, q, pi) -> tuple[np.ndarray, np.ndarray]:
    """``(qdot, pidot)`` of the Hamiltonian vector field in quasi-momenta."""
    q = check_chart(frame, q)
    pi = np.asarray(pi, dtype=float)
    h = hamiltonian(q, pi)
    B = frame.beta(q)
    gamma = hamel_symbols(frame, q)
    qdot = np.einsum("...ki,...i->...k", B, h.d_fibre)
    pidot = -(
        np.einsum("...ji,...j->...i", B, h.d_base)
        + np.einsum("...k,...kij,...j->...i", pi, gamma, h.d_fibre)
    )
    return qdot, pidot


def linear_virial_function(field: SectionField, name: str = "") -> BundleJet:
    """``G(q, pi) = pi_k f^k(q)`` for ``D = f^k X_k``."""

    def fn(q, pi):
        f, fjac = field(q)
        value = np.einsum("...k,...k->...", pi, f)
        return Jet(value, np.einsum("...k,...kj->...j", pi, fjac), f)

    return BundleJet(fn, name=name)


def complete_lift_tstarq(field: SectionField, frame: FrameField, q, pi) -> tuple[np.ndarray, np.ndarray]:
    """Hamiltonian field of the linear function of ``D``: base and vertical parts."""
    q = check_chart(frame, q)
    B = frame.beta(q)
    f, fjac = field(q)
    gamma = hamel_symbols(frame, q)
    base = np.einsum("...ki,...i->...k", B, f)
    coeff = np.einsum("...ji,...kj->...ik", B, fjac) + np.einsum("...kij,...j->...ik", gamma, f)
    return base, -np.einsum("...ik,...k->...i", coeff, np.asarray(pi, dtype=float))


def virial_integrand_tstarq(G: BundleJet, hamiltonian: BundleJet, frame: FrameField, q, pi) -> np.ndarray:
    """``X_H(G)``: rate of change of ``G`` along the Hamiltonian flow."""
    qdot, pidot = hamiltonian_flow_field(hamiltonian, frame, q, pi)
    g = G(q, pi)
    return np.einsum("...i,...i->...", qdot, g.d_base) + np.einsum("...i,...i->...", pidot, g.d_fibre)


def virial_bracket_tstarq(G: BundleJet, hamiltonian: BundleJet, frame: FrameField, q, pi) -> np.ndarray:
    """Quasi-momentum bracket in its closed form; equals ``-X_H(G)``."""
    q = check_chart(frame, q)
    pi = np.asarray(pi, dtype=float)
    g = G(q, pi)
    h = hamiltonian(q, pi)
    B = frame.beta(q)
    gamma = hamel_symbols(frame, q)
    return (
        np.einsum("...ji,...i,...j->...", B, g.d_fibre, h.d_base)
        - np.einsum("...ji,...j,...i->...", B, g.d_base, h.d_fibre)
        - np.einsum("...k,...kij,...j,...i->...", pi, gamma, g.d_fibre, h.d_fibre)
    )


def linear_virial_bracket(field: SectionField, hamiltonian: BundleJet, frame: FrameField, q, pi) -> np.ndarray:
    """Bracket of a fibre-linear virial function written through ``f`` directly.

    Equals ``-X_H(G)`` for ``G = pi_k f^k``.
    """
    q = check_chart(frame, q)
    pi = np.asarray(pi, dtype=float)
    h = hamiltonian(q, pi)
    f, fjac = field(q)
    B = frame.beta(q)
    gamma = hamel_symbols(frame, q)
    return (
        np.einsum("...ji,...i,...j->...", B, f, h.d_base)
        - np.einsum("...ji,...kj,...k,...i->...", B, fjac, pi, h.d_fibre)
        - np.einsum("...k,...kij,...j,...i->...", pi, gamma, f, h.d_fibre)
    )


def canonical_two_form(frame: FrameField, q, pi) -> np.ndarray:
    """Canonical symplectic form in the basis ``{alpha^i, dpi_i}``, same layout as the Cartan form."""
    q = check_chart(frame, q)
    n = frame.dim
    gamma = hamel_symbols(frame, q)
    A = np.einsum("...k,...kij->...ij", np.asarray(pi, dtype=float), gamma)
    eye = np.broadcast_to(np.eye(n), A.shape)
    top = np.concatenate([A, eye], axis=-1)
    bottom = np.concatenate([-eye, np.zeros_like(A)], axis=-1)
    return np.concatenate([top, bottom], axis=-2)
