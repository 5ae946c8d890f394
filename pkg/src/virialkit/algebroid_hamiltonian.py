"""Hamiltonian dynamics on the A-tangent of the dual bundle A*.

States are pairs ``(x, mu)`` of base coordinates and fibre coordinates of
A* in the dual basis. Functions on A* are :class:`~virialkit.jets.BundleJet`
objects with ``mu`` as the fibre variable.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .algebroid import AlgebroidLocal, check_base
from .jets import BundleJet, Jet, SectionField


class SymplecticSection(NamedTuple):
    matrix: np.ndarray  # basis {X^a, P_a}, layout [[C mu, I], [-I, 0]]
    liouville: np.ndarray  # theta_A components along X^a


def canonical_symplectic_section(algebroid: AlgebroidLocal, x, mu) -> SymplecticSection:
    x = check_base(algebroid, x)
    mu = np.asarray(mu, dtype=float)
    Cmu = np.einsum("...cab,...c->...ab", algebroid.C(x), mu)
    eye = np.broadcast_to(np.eye(algebroid.dim_fibre), Cmu.shape)
    top = np.concatenate([Cmu, eye], axis=-1)
    bottom = np.concatenate([-eye, np.zeros_like(Cmu)], axis=-1)
    return SymplecticSection(np.concatenate([top, bottom], axis=-2), mu.copy())


def algebroid_hamilton_field(hamiltonian: BundleJet, algebroid: AlgebroidLocal, x, mu):
    """``(xdot, mudot)``: the anchor image of the Hamiltonian section."""
    x = check_base(algebroid, x)
    mu = np.asarray(mu, dtype=float)
    h = hamiltonian(x, mu)
    rho = algebroid.rho(x)
    xdot = np.einsum("...ia,...a->...i", rho, h.d_fibre)
    mudot = -(
        np.einsum("...cab,...c,...b->...a", algebroid.C(x), mu, h.d_fibre)
        + np.einsum("...ia,...i->...a", rho, h.d_base)
    )
    return xdot, mudot


def hamiltonian_section(hamiltonian: BundleJet, algebroid: AlgebroidLocal, x, mu) -> np.ndarray:
    """Components of the Hamiltonian section in the basis ``{X_a, P^a}``."""
    x = check_base(algebroid, x)
    mu = np.asarray(mu, dtype=float)
    h = hamiltonian(x, mu)
    _, mudot = algebroid_hamilton_field(hamiltonian, algebroid, x, mu)
    return np.concatenate([h.d_fibre, mudot], axis=-1)


def virial_integrand_dual(G: BundleJet, hamiltonian: BundleJet, algebroid: AlgebroidLocal, x, mu) -> np.ndarray:
    """Rate of change of ``G`` along the Hamiltonian section's flow."""
    xdot, mudot = algebroid_hamilton_field(hamiltonian, algebroid, x, mu)
    g = G(x, mu)
    return np.einsum("...i,...i->...", xdot, g.d_base) + np.einsum("...a,...a->...", mudot, g.d_fibre)


def virial_bracket_dual(G: BundleJet, hamiltonian: BundleJet, algebroid: AlgebroidLocal, x, mu) -> np.ndarray:
    """The Hamiltonian-side algebroid bracket written term by term.

    Unlike the cotangent bracket this display already equals ``+X_H(G)``.
    """
    x = check_base(algebroid, x)
    mu = np.asarray(mu, dtype=float)
    g = G(x, mu)
    h = hamiltonian(x, mu)
    rho = algebroid.rho(x)
    return (
        np.einsum("...ia,...a,...i->...", rho, h.d_fibre, g.d_base)
        - np.einsum("...ia,...i,...a->...", rho, h.d_base, g.d_fibre)
        - np.einsum("...cab,...c,...b,...a->...", algebroid.C(x), mu, h.d_fibre, g.d_fibre)
    )


def linear_dual_function(section: SectionField, name: str = "") -> BundleJet:
    """``G(x, mu) = sigma^a(x) mu_a``."""

    def fn(x, mu):
        s, sjac = section(x)
        return Jet(np.einsum("...a,...a->...", s, mu), np.einsum("...a,...ai->...i", mu, sjac), s)

    return BundleJet(fn, name=name)
