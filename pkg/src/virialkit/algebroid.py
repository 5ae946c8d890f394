"""Local Lie algebroid models.

A Lie algebroid ``A -> M`` is described in a local chart ``x`` of the base
and a local basis of sections ``{e_a}`` by its anchor ``rho`` and its
structure functions ``C``:

* ``rho(x)[..., i, a] = rho^i_a`` so that ``rho(e_a) = rho^i_a d/dx^i``
* ``C(x)[..., c, a, b] = C^c_{ab}`` so that ``[e_a, e_b] = C^c_{ab} e_c``
* ``rho_jac(x)[..., i, a, j] = d rho^i_a / dx^j``
* ``C_jac(x)[..., c, a, b, i] = d C^c_{ab} / dx^i``

A Lie algebra is the case ``dim_base == 0`` where ``x`` has length zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import DegenerateSymplectic, OutOfChart
from .frames import COND_CAP, FrameField, hamel_symbols
from .jets import BaseJet, central_difference, relative_error


def _always(x):
    return np.ones(np.shape(x)[:-1], dtype=bool)


@dataclass(frozen=True)
class AlgebroidLocal:
    dim_base: int
    dim_fibre: int
    rho: Callable[[np.ndarray], np.ndarray]
    rho_jac: Callable[[np.ndarray], np.ndarray]
    C: Callable[[np.ndarray], np.ndarray]
    C_jac: Callable[[np.ndarray], np.ndarray]
    domain_guard: Callable[[np.ndarray], np.ndarray] = _always
    name: str = ""


def check_base(algebroid: AlgebroidLocal, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (algebroid.dim_base,):
        raise ValueError(f"expected base points of dimension {algebroid.dim_base}, got shape {x.shape}")
    if not algebroid.domain_guard(x).all():
        raise OutOfChart(f"point outside the chart of algebroid {algebroid.name or '?'}")
    return x


def lie_algebra(structure_constants, name: str = "") -> AlgebroidLocal:
    """Lie algebra viewed as an algebroid over a single point."""
    C0 = np.asarray(structure_constants, dtype=float)
    m = C0.shape[0]

    def rho(x):
        return np.zeros(np.shape(x)[:-1] + (0, m))

    def rho_jac(x):
        return np.zeros(np.shape(x)[:-1] + (0, m, 0))

    def C(x):
        return np.broadcast_to(C0, np.shape(x)[:-1] + C0.shape)

    def C_jac(x):
        return np.zeros(np.shape(x)[:-1] + C0.shape + (0,))

    return AlgebroidLocal(0, m, rho, rho_jac, C, C_jac, name=name)


def levi_civita() -> np.ndarray:
    """``eps[c, a, b] = epsilon_{abc}``: the cross product as structure constants."""
    eps = np.zeros((3, 3, 3))
    for a, b, c in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        eps[c, a, b] = 1.0
        eps[c, b, a] = -1.0
    return eps


class StructureReport(NamedTuple):
    anchor: float  # rho is a bracket morphism
    jacobi: float  # cyclic Jacobi identity including anchor terms
    antisymmetry: float  # C^c_{ab} + C^c_{ba}

    def max(self) -> float:
        return max(self.anchor, self.jacobi, self.antisymmetry)


def structure_residuals(algebroid: AlgebroidLocal, x) -> StructureReport:
    """Residuals of the local structure equations at a single point."""
    x = check_base(algebroid, x)
    rho = algebroid.rho(x)
    drho = algebroid.rho_jac(x)
    C = algebroid.C(x)
    dC = algebroid.C_jac(x)
    anchor = (
        np.einsum("ja,ibj->iab", rho, drho)
        - np.einsum("jb,iaj->iab", rho, drho)
        - np.einsum("ic,cab->iab", rho, C)
    )
    # T[n, a, b, c] = rho(e_a) C^n_{bc} + C^n_{as} C^s_{bc}
    T = np.einsum("ia,nbci->nabc", rho, dC) + np.einsum("nas,sbc->nabc", C, C)
    jacobi = T + np.einsum("nbca->nabc", T) + np.einsum("ncab->nabc", T)
    return StructureReport(
        float(np.max(np.abs(anchor), initial=0.0)),
        float(np.max(np.abs(jacobi), initial=0.0)),
        float(np.max(np.abs(C + np.swapaxes(C, -1, -2)), initial=0.0)),
    )


def check_structure_equations(algebroid: AlgebroidLocal, points) -> StructureReport:
    """Maximum structure-equation residuals over a sample of base points."""
    points = np.asarray(points, dtype=float)
    if algebroid.dim_base == 0:
        points = np.zeros((1, 0))
    else:
        points = points.reshape(-1, algebroid.dim_base)
    reports = [structure_residuals(algebroid, x) for x in points]
    return StructureReport(*(max(r[k] for r in reports) for k in range(3)))


def jacobian_errors(algebroid: AlgebroidLocal, x) -> dict[str, float]:
    x = np.asarray(x, dtype=float)
    return {
        "rho_jac": relative_error(algebroid.rho_jac(x), central_difference(algebroid.rho, x)),
        "C_jac": relative_error(algebroid.C_jac(x), central_difference(algebroid.C, x)),
    }


def algebroid_differential(f: BaseJet, algebroid: AlgebroidLocal, x) -> np.ndarray:
    """Components ``rho^i_a df/dx^i`` of ``df`` in the dual basis."""
    x = check_base(algebroid, x)
    return np.einsum("...ia,...i->...a", algebroid.rho(x), f(x).grad)


def prolongation_structure_functions(algebroid: AlgebroidLocal, fibre_dim: int) -> AlgebroidLocal:
    """The A-tangent of a bundle ``P`` with ``fibre_dim`` fibre coordinates.

    The result is an algebroid over ``P`` (coordinates ``(x, u)``) in the
    basis ``{X_a, V_J}``: anchor ``[[rho, 0], [0, I]]`` and structure
    functions equal to ``C`` on the ``X`` block, zero elsewhere.
    """
    n, m, k = algebroid.dim_base, algebroid.dim_fibre, fibre_dim

    def split(xu):
        return xu[..., :n]

    def rho(xu):
        out = np.zeros(xu.shape[:-1] + (n + k, m + k))
        out[..., :n, :m] = algebroid.rho(split(xu))
        out[..., n:, m:] = np.eye(k)
        return out

    def rho_jac(xu):
        out = np.zeros(xu.shape[:-1] + (n + k, m + k, n + k))
        out[..., :n, :m, :n] = algebroid.rho_jac(split(xu))
        return out

    def C(xu):
        out = np.zeros(xu.shape[:-1] + (m + k,) * 3)
        out[..., :m, :m, :m] = algebroid.C(split(xu))
        return out

    def C_jac(xu):
        out = np.zeros(xu.shape[:-1] + (m + k,) * 3 + (n + k,))
        out[..., :m, :m, :m, :n] = algebroid.C_jac(split(xu))
        return out

    def guard(xu):
        return algebroid.domain_guard(split(xu))

    return AlgebroidLocal(n + k, m + k, rho, rho_jac, C, C_jac, guard, name=f"T^A({algebroid.name})")


@dataclass(frozen=True)
class SymplecticSectionField:
    """Antisymmetric 2-section ``omega(x)[..., a, b] = omega(e_a, e_b)``."""

    omega: Callable[[np.ndarray], np.ndarray]
    cond_cap: float = COND_CAP

    def inverse(self, x) -> np.ndarray:
        w = np.asarray(self.omega(x), dtype=float)
        if np.max(np.abs(w + np.swapaxes(w, -1, -2)), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(w), initial=0.0)):
            raise DegenerateSymplectic("2-section is not antisymmetric")
        with np.errstate(all="ignore"):
            cond = np.linalg.cond(w)
        if not np.all(np.isfinite(cond) & (cond <= self.cond_cap)):
            raise DegenerateSymplectic(f"2-section condition number {np.max(cond):.3e} exceeds {self.cond_cap:g}")
        return np.linalg.inv(w)


def base_poisson_bracket(
    omega: SymplecticSectionField, algebroid: AlgebroidLocal, F: BaseJet, G: BaseJet, x
) -> np.ndarray:
    """``omega^{ab} rho^i_a rho^j_b dF/dx^i dG/dx^j`` with ``[omega^{ab}] = inv([omega_{ab}])``."""
    x = check_base(algebroid, x)
    winv = omega.inverse(x)
    rho = algebroid.rho(x)
    dF = np.einsum("...ia,...i->...a", rho, F(x).grad)
    dG = np.einsum("...jb,...j->...b", rho, G(x).grad)
    return np.einsum("...ab,...a,...b->...", winv, dF, dG)


def tangent_algebroid_from_frame(frame: FrameField) -> AlgebroidLocal:
    """TQ as an algebroid in the basis of a frame: anchor ``beta``, structure functions the Hamel symbols.

    Only first derivatives of the frame are supplied, so the ``C`` Jacobian
    is obtained by central differences of the Hamel symbols.
    """

    def C(q):
        return hamel_symbols(frame, q)

    def C_jac(q):
        return central_difference(C, q)

    return AlgebroidLocal(
        frame.dim, frame.dim, frame.beta, frame.beta_jac, C, C_jac, frame.domain_guard, name=f"T({frame.name})"
    )
