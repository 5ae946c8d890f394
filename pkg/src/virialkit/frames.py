"""Local frames on Q, quasi-velocities, quasi-momenta and Hamel symbols.

A frame ``{X_j}`` is stored through the matrix ``B = beta(q)`` whose column
``j`` holds the coordinate components of ``X_j``, i.e. ``B[k, j] = beta_j^k``
and ``X_j = B[k, j] d/dq^k``. The dual coframe is ``A = inv(B)`` with row
``k`` holding the coordinate components of ``alpha^k``.

Array layout conventions (all broadcast over leading batch axes):

* ``beta_jac(q)[..., k, j, i] = d beta_j^k / dq^i``
* ``hamel_symbols(q)[..., k, m, l] = gamma^k_{ml}`` with ``[X_m, X_l] = gamma^k_{ml} X_k``
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import OutOfChart, SingularFrame
from .jets import central_difference, relative_error, require

COND_CAP = 1e12


def _always(q):
    return np.ones(np.shape(q)[:-1], dtype=bool)


@dataclass(frozen=True)
class FrameField:
    dim: int
    beta: Callable[[np.ndarray], np.ndarray]
    beta_jac: Callable[[np.ndarray], np.ndarray]
    domain_guard: Callable[[np.ndarray], np.ndarray] = _always
    name: str = ""
    cond_cap: float = COND_CAP


class DualFrame(NamedTuple):
    alpha: np.ndarray
    residual: np.ndarray  # Frobenius norm of alpha @ beta - I


def coordinate_frame(n: int) -> FrameField:
    """The frame ``X_j = d/dq^j``."""

    def beta(q):
        return np.broadcast_to(np.eye(n), np.shape(q)[:-1] + (n, n)).copy()

    def beta_jac(q):
        return np.zeros(np.shape(q)[:-1] + (n, n, n))

    return FrameField(n, beta, beta_jac, name=f"coordinate{n}")


def check_chart(frame: FrameField, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape[-1:] != (frame.dim,):
        raise ValueError(f"expected points of dimension {frame.dim}, got shape {q.shape}")
    if not np.all(frame.domain_guard(q)):
        raise OutOfChart(f"point outside the chart of frame {frame.name or '?'}")
    return q


def _beta_checked(frame: FrameField, q) -> np.ndarray:
    B = np.asarray(frame.beta(q), dtype=float)
    with np.errstate(all="ignore"):
        cond = np.linalg.cond(B) if B.shape[-1] else np.zeros(B.shape[:-2])
    if not np.all(np.isfinite(cond) & (cond <= frame.cond_cap)):
        raise SingularFrame(f"frame matrix condition number {np.max(cond):.3e} exceeds {frame.cond_cap:g}")
    return B


def dual_frame(frame: FrameField, q) -> DualFrame:
    """Coframe matrix ``alpha = inv(beta)`` and the residual of ``alpha beta = I``."""
    q = check_chart(frame, q)
    B = _beta_checked(frame, q)
    A = np.linalg.inv(B)
    res = np.linalg.norm(A @ B - np.eye(frame.dim), axis=(-2, -1))
    return DualFrame(A, res)


def dual_frame_jac(frame: FrameField, q) -> tuple[np.ndarray, np.ndarray]:
    """``alpha`` and ``d alpha^k_j / dq^i`` as ``[..., k, j, i]``."""
    A = dual_frame(frame, q).alpha
    dB = np.asarray(frame.beta_jac(q), dtype=float)
    dA = -np.einsum("...kp,...pqi,...qj->...kji", A, dB, A)
    return A, dA


def velocity_to_quasi(frame: FrameField, q, v) -> np.ndarray:
    """Quasi-velocities ``w = alpha(q) v`` of a coordinate velocity."""
    A = dual_frame(frame, q).alpha
    return np.einsum("...kj,...j->...k", A, np.asarray(v, dtype=float))


def quasi_to_velocity(frame: FrameField, q, w) -> np.ndarray:
    q = check_chart(frame, q)
    return np.einsum("...kj,...j->...k", frame.beta(q), np.asarray(w, dtype=float))


def covector_to_quasi(frame: FrameField, q, p) -> np.ndarray:
    """Quasi-momenta ``pi_k = p_i beta_k^i`` of a coordinate covector."""
    q = check_chart(frame, q)
    return np.einsum("...i,...ik->...k", np.asarray(p, dtype=float), frame.beta(q))


def quasi_to_covector(frame: FrameField, q, pi) -> np.ndarray:
    A = dual_frame(frame, q).alpha
    return np.einsum("...k,...ki->...i", np.asarray(pi, dtype=float), A)


def hamel_symbols(frame: FrameField, q) -> np.ndarray:
    """``gamma^k_{ml}`` from the exterior derivative of the coframe.

    Antisymmetric in ``(m, l)`` by construction.
    """
    q = np.asarray(q, dtype=float)
    A, dA = dual_frame_jac(frame, q)
    B = frame.beta(q)
    curl = dA - np.swapaxes(dA, -1, -2)  # [k, j, i] = d_i alpha^k_j - d_j alpha^k_i
    return np.einsum("...jm,...il,...kji->...kml", B, B, curl)


def beta_jac_error(frame: FrameField, q) -> float:
    q = np.asarray(q, dtype=float)
    return relative_error(frame.beta_jac(q), central_difference(frame.beta, q))


def bracket_residual(frame: FrameField, q) -> float:
    """Max deviation between ``[X_m, X_l]`` (finite differences of beta) and ``gamma^k_{ml} X_k``."""
    q = np.asarray(q, dtype=float)
    B = frame.beta(q)
    dB = central_difference(frame.beta, q)  # [k, j, i]
    # [X_m, X_l]^k = X_m^i d_i X_l^k - X_l^i d_i X_m^k
    lie = np.einsum("im,kli->kml", B, dB) - np.einsum("il,kmi->kml", B, dB)
    hamel = np.einsum("pml,kp->kml", hamel_symbols(frame, q), B)
    return float(np.max(np.abs(lie - hamel), initial=0.0))


def coframe_residual(frame: FrameField, q) -> float:
    """Componentwise residual of ``d alpha^k + 1/2 gamma^k_{ml} alpha^m ^ alpha^l = 0``."""
    q = np.asarray(q, dtype=float)
    A = dual_frame(frame, q).alpha
    dA = central_difference(lambda u: dual_frame(frame, u).alpha, q)  # [k, i, j] = d_j alpha^k_i
    d_alpha = np.swapaxes(dA, -1, -2) - dA  # [k, j, i] = d_j alpha^k_i - d_i alpha^k_j
    wedge = np.einsum("kml,mj,li->kji", hamel_symbols(frame, q), A, A)
    return float(np.max(np.abs(d_alpha + wedge), initial=0.0))


def validate_frame(frame: FrameField, points, tol: float = 1e-5) -> None:
    """Registration self-check of the analytic frame Jacobian."""
    for q in np.atleast_2d(np.asarray(points, dtype=float)):
        check_chart(frame, q)
        require({"beta_jac": beta_jac_error(frame, q)}, tol, f"frame {frame.name}")

