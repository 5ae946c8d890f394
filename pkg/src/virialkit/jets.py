"""Functions with analytic derivatives, and their finite-difference checks.

Every geometric object in the package is evaluated from *jets*: callables
that return a value together with the partial derivatives the dynamics
need. Jets broadcast over leading batch axes, so ``x`` of shape ``(..., n)``
produces a value of shape ``(...)`` and gradients of shape ``(..., n)``.

Functions on a vector bundle use coordinates ``(x, y)``: base coordinates
``x`` and fibre coordinates ``y``. The same type serves for Lagrangians on
TQ or on an algebroid (``y`` = velocities) and for Hamiltonians on T*Q or
on A* (``y`` = momenta).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import JetMismatch


class Jet(NamedTuple):
    """A bundle function and its partials evaluated at ``(x, y)``."""

    value: np.ndarray
    d_base: np.ndarray  # (..., n)
    d_fibre: np.ndarray  # (..., m)
    d2_fibre: Optional[np.ndarray] = None  # (..., m, m)
    d2_base_fibre: Optional[np.ndarray] = None  # (..., n, m), [i, a] = d2/dx^i dy^a


@dataclass(frozen=True)
class BundleJet:
    """Function on a vector bundle with analytic first (and second) derivatives.

    ``fn(x, y)`` returns a :class:`Jet`. Lagrangians must fill the two
    second-order fields. ``kinetic`` and ``potential`` optionally record a
    mechanical split ``L = T - V`` in which ``potential`` ignores ``y``.
    """

    fn: Callable[[np.ndarray, np.ndarray], Jet]
    name: str = ""
    kinetic: Optional["BundleJet"] = None
    potential: Optional["BundleJet"] = None

    def __call__(self, x, y) -> Jet:
        return self.fn(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    @property
    def is_mechanical(self) -> bool:
        return self.kinetic is not None and self.potential is not None


class BaseValue(NamedTuple):
    value: np.ndarray
    grad: np.ndarray  # (..., n)


@dataclass(frozen=True)
class BaseJet:
    """Function on the base manifold with its gradient."""

    fn: Callable[[np.ndarray], BaseValue]
    name: str = ""

    def __call__(self, x) -> BaseValue:
        return self.fn(np.asarray(x, dtype=float))


class SectionValue(NamedTuple):
    components: np.ndarray  # (..., m)
    jac: np.ndarray  # (..., m, n), [a, i] = d sigma^a / dx^i


@dataclass(frozen=True)
class SectionField:
    """Section of a vector bundle given by its components in a local basis.

    Used both for vector fields ``D = f^i X_i`` on Q (components in the
    frame) and for sections of a Lie algebroid.
    """

    fn: Callable[[np.ndarray], SectionValue]
    name: str = ""

    def __call__(self, x) -> SectionValue:
        return self.fn(np.asarray(x, dtype=float))


def constant_section(components, dim_base: int, name: str = "") -> SectionField:
    """Section with constant components in the given basis."""
    c = np.asarray(components, dtype=float)

    def fn(x):
        batch = x.shape[:-1]
        return SectionValue(
            np.broadcast_to(c, batch + c.shape).copy(),
            np.zeros(batch + (c.shape[0], dim_base)),
        )

    return SectionField(fn, name=name)


def fd_step(x) -> np.ndarray:
    """Central-difference step ``max(1e-6, 1e-6 |x_i|)`` per component."""
    return np.maximum(1e-6, 1e-6 * np.abs(np.asarray(x, dtype=float)))


def central_difference(f: Callable, x) -> np.ndarray:
    """Jacobian of ``f`` by central differences, derivative index last.

    ``x`` may carry leading batch axes; ``f`` must broadcast over them.
    """
    x = np.asarray(x, dtype=float)
    h = fd_step(x)
    batch = x.ndim - 1
    cols = []
    for i in range(x.shape[-1]):
        e = np.zeros_like(x)
        e[..., i] = h[..., i]
        diff = np.asarray(f(x + e)) - np.asarray(f(x - e))
        step = (2.0 * h[..., i]).reshape(h.shape[:-1] + (1,) * (diff.ndim - batch))
        cols.append(diff / step)
    if not cols:
        return np.zeros(np.shape(f(x)) + (0,))
    return np.stack(cols, axis=-1)


def relative_error(analytic, numeric) -> float:
    """Max abs deviation scaled by ``max(1, max |analytic|)``."""
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    if analytic.size == 0:
        return 0.0
    scale = max(1.0, float(np.max(np.abs(analytic))))
    return float(np.max(np.abs(analytic - numeric))) / scale


def bundle_jet_errors(jet: BundleJet, x, y) -> dict[str, float]:
    """Finite-difference discrepancies of every derivative ``jet`` provides."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    j = jet(x, y)
    errs = {
        "d_base": relative_error(j.d_base, central_difference(lambda u: jet(u, y).value, x)),
        "d_fibre": relative_error(j.d_fibre, central_difference(lambda v: jet(x, v).value, y)),
    }
    if j.d2_fibre is not None:
        errs["d2_fibre"] = relative_error(
            j.d2_fibre, central_difference(lambda v: jet(x, v).d_fibre, y)
        )
    if j.d2_base_fibre is not None:
        # d/dx^i of dL/dy^a comes out as [a, i]
        num = central_difference(lambda u: jet(u, y).d_fibre, x)
        errs["d2_base_fibre"] = relative_error(j.d2_base_fibre, np.swapaxes(num, -1, -2))
    return errs


def base_jet_errors(jet: BaseJet, x) -> dict[str, float]:
    x = np.asarray(x, dtype=float)
    return {"grad": relative_error(jet(x).grad, central_difference(lambda u: jet(u).value, x))}


def section_errors(section: SectionField, x) -> dict[str, float]:
    x = np.asarray(x, dtype=float)
    num = central_difference(lambda u: section(u).components, x)
    return {"jac": relative_error(section(x).jac, num)}


def require(errors: dict[str, float], tol: float, what: str) -> None:
    """Raise :class:`JetMismatch` naming the first check above ``tol``."""
    for key, err in errors.items():
        if not err <= tol:
            raise JetMismatch(f"{what}: {key} differs from finite differences by {err:.3e} > {tol:g}")
