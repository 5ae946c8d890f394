"""Uniform first-order view of the four dynamics formalisms.

A :class:`Dynamics` bundles a vector field on flat state vectors
``s = (base coordinates, fibre coordinates)`` with its energy, conserved
quantities, chart guard, and the registered virial functions. Everything
the integrator and the averaging code touch goes through this interface.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .jets import BundleJet

FORMALISMS = ("tq", "tstarq", "algebroid_l", "algebroid_h")


@dataclass(frozen=True)
class VirialFunction:
    """A virial function ``G`` with the integrand whose average is tested.

    ``integrand(x, y)`` must equal ``dG/dt`` along the flow; the boundary
    term ``(G(T) - G(0)) / T`` is its independent oracle.
    """

    name: str
    G: BundleJet
    integrand: Callable[[np.ndarray, np.ndarray], np.ndarray]
    description: str = ""

    def value(self, x, y) -> np.ndarray:
        return self.G(x, y).value

    def grad_norm(self, x, y) -> np.ndarray:
        g = self.G(x, y)
        return np.sqrt(np.sum(g.d_base**2, axis=-1) + np.sum(g.d_fibre**2, axis=-1))


@dataclass(frozen=True)
class Dynamics:
    model: str
    formalism: str
    dim_base: int
    dim_fibre: int
    state_names: tuple[str, ...]
    rates: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]
    energy: Callable[[np.ndarray, np.ndarray], np.ndarray]
    guard: Callable[[np.ndarray], np.ndarray]
    virials: dict[str, VirialFunction] = field(default_factory=dict)
    monitors: dict[str, Callable] = field(default_factory=dict)
    angles: tuple[int, ...] = ()
    # builds a virial function from constant section components and a name
    section_virial: Optional[Callable[[np.ndarray, str], VirialFunction]] = None
    # optional map applied to sampled states after integration
    project: Optional[Callable[[np.ndarray], np.ndarray]] = None

    @property
    def dim(self) -> int:
        return self.dim_base + self.dim_fibre

    def split(self, s) -> tuple[np.ndarray, np.ndarray]:
        s = np.asarray(s, dtype=float)
        return s[..., : self.dim_base], s[..., self.dim_base :]

    def field(self, t, s) -> np.ndarray:
        x, y = self.split(s)
        dx, dy = self.rates(x, y)
        return np.concatenate([dx, dy], axis=-1)

    def in_chart(self, s) -> np.ndarray:
        return self.guard(self.split(s)[0])

    def conserved(self, s) -> dict[str, np.ndarray]:
        x, y = self.split(s)
        out = {"energy": self.energy(x, y)}
        out.update({k: f(x, y) for k, f in self.monitors.items()})
        return out
