"""Compactly supported C^2 cutoff ``phi(x, xbar) = psi(|x - x0|^2 / r^2)``, ``psi(s) = max(0, 1 - s)^3``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigInvalid, SupportEscapesRegion
from ..geometry.costs import as_box


@dataclass
class Cutoff:
    """Cutoff depending on the source coordinates only.

    Evaluators accept either ``x`` (length n) or ``p = (x, xbar)``; gradients and
    Hessians are returned in the same coordinates as the input. ``scale``
    multiplies the whole function.
    """

    center: np.ndarray
    radius: float
    region: np.ndarray | None = None
    scale: float = 1.0

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        self.radius = float(self.radius)

    @property
    def dim(self) -> int:
        return self.center.size

    def _s(self, q):
        q = np.asarray(q, dtype=float)
        z = q[..., : self.dim] - self.center
        return z, np.sum(z * z, axis=-1) / self.radius**2

    def value(self, q):
        _, s = self._s(q)
        return self.scale * np.maximum(0.0, 1.0 - s) ** 3

    __call__ = value

    def grad(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        z, s = self._s(q)
        out = np.zeros(q.shape[-1])
        out[: self.dim] = self.scale * (-3.0 * max(0.0, 1.0 - s) ** 2) * 2.0 * z / self.radius**2
        return out

    def hessian(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        z, s = self._s(q)
        t = max(0.0, 1.0 - s)
        r2 = self.radius**2
        out = np.zeros((q.shape[-1], q.shape[-1]))
        n = self.dim
        out[:n, :n] = self.scale * (6.0 * t * 4.0 * np.outer(z, z) / r2**2
                                    - 3.0 * t**2 * 2.0 * np.eye(n) / r2)
        return out

    def scaled(self, t: float) -> "Cutoff":
        return Cutoff(self.center, self.radius, self.region, self.scale * t)


def make_cutoff(center, radius, region) -> Cutoff:
    """Cutoff centered at ``center``; the closed ball of ``radius`` must lie in the box ``region``."""
    center = np.asarray(center, dtype=float)
    if radius <= 0 or not np.isfinite(radius):
        raise ConfigInvalid("cutoff radius must be positive")
    box = as_box(region, center.size)
    if np.any(center - radius < box[:, 0]) or np.any(center + radius > box[:, 1]):
        raise SupportEscapesRegion(
            f"ball of radius {radius:g} about {center.tolist()} leaves the region {box.tolist()}")
    return Cutoff(center, radius, box)
