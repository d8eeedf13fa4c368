"""Discrete measures on regular midpoint grids."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigInvalid, NonpositiveDensity
from ..geometry.densities import Density


@dataclass
class DiscreteMeasure:
    """Atoms and weights; grid-based measures also keep their grid layout."""

    points: np.ndarray
    weights: np.ndarray
    box: np.ndarray | None = None
    shape: tuple[int, ...] | None = None

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape != (len(self.points),):
            raise ConfigInvalid("one weight per atom is required")
        if np.any(self.weights <= 0):
            raise ConfigInvalid("atom weights must be positive")

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return len(self.points)

    @property
    def spacing(self) -> np.ndarray:
        return (self.box[:, 1] - self.box[:, 0]) / np.asarray(self.shape)

    @property
    def axes(self) -> list[np.ndarray]:
        return [lo + (np.arange(k) + 0.5) * (hi - lo) / k for (lo, hi), k in zip(self.box, self.shape)]

    def grid_index(self, flat: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(flat, self.shape))

    def flat_index(self, idx) -> int:
        return int(np.ravel_multi_index(tuple(idx), self.shape))

    def interior_mask(self, margin: int = 1) -> np.ndarray:
        """Atoms at least ``margin`` cells away from the grid boundary."""
        idx = np.indices(self.shape).reshape(len(self.shape), -1)
        ok = np.ones(len(self), dtype=bool)
        for ax, k in enumerate(self.shape):
            ok &= (idx[ax] >= margin) & (idx[ax] <= k - 1 - margin)
        return ok


def discretize(density: Density, box=None, grid=8) -> DiscreteMeasure:
    """Midpoint-rule atoms with weights proportional to density times cell volume."""
    box = density.box if box is None else np.asarray(box, dtype=float)
    n = box.shape[0]
    shape = tuple(np.broadcast_to(np.asarray(grid, dtype=int), (n,)).tolist())
    if min(shape) < 2:
        raise ConfigInvalid("grid resolution must be >= 2 per axis")
    axes = [lo + (np.arange(k) + 0.5) * (hi - lo) / k for (lo, hi), k in zip(box, shape)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    vals = density.value(pts)
    if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
        raise NonpositiveDensity("density must be positive at every grid midpoint")
    w = vals * np.prod((box[:, 1] - box[:, 0]) / np.asarray(shape))
    return DiscreteMeasure(pts, w / w.sum(), box, shape)
