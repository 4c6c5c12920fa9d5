"""Artificial measurements from a ground-truth parameter set."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .grid_pde import GridSpec, ModelParams, observe, solve_forward


@dataclass(frozen=True)
class NoiseSpec:
    """Multiplicative Gaussian noise: ``Y = F (1 + eps)``, ``eps ~ N(0, level^2)``."""

    relative_level: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not (self.relative_level >= 0 and np.isfinite(self.relative_level)):
            raise ValueError(f"relative_level must be >= 0, got {self.relative_level}")


@dataclass(frozen=True)
class Observations:
    """Measured prices as seen by the estimators (no ground truth attached)."""

    points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).ravel()
        vals = np.asarray(self.values, dtype=float).ravel()
        if pts.size < 1 or pts.shape != vals.shape:
            raise ValueError("points and values must be non-empty and of equal length")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("measurement points must be strictly increasing")
        if not np.all(np.isfinite(vals)) or not np.all(np.isfinite(pts)):
            raise ValueError("measurements must be finite")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return self.points.size

    def to_csv(self, path) -> None:
        write_measurements_csv(path, self.points, self.values)

    @classmethod
    def from_csv(cls, path) -> "Observations":
        pts, vals = read_measurements_csv(path)
        return cls(pts, vals)


@dataclass(frozen=True)
class MeasurementSet(Observations):
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    truth: ModelParams | None = None

    def observed(self) -> Observations:
        """Strip the ground truth before handing data to an estimator."""
        return Observations(self.points.copy(), self.values.copy())


def interior_points(grid: GridSpec) -> np.ndarray:
    """Default measurement locations: every interior node."""
    return grid.interior


def generate(
    truth: ModelParams,
    grid: GridSpec,
    points=None,
    noise: NoiseSpec | None = None,
    drift: Callable | None = None,
) -> MeasurementSet:
    """
    Noisy prices ``Y_j = F_j(truth) (1 + eps_j)``.

    Noise comes from ``numpy.random.default_rng(seed)`` (PCG64 bit
    generator, ziggurat normals), so runs repeat exactly for a fixed seed.
    ``drift`` overrides the cubic perturbation of ``truth`` when the data
    should come from a different drift shape (e.g. ``np.sin``).
    """
    noise = noise or NoiseSpec()
    pts = interior_points(grid) if points is None else np.asarray(points, dtype=float)
    clean = observe(solve_forward(truth, grid, drift=drift), pts)
    if noise.relative_level > 0:
        eps = np.random.default_rng(noise.seed).standard_normal(clean.shape)
        values = clean * (1.0 + noise.relative_level * eps)
    else:
        values = clean.copy()
    return MeasurementSet(pts, values, noise=noise, truth=truth)


def write_measurements_csv(path, points, values) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["y", "value"])
        for y, v in zip(points, values):
            w.writerow([repr(float(y)), repr(float(v))])


def read_measurements_csv(path) -> tuple[np.ndarray, np.ndarray]:
    with open(Path(path), newline="") as fh:
        rows = list(csv.DictReader(fh))
    return (
        np.array([float(r["y"]) for r in rows]),
        np.array([float(r["value"]) for r in rows]),
    )
