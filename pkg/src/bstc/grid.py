"""Sampled functions on uniform grids, with finite-difference derivatives."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def uniform_grid(c: float, d: float, n: int) -> np.ndarray:
    """``n + 1`` equispaced nodes on ``[c, d]`` with exact endpoints."""
    if n < 1:
        raise ValueError("grid needs at least one cell")
    if not d > c:
        raise ValueError(f"need c < d, got [{c}, {d}]")
    x = c + (d - c) * np.arange(n + 1) / n
    x[-1] = d
    return x


def first_derivative(values: np.ndarray, h: float) -> np.ndarray:
    """Central differences inside, second-order one-sided stencils at the ends."""
    v = np.asarray(values, dtype=float)
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - v[:-2]) / (2.0 * h)
    out[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
    out[-1] = (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * h)
    return out


def second_derivative(values: np.ndarray, h: float) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / (h * h)
    if v.size >= 4:
        out[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / (h * h)
        out[-1] = (2.0 * v[-1] - 5.0 * v[-2] + 4.0 * v[-3] - v[-4]) / (h * h)
    else:
        out[0], out[-1] = out[1], out[-2]
    return out


def simpson(values: np.ndarray, h: float) -> float:
    """Composite Simpson rule; the number of cells must be even."""
    v = np.asarray(values, dtype=float)
    n = v.size - 1
    if n < 2 or n % 2:
        raise ValueError(f"Simpson's rule needs an even number of cells, got {n}")
    return float(h / 3.0 * (v[0] + v[-1] + 4.0 * v[1:-1:2].sum() + 2.0 * v[2:-1:2].sum()))


@dataclass(frozen=True)
class GridFunction:
    """Values of a function at the nodes of a uniform grid.

    ``d1`` and ``d2`` are always recomputed from ``values``; they are never
    taken from a caller.
    """

    grid: np.ndarray
    values: np.ndarray
    d1: np.ndarray = field(init=False, repr=False, compare=False)
    d2: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape:
            raise ValueError("grid and values must be 1-d arrays of equal length")
        if grid.size < 4:
            raise ValueError("a grid function needs at least 3 cells")
        steps = np.diff(grid)
        h = (grid[-1] - grid[0]) / (grid.size - 1)
        if np.any(steps <= 0) or np.max(np.abs(steps - h)) > 1e-9 * max(1.0, abs(h)):
            raise ValueError("grid must be uniform and increasing")
        grid.setflags(write=False)
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "d1", first_derivative(values, h))
        object.__setattr__(self, "d2", second_derivative(values, h))

    @classmethod
    def sample(cls, f, grid) -> "GridFunction":
        grid = np.asarray(grid, dtype=float)
        return cls(grid, np.broadcast_to(np.asarray(f(grid), dtype=float), grid.shape))

    @property
    def n(self) -> int:
        return self.grid.size - 1

    @property
    def h(self) -> float:
        return float((self.grid[-1] - self.grid[0]) / self.n)

    @property
    def c(self) -> float:
        return float(self.grid[0])

    @property
    def d(self) -> float:
        return float(self.grid[-1])

    def at(self, x) -> np.ndarray | float:
        """Piecewise-linear interpolation of the nodal values."""
        out = np.interp(x, self.grid, self.values)
        return float(out) if np.ndim(out) == 0 else out

    def integral(self) -> float:
        return simpson(self.values, self.h)

    def mean(self) -> float:
        return self.integral() / (self.d - self.c)

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.grid, values)
