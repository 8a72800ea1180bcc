# tools/grid.py
"""
Square-grid geometry and node fields with a homogeneous Dirichlet boundary.

Nodes are indexed (i, j) in [0, N]^2 with x = i*h and y = j*h; values[i, j] holds the
node value, so the first axis is x. Boundary nodes (i or j in {0, N}) always carry 0:
every constructor re-zeroes them instead of trusting the caller.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

from tools.errors import ValidationError

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

MIN_SUBDIVISIONS = 4


@dataclass(frozen=True)
class GridGeometry:
    """(0, L) x (0, L) split into N cells per side, (N+1)^2 nodes."""

    L: float
    N: int

    def __post_init__(self):
        if not (isinstance(self.L, (int, float)) and math.isfinite(self.L) and self.L > 0):
            raise ValidationError(f"domain length L must be positive and finite, got {self.L!r}")
        if isinstance(self.N, bool) or int(self.N) != self.N or self.N < MIN_SUBDIVISIONS:
            raise ValidationError(f"N must be an integer >= {MIN_SUBDIVISIONS}, got {self.N!r}")
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "N", int(self.N))

    @property
    def h(self) -> float:
        return self.L / self.N

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.N + 1, self.N + 1)

    @property
    def area(self) -> float:
        return self.L * self.L


def build_grid(L: float, N: int) -> GridGeometry:
    return GridGeometry(L=L, N=N)


def node_coordinates(g: GridGeometry) -> Tuple[np.ndarray, np.ndarray]:
    """X[i, j] = i*h, Y[i, j] = j*h."""
    axis = np.arange(g.N + 1, dtype=np.float64) * g.h
    return np.meshgrid(axis, axis, indexing="ij")


def _zero_boundary(values: np.ndarray) -> None:
    values[0, :] = 0.0
    values[-1, :] = 0.0
    values[:, 0] = 0.0
    values[:, -1] = 0.0


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Node values on a GridGeometry; read-only, boundary exactly zero, all finite."""

    geometry: GridGeometry
    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64, copy=True)
        if arr.shape != self.geometry.shape:
            raise ValidationError(f"field shape {arr.shape} does not match grid {self.geometry.shape}")
        _zero_boundary(arr)
        if not np.all(np.isfinite(arr)):
            i, j = np.argwhere(~np.isfinite(arr))[0]
            raise ValidationError(f"field has a non-finite value at node ({i}, {j})")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def interior(self) -> np.ndarray:
        return self.values[1:-1, 1:-1]

    @property
    def max_value(self) -> float:
        return float(self.values.max())

    @property
    def min_value(self) -> float:
        return float(self.values.min())

    def with_values(self, values: np.ndarray) -> "ScalarField":
        return ScalarField(self.geometry, values)

    def __neg__(self) -> "ScalarField":
        return ScalarField(self.geometry, -self.values)

    def scaled(self, s: float) -> "ScalarField":
        return ScalarField(self.geometry, s * self.values)


def zeros(g: GridGeometry) -> ScalarField:
    return ScalarField(g, np.zeros(g.shape))


def sample(g: GridGeometry, f: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> ScalarField:
    """
    Evaluate f at every node and force the boundary to zero.

    f is called once with the coordinate arrays (X, Y) and must broadcast over them.
    """
    X, Y = node_coordinates(g)
    vals = np.broadcast_to(np.asarray(f(X, Y), dtype=np.float64), g.shape).copy()
    _zero_boundary(vals)
    if not np.all(np.isfinite(vals)):
        i, j = np.argwhere(~np.isfinite(vals))[0]
        raise ValidationError(f"sampled function is not finite at node ({i}, {j}) = ({i * g.h}, {j * g.h})")
    return ScalarField(g, vals)


def eigenfunction(g: GridGeometry) -> ScalarField:
    """Principal Dirichlet eigenfunction sin(pi x/L) sin(pi y/L), peak 1 at the centre."""
    k = math.pi / g.L
    return sample(g, lambda x, y: np.sin(k * x) * np.sin(k * y))


# -------------------------
# Stencils
# -------------------------
def laplacian_array(values: np.ndarray, h: float, out: np.ndarray = None) -> np.ndarray:
    """Five-point Laplacian of a node array; boundary entries of the result are 0."""
    if out is None:
        out = np.zeros_like(values)
    else:
        _zero_boundary(out)
    c = values[1:-1, 1:-1]
    out[1:-1, 1:-1] = (values[2:, 1:-1] + values[:-2, 1:-1] + values[1:-1, 2:] + values[1:-1, :-2] - 4.0 * c) / (h * h)
    return out


def apply_laplacian(u: ScalarField) -> ScalarField:
    return ScalarField(u.geometry, laplacian_array(u.values, u.geometry.h))


def inf_norm(u: ScalarField) -> float:
    return float(np.max(np.abs(u.values)))


def edge_gradient_sum(values: np.ndarray) -> float:
    """Sum of squared differences over every x-edge and y-edge (h^2 and 1/h^2 cancel)."""
    dx = np.diff(values, axis=0)
    dy = np.diff(values, axis=1)
    return float(np.sum(dx * dx) + np.sum(dy * dy))


def edge_gradient_pairing(a: np.ndarray, b: np.ndarray) -> float:
    """Edge inner product sum of (a_{e+} - a_{e-})(b_{e+} - b_{e-})."""
    return float(np.sum(np.diff(a, axis=0) * np.diff(b, axis=0)) + np.sum(np.diff(a, axis=1) * np.diff(b, axis=1)))


def trapezoid_weights(g: GridGeometry) -> np.ndarray:
    """Node weights 1 inside, 1/2 on edges, 1/4 at corners (multiply by h^2 for area)."""
    w1d = np.ones(g.N + 1)
    w1d[0] = w1d[-1] = 0.5
    return np.outer(w1d, w1d)


def discrete_lambda1(g: GridGeometry) -> float:
    """Smallest eigenvalue of the negative five-point Laplacian with Dirichlet nodes."""
    s = math.sin(math.pi * g.h / (2.0 * g.L))
    return 8.0 / (g.h * g.h) * s * s


def continuum_lambda1(g: GridGeometry) -> float:
    """2 pi^2 / L^2; equals 1 for L = sqrt(2) pi."""
    return 2.0 * math.pi ** 2 / (g.L * g.L)
