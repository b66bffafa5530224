"""Grids, boundary rings and bilinear resampling between Cartesian and polar fields.

Conventions
-----------
* Cartesian fields are arrays of shape ``(n, n)`` indexed ``[i, j]`` with
  ``x = nodes[i]`` and ``y = nodes[j]`` on the square ``[-1, 1]^2``.
* Polar fields are arrays of shape ``(n_theta, n_rho)`` indexed
  ``[i_theta, i_rho]`` with ``theta_j = 2 pi j / n_theta`` and
  ``rho_k = (k + 1) / n_rho``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi


class GridError(ValueError):
    """Raised for invalid grid parameters or out-of-extent queries."""


@dataclass(frozen=True)
class CartesianGrid:
    """Uniform node grid on ``[-1, 1]^2`` with ``n`` points per axis."""

    n: int

    def __post_init__(self):
        if self.n < 8:
            raise GridError(f"CartesianGrid needs n >= 8, got {self.n}")

    @property
    def spacing(self) -> float:
        return 2.0 / (self.n - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(-1.0, 1.0, self.n)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.nodes, self.nodes, indexing="ij")

    def inside_disk(self) -> np.ndarray:
        x, y = self.mesh()
        return x * x + y * y <= 1.0


@dataclass(frozen=True)
class PolarGrid:
    """Uniform ``(theta, rho)`` grid on the unit disk, origin excluded, ``rho = 1`` included."""

    n_theta: int
    n_rho: int

    def __post_init__(self):
        if self.n_theta < 4 or self.n_theta % 2:
            raise GridError(f"n_theta must be even and >= 4, got {self.n_theta}")
        if self.n_rho < 2:
            raise GridError(f"n_rho must be >= 2, got {self.n_rho}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_theta, self.n_rho)

    @property
    def dtheta(self) -> float:
        return TWO_PI / self.n_theta

    @property
    def drho(self) -> float:
        return 1.0 / self.n_rho

    @property
    def theta(self) -> np.ndarray:
        return TWO_PI * np.arange(self.n_theta) / self.n_theta

    @property
    def rho(self) -> np.ndarray:
        return (np.arange(self.n_rho) + 1.0) / self.n_rho

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(theta, rho)`` arrays of shape ``(n_theta, n_rho)``."""
        return np.meshgrid(self.theta, self.rho, indexing="ij")

    def cartesian_nodes(self) -> tuple[np.ndarray, np.ndarray]:
        t, r = self.mesh()
        return r * np.cos(t), r * np.sin(t)

    def cell_areas(self) -> np.ndarray:
        """Area element ``rho dtheta drho`` attached to each node."""
        _, r = self.mesh()
        return r * self.dtheta * self.drho


@dataclass(frozen=True)
class BoundaryRing:
    """Equispaced sources and receivers on the unit circle."""

    n_sources: int
    n_receivers: int | None = None

    def __post_init__(self):
        if self.n_receivers is None:
            object.__setattr__(self, "n_receivers", self.n_sources)
        if self.n_sources < 2:
            raise GridError("BoundaryRing needs at least 2 sources")
        if self.n_receivers != self.n_sources:
            raise GridError(
                f"unequal source/receiver counts are not supported "
                f"({self.n_sources} != {self.n_receivers})"
            )

    @property
    def n(self) -> int:
        return self.n_sources

    @property
    def angles(self) -> np.ndarray:
        return TWO_PI * np.arange(self.n_sources) / self.n_sources

    @property
    def positions(self) -> np.ndarray:
        a = self.angles
        return np.stack([np.cos(a), np.sin(a)], axis=1)


def bilinear_cartesian(field: np.ndarray, grid: CartesianGrid, x, y) -> np.ndarray:
    """Bilinear interpolation of a Cartesian field at arbitrary points."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    tol = 1e-12
    if np.any(np.abs(x) > 1 + tol) or np.any(np.abs(y) > 1 + tol):
        raise GridError("interpolation point lies outside the Cartesian grid extent [-1, 1]^2")
    h = grid.spacing
    fx = np.clip((x + 1.0) / h, 0.0, grid.n - 1)
    fy = np.clip((y + 1.0) / h, 0.0, grid.n - 1)
    i = np.minimum(np.floor(fx).astype(np.int64), grid.n - 2)
    j = np.minimum(np.floor(fy).astype(np.int64), grid.n - 2)
    tx = fx - i
    ty = fy - j
    return (
        field[i, j] * (1 - tx) * (1 - ty)
        + field[i + 1, j] * tx * (1 - ty)
        + field[i, j + 1] * (1 - tx) * ty
        + field[i + 1, j + 1] * tx * ty
    )


def polar_stencil(pg: PolarGrid, theta, rho, shift: int = 0):
    """Bilinear stencil in ``(theta, rho)`` for points with ``rho <= 1``.

    ``shift`` adds an integer number of angular cells to every point after the
    fractional index is formed, so rotated lookups reuse identical weights.

    Returns index arrays ``(it0, it1, ir0, ir1)`` and weights ``(wt, wr)`` where
    ``wt`` weighs ``it1`` and ``wr`` weighs ``ir1``.  ``ir0 == -1`` stands for the
    origin, whose value is the mean of the innermost ring.
    """
    theta = np.asarray(theta, dtype=float)
    rho = np.asarray(rho, dtype=float)
    ft = np.mod(theta / pg.dtheta, pg.n_theta)
    it0 = (np.floor(ft).astype(np.int64) + shift) % pg.n_theta
    wt = ft - np.floor(ft)
    it1 = (it0 + 1) % pg.n_theta
    # rho node k sits at (k + 1) drho; fractional index relative to node 0
    fr = np.clip(rho / pg.drho - 1.0, -1.0, pg.n_rho - 1)
    ir0 = np.floor(fr).astype(np.int64)
    ir0 = np.minimum(ir0, pg.n_rho - 2)
    wr = fr - ir0
    return it0, it1, ir0, ir0 + 1, wt, wr


def bilinear_polar(field: np.ndarray, pg: PolarGrid, theta, rho, shift: int = 0) -> np.ndarray:
    """Bilinear interpolation of a polar field, periodic in theta.

    Between the origin and the innermost ring the field is interpolated
    linearly in ``rho`` towards the ring mean.
    """
    field = np.asarray(field)
    if field.shape != pg.shape:
        raise GridError(f"polar field has shape {field.shape}, grid expects {pg.shape}")
    it0, it1, ir0, ir1, wt, wr = polar_stencil(pg, theta, rho, shift)
    center = field[:, 0].mean()
    ext = np.concatenate([field, np.full((pg.n_theta, 1), center)], axis=1)
    # index -1 wraps onto the appended centre column
    v00 = ext[it0, ir0]
    v10 = ext[it1, ir0]
    v01 = ext[it0, ir1]
    v11 = ext[it1, ir1]
    return (v00 * (1 - wt) + v10 * wt) * (1 - wr) + (v01 * (1 - wt) + v11 * wt) * wr


def sample_cart_to_polar(field: np.ndarray, cg: CartesianGrid, pg: PolarGrid) -> np.ndarray:
    """Bilinearly sample a Cartesian field at every polar node."""
    field = np.asarray(field)
    if field.shape != (cg.n, cg.n):
        raise GridError(f"Cartesian field has shape {field.shape}, grid expects {(cg.n, cg.n)}")
    x, y = pg.cartesian_nodes()
    return bilinear_cartesian(field, cg, x, y)


def sample_polar_to_cart(
    field: np.ndarray, pg: PolarGrid, cg: CartesianGrid, outside_value: float = 0.0
) -> np.ndarray:
    """Bilinearly sample a polar field at every Cartesian node; nodes with ``|x| > 1`` get ``outside_value``."""
    x, y = cg.mesh()
    out = np.full(x.shape, float(outside_value))
    inside = cg.inside_disk()
    r = np.minimum(np.hypot(x[inside], y[inside]), 1.0)
    out[inside] = bilinear_polar(field, pg, np.arctan2(y[inside], x[inside]), r)
    return out


def rotate_polar(field: np.ndarray, k: int) -> np.ndarray:
    """Rotate a polar field by ``k`` angular cells (counter-clockwise)."""
    return np.roll(field, k, axis=0)
