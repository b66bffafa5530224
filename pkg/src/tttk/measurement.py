"""Boundary traveltime simulation, differential imaging, shearing and noise.

Sheared matrices are indexed ``[s, h]`` with receiver ``r = s + h (mod N)``;
unsheared ones are indexed ``[s, r]``.

Media are simulated in the *source frame*: for source ``k`` the perturbation
is evaluated on the Cartesian grid rotated by the source angle, so the source
always sits at ``(1, 0)`` and receiver ``h`` at ``(cos h, sin h)``.  Rotating a
polar perturbation by whole angular cells then permutes the solves exactly,
which keeps the discrete data rotation-equivariant.  Total Cartesian slowness
fields (:class:`~tttk.eikonal.SlownessField`) are solved in the fixed frame.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._parallel import pmap
from .eikonal import (
    DEFAULT_MAX_SWEEPS,
    DEFAULT_OUTSIDE_SLOWNESS,
    DEFAULT_TOL,
    ConvergenceError,
    SlownessError,
    SlownessField,
    outside_mask_apply,
    sweep_solve,
)
from .geometry import BoundaryRing, CartesianGrid, PolarGrid, bilinear_polar


class MeasurementError(ValueError):
    pass


@dataclass(frozen=True)
class ForwardConfig:
    grid: CartesianGrid
    ring: BoundaryRing
    m0: float = 1.0
    outside_slowness: float = DEFAULT_OUTSIDE_SLOWNESS
    tol: float = DEFAULT_TOL
    max_sweeps: int = DEFAULT_MAX_SWEEPS


@dataclass
class Measurement:
    """Sheared differential data ``d[s, h]`` with aligned background times ``u0[s, h]``."""

    d: np.ndarray
    u0: np.ndarray
    delta: float = 0.0

    def __post_init__(self):
        if self.d.shape != self.u0.shape:
            raise MeasurementError(f"d {self.d.shape} and u0 {self.u0.shape} differ in shape")

    def unsheared(self) -> np.ndarray:
        return unshear(self.d)


class PolarPerturbation:
    """A polar-grid perturbation treated as a bilinear function on the disk."""

    def __init__(self, values, pg: PolarGrid):
        self.values = np.asarray(values, dtype=np.float64)
        if self.values.shape != pg.shape:
            raise MeasurementError(f"polar field {self.values.shape} does not match grid {pg.shape}")
        self.pg = pg

    def __call__(self, x, y):
        r = np.hypot(x, y)
        out = bilinear_polar(self.values, self.pg, np.arctan2(y, x), np.minimum(r, 1.0))
        return np.where(r <= 1.0, out, 0.0)

    def in_frame(self, grid: CartesianGrid, k: int, n_sources: int) -> np.ndarray:
        step, rem = divmod(self.pg.n_theta, n_sources)
        if rem:
            return _rotated_eval(self, grid, 2.0 * np.pi * k / n_sources)
        theta, r, inside = _node_polar(grid.n)
        out = np.zeros((grid.n, grid.n))
        out[inside] = bilinear_polar(self.values, self.pg, theta[inside], r[inside], shift=k * step)
        return out


@lru_cache(maxsize=8)
def _node_polar(n):
    x, y = CartesianGrid(n).mesh()
    r = np.hypot(x, y)
    inside = r <= 1.0
    theta = np.mod(np.arctan2(y, x), 2.0 * np.pi)
    for a in (theta, r, inside):
        a.setflags(write=False)
    return theta, r, inside


def _rotated_eval(pert, grid, angle):
    x, y = grid.mesh()
    c, s = np.cos(angle), np.sin(angle)
    return np.asarray(pert(c * x - s * y, s * x + c * y), dtype=np.float64) * np.ones_like(x)


def frame_perturbation(pert, grid: CartesianGrid, k: int, n_sources: int) -> np.ndarray:
    """Perturbation on the grid nodes of the frame attached to source ``k``."""
    if pert is None:
        return np.zeros((grid.n, grid.n))
    if hasattr(pert, "in_frame"):
        return pert.in_frame(grid, k, n_sources)
    return _rotated_eval(pert, grid, 2.0 * np.pi * k / n_sources)


def receiver_stencil(grid: CartesianGrid, points: np.ndarray):
    """Bilinear stencils at boundary points using only nodes inside the closed disk.

    Returns ``(idx_i, idx_j, w)`` of shape ``(P, 4)``; weights of exterior nodes
    are dropped and the rest renormalised, so the large exterior traveltimes never
    leak into receiver values.
    """
    h = grid.spacing
    nodes = grid.nodes
    px, py = points[:, 0], points[:, 1]
    fx = np.clip((px + 1.0) / h, 0.0, grid.n - 1)
    fy = np.clip((py + 1.0) / h, 0.0, grid.n - 1)
    i = np.minimum(np.floor(fx).astype(np.int64), grid.n - 2)
    j = np.minimum(np.floor(fy).astype(np.int64), grid.n - 2)
    # keep every stencil node at positive weight so renormalisation never divides by zero
    tx = np.clip(fx - i, 1e-9, 1 - 1e-9)
    ty = np.clip(fy - j, 1e-9, 1 - 1e-9)
    ii = np.stack([i, i + 1, i, i + 1], axis=1)
    jj = np.stack([j, j, j + 1, j + 1], axis=1)
    w = np.stack([(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty], axis=1)
    inside = nodes[ii] ** 2 + nodes[jj] ** 2 <= 1.0
    w = np.where(inside, w, 0.0)
    tot = w.sum(axis=1, keepdims=True)
    if np.any(tot <= 0):
        raise MeasurementError("receiver cell has no node inside the disk")
    return ii, jj, w / tot


def _frame_slowness(pert, cfg: ForwardConfig, k: int) -> SlownessField:
    vals = cfg.m0 + frame_perturbation(pert, cfg.grid, k, cfg.ring.n)
    if not np.all(vals[cfg.grid.inside_disk()] > 0):
        raise SlownessError("m0 + perturbation must stay positive inside the disk")
    vals = np.where(vals > 0, vals, cfg.m0)
    return outside_mask_apply(SlownessField(vals, cfg.grid), cfg.outside_slowness)


def _solve_row(m: SlownessField, cfg: ForwardConfig, angle: float, ii, jj, w, k: int):
    try:
        u = sweep_solve(m, angle, cfg.tol, cfg.max_sweeps).values
    except ConvergenceError as exc:
        raise ConvergenceError(
            f"source {k}: {exc}", residual=exc.residual, n_sweeps=exc.n_sweeps
        ) from exc
    return (u[ii, jj] * w).sum(axis=1)


def simulate_sheared(pert, cfg: ForwardConfig) -> np.ndarray:
    """Traveltimes ``u^s(x_{s+h})`` for a perturbation of the background ``m0``.

    ``pert`` is ``None``, a callable ``f(x, y)`` in world coordinates, or a
    :class:`PolarPerturbation`.
    """
    ring = cfg.ring
    ii, jj, w = receiver_stencil(cfg.grid, ring.positions)

    def row(k):
        return _solve_row(_frame_slowness(pert, cfg, k), cfg, 0.0, ii, jj, w, k)

    return np.stack(pmap(row, range(ring.n)))


def background_traveltimes(cfg: ForwardConfig) -> np.ndarray:
    """Sheared ``u0[s, h]``; one solve suffices since the background is rotation invariant."""
    ii, jj, w = receiver_stencil(cfg.grid, cfg.ring.positions)
    m = _frame_slowness(None, cfg, 0)
    row = _solve_row(m, cfg, 0.0, ii, jj, w, 0)
    return np.tile(row, (cfg.ring.n, 1))


def forward_measurement(medium, cfg: ForwardConfig) -> np.ndarray:
    """Unsheared boundary traveltimes ``u^s(x_r)`` indexed ``[s, r]``.

    A :class:`SlownessField` is taken as the total slowness and solved in the
    fixed frame (each source at its own angle, receivers interpolated at the
    ring positions); anything else is a perturbation of ``cfg.m0``.
    """
    if isinstance(medium, SlownessField):
        if medium.grid != cfg.grid:
            raise MeasurementError("slowness grid does not match the forward configuration")
        m = outside_mask_apply(medium, cfg.outside_slowness)
        ii, jj, w = receiver_stencil(cfg.grid, cfg.ring.positions)
        angles = cfg.ring.angles
        return np.stack(pmap(lambda k: _solve_row(m, cfg, angles[k], ii, jj, w, k), range(cfg.ring.n)))
    return unshear(simulate_sheared(medium, cfg))


def measure(pert, cfg: ForwardConfig, u0: np.ndarray | None = None) -> Measurement:
    """Sheared differential data for a perturbation; pass a cached ``u0`` to skip its solve."""
    if u0 is None:
        u0 = background_traveltimes(cfg)
    return Measurement(differential(simulate_sheared(pert, cfg), u0), u0)


def differential(u: np.ndarray, u0: np.ndarray) -> np.ndarray:
    u = np.asarray(u)
    u0 = np.asarray(u0)
    if u.shape != u0.shape:
        raise MeasurementError(f"shape mismatch: {u.shape} vs {u0.shape}")
    return u - u0


def _check_square(D):
    D = np.asarray(D)
    if D.ndim < 2 or D.shape[-1] != D.shape[-2]:
        raise MeasurementError(f"shear needs square (N_s == N_r) matrices, got {D.shape}")
    return D


def shear(D: np.ndarray) -> np.ndarray:
    """``out[s, h] = D[s, (s + h) mod N]``; leading batch axes are allowed."""
    D = _check_square(D)
    n = D.shape[-1]
    idx = (np.arange(n)[:, None] + np.arange(n)[None, :]) % n
    return np.take_along_axis(D, np.broadcast_to(idx, D.shape), axis=-1)


def unshear(S: np.ndarray) -> np.ndarray:
    """Inverse of :func:`shear`: ``out[s, r] = S[s, (r - s) mod N]``."""
    S = _check_square(S)
    n = S.shape[-1]
    idx = (np.arange(n)[None, :] - np.arange(n)[:, None]) % n
    return np.take_along_axis(S, np.broadcast_to(idx, S.shape), axis=-1)


def add_noise(meas: Measurement, delta: float, rng: np.random.Generator) -> Measurement:
    """Multiplicative traveltime noise ``d + Z delta (d + u0)`` with one ``Z`` per entry."""
    if delta < 0:
        raise ValueError("noise level must be non-negative")
    if delta == 0:
        return Measurement(meas.d.copy(), meas.u0, meas.delta)
    z = rng.standard_normal(meas.d.shape)
    noisy = (1.0 + z * delta) * meas.d + z * delta * meas.u0
    return Measurement(noisy, meas.u0, delta)
