"""Point-source eikonal solver: first-order Godunov upwinding with fast sweeping."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .geometry import CartesianGrid

DEFAULT_OUTSIDE_SLOWNESS = 100.0
DEFAULT_TOL = 1e-8
DEFAULT_MAX_SWEEPS = 1000

# (di, dj) directions of the four Gauss-Seidel orderings
SWEEP_ORDERINGS = ((1, 1), (-1, 1), (-1, -1), (1, -1))


class EikonalError(RuntimeError):
    """Base class for solver failures."""


class SlownessError(ValueError):
    """Invalid slowness input (non-positive values, bad outside slowness)."""


class ConvergenceError(EikonalError):
    def __init__(self, message, residual, n_sweeps):
        super().__init__(message)
        self.residual = residual
        self.n_sweeps = n_sweeps


@dataclass
class SlownessField:
    """Positive slowness values on a Cartesian grid."""

    values: np.ndarray
    grid: CartesianGrid

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.grid.n, self.grid.n):
            raise SlownessError(
                f"slowness shape {self.values.shape} does not match grid {(self.grid.n,) * 2}"
            )
        if not np.all(self.values > 0):
            raise SlownessError("slowness must be strictly positive everywhere")

    @classmethod
    def constant(cls, grid: CartesianGrid, value: float = 1.0) -> "SlownessField":
        return cls(np.full((grid.n, grid.n), float(value)), grid)

    @classmethod
    def from_function(cls, grid: CartesianGrid, fn) -> "SlownessField":
        x, y = grid.mesh()
        return cls(np.asarray(fn(x, y), dtype=np.float64) * np.ones_like(x), grid)


@dataclass
class TraveltimeField:
    values: np.ndarray
    grid: CartesianGrid
    source: tuple[float, float]
    n_sweeps: int
    residuals: list = field(default_factory=list)


def outside_mask_apply(
    m: SlownessField, outside_slowness: float = DEFAULT_OUTSIDE_SLOWNESS
) -> SlownessField:
    """Return a copy of ``m`` with every node outside the unit disk set to ``outside_slowness``."""
    inside = m.grid.inside_disk()
    max_inside = float(m.values[inside].max())
    if outside_slowness < 10.0 * max_inside:
        raise SlownessError(
            f"outside slowness {outside_slowness} must be at least 10x the largest "
            f"inside slowness ({max_inside})"
        )
    values = m.values.copy()
    values[~inside] = outside_slowness
    return SlownessField(values, m.grid)


@njit(cache=True, nogil=True)
def _sweep_kernel(u, m, fixed, h, tol, max_sweeps, orderings, residuals):
    n = u.shape[0]
    inf = np.inf
    n_cycles = 0
    sweeps = 0
    while sweeps < max_sweeps:
        change = 0.0
        for o in range(orderings.shape[0]):
            di = orderings[o, 0]
            dj = orderings[o, 1]
            i_start = 0 if di > 0 else n - 1
            j_start = 0 if dj > 0 else n - 1
            for ii in range(n):
                i = i_start + di * ii
                for jj in range(n):
                    j = j_start + dj * jj
                    if fixed[i, j]:
                        continue
                    a = inf
                    if i > 0:
                        a = u[i - 1, j]
                    if i < n - 1 and u[i + 1, j] < a:
                        a = u[i + 1, j]
                    b = inf
                    if j > 0:
                        b = u[i, j - 1]
                    if j < n - 1 and u[i, j + 1] < b:
                        b = u[i, j + 1]
                    if a == inf and b == inf:
                        continue
                    f = m[i, j] * h
                    if a == inf or b == inf or abs(a - b) >= f:
                        ubar = min(a, b) + f
                    else:
                        ubar = 0.5 * (a + b + np.sqrt(2.0 * f * f - (a - b) * (a - b)))
                    old = u[i, j]
                    if ubar < old:
                        u[i, j] = ubar
                        d = old - ubar
                        if d > change:
                            change = d
            sweeps += 1
        residuals[n_cycles] = change
        n_cycles += 1
        if change < tol:
            return n_cycles, True
    return n_cycles, False


def source_cell(grid: CartesianGrid, point) -> tuple[int, int]:
    """Lower-left node index of the grid cell containing ``point``."""
    h = grid.spacing
    i = int(np.clip(np.floor((point[0] + 1.0) / h), 0, grid.n - 2))
    j = int(np.clip(np.floor((point[1] + 1.0) / h), 0, grid.n - 2))
    return i, j


def sweep_solve(
    m: SlownessField,
    source_angle: float | None = 0.0,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    *,
    source_point=None,
    orderings=SWEEP_ORDERINGS,
) -> TraveltimeField:
    """Solve ``|grad u| = m`` with ``u(x_s) = 0`` by fast sweeping.

    The source is the boundary point at ``source_angle`` unless ``source_point``
    is given.  The four nodes of the cell containing the source are fixed to
    ``m_s |x - x_s|``, where ``m_s`` is the smallest slowness among those nodes
    (exterior nodes carry the large outside slowness).

    Raises
    ------
    ConvergenceError
        If the maximum nodal update is still ``>= tol`` after ``max_sweeps`` sweeps.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not np.all(m.values > 0):
        raise SlownessError("slowness must be strictly positive everywhere")
    grid = m.grid
    if source_point is None:
        source_point = (np.cos(source_angle), np.sin(source_angle))
    xs, ys = float(source_point[0]), float(source_point[1])
    nodes = grid.nodes
    i, j = source_cell(grid, (xs, ys))

    u = np.full((grid.n, grid.n), np.inf)
    fixed = np.zeros((grid.n, grid.n), dtype=np.bool_)
    ms = m.values[i : i + 2, j : j + 2].min()
    for a in (i, i + 1):
        for b in (j, j + 1):
            u[a, b] = ms * np.hypot(nodes[a] - xs, nodes[b] - ys)
            fixed[a, b] = True

    orders = np.asarray(orderings, dtype=np.int64).reshape(-1, 2)
    residuals = np.empty(max_sweeps // len(orders) + 2)
    n_cycles, ok = _sweep_kernel(
        u, m.values, fixed, grid.spacing, float(tol), int(max_sweeps), orders, residuals
    )
    hist = residuals[:n_cycles].tolist()
    if not ok:
        last = hist[-1] if hist else np.inf
        raise ConvergenceError(
            f"fast sweeping did not converge within {max_sweeps} sweeps "
            f"(last max update {last:.3e}, tol {tol:.1e})",
            residual=last,
            n_sweeps=n_cycles * len(orders),
        )
    return TraveltimeField(u, grid, (xs, ys), n_cycles * len(orders), hist)
