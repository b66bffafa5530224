"""Straight-ray linearisation of the traveltime map for a constant background.

The kernel ``kappa[h, rho, t]`` realises

    d1(s, h) = sum_rho sum_theta kappa[h, rho, (s - theta) mod N] m(theta, rho)

so both the forward map and its adjoint are families of circular convolutions
along the angular axis.  It is assembled once for the source at angle 0 by
walking each chord with midpoint quadrature and scattering the arclength
weights bilinearly onto the polar nodes (the adjoint of bilinear sampling).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import BoundaryRing, PolarGrid, polar_stencil


class KernelError(ValueError):
    pass


@dataclass(frozen=True)
class Chord:
    """Straight characteristic between two boundary points."""

    s: float
    h: float

    @property
    def start(self) -> np.ndarray:
        return np.array([np.cos(self.s), np.sin(self.s)])

    @property
    def end(self) -> np.ndarray:
        return np.array([np.cos(self.s + self.h), np.sin(self.s + self.h)])

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.end - self.start))

    def midpoints(self, n: int) -> np.ndarray:
        tau = (np.arange(n) + 0.5) / n
        a, b = self.start, self.end
        return a[None, :] + tau[:, None] * (b - a)[None, :]


def chord_integral(pert, s: float, h: float, n_quad: int = 1000) -> float:
    """Line integral of ``pert(x, y)`` along the chord from angle ``s`` to ``s + h``."""
    if n_quad < 2:
        raise ValueError("n_quad must be >= 2")
    if np.isclose(np.mod(h, 2 * np.pi), 0.0, atol=1e-14) or np.isclose(
        np.mod(h, 2 * np.pi), 2 * np.pi, atol=1e-14
    ):
        return 0.0
    chord = Chord(s, h)
    p = chord.midpoints(n_quad)
    vals = np.asarray(pert(p[:, 0], p[:, 1]), dtype=float) * np.ones(n_quad)
    return chord.length * float(vals.mean())


def default_n_quad(pg: PolarGrid) -> int:
    """Four samples per polar cell crossed by a diameter."""
    return 4 * 2 * pg.n_rho


@dataclass
class LinearKernel:
    kappa: np.ndarray
    pg: PolarGrid
    ring: BoundaryRing
    n_quad: int

    def __post_init__(self):
        shape = (self.ring.n, self.pg.n_rho, self.pg.n_theta)
        if self.kappa.shape != shape:
            raise KernelError(f"kernel shape {self.kappa.shape} != {shape}")
        self._khat = np.fft.rfft(self.kappa, axis=-1)

    @property
    def n(self) -> int:
        return self.pg.n_theta

    def apply(self, m: np.ndarray) -> np.ndarray:
        return apply_K(self, m)

    def adjoint(self, d: np.ndarray) -> np.ndarray:
        return apply_K_adjoint(self, d)

    def normal(self, x: np.ndarray) -> np.ndarray:
        return apply_K_adjoint(self, apply_K(self, x))

    def normal_diagonal(self) -> np.ndarray:
        """Exact diagonal of ``K^T K``; constant along theta."""
        col = (self.kappa**2).sum(axis=(0, 2))
        return np.broadcast_to(col, self.pg.shape).copy()

    def dense(self) -> np.ndarray:
        """Materialise ``K`` with rows ``(s, h)`` and columns ``(theta, rho)`` in C order."""
        n, nr = self.n, self.pg.n_rho
        s = np.arange(n)
        t = (s[:, None] - s[None, :]) % n  # [s, theta]
        # K[s, h, theta, rho] = kappa[h, rho, (s - theta) % n]
        K = self.kappa[:, :, t]  # [h, rho, s, theta]
        return K.transpose(2, 0, 3, 1).reshape(n * self.ring.n, n * nr)


def assemble_kernel(pg: PolarGrid, ring: BoundaryRing, n_quad: int | None = None) -> LinearKernel:
    """Build ``kappa[h, rho, dtheta]`` for a unit constant background.

    ``n_quad`` is the number of midpoint samples per unit *diameter*; each chord
    uses ``ceil(n_quad * length / 2)`` samples.

    Raises
    ------
    KernelError
        If the grids are incompatible or the quadrature step could skip a polar cell.
    """
    if ring.n != pg.n_theta:
        raise KernelError(
            f"convolution form needs N_s == N_theta (got {ring.n} and {pg.n_theta})"
        )
    if n_quad is None:
        n_quad = default_n_quad(pg)
    n = pg.n_theta
    kappa = np.zeros((ring.n, pg.n_rho, n))
    max_step = min(pg.drho, pg.dtheta)
    for j, h in enumerate(ring.angles):
        if j == 0:
            continue
        chord = Chord(0.0, h)
        length = chord.length
        nq = max(2, int(np.ceil(n_quad * length / 2.0)))
        step = length / nq
        if step > max_step:
            raise KernelError(
                f"quadrature step {step:.3g} exceeds the polar cell size {max_step:.3g}; "
                f"increase n_quad (currently {n_quad})"
            )
        p = chord.midpoints(nq)
        theta = np.arctan2(p[:, 1], p[:, 0])
        rho = np.minimum(np.hypot(p[:, 0], p[:, 1]), 1.0)
        it0, it1, ir0, ir1, wt, wr = polar_stencil(pg, theta, rho)
        # sample at angle theta lands in column (0 - theta) of the kernel
        c0 = (-it0) % n
        c1 = (-it1) % n
        kj = kappa[j]
        inner = ir0 >= 0
        w0 = step * (1 - wr)
        w1 = step * wr
        np.add.at(kj, (ir0[inner], c0[inner]), w0[inner] * (1 - wt[inner]))
        np.add.at(kj, (ir0[inner], c1[inner]), w0[inner] * wt[inner])
        # below the innermost ring the sample reads the ring mean
        centre = w0[~inner].sum()
        if centre:
            kj[0, :] += centre / n
        np.add.at(kj, (ir1, c0), w1 * (1 - wt))
        np.add.at(kj, (ir1, c1), w1 * wt)
    return LinearKernel(kappa, pg, ring, n_quad)


def _check_field(kernel: LinearKernel, m: np.ndarray):
    if m.shape[-2:] != kernel.pg.shape:
        raise KernelError(f"field shape {m.shape[-2:]} != polar grid {kernel.pg.shape}")


def _check_data(kernel: LinearKernel, d: np.ndarray):
    if d.shape[-2:] != (kernel.n, kernel.ring.n):
        raise KernelError(f"data shape {d.shape[-2:]} != {(kernel.n, kernel.ring.n)}")


def apply_K(kernel: LinearKernel, m: np.ndarray) -> np.ndarray:
    """``d[s, h] = sum_rho (kappa[h, rho, .] * m[., rho])(s)``; leading batch axes allowed."""
    m = np.asarray(m, dtype=float)
    _check_field(kernel, m)
    mhat = np.fft.rfft(m, axis=-2)  # [..., f, rho]
    dhat = np.einsum("hrf,...fr->...fh", kernel._khat, mhat)
    return np.fft.irfft(dhat, n=kernel.n, axis=-2)


def apply_K_adjoint(kernel: LinearKernel, d: np.ndarray) -> np.ndarray:
    """``(K^T d)[theta, rho] = sum_h sum_s kappa[h, rho, s - theta] d[s, h]``."""
    d = np.asarray(d, dtype=float)
    _check_data(kernel, d)
    dhat = np.fft.rfft(d, axis=-2)  # [..., f, h]
    xhat = np.einsum("hrf,...fh->...fr", np.conj(kernel._khat), dhat)
    return np.fft.irfft(xhat, n=kernel.n, axis=-2)


def apply_K_direct(kernel: LinearKernel, m: np.ndarray) -> np.ndarray:
    """Direct-summation reference for :func:`apply_K`."""
    n = kernel.n
    out = np.zeros((n, kernel.ring.n))
    for s in range(n):
        t = (s - np.arange(n)) % n  # indexed by theta
        # kappa[h, rho, t[theta]] * m[theta, rho]
        out[s] = np.einsum("hrt,tr->h", kernel.kappa[:, :, t], m)
    return out
