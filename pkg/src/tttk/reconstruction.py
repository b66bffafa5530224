"""Filtered back-projection baseline: ``(K^T K + eps I)^{-1} K^T d`` by conjugate gradients."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linearized import LinearKernel


class CGError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class FbpConfig:
    """``eps`` scales the identity; with ``relative_eps`` it is multiplied by ``max diag(K^T K)``."""

    eps: float = 1e-4
    relative_eps: bool = True
    cg_tol: float = 1e-10
    cg_max_iter: int = 2000
    method: str = "cg"

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("regularisation eps must be positive")
        if not 0 < self.cg_tol < 1:
            raise ValueError("cg_tol must lie in (0, 1)")
        if self.method not in ("cg", "cr"):
            raise ValueError(f"unknown Krylov method {self.method!r}")

    def absolute_eps(self, kernel: LinearKernel) -> float:
        if self.relative_eps:
            return self.eps * float(kernel.normal_diagonal().max())
        return self.eps


@dataclass
class CGResult:
    x: np.ndarray
    iterations: int
    residuals: list = field(default_factory=list)


def conjugate_gradient(apply_A, b, tol=1e-10, max_iter=1000, x0=None, callback=None) -> CGResult:
    """Plain CG for an SPD operator; stops at ``||r|| <= tol ||b||``.

    ``callback`` receives a copy of each iterate.
    """
    x = np.zeros_like(b) if x0 is None else x0.copy()
    r = b - apply_A(x) if x0 is not None else b.copy()
    bnorm = np.linalg.norm(b)
    hist = [float(np.linalg.norm(r))]
    if bnorm == 0:
        return CGResult(np.zeros_like(b), 0, hist)
    p = r.copy()
    rr = float(np.vdot(r, r))
    for it in range(1, max_iter + 1):
        Ap = apply_A(p)
        alpha = rr / float(np.vdot(p, Ap))
        x += alpha * p
        r -= alpha * Ap
        if callback is not None:
            callback(x.copy())
        rr_new = float(np.vdot(r, r))
        hist.append(np.sqrt(rr_new))
        if np.sqrt(rr_new) <= tol * bnorm:
            return CGResult(x, it, hist)
        p = r + (rr_new / rr) * p
        rr = rr_new
    raise CGError(
        f"CG did not reach relative residual {tol:.1e} in {max_iter} iterations "
        f"(final {hist[-1] / bnorm:.3e})",
        residual=hist[-1] / bnorm,
    )


def conjugate_residual(apply_A, b, tol=1e-10, max_iter=1000) -> CGResult:
    """Conjugate residuals: same Krylov space as CG, residual norm nonincreasing."""
    x = np.zeros_like(b)
    bnorm = np.linalg.norm(b)
    hist = [float(bnorm)]
    if bnorm == 0:
        return CGResult(x, 0, hist)
    r = b.copy()
    Ar = apply_A(r)
    p, Ap = r.copy(), Ar.copy()
    rAr = float(np.vdot(r, Ar))
    for it in range(1, max_iter + 1):
        alpha = rAr / float(np.vdot(Ap, Ap))
        x += alpha * p
        r -= alpha * Ap
        hist.append(float(np.linalg.norm(r)))
        if hist[-1] <= tol * bnorm:
            return CGResult(x, it, hist)
        Ar = apply_A(r)
        rAr_new = float(np.vdot(r, Ar))
        beta = rAr_new / rAr
        rAr = rAr_new
        p = r + beta * p
        Ap = Ar + beta * Ap
    raise CGError(
        f"CR did not reach relative residual {tol:.1e} in {max_iter} iterations "
        f"(final {hist[-1] / bnorm:.3e})",
        residual=hist[-1] / bnorm,
    )


_SOLVERS = {"cg": conjugate_gradient, "cr": conjugate_residual}


def fbp_invert(kernel: LinearKernel, d: np.ndarray, cfg: FbpConfig = FbpConfig(), *, full=False):
    """Regularised normal-equations reconstruction of a polar perturbation from sheared data."""
    eps = cfg.absolute_eps(kernel)
    rhs = kernel.adjoint(d)

    def normal(x):
        return kernel.normal(x) + eps * x

    res = _SOLVERS[cfg.method](normal, rhs, cfg.cg_tol, cfg.cg_max_iter)
    return res if full else res.x


def fbp_dense(kernel: LinearKernel, d: np.ndarray, cfg: FbpConfig = FbpConfig()) -> np.ndarray:
    """Dense direct solve of the same normal equations (small instances only)."""
    K = kernel.dense()
    eps = cfg.absolute_eps(kernel)
    A = K.T @ K + eps * np.eye(K.shape[1])
    x = np.linalg.solve(A, K.T @ np.ravel(d))
    return x.reshape(kernel.pg.shape)
