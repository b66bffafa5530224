"""Mean squared error and peak signal-to-noise ratio."""
from __future__ import annotations

import numpy as np


class ExactMatch(ArithmeticError):
    """Prediction equals the target, so the PSNR is infinite."""


class DegenerateTarget(ArithmeticError):
    """Constant target: the peak value range is zero and the PSNR is undefined."""


def mse(pred, target) -> float:
    pred, target = np.asarray(pred, dtype=float), np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    return float(np.mean((pred - target) ** 2))


def psnr(pred, target) -> float:
    """``10 log10(Max^2 / MSE)`` with ``Max`` the value range of the target."""
    target = np.asarray(target, dtype=float)
    peak = float(target.max() - target.min())
    err = mse(pred, target)
    if peak == 0:
        raise DegenerateTarget("target is constant; PSNR undefined")
    if err == 0:
        raise ExactMatch("prediction equals target; PSNR is infinite")
    return 10.0 * np.log10(peak**2 / err)


def batch_psnr(pred, target) -> np.ndarray:
    """Per-sample PSNR over the leading axis."""
    return np.array([psnr(p, t) for p, t in zip(pred, target)])


def mean_psnr(pred, target) -> tuple[float, int]:
    """Mean PSNR over samples with a non-constant target and nonzero error.

    Returns the mean and the number of skipped samples.  An ellipse that
    misses every polar node leaves an all-zero label, for which the PSNR is
    undefined.
    """
    vals = []
    for p, t in zip(pred, target):
        try:
            vals.append(psnr(p, t))
        except (DegenerateTarget, ExactMatch):
            pass
    skipped = len(pred) - len(vals)
    if not vals:
        raise DegenerateTarget("no sample has a defined PSNR")
    return float(np.mean(vals)), skipped
