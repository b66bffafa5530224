"""Convolution layers with periodic padding along the angular axis.

Tensors follow the torch layout: ``(batch, channels, n_theta)`` for 1-D layers
and ``(batch, channels, n_theta, n_rho)`` for 2-D layers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

ACTIVATIONS = ("id", "relu")


def _activate(x, activation):
    if activation == "relu":
        return torch.relu(x)
    if activation == "id":
        return x
    raise ValueError(f"unknown activation {activation!r}")


def periodic_pad(x: torch.Tensor, pad: int, dim: int = -1) -> torch.Tensor:
    """Circular padding by ``pad`` on both sides of ``dim``; ``pad`` may exceed the length."""
    if pad == 0:
        return x
    n = x.shape[dim]
    idx = torch.arange(-pad, n + pad, device=x.device) % n
    return x.index_select(dim, idx)


def _fold_taps(weight, length):
    """Sum the taps of a centred window that coincide on a period of ``length``.

    Returns a kernel whose tap ``j`` multiplies ``x[i + j]`` for ``j = 0..length-1``.
    """
    w = weight.shape[-1]
    offsets = torch.tensor([(k - w // 2) % length for k in range(w)], device=weight.device)
    out = weight.new_zeros(*weight.shape[:-1], length)
    return out.index_add(-1, offsets, weight)


def _circular_conv(x, weight, bias):
    n, w = x.shape[-1], weight.shape[-1]
    if w <= n:
        return F.conv1d(periodic_pad(x, w // 2), weight, bias)
    folded = _fold_taps(weight, n)
    xp = x.index_select(-1, torch.arange(2 * n - 1, device=x.device) % n)
    return F.conv1d(xp, folded, bias)


def conv1d_periodic(x, weight, bias=None, activation="id", dilation=1):
    """Circular convolution along the last axis, then bias and activation.

    ``y[o, i] = b[o] + sum_{c, k} W[o, c, k] x[c, i + dilation (k - w//2)]``
    with indices taken modulo the length.  When ``dilation`` divides the
    length, the work is done on the polyphase components, which avoids padding
    by more than a window.
    """
    if x.dim() < 2 or x.shape[-2] != weight.shape[1]:
        raise ValueError(f"input shape {tuple(x.shape)} does not match weight {tuple(weight.shape)}")
    n = x.shape[-1]
    if dilation == 1:
        y = _circular_conv(x, weight, bias)
    elif n % dilation == 0:
        lead = x.shape[:-2]
        c = x.shape[-2]
        # [..., c, n/dil, dil] -> [(..., dil), c, n/dil]
        xs = x.reshape(-1, c, n // dilation, dilation).permute(0, 3, 1, 2)
        xs = xs.reshape(-1, c, n // dilation)
        ys = _circular_conv(xs, weight, bias)
        o = ys.shape[-2]
        ys = ys.reshape(-1, dilation, o, n // dilation).permute(0, 2, 3, 1)
        y = ys.reshape(*lead, o, n)
    else:
        w = weight.shape[-1]
        y = F.conv1d(periodic_pad(x, dilation * (w // 2)), weight, bias, dilation=dilation)
    return _activate(y, activation)


def conv2d_mixed(x, weight, bias=None, activation="id"):
    """2-D convolution, periodic in theta (dim -2) and zero-padded in rho (dim -1)."""
    if x.shape[-3] != weight.shape[1]:
        raise ValueError(f"input has {x.shape[-3]} channels, weight expects {weight.shape[1]}")
    wt, wr = weight.shape[-2:]
    y = F.conv2d(periodic_pad(x, wt // 2, dim=-2), weight, bias, padding=(0, wr // 2))
    return _activate(y, activation)


@dataclass(frozen=True)
class Conv1dSpec:
    in_channels: int
    out_channels: int
    window: int = 1
    activation: str = "id"
    dilation: int = 1

    def __post_init__(self):
        if self.window % 2 != 1:
            raise ValueError("conv window must be odd")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def n_params(self) -> int:
        return self.window * self.in_channels * self.out_channels + self.out_channels


@dataclass(frozen=True)
class Conv2dSpec:
    in_channels: int
    out_channels: int
    window: tuple[int, int] = (3, 3)
    activation: str = "id"

    def __post_init__(self):
        if any(w % 2 != 1 for w in self.window):
            raise ValueError("conv window must be odd in both directions")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def n_params(self) -> int:
        return math.prod(self.window) * self.in_channels * self.out_channels + self.out_channels


class PeriodicConv1d(nn.Module):
    def __init__(self, spec: Conv1dSpec):
        super().__init__()
        self.spec = spec
        self.weight = nn.Parameter(torch.zeros(spec.out_channels, spec.in_channels, spec.window))
        self.bias = nn.Parameter(torch.zeros(spec.out_channels))

    def forward(self, x):
        s = self.spec
        return conv1d_periodic(x, self.weight, self.bias, s.activation, s.dilation)


class MixedConv2d(nn.Module):
    def __init__(self, spec: Conv2dSpec):
        super().__init__()
        self.spec = spec
        self.weight = nn.Parameter(torch.zeros(spec.out_channels, spec.in_channels, *spec.window))
        self.bias = nn.Parameter(torch.zeros(spec.out_channels))

    def forward(self, x):
        return conv2d_mixed(x, self.weight, self.bias, self.spec.activation)
