"""Multiscale block in the spirit of a nonstandard wavelet (BCR) representation.

The input is split over ``L`` levels by orthonormal Haar average/difference
pairs.  The split is undecimated: level ``l`` pairs samples ``2^(l-1)`` apart
and its local CNN uses dilation ``2^l``, which is exactly the decimated
network evaluated on every polyphase component.  Every operation is a circular
convolution, so the block commutes with *any* angular shift.

Per level a local CNN of ``n_cnn`` periodic layers acts jointly on the
``2c`` average and difference channels; a dense block of ``n_cnn`` layers whose
window spans the whole period ``N / 2^L`` covers the coarsest level.  Reconstruction adds each
level's processed averages to the refined output of the coarser level and
applies the inverse Haar step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import nn

from .layers import Conv1dSpec, PeriodicConv1d

SQRT2 = math.sqrt(2.0)


def max_levels(n_theta: int) -> int:
    """Largest ``L`` with ``2^L`` dividing ``n_theta``."""
    L = 0
    while n_theta % (2 ** (L + 1)) == 0:
        L += 1
    return L


@dataclass(frozen=True)
class BcrSpec:
    channels: int
    n_cnn: int
    n_theta: int
    n_levels: int | None = None
    local_window: int = 5

    def __post_init__(self):
        if self.channels < 1 or self.n_cnn < 1:
            raise ValueError("channels and n_cnn must be >= 1")
        if self.local_window % 2 != 1:
            raise ValueError("local window must be odd")
        if self.levels < 1:
            raise ValueError(f"n_theta={self.n_theta} is odd; need at least one Haar level")
        if self.n_theta % (2**self.levels):
            raise ValueError(f"2^{self.levels} does not divide n_theta={self.n_theta}")

    @property
    def levels(self) -> int:
        return self.n_levels if self.n_levels is not None else max_levels(self.n_theta)

    @property
    def coarse_length(self) -> int:
        return self.n_theta // 2**self.levels

    def local_specs(self, level: int) -> list[Conv1dSpec]:
        c2 = 2 * self.channels
        acts = ["relu"] * (self.n_cnn - 1) + ["id"]
        return [Conv1dSpec(c2, c2, self.local_window, a, 2**level) for a in acts]

    def coarse_specs(self) -> list[Conv1dSpec]:
        c = self.channels
        acts = ["relu"] * (self.n_cnn - 1) + ["id"]
        # smallest odd window spanning the coarse period; an even period aliases one tap
        k = self.coarse_length | 1
        return [Conv1dSpec(c, c, k, a, 2**self.levels) for a in acts]

    @property
    def n_params(self) -> int:
        layers = [s for l in range(1, self.levels + 1) for s in self.local_specs(l)]
        layers += self.coarse_specs()
        return sum(s.n_params for s in layers)


def haar_split(v: torch.Tensor, step: int):
    shifted = torch.roll(v, -step, dims=-1)  # shifted[i] = v[i + step]
    return (v + shifted) / SQRT2, (v - shifted) / SQRT2


def haar_merge(a: torch.Tensor, b: torch.Tensor, step: int):
    return (a + b + torch.roll(a - b, step, dims=-1)) / (2 * SQRT2)


class BcrBlock(nn.Module):
    def __init__(self, spec: BcrSpec):
        super().__init__()
        self.spec = spec
        self.local = nn.ModuleList(
            nn.Sequential(*[PeriodicConv1d(s) for s in spec.local_specs(l)])
            for l in range(1, spec.levels + 1)
        )
        self.coarse = nn.Sequential(*[PeriodicConv1d(s) for s in spec.coarse_specs()])

    def forward(self, x):
        if x.shape[-1] != self.spec.n_theta:
            raise ValueError(f"BCR block built for length {self.spec.n_theta}, got {x.shape[-1]}")
        c = self.spec.channels
        v = x
        processed = []
        for l, cnn in enumerate(self.local, start=1):
            a, b = haar_split(v, 2 ** (l - 1))
            z = cnn(torch.cat([a, b], dim=-2))
            processed.append((z[..., :c, :], z[..., c:, :]))
            v = a
        y = self.coarse(v)
        for l in range(len(self.local), 0, -1):
            a_hat, b_hat = processed[l - 1]
            y = haar_merge(y + a_hat, b_hat, 2 ** (l - 1))
        return y
