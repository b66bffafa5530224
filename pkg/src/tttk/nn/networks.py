"""Forward (polar field -> sheared data) and inverse (sheared data -> polar field) networks.

Both networks act on batches: the inverse net maps ``d[b, s, h]`` to
``m[b, theta, rho]`` and the forward net maps back.  The angular index ``s``
of the data and ``theta`` of the field share one periodic axis, so every
layer commutes with circular shifts along it.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
import torch
from torch import nn

from .bcr import BcrBlock, BcrSpec
from .layers import Conv1dSpec, Conv2dSpec, MixedConv2d, PeriodicConv1d


@dataclass(frozen=True)
class InverseNetSpec:
    n_theta: int
    n_rho: int
    n_h: int
    c: int = 16
    c2: int | None = None
    w: int = 3
    n_cnn: int = 6
    n_cnn2: int = 5
    n_levels: int | None = None
    local_window: int = 5

    def __post_init__(self):
        for name in ("n_theta", "n_rho", "n_h", "c", "w", "n_cnn", "n_cnn2"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.c2 is not None and self.c2 < 1:
            raise ValueError("c2 must be >= 1")
        self.bcr  # validates the level count

    @property
    def channels2(self) -> int:
        return self.c if self.c2 is None else self.c2

    @property
    def bcr(self) -> BcrSpec:
        return BcrSpec(self.c, self.n_cnn, self.n_theta, self.n_levels, self.local_window)

    def conv2d_specs(self) -> list[Conv2dSpec]:
        win = (self.w, self.w)
        if self.n_cnn2 == 1:
            return [Conv2dSpec(1, 1, win, "id")]
        c2 = self.channels2
        specs = [Conv2dSpec(1, c2, win, "relu")]
        specs += [Conv2dSpec(c2, c2, win, "relu") for _ in range(self.n_cnn2 - 2)]
        specs.append(Conv2dSpec(c2, 1, win, "id"))
        return specs

    @property
    def n_params(self) -> int:
        """Closed-form parameter count."""
        return (
            Conv1dSpec(self.n_h, self.c).n_params
            + self.bcr.n_params
            + Conv1dSpec(self.c, self.n_rho).n_params
            + sum(s.n_params for s in self.conv2d_specs())
        )

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ForwardNetSpec:
    n_theta: int
    n_rho: int
    n_h: int
    c: int = 16
    n_cnn: int = 6
    n_levels: int | None = None
    local_window: int = 5

    def __post_init__(self):
        for name in ("n_theta", "n_rho", "n_h", "c", "n_cnn"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        self.bcr

    @property
    def bcr(self) -> BcrSpec:
        return BcrSpec(self.c, self.n_cnn, self.n_theta, self.n_levels, self.local_window)

    @property
    def n_params(self) -> int:
        return (
            Conv1dSpec(self.n_rho, self.c).n_params
            + self.bcr.n_params
            + Conv1dSpec(self.c, self.n_h).n_params
        )

    def to_dict(self) -> dict:
        return asdict(self)


def count_params(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


class InverseNet(nn.Module):
    """``d[b, s, h] -> m[b, theta, rho]``: an adjoint-like 1-D stage, then a 2-D filter stack."""

    def __init__(self, spec: InverseNetSpec):
        super().__init__()
        self.spec = spec
        self.lift = PeriodicConv1d(Conv1dSpec(spec.n_h, spec.c))
        self.bcr = BcrBlock(spec.bcr)
        self.project = PeriodicConv1d(Conv1dSpec(spec.c, spec.n_rho))
        self.filters = nn.Sequential(*[MixedConv2d(s) for s in spec.conv2d_specs()])

    def forward(self, d: torch.Tensor) -> torch.Tensor:
        s = self.spec
        if d.shape[-2:] != (s.n_theta, s.n_h):
            raise ValueError(f"inverse net expects data of shape {(s.n_theta, s.n_h)}, got {tuple(d.shape[-2:])}")
        x = d.transpose(-1, -2)  # h as channels
        x = self.project(self.bcr(self.lift(x)))  # [b, rho, theta]
        x = x.transpose(-1, -2).unsqueeze(-3)  # [b, 1, theta, rho]
        return self.filters(x).squeeze(-3)


class ForwardNet(nn.Module):
    """``m[b, theta, rho] -> d[b, s, h]`` with rho as channels."""

    def __init__(self, spec: ForwardNetSpec):
        super().__init__()
        self.spec = spec
        self.lift = PeriodicConv1d(Conv1dSpec(spec.n_rho, spec.c))
        self.bcr = BcrBlock(spec.bcr)
        self.project = PeriodicConv1d(Conv1dSpec(spec.c, spec.n_h))

    def forward(self, m: torch.Tensor) -> torch.Tensor:
        s = self.spec
        if m.shape[-2:] != (s.n_theta, s.n_rho):
            raise ValueError(f"forward net expects fields of shape {(s.n_theta, s.n_rho)}, got {tuple(m.shape[-2:])}")
        x = self.project(self.bcr(self.lift(m.transpose(-1, -2))))
        return x.transpose(-1, -2)


def xavier_init(model: nn.Module, seed: int) -> nn.Module:
    """Glorot-uniform weights from a seeded numpy generator; zero biases.

    The fans of a convolution weight ``(out, in, *window)`` are
    ``in * prod(window)`` and ``out * prod(window)``.  Parameters are visited
    in registration order, so the result depends only on ``seed``.
    """
    rng = np.random.default_rng(seed)
    with torch.no_grad():
        for name, p in model.named_parameters():
            if name.endswith("bias"):
                p.zero_()
                continue
            field = math.prod(p.shape[2:])
            fan_in, fan_out = p.shape[1] * field, p.shape[0] * field
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            vals = rng.uniform(-limit, limit, size=tuple(p.shape))
            p.copy_(torch.from_numpy(vals).to(p.dtype))
    return model


def build_model(spec, seed: int | None = None, dtype=torch.float32) -> nn.Module:
    cls = InverseNet if isinstance(spec, InverseNetSpec) else ForwardNet
    model = cls(spec).to(dtype)
    if seed is not None:
        xavier_init(model, seed)
    return model


def spec_from_dict(kind: str, data: dict):
    if kind == "inverse":
        return InverseNetSpec(**data)
    if kind == "forward":
        return ForwardNetSpec(**data)
    raise ValueError(f"unknown network kind {kind!r}")


def spec_kind(spec) -> str:
    return "inverse" if isinstance(spec, InverseNetSpec) else "forward"
