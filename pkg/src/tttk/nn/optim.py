"""Nadam: Adam with Nesterov momentum and Dozat's momentum schedule.

With ``mu_t = beta1 (1 - 0.5 * 0.96^(t * psi))`` and ``P_t = prod_{i<=t} mu_i``::

    m_t = beta1 m + (1 - beta1) g
    v_t = beta2 v + (1 - beta2) g^2
    p  -= lr [ (1 - mu_t) / (1 - P_t) g + mu_{t+1} / (1 - P_{t+1}) m_t ] / (sqrt(v_t / (1 - beta2^t)) + eps)
"""
from __future__ import annotations

from dataclasses import dataclass, field

import torch


class NonFiniteGradient(FloatingPointError):
    def __init__(self, name):
        super().__init__(f"non-finite gradient in parameter block {name!r}")
        self.name = name


@dataclass
class NadamState:
    step: int = 0
    mu_product: float = 1.0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


@dataclass(frozen=True)
class NadamConfig:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    momentum_decay: float = 0.004


def mu_schedule(t: int, cfg: NadamConfig = NadamConfig()) -> float:
    return cfg.beta1 * (1.0 - 0.5 * 0.96 ** (t * cfg.momentum_decay))


@torch.no_grad()
def nadam_step(params, grads, state: NadamState, lr: float, cfg: NadamConfig = NadamConfig()):
    """Update ``params`` (name -> tensor) in place from ``grads`` (name -> tensor).

    Moments start at zero on first sight of each parameter.  All gradients are
    checked before any parameter is touched.
    """
    for name, g in grads.items():
        if not torch.isfinite(g).all():
            raise NonFiniteGradient(name)
    t = state.step + 1
    mu = mu_schedule(t, cfg)
    mu_next = mu_schedule(t + 1, cfg)
    prod = state.mu_product * mu
    prod_next = prod * mu_next
    bc2 = 1.0 - cfg.beta2**t
    for name, p in params.items():
        g = grads[name]
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = torch.zeros_like(p)
            state.v[name] = torch.zeros_like(p)
        v = state.v[name]
        m.mul_(cfg.beta1).add_(g, alpha=1 - cfg.beta1)
        v.mul_(cfg.beta2).addcmul_(g, g, value=1 - cfg.beta2)
        denom = (v / bc2).sqrt_().add_(cfg.eps)
        p.addcdiv_(g, denom, value=-lr * (1 - mu) / (1 - prod))
        p.addcdiv_(m, denom, value=-lr * mu_next / (1 - prod_next))
    state.step = t
    state.mu_product = prod
    return params, state
