"""Desk-scale forward-net experiment on linear-regime data (cached by ``desk_pipeline``)."""
import dataclasses

import numpy as np
import torch

from desk_pipeline import FORWARD_C, desk_config, forward_linear_error, linear_regime_data, output_rank_bound
from tttk.nn.networks import ForwardNetSpec, build_model


def test_forward_net_rows_span_at_most_c_dimensions():
    spec = ForwardNetSpec(16, 8, 24, c=3, n_cnn=2)
    model = build_model(spec, seed=1, dtype=torch.float64)
    with torch.no_grad():
        out = model(torch.randn(5, 16, 8, dtype=torch.float64)).numpy()
    assert output_rank_bound(out, spec.c) < 1e-12
    assert output_rank_bound(out, spec.c - 1) > 1e-6


def test_desk_width_admits_the_target_error():
    (_, d), _ = linear_regime_data()
    # the shared desk width cannot reach 0.1 at any parameter values; the forward width can
    assert output_rank_bound(d, desk_config().network.c) > 0.1
    assert output_rank_bound(d, FORWARD_C) < 0.05


def test_forward_net_learns_linearised_map():
    err = forward_linear_error()
    print(f"forward net relative L2 error on held-out linear-regime data: {err:.4f}")
    assert err <= 0.1
