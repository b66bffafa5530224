"""Why the networks need no rotation augmentation, and how big they get.

Rotating the medium by ``k`` angular cells shifts the sheared data by ``k``
rows.  Every layer of the inverse network is a circular convolution in that
axis, so an untrained network with random weights already maps shifted data
to the correspondingly rotated field.  The script checks this for a few shifts
and prints the parameter budget of the desk and full-resolution models.

Run ``python3 demos/04_network_symmetry.py``.
"""
import torch

from tttk.config import RunConfig
from tttk.nn.networks import build_model, count_params

torch.manual_seed(0)
cfg = RunConfig()
spec = cfg.inverse_spec()
model = build_model(spec, seed=3, dtype=torch.float64)
d = torch.randn(1, spec.n_theta, spec.n_h, dtype=torch.float64)

with torch.no_grad():
    base = model(d)
    for k in (1, 5, spec.n_theta // 8, spec.n_theta // 2):
        moved = model(torch.roll(d, k, dims=-2))
        err = (moved - torch.roll(base, k, dims=-2)).abs().max() / base.abs().max()
        print(f"shift data by {k:2d} rows -> output rotated by {k:2d} cells, relative mismatch {err:.1e}")

    # A shift in the receiver-offset axis is not a symmetry: the output changes.
    other = model(torch.roll(d, 1, dims=-1))
    print(f"shift in the offset axis instead: output changes by {(other - base).abs().max() / base.abs().max():.2f}")

for name, c in (("desk", cfg), ("full resolution", RunConfig.paper())):
    s = c.inverse_spec()
    print(f"{name:15s} inverse net {s.n_theta}x{s.n_rho}, c={s.c}: {count_params(build_model(s)):,} parameters "
          f"(closed form {s.n_params:,})")
