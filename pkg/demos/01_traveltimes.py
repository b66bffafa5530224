"""Boundary traveltimes through a disk with two fast inclusions.

Walks through the forward model one piece at a time: a single eikonal solve,
the full source/receiver traveltime matrix, the differential data against the
constant background, and the sheared layout in which a rotation of the medium
becomes a circular shift of rows.

Run ``python3 demos/01_traveltimes.py [--out DIR]``; images land in DIR.
"""
import argparse
from pathlib import Path

import numpy as np

from tttk import render
from tttk.datagen import Ellipse, EllipseSet, rasterize
from tttk.eikonal import SlownessField, outside_mask_apply, sweep_solve
from tttk.geometry import BoundaryRing, CartesianGrid, PolarGrid
from tttk.measurement import ForwardConfig, background_traveltimes, measure, shear

parser = argparse.ArgumentParser()
parser.add_argument("--out", default="demos/out/01")
args = parser.parse_args()
out = Path(args.out)
out.mkdir(parents=True, exist_ok=True)

grid, ring, pg = CartesianGrid(128), BoundaryRing(64), PolarGrid(64, 32)
cfg = ForwardConfig(grid, ring)

# Two faster inclusions (m~ = -0.5 inside), the same kind the datasets use.
inclusions = EllipseSet([
    Ellipse(0.35, 0.2, 0.09, 0.04, 0.6, -0.5),
    Ellipse(-0.3, -0.35, 0.08, 0.05, 2.1, -0.5),
])

# One source: the first-arrival time field from the boundary point at angle 0.
x, y = grid.mesh()
slowness = outside_mask_apply(SlownessField(1.0 + inclusions(x, y), grid))
u = sweep_solve(slowness, 0.0)
print(f"single solve: {u.n_sweeps} sweeps, max traveltime {u.values[grid.inside_disk()].max():.3f}")
render.save_image(out / "traveltime_source0.png", render.gray(u.values))

# All sources: differential data d = U - U0, then shear so column h holds
# the receiver h steps away from each source.
u0 = background_traveltimes(cfg)
meas = measure(inclusions, cfg, u0)
print(f"differential data range [{meas.d.min():.4f}, {meas.d.max():.4f}] (inclusions are faster, so d <= 0)")
render.save_image(out / "sheared_data.png", render.signed_gray(meas.d.T))

# The row shift: rotating the medium by k source spacings shifts rows by k.
k = 8
rotated = EllipseSet([
    Ellipse(e.cx * np.cos(2 * np.pi * k / 64) - e.cy * np.sin(2 * np.pi * k / 64),
            e.cx * np.sin(2 * np.pi * k / 64) + e.cy * np.cos(2 * np.pi * k / 64),
            e.a, e.b, e.angle + 2 * np.pi * k / 64, e.amplitude)
    for e in inclusions.ellipses
])
d_rot = measure(rotated, cfg, u0).d
print(f"rotated medium vs shifted rows: max difference {np.abs(d_rot - np.roll(meas.d, k, axis=0)).max():.2e}")

# The label the networks learn: the perturbation on the polar grid.
label = rasterize(inclusions.ellipses, pg)
render.render_signed(out / "label.png", [render.polar_to_image_field(label, pg)])
print(f"reciprocity U[s, r] = U[r, s] holds up to the grid error: {np.abs(meas.unsheared() - meas.unsheared().T).max():.2e}")
print(f"images written to {out}")
assert np.array_equal(shear(meas.unsheared()), meas.d)
