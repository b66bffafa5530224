"""Image output for Cartesian and polar fields.

Cartesian arrays are indexed ``[i, j]`` with ``x = nodes[i]``, ``y = nodes[j]``;
images put ``+y`` at the top.  Signed fields use a symmetric scale centred at
zero, so a zero field renders as uniform mid-gray (or white in colour).
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import CartesianGrid, PolarGrid, sample_polar_to_cart
from .io import write_json

NEG = np.array([33, 102, 172], dtype=float)
MID = np.array([247, 247, 247], dtype=float)
POS = np.array([178, 24, 43], dtype=float)


def _to_image_axes(field: np.ndarray) -> np.ndarray:
    return np.asarray(field, dtype=float).T[::-1]


def gray(field: np.ndarray, vmin: float | None = None, vmax: float | None = None) -> np.ndarray:
    """Linear map ``[vmin, vmax] -> [0, 255]``; a constant field maps to 128."""
    f = _to_image_axes(field)
    lo = float(np.nanmin(f)) if vmin is None else vmin
    hi = float(np.nanmax(f)) if vmax is None else vmax
    if hi <= lo:
        return np.full(f.shape, 128, dtype=np.uint8)
    return np.clip(np.round(255 * (f - lo) / (hi - lo)), 0, 255).astype(np.uint8)


def symmetric_scale(field) -> float:
    s = float(np.nanmax(np.abs(field))) if np.size(field) else 0.0
    return s if s > 0 else 1.0


def signed_gray(field: np.ndarray, scale: float | None = None) -> np.ndarray:
    """``0 -> 128``; ``+-scale -> 255, 1``."""
    s = symmetric_scale(field) if scale is None else scale
    f = _to_image_axes(field)
    return np.clip(np.round(128 + 127 * f / s), 0, 255).astype(np.uint8)


def diverging(field: np.ndarray, scale: float | None = None) -> np.ndarray:
    """Blue-white-red RGB image on the symmetric range ``[-scale, scale]``."""
    s = symmetric_scale(field) if scale is None else scale
    t = np.clip(_to_image_axes(field) / s, -1, 1)[..., None]
    rgb = np.where(t < 0, MID + (-t) * (NEG - MID), MID + t * (POS - MID))
    return np.round(rgb).astype(np.uint8)


def polar_to_image_field(field: np.ndarray, pg: PolarGrid, n: int = 128) -> np.ndarray:
    return sample_polar_to_cart(field, pg, CartesianGrid(n), outside_value=0.0)


def side_by_side(images, gap: int = 4) -> np.ndarray:
    """Concatenate equal-height images horizontally with a white gap."""
    images = [np.asarray(im) for im in images]
    h = images[0].shape[0]
    if any(im.shape[0] != h for im in images):
        raise ValueError("images must share a height")
    fill = np.full((h, gap) + images[0].shape[2:], 255, dtype=np.uint8)
    parts = []
    for i, im in enumerate(images):
        if i:
            parts.append(fill)
        parts.append(im)
    return np.concatenate(parts, axis=1)


def save_image(path, img: np.ndarray, sidecar: dict | None = None) -> Path:
    """Write PNG, or binary PGM/PPM when the suffix is ``.pgm``/``.ppm``; optional JSON sidecar."""
    path = Path(path)
    fmt = {".pgm": "PPM", ".ppm": "PPM"}.get(path.suffix.lower(), "PNG")
    Image.fromarray(img).save(path, format=fmt)
    if sidecar is not None:
        write_json(path.with_suffix(path.suffix + ".json"), sidecar)
    return path


def render_signed(path, fields, *, scale: float | None = None, colour: bool = True) -> Path:
    """Signed Cartesian fields side by side on one shared symmetric scale."""
    fields = [np.asarray(f, dtype=float) for f in fields]
    s = scale if scale is not None else symmetric_scale(np.concatenate([f.ravel() for f in fields]))
    fn = diverging if colour else signed_gray
    img = side_by_side([fn(f, s) for f in fields]) if len(fields) > 1 else fn(fields[0], s)
    meta = {"colormap": "blue-white-red" if colour else "signed-gray", "vmin": -s, "vmax": s, "panels": len(fields)}
    return save_image(path, img, meta)


def load_image(path) -> np.ndarray:
    return np.asarray(Image.open(path))


def read_sidecar(path) -> dict:
    return json.loads(Path(str(path) + ".json").read_text())
