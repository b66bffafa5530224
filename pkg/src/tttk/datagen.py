"""Random ellipse-inclusion perturbations and paired (data, label) datasets."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from pathlib import Path

import numpy as np

from ._parallel import pmap
from .geometry import BoundaryRing, CartesianGrid, PolarGrid
from .io import read_json, read_tensor, write_json, write_tensor
from .measurement import (
    ForwardConfig,
    Measurement,
    add_noise,
    background_traveltimes,
    measure,
)

# (width range, height range, amplitude); widths and heights are full axes
KINDS = {
    "negative": ((0.1, 0.2), (0.05, 0.1), -0.5),
    "positive": ((0.2, 0.4), (0.1, 0.2), 2.0),
}
DATASET_KINDS = ("negative", "positive", "mixture")
BOUNDARY_SAMPLES = 256


class SamplingError(RuntimeError):
    pass


class DatasetError(RuntimeError):
    """Failure while producing one sample; the message carries the sample index."""


@dataclass(frozen=True)
class Ellipse:
    cx: float
    cy: float
    a: float
    b: float
    angle: float
    amplitude: float

    def __post_init__(self):
        if not self.a >= self.b > 0:
            raise ValueError(f"ellipse semi-axes must satisfy a >= b > 0, got {self.a}, {self.b}")
        if not self.amplitude > -1:
            raise ValueError("ellipse amplitude must exceed -1 to keep the slowness positive")

    def contains(self, x, y) -> np.ndarray:
        c, s = np.cos(self.angle), np.sin(self.angle)
        dx = np.asarray(x) - self.cx
        dy = np.asarray(y) - self.cy
        u = c * dx + s * dy
        v = -s * dx + c * dy
        return (u / self.a) ** 2 + (v / self.b) ** 2 <= 1.0

    def boundary(self, n: int = BOUNDARY_SAMPLES) -> np.ndarray:
        phi = 2 * np.pi * np.arange(n) / n
        c, s = np.cos(self.angle), np.sin(self.angle)
        u, v = self.a * np.cos(phi), self.b * np.sin(phi)
        return np.stack([self.cx + c * u - s * v, self.cy + s * u + c * v], axis=1)

    def inside_disk(self) -> bool:
        p = self.boundary()
        return bool(np.all(np.hypot(p[:, 0], p[:, 1]) <= 1.0))

    def intersects(self, other: "Ellipse") -> bool:
        p, q = self.boundary(), other.boundary()
        return bool(
            other.contains(p[:, 0], p[:, 1]).any()
            or self.contains(q[:, 0], q[:, 1]).any()
            or other.contains(self.cx, self.cy)
            or self.contains(other.cx, other.cy)
        )

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


class EllipseSet:
    """Piecewise-constant perturbation: sum of ellipse indicator functions."""

    def __init__(self, ellipses):
        self.ellipses = list(ellipses)

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        out = np.zeros(np.broadcast(x, np.asarray(y)).shape)
        for e in self.ellipses:
            out = out + np.where(e.contains(x, y), e.amplitude, 0.0)
        return out


@dataclass(frozen=True)
class DatasetSpec:
    kind: str = "negative"
    n_e: int = 2
    n_samples: int = 2048
    delta: float = 0.0
    seed: int = 0
    n_train: int | None = None
    max_attempts: int = 10_000

    def __post_init__(self):
        if self.kind not in DATASET_KINDS:
            raise ValueError(f"kind must be one of {DATASET_KINDS}, got {self.kind!r}")
        if self.n_e < 1:
            raise ValueError("n_e must be >= 1")
        if self.delta < 0:
            raise ValueError("noise level delta must be >= 0")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.n_train is not None and not 0 <= self.n_train <= self.n_samples:
            raise ValueError("n_train must lie in [0, n_samples]")

    @property
    def train_size(self) -> int:
        if self.n_train is not None:
            return self.n_train
        return int(round(0.8 * self.n_samples))

    def amplitudes(self) -> list[float]:
        if self.kind == "mixture":
            return [KINDS["negative"][2], KINDS["positive"][2]]
        return [KINDS[self.kind][2]]


def sample_rng(seed: int, index: int, stream: int = 0) -> np.random.Generator:
    """Generator for one sample; ``stream`` 0 draws ellipses, 1 draws noise."""
    return np.random.default_rng([seed, index, stream])


def _draw_ellipse(kind: str, rng: np.random.Generator) -> Ellipse:
    (w0, w1), (h0, h1), amp = KINDS[kind]
    angle = rng.uniform(0.0, 2 * np.pi)
    width = rng.uniform(w0, w1)
    height = rng.uniform(h0, h1)
    r = np.sqrt(rng.uniform())
    phi = rng.uniform(0.0, 2 * np.pi)
    return Ellipse(r * np.cos(phi), r * np.sin(phi), width / 2, height / 2, angle, amp)


def sample_ellipses(spec: DatasetSpec, rng: np.random.Generator) -> list[Ellipse]:
    """Draw ``spec.n_e`` disjoint ellipses inside the unit disk by rejection."""
    out: list[Ellipse] = []
    for _ in range(spec.n_e):
        kind = spec.kind
        if kind == "mixture":
            kind = "negative" if rng.uniform() < 0.5 else "positive"
        for _attempt in range(spec.max_attempts):
            e = _draw_ellipse(kind, rng)
            if e.inside_disk() and not any(e.intersects(o) for o in out):
                out.append(e)
                break
        else:
            raise SamplingError(
                f"could not place ellipse {len(out) + 1} of {spec.n_e} after "
                f"{spec.max_attempts} attempts; use fewer or smaller ellipses"
            )
    return out


def rasterize(ellipses, pg: PolarGrid) -> np.ndarray:
    """Exact point-in-ellipse evaluation at the polar nodes."""
    x, y = pg.cartesian_nodes()
    return EllipseSet(ellipses)(x, y)


@dataclass
class Dataset:
    """In-memory dataset: sheared data ``d[i, s, h]`` and polar labels ``m[i, theta, rho]``."""

    d: np.ndarray
    m: np.ndarray
    u0: np.ndarray
    ellipses: list
    spec: DatasetSpec
    forward: ForwardConfig
    pg: PolarGrid

    @property
    def n_train(self) -> int:
        return self.spec.train_size

    def split(self):
        k = self.n_train
        return (self.d[:k], self.m[:k]), (self.d[k:], self.m[k:])


def generate_dataset(
    spec: DatasetSpec,
    forward: ForwardConfig,
    pg: PolarGrid,
    *,
    zero_perturbation: bool = False,
    progress=None,
) -> Dataset:
    """Sample, rasterise and simulate ``spec.n_samples`` inclusions.

    Each sample ``i`` draws its ellipses from ``sample_rng(seed, i, 0)`` and its
    noise from ``sample_rng(seed, i, 1)``, so the content is independent of the
    evaluation order.  ``zero_perturbation`` keeps the sampled ellipses but
    simulates ``m~ = 0`` (a pipeline check).
    """
    u0 = background_traveltimes(forward)
    n = spec.n_samples

    def one(i):
        try:
            ell = sample_ellipses(spec, sample_rng(spec.seed, i, 0))
            label = rasterize(ell, pg)
            pert = None if zero_perturbation else EllipseSet(ell)
            if zero_perturbation:
                label = np.zeros_like(label)
            meas = measure(pert, forward, u0)
        except Exception as exc:
            raise DatasetError(f"sample {i}: {exc}") from exc
        if progress is not None:
            progress(i)
        return ell, label, meas.d

    # parallelism lives inside measure(); samples run in order
    rows = [one(i) for i in range(n)]
    ds = Dataset(
        d=np.stack([r[2] for r in rows]),
        m=np.stack([r[1] for r in rows]),
        u0=u0,
        ellipses=[r[0] for r in rows],
        spec=dataclasses.replace(spec, delta=0.0),
        forward=forward,
        pg=pg,
    )
    return with_noise(ds, spec.delta)


def with_noise(ds: Dataset, delta: float) -> Dataset:
    """Noisy copy of a clean dataset; sample ``i`` uses ``sample_rng(seed, i, 1)``."""
    if ds.spec.delta != 0.0:
        raise ValueError("with_noise expects a clean (delta = 0) dataset")
    spec = dataclasses.replace(ds.spec, delta=delta)
    if delta == 0:
        return dataclasses.replace(ds, spec=spec)

    def noisy(i):
        return add_noise(Measurement(ds.d[i], ds.u0), delta, sample_rng(spec.seed, i, 1)).d

    d = np.stack(pmap(noisy, range(len(ds.d))))
    return dataclasses.replace(ds, d=d, spec=spec)


def manifest(ds: Dataset) -> dict:
    """JSON-ready description of a dataset; contains no timestamps, so reruns are byte-identical."""
    f = ds.forward
    return {
        "format": 1,
        "spec": dataclasses.asdict(ds.spec),
        "amplitudes": ds.spec.amplitudes(),
        "split": {"n_train": ds.n_train, "n_test": len(ds.d) - ds.n_train},
        "forward": {
            "n": f.grid.n,
            "n_sources": f.ring.n,
            "m0": f.m0,
            "outside_slowness": f.outside_slowness,
            "tol": f.tol,
            "max_sweeps": f.max_sweeps,
        },
        "polar": {"n_theta": ds.pg.n_theta, "n_rho": ds.pg.n_rho},
        "ellipses": [[e.as_dict() for e in ell] for ell in ds.ellipses],
    }


def save_dataset(ds: Dataset, directory) -> Path:
    """Write ``d.tttk``, ``m.tttk``, ``u0.tttk`` and ``manifest.json`` into ``directory``."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    write_tensor(out / "d.tttk", ds.d)
    write_tensor(out / "m.tttk", ds.m)
    write_tensor(out / "u0.tttk", ds.u0)
    write_json(out / "manifest.json", manifest(ds))
    return out


def load_dataset(directory) -> Dataset:
    src = Path(directory)
    man = read_json(src / "manifest.json")
    fw = man["forward"]
    forward = ForwardConfig(
        CartesianGrid(fw["n"]),
        BoundaryRing(fw["n_sources"]),
        fw["m0"],
        fw["outside_slowness"],
        fw["tol"],
        fw["max_sweeps"],
    )
    pg = PolarGrid(**man["polar"])
    ds = Dataset(
        d=read_tensor(src / "d.tttk"),
        m=read_tensor(src / "m.tttk"),
        u0=read_tensor(src / "u0.tttk"),
        ellipses=[[Ellipse(**e) for e in ell] for ell in man["ellipses"]],
        spec=DatasetSpec(**man["spec"]),
        forward=forward,
        pg=pg,
    )
    n = ds.spec.n_samples
    if ds.d.shape != (n, forward.ring.n, forward.ring.n):
        raise DatasetError(f"{src}: d has shape {ds.d.shape}, manifest implies {(n, forward.ring.n, forward.ring.n)}")
    if ds.m.shape != (n, *pg.shape):
        raise DatasetError(f"{src}: m has shape {ds.m.shape}, manifest implies {(n, *pg.shape)}")
    return ds
