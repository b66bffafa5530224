"""Run configuration: one JSON document holding every module parameter.

Unknown keys are rejected at every level, and missing keys take the desk-scale
defaults below.

Sections
--------
grid
    ``n`` Cartesian nodes per axis (96), polar ``n_theta`` x ``n_rho`` (64 x 32),
    ``n_sources`` (64; receivers coincide with sources).
eikonal
    Background slowness ``m0`` (1), ``outside_slowness`` (100), sweep ``tol``
    (1e-8), ``max_sweeps`` (1000).
dataset
    :class:`~tttk.datagen.DatasetSpec`.
network
    Inverse-net widths ``c`` (16), ``c2`` (= c), ``w`` (3), ``n_cnn`` (6),
    ``n_cnn2`` (5), ``n_levels`` (largest admissible), ``local_window`` (5).
training
    :class:`~tttk.nn.training.TrainConfig`, desk schedule by default.
fbp
    :class:`~tttk.reconstruction.FbpConfig`.
kernel
    ``n_quad`` samples per unit diameter (8 n_rho when null).
model_seed
    Seed of the Glorot initialisation.
threads
    Worker cap; null defers to ``TTTK_THREADS`` or the CPU count.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .datagen import DatasetSpec
from .eikonal import DEFAULT_MAX_SWEEPS, DEFAULT_OUTSIDE_SLOWNESS, DEFAULT_TOL
from .geometry import BoundaryRing, CartesianGrid, PolarGrid
from .measurement import ForwardConfig
from .nn.networks import ForwardNetSpec, InverseNetSpec
from .nn.training import TrainConfig
from .reconstruction import FbpConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GridSection:
    n: int = 96
    n_theta: int = 64
    n_rho: int = 32
    n_sources: int = 64


@dataclass(frozen=True)
class EikonalSection:
    m0: float = 1.0
    outside_slowness: float = DEFAULT_OUTSIDE_SLOWNESS
    tol: float = DEFAULT_TOL
    max_sweeps: int = DEFAULT_MAX_SWEEPS


@dataclass(frozen=True)
class NetworkSection:
    c: int = 16
    c2: int | None = None
    w: int = 3
    n_cnn: int = 6
    n_cnn2: int = 5
    n_levels: int | None = None
    local_window: int = 5


@dataclass(frozen=True)
class KernelSection:
    n_quad: int | None = None


@dataclass(frozen=True)
class RunConfig:
    grid: GridSection = field(default_factory=GridSection)
    eikonal: EikonalSection = field(default_factory=EikonalSection)
    dataset: DatasetSpec = field(default_factory=lambda: DatasetSpec(n_train=1536))
    network: NetworkSection = field(default_factory=NetworkSection)
    training: TrainConfig = field(default_factory=TrainConfig.desk)
    fbp: FbpConfig = field(default_factory=FbpConfig)
    kernel: KernelSection = field(default_factory=KernelSection)
    model_seed: int = 0
    threads: int | None = None

    @classmethod
    def paper(cls) -> "RunConfig":
        """Full-resolution recipe: 160^2 Cartesian, 160 x 80 polar, 160 sources, c = 30."""
        return cls(
            grid=GridSection(160, 160, 80, 160),
            dataset=DatasetSpec(n_samples=20480, n_train=16384),
            network=NetworkSection(c=30),
            training=TrainConfig(),
        )

    def cartesian_grid(self) -> CartesianGrid:
        return CartesianGrid(self.grid.n)

    def polar_grid(self) -> PolarGrid:
        return PolarGrid(self.grid.n_theta, self.grid.n_rho)

    def ring(self) -> BoundaryRing:
        return BoundaryRing(self.grid.n_sources)

    def forward_config(self) -> ForwardConfig:
        e = self.eikonal
        return ForwardConfig(self.cartesian_grid(), self.ring(), e.m0, e.outside_slowness, e.tol, e.max_sweeps)

    def inverse_spec(self) -> InverseNetSpec:
        g = self.grid
        return InverseNetSpec(g.n_theta, g.n_rho, g.n_sources, **dataclasses.asdict(self.network))

    def forward_spec(self) -> ForwardNetSpec:
        g, nw = self.grid, self.network
        return ForwardNetSpec(g.n_theta, g.n_rho, g.n_sources, nw.c, nw.n_cnn, nw.n_levels, nw.local_window)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


_SCALARS = {"int": (int,), "float": (int, float), "bool": (bool,), "str": (str,)}


def _check_scalar(annotation, value, where: str):
    """Type-check a JSON scalar against a dataclass annotation such as ``"int | None"``."""
    names = [t.strip() for t in str(annotation).split("|")]
    if value is None and "None" in names:
        return
    allowed = tuple(t for n in names for t in _SCALARS.get(n, ()))
    if not allowed:
        return
    # bool is an int subclass; accept it only where bool is declared
    if isinstance(value, bool) and bool not in allowed:
        ok = False
    else:
        ok = isinstance(value, allowed)
    if not ok:
        raise ConfigError(f"{where}: expected {annotation}, got {value!r}")


def _build(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    kwargs = {}
    for name, value in data.items():
        sub = _SECTIONS.get(name) if cls is RunConfig else None
        if sub:
            kwargs[name] = _build(sub, value, f"{where}.{name}")
        else:
            _check_scalar(fields[name].type, value, f"{where}.{name}")
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


_SECTIONS = {
    "grid": GridSection,
    "eikonal": EikonalSection,
    "dataset": DatasetSpec,
    "network": NetworkSection,
    "training": TrainConfig,
    "fbp": FbpConfig,
    "kernel": KernelSection,
}


def config_from_dict(data: dict) -> RunConfig:
    return _build(RunConfig, data, "config")


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(data)
