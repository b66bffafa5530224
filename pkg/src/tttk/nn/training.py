"""Staged minibatch training with Nadam, evaluation and checkpoints.

The schedule doubles the batch size at a fixed learning rate until the
maximal batch is reached, then divides the learning rate by ``lr_factor``
until ``final_lr``.  The first stage runs ``first_epochs`` epochs, every
later stage ``stage_epochs``.
"""
from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field

import numpy as np
import torch

from ..io import read_container, write_container
from .metrics import mean_psnr
from .networks import build_model, spec_from_dict, spec_kind
from .optim import NadamConfig, NadamState, nadam_step


class TrainingError(FloatingPointError):
    pass


@dataclass(frozen=True)
class Stage:
    batch: int
    lr: float
    epochs: int


@dataclass(frozen=True)
class TrainConfig:
    initial_batch: int = 32
    max_batch: int = 512
    initial_lr: float = 1e-3
    final_lr: float = 1e-5
    lr_factor: float = 10**0.5
    first_epochs: int = 100
    stage_epochs: int = 50
    seed: int = 0
    eval_every: int = 1

    def __post_init__(self):
        if not (self.initial_lr > 0 and self.final_lr > 0):
            raise ValueError("learning rates must be positive")
        if self.final_lr > self.initial_lr:
            raise ValueError("final_lr must not exceed initial_lr")
        if self.lr_factor <= 1:
            raise ValueError("lr_factor must exceed 1")
        if not 1 <= self.initial_batch <= self.max_batch:
            raise ValueError("need 1 <= initial_batch <= max_batch")
        if self.first_epochs < 0 or self.stage_epochs < 0 or self.eval_every < 1:
            raise ValueError("epoch counts must be >= 0 and eval_every >= 1")

    @classmethod
    def desk(cls, seed: int = 0) -> "TrainConfig":
        """Batches 32, 64, 128 at 1e-3, then 10^-3.5 and 1e-4 at 128; 20 epochs each."""
        return cls(max_batch=128, final_lr=1e-4, first_epochs=20, stage_epochs=20, seed=seed)

    def stages(self, n_train: int | None = None) -> list[Stage]:
        cap = self.max_batch if n_train is None else max(1, min(self.max_batch, n_train))
        out = []
        batch = self.initial_batch
        while True:
            out.append(Stage(min(batch, cap), self.initial_lr, self.stage_epochs))
            if batch >= self.max_batch:
                break
            batch = min(2 * batch, self.max_batch)
        n_decay = round(math.log(self.initial_lr / self.final_lr) / math.log(self.lr_factor))
        for k in range(1, n_decay + 1):
            out.append(Stage(min(self.max_batch, cap), self.initial_lr / self.lr_factor**k, self.stage_epochs))
        out[0] = Stage(out[0].batch, out[0].lr, self.first_epochs)
        return [s for s in out if s.epochs > 0]

    @property
    def total_epochs(self) -> int:
        return sum(s.epochs for s in self.stages())


@dataclass
class History:
    initial_loss: float
    epochs: list = field(default_factory=list)
    final_loss: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "History":
        return cls(**d)


@contextmanager
def deterministic():
    prev = torch.are_deterministic_algorithms_enabled()
    torch.use_deterministic_algorithms(True)
    try:
        yield
    finally:
        torch.use_deterministic_algorithms(prev)


def _as_tensor(a, dtype):
    return torch.from_numpy(np.ascontiguousarray(a)).to(dtype)


@torch.no_grad()
def predict(model, x, batch: int = 256) -> np.ndarray:
    """Apply ``model`` to a stack of inputs; returns float64 numpy output."""
    dtype = next(model.parameters()).dtype
    x = np.asarray(x)
    single = x.ndim == 2
    if single:
        x = x[None]
    outs = [model(_as_tensor(x[i : i + batch], dtype)).double().numpy() for i in range(0, len(x), batch)]
    out = np.concatenate(outs) if outs else np.zeros((0,))
    return out[0] if single else out


@torch.no_grad()
def evaluate_loss(model, x, y, batch: int = 256) -> float:
    pred = predict(model, x, batch)
    return float(np.mean((pred - np.asarray(y, dtype=float)) ** 2))


def train(model, train_data, test_data=None, cfg: TrainConfig = TrainConfig(), *,
          progress=None, nadam: NadamConfig = NadamConfig()) -> History:
    """Fit ``model`` to ``train_data = (inputs, targets)`` in place.

    Each epoch record holds the sample-weighted mean batch loss and, every
    ``eval_every`` epochs when ``test_data`` is given, the mean per-sample test
    PSNR.  Shuffling uses a generator seeded by ``cfg.seed``, so reruns with
    the same seed, initial parameters and thread count are bit-identical.
    """
    x_np, y_np = train_data
    n = len(x_np)
    if n == 0:
        raise ValueError("empty training set")
    dtype = next(model.parameters()).dtype
    X, Y = _as_tensor(x_np, dtype), _as_tensor(y_np, dtype)
    rng = np.random.default_rng([cfg.seed, 7])
    params = dict(model.named_parameters())
    state = NadamState()
    hist = History(initial_loss=evaluate_loss(model, x_np, y_np))
    epoch = 0
    with deterministic():
        for si, stage in enumerate(cfg.stages(n)):
            for _ in range(stage.epochs):
                epoch += 1
                perm = torch.from_numpy(rng.permutation(n))
                total = 0.0
                for i in range(0, n, stage.batch):
                    idx = perm[i : i + stage.batch]
                    model.zero_grad(set_to_none=False)
                    loss = torch.mean((model(X[idx]) - Y[idx]) ** 2)
                    if not torch.isfinite(loss):
                        raise TrainingError(
                            f"non-finite loss at epoch {epoch} (stage {si}, batch size {stage.batch}, lr {stage.lr:.3g})"
                        )
                    loss.backward()
                    nadam_step(params, {k: p.grad for k, p in params.items()}, state, stage.lr, nadam)
                    total += float(loss.detach()) * len(idx)
                rec = {"epoch": epoch, "stage": si, "batch": stage.batch, "lr": stage.lr, "train_loss": total / n}
                if test_data is not None and epoch % cfg.eval_every == 0:
                    pred = predict(model, test_data[0])
                    rec["test_psnr"], _ = mean_psnr(pred, test_data[1])
                hist.epochs.append(rec)
                if progress is not None:
                    progress(rec)
    hist.final_loss = evaluate_loss(model, x_np, y_np)
    return hist


def save_checkpoint(path, model, *, seed=None, history: History | None = None, extra: dict | None = None):
    spec = model.spec
    header = {
        "kind": spec_kind(spec),
        "spec": spec.to_dict(),
        "seed": seed,
        "epoch": len(history.epochs) if history else 0,
        "history": history.to_dict() if history else None,
        "extra": extra or {},
    }
    tensors = {k: v.detach().numpy() for k, v in model.state_dict().items()}
    write_container(path, header, tensors)


def load_checkpoint(path):
    """Return ``(model, header)``; the model has the stored dtype and parameters."""
    header, tensors = read_container(path)
    spec = spec_from_dict(header["kind"], header["spec"])
    first = next(iter(tensors.values()))
    dtype = torch.float64 if first.dtype == np.float64 else torch.float32
    model = build_model(spec, dtype=dtype)
    model.load_state_dict({k: torch.from_numpy(v.copy()) for k, v in tensors.items()})
    return model, header
