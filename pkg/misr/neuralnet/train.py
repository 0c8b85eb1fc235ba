# misr/neuralnet/train.py
import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from misr.assembly import Dataset, input_stack
from misr.errors import ConfigError, EmptyClearError, TrainingDivergenceError
from misr.metric import cpsnr
from misr.neuralnet.network import N_INPUTS, NetworkParams, forward, init_params, predict
from misr.neuralnet.layers import masked_mse_loss, registered_mse_loss
from misr.neuralnet.optim import Adam, exponential_lr
from misr.neuralnet.tensor import Tensor

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = ("epoch", "lr", "train_loss", "val_cpsnr")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 4
    lr_initial: float = 0.001
    lr_final: float = 7.666e-5
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    mask_loss: bool = True
    registered_loss: bool = True

    def __post_init__(self):
        errors = []
        if self.epochs < 1:
            errors.append("epochs must be >= 1")
        if self.batch_size < 1:
            errors.append("batch_size must be >= 1")
        if not (0 < self.lr_final < self.lr_initial):
            errors.append("need 0 < lr_final < lr_initial")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1 and self.adam_eps > 0):
            errors.append("Adam betas must lie in [0, 1) and eps must be positive")
        if errors:
            raise ConfigError("invalid training config: " + "; ".join(errors))

    def lr_at(self, epoch: int) -> float:
        return exponential_lr(epoch, self.epochs, self.lr_initial, self.lr_final)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    lr: float
    train_loss: float
    val_cpsnr: Optional[float]


@dataclass(frozen=True)
class TrainingSet:
    inputs: np.ndarray
    targets: np.ndarray
    masks: np.ndarray

    @classmethod
    def from_dataset(cls, ds: Dataset) -> "TrainingSet":
        if not ds.members:
            raise ConfigError("cannot train on an empty dataset")
        return cls(
            inputs=np.stack([input_stack(m, N_INPUTS) for m in ds.members]),
            targets=np.stack([m.hr.pixels for m in ds.members]).astype(np.float32),
            masks=np.stack([m.hr_mask.clear for m in ds.members]),
        )

    def __len__(self) -> int:
        return len(self.inputs)


def batch_loss(params: NetworkParams, data: TrainingSet, idx: np.ndarray, mask_loss: bool = True,
               registered: bool = True):
    """Loss tensor of one mini-batch plus the parameter tensors it was built from."""
    tensors = params.as_tensors()
    pred = predict(tensors, Tensor(data.inputs[idx]))
    loss_fn = registered_mse_loss if registered else masked_mse_loss
    loss = loss_fn(pred, data.targets[idx], data.masks[idx] if mask_loss else None)
    return loss, tensors


def scored_samples(data: TrainingSet, idx: np.ndarray, mask_loss: bool = True) -> int:
    """How many samples of the batch the loss averages over (those with a clear target pixel)."""
    if not mask_loss:
        return len(idx)
    return int(np.count_nonzero(data.masks[idx].any(axis=(1, 2))))


def dataset_loss(params: NetworkParams, ds: Dataset, cfg: TrainConfig = TrainConfig()) -> float:
    """Mean per-sample training loss of params over ds, in fixed batches."""
    data = TrainingSet.from_dataset(ds)
    total, count = 0.0, 0
    for start in range(0, len(data), cfg.batch_size):
        idx = np.arange(start, min(start + cfg.batch_size, len(data)))
        n = scored_samples(data, idx, cfg.mask_loss)
        if n == 0:
            continue
        loss, _ = batch_loss(params, data, idx, cfg.mask_loss, cfg.registered_loss)
        total += loss.item() * n
        count += n
    if count == 0:
        raise EmptyClearError("no member has a clear target pixel")
    return total / count


def mean_cpsnr(params: NetworkParams, ds: Dataset) -> float:
    scores = [cpsnr(m.hr, m.hr_mask, forward(params, input_stack(m, N_INPUTS))).cpsnr for m in ds.members]
    return math.fsum(scores) / len(scores)


def train(
    ds_train: Dataset,
    cfg: TrainConfig = TrainConfig(),
    ds_val: Optional[Dataset] = None,
) -> Tuple[NetworkParams, List[EpochRecord]]:
    data = TrainingSet.from_dataset(ds_train)
    params = init_params(cfg.seed)
    shuffle = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(1,)))
    opt = Adam(cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    history: List[EpochRecord] = []

    logger.info(f"training on {len(data)} members for {cfg.epochs} epochs (batch {cfg.batch_size})")
    for epoch in range(cfg.epochs):
        lr = cfg.lr_at(epoch)
        order = shuffle.permutation(len(data))
        loss_sum, seen = 0.0, 0
        for start in range(0, len(data), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            try:
                loss, tensors = batch_loss(params, data, idx, cfg.mask_loss, cfg.registered_loss)
            except EmptyClearError:
                logger.warning(f"epoch {epoch}: batch at {start} has no clear target pixel, skipped")
                continue
            if not np.isfinite(loss.data):
                raise TrainingDivergenceError(epoch, f"loss {loss.item()} on batch at {start}")
            loss.backward()
            grads = {name: t.grad for name, t in tensors.items()}
            if not all(np.all(np.isfinite(g)) for g in grads.values()):
                raise TrainingDivergenceError(epoch, f"non-finite gradient on batch at {start}")
            opt.step(params.as_dict(), grads, lr)
            n = scored_samples(data, idx, cfg.mask_loss)
            loss_sum += loss.item() * n
            seen += n

        if seen == 0:
            raise EmptyClearError(f"epoch {epoch}: no batch had a clear target pixel")
        val = mean_cpsnr(params, ds_val) if ds_val is not None and ds_val.members else None
        record = EpochRecord(epoch, lr, loss_sum / seen, val)
        history.append(record)
        val_text = f"{val:.4f} dB" if val is not None else "n/a"
        logger.info(f"epoch {epoch:>3}  lr={lr:.4e}  loss={record.train_loss:.6e}  val_cpsnr={val_text}")

    return params, history


def write_history(path: Union[str, Path], history: List[EpochRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(HISTORY_COLUMNS)
        for r in history:
            writer.writerow([r.epoch, repr(r.lr), repr(r.train_loss), "" if r.val_cpsnr is None else repr(r.val_cpsnr)])
