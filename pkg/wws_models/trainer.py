"""
Mini-batch training loop with a persistent optimizer
"""

from dataclasses import asdict, dataclass
from typing import Callable, List

import numpy as np
import pandas as pd

from tensor_core.errors import ContractError, NumericDivergenceError, NumericDomainError
from tensor_core.tensor import backward
from wws_models.loss import wws_loss
from wws_models.models import WWSModel
from wws_models.optim import Adam

StepHook = Callable[["Trainer", int, int, int], None]


@dataclass
class EpochRecord:
    iteration: int
    epoch: int
    global_epoch: int
    batches: int
    mean_loss: float


class Trainer:
    """
    Runs epochs of shuffled mini-batches through model.score and Adam

    The optimizer and the epoch counter persist across calls, so fine-tuning
    epochs continue the same Adam state and never reuse a shuffle order.
    """

    def __init__(
        self,
        model: WWSModel,
        optimizer: Adam,
        batch_size: int,
        seed: int,
        verbose: bool = True,
    ):
        if batch_size <= 0:
            raise ContractError(f"Batch size must be positive, got {batch_size}")
        self.model = model
        self.optimizer = optimizer
        self.batch_size = batch_size
        self.seed = seed
        self.verbose = verbose
        self.hooks: List[StepHook] = []
        self.log: List[EpochRecord] = []
        self.epochs_run = 0

    def add_hook(self, hook: StepHook):
        """Register hook(trainer, iteration, epoch, batch_index) called after every optimizer step"""
        self.hooks.append(hook)

    def run_epoch(self, dataset, iteration: int = 1, epoch: int = 1) -> EpochRecord:
        n = len(dataset)
        if n == 0:
            raise ContractError("Cannot train on an empty dataset")
        rng = np.random.default_rng([self.seed, self.epochs_run])
        order = rng.permutation(n)

        total, batches = 0.0, 0
        for batch_index, start in enumerate(range(0, n, self.batch_size)):
            indices = order[start : start + self.batch_size]
            batch = dataset.batch(indices, audio=self.model.needs_audio, lips=self.model.needs_lips)
            self.optimizer.zero_grad()
            try:
                loss = wws_loss(self.model.score(batch), batch.labels)
            except NumericDomainError as e:
                raise NumericDivergenceError(
                    f"Non-finite value in forward pass at iteration {iteration}, epoch {epoch}, batch {batch_index}: {e}",
                    iteration=iteration, epoch=epoch, batch=batch_index,
                ) from e
            value = loss.item()
            if not np.isfinite(value):
                raise NumericDivergenceError(
                    f"Loss became {value} at iteration {iteration}, epoch {epoch}, batch {batch_index}",
                    iteration=iteration, epoch=epoch, batch=batch_index,
                )
            backward(loss)
            self.optimizer.step()
            for hook in self.hooks:
                hook(self, iteration, epoch, batch_index)
            total += value * len(indices)
            batches += 1

        self.epochs_run += 1
        record = EpochRecord(
            iteration=iteration, epoch=epoch, global_epoch=self.epochs_run, batches=batches, mean_loss=total / n
        )
        self.log.append(record)
        if self.verbose:
            print(f"   ✅ [{self.model.modality}] t={iteration} epoch {epoch}: mean loss {record.mean_loss:.6f}")
        return record

    def train(self, dataset, epochs: int, iteration: int = 1) -> List[EpochRecord]:
        if epochs < 0:
            raise ContractError(f"Epoch count must be non-negative, got {epochs}")
        return [self.run_epoch(dataset, iteration=iteration, epoch=e) for e in range(1, epochs + 1)]

    def log_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [asdict(r) for r in self.log], columns=["iteration", "epoch", "global_epoch", "batches", "mean_loss"]
        )
