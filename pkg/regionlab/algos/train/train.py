import copy
import os
import sys
from dataclasses import dataclass
from typing import Tuple

import hydra
import numpy as np
import torch
import torch.nn.functional as F
from bbrl import get_arguments, get_class
from bbrl.utils.chrono import Chrono
from omegaconf import DictConfig, OmegaConf

from regionlab.models.datasets import Dataset
from regionlab.models.errors import TrainingDivergedError
from regionlab.models.loggers import HistoryLogger, Logger
from regionlab.models.network import NetworkModel, predict_classes
from regionlab.models.runs import echo_config, load_datasets, prepare_run_dir
from regionlab.models.shared_models import VARIANTS, build_mlp, export_network


@dataclass(frozen=True)
class TrainConfig:
    variant: str = "vanilla"
    hidden_widths: Tuple[int, ...] = (10, 10, 10)
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    batch_size: int = 256
    dropout_rate: float = 0.2
    max_epochs: int = 200
    patience: int = 10
    seed: int = 0
    validation_fraction: float = 0.1
    init: str = "xavier"
    bn_eps: float = 1e-5
    bn_momentum: float = 0.9
    optimizer: str = "torch.optim.Adam"

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant}, expected one of {VARIANTS}")
        if not self.hidden_widths or min(self.hidden_widths) <= 0:
            raise ValueError("hidden_widths must be a nonempty list of positive integers")
        if self.learning_rate <= 0 or not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("learning rate must be positive and betas in (0, 1)")
        if self.batch_size <= 0 or self.max_epochs <= 0 or self.patience <= 0:
            raise ValueError("batch_size, max_epochs and patience must be positive")
        if not 0 <= self.dropout_rate < 1:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if not 0 < self.validation_fraction < 1:
            raise ValueError("validation_fraction must lie in (0, 1)")

    @classmethod
    def from_cfg(cls, cfg):
        algo = cfg.algorithm
        beta1, beta2 = cfg.optimizer.betas
        return cls(
            variant=algo.variant,
            hidden_widths=tuple(algo.hidden_widths),
            learning_rate=cfg.optimizer.lr,
            beta1=beta1,
            beta2=beta2,
            batch_size=algo.batch_size,
            dropout_rate=algo.dropout_rate,
            max_epochs=algo.max_epochs,
            patience=algo.patience,
            seed=algo.seed,
            validation_fraction=algo.validation_fraction,
            init=algo.init,
            bn_eps=algo.bn_eps,
            bn_momentum=algo.bn_momentum,
            optimizer=cfg.optimizer.classname,
        )


def setup_optimizer(config: TrainConfig, mlp):
    optimizer_cfg = OmegaConf.create(
        {"classname": config.optimizer, "lr": config.learning_rate, "betas": [config.beta1, config.beta2]}
    )
    optimizer_args = get_arguments(optimizer_cfg)
    optimizer_args["betas"] = tuple(optimizer_args["betas"])
    return get_class(optimizer_cfg)(mlp.parameters(), **optimizer_args)


def evaluate(mlp, inputs, labels):
    """(mean cross-entropy, accuracy) of mlp in inference mode"""
    mlp.eval()
    with torch.no_grad():
        logits = mlp(inputs)
        loss = F.cross_entropy(logits, labels).item()
        accuracy = (logits.argmax(dim=1) == labels).float().mean().item()
    return loss, accuracy


def accuracy(model: NetworkModel, data: Dataset) -> float:
    return float(np.mean(predict_classes(model, data.inputs) == data.labels))


def train(config: TrainConfig, data: Dataset, logger: Logger = None, input_bounds=(-1.0, 1.0)):
    """Adam training with early stopping on validation accuracy, ties ranked by validation loss.
    Returns the exported best-epoch model and the per-epoch history frame."""
    if len(data) == 0:
        raise ValueError("cannot train on an empty dataset")
    logger = logger or Logger()
    torch.manual_seed(config.seed)
    train_set, val_set = data.split(config.validation_fraction, config.seed)
    sizes = [data.input_dim, *config.hidden_widths, data.class_count]
    mlp = build_mlp(
        sizes,
        config.variant,
        config.dropout_rate,
        config.init,
        config.seed,
        config.bn_eps,
        config.bn_momentum,
    )
    optimizer = setup_optimizer(config, mlp)

    inputs = torch.tensor(train_set.inputs, dtype=torch.float32)
    labels = torch.tensor(train_set.labels, dtype=torch.int64)
    val_inputs = torch.tensor(val_set.inputs, dtype=torch.float32)
    val_labels = torch.tensor(val_set.labels, dtype=torch.int64)
    generator = torch.Generator().manual_seed(config.seed)
    history = HistoryLogger()

    best_accuracy, best_loss, best_state, stale = -1.0, np.inf, None, 0
    for epoch in range(config.max_epochs):
        mlp.train()
        order = torch.randperm(len(train_set), generator=generator)
        total_loss, correct, seen = 0.0, 0, 0
        for start in range(0, len(train_set), config.batch_size):
            batch = order[start : start + config.batch_size]
            if config.variant == "batchnorm" and batch.shape[0] < 2:
                continue
            logits = mlp(inputs[batch])
            loss = F.cross_entropy(logits, labels[batch])
            if not torch.isfinite(loss):
                raise TrainingDivergedError(epoch, loss.item())
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total_loss += loss.item() * batch.shape[0]
            correct += (logits.argmax(dim=1) == labels[batch]).sum().item()
            seen += batch.shape[0]

        train_loss, train_accuracy = total_loss / max(seen, 1), correct / max(seen, 1)
        val_loss, val_accuracy = evaluate(mlp, val_inputs, val_labels)
        logger.log_epoch(epoch, train_loss, train_accuracy, val_loss, val_accuracy)
        history.add(
            epoch=epoch,
            train_loss=train_loss,
            train_accuracy=train_accuracy,
            val_loss=val_loss,
            val_accuracy=val_accuracy,
        )
        # equal accuracies are ranked by validation loss
        if val_accuracy > best_accuracy or (val_accuracy == best_accuracy and val_loss < best_loss):
            if val_accuracy > best_accuracy:
                print(f"epoch: {epoch}, val_accuracy: {val_accuracy:.4f}")
            best_accuracy, best_loss, stale = val_accuracy, val_loss, 0
            best_state = copy.deepcopy(mlp.state_dict())
        else:
            stale += 1
            if stale >= config.patience:
                print(f"early stopping at epoch {epoch}, best val_accuracy: {best_accuracy:.4f}")
                break

    mlp.load_state_dict(best_state)
    mlp.eval()
    return export_network(mlp, input_bounds), history.frame()


def cmd_train(cfg) -> int:
    chrono = Chrono()
    output_dir = prepare_run_dir(cfg.output_dir)
    echo_config(cfg, output_dir)
    train_set, test_set = load_datasets(cfg)
    model, history = train(TrainConfig.from_cfg(cfg), train_set, Logger(cfg))
    model.save(os.path.join(output_dir, "model.json"))
    history.to_csv(os.path.join(output_dir, "history.csv"), index=False)
    print(f"test_accuracy: {accuracy(model, test_set):.4f}")
    chrono.stop()
    return 0


@hydra.main(config_path="./configs/", config_name="train_spiral.yaml", version_base="1.2")
def main(cfg: DictConfig):
    # print(OmegaConf.to_yaml(cfg))
    sys.exit(cmd_train(cfg))


if __name__ == "__main__":
    sys.path.append(os.getcwd())
    main()
