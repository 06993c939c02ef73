import os
from collections import defaultdict

import pandas as pd
from bbrl import instantiate_class


def _scalar(value):
    return value.item() if hasattr(value, "item") else float(value)


class Logger:
    """Scalar logger over the TFLogger named in cfg.logger.
    Without a logger section the scalars are only kept in memory."""

    def __init__(self, cfg=None):
        logger_cfg = cfg.get("logger") if cfg is not None else None
        self.logger = instantiate_class(logger_cfg) if logger_cfg else None
        self.scalars = defaultdict(list)

    def add_log(self, log_string, value, step):
        value = _scalar(value)
        self.scalars[log_string].append((step, value))
        if self.logger is not None:
            self.logger.add_scalar(log_string, value, step)

    def log_metrics(self, prefix, metrics, step):
        for name, value in metrics.items():
            self.add_log(f"{prefix}/{name}", value, step)

    # Log one training epoch
    def log_epoch(self, epoch, train_loss, train_accuracy, val_loss, val_accuracy):
        self.add_log("train/loss", train_loss, epoch)
        self.add_log("train/accuracy", train_accuracy, epoch)
        self.add_log("val/loss", val_loss, epoch)
        self.add_log("val/accuracy", val_accuracy, epoch)


class HistoryLogger:
    """Accumulates one row per step and writes them as a CSV file"""

    def __init__(self, filename=None):
        self.filename = filename
        self.rows = []

    def add(self, **row):
        self.rows.append({key: _scalar(value) if hasattr(value, "item") else value for key, value in row.items()})

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows)

    def save(self, filename=None):
        filename = filename or self.filename
        directory = os.path.dirname(filename)
        if directory and not os.path.exists(directory):
            os.makedirs(directory)
        self.frame().to_csv(filename, index=False)
        return filename
