"""Evaluation metrics and their serializable report.

Log-domain metrics use base 10 throughout: order-of-magnitude accuracy
compares floor(log10) of target and prediction, and the log error is the
mean absolute difference of log10 values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


class EmptyInput(ValueError):
    """Metrics need at least one (target, prediction) pair."""


class NonPositiveValue(ValueError):
    """Log-domain metrics need strictly positive targets and predictions."""


def floor_log10(y: float) -> int:
    """Exact order of magnitude, robust at decade boundaries."""
    if y <= 0:
        raise NonPositiveValue(f"log metrics need positive values, got {y}")
    k = math.floor(math.log10(y))
    if 10.0 ** (k + 1) <= y:
        k += 1
    elif 10.0**k > y:
        k -= 1
    return k


def classification_metrics(pairs: list[tuple[int, int]]) -> float:
    """Fraction of exactly matching (label, prediction) pairs."""
    if not pairs:
        raise EmptyInput("no pairs")
    return sum(1 for label, pred in pairs if label == pred) / len(pairs)


def regression_metrics(pairs: list[tuple[float, float]]) -> dict[str, float]:
    """mse, mae, mape, lmae, and order-of-magnitude accuracy over pairs."""
    if not pairs:
        raise EmptyInput("no pairs")
    for y, y_hat in pairs:
        if y <= 0 or y_hat <= 0:
            raise NonPositiveValue(f"pair ({y}, {y_hat}) not strictly positive")
    n = len(pairs)
    mse = sum((y - y_hat) ** 2 for y, y_hat in pairs) / n
    mae = sum(abs(y - y_hat) for y, y_hat in pairs) / n
    mape = sum(abs(y - y_hat) / y for y, y_hat in pairs) / n
    lmae = sum(abs(math.log10(y) - math.log10(y_hat)) for y, y_hat in pairs) / n
    e_acc = sum(1 for y, y_hat in pairs if floor_log10(y) == floor_log10(y_hat)) / n
    return {"mse": mse, "mae": mae, "mape": mape, "lmae": lmae, "e_acc": e_acc}


REGRESSION_KEYS = ("mse", "mae", "mape", "lmae", "e_acc")


@dataclass
class MetricsReport:
    """Flat key/value report; kv-text key order is fixed and documented."""

    task: str
    count: int
    mode: str | None = None
    accuracy: float | None = None
    regression: dict[str, float] | None = None
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.accuracy is not None and not 0 <= self.accuracy <= 1:
            raise ValueError("accuracy must be within [0, 1]")
        if self.regression is not None:
            if set(self.regression) != set(REGRESSION_KEYS):
                raise ValueError(f"regression metrics must be exactly {REGRESSION_KEYS}")
            if not 0 <= self.regression["e_acc"] <= 1:
                raise ValueError("e_acc must be within [0, 1]")
            if any(self.regression[k] < 0 for k in REGRESSION_KEYS):
                raise ValueError("regression metrics must be non-negative")

    def to_kv_text(self) -> str:
        lines = [f"task={self.task}"]
        if self.mode is not None:
            lines.append(f"mode={self.mode}")
        lines.append(f"count={self.count}")
        if self.accuracy is not None:
            lines.append(f"accuracy={self.accuracy:.6g}")
        if self.regression is not None:
            lines.extend(f"{key}={self.regression[key]:.6g}" for key in REGRESSION_KEYS)
        for key in sorted(self.config):
            lines.append(f"config.{key}={self.config[key]}")
        return "\n".join(lines) + "\n"
