"""End-to-end evaluation of the three-task pipeline.

The unit and quantity queries need a measurement-type word: either the gold
label (ground-truth-type mode) or the type head's own prediction
(predicted-type mode, the deployment configuration).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .corpus import TaskInstance
from .encoder import tokenize
from .heads import argmax_lowest
from .metrics import MetricsReport, classification_metrics, regression_metrics
from .query import MTYPE_WORDS, QueryContext, Task, compose_for_task
from .train import (
    TaskModel,
    load_checkpoint,
    model_from_checkpoint,
    type_label,
    unit_label,
)
from .units import UNIT_ORDER, default_table, format_quantity


class VocabMismatch(ValueError):
    """The three checkpoints were trained on different vocabularies."""


class EvalMode(str, Enum):
    GROUND_TRUTH_TYPE = "ground_truth_type"
    PREDICTED_TYPE = "predicted_type"


class ModelPredictors:
    """The trained three-model bundle behind the predictor protocol."""

    def __init__(self, type_model: TaskModel, unit_model: TaskModel, quantity_model: TaskModel):
        vocabs = [m.vocab for m in (type_model, unit_model, quantity_model)]
        if not (vocabs[0] == vocabs[1] == vocabs[2]):
            raise VocabMismatch("checkpoints carry different vocabularies")
        self.type_model = type_model
        self.unit_model = unit_model
        self.quantity_model = quantity_model

    @classmethod
    def from_checkpoints(
        cls, type_path: str | Path, unit_path: str | Path, quantity_path: str | Path
    ) -> "ModelPredictors":
        models = []
        for path, task in ((type_path, Task.TYPE), (unit_path, Task.UNIT), (quantity_path, Task.QUANTITY)):
            ckpt = load_checkpoint(path)
            if ckpt.config.task is not task:
                raise VocabMismatch(f"{path} holds a {ckpt.config.task.value} model, expected {task.value}")
            models.append(model_from_checkpoint(ckpt))
        return cls(*models)

    def _encode_all(self, model: TaskModel, items, mtype_words=None):
        words = mtype_words or [None] * len(items)
        id_lists = []
        for item, word in zip(items, words):
            context: QueryContext = item.context() if isinstance(item, TaskInstance) else item
            if model.config.task is not Task.TYPE and word is None:
                word = item.mtype.value  # gold label fallback, instances only
            q = compose_for_task(model.config.task, context, word, model.config.ablation)
            id_lists.append(tokenize(q, model.vocab, model.config.encoder.max_len))
        return id_lists

    def predict_type(self, items) -> np.ndarray:
        return self.type_model.predict_classes(self._encode_all(self.type_model, items))

    def predict_unit(self, items, mtype_words: list[str]) -> np.ndarray:
        return self.unit_model.predict_classes(
            self._encode_all(self.unit_model, items, mtype_words)
        )

    def predict_quantity(self, items, mtype_words: list[str]) -> np.ndarray:
        return self.quantity_model.predict_quantities(
            self._encode_all(self.quantity_model, items, mtype_words)
        )

    def type_probabilities(self, items) -> np.ndarray:
        return self.type_model.class_probabilities(self._encode_all(self.type_model, items))

    def unit_probabilities(self, items, mtype_words: list[str]) -> np.ndarray:
        return self.unit_model.class_probabilities(
            self._encode_all(self.unit_model, items, mtype_words)
        )

    def quantity_with_confidence(self, items, mtype_words: list[str]):
        """Predictions plus the chosen exponent-bin probability (None for
        the point/log-Laplace baselines)."""
        ids = self._encode_all(self.quantity_model, items, mtype_words)
        preds = self.quantity_model.predict_quantities(ids)
        if self.quantity_model.config.regressor != "dexp":
            return preds, None
        probs, _ = self.quantity_model.quantity_distribution(ids)
        conf = np.array([row[argmax_lowest(row)] for row in probs])
        return preds, conf


@dataclass
class PipelineReport:
    mode: EvalMode
    type_report: MetricsReport
    unit_report: MetricsReport
    quantity_report: MetricsReport
    end_to_end: list[dict]

    def to_kv_text(self) -> str:
        return "\n".join(
            r.to_kv_text() for r in (self.type_report, self.unit_report, self.quantity_report)
        )


def evaluate_pipeline(
    predictors,
    instances: list[TaskInstance],
    mode: EvalMode = EvalMode.GROUND_TRUTH_TYPE,
) -> PipelineReport:
    """Per-task metrics plus the converter output for every instance.

    `predictors` exposes predict_type / predict_unit / predict_quantity;
    ModelPredictors is the trained implementation.
    """
    if not instances:
        raise ValueError("no instances to evaluate")
    mode = EvalMode(mode)
    table = default_table()

    type_preds = np.asarray(predictors.predict_type(instances))
    type_true = [type_label(inst.mtype) for inst in instances]
    if mode is EvalMode.GROUND_TRUTH_TYPE:
        words = [inst.mtype.value for inst in instances]
    else:
        words = [MTYPE_WORDS[p] for p in type_preds]

    unit_preds = np.asarray(predictors.predict_unit(instances, words))
    unit_true = [unit_label(inst.unit) for inst in instances]
    quantity_preds = np.asarray(predictors.predict_quantity(instances, words), dtype=float)
    quantity_true = [inst.quantity_base for inst in instances]

    entries = []
    for inst, u_pred, y_pred in zip(instances, unit_preds, quantity_preds):
        unit = table.unit(UNIT_ORDER[int(u_pred)])
        entries.append(
            {
                "target": inst.target_desc_name,
                "true_unit": inst.unit.canonical_name,
                "predicted_unit": unit.canonical_name,
                "true_quantity_base": inst.quantity_base,
                "predicted_quantity_base": float(y_pred),
                "formatted": str(format_quantity(float(y_pred), unit)),
            }
        )

    count = len(instances)
    return PipelineReport(
        mode=mode,
        type_report=MetricsReport(
            task="type", count=count, mode=mode.value,
            accuracy=classification_metrics(list(zip(type_true, type_preds.tolist()))),
        ),
        unit_report=MetricsReport(
            task="unit", count=count, mode=mode.value,
            accuracy=classification_metrics(list(zip(unit_true, unit_preds.tolist()))),
        ),
        quantity_report=MetricsReport(
            task="quantity", count=count, mode=mode.value,
            regression=regression_metrics(list(zip(quantity_true, quantity_preds.tolist()))),
        ),
        end_to_end=entries,
    )
