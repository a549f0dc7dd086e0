"""Prediction assembly and the HTTP service.

predict_full chains the three heads: the type classifier's output word
conditions the unit and quantity queries, units inconsistent with the
predicted type are masked out of the unit head, and the final numeral
converter renders the quantity in the chosen unit.
"""

from __future__ import annotations

import hashlib
import logging
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from fastapi import FastAPI
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .heads import argmax_lowest
from .pipeline import ModelPredictors
from .query import MTYPE_WORDS, QueryContext
from .train import load_checkpoint, model_from_checkpoint
from .units import UNIT_ORDER, MeasurementType, default_table, format_quantity

logger = logging.getLogger(__name__)

MODEL_DIR_ENV = "SCALE_SENSE_MODEL_DIR"
CHECKPOINT_FILES = {"type": "type.sscp", "unit": "unit.sscp", "quantity": "quantity.sscp"}


class ModelNotLoaded(RuntimeError):
    """predict_full called before the three checkpoints were loaded."""


class PredictRequest(BaseModel):
    target_name: str = Field(min_length=1)
    title: str = ""
    tags: list[str] = Field(default_factory=list)
    other_ingredients: list[str] = Field(default_factory=list)
    servings: float = Field(default=4, gt=0)


class PredictionResult(BaseModel):
    mtype: str
    unit: str
    quantity_base: float
    formatted: str
    type_confidence: float
    unit_confidence: float
    exponent_confidence: float | None = None


# index of each unit's measurement type, aligned with UNIT_ORDER
_TABLE = default_table()
_UNIT_TYPE = np.array(
    [MTYPE_WORDS.index(_TABLE.unit(name).mtype.value) for name in UNIT_ORDER]
)


def predict_full(models: ModelPredictors | None, request: PredictRequest) -> PredictionResult:
    """Type -> (unit, quantity) -> formatted string, with type-consistent
    unit masking at the unit head."""
    if models is None:
        raise ModelNotLoaded("service has no models loaded")
    context = QueryContext(
        target_desc_name=request.target_name,
        title=request.title,
        tags=tuple(request.tags),
        other_ingredients=tuple(request.other_ingredients),
        servings=request.servings,
    )
    type_probs = models.type_probabilities([context])[0]
    type_index = argmax_lowest(type_probs)
    mtype_word = MTYPE_WORDS[type_index]
    mtype = MeasurementType(mtype_word)

    unit_probs = models.unit_probabilities([context], [mtype_word])[0]
    masked = np.where(_UNIT_TYPE == type_index, unit_probs, 0.0)
    masked = masked / masked.sum()
    unit_index = argmax_lowest(masked)
    unit = _TABLE.unit(UNIT_ORDER[unit_index])

    quantity, exponent_conf = models.quantity_with_confidence([context], [mtype_word])
    formatted = format_quantity(quantity[0], unit, mtype=mtype)
    return PredictionResult(
        mtype=mtype_word,
        unit=unit.canonical_name,
        quantity_base=float(quantity[0]),
        formatted=str(formatted),
        type_confidence=float(type_probs[type_index]),
        unit_confidence=float(masked[unit_index]),
        exponent_confidence=None if exponent_conf is None else float(exponent_conf[0]),
    )


@dataclass
class ModelSet:
    predictors: ModelPredictors
    checkpoint_ids: dict[str, str]
    steps: dict[str, int]

    @classmethod
    def load_dir(cls, model_dir: str | Path) -> "ModelSet":
        model_dir = Path(model_dir)
        paths = {task: model_dir / name for task, name in CHECKPOINT_FILES.items()}
        for path in paths.values():
            if not path.exists():
                raise FileNotFoundError(f"missing checkpoint {path}")
        ids, steps, models = {}, {}, {}
        for task, path in paths.items():
            ids[task] = hashlib.sha256(path.read_bytes()).hexdigest()[:12]
            ckpt = load_checkpoint(path)
            steps[task] = ckpt.step
            models[task] = model_from_checkpoint(ckpt)
        predictors = ModelPredictors(models["type"], models["unit"], models["quantity"])
        return cls(predictors=predictors, checkpoint_ids=ids, steps=steps)


def resolve_model_dir(cli_value: str | None) -> str:
    """The SCALE_SENSE_MODEL_DIR environment variable wins over flags."""
    return os.environ.get(MODEL_DIR_ENV) or cli_value or "models"


def create_app(model_dir: str | Path | None = None, model_set: ModelSet | None = None) -> FastAPI:
    app = FastAPI(title="scale-sense", version=__version__)
    if model_set is None and model_dir is not None:
        try:
            model_set = ModelSet.load_dir(model_dir)
        except Exception as exc:
            logger.warning("serving without models (%s)", exc)
            model_set = None
    app.state.model_set = model_set

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request, exc):
        detail = [
            {"field": ".".join(str(p) for p in err["loc"] if p != "body"), "message": err["msg"]}
            for err in exc.errors()
        ]
        return JSONResponse(status_code=400, content={"detail": detail})

    @app.get("/health")
    def health():
        models: ModelSet | None = app.state.model_set
        if models is None:
            return JSONResponse(status_code=503, content={"status": "loading"})
        return {
            "status": "ok",
            "version": __version__,
            "checkpoints": models.checkpoint_ids,
            "steps": models.steps,
        }

    @app.post("/predict", response_model=PredictionResult)
    def predict(request: PredictRequest):
        models: ModelSet | None = app.state.model_set
        if models is None:
            return JSONResponse(status_code=503, content={"detail": "models not loaded"})
        return predict_full(models.predictors, request)

    return app
