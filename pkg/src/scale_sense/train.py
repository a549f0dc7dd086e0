"""Training loop, gradient utilities, and checkpoint serialization.

One TaskModel bundles the context encoder with a task head. Gradients come
from reverse-mode autodiff and are validated against central finite
differences. Checkpoints are a versioned, self-describing binary container
of named little-endian arrays; a load reproduces forward outputs bit-exactly.
"""

from __future__ import annotations

import copy
import json
import logging
import math
import random
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .corpus import TaskInstance
from .encoder import (
    EncoderConfig,
    EncoderMode,
    TextEncoder,
    Vocabulary,
    pad_batch,
    tokenize,
)
from .heads import (
    ClipCounter,
    DiscreteExponentHead,
    ExponentBins,
    LinearHead,
    RegressionBaseline,
    DEFAULT_KAPPA,
    baseline_loss_and_predict,
    dexp_decode,
    dexp_nll,
)
from .query import AblationFlags, MTYPE_WORDS, Task, compose_for_task
from .units import UNIT_ORDER, MeasurementType, Unit

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"SSCP"
CHECKPOINT_VERSION = 1

# positive floor applied to point predictions before log-domain metrics
PREDICTION_FLOOR = 1e-9


class NonFiniteLoss(RuntimeError):
    """Loss diverged to NaN or infinity; the run is aborted with context."""


class VersionMismatch(ValueError):
    """Checkpoint magic, version, or shapes disagree with expectations."""


def type_label(mtype: MeasurementType) -> int:
    return MTYPE_WORDS.index(mtype.value)


def unit_label(unit: Unit) -> int:
    return UNIT_ORDER.index(unit.canonical_name)


@dataclass
class TrainConfig:
    task: Task
    regressor: str = "dexp"  # quantity task only: dexp | loglp | l1
    lr: float = 1e-3
    batch_size: int = 32
    max_steps: int = 1000
    seed: int = 0
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    ablation: AblationFlags = field(default_factory=AblationFlags)
    bins: ExponentBins = field(default_factory=ExponentBins)
    kappa: float = DEFAULT_KAPPA
    min_freq: int = 1
    eval_every: int = 50
    patience: int = 5  # evaluations without improvement before stopping
    init_from: str | None = None  # warm-start encoder weights from a checkpoint

    def __post_init__(self):
        if self.lr < 0:
            raise ValueError("lr must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.regressor not in ("dexp", "loglp", "l1"):
            raise ValueError(f"unknown regressor {self.regressor!r}")

    def to_dict(self) -> dict:
        data = asdict(self)
        data["task"] = self.task.value
        data["encoder"]["mode"] = self.encoder.mode.value
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        data = dict(data)
        data["task"] = Task(data["task"])
        enc = dict(data["encoder"])
        enc["mode"] = EncoderMode(enc["mode"])
        data["encoder"] = EncoderConfig(**enc)
        data["ablation"] = AblationFlags(**data["ablation"])
        data["bins"] = ExponentBins(**data["bins"])
        return cls(**data)


def build_corpus_vocab(instances: list[TaskInstance], min_freq: int = 1) -> Vocabulary:
    """One vocabulary shared by all three tasks, built from every query form."""
    texts = []
    for inst in instances:
        context = inst.context()
        texts.append(compose_for_task(Task.TYPE, context).text)
        for word in MTYPE_WORDS:
            texts.append(compose_for_task(Task.UNIT, context, word).text)
    return Vocabulary.build(texts, min_freq=min_freq)


def encode_instance(
    inst: TaskInstance,
    task: Task,
    vocab: Vocabulary,
    max_len: int,
    ablation: AblationFlags,
    mtype_word: str | None = None,
) -> list[int]:
    if task is not Task.TYPE and mtype_word is None:
        mtype_word = inst.mtype.value
    q = compose_for_task(task, inst.context(), mtype_word, ablation)
    return tokenize(q, vocab, max_len)


def instance_label(inst: TaskInstance, task: Task):
    if task is Task.TYPE:
        return type_label(inst.mtype)
    if task is Task.UNIT:
        return unit_label(inst.unit)
    return inst.quantity_base


class TaskModel(nn.Module):
    """Context encoder plus the head for one task."""

    def __init__(self, config: TrainConfig, vocab: Vocabulary):
        super().__init__()
        self.config = config
        self.vocab = vocab
        self.encoder = TextEncoder(config.encoder, len(vocab))
        dim = config.encoder.dim
        if config.task is Task.TYPE:
            self.head: nn.Module = LinearHead(dim, 2)
        elif config.task is Task.UNIT:
            self.head = LinearHead(dim, len(UNIT_ORDER))
        elif config.regressor == "dexp":
            self.head = DiscreteExponentHead(dim, config.bins)
        else:
            self.head = RegressionBaseline(dim, config.regressor)
        self.clip_counter = ClipCounter()
        self.init_parameters(config.seed)
        self.encoder.apply_mode()

    @torch.no_grad()
    def init_parameters(self, seed: int) -> None:
        self.encoder.init_parameters(seed)
        gen = torch.Generator().manual_seed(seed + 1)
        for param in self.head.parameters():
            if param.dim() >= 2:
                param.copy_(torch.empty_like(param).normal_(0.0, 0.02, generator=gen))
            else:
                param.zero_()

    def forward_context(self, id_lists: list[list[int]]) -> torch.Tensor:
        ids, mask = pad_batch(id_lists, self.vocab.pad_id)
        param = next(self.parameters())
        return self.encoder(ids.to(param.device), mask.to(param.device))

    def loss(self, id_lists: list[list[int]], labels) -> torch.Tensor:
        h = self.forward_context(id_lists)
        if self.config.task in (Task.TYPE, Task.UNIT):
            target = torch.as_tensor(labels, dtype=torch.long)
            return F.cross_entropy(self.head(h), target)
        y = torch.as_tensor(labels, dtype=h.dtype)
        if self.config.regressor == "dexp":
            return dexp_nll(
                self.head(h), y, self.config.bins, self.config.kappa,
                self.clip_counter, clip=True,
            )
        loss, _ = baseline_loss_and_predict(self.head, h, y)
        return loss

    @torch.no_grad()
    def predict_classes(self, id_lists: list[list[int]]) -> np.ndarray:
        logits = self.head(self.forward_context(id_lists))
        return logits.detach().cpu().numpy().argmax(axis=1)

    @torch.no_grad()
    def class_probabilities(self, id_lists: list[list[int]]) -> np.ndarray:
        logits = self.head(self.forward_context(id_lists))
        return torch.softmax(logits, dim=-1).detach().cpu().numpy()

    @torch.no_grad()
    def predict_quantities(self, id_lists: list[list[int]]) -> np.ndarray:
        """Positive quantity predictions (point predictions floored at 1e-9)."""
        h = self.forward_context(id_lists)
        if self.config.regressor == "dexp":
            out = self.head(h)
            return np.array([dexp_decode(out, self.config.bins, row=i) for i in range(h.shape[0])])
        raw = self.head(h)
        preds = torch.exp(raw) if self.config.regressor == "loglp" else raw
        return np.maximum(preds.detach().cpu().numpy(), PREDICTION_FLOOR)

    @torch.no_grad()
    def quantity_distribution(self, id_lists: list[list[int]]):
        """(probabilities, mantissas) of the exponent head; dexp only."""
        out = self.head(self.forward_context(id_lists))
        return (
            out.probabilities.detach().cpu().numpy(),
            out.mantissas.detach().cpu().numpy(),
        )


def compute_gradients(
    model: TaskModel, id_lists: list[list[int]], labels
) -> dict[str, np.ndarray]:
    """Reverse-mode gradients of the mean batch loss; frozen params get zeros."""
    if not id_lists:
        raise ValueError("batch must be non-empty")
    model.zero_grad(set_to_none=True)
    loss = model.loss(id_lists, labels)
    if not torch.isfinite(loss):
        raise NonFiniteLoss(f"loss {float(loss.detach())} on task {model.config.task.value}")
    loss.backward()
    grads = {}
    for name, param in model.named_parameters():
        if param.grad is None:
            grads[name] = np.zeros(param.shape, dtype=param.detach().cpu().numpy().dtype)
        else:
            grads[name] = param.grad.detach().cpu().numpy().copy()
    model.zero_grad(set_to_none=True)
    return grads


def finite_difference_check(
    model: TaskModel,
    id_lists: list[list[int]],
    labels,
    epsilon: float = 1e-5,
    max_params: int = 10_000,
    seed: int = 0,
) -> float:
    """Worst relative error between autodiff and central finite differences.

    Checks every trainable parameter entry, or a seeded random subset when
    the model exceeds max_params entries. Run the model in float64 for
    meaningful tolerances. Central differences cannot resolve gradients
    below ~|loss| * eps_mach / epsilon, so the error denominator is floored
    four orders of magnitude above that noise level; entries beneath
    measurement precision cannot dominate the report.
    """
    if not 1e-6 <= epsilon <= 1e-3:
        raise ValueError("epsilon must be in [1e-6, 1e-3]")
    grads = compute_gradients(model, id_lists, labels)

    def loss_value() -> float:
        with torch.no_grad():
            return float(model.loss(id_lists, labels))

    noise_floor = max(1e-6, abs(loss_value()) * 5e-12 / epsilon)

    entries = []
    for name, param in model.named_parameters():
        if not param.requires_grad:
            continue
        for flat_index in range(param.numel()):
            entries.append((name, param, flat_index))
    if len(entries) > max_params:
        rng = random.Random(seed)
        entries = rng.sample(entries, max_params)

    worst = 0.0
    for name, param, flat_index in entries:
        flat = param.data.view(-1)
        original = float(flat[flat_index])
        flat[flat_index] = original + epsilon
        upper = loss_value()
        flat[flat_index] = original - epsilon
        lower = loss_value()
        flat[flat_index] = original
        fd = (upper - lower) / (2 * epsilon)
        ad = float(grads[name].reshape(-1)[flat_index])
        err = abs(fd - ad) / max(noise_floor, abs(fd), abs(ad))
        worst = max(worst, err)
    return worst


@dataclass
class Checkpoint:
    config: TrainConfig
    vocab: Vocabulary
    arrays: dict[str, np.ndarray]
    step: int
    metrics: dict[str, float]

    def state_dict(self) -> dict[str, torch.Tensor]:
        return {name: torch.from_numpy(arr.copy()) for name, arr in self.arrays.items()}


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    model: TaskModel
    loss_curve: list[tuple[int, float]]
    best_metric: float
    steps_run: int


def _instances_to_batches(
    instances: list[TaskInstance], config: TrainConfig, vocab: Vocabulary
) -> tuple[list[list[int]], list]:
    ids = [
        encode_instance(inst, config.task, vocab, config.encoder.max_len, config.ablation)
        for inst in instances
    ]
    labels = [instance_label(inst, config.task) for inst in instances]
    return ids, labels


def _validation_metric(model: TaskModel, ids: list[list[int]], labels) -> tuple[float, bool]:
    """Returns (metric, higher_is_better)."""
    if model.config.task in (Task.TYPE, Task.UNIT):
        preds = model.predict_classes(ids)
        return float((preds == np.asarray(labels)).mean()), True
    preds = model.predict_quantities(ids)
    lmae = float(np.mean(np.abs(np.log10(np.asarray(labels)) - np.log10(preds))))
    return lmae, False


def train_task(
    train_data: list[TaskInstance],
    valid_data: list[TaskInstance],
    config: TrainConfig,
    vocab: Vocabulary | None = None,
) -> TrainResult:
    """Deterministic seeded training; keeps the best-validation parameters."""
    if not train_data:
        raise ValueError("train_data must be non-empty")
    vocab = vocab or build_corpus_vocab(train_data, config.min_freq)
    model = TaskModel(config, vocab)
    if config.init_from:
        warm = load_checkpoint(config.init_from)
        _load_encoder_weights(model, warm)

    train_ids, train_labels = _instances_to_batches(train_data, config, vocab)
    valid_ids, valid_labels = _instances_to_batches(valid_data or train_data, config, vocab)

    trainable = [p for p in model.parameters() if p.requires_grad]
    optimizer = torch.optim.Adam(trainable, lr=config.lr, betas=(0.9, 0.999), eps=1e-8)

    order_rng = random.Random(config.seed)
    order: list[int] = []
    loss_curve: list[tuple[int, float]] = []
    best_metric: float | None = None
    best_state: dict | None = None
    best_step = 0
    higher_better = config.task in (Task.TYPE, Task.UNIT)
    stale_evals = 0
    step = 0

    while step < config.max_steps:
        if len(order) < config.batch_size:
            refill = list(range(len(train_ids)))
            order_rng.shuffle(refill)
            order.extend(refill)
        batch_idx = [order.pop(0) for _ in range(min(config.batch_size, len(order)))]
        batch_ids = [train_ids[i] for i in batch_idx]
        batch_labels = [train_labels[i] for i in batch_idx]

        optimizer.zero_grad(set_to_none=True)
        loss = model.loss(batch_ids, batch_labels)
        if not torch.isfinite(loss):
            raise NonFiniteLoss(
                f"step {step}: loss {float(loss.detach())} (task {config.task.value})"
            )
        loss.backward()
        optimizer.step()
        step += 1
        loss_curve.append((step, float(loss.detach())))

        if step % config.eval_every == 0 or step == config.max_steps:
            metric, _ = _validation_metric(model, valid_ids, valid_labels)
            improved = (
                best_metric is None
                or (higher_better and metric > best_metric)
                or (not higher_better and metric < best_metric)
            )
            if improved:
                best_metric = metric
                best_state = copy.deepcopy(model.state_dict())
                best_step = step
                stale_evals = 0
            else:
                stale_evals += 1
                if stale_evals >= config.patience:
                    break

    if best_state is not None:
        model.load_state_dict(best_state)
    if model.clip_counter.clipped:
        logger.warning(
            "%d of %d quantity targets fell outside the exponent bins and were clipped",
            model.clip_counter.clipped,
            model.clip_counter.total,
        )
    metric_name = "accuracy" if higher_better else "lmae"
    checkpoint = Checkpoint(
        config=config,
        vocab=vocab,
        arrays={k: v.detach().cpu().numpy().copy() for k, v in model.state_dict().items()},
        step=best_step,
        metrics={metric_name: float(best_metric if best_metric is not None else math.nan)},
    )
    return TrainResult(
        checkpoint=checkpoint,
        model=model,
        loss_curve=loss_curve,
        best_metric=float(best_metric if best_metric is not None else math.nan),
        steps_run=step,
    )


def _load_encoder_weights(model: TaskModel, warm: Checkpoint) -> None:
    own = model.state_dict()
    for name, arr in warm.arrays.items():
        if not name.startswith("encoder."):
            continue
        if name not in own or tuple(own[name].shape) != arr.shape:
            raise VersionMismatch(f"warm-start shape conflict on {name}")
        own[name] = torch.from_numpy(arr.copy())
    model.load_state_dict(own)


# --- checkpoint container ----------------------------------------------------


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> None:
    arrays = []
    payload = bytearray()
    for name, arr in ckpt.arrays.items():
        arr = np.ascontiguousarray(arr)
        little = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        raw = little.tobytes()
        arrays.append(
            {
                "name": name,
                "dtype": little.dtype.str,
                "shape": list(arr.shape),
                "offset": len(payload),
                "nbytes": len(raw),
            }
        )
        payload.extend(raw)
    header = json.dumps(
        {
            "format_version": CHECKPOINT_VERSION,
            "config": ckpt.config.to_dict(),
            "vocab": list(ckpt.vocab.tokens),
            "step": ckpt.step,
            "metrics": ckpt.metrics,
            "arrays": arrays,
        },
        sort_keys=True,
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        fh.write(payload)


def load_checkpoint(path: str | Path) -> Checkpoint:
    blob = Path(path).read_bytes()
    if len(blob) < 16 or blob[:4] != CHECKPOINT_MAGIC:
        raise VersionMismatch(f"{path}: not a checkpoint file")
    (version,) = struct.unpack("<I", blob[4:8])
    if version != CHECKPOINT_VERSION:
        raise VersionMismatch(f"{path}: format version {version}, expected {CHECKPOINT_VERSION}")
    (header_len,) = struct.unpack("<Q", blob[8:16])
    header_end = 16 + header_len
    if header_end > len(blob):
        raise VersionMismatch(f"{path}: truncated header")
    header = json.loads(blob[16:header_end].decode("utf-8"))
    config = TrainConfig.from_dict(header["config"])
    vocab = Vocabulary(header["vocab"])
    arrays: dict[str, np.ndarray] = {}
    for entry in header["arrays"]:
        start = header_end + entry["offset"]
        end = start + entry["nbytes"]
        if end > len(blob):
            raise VersionMismatch(f"{path}: truncated array {entry['name']}")
        arr = np.frombuffer(blob[start:end], dtype=np.dtype(entry["dtype"]))
        arrays[entry["name"]] = arr.reshape(entry["shape"]).copy()
    return Checkpoint(
        config=config,
        vocab=vocab,
        arrays=arrays,
        step=header["step"],
        metrics=header["metrics"],
    )


def model_from_checkpoint(ckpt: Checkpoint) -> TaskModel:
    model = TaskModel(ckpt.config, ckpt.vocab)
    state = model.state_dict()
    if set(state) != set(ckpt.arrays):
        raise VersionMismatch("checkpoint parameter names do not match the config")
    for name, arr in ckpt.arrays.items():
        if tuple(state[name].shape) != tuple(arr.shape):
            raise VersionMismatch(
                f"shape conflict on {name}: checkpoint {arr.shape} vs model {tuple(state[name].shape)}"
            )
    model.load_state_dict(ckpt.state_dict())
    model.eval()
    return model


def write_loss_curve(path: str | Path, curve: list[tuple[int, float]]) -> None:
    """Two-column text stream: step and loss."""
    with open(path, "w", encoding="utf-8") as fh:
        for step, loss in curve:
            fh.write(f"{step} {loss:.8g}\n")
