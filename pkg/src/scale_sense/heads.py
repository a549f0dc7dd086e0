"""Prediction heads: type/unit classifiers, the discrete-exponent quantity
regressor, and the two regression baselines used for comparison.

The quantity regressor factors y = m * 10^e: a categorical distribution over
integer exponents e plus a per-exponent mantissa estimate m in [0.1, 1.0]
(sigmoid output rescaled by Scale(x) = 0.9x + 0.1). Training maximizes the
likelihood of the true exponent bin and a truncated-Gaussian mantissa;
inference takes the most probable bin and its mantissa.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .encoder import ShapeError

MANTISSA_SIGMA = 0.05  # fixed truncated-Gaussian spread
DEFAULT_KAPPA = 10.0  # mantissa residual penalty in the likelihood
_C_FLOOR = 1e-9  # keeps the |ln(1/y)| factor positive at y = 1

REGRESSOR_VARIANTS = ("dexp", "loglp", "l1")


def argmax_lowest(values) -> int:
    """Argmax with ties resolved to the lowest index."""
    arr = np.asarray(
        values.detach().cpu().numpy() if isinstance(values, torch.Tensor) else values
    )
    return int(arr.argmax())


class LinearHead(nn.Module):
    """Single linear layer scoring each class from the context vector."""

    def __init__(self, dim: int, classes: int):
        super().__init__()
        self.linear = nn.Linear(dim, classes)

    @property
    def classes(self) -> int:
        return self.linear.out_features

    def forward(self, h: torch.Tensor) -> torch.Tensor:
        if h.shape[-1] != self.linear.in_features:
            raise ShapeError(
                f"context dim {h.shape[-1]} != head dim {self.linear.in_features}"
            )
        return self.linear(h)


def classify(head: LinearHead, h: torch.Tensor) -> torch.Tensor:
    return head(h)


@dataclass(frozen=True)
class ExponentBins:
    """Consecutive integer exponents e_min .. e_min + count - 1.

    The defaults (-1..5) cover quantities from 0.01 up to 100,000 in base
    units, with the mantissa convention m in [0.1, 1): e is the unique
    integer with y / 10^e in [0.1, 1).
    """

    e_min: int = -1
    count: int = 7

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be >= 1")

    @property
    def e_max(self) -> int:
        return self.e_min + self.count - 1

    def exponent_of_index(self, index: int) -> int:
        return self.e_min + index

    @property
    def min_value(self) -> float:
        return 0.1 * 10.0 ** self.e_min

    @property
    def max_value(self) -> float:
        return 1.0 * 10.0 ** self.e_max


class OutOfRange(ValueError):
    """Target exponent falls outside the configured bins."""


def exponent_bin_of(
    y: float, bins: ExponentBins = ExponentBins(), *, clip: bool = False
) -> tuple[int, float]:
    """Decompose y > 0 into (bin index, mantissa) with mantissa in [0.1, 1).

    Exact powers of 10 land at mantissa 0.1 of the next bin. With clip=True an
    out-of-range exponent clamps to the nearest bin (mantissa clamped too)
    instead of raising; callers count clips via ClipCounter.
    """
    if y <= 0:
        raise ValueError(f"y must be positive: {y}")
    e = math.floor(math.log10(y)) + 1
    m = y / 10.0**e
    # guard floating point at decade boundaries
    while m >= 1.0:
        e += 1
        m = y / 10.0**e
    while m < 0.1:
        e -= 1
        m = y / 10.0**e
    if not bins.e_min <= e <= bins.e_max:
        if not clip:
            raise OutOfRange(f"exponent {e} of y={y} outside bins [{bins.e_min}, {bins.e_max}]")
        e = min(max(e, bins.e_min), bins.e_max)
        m = min(max(y / 10.0**e, 0.1), 1.0)
    return e - bins.e_min, m


@dataclass
class ClipCounter:
    clipped: int = 0
    total: int = 0


def exponent_targets(
    ys,
    bins: ExponentBins,
    counter: ClipCounter | None = None,
    *,
    clip: bool = False,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Batch decomposition used when preparing training targets.

    Raises OutOfRange unless clip=True, in which case strays clamp to the
    nearest bin and the counter records how often that happened.
    """
    indices, mantissas = [], []
    for y in ys:
        try:
            idx, m = exponent_bin_of(float(y), bins)
        except OutOfRange:
            if not clip:
                raise
            idx, m = exponent_bin_of(float(y), bins, clip=True)
            if counter is not None:
                counter.clipped += 1
        if counter is not None:
            counter.total += 1
        indices.append(idx)
        mantissas.append(m)
    return (
        torch.tensor(indices, dtype=torch.long),
        torch.tensor(mantissas, dtype=torch.float64),
    )


def scale_mantissa(x: torch.Tensor) -> torch.Tensor:
    """Affine map of a sigmoid output into the mantissa range [0.1, 1.0]."""
    return x * 0.9 + 0.1


@dataclass
class DexpOutput:
    logits: torch.Tensor  # (B, count) exponent-bin scores
    mantissas: torch.Tensor  # (B, count) per-bin mantissa estimates

    @property
    def probabilities(self) -> torch.Tensor:
        return torch.softmax(self.logits, dim=-1)

    @property
    def log_probabilities(self) -> torch.Tensor:
        return torch.log_softmax(self.logits, dim=-1)


class DiscreteExponentHead(nn.Module):
    """Exponent-distribution layer plus 3-layer mantissa network."""

    def __init__(self, dim: int, bins: ExponentBins = ExponentBins()):
        super().__init__()
        self.bins = bins
        self.pi = nn.Linear(dim, bins.count)
        self.mu = nn.Sequential(
            nn.Linear(dim, dim),
            nn.Sigmoid(),
            nn.Linear(dim, dim),
            nn.Sigmoid(),
            nn.Linear(dim, bins.count),
            nn.Sigmoid(),
        )

    def forward(self, h: torch.Tensor) -> DexpOutput:
        if h.shape[-1] != self.pi.in_features:
            raise ShapeError(f"context dim {h.shape[-1]} != head dim {self.pi.in_features}")
        return DexpOutput(logits=self.pi(h), mantissas=scale_mantissa(self.mu(h)))


def dexp_forward(head: DiscreteExponentHead, h: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    out = head(h)
    return out.probabilities, out.mantissas


def dexp_nll(
    output: DexpOutput,
    y: torch.Tensor,
    bins: ExponentBins = ExponentBins(),
    kappa: float = DEFAULT_KAPPA,
    counter: ClipCounter | None = None,
    *,
    clip: bool = False,
) -> torch.Tensor:
    """Mean negative log likelihood of targets y under the head output.

    Per example: -[log p(e*) + log(1/C) - kappa * (m* - mu_{e*})^2] with
    (e*, m*) the exponent/mantissa decomposition of y and C = |ln(1/y)|
    (clamped away from zero, constant w.r.t. parameters).
    """
    y = torch.as_tensor(y, dtype=output.mantissas.dtype)
    if y.dim() == 0:
        y = y[None]
    idx, m_true = exponent_targets(y.tolist(), bins, counter, clip=clip)
    m_true = m_true.to(output.mantissas.dtype)
    log_p = output.log_probabilities.gather(1, idx[:, None]).squeeze(1)
    mu_sel = output.mantissas.gather(1, idx[:, None]).squeeze(1)
    c = torch.clamp(torch.abs(torch.log(1.0 / y)), min=_C_FLOOR)
    log_lik = log_p - torch.log(c) - kappa * (m_true - mu_sel) ** 2
    return -log_lik.mean()


def dexp_decode(output: DexpOutput, bins: ExponentBins, row: int = 0) -> float:
    """Most probable exponent bin, its mantissa, reassembled as m * 10^e."""
    probs = output.probabilities[row]
    best = argmax_lowest(probs)
    mantissa = float(output.mantissas[row, best].detach())
    return mantissa * 10.0 ** bins.exponent_of_index(best)


def dexp_predict(head: DiscreteExponentHead, h: torch.Tensor) -> float:
    out = head(h if h.dim() == 2 else h[None, :])
    return dexp_decode(out, head.bins)


def dexp_sample(
    head: DiscreteExponentHead,
    h: torch.Tensor,
    rng: np.random.Generator,
    max_rejects: int = 1000,
) -> float:
    """Ancestral sample: bin from the categorical, mantissa from the
    truncated Gaussian (rejection with clamp fallback)."""
    out = head(h if h.dim() == 2 else h[None, :])
    probs = out.probabilities[0].detach().cpu().numpy().astype(np.float64)
    probs = probs / probs.sum()
    index = int(rng.choice(len(probs), p=probs))
    mu = float(out.mantissas[0, index].detach())
    m = None
    for _ in range(max_rejects):
        draw = rng.normal(mu, MANTISSA_SIGMA)
        if 0.1 <= draw <= 1.0:
            m = draw
            break
    if m is None:
        m = min(max(rng.normal(mu, MANTISSA_SIGMA), 0.1), 1.0)
    return m * 10.0 ** head.bins.exponent_of_index(index)


class RegressionBaseline(nn.Module):
    """Point (L1) or log-Laplace likelihood regressor over the context vector."""

    def __init__(self, dim: int, variant: str):
        super().__init__()
        if variant not in ("l1", "loglp"):
            raise ValueError(f"variant must be 'l1' or 'loglp', got {variant!r}")
        self.variant = variant
        self.net = nn.Sequential(nn.Linear(dim, dim), nn.Sigmoid(), nn.Linear(dim, 1))

    def forward(self, h: torch.Tensor) -> torch.Tensor:
        if h.shape[-1] != self.net[0].in_features:
            raise ShapeError(f"context dim {h.shape[-1]} != head dim {self.net[0].in_features}")
        return self.net(h).squeeze(-1)


def baseline_loss_and_predict(
    baseline: RegressionBaseline, h: torch.Tensor, y: torch.Tensor
) -> tuple[torch.Tensor, torch.Tensor]:
    """Mean loss plus per-example predictions.

    l1: loss |yhat - y| on the raw network output. loglp: the output is the
    location of a unit-scale Laplace over ln y; loss is its NLL and the
    prediction is exp(location), the distribution median.
    """
    y = torch.as_tensor(y, dtype=h.dtype)
    out = baseline(h)
    if baseline.variant == "l1":
        return torch.abs(out - y).mean(), out
    nll = math.log(2.0) + torch.abs(torch.log(y) - out)
    return nll.mean(), torch.exp(out)
