"""Loss functions and total-objective assembly."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CE_CLAMP = 1e-12


@dataclass(frozen=True)
class LossSpec:
    kind: str = "rmse"  # "rmse" | "ce"
    reg_coeff: float = 0.0

    def __post_init__(self):
        if self.kind not in ("rmse", "ce"):
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.reg_coeff < 0:
            raise ValueError("reg_coeff must be >= 0")


def rmse(predictions, targets) -> float:
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch {p.shape} vs {t.shape}")
    if p.size == 0:
        raise ValueError("empty prediction set")
    return float(np.sqrt(np.mean((p - t) ** 2)))


def cross_entropy(predictions, targets) -> float:
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch {p.shape} vs {t.shape}")
    if p.size == 0:
        raise ValueError("empty prediction set")
    p = np.clip(p, CE_CLAMP, 1.0 - CE_CLAMP)
    return float(np.mean(-(t * np.log(p) + (1.0 - t) * np.log(1.0 - p))))


def sample_contributions(predictions, targets, kind: str) -> np.ndarray:
    """Per-sample summed loss contribution (rows of a samples x outputs pair).

    The aggregate of these is what the incremental evaluator maintains:
    sum of squared errors for "rmse", summed clamped CE terms for "ce".
    """
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if kind == "rmse":
        return np.sum((p - t) ** 2, axis=-1)
    p = np.clip(p, CE_CLAMP, 1.0 - CE_CLAMP)
    return np.sum(-(t * np.log(p) + (1.0 - t) * np.log(1.0 - p)), axis=-1)


def loss_from_aggregate(agg: float, n_samples: int, n_outputs: int, kind: str) -> float:
    if kind == "rmse":
        return float(np.sqrt(max(agg, 0.0) / (n_samples * n_outputs)))
    return float(agg / (n_samples * n_outputs))


def regularization(genome, reg_coeff: float) -> float:
    """Penalty: reg_coeff times the mean squared normalized weight."""
    if reg_coeff == 0.0:
        return 0.0
    w = genome.values / genome.format.w_max
    return float(reg_coeff * np.mean(w * w))


def total_loss(base_loss: float, genome, spec: LossSpec) -> float:
    return base_loss + regularization(genome, spec.reg_coeff)


def classification_accuracy(predictions, targets) -> float:
    """Argmax accuracy; single-output binary tasks threshold at 0.5."""
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.ndim == 1:
        p, t = p[:, None], t[:, None]
    if p.shape[1] == 1:
        return float(np.mean((p[:, 0] >= 0.5) == (t[:, 0] >= 0.5)))
    return float(np.mean(np.argmax(p, axis=1) == np.argmax(t, axis=1)))
