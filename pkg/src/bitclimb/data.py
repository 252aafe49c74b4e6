"""Dataset acquisition and preparation.

Two-spirals ships as a deterministic generator (the classic CMU
construction); CSV ingestion covers the real-world benchmarks. Inputs
are affinely normalized onto [-1, 1] per column and targets onto
[0, 1], with coefficients fitted on the training split only.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np


@dataclass
class Dataset:
    inputs: np.ndarray  # (samples, n_inputs)
    targets: np.ndarray  # (samples, n_outputs)
    kind: str = "regression"  # "regression" | "classification"
    input_names: list = field(default_factory=list)
    target_names: list = field(default_factory=list)
    n_classes: int = 0

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.float64)
        if self.targets.ndim == 1:
            self.targets = self.targets[:, None]

    @property
    def n_samples(self) -> int:
        return self.inputs.shape[0]


@dataclass
class NormalizationParams:
    """Per-column affine maps: normalized = scale * raw + offset."""

    input_scale: np.ndarray
    input_offset: np.ndarray
    target_scale: np.ndarray
    target_offset: np.ndarray

    def apply(self, dataset: Dataset) -> Dataset:
        return Dataset(
            dataset.inputs * self.input_scale + self.input_offset,
            dataset.targets * self.target_scale + self.target_offset,
            dataset.kind, dataset.input_names, dataset.target_names,
            dataset.n_classes,
        )

    def invert_targets(self, targets: np.ndarray) -> np.ndarray:
        return (targets - self.target_offset) / self.target_scale


def _fit_affine(columns: np.ndarray, lo: float, hi: float):
    """Column-wise affine onto [lo, hi]; degenerate columns map to 0."""
    cmin = columns.min(axis=0)
    cmax = columns.max(axis=0)
    span = cmax - cmin
    degenerate = span == 0
    if degenerate.any():
        warnings.warn(f"{int(degenerate.sum())} constant column(s) mapped to 0")
    safe = np.where(degenerate, 1.0, span)
    scale = np.where(degenerate, 0.0, (hi - lo) / safe)
    offset = np.where(degenerate, 0.0, lo - cmin * (hi - lo) / safe)
    return scale, offset


def fit_normalization(train: Dataset) -> NormalizationParams:
    in_scale, in_off = _fit_affine(train.inputs, -1.0, 1.0)
    t_scale, t_off = _fit_affine(train.targets, 0.0, 1.0)
    return NormalizationParams(in_scale, in_off, t_scale, t_off)


def two_spirals() -> tuple[Dataset, Dataset]:
    """The classic two-spirals construction; returns (training, test).

    97 points per spiral per set (the original distribution advertises
    193 per set; the standard generator formula yields 194 and this
    module keeps it). The test set is the same construction rotated by
    half the angular step. Both sets come back normalized with
    coefficients fitted on the training set.
    """

    def build(angle_offset: float) -> Dataset:
        pts, labels = [], []
        for i in range(97):
            r = 6.5 * (104 - i) / 104
            a = i * math.pi / 16.0 + angle_offset
            x, y = r * math.sin(a), r * math.cos(a)
            pts.append((x, y))
            labels.append(1.0)
            pts.append((-x, -y))
            labels.append(0.0)
        return Dataset(np.array(pts), np.array(labels),
                       kind="classification", input_names=["x", "y"],
                       target_names=["spiral"], n_classes=2)

    train = build(0.0)
    test = build(math.pi / 32.0)
    params = fit_normalization(train)
    return params.apply(train), params.apply(test)


def load_csv(path, schema: dict) -> Dataset:
    """Load a comma-separated, headered, UTF-8 file.

    ``schema`` maps every column name to a role: "num" (numeric input),
    "nom" (nominal input, expanded into one ±1 column per level),
    "target" (numeric target), or "class" (classification target,
    expanded into unary 0/1 columns).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    missing = set(header) - set(schema)
    if missing:
        raise ValueError(f"{path}: no role for column(s) {sorted(missing)}")
    unknown = set(schema) - set(header)
    if unknown:
        raise ValueError(f"{path}: schema names absent column(s) {sorted(unknown)}")
    roles = [schema[name] for name in header]
    for name, role in zip(header, roles):
        if role not in ("num", "nom", "target", "class"):
            raise ValueError(f"{path}: unknown role {role!r} for column {name!r}")

    n_cols = len(header)
    for r, row in enumerate(rows, start=2):
        if len(row) != n_cols:
            raise ValueError(f"{path}:{r}: expected {n_cols} fields, got {len(row)}")
        for name, value in zip(header, row):
            if value.strip() == "":
                raise ValueError(f"{path}:{r}: missing value in column {name!r}")

    def numeric(col, name):
        out = np.empty(len(rows))
        for r, row in enumerate(rows):
            try:
                out[r] = float(row[col])
            except ValueError:
                raise ValueError(
                    f"{path}:{r + 2}: non-numeric value {row[col]!r} "
                    f"in column {name!r}"
                ) from None
        return out

    input_cols, input_names = [], []
    target_cols, target_names = [], []
    kind = "regression"
    n_classes = 0
    for col, (name, role) in enumerate(zip(header, roles)):
        if role == "num":
            input_cols.append(numeric(col, name))
            input_names.append(name)
        elif role == "nom":
            levels = sorted({row[col] for row in rows})
            for level in levels:
                vec = np.array([1.0 if row[col] == level else -1.0 for row in rows])
                input_cols.append(vec)
                input_names.append(f"{name}={level}")
        elif role == "target":
            target_cols.append(numeric(col, name))
            target_names.append(name)
        else:  # class
            kind = "classification"
            levels = sorted({row[col] for row in rows})
            n_classes = len(levels)
            for level in levels:
                vec = np.array([1.0 if row[col] == level else 0.0 for row in rows])
                target_cols.append(vec)
                target_names.append(f"{name}={level}")
    if not target_cols:
        raise ValueError(f"{path}: schema assigns no target column")
    if not input_cols:
        raise ValueError(f"{path}: schema assigns no input column")
    return Dataset(np.column_stack(input_cols), np.column_stack(target_cols),
                   kind, input_names, target_names, n_classes)


def normalize_split(dataset: Dataset, train_fraction: float = 0.70,
                    rng: np.random.Generator | None = None):
    """Seeded shuffle, split, fit normalization on train, apply to both.

    Returns (train, validation, NormalizationParams).
    """
    if dataset.n_samples == 0:
        raise ValueError("dataset is empty")
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    rng = rng if rng is not None else np.random.default_rng(0)
    order = rng.permutation(dataset.n_samples)
    n_train = int(dataset.n_samples * train_fraction)
    tr, va = order[:n_train], order[n_train:]

    def subset(idx):
        return Dataset(dataset.inputs[idx], dataset.targets[idx], dataset.kind,
                       dataset.input_names, dataset.target_names, dataset.n_classes)

    train = subset(tr)
    params = fit_normalization(train)
    return params.apply(train), params.apply(subset(va)), params
