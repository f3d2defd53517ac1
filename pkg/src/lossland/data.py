"""Deterministic synthetic classification datasets and batching.

Generators are pure functions of their parameters and a named RNG stream, so
datasets are bit-identical across reruns. Jitter augmentation is the tabular
analog of input-space augmentation: additive Gaussian noise on a batch copy,
never on the underlying dataset.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .core import RngStream


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray  # (n, d) float64
    labels: np.ndarray  # (n,) int64 in [0, n_classes)
    n_classes: int
    split: str = "train"

    def __post_init__(self):
        if self.inputs.ndim != 2 or self.inputs.shape[0] == 0:
            raise ValueError(f"inputs must be a nonempty (n, d) matrix, got shape {self.inputs.shape}")
        if self.labels.shape != (self.inputs.shape[0],):
            raise ValueError("labels must align with input rows")
        if self.labels.min() < 0 or self.labels.max() >= self.n_classes:
            raise ValueError(f"labels must lie in [0, {self.n_classes})")
        self.inputs.setflags(write=False)
        self.labels.setflags(write=False)

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    def as_batch(self) -> "Batch":
        return Batch(inputs=self.inputs, labels=self.labels, indices=np.arange(self.n))


@dataclass(frozen=True)
class Batch:
    inputs: np.ndarray
    labels: np.ndarray
    indices: np.ndarray

    def __len__(self) -> int:
        return self.labels.shape[0]


def _simplex_means(k: int, d: int, separation: float) -> np.ndarray:
    """k unit-norm vertices of a centered regular simplex, scaled and embedded in d dims."""
    centered = np.eye(k) - 1.0 / k
    # Orthonormal coordinates of the (k-1)-dimensional simplex hull.
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    rank = min(k - 1, d)
    coords = centered @ vt[:rank].T
    if k > 1:
        coords /= np.linalg.norm(coords[0])
    means = np.zeros((k, d))
    means[:, :rank] = coords
    return separation * means


def make_gaussians(n: int, k: int, d: int, separation: float, stream: RngStream,
                   split: str = "train") -> Dataset:
    """k unit-variance Gaussian blobs centered on a scaled simplex."""
    if n <= 0 or k <= 0 or d <= 0:
        raise ValueError("n, k, d must be positive")
    means = _simplex_means(k, d, separation)
    labels = np.arange(n, dtype=np.int64) % k
    noise = stream.gaussian_array(n * d).reshape(n, d)
    inputs = means[labels] + noise
    return Dataset(inputs=inputs, labels=labels, n_classes=k, split=split)


def make_spirals(n: int, turns: float, noise: float, stream: RngStream,
                 split: str = "train") -> Dataset:
    """Two interleaved planar spirals, labels by arm; radius grows with angle."""
    if n <= 0:
        raise ValueError("n must be positive")
    labels = np.arange(n, dtype=np.int64) % 2
    r = stream.uniform_array(n)
    angle = 2.0 * np.pi * turns * r + np.pi * labels
    radius = 0.2 + 0.8 * r
    pts = np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=1)
    if noise > 0:
        pts = pts + noise * stream.gaussian_array(2 * n).reshape(n, 2)
    return Dataset(inputs=pts, labels=labels, n_classes=2, split=split)


def augment_jitter(batch: Batch, sigma: float, stream: RngStream) -> Batch:
    """Additive N(0, sigma) input noise on a fresh copy; labels untouched."""
    if sigma < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    if sigma == 0:
        return batch
    noise = stream.gaussian_array(batch.inputs.size, 0.0, sigma).reshape(batch.inputs.shape)
    return Batch(inputs=batch.inputs + noise, labels=batch.labels, indices=batch.indices)


def batches(data: Dataset, batch_size: int, shuffle_stream: RngStream) -> list[Batch]:
    """Deterministically shuffled epoch partition; the final partial batch is kept."""
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    order = shuffle_stream.permutation(data.n)
    out = []
    for start in range(0, data.n, batch_size):
        idx = order[start : start + batch_size]
        out.append(Batch(inputs=data.inputs[idx], labels=data.labels[idx], indices=idx))
    return out


class CsvFormatError(ValueError):
    """A CSV row failed to parse; carries the 1-based line number."""

    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


def load_csv(path: str, split: str = "train") -> Dataset:
    """Load a dataset from CSV: header row, a 'label' column, numeric features."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(1, "empty file") from None
        if "label" not in header:
            raise CsvFormatError(1, "missing required column 'label'")
        label_col = header.index("label")
        feature_cols = [i for i in range(len(header)) if i != label_col]
        rows, labels = [], []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise CsvFormatError(line_no, f"expected {len(header)} fields, got {len(row)}")
            try:
                labels.append(int(row[label_col]))
                rows.append([float(row[i]) for i in feature_cols])
            except ValueError as exc:
                raise CsvFormatError(line_no, str(exc)) from None
    if not rows:
        raise CsvFormatError(2, "no data rows")
    labels_arr = np.asarray(labels, dtype=np.int64)
    if labels_arr.min() < 0:
        raise CsvFormatError(2, "labels must be nonnegative integers")
    return Dataset(
        inputs=np.asarray(rows, dtype=np.float64),
        labels=labels_arr,
        n_classes=int(labels_arr.max()) + 1,
        split=split,
    )
