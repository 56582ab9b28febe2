"""Labeled sample containers shared by the samplers and the predictors."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterator

import numpy as np

from .lattice import SpinConfig

SPIN = "spin"
FEATURES = "features"


@dataclass
class LabeledDataset:
    """Rows of (beta label, input vector) plus provenance metadata.

    ``kind`` is ``"spin"`` for +-1 bond configurations (``basis`` set) or
    ``"features"`` for real-valued input vectors such as stabilizer
    expectation values.  Storage is columnar; ``record(i)`` materialises the
    i-th (label, config) pair.
    """

    labels: np.ndarray
    values: np.ndarray
    kind: str
    n: int
    basis: str | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.float64)
        if self.kind == SPIN:
            self.values = np.asarray(self.values, dtype=np.int8)
            if not np.all(np.abs(self.values) == 1):
                raise ValueError("spin dataset values must be +1 or -1")
            if self.basis not in ("z", "x"):
                raise ValueError("spin dataset needs basis 'z' or 'x'")
            if self.values.shape[1] != 2 * self.n * self.n:
                raise ValueError("spin rows must have width 2*n^2")
        elif self.kind == FEATURES:
            self.values = np.asarray(self.values, dtype=np.float64)
        else:
            raise ValueError(f"unknown dataset kind {self.kind!r}")
        if self.labels.shape[0] != self.values.shape[0]:
            raise ValueError("labels and values disagree on record count")
        grid = self.meta.get("beta_grid")
        if grid is not None and len(self.labels):
            if not np.isin(self.labels, np.asarray(grid, dtype=np.float64)).all():
                raise ValueError("labels must come from the declared beta grid")

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def width(self) -> int:
        return int(self.values.shape[1])

    def record(self, i: int):
        if self.kind == SPIN:
            return float(self.labels[i]), SpinConfig(self.values[i], self.basis)
        return float(self.labels[i]), self.values[i]

    @property
    def records(self) -> Iterator[tuple]:
        return (self.record(i) for i in range(len(self)))

    def unique_labels(self) -> np.ndarray:
        return np.unique(self.labels)

    def subset_by_label(self, beta: float) -> "LabeledDataset":
        sel = self.labels == beta
        return LabeledDataset(
            self.labels[sel], self.values[sel], self.kind, self.n, self.basis, dict(self.meta)
        )

    def take(self, indices) -> "LabeledDataset":
        return LabeledDataset(
            self.labels[indices], self.values[indices], self.kind, self.n,
            self.basis, dict(self.meta),
        )

    def as_images(self) -> np.ndarray:
        """Spin rows as (B, 2, n, n) float arrays: channel 0 horizontal bonds,
        channel 1 vertical bonds, both row-major (the package bond order)."""
        if self.kind != SPIN:
            raise ValueError("only spin datasets have an image layout")
        b = len(self)
        return self.values.astype(np.float64).reshape(b, 2, self.n, self.n)


def concat_datasets(parts: list[LabeledDataset]) -> LabeledDataset:
    first = parts[0]
    for p in parts[1:]:
        if (p.kind, p.n, p.basis) != (first.kind, first.n, first.basis):
            raise ValueError("cannot concatenate datasets of different shapes")
    meta = dict(first.meta)
    grids = [tuple(p.meta.get("beta_grid", ())) for p in parts]
    if any(g != grids[0] for g in grids):
        meta["beta_grid"] = sorted({b for g in grids for b in g})
    return LabeledDataset(
        np.concatenate([p.labels for p in parts]),
        np.concatenate([p.values for p in parts]),
        first.kind, first.n, first.basis, meta,
    )
