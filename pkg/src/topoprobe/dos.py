"""Density-of-states predictor for the gauge-theory channel.

The training set induces an empirical conditional distribution eps(beta, E)
of energies per label; averaging the labels at fixed energy gives a
predictor beta_av(E) that regresses beta from the energy alone.  This model
reproduces what the neural network learns on the same data and serves as its
reference in the detector comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .data import SPIN, LabeledDataset
from .igt import igt_energies
from .lattice import SpinConfig, build_geometry


@dataclass(frozen=True)
class DensityOfStates:
    """Empirical eps(beta, E): rows are labels, columns energy levels."""

    beta_grid: np.ndarray
    energy_axis: np.ndarray
    eps: np.ndarray
    counts: np.ndarray


@dataclass(frozen=True)
class DosModel:
    """beta_av(E) lookup with clamped linear interpolation off-table."""

    energy_axis: np.ndarray
    beta_av: np.ndarray
    counts: np.ndarray
    n: int


class DosPrediction(NamedTuple):
    beta_pred: float
    fallback: bool


def dataset_energies(dataset: LabeledDataset) -> np.ndarray:
    if dataset.kind != SPIN or dataset.basis != "z":
        raise ValueError("the energy model needs z-basis spin datasets")
    geometry = build_geometry(dataset.n)
    return igt_energies(geometry, dataset.values)


def dos_build(dataset: LabeledDataset) -> DensityOfStates:
    """Tabulate eps(beta, E) = count(beta, E) / count(beta) from a dataset."""
    if len(dataset) == 0:
        raise ValueError("cannot build a density of states from an empty dataset")
    energies = dataset_energies(dataset)
    beta_grid, beta_idx = np.unique(dataset.labels, return_inverse=True)
    energy_axis, energy_idx = np.unique(energies, return_inverse=True)
    counts = np.zeros((beta_grid.size, energy_axis.size), dtype=np.int64)
    np.add.at(counts, (beta_idx, energy_idx), 1)
    eps = counts / counts.sum(axis=1, keepdims=True)
    return DensityOfStates(beta_grid, energy_axis, eps, counts)


def dos_model(dos: DensityOfStates, n: int) -> DosModel:
    """Average label per energy level (the induced predictor)."""
    energy_counts = dos.counts.sum(axis=0)
    beta_av = (dos.beta_grid[:, None] * dos.counts).sum(axis=0) / energy_counts
    return DosModel(dos.energy_axis, beta_av, energy_counts, n)


def dos_fit(dataset: LabeledDataset) -> DosModel:
    return dos_model(dos_build(dataset), dataset.n)


def dos_predict_energies(model: DosModel, energies) -> tuple[np.ndarray, np.ndarray]:
    """Batch prediction from energies; the mask marks fallback rows (energies
    unseen in training, filled by clamped interpolation on beta_av)."""
    energies = np.atleast_1d(np.asarray(energies, dtype=np.float64))
    preds = np.interp(energies, model.energy_axis, model.beta_av)
    fallback = ~np.isin(energies, model.energy_axis)
    return preds, fallback


def dos_predict(model: DosModel, config: SpinConfig) -> DosPrediction:
    """Predict beta for one configuration from its energy alone."""
    geometry = build_geometry(model.n)
    energy = igt_energies(geometry, config.values[None, :])[0]
    preds, fallback = dos_predict_energies(model, [energy])
    return DosPrediction(float(preds[0]), bool(fallback[0]))


class DosPredictor:
    """Adapter giving DosModel the common predict-a-dataset surface."""

    def __init__(self, model: DosModel):
        self.model = model

    def predict_dataset(self, dataset: LabeledDataset) -> np.ndarray:
        energies = dataset_energies(dataset)
        preds, _ = dos_predict_energies(self.model, energies)
        return preds


def save_dos_model(model: DosModel, path):
    lines = ["energy,beta_av,count"]
    for e, b, c in zip(model.energy_axis, model.beta_av, model.counts):
        lines.append(f"{int(e)},{b!r},{int(c)}")
    lines.append("")
    Path(path).write_text("\n".join(lines))


def load_dos_model(path, n: int) -> DosModel:
    rows = Path(path).read_text().strip().splitlines()
    if rows[0] != "energy,beta_av,count":
        raise ValueError(f"{path} is not a density-of-states model file")
    energies, betas, counts = [], [], []
    for row in rows[1:]:
        e, b, c = row.split(",")
        energies.append(int(e))
        betas.append(float(b))
        counts.append(int(c))
    return DosModel(
        np.asarray(energies, dtype=np.int64),
        np.asarray(betas, dtype=np.float64),
        np.asarray(counts, dtype=np.int64),
        n,
    )
