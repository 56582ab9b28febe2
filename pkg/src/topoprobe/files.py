"""On-disk formats: datasets (CSV + JSON sidecar), curves, reports.

Dataset rows are ``beta,value,value,...`` with spins serialised as +1/-1
integers and feature vectors as shortest round-trip decimal floats; the
sidecar JSON carries the provenance metadata needed to rebuild the in-memory
dataset exactly.  All writers are deterministic (sorted JSON keys, no
timestamps), so artifact files hash identically across reruns.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .data import FEATURES, SPIN, LabeledDataset
from .detector import (
    DerivativeCurve,
    PredictionCurve,
    ScalingFit,
    TransitionReport,
)
from .fidelity import ChiFCurve

DATASET_FORMAT = "topoprobe-dataset"
DATASET_VERSION = 1


def _sidecar_path(path: Path) -> Path:
    return path.with_suffix(".json")


def write_dataset(dataset: LabeledDataset, path) -> Path:
    """Write body CSV and sidecar JSON; returns the body path."""
    path = Path(path)
    lines = []
    if dataset.kind == SPIN:
        for i in range(len(dataset)):
            row = ",".join(str(int(v)) for v in dataset.values[i])
            lines.append(f"{dataset.labels[i]!r},{row}")
    else:
        for i in range(len(dataset)):
            row = ",".join(repr(float(v)) for v in dataset.values[i])
            lines.append(f"{dataset.labels[i]!r},{row}")
    lines.append("")
    path.write_text("\n".join(lines))

    sidecar = {
        "format": DATASET_FORMAT,
        "version": DATASET_VERSION,
        "kind": dataset.kind,
        "n": dataset.n,
        "basis": dataset.basis,
        "rows": len(dataset),
        "width": 1 + dataset.width,
        "meta": _jsonable(dataset.meta),
    }
    _sidecar_path(path).write_text(json.dumps(sidecar, sort_keys=True, indent=1) + "\n")
    return path


def read_dataset(path) -> LabeledDataset:
    path = Path(path)
    sidecar = json.loads(_sidecar_path(path).read_text())
    if sidecar.get("format") != DATASET_FORMAT:
        raise ValueError(f"{path} lacks a topoprobe dataset sidecar")
    kind = sidecar["kind"]
    rows = [line for line in path.read_text().splitlines() if line]
    labels = np.empty(len(rows))
    width = sidecar["width"] - 1
    dtype = np.int8 if kind == SPIN else np.float64
    values = np.empty((len(rows), width), dtype=dtype)
    for i, line in enumerate(rows):
        parts = line.split(",")
        labels[i] = float(parts[0])
        values[i] = [int(p) for p in parts[1:]] if kind == SPIN else [float(p) for p in parts[1:]]
    return LabeledDataset(
        labels, values, kind, sidecar["n"], sidecar["basis"], dict(sidecar["meta"])
    )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj]
    return obj


def _write_columns(path, header: list[str], columns: list[np.ndarray]):
    rows = [",".join(header)]
    for i in range(len(columns[0])):
        rows.append(",".join(repr(float(col[i])) for col in columns))
    rows.append("")
    Path(path).write_text("\n".join(rows))


def _read_columns(path, expected_header: list[str]) -> list[np.ndarray]:
    lines = Path(path).read_text().strip().splitlines()
    header = lines[0].split(",")
    if header != expected_header:
        raise ValueError(f"{path}: expected columns {expected_header}, found {header}")
    data = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    return [data[:, j] for j in range(data.shape[1])]


def write_prediction_curve(curve: PredictionCurve, path):
    _write_columns(
        path,
        ["beta", "mean_pred", "count", "spread"],
        [curve.beta_labels, curve.mean_pred, curve.counts, curve.spread],
    )


def read_prediction_curve(path) -> PredictionCurve:
    beta, mean_pred, counts, spread = _read_columns(
        path, ["beta", "mean_pred", "count", "spread"]
    )
    return PredictionCurve(beta, mean_pred, counts.astype(np.int64), spread)


def write_derivative_curve(curve: DerivativeCurve, path):
    _write_columns(path, ["beta", "d"], [curve.beta, curve.d])


def read_derivative_curve(path) -> DerivativeCurve:
    beta, d = _read_columns(path, ["beta", "d"])
    return DerivativeCurve(beta, d)


def write_chi_f_curve(curve: ChiFCurve, path):
    errors = curve.errors if curve.errors is not None else np.zeros_like(curve.chi_values)
    _write_columns(path, ["beta", "chi_f", "stderr"], [curve.beta_grid, curve.chi_values, errors])


def read_chi_f_curve(path, method: str = "mc") -> ChiFCurve:
    beta, chi, err = _read_columns(path, ["beta", "chi_f", "stderr"])
    return ChiFCurve(beta, chi, method=method, errors=err)


def report_to_dict(report: TransitionReport) -> dict:
    return {
        "beta_star": report.beta_star,
        "uncertainty": report.uncertainty,
        "method": report.method,
        "grid_step": report.grid_step,
        "smoothing_window": report.smoothing_window,
        "no_peak": report.no_peak,
    }


def write_report(report: TransitionReport, path):
    Path(path).write_text(json.dumps(report_to_dict(report), sort_keys=True, indent=1) + "\n")


def read_report(path) -> TransitionReport:
    d = json.loads(Path(path).read_text())
    return TransitionReport(
        beta_star=d["beta_star"],
        uncertainty=d["uncertainty"],
        method=d["method"],
        grid_step=d["grid_step"],
        smoothing_window=d["smoothing_window"],
        no_peak=d["no_peak"],
    )


def write_scaling_fit(fit: ScalingFit, path):
    payload = {
        "sizes": [float(s) for s in fit.sizes],
        "beta_stars": [float(b) for b in fit.beta_stars],
        "intercept": fit.intercept,
        "slope": fit.slope,
        "r_squared": fit.r_squared,
        "residuals": [float(r) for r in fit.residuals],
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")
