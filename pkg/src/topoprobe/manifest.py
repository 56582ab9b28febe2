"""Experiment manifests: a manifest fully determines a rerun.

A manifest is plain JSON.  Beta grids may be written explicitly or as
``{"lo": .., "hi": .., "points": ..}``; resolution expands them to explicit
lists (rounded to 10 decimals so serialised grids compare exactly), fills
defaults, and validates every field, reporting errors by field path.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__

MODEL_KINDS = ("igt", "toric_x", "toric_z", "stabilizer")
SIGMA_Z_MAX_N = 4


class ManifestError(ValueError):
    def __init__(self, path: str, message: str):
        self.field_path = path
        super().__init__(f"{path}: {message}")


@dataclass
class Manifest:
    experiment_id: str
    model_kind: str
    n: int
    master_seed: int
    train_betas: list[float]
    eval_betas: list[float]
    train_count: int
    eval_count: int
    field_preset: str | None = None
    sampler: dict = field(default_factory=dict)
    predictor: dict = field(default_factory=dict)
    detector: dict = field(default_factory=dict)
    stabilizer: dict = field(default_factory=dict)
    fidelity: dict = field(default_factory=dict)
    tool_version: str = __version__

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"


def _expand_grid(value, path: str) -> list[float]:
    if isinstance(value, dict):
        for key in ("lo", "hi", "points"):
            if key not in value:
                raise ManifestError(f"{path}.{key}", "missing grid field")
        lo, hi, points = float(value["lo"]), float(value["hi"]), int(value["points"])
        if points < 1 or hi < lo:
            raise ManifestError(path, "grid needs points >= 1 and hi >= lo")
        return [float(b) for b in np.round(np.linspace(lo, hi, points), 10)]
    if isinstance(value, (list, tuple)):
        grid = [float(b) for b in value]
        if any(b < 0 for b in grid):
            raise ManifestError(path, "beta values must be non-negative")
        if any(b2 <= b1 for b1, b2 in zip(grid, grid[1:])):
            raise ManifestError(path, "beta grid must be strictly ascending")
        return grid
    raise ManifestError(path, "expected a list of betas or {lo, hi, points}")


def _require(cfg: dict, key: str, kind, path: str):
    if key not in cfg:
        raise ManifestError(f"{path}{key}", "missing required field")
    value = cfg[key]
    if kind is float and isinstance(value, int):
        value = float(value)
    if not isinstance(value, kind):
        raise ManifestError(f"{path}{key}", f"expected {kind.__name__}")
    return value


_SAMPLER_DEFAULTS = {"therm_sweeps": 100, "stride": 1, "chains": 1}
_DETECTOR_DEFAULTS = {"smoothing_window": 3}
_STABILIZER_DEFAULTS = {"mc_samples": 128}
_FIDELITY_DEFAULTS = {"mc_samples": 2000, "method": "mc"}


def resolve_manifest(cfg: dict, overrides: dict | None = None) -> Manifest:
    """Validate a manifest dict, apply overrides, fill defaults."""
    cfg = dict(cfg)
    for key, value in (overrides or {}).items():
        if value is not None:
            cfg[key] = value

    experiment_id = _require(cfg, "experiment_id", str, "")
    model_kind = _require(cfg, "model_kind", str, "")
    if model_kind not in MODEL_KINDS:
        raise ManifestError("model_kind", f"must be one of {MODEL_KINDS}")
    n = _require(cfg, "n", int, "")
    if n < 2:
        raise ManifestError("n", "lattice size must be at least 2")
    if model_kind == "toric_z" and n > SIGMA_Z_MAX_N:
        raise ManifestError("n", f"sigma-z runs are limited to n <= {SIGMA_Z_MAX_N}")
    master_seed = _require(cfg, "master_seed", int, "")
    train_betas = _expand_grid(cfg.get("train_betas", []), "train_betas")
    eval_betas = _expand_grid(cfg.get("eval_betas", train_betas), "eval_betas")
    if not train_betas:
        raise ManifestError("train_betas", "missing required field")
    train_count = _require(cfg, "train_count", int, "")
    eval_count = int(cfg.get("eval_count", train_count))
    if train_count < 1 or eval_count < 1:
        raise ManifestError("train_count", "sample counts must be positive")

    field_preset = cfg.get("field_preset")
    if model_kind != "igt" and not isinstance(field_preset, str):
        raise ManifestError("field_preset", "toric experiments need a field preset")

    sampler = {**_SAMPLER_DEFAULTS, **cfg.get("sampler", {})}
    for key in ("therm_sweeps", "stride", "chains"):
        if int(sampler[key]) < (0 if key == "therm_sweeps" else 1):
            raise ManifestError(f"sampler.{key}", "must be non-negative")
        sampler[key] = int(sampler[key])
    detector = {**_DETECTOR_DEFAULTS, **cfg.get("detector", {})}
    window = int(detector["smoothing_window"])
    if window < 1 or window % 2 == 0:
        raise ManifestError("detector.smoothing_window", "must be a positive odd integer")
    detector["smoothing_window"] = window
    stabilizer = {**_STABILIZER_DEFAULTS, **cfg.get("stabilizer", {})}
    stabilizer["mc_samples"] = int(stabilizer["mc_samples"])
    if stabilizer["mc_samples"] < 1:
        raise ManifestError("stabilizer.mc_samples", "must be positive")
    fidelity = {**_FIDELITY_DEFAULTS, **cfg.get("fidelity", {})}
    fidelity["mc_samples"] = int(fidelity["mc_samples"])
    if fidelity["mc_samples"] < 2:
        raise ManifestError("fidelity.mc_samples", "need at least two samples")
    if fidelity["method"] not in ("mc", "exact"):
        raise ManifestError("fidelity.method", "must be 'mc' or 'exact'")

    predictor = dict(cfg.get("predictor", {}))
    predictor.setdefault("kind", "dos" if model_kind == "igt" else "nn")
    if predictor["kind"] not in ("nn", "dos"):
        raise ManifestError("predictor.kind", "must be 'nn' or 'dos'")
    if predictor["kind"] == "dos" and model_kind != "igt":
        raise ManifestError("predictor.kind", "the energy model applies to igt only")

    return Manifest(
        experiment_id=experiment_id,
        model_kind=model_kind,
        n=n,
        master_seed=master_seed,
        train_betas=train_betas,
        eval_betas=eval_betas,
        train_count=train_count,
        eval_count=eval_count,
        field_preset=field_preset,
        sampler=sampler,
        predictor=predictor,
        detector=detector,
        stabilizer=stabilizer,
        fidelity=fidelity,
        tool_version=str(cfg.get("tool_version", __version__)),
    )


def load_manifest(path, overrides: dict | None = None) -> Manifest:
    try:
        cfg = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError("<file>", f"not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ManifestError("<file>", "manifest must be a JSON object")
    return resolve_manifest(cfg, overrides)
