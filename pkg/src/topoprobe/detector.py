"""Turn model predictions into transition estimates.

The chain is: mean prediction per label (PredictionCurve), discrete central
differences (DerivativeCurve), then peak extraction.  The derivative of the
prediction curve is largest where the model's output changes fastest with
the label, which is where the data stops carrying label information -- the
transition or crossover point.  Ensembles of independently trained models
give an uncertainty on the extracted position, and a least-squares fit of
the positions against ln(2 N^2) captures the crossover's logarithmic growth
with system size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LabeledDataset
from .stats import ols_line


@dataclass(frozen=True)
class PredictionCurve:
    """Mean model prediction per evaluation label, with spread and counts."""

    beta_labels: np.ndarray
    mean_pred: np.ndarray
    counts: np.ndarray
    spread: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.beta_labels, dtype=np.float64)
        if labels.size and np.any(np.diff(labels) <= 0):
            raise ValueError("labels must be strictly ascending")
        if np.any(np.asarray(self.counts) < 1):
            raise ValueError("every grid point needs at least one prediction")


@dataclass(frozen=True)
class DerivativeCurve:
    """Central-difference derivative on the interior grid points."""

    beta: np.ndarray
    d: np.ndarray


@dataclass(frozen=True)
class TransitionReport:
    beta_star: float | None
    uncertainty: float
    method: str
    grid_step: float
    smoothing_window: int
    no_peak: bool = False


@dataclass(frozen=True)
class ScalingFit:
    sizes: np.ndarray
    beta_stars: np.ndarray
    intercept: float
    slope: float
    r_squared: float
    residuals: np.ndarray


def prediction_curve(model, dataset: LabeledDataset) -> PredictionCurve:
    """Evaluate a model over a labeled dataset and average per label.

    ``model`` needs a ``predict_dataset(dataset) -> predictions`` method
    (networks and the density-of-states adapter both provide it).
    """
    if len(dataset) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    preds = np.asarray(model.predict_dataset(dataset), dtype=np.float64)
    labels = dataset.unique_labels()
    mean_pred = np.empty_like(labels)
    counts = np.empty(labels.size, dtype=np.int64)
    spread = np.empty_like(labels)
    for i, beta in enumerate(labels):
        sel = dataset.labels == beta
        mean_pred[i] = preds[sel].mean()
        counts[i] = sel.sum()
        spread[i] = preds[sel].std()
    return PredictionCurve(labels, mean_pred, counts, spread)


def curve_from_predictions(labels, predictions) -> PredictionCurve:
    """PredictionCurve straight from (label, prediction) pairs."""
    labels = np.asarray(labels, dtype=np.float64)
    predictions = np.asarray(predictions, dtype=np.float64)
    grid = np.unique(labels)
    mean_pred = np.array([predictions[labels == b].mean() for b in grid])
    counts = np.array([(labels == b).sum() for b in grid])
    spread = np.array([predictions[labels == b].std() for b in grid])
    return PredictionCurve(grid, mean_pred, counts, spread)


def derivative_curve(curve: PredictionCurve) -> DerivativeCurve:
    """d(beta_i) = (pred(beta_{i+1}) - pred(beta_{i-1})) /
    (beta_{i+1} - beta_{i-1}); endpoints are omitted."""
    grid = curve.beta_labels
    if grid.size < 3:
        raise ValueError("need at least three grid points for central differences")
    d = (curve.mean_pred[2:] - curve.mean_pred[:-2]) / (grid[2:] - grid[:-2])
    return DerivativeCurve(grid[1:-1].copy(), d)


def box_smooth(values: np.ndarray, window: int) -> np.ndarray:
    """Centred moving average; shrinks the window near the edges.  Window 1
    is the identity; even windows are rejected to keep the centring exact."""
    if window < 1 or window % 2 == 0:
        raise ValueError("smoothing window must be a positive odd integer")
    if window == 1:
        return np.asarray(values, dtype=np.float64).copy()
    values = np.asarray(values, dtype=np.float64)
    kernel = np.ones(window)
    sums = np.convolve(values, kernel, mode="same")
    # shrunken-edge normalisation: flat curves stay exactly flat
    norm = np.convolve(np.ones_like(values), kernel, mode="same")
    return sums / norm


DEFAULT_WINDOW = 3
MIN_POINTS_FOR_SMOOTHING = 6


def find_crossover(
    dcurve: DerivativeCurve, smoothing_window: int = DEFAULT_WINDOW, method: str = "nn"
) -> TransitionReport:
    """Peak of the (optionally box-smoothed) derivative curve.

    Ties resolve to the smallest beta; smoothing is disabled on grids of
    five or fewer points; an all-equal curve is flagged as having no peak.
    """
    if dcurve.d.size == 0:
        raise ValueError("empty derivative curve")
    window = smoothing_window if dcurve.d.size >= MIN_POINTS_FOR_SMOOTHING else 1
    smooth = box_smooth(dcurve.d, window)
    grid_step = float(np.min(np.diff(dcurve.beta))) if dcurve.beta.size > 1 else 0.0
    if np.all(smooth == smooth[0]):
        return TransitionReport(
            beta_star=None, uncertainty=0.0, method=method,
            grid_step=grid_step, smoothing_window=window, no_peak=True,
        )
    k = int(np.argmax(smooth))
    return TransitionReport(
        beta_star=float(dcurve.beta[k]), uncertainty=0.0, method=method,
        grid_step=grid_step, smoothing_window=window,
    )


def significant_peaks(
    dcurve: DerivativeCurve,
    smoothing_window: int = DEFAULT_WINDOW,
    prominence_fraction: float = 0.25,
) -> list[float]:
    """Locations of prominent local maxima of the smoothed derivative.

    Prominence is topographic: the height of a peak above the highest saddle
    separating it from higher terrain (the global maximum gets the full
    curve range).  Peaks with prominence below ``prominence_fraction`` of
    the curve range are Monte Carlo wiggles and are dropped; exactly one
    returned position is what "a single dominant peak" means downstream.
    """
    window = smoothing_window if dcurve.d.size >= MIN_POINTS_FOR_SMOOTHING else 1
    smooth = box_smooth(dcurve.d, window)
    lo, hi = float(smooth.min()), float(smooth.max())
    if hi == lo:
        return []
    cutoff = prominence_fraction * (hi - lo)
    peaks = []
    for i in range(smooth.size):
        left = smooth[i - 1] if i > 0 else -np.inf
        right = smooth[i + 1] if i < smooth.size - 1 else -np.inf
        if not (smooth[i] > left and smooth[i] >= right):
            continue
        saddles = []
        for step in (-1, 1):
            j = i + step
            low = smooth[i]
            saddle = None
            while 0 <= j < smooth.size:
                low = min(low, smooth[j])
                if smooth[j] > smooth[i]:
                    saddle = low
                    break
                j += step
            saddles.append(saddle)
        found = [s for s in saddles if s is not None]
        if not found:
            prominence = smooth[i] - lo
        else:
            prominence = smooth[i] - max(found)
        if prominence >= cutoff:
            peaks.append(float(dcurve.beta[i]))
    return peaks


def ensemble_crossover(
    models, dataset: LabeledDataset, smoothing_window: int = DEFAULT_WINDOW,
    method: str = "nn",
) -> TransitionReport:
    """Mean and population standard deviation of per-model peak positions."""
    stars = []
    grid_step = 0.0
    window = smoothing_window
    for model in models:
        curve = prediction_curve(model, dataset)
        report = find_crossover(derivative_curve(curve), smoothing_window, method)
        if report.no_peak:
            raise ValueError("an ensemble member produced a flat derivative curve")
        stars.append(report.beta_star)
        grid_step = report.grid_step
        window = report.smoothing_window
    stars = np.asarray(stars)
    return TransitionReport(
        beta_star=float(stars.mean()),
        uncertainty=float(stars.std()),
        method=method,
        grid_step=grid_step,
        smoothing_window=window,
    )


def scaling_fit(sizes, beta_stars) -> ScalingFit:
    """Least squares of the crossover position on ln(2 N^2)."""
    sizes = np.asarray(sizes, dtype=np.float64)
    beta_stars = np.asarray(beta_stars, dtype=np.float64)
    if sizes.size < 3:
        raise ValueError("scaling fit needs at least three system sizes")
    if np.unique(sizes).size == 1:
        raise ValueError("degenerate fit: all sizes equal")
    x = np.log(2.0 * sizes**2)
    a, b, r2, residuals = ols_line(x, beta_stars)
    return ScalingFit(sizes, beta_stars, a, b, r2, residuals)
