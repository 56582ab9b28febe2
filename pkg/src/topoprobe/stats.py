"""Small statistics helpers used by tests and the verify command."""

from __future__ import annotations

import numpy as np
from scipy import stats as sps


def chi_square_gof(observed: np.ndarray, probs: np.ndarray, min_expected: float = 5.0):
    """Goodness-of-fit chi-square of counts against cell probabilities.

    Cells whose expected count falls below ``min_expected`` are merged into
    the smallest cells first (standard validity condition); degrees of
    freedom are reduced accordingly.  Returns (statistic, dof, p_value).
    """
    observed = np.asarray(observed, dtype=np.float64)
    probs = np.asarray(probs, dtype=np.float64)
    if observed.shape != probs.shape:
        raise ValueError("observed and probs must align")
    total = observed.sum()
    order = np.argsort(probs)
    obs, exp = observed[order], probs[order] * total
    merged_obs, merged_exp = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(obs, exp):
        acc_o += o
        acc_e += e
        if acc_e >= min_expected:
            merged_obs.append(acc_o)
            merged_exp.append(acc_e)
            acc_o = acc_e = 0.0
    if merged_obs:
        merged_obs[-1] += acc_o
        merged_exp[-1] += acc_e
    else:
        merged_obs, merged_exp = [acc_o], [acc_e]
    obs = np.asarray(merged_obs)
    exp = np.asarray(merged_exp)
    if obs.size < 2:
        return 0.0, 0, 1.0
    stat = float(((obs - exp) ** 2 / exp).sum())
    dof = obs.size - 1
    return stat, dof, float(sps.chi2.sf(stat, dof))


def jackknife_error(block_values: np.ndarray) -> float:
    """Delete-one jackknife standard error from per-block estimates."""
    block_values = np.asarray(block_values, dtype=np.float64)
    m = block_values.size
    if m < 2:
        return 0.0
    total = block_values.sum()
    loo = (total - block_values) / (m - 1)
    return float(np.sqrt((m - 1) / m * ((loo - loo.mean()) ** 2).sum()))


def ols_line(x: np.ndarray, y: np.ndarray):
    """Ordinary least squares y = a + b*x; returns (a, b, r_squared, residuals)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size != y.size or x.size < 2:
        raise ValueError("need at least two aligned points")
    if np.ptp(x) == 0:
        raise ValueError("degenerate fit: all x values equal")
    design = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    fitted = design @ coef
    residuals = y - fitted
    ss_res = float((residuals**2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return float(coef[0]), float(coef[1]), r2, residuals
