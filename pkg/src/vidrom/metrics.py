"""Trajectory error metrics.

All three metrics compare an estimated trajectory against a truth trajectory
sampled at the same times, rows are samples and columns channels.  Channel
ranges (max - min) are always taken from the truth.

ermse   root mean square of per-channel range-normalized errors, averaged
        over channels and samples.
cnmte   mean over samples of the norm of the range-normalized error vector.
nmte    mean over samples of the plain error norm, divided by the largest
        truth sample norm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NormalizationError, ShapeError


def _check(truth, estimate):
    truth = np.asarray(truth, dtype=float)
    estimate = np.asarray(estimate, dtype=float)
    if truth.ndim == 1:
        truth = truth[:, None]
    if estimate.ndim == 1:
        estimate = estimate[:, None]
    if truth.shape != estimate.shape:
        raise ShapeError(
            f"truth {truth.shape} and estimate {estimate.shape} differ in shape"
        )
    if truth.shape[0] == 0:
        raise ShapeError("metrics need at least one sample")
    return truth, estimate


def channel_ranges(truth) -> np.ndarray:
    """Per-channel max - min of the truth; zero range is an error."""
    truth = np.asarray(truth, dtype=float)
    if truth.ndim == 1:
        truth = truth[:, None]
    ranges = truth.max(axis=0) - truth.min(axis=0)
    for j, r in enumerate(ranges):
        if r == 0.0:
            raise NormalizationError(f"channel {j} of the truth has zero range")
    return ranges


def ermse(truth, estimate) -> float:
    truth, estimate = _check(truth, estimate)
    ranges = channel_ranges(truth)
    z = (estimate - truth) / ranges
    return float(np.sqrt(np.mean(z * z)))


def cnmte(truth, estimate) -> float:
    truth, estimate = _check(truth, estimate)
    ranges = channel_ranges(truth)
    z = (estimate - truth) / ranges
    return float(np.mean(np.sqrt(np.sum(z * z, axis=1))))


def nmte(truth, estimate) -> float:
    truth, estimate = _check(truth, estimate)
    norms = np.linalg.norm(truth, axis=1)
    peak = norms.max()
    if peak == 0.0:
        raise NormalizationError("truth trajectory is identically zero")
    err = np.linalg.norm(estimate - truth, axis=1)
    return float(np.mean(err) / peak)


@dataclass(frozen=True)
class ErrorReport:
    """A named metric value plus the truth ranges it was normalized with."""

    metric: str
    value: float
    ranges: tuple


_METRICS = {"ermse": ermse, "cnmte": cnmte, "nmte": nmte}


def report(metric: str, truth, estimate) -> ErrorReport:
    """Evaluate a metric by name and package it with the truth ranges."""
    if metric not in _METRICS:
        raise ValueError(f"unknown metric {metric!r}, pick from {sorted(_METRICS)}")
    truth_arr, _ = _check(truth, estimate)
    value = _METRICS[metric](truth, estimate)
    if metric == "nmte":
        ranges = ()
    else:
        ranges = tuple(float(r) for r in channel_ranges(truth_arr))
    return ErrorReport(metric, value, ranges)
