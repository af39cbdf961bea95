"""Time series, fixed-point centering, delay embedding and derivatives."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmbeddingWarning, InputError, ShapeError


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled q-channel signal.

    ``origin_offset`` records what has been subtracted from the raw data so
    the fixed point sits at zero; it accumulates across repeated centering.
    """

    dt: float
    values: np.ndarray
    origin_offset: np.ndarray = field(default=None)

    def __post_init__(self):
        if not self.dt > 0:
            raise InputError("dt must be positive")
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise ShapeError("values must be (samples, channels)")
        values = values.copy()
        values.flags.writeable = False
        offset = self.origin_offset
        if offset is None:
            offset = np.zeros(values.shape[1])
        offset = np.asarray(offset, dtype=float).copy()
        if offset.shape != (values.shape[1],):
            raise ShapeError("origin_offset must have one entry per channel")
        offset.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "origin_offset", offset)

    @property
    def num_samples(self):
        return self.values.shape[0]

    @property
    def num_channels(self):
        return self.values.shape[1]


@dataclass(frozen=True)
class EmbeddedSeries:
    """Delay-embedded observable vectors.

    Vector k stacks samples k, k+lag, ..., k+(copies-1)*lag of every channel,
    channel major: all delays of channel 0 first, then channel 1, and so on.
    """

    dt: float
    copies: int
    lag_steps: int
    channels: int
    vectors: np.ndarray

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=float).copy()
        if vectors.ndim != 2 or vectors.shape[1] != self.copies * self.channels:
            raise ShapeError("vectors must be (samples, channels * copies)")
        vectors.flags.writeable = False
        object.__setattr__(self, "vectors", vectors)

    @property
    def dim(self):
        return self.vectors.shape[1]

    @property
    def num_samples(self):
        return self.vectors.shape[0]


def center(series: TimeSeries, offset) -> TimeSeries:
    """Subtract a per-channel offset, accumulating it into origin_offset."""
    offset = np.asarray(offset, dtype=float)
    if offset.shape != (series.num_channels,):
        raise ShapeError("offset must have one entry per channel")
    return TimeSeries(series.dt, series.values - offset, series.origin_offset + offset)


def tail_mean_offset(series: TimeSeries, window: int) -> np.ndarray:
    """Fixed-point estimate for decaying data: mean of the trailing window."""
    if not 1 <= window <= series.num_samples:
        raise InputError(
            f"tail window must be in [1, {series.num_samples}], got {window}"
        )
    return series.values[-window:].mean(axis=0)


def delay_embed(
    series: TimeSeries, copies: int, lag_steps: int = 1, target_dim: int = None
) -> EmbeddedSeries:
    """Stack ``copies`` delayed copies of every channel into one vector series.

    When ``target_dim`` (the manifold dimension the embedding should support)
    is given and copies < 2 * target_dim + 1, an EmbeddingWarning is emitted.
    """
    if copies < 1:
        raise InputError("copies must be >= 1")
    if lag_steps < 1:
        raise InputError("lag_steps must be >= 1")
    span = (copies - 1) * lag_steps
    n_out = series.num_samples - span
    if n_out < 1:
        raise InputError(
            f"series of {series.num_samples} samples is too short for "
            f"{copies} copies at lag {lag_steps}"
        )
    if target_dim is not None and copies < 2 * target_dim + 1:
        warnings.warn(
            f"{copies} delay copies may not embed a {target_dim}-dimensional "
            f"manifold (need >= {2 * target_dim + 1})",
            EmbeddingWarning,
            stacklevel=2,
        )
    q = series.num_channels
    out = np.empty((n_out, q * copies))
    for ch in range(q):
        for j in range(copies):
            out[:, ch * copies + j] = series.values[
                j * lag_steps : j * lag_steps + n_out, ch
            ]
    return EmbeddedSeries(series.dt, copies, lag_steps, q, out)


def leading_components(emb: EmbeddedSeries) -> np.ndarray:
    """The delay-0 sample of every channel, i.e. the original signal values."""
    idx = np.arange(emb.channels) * emb.copies
    return emb.vectors[:, idx]


def estimate_derivative(values: np.ndarray, dt: float) -> np.ndarray:
    """Finite-difference time derivative along axis 0.

    Fourth-order central differences in the interior, second-order one-sided
    stencils at the two samples on each end.  Needs at least 5 samples.
    """
    values = np.asarray(values, dtype=float)
    squeeze = values.ndim == 1
    if squeeze:
        values = values[:, None]
    n = values.shape[0]
    if n < 5:
        raise InputError("derivative estimation needs at least 5 samples")
    out = np.empty_like(values)
    f = values
    out[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * dt)
    out[0] = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * dt)
    out[1] = (-3 * f[1] + 4 * f[2] - f[3]) / (2 * dt)
    out[-2] = (3 * f[-2] - 4 * f[-3] + f[-4]) / (2 * dt)
    out[-1] = (3 * f[-1] - 4 * f[-2] + f[-3]) / (2 * dt)
    return out[:, 0] if squeeze else out


def read_series_csv(path, channels) -> TimeSeries:
    """Read named channels from a CSV with a header row and a ``t`` column.

    The time column must be uniform; its spacing becomes ``dt``.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc}") from exc
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise InputError(f"{path}: empty CSV")
    header = [h.strip() for h in lines[0].split(",")]
    if "t" not in header:
        raise InputError(f"{path}: no 't' column")
    try:
        cols = [header.index(c) for c in channels]
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc
    t_col = header.index("t")
    rows = [ln.split(",") for ln in lines[1:]]
    if len(rows) < 2:
        raise InputError(f"{path}: need at least two samples")
    t = np.array([float(r[t_col]) for r in rows])
    steps = np.diff(t)
    dt = steps.mean()
    # times are written with 6 decimals, so allow 1e-6 absolute jitter
    if dt <= 0 or np.abs(steps - dt).max() > 1e-6 * max(abs(dt), 1.0) + 1.5e-6:
        raise InputError(f"{path}: time column is not uniformly increasing")
    values = np.array([[float(r[c]) for c in cols] for r in rows])
    return TimeSeries(float(dt), values)


def write_series_csv(path, times, values, channel_names) -> None:
    """Write ``t`` plus named channels as CSV with LF endings."""
    values = np.asarray(values, dtype=float)
    lines = ["t," + ",".join(channel_names)]
    for i in range(values.shape[0]):
        cells = ",".join(repr(float(v)) for v in values[i])
        lines.append(f"{times[i]:.6f},{cells}")
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")
