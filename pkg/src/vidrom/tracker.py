"""Rotation-aware template tracking.

Matching minimizes a normalized sum of squared differences over all channels
and mask-valid template pixels:

    R(x, y) = sum((T - I)^2) / sqrt(sum(T^2) * sum(I^2))

where the sums run over the masked template support placed at (x, y).  Lower
is better and R = 0 exactly when the masked patch equals the masked template.
Placements with a zero denominator get a +inf sentinel score.

Per frame the tracker crops a search window around the previous match, sweeps
a grid of template rotations about the previous angle, collects placements
scoring below a threshold and reduces them by greedy non-maximum suppression
on box overlap.  Rotated templates are resampled by the inverse rotation about
the template center with bilinear interpolation; samples falling outside the
original support are marked invalid and excluded from matching.  Angles are
degrees, normalized to (-180, 180].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InputError, MatchError, ShapeError, TrackingLostError
from .frames import Frame, FrameSequence, Region, crop


def normalize_angle(theta: float) -> float:
    """Map an angle in degrees to the interval (-180, 180]."""
    return 180.0 - (180.0 - theta) % 360.0


@dataclass(frozen=True)
class Template:
    """Matching template: pixels, a tracked anchor point and a validity mask.

    ``anchor`` is (x, y) in template pixel coordinates and defaults to the
    geometric center ((w-1)/2, (h-1)/2).  ``mask`` marks pixels that take part
    in matching; it is combined with the pixel frame's own mask.
    """

    pixels: Frame
    anchor: tuple = None
    mask: np.ndarray = field(default=None)

    def __post_init__(self):
        mask = self.mask
        if mask is None:
            mask = self.pixels.mask
        else:
            mask = np.asarray(mask, dtype=bool)
            if mask.shape != (self.pixels.height, self.pixels.width):
                raise ShapeError(
                    f"template mask {mask.shape} does not match pixels "
                    f"{(self.pixels.height, self.pixels.width)}"
                )
            mask = mask & self.pixels.mask
        if not mask.any():
            raise InputError("template mask selects no pixels")
        mask = mask.copy()
        mask.flags.writeable = False
        object.__setattr__(self, "mask", mask)
        anchor = self.anchor
        if anchor is None:
            anchor = ((self.pixels.width - 1) / 2.0, (self.pixels.height - 1) / 2.0)
        object.__setattr__(self, "anchor", (float(anchor[0]), float(anchor[1])))

    @property
    def width(self):
        return self.pixels.width

    @property
    def height(self):
        return self.pixels.height


@dataclass(frozen=True)
class SearchConfig:
    """Knobs of the per-frame matcher.

    ``search_scale`` sizes the search window relative to the template,
    ``theta_*`` define the rotation sweep in degrees relative to the previous
    angle, ``score_thresh`` is the candidate cut on the match score,
    ``iou_thresh`` the overlap above which candidates suppress each other,
    ``n_match`` how many detections to keep per frame.  ``d_thresh`` and
    ``background_removal`` switch tracking onto background-difference masks.
    """

    search_scale: float = 2.0
    theta_min: float = -15.0
    theta_max: float = 15.0
    theta_interval: float = 5.0
    score_thresh: float = 0.5
    iou_thresh: float = 0.3
    n_match: int = 1
    d_thresh: float = None
    background_removal: bool = False

    def __post_init__(self):
        if not self.search_scale >= 1:
            raise InputError("search_scale must be >= 1")
        if not self.theta_min <= self.theta_max:
            raise InputError("theta_min must be <= theta_max")
        if not self.theta_interval > 0:
            raise InputError("theta_interval must be > 0")
        if not 0 <= self.score_thresh <= 2:
            raise InputError("score_thresh must lie in [0, 2]")
        if not 0 <= self.iou_thresh <= 1:
            raise InputError("iou_thresh must lie in [0, 1]")
        if not self.n_match >= 1:
            raise InputError("n_match must be >= 1")
        if self.background_removal and self.d_thresh is None:
            raise InputError("background_removal requires d_thresh")

    def sweep_angles(self, theta_ref: float) -> np.ndarray:
        """Absolute sweep angles: theta_ref + {theta_min..theta_max}."""
        n = int(math.floor((self.theta_max - self.theta_min) / self.theta_interval + 1e-9))
        rel = self.theta_min + self.theta_interval * np.arange(n + 1)
        return np.array([normalize_angle(theta_ref + r) for r in rel])


@dataclass(frozen=True)
class Detection:
    """One accepted match: bounding box, absolute angle (deg) and score."""

    box: Region
    theta: float
    score: float


@dataclass(frozen=True)
class TrackSeries:
    """Per-frame tracked anchor positions, angles and scores."""

    times: np.ndarray
    xs: np.ndarray
    ys: np.ndarray
    thetas: np.ndarray
    scores: np.ndarray

    def __post_init__(self):
        arrays = {}
        n = None
        for name in ("times", "xs", "ys", "thetas", "scores"):
            arr = np.asarray(getattr(self, name), dtype=float).copy()
            if arr.ndim != 1:
                raise ShapeError(f"{name} must be 1-d")
            if n is None:
                n = arr.size
            elif arr.size != n:
                raise ShapeError("track columns must have equal length")
            arr.flags.writeable = False
            arrays[name] = arr
        if n == 0:
            raise InputError("a track needs at least one sample")
        dt = np.diff(arrays["times"])
        if dt.size and (dt <= 0).any():
            raise InputError("times must be strictly increasing")
        for name, arr in arrays.items():
            object.__setattr__(self, name, arr)

    def __len__(self):
        return self.times.size


def frame_average(seq: FrameSequence) -> Frame:
    """Pixelwise mean frame of the whole sequence."""
    acc = np.zeros_like(seq[0].intensities)
    for f in seq.frames:
        acc = acc + f.intensities
    return Frame(acc / len(seq))


def difference_mask(frame: Frame, mean: Frame, d_thresh: float) -> Frame:
    """Foreground mask: 1 where the channel-max |frame - mean| reaches d_thresh.

    Returns a single-channel frame with values in {0, 1}.
    """
    if frame.intensities.shape != mean.intensities.shape:
        raise ShapeError("frame and mean frame differ in shape")
    diff = np.abs(frame.intensities - mean.intensities)
    d_max = diff.max(axis=2)
    return Frame((d_thresh <= d_max).astype(float)[:, :, None])


def _bilinear(values: np.ndarray, src_x: np.ndarray, src_y: np.ndarray) -> np.ndarray:
    h, w = values.shape[:2]
    x0 = np.floor(src_x).astype(int)
    y0 = np.floor(src_y).astype(int)
    fx = src_x - x0
    fy = src_y - y0
    x0c = np.clip(x0, 0, w - 1)
    x1c = np.clip(x0 + 1, 0, w - 1)
    y0c = np.clip(y0, 0, h - 1)
    y1c = np.clip(y0 + 1, 0, h - 1)
    v00 = values[y0c, x0c]
    v10 = values[y0c, x1c]
    v01 = values[y1c, x0c]
    v11 = values[y1c, x1c]
    wx = fx[..., None] if values.ndim == 3 else fx
    wy = fy[..., None] if values.ndim == 3 else fy
    top = v00 * (1 - wx) + v10 * wx
    bot = v01 * (1 - wx) + v11 * wx
    return top * (1 - wy) + bot * wy


def rotate_template(t: Template, theta: float) -> Template:
    """Resample a template rotated by ``theta`` degrees about its center.

    The output keeps the input pixel grid; output pixels whose source sample
    falls outside the original support, or touches an invalid input pixel,
    are marked invalid.  The anchor point rotates with the content.
    """
    theta = normalize_angle(theta)
    h, w = t.height, t.width
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    ys, xs = np.mgrid[0:h, 0:w]
    dx = xs - cx
    dy = ys - cy
    rad = math.radians(theta)
    c, s = math.cos(rad), math.sin(rad)
    # inverse map: rotate output coordinates by -theta about the center
    src_x = cx + c * dx + s * dy
    src_y = cy - s * dx + c * dy
    eps = 1e-9
    in_support = (
        (src_x >= -eps) & (src_x <= w - 1 + eps) & (src_y >= -eps) & (src_y <= h - 1 + eps)
    )
    pix = _bilinear(t.pixels.intensities, src_x, src_y)
    mask_val = _bilinear(t.mask.astype(float), src_x, src_y)
    valid = in_support & (mask_val >= 1 - 1e-6)
    pix = np.clip(pix, 0.0, 1.0)
    pix[~valid] = 0.0
    ax, ay = t.anchor
    dax, day = ax - cx, ay - cy
    # content moves with the forward rotation, and so does the anchor
    new_anchor = (cx + c * dax - s * day, cy + s * dax + c * day)
    return Template(Frame(pix, valid), new_anchor, valid)


def nssd_map(t: Template, frame: Frame) -> np.ndarray:
    """Masked NSSD score for every placement of ``t`` inside ``frame``.

    Returns an array of shape (frame.h - t.h + 1, frame.w - t.w + 1) where
    entry (y, x) scores the placement with the template's top-left corner at
    (x, y).  Degenerate placements (zero denominator) score +inf.  Raises
    MatchError when the template itself carries no signal or no placement is
    valid.
    """
    if frame.channels != t.pixels.channels:
        raise ShapeError(
            f"frame has {frame.channels} channels, template {t.pixels.channels}"
        )
    if t.height > frame.height or t.width > frame.width:
        raise ShapeError("template does not fit inside the frame")
    m = t.mask.astype(float)
    tm = t.pixels.intensities * m[:, :, None]
    sum_t2 = float(np.einsum("ijc,ijc->", tm, t.pixels.intensities))
    if sum_t2 == 0.0:
        raise MatchError("template is identically zero under its mask")
    windows = sliding_window_view(frame.intensities, (t.height, t.width), axis=(0, 1))
    # windows: (H', W', c, th, tw)
    cross = np.einsum("abcij,ijc->ab", windows, tm, optimize=True)
    sum_i2 = np.einsum("abcij,abcij,ij->ab", windows, windows, m, optimize=True)
    num = np.maximum(sum_t2 - 2.0 * cross + sum_i2, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        scores = num / np.sqrt(sum_t2 * sum_i2)
    scores[sum_i2 == 0.0] = np.inf
    if not np.isfinite(scores).any():
        raise MatchError("all placements are degenerate")
    return scores


def jaccard(a: Region, b: Region) -> float:
    """Intersection area over union area of two pixel rectangles."""
    iw = min(a.x1, b.x1) - max(a.x0, b.x0)
    ih = min(a.y1, b.y1) - max(a.y0, b.y0)
    inter = max(iw, 0) * max(ih, 0)
    return inter / (a.area + b.area - inter)


def match_sweep(t: Template, frame: Frame, cfg: SearchConfig, theta_ref: float = 0.0):
    """Match rotated copies of ``t`` against ``frame`` over the angle sweep.

    Returns (boxes, scores, angles) for every placement and angle whose score
    falls strictly below ``cfg.score_thresh``.  Box coordinates are relative
    to ``frame``; angles are the absolute rotation applied to the template.
    """
    boxes = []
    scores = []
    angles = []
    for theta in cfg.sweep_angles(theta_ref):
        rt = t if theta == 0.0 else rotate_template(t, theta)
        grid = nssd_map(rt, frame)
        ys, xs = np.nonzero(grid < cfg.score_thresh)
        for y, x in zip(ys.tolist(), xs.tolist()):
            boxes.append(Region(x, y, t.width, t.height))
            scores.append(float(grid[y, x]))
            angles.append(float(theta))
    return boxes, np.asarray(scores, dtype=float), np.asarray(angles, dtype=float)


def nms(boxes, scores, angles, iou_thresh: float, n_match: int, theta_ref: float = 0.0):
    """Greedy minimum-score selection with Jaccard-overlap suppression.

    Candidates are visited in order of ascending score; ties break on lower
    y, then lower x, then smaller angular distance to ``theta_ref``.  Each
    selected candidate suppresses everything overlapping it with IoU >=
    ``iou_thresh``.  At most ``n_match`` detections are returned.
    """
    scores = np.asarray(scores, dtype=float)
    angles = np.asarray(angles, dtype=float)
    if len(boxes) != scores.size or len(boxes) != angles.size:
        raise ShapeError("boxes, scores and angles must have equal length")
    if scores.size == 0:
        return []
    x0 = np.array([b.x0 for b in boxes], dtype=float)
    y0 = np.array([b.y0 for b in boxes], dtype=float)
    x1 = np.array([b.x1 for b in boxes], dtype=float)
    y1 = np.array([b.y1 for b in boxes], dtype=float)
    areas = (x1 - x0) * (y1 - y0)
    dangle = np.abs(angles - theta_ref)
    order = np.lexsort((dangle, x0, y0, scores))
    suppressed = np.zeros(scores.size, dtype=bool)
    out = []
    for idx in order:
        if suppressed[idx]:
            continue
        out.append(Detection(boxes[idx], float(angles[idx]), float(scores[idx])))
        if len(out) >= n_match:
            break
        iw = np.maximum(np.minimum(x1[idx], x1) - np.maximum(x0[idx], x0), 0.0)
        ih = np.maximum(np.minimum(y1[idx], y1) - np.maximum(y0[idx], y0), 0.0)
        inter = iw * ih
        iou = inter / (areas[idx] + areas - inter)
        suppressed |= iou >= iou_thresh
    return out


def _search_window(frame: Frame, center, t: Template, scale: float) -> Region:
    sw = max(int(round(t.width * scale)), t.width)
    sh = max(int(round(t.height * scale)), t.height)
    sw = min(sw, frame.width)
    sh = min(sh, frame.height)
    if t.width > sw or t.height > sh:
        raise InputError("template is larger than the search window")
    x0 = int(round(center[0] - (sw - 1) / 2.0))
    y0 = int(round(center[1] - (sh - 1) / 2.0))
    x0 = min(max(x0, 0), frame.width - sw)
    y0 = min(max(y0, 0), frame.height - sh)
    return Region(x0, y0, sw, sh)


def track(
    seq: FrameSequence,
    t: Template,
    init_region: Region,
    cfg: SearchConfig,
    theta_init: float = 0.0,
) -> TrackSeries:
    """Track a template through a frame sequence.

    ``init_region`` is the template's bounding box in the first frame; the
    search window for each frame is centered on the previous match and the
    rotation sweep on the previous angle (starting from ``theta_init``).  With
    ``cfg.background_removal`` the sequence is first turned into foreground
    masks against the sequence mean and the template pixels are re-read from
    the first masked frame at ``init_region`` (anchor and mask are kept).
    """
    first = seq[0]
    if init_region.width != t.width or init_region.height != t.height:
        raise ShapeError("init_region must have the template's dimensions")
    if (
        init_region.x0 < 0
        or init_region.y0 < 0
        or init_region.x1 > first.width
        or init_region.y1 > first.height
    ):
        raise InputError("init_region lies outside the first frame")
    if cfg.background_removal:
        mean = frame_average(seq)
        frames = [difference_mask(f, mean, cfg.d_thresh) for f in seq.frames]
        t = Template(crop(frames[0], init_region), t.anchor, t.mask)
    else:
        frames = list(seq.frames)

    n = len(frames)
    xs = np.empty(n)
    ys = np.empty(n)
    thetas = np.empty(n)
    scores = np.empty(n)
    center = init_region.center
    theta_ref = normalize_angle(theta_init)
    for i, frame in enumerate(frames):
        window = _search_window(frame, center, t, cfg.search_scale)
        sub = crop(frame, window)
        try:
            boxes, cand_scores, cand_angles = match_sweep(t, sub, cfg, theta_ref)
        except MatchError as exc:
            raise TrackingLostError(i, f"frame {i}: {exc}") from exc
        detections = nms(
            boxes, cand_scores, cand_angles, cfg.iou_thresh, cfg.n_match, theta_ref
        )
        if not detections:
            raise TrackingLostError(i)
        best = detections[0]
        box = Region(
            window.x0 + best.box.x0, window.y0 + best.box.y0, t.width, t.height
        )
        anchor = rotate_template(t, best.theta).anchor if best.theta != 0.0 else t.anchor
        xs[i] = box.x0 + anchor[0]
        ys[i] = box.y0 + anchor[1]
        thetas[i] = best.theta
        scores[i] = best.score
        center = box.center
        theta_ref = best.theta
    times = np.arange(n) / seq.frame_rate
    return TrackSeries(times, xs, ys, thetas, scores)


TRACK_CSV_HEADER = "t,x,y,theta,score"


def write_track_csv(series: TrackSeries, path) -> None:
    """Write a track as CSV: header ``t,x,y,theta,score``, LF endings."""
    lines = [TRACK_CSV_HEADER]
    for i in range(len(series)):
        lines.append(
            f"{series.times[i]:.6f},{float(series.xs[i])!r},{float(series.ys[i])!r},"
            f"{float(series.thetas[i])!r},{float(series.scores[i])!r}"
        )
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")


def read_track_csv(path) -> TrackSeries:
    """Read a CSV produced by :func:`write_track_csv`."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc}") from exc
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].split(",")[:5] != TRACK_CSV_HEADER.split(","):
        raise InputError(f"{path}: expected header '{TRACK_CSV_HEADER}'")
    cols = [[], [], [], [], []]
    for ln in lines[1:]:
        parts = ln.split(",")
        for j in range(5):
            cols[j].append(float(parts[j]))
    return TrackSeries(*[np.asarray(c) for c in cols])
