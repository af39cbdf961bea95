"""Frames, frame sequences and media I/O.

Two on-disk layouts are supported:

* a directory of binary netpbm images named ``frame_000000.pgm`` (grayscale,
  P5) or ``frame_000000.ppm`` (RGB, P6), one file per frame, maxval 255;
* a single raw container file holding all frames back to back, row major and
  channel interleaved, one byte per sample, described by a text sidecar
  ``<file>.hdr`` with ``key = value`` lines for ``width``, ``height``,
  ``channels``, ``fps`` and ``count``.

Byte samples are mapped to float intensities in [0, 1] by dividing by 255.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BoundsError, DecodeError, InputError, ShapeError

LUMA_WEIGHTS = (0.299, 0.587, 0.114)

FRAME_NAME_RE = re.compile(r"^frame_(\d{6})\.(pgm|ppm)$")


@dataclass(frozen=True)
class Frame:
    """One image: float intensities in [0, 1], shape (height, width, channels).

    ``channels`` is 1 (grayscale) or 3 (RGB).  ``mask`` marks valid pixels;
    operations must ignore invalid ones.  Arrays are copied and frozen so a
    frame never changes after construction.
    """

    intensities: np.ndarray
    mask: np.ndarray = field(default=None)

    def __post_init__(self):
        arr = np.asarray(self.intensities, dtype=float)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise ShapeError(f"frame must be (h, w, 1|3), got {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ShapeError(f"frame must be at least 1x1, got {arr.shape}")
        if np.min(arr) < -1e-9 or np.max(arr) > 1 + 1e-9:
            raise InputError("intensities must lie in [0, 1]")
        arr = np.clip(arr, 0.0, 1.0).copy()
        arr.flags.writeable = False
        mask = self.mask
        if mask is None:
            mask = np.ones(arr.shape[:2], dtype=bool)
        else:
            mask = np.asarray(mask, dtype=bool)
            if mask.shape != arr.shape[:2]:
                raise ShapeError(
                    f"mask shape {mask.shape} does not match frame {arr.shape[:2]}"
                )
            mask = mask.copy()
        mask.flags.writeable = False
        object.__setattr__(self, "intensities", arr)
        object.__setattr__(self, "mask", mask)

    @property
    def height(self):
        return self.intensities.shape[0]

    @property
    def width(self):
        return self.intensities.shape[1]

    @property
    def channels(self):
        return self.intensities.shape[2]


@dataclass(frozen=True)
class FrameSequence:
    """Ordered frames with a shared size and a frame rate in frames/second."""

    frames: tuple
    frame_rate: float

    def __post_init__(self):
        frames = tuple(self.frames)
        if not frames:
            raise InputError("a frame sequence needs at least one frame")
        if not self.frame_rate > 0:
            raise InputError("frame_rate must be positive")
        shape = frames[0].intensities.shape
        for i, f in enumerate(frames):
            if f.intensities.shape != shape:
                raise ShapeError(
                    f"frame {i} has shape {f.intensities.shape}, expected {shape}"
                )
        object.__setattr__(self, "frames", frames)

    def __len__(self):
        return len(self.frames)

    def __getitem__(self, i):
        return self.frames[i]

    @property
    def dt(self):
        return 1.0 / self.frame_rate


@dataclass(frozen=True)
class Region:
    """Axis-aligned pixel rectangle: top-left corner (x0, y0), width, height."""

    x0: int
    y0: int
    width: int
    height: int

    def __post_init__(self):
        for name in ("x0", "y0", "width", "height"):
            v = getattr(self, name)
            if int(v) != v:
                raise InputError(f"region {name} must be an integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        if self.width < 1 or self.height < 1:
            raise InputError("region width and height must be >= 1")

    @property
    def x1(self):
        return self.x0 + self.width

    @property
    def y1(self):
        return self.y0 + self.height

    @property
    def center(self):
        return (self.x0 + (self.width - 1) / 2.0, self.y0 + (self.height - 1) / 2.0)

    @property
    def area(self):
        return self.width * self.height


def crop(frame: Frame, region: Region) -> Frame:
    """Cut a region out of a frame.  The region must lie fully inside it."""
    if region.x0 < 0 or region.y0 < 0 or region.x1 > frame.width or region.y1 > frame.height:
        raise BoundsError(
            f"region {region} exceeds frame bounds {frame.width}x{frame.height}"
        )
    sub = frame.intensities[region.y0 : region.y1, region.x0 : region.x1, :]
    sub_mask = frame.mask[region.y0 : region.y1, region.x0 : region.x1]
    return Frame(sub, sub_mask)


def to_grayscale(frame: Frame) -> Frame:
    """Collapse RGB to one luma channel; grayscale frames pass through."""
    if frame.channels == 1:
        return frame
    w = np.asarray(LUMA_WEIGHTS)
    gray = frame.intensities @ w
    return Frame(gray[:, :, None], frame.mask)


def _read_token(data: bytes, pos: int):
    # netpbm tokens are separated by whitespace; '#' starts a comment to EOL
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c.isspace():
            pos += 1
        elif c == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise DecodeError("unexpected end of netpbm header")
    return data[start:pos], pos


def decode_netpbm(data: bytes, origin: str = "<bytes>") -> Frame:
    """Decode a binary P5 (grayscale) or P6 (RGB) image with maxval 255."""
    try:
        magic, pos = _read_token(data, 0)
        if magic not in (b"P5", b"P6"):
            raise DecodeError(f"{origin}: unsupported netpbm magic {magic!r}")
        channels = 1 if magic == b"P5" else 3
        fields = []
        for _ in range(3):
            tok, pos = _read_token(data, pos)
            if not tok.isdigit():
                raise DecodeError(f"{origin}: bad netpbm header token {tok!r}")
            fields.append(int(tok))
        width, height, maxval = fields
        if maxval != 255:
            raise DecodeError(f"{origin}: only maxval 255 is supported, got {maxval}")
        pos += 1  # single whitespace byte after maxval
        count = width * height * channels
        payload = data[pos : pos + count]
        if len(payload) != count:
            raise DecodeError(
                f"{origin}: truncated payload, expected {count} bytes, got {len(payload)}"
            )
        arr = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, channels)
    except DecodeError:
        raise
    except Exception as exc:  # malformed beyond recognition
        raise DecodeError(f"{origin}: {exc}") from exc
    return Frame(arr.astype(float) / 255.0)


def encode_netpbm(frame: Frame) -> bytes:
    """Encode a frame as binary P5/P6 with maxval 255 (intensities quantized)."""
    magic = b"P5" if frame.channels == 1 else b"P6"
    body = np.rint(frame.intensities * 255.0).astype(np.uint8).tobytes()
    header = magic + b"\n%d %d\n255\n" % (frame.width, frame.height)
    return header + body


def write_netpbm(frame: Frame, path) -> None:
    Path(path).write_bytes(encode_netpbm(frame))


def _parse_header_text(text: str, origin: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DecodeError(f"{origin}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = value
    return out


def _load_directory(path: Path, fps) -> FrameSequence:
    entries = []
    for child in path.iterdir():
        m = FRAME_NAME_RE.match(child.name)
        if m:
            entries.append((int(m.group(1)), child))
    if not entries:
        raise DecodeError(f"{path}: no frame_NNNNNN.pgm/ppm files found")
    entries.sort()
    if fps is None:
        raise InputError(f"{path}: fps must be given for frame directories")
    frames = []
    for index, child in entries:
        try:
            data = child.read_bytes()
        except OSError as exc:
            raise DecodeError(f"frame {index}: cannot read {child}: {exc}") from exc
        try:
            frames.append(decode_netpbm(data, origin=child.name))
        except DecodeError as exc:
            raise DecodeError(f"frame {index}: {exc}") from exc
    return FrameSequence(tuple(frames), float(fps))


def _load_raw(path: Path, fps) -> FrameSequence:
    header_path = Path(str(path) + ".hdr")
    if not header_path.exists():
        raise DecodeError(f"{path}: missing sidecar header {header_path.name}")
    fields = _parse_header_text(header_path.read_text(), str(header_path))
    try:
        width = int(fields["width"])
        height = int(fields["height"])
        channels = int(fields["channels"])
        count = int(fields["count"])
        header_fps = float(fields["fps"])
    except KeyError as exc:
        raise DecodeError(f"{header_path}: missing header key {exc}") from exc
    except ValueError as exc:
        raise DecodeError(f"{header_path}: {exc}") from exc
    if channels not in (1, 3):
        raise DecodeError(f"{header_path}: channels must be 1 or 3, got {channels}")
    data = path.read_bytes()
    frame_bytes = width * height * channels
    if len(data) != frame_bytes * count:
        raise DecodeError(
            f"{path}: payload is {len(data)} bytes, header implies {frame_bytes * count}"
        )
    arr = np.frombuffer(data, dtype=np.uint8).reshape(count, height, width, channels)
    frames = tuple(Frame(arr[i].astype(float) / 255.0) for i in range(count))
    return FrameSequence(frames, float(fps) if fps is not None else header_fps)


def load_frame_sequence(path, fps=None) -> FrameSequence:
    """Load a frame directory or a raw container file as a FrameSequence.

    ``fps`` is required for directories and overrides the header for raw
    containers when given.
    """
    p = Path(path)
    if p.is_dir():
        return _load_directory(p, fps)
    if p.is_file():
        return _load_raw(p, fps)
    raise DecodeError(f"{path}: no such file or directory")


def save_frame_directory(seq: FrameSequence, path) -> None:
    """Write a sequence as frame_NNNNNN.pgm/ppm files into a directory."""
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    ext = "pgm" if seq[0].channels == 1 else "ppm"
    for i, frame in enumerate(seq.frames):
        write_netpbm(frame, p / f"frame_{i:06d}.{ext}")


def save_raw_sequence(seq: FrameSequence, path) -> None:
    """Write a sequence as a raw container plus its text sidecar header."""
    p = Path(path)
    first = seq[0]
    chunks = [
        np.rint(f.intensities * 255.0).astype(np.uint8).tobytes() for f in seq.frames
    ]
    p.write_bytes(b"".join(chunks))
    header = (
        f"width = {first.width}\n"
        f"height = {first.height}\n"
        f"channels = {first.channels}\n"
        f"fps = {float(seq.frame_rate)!r}\n"
        f"count = {len(seq)}\n"
    )
    Path(str(p) + ".hdr").write_text(header)
