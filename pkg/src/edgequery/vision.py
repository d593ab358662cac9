"""Frame-difference foreground detection.

Three consecutive sampled frames go in, filtered bounding boxes of moving
objects come out::

    D1 = |f_k - f_{k-1}|,  D2 = |f_{k+1} - f_k|
    Da = D1 & D2  ->  grayscale  ->  threshold  ->  dilate  ->  erode  ->  boxes
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np

from . import kernels

MAXVAL = 255


@dataclass(frozen=True)
class Frame:
    """8-bit image, ``data`` shaped ``(height, width, channels)``."""

    data: np.ndarray
    camera_id: str = ""
    capture_time: float = 0.0

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3 or data.shape[2] not in (1, 3):
            raise ValueError(f"frame data must be HxW, HxWx1 or HxWx3, got shape {data.shape}")
        if data.dtype != np.uint8:
            if data.size and (data.min() < 0 or data.max() > 255):
                raise ValueError("frame samples must lie in [0, 255]")
            data = data.astype(np.uint8)
        object.__setattr__(self, "data", np.ascontiguousarray(data))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def with_data(self, data: np.ndarray) -> "Frame":
        return Frame(data, self.camera_id, self.capture_time)


@dataclass(frozen=True)
class BinaryMask:
    data: np.ndarray  # (height, width) uint8 in {0, MAXVAL}

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class BoundingBox:
    x: int
    y: int
    w: int
    h: int

    @property
    def area(self) -> int:
        return self.w * self.h

    @property
    def aspect(self) -> float:
        return self.w / self.h


@dataclass(frozen=True)
class DetectionConfig:
    threshold: int = 25
    maxval: int = MAXVAL
    dilation_radius: int = 2
    erosion_radius: int = 1
    min_box_area_fraction: float = 0.001
    aspect_ratio_bounds: Tuple[float, float] = (0.25, 4.0)
    sample_interval_s: float = 1.0

    def __post_init__(self):
        if not 1 <= self.threshold <= 254:
            raise ValueError("threshold must be in [1, 254]")
        if self.maxval != MAXVAL:
            raise ValueError("only 8-bit images (maxval 255) are supported")
        if self.dilation_radius < 0 or self.erosion_radius < 0:
            raise ValueError("morphology radii must be >= 0")
        if not 0 < self.min_box_area_fraction < 1:
            raise ValueError("min_box_area_fraction must be in (0, 1)")
        low, high = self.aspect_ratio_bounds
        if not (0 < low <= high) or abs(low * high - 1.0) > 1e-9:
            raise ValueError("aspect_ratio_bounds must be (1/r, r) with r >= 1")
        if self.sample_interval_s <= 0:
            raise ValueError("sample_interval_s must be > 0")


def _check_same_shape(a: Frame, b: Frame) -> None:
    if a.data.shape != b.data.shape:
        raise ValueError(f"frame shape mismatch: {a.data.shape} vs {b.data.shape}")


def abs_diff(a: Frame, b: Frame) -> Frame:
    _check_same_shape(a, b)
    hi = np.maximum(a.data, b.data)
    lo = np.minimum(a.data, b.data)
    return a.with_data(hi - lo)


def conjunction(d1: Frame, d2: Frame) -> Frame:
    _check_same_shape(d1, d2)
    return d1.with_data(np.bitwise_and(d1.data, d2.data))


def to_grayscale(f: Frame) -> Frame:
    """ITU-R 601 luma, rounded half up; 1-channel frames pass through."""
    if f.channels == 1:
        return f
    rgb = f.data.astype(np.int32)
    # integer weights per mille keep the rounding exact
    luma = (299 * rgb[:, :, 0] + 587 * rgb[:, :, 1] + 114 * rgb[:, :, 2] + 500) // 1000
    return f.with_data(luma.astype(np.uint8))


def binarize(g: Frame, cfg: DetectionConfig) -> BinaryMask:
    if g.channels != 1:
        raise ValueError("binarize expects a 1-channel frame")
    plane = g.data[:, :, 0]
    return BinaryMask(np.where(plane > cfg.threshold, cfg.maxval, 0).astype(np.uint8))


def dilate(m: BinaryMask, radius: int) -> BinaryMask:
    if radius < 0:
        raise ValueError("radius must be >= 0")
    return BinaryMask(kernels.rank_filter(m.data, radius, use_max=True))


def erode(m: BinaryMask, radius: int) -> BinaryMask:
    if radius < 0:
        raise ValueError("radius must be >= 0")
    return BinaryMask(kernels.rank_filter(m.data, radius, use_max=False))


def extract_boxes(m: BinaryMask) -> List[BoundingBox]:
    """One tight box per 8-connected component, ordered by top-left (y, x)."""
    return [BoundingBox(int(x), int(y), int(w), int(h)) for x, y, w, h in kernels.component_boxes(m.data)]


def box_passes(box: BoundingBox, frame_area: int, cfg: DetectionConfig) -> bool:
    low, high = cfg.aspect_ratio_bounds
    if box.area < cfg.min_box_area_fraction * frame_area:
        return False
    return low <= box.aspect <= high


def detect(f_prev: Frame, f_cur: Frame, f_next: Frame, cfg: DetectionConfig = DetectionConfig()) -> List[BoundingBox]:
    _check_same_shape(f_prev, f_cur)
    _check_same_shape(f_cur, f_next)
    d1 = abs_diff(f_cur, f_prev)
    d2 = abs_diff(f_next, f_cur)
    mask = binarize(to_grayscale(conjunction(d1, d2)), cfg)
    mask = erode(dilate(mask, cfg.dilation_radius), cfg.erosion_radius)
    area = f_cur.width * f_cur.height
    return [b for b in extract_boxes(mask) if box_passes(b, area, cfg)]


def crop(f: Frame, box: BoundingBox) -> np.ndarray:
    return f.data[box.y : box.y + box.h, box.x : box.x + box.w]


# ---------------------------------------------------------------------------
# binary PGM (P5) / PPM (P6) with maxval 255
# ---------------------------------------------------------------------------

PathLike = Union[str, os.PathLike]


def _read_token(buf: bytes, pos: int) -> Tuple[bytes, int]:
    n = len(buf)
    while pos < n:
        c = buf[pos : pos + 1]
        if c == b"#":
            while pos < n and buf[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not buf[pos : pos + 1].isspace() and buf[pos : pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise ValueError("truncated PNM header")
    return buf[start:pos], pos


def read_pnm(path: PathLike, camera_id: str = "", capture_time: float = 0.0) -> Frame:
    buf = Path(path).read_bytes()
    magic, pos = _read_token(buf, 0)
    if magic not in (b"P5", b"P6"):
        raise ValueError(f"{path}: unsupported PNM magic {magic!r} (binary P5/P6 only)")
    width, pos = _read_token(buf, pos)
    height, pos = _read_token(buf, pos)
    maxval, pos = _read_token(buf, pos)
    width, height, maxval = int(width), int(height), int(maxval)
    if maxval != MAXVAL:
        raise ValueError(f"{path}: maxval must be 255, got {maxval}")
    pos += 1  # single whitespace byte after maxval
    channels = 1 if magic == b"P5" else 3
    size = width * height * channels
    raw = buf[pos : pos + size]
    if len(raw) != size:
        raise ValueError(f"{path}: expected {size} bytes of pixel data, found {len(raw)}")
    data = np.frombuffer(raw, dtype=np.uint8).reshape(height, width, channels)
    return Frame(data.copy(), camera_id, capture_time)


def write_pnm(path: PathLike, frame: Frame) -> None:
    magic = b"P5" if frame.channels == 1 else b"P6"
    header = b"%s\n%d %d\n255\n" % (magic, frame.width, frame.height)
    Path(path).write_bytes(header + frame.data.tobytes())


def load_frame_sequence(directory: PathLike, camera_id: str = "", interval_s: float = 1.0) -> List[Frame]:
    """All ``*.pgm`` / ``*.ppm`` files in ``directory``, in filename order."""
    paths = sorted(p for p in Path(directory).iterdir() if p.suffix.lower() in (".pgm", ".ppm"))
    return [read_pnm(p, camera_id, k * interval_s) for k, p in enumerate(paths)]


def detect_sequence(frames: Sequence[Frame], cfg: DetectionConfig = DetectionConfig()) -> List[List[BoundingBox]]:
    """Boxes for every interior frame ``k`` of a sequence (``1 <= k < len-1``)."""
    return [detect(frames[k - 1], frames[k], frames[k + 1], cfg) for k in range(1, len(frames) - 1)]
