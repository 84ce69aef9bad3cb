"""Image containers and binary-image primitives."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage
from skimage.morphology import thin as _sk_thin


class PgmError(ValueError):
    """Malformed or unreadable portable graymap."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class GrayImage:
    """8-bit grayscale raster, row-major, shape (height, width)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"GrayImage needs a non-empty 2-D array, got shape {arr.shape}")
        if arr.min(initial=0) < 0 or arr.max(initial=0) > 255:
            raise ValueError("GrayImage intensities must lie in [0, 255]")
        object.__setattr__(self, "data", arr.astype(np.uint8, copy=False))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class BinaryImage:
    """Bit raster; True is ink."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise ValueError(f"BinaryImage needs a 2-D array, got shape {arr.shape}")
        object.__setattr__(self, "data", arr.astype(bool, copy=False))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def ink(self) -> int:
        return int(self.data.sum())

    def as_gray(self) -> GrayImage:
        """Ink as 255 on a 0 background (the feature extractor's convention)."""
        return GrayImage(np.where(self.data, 255, 0).astype(np.uint8))


@dataclass(frozen=True)
class Component:
    """A connected set of ink pixels.

    ``pixels`` is an (n, 2) integer array of (row, col) pairs.  The bounding
    box is inclusive: (x0, y0, x1, y1).
    """

    pixels: np.ndarray
    bbox: tuple[int, int, int, int] = field(init=False)
    centroid: tuple[float, float] = field(init=False)

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.int64).reshape(-1, 2)
        if len(px) == 0:
            raise ValueError("component has no pixels")
        object.__setattr__(self, "pixels", px)
        ys, xs = px[:, 0], px[:, 1]
        object.__setattr__(self, "bbox", (int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max())))
        # centroid as (x, y)
        object.__setattr__(self, "centroid", (float(xs.mean()), float(ys.mean())))

    @property
    def size(self) -> int:
        return len(self.pixels)

    @property
    def x_range(self) -> tuple[int, int]:
        return self.bbox[0], self.bbox[2]

    def raster(self) -> BinaryImage:
        """Tight crop of the component as a binary image."""
        x0, y0, x1, y1 = self.bbox
        out = np.zeros((y1 - y0 + 1, x1 - x0 + 1), dtype=bool)
        out[self.pixels[:, 0] - y0, self.pixels[:, 1] - x0] = True
        return BinaryImage(out)


# --------------------------------------------------------------------- PGM io

def _pgm_tokens(buf: bytes, count: int, pos: int) -> tuple[list[tuple[int, int]], int]:
    """Read `count` whitespace-separated ASCII integers, honouring # comments.

    Returns [(value, offset)] and the position just after the last token.
    """
    out = []
    n = len(buf)
    while len(out) < count:
        while pos < n and (buf[pos:pos + 1].isspace() or buf[pos:pos + 1] == b"#"):
            if buf[pos:pos + 1] == b"#":
                while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            else:
                pos += 1
        if pos >= n:
            raise PgmError("unexpected end of file", pos)
        start = pos
        while pos < n and buf[pos:pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise PgmError(f"expected integer, found {buf[pos:pos + 1]!r}", pos)
        out.append((int(buf[start:pos]), start))
    return out, pos


def load_pgm(path: str | Path) -> GrayImage:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such PGM file: {path}")
    buf = path.read_bytes()
    magic = buf[:2]
    if magic not in (b"P2", b"P5"):
        raise PgmError(f"bad magic {magic!r}, expected P2 or P5", 0)
    header, pos = _pgm_tokens(buf, 3, 2)
    (w, w_off), (h, h_off), (maxval, m_off) = header
    if w < 1:
        raise PgmError("width must be >= 1", w_off)
    if h < 1:
        raise PgmError("height must be >= 1", h_off)
    if not 0 < maxval <= 255:
        raise PgmError(f"maxval {maxval} outside 1..255", m_off)
    if magic == b"P5":
        if pos >= len(buf) or not buf[pos:pos + 1].isspace():
            raise PgmError("missing whitespace after header", pos)
        start = pos + 1
        payload = buf[start:start + w * h]
        if len(payload) < w * h:
            raise PgmError(f"truncated pixel payload: need {w * h} bytes, got {len(payload)}",
                           start + len(payload))
        data = np.frombuffer(payload, dtype=np.uint8).copy()
    else:
        vals, _ = _pgm_tokens(buf, w * h, pos)
        for v, off in vals:
            if v > maxval:
                raise PgmError(f"sample {v} exceeds maxval {maxval}", off)
        data = np.array([v for v, _ in vals], dtype=np.uint8)
    if magic == b"P5" and data.max(initial=0) > maxval:
        bad = int(np.argmax(data > maxval))
        raise PgmError(f"sample exceeds maxval {maxval}", start + bad)
    return GrayImage(data.reshape(h, w))


def save_pgm(img: GrayImage, path: str | Path) -> None:
    """Write canonical raw P5 with maxval 255."""
    header = f"P5 {img.width} {img.height} 255\n".encode("ascii")
    Path(path).write_bytes(header + img.data.tobytes())


# ------------------------------------------------------------- binary ops

def otsu_threshold(hist: np.ndarray) -> int:
    """Threshold t maximizing between-class variance of {<t} vs {>=t}.

    Returns 0 when no split separates two non-empty classes.
    """
    hist = np.asarray(hist, dtype=np.float64)
    levels = np.arange(len(hist), dtype=np.float64)
    total = hist.sum()
    w0 = np.cumsum(hist)[:-1]          # weight of classes below t = 1..255
    m0 = np.cumsum(hist * levels)[:-1]
    w1 = total - w0
    valid = (w0 > 0) & (w1 > 0)
    if not valid.any():
        return 0
    mu0 = np.divide(m0, w0, out=np.zeros_like(m0), where=w0 > 0)
    mu1 = np.divide(m0[-1] + hist[-1] * levels[-1] - m0, w1, out=np.zeros_like(m0), where=w1 > 0)
    between = np.where(valid, w0 * w1 * (mu0 - mu1) ** 2, -1.0)
    return int(np.argmax(between)) + 1


def binarize(img: GrayImage) -> BinaryImage:
    hist = np.bincount(img.data.ravel(), minlength=256)
    t = otsu_threshold(hist)
    if t == 0:
        return BinaryImage(np.zeros(img.data.shape, dtype=bool))
    ink = img.data < t
    if ink.mean() > 0.5:
        ink = ~ink
    return BinaryImage(ink)


_EIGHT = np.ones((3, 3), dtype=bool)


def connected_components(bin: BinaryImage) -> list[Component]:
    labels, n = ndimage.label(bin.data, structure=_EIGHT)
    if n == 0:
        return []
    rows, cols = np.nonzero(labels)
    lab = labels[rows, cols]
    order = np.argsort(lab, kind="stable")
    rows, cols, lab = rows[order], cols[order], lab[order]
    splits = np.flatnonzero(np.diff(lab)) + 1
    comps = [Component(np.stack([r, c], axis=1))
             for r, c in zip(np.split(rows, splits), np.split(cols, splits))]
    comps.sort(key=lambda c: (c.bbox[1], c.bbox[0]))
    return comps


def thin(bin: BinaryImage) -> BinaryImage:
    if not bin.data.any():
        return BinaryImage(bin.data.copy())
    return BinaryImage(_sk_thin(bin.data))


def h_projection(bin: BinaryImage) -> np.ndarray:
    return bin.data.sum(axis=1).astype(np.int64)
