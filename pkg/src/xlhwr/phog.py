"""Pyramid histogram of oriented gradients and sliding-window sequencing."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import BinaryImage, Component

N_BINS = 8
N_LEVELS = 2
PHOG_DIM = N_BINS * sum(4 ** level for level in range(N_LEVELS + 1))   # 168
MODIFIER_SIZE = 150
WINDOW_WIDTH = 8
WINDOW_SHIFT = 3


@dataclass
class FeatureSequence:
    frames: np.ndarray     # (T, 168)
    width: int = WINDOW_WIDTH
    shift: int = WINDOW_SHIFT
    x_offset: int = 0      # image column of frame 0's left edge

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2 or len(self.frames) == 0:
            raise ValueError("a feature sequence needs at least one frame")

    def __len__(self) -> int:
        return len(self.frames)

    def frame_x_range(self, start: int, end: int) -> tuple[int, int]:
        """Image columns covered by frames start..end inclusive."""
        return (self.x_offset + start * self.shift,
                self.x_offset + end * self.shift + self.width - 1)


def _gradients(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p = np.pad(img, 1, mode="edge")
    gx = (p[1:-1, 2:] - p[1:-1, :-2]) / 2.0
    gy = (p[2:, 1:-1] - p[:-2, 1:-1]) / 2.0
    return gx, gy


def _cell_edges(n: int, cells: int) -> np.ndarray:
    return (np.arange(cells + 1) * n) // cells


def phog(region, levels: int = N_LEVELS, bins: int = N_BINS) -> np.ndarray:
    """PHOG vector of a grayscale region (2-D array or image object).

    Level blocks are ordered coarse to fine, cells row-major within a level,
    bins by ascending unsigned orientation; each level is L1-normalized or
    left all-zero.
    """
    arr = np.asarray(getattr(region, "data", region), dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError("phog needs a non-empty 2-D region")
    h, w = arr.shape
    if h < 4 or w < 4:
        raise ValueError(f"phog region {h}x{w} is smaller than 4x4")
    gx, gy = _gradients(arr)
    mag = np.hypot(gx, gy)
    ang = np.mod(np.degrees(np.arctan2(gy, gx)), 180.0)
    b = np.minimum((ang * bins / 180.0).astype(np.int64), bins - 1)
    out = []
    for level in range(levels + 1):
        n = 2 ** level
        re = _cell_edges(h, n)
        ce = _cell_edges(w, n)
        row_cell = np.searchsorted(re, np.arange(h), side="right") - 1
        col_cell = np.searchsorted(ce, np.arange(w), side="right") - 1
        cell = row_cell[:, None] * n + col_cell[None, :]
        hist = np.bincount((cell * bins + b).ravel(), weights=mag.ravel(), minlength=n * n * bins)
        total = hist.sum()
        if total > 0:
            hist = hist / total
        out.append(hist)
    return np.concatenate(out)


def window_features(middle: BinaryImage, width: int = WINDOW_WIDTH, shift: int = WINDOW_SHIFT,
                    x_offset: int = 0) -> FeatureSequence:
    if width < 4:
        raise ValueError("window width must be >= 4")
    if not 1 <= shift <= width:
        raise ValueError("window shift must be in 1..width")
    img = np.where(middle.data, 255.0, 0.0)
    h, w = img.shape
    if h < 4:
        img = np.pad(img, ((0, 4 - h), (0, 0)))
    if w < width:
        img = np.pad(img, ((0, 0), (0, width - w)))
        w = width
    frames = [phog(img[:, x:x + width]) for x in range(0, w - width + 1, shift)]
    return FeatureSequence(np.stack(frames), width, shift, x_offset)


def resize_nearest(img: np.ndarray, size: int = MODIFIER_SIZE) -> np.ndarray:
    h, w = img.shape
    rows = ((2 * np.arange(size) + 1) * h) // (2 * size)
    cols = ((2 * np.arange(size) + 1) * w) // (2 * size)
    return img[np.ix_(rows, cols)]


def modifier_features(comp: Component | BinaryImage) -> np.ndarray:
    raster = comp.raster() if isinstance(comp, Component) else comp
    if not raster.data.any():
        raise ValueError("modifier component is empty")
    big = resize_nearest(raster.data, MODIFIER_SIZE)
    return phog(np.where(big, 255.0, 0.0))
