"""Zone segmentation: matra band, upper modifiers, lower modifiers, middle strip."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .raster import (BinaryImage, Component, GrayImage, binarize, connected_components,
                     h_projection, load_pgm, thin)

BAND_FRAC = 0.7          # rows within 70% of the projection peak join the matra band
BUSY_FRAC = 0.10         # busy-zone bottom: last row with >= 10% of peak ink
MATCH_THRESHOLD = 0.6    # normalized cross-correlation needed to split off a lower modifier
BUSY_SMOOTH = 5
MIN_SKELETON = 4         # skeleton pixels needed for an upper segment (drops specks)
MIN_LOWER_INK = 12
MATCH_SIZE = 32
MATCH_BLUR = 2.0


class BlankImageError(ValueError):
    pass


@dataclass
class Template:
    label: str
    image: BinaryImage


@dataclass
class ZoneSplit:
    matra: tuple[int, int]
    middle: BinaryImage                       # residual ink, full canvas
    upper: list[tuple[Component, tuple[int, int]]]
    lower: list[tuple[Component, tuple[int, int]]]
    busy: tuple[int, int]                     # middle-zone rows (top, bottom)
    x_span: tuple[int, int]                   # middle-zone ink columns (first, last)
    matra_ink: int = 0

    def middle_strip(self) -> BinaryImage:
        """Middle zone cropped to busy rows and inked columns."""
        top, bottom = self.busy
        x0, x1 = self.x_span
        return BinaryImage(self.middle.data[top:bottom + 1, x0:x1 + 1])

    def modifiers(self) -> list[tuple[str, Component, tuple[int, int]]]:
        mods = [("upper", c, r) for c, r in self.upper] + [("lower", c, r) for c, r in self.lower]
        return sorted(mods, key=lambda m: (m[2][0], m[0]))


def detect_matra(bin: BinaryImage) -> tuple[int, int]:
    proj = h_projection(bin)
    if proj.sum() == 0:
        raise BlankImageError("no ink: cannot locate a matra band")
    half = max(1, bin.height // 2)
    upper = proj[:half]
    if upper.max() == 0:
        upper = proj
    peak_row = int(np.argmax(upper))
    floor = BAND_FRAC * proj[peak_row]
    top = bottom = peak_row
    while top > 0 and proj[top - 1] >= floor:
        top -= 1
    while bottom + 1 < len(proj) and proj[bottom + 1] >= floor:
        bottom += 1
    return top, bottom


def _components_in(mask: np.ndarray) -> list[Component]:
    return connected_components(BinaryImage(mask))


def extract_upper(bin: BinaryImage, band: tuple[int, int]) -> list[tuple[Component, tuple[int, int]]]:
    """Strokes rising above the matra, cut at the band's top row."""
    top, _ = band
    region = np.zeros_like(bin.data)
    region[:top] = bin.data[:top]
    out = []
    for comp in _components_in(region):
        skel = thin(comp.raster())
        if skel.ink >= MIN_SKELETON:
            out.append((comp, comp.x_range))
    out.sort(key=lambda cr: cr[1])
    return out


def _normalize_shape(img: np.ndarray, size: int = MATCH_SIZE) -> np.ndarray:
    """Centre on a square canvas (aspect kept), box-resample, blur."""
    h, w = img.shape
    side = max(h, w)
    canvas = np.zeros((side, side), dtype=np.uint8)
    y0, x0 = (side - h) // 2, (side - w) // 2
    canvas[y0:y0 + h, x0:x0 + w] = np.where(img, 255, 0)
    arr = np.asarray(Image.fromarray(canvas).resize((size, size), Image.BOX), dtype=np.float64) / 255.0
    return ndimage.gaussian_filter(arr, MATCH_BLUR)


def ncc(a: np.ndarray, b: np.ndarray) -> float:
    """Zero-mean normalized cross-correlation of two equal-shape arrays."""
    a = a - a.mean()
    b = b - b.mean()
    den = np.sqrt((a * a).sum() * (b * b).sum())
    if den == 0:
        return 0.0
    return float((a * b).sum() / den)


def busy_bottom(bin: BinaryImage, band: tuple[int, int]) -> int:
    """Last row of the dense run directly below the matra.

    A row is dense when its 5-row smoothed projection is at least 10% of the
    peak taken over the rows below the band.
    """
    proj = ndimage.uniform_filter1d(h_projection(bin)[band[1] + 1:].astype(np.float64),
                                    BUSY_SMOOTH, mode="nearest")
    if proj.size == 0 or proj.max() == 0:
        return band[1]
    dense = proj >= BUSY_FRAC * proj.max()
    r = int(np.argmax(dense))
    while r + 1 < len(dense) and dense[r + 1]:
        r += 1
    return band[1] + 1 + r


def extract_lower(bin: BinaryImage, band: tuple[int, int], templates: list[Template],
                  below: int | None = None) -> list[tuple[Component, tuple[int, int]]]:
    if not templates:
        return []
    base = busy_bottom(bin, band) if below is None else below
    region = np.zeros_like(bin.data)
    region[base + 1:] = bin.data[base + 1:]
    norm_t = [_normalize_shape(t.image.data) for t in templates]
    out = []
    for comp in _components_in(region):
        if comp.size < MIN_LOWER_INK:
            continue
        cand = _normalize_shape(comp.raster().data)
        score = max(ncc(cand, t) for t in norm_t)
        if score >= MATCH_THRESHOLD:
            out.append((comp, comp.x_range))
    out.sort(key=lambda cr: cr[1])
    return out


def split_zones(img: GrayImage | BinaryImage, templates: list[Template] | None = None) -> ZoneSplit:
    bin = img if isinstance(img, BinaryImage) else binarize(img)
    band = detect_matra(bin)
    upper = extract_upper(bin, band)
    lower = extract_lower(bin, band, templates or [])
    residual = bin.data.copy()
    residual[band[0]:band[1] + 1] = False
    for comp, _ in upper + lower:
        residual[comp.pixels[:, 0], comp.pixels[:, 1]] = False
    matra_ink = int(bin.data[band[0]:band[1] + 1].sum())
    middle = BinaryImage(residual)
    top = band[1] + 1
    bottom = max(busy_bottom(middle, band), min(bin.height - 1, top + 3))
    strip_cols = np.flatnonzero(residual[top:bottom + 1].any(axis=0))
    if len(strip_cols):
        x_span = (int(strip_cols[0]), int(strip_cols[-1]))
    else:
        x_span = (0, bin.width - 1)
    return ZoneSplit(band, middle, upper, lower, (top, bottom), x_span, matra_ink)


def load_templates(directory: str | Path) -> list[Template]:
    """Every ``<label>.pgm`` or ``<label>__<n>.pgm`` in `directory` becomes a template."""
    out = []
    for p in sorted(Path(directory).glob("*.pgm")):
        ink = binarize(load_pgm(p)).data
        rows, cols = np.flatnonzero(ink.any(axis=1)), np.flatnonzero(ink.any(axis=0))
        if len(rows):
            ink = ink[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1]
        out.append(Template(p.stem.split("__")[0], BinaryImage(ink)))
    return out


def save_templates(templates: list[Template], directory: str | Path) -> None:
    from .raster import save_pgm

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    seen: dict[str, int] = {}
    for t in templates:
        k = seen.get(t.label, 0)
        seen[t.label] = k + 1
        # a blank border keeps ink the minority under the polarity rule
        gray = np.pad(np.where(t.image.data, 0, 255).astype(np.uint8), 4, constant_values=255)
        save_pgm(GrayImage(gray), d / f"{t.label}__{k:02d}.pgm")


def templates_from_glyphs(glyph_images) -> list[Template]:
    """Templates from (label, bitmap) pairs or a label -> bitmap dict."""
    items = glyph_images.items() if isinstance(glyph_images, dict) else glyph_images
    return [Template(label, BinaryImage(img)) for label, img in items]
