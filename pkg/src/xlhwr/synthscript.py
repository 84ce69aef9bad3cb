"""Parametric synthetic scripts and word renderer with zone ground truth.

A script is a pool of middle-zone base glyphs plus upper and lower modifier
glyphs.  Composite characters are (base, optional upper, optional lower)
triples named by a decomposition table.  Words are drawn as base glyphs
hanging from a shared headline (matra), with modifiers above or below the
base they belong to.

Canvas layout at the default height of 64 rows::

    rows  2..15   upper modifiers
    rows 18..20   matra band
    rows 21..46   middle-zone bases
    rows 50..61   lower modifiers
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .raster import GrayImage, save_pgm

CANVAS_H = 64
UPPER_TOP, UPPER_BOTTOM = 2, 15
MATRA_TOP, MATRA_THICK = 18, 3
MIDDLE_TOP, MIDDLE_BOTTOM = 21, 46
LOWER_TOP, LOWER_BOTTOM = 50, 61
GLYPH_W = 30
GLYPH_GAP = 6
MODIFIER_FRAC = 0.6

ZONES = ("middle", "upper", "lower")


@dataclass(frozen=True)
class GlyphDef:
    glyph_id: str
    strokes: tuple[tuple[tuple[float, float], ...], ...]
    zone: str = "middle"

    def __post_init__(self):
        if not self.strokes:
            raise ValueError(f"glyph {self.glyph_id} has no strokes")
        if self.zone not in ZONES:
            raise ValueError(f"unknown zone {self.zone!r}")
        for stroke in self.strokes:
            for x, y in stroke:
                if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
                    raise ValueError(f"glyph {self.glyph_id} point ({x}, {y}) outside unit box")


@dataclass(frozen=True)
class Decomposition:
    base: str
    upper: str | None = None
    lower: str | None = None


@dataclass
class SyntheticScript:
    script_id: str
    middle: list[GlyphDef]
    upper: list[GlyphDef]
    lower: list[GlyphDef]
    table: dict[str, Decomposition]
    has_matra: bool = True

    def __post_init__(self):
        ids = [g.glyph_id for g in self.middle + self.upper + self.lower]
        if len(set(ids)) != len(ids):
            raise ValueError("glyph ids must be unique")
        known = set(ids)
        for ch, d in self.table.items():
            for part in (d.base, d.upper, d.lower):
                if part is not None and part not in known:
                    raise ValueError(f"decomposition of {ch!r} references unknown glyph {part!r}")

    @property
    def glyphs(self) -> dict[str, GlyphDef]:
        return {g.glyph_id: g for g in self.middle + self.upper + self.lower}

    def chars(self) -> list[str]:
        return list(self.table)

    def compose(self, base: str, upper: str | None = None, lower: str | None = None) -> str | None:
        """Inverse table lookup; None when the combination is not a character."""
        key = Decomposition(base, upper, lower)
        for ch, d in self.table.items():
            if d == key:
                return ch
        return None

    # ------------------------------------------------------------ persistence
    def to_json(self) -> str:
        doc = {
            "script_id": self.script_id,
            "has_matra": self.has_matra,
            "glyphs": [{"id": g.glyph_id, "zone": g.zone,
                        "strokes": [[list(p) for p in s] for s in g.strokes]}
                       for g in self.middle + self.upper + self.lower],
            "table": {ch: [d.base, d.upper, d.lower] for ch, d in self.table.items()},
        }
        return json.dumps(doc, indent=1, ensure_ascii=False)

    @classmethod
    def from_json(cls, text: str) -> "SyntheticScript":
        doc = json.loads(text)
        pools: dict[str, list[GlyphDef]] = {z: [] for z in ZONES}
        for g in doc["glyphs"]:
            strokes = tuple(tuple((float(x), float(y)) for x, y in s) for s in g["strokes"])
            pools[g["zone"]].append(GlyphDef(g["id"], strokes, g["zone"]))
        table = {ch: Decomposition(*parts) for ch, parts in doc["table"].items()}
        return cls(doc["script_id"], pools["middle"], pools["upper"], pools["lower"],
                   table, bool(doc.get("has_matra", True)))


def composite_id(base: str, upper: str | None, lower: str | None) -> str:
    name = base
    if upper:
        name += "^" + upper.split(".")[-1]
    if lower:
        name += "_" + lower.split(".")[-1]
    return name


def full_table(middle: list[GlyphDef], upper: list[GlyphDef], lower: list[GlyphDef]) -> dict[str, Decomposition]:
    table = {}
    for b in middle:
        for u in [None] + [g.glyph_id for g in upper]:
            for lo in [None] + [g.glyph_id for g in lower]:
                table[composite_id(b.glyph_id, u, lo)] = Decomposition(b.glyph_id, u, lo)
    return table


# ------------------------------------------------------------ glyph shapes

def _glyph_bitmap(strokes, size: int = 16) -> np.ndarray:
    img = Image.new("L", (size, size), 0)
    draw = ImageDraw.Draw(img)
    for s in strokes:
        pts = [(x * (size - 1), y * (size - 1)) for x, y in s]
        draw.line(pts, fill=255, width=2)
    arr = np.asarray(img, dtype=np.float64) / 255.0
    # cheap blur so near-misses count as similar
    from scipy.ndimage import uniform_filter
    return uniform_filter(arr, size=3)


def _shape_distance(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sqrt(np.mean((a - b) ** 2)))


def _random_polyline(rng: np.random.Generator, n_pts: int, lo=0.0, hi=1.0) -> list[tuple[float, float]]:
    pts = rng.uniform(lo, hi, size=(n_pts, 2))
    return [(float(x), float(y)) for x, y in pts]


def _middle_strokes(rng: np.random.Generator):
    # a stem hanging from the headline keeps the glyph attached to the matra
    x_top = rng.uniform(0.15, 0.85)
    stem = [(float(x_top), 0.0)] + _random_polyline(rng, int(rng.integers(2, 4)), 0.05, 0.95)
    strokes = [stem]
    for _ in range(int(rng.integers(1, 3))):
        strokes.append(_random_polyline(rng, int(rng.integers(2, 5))))
    # pin horizontal extent so every base spans its cell
    strokes.append([(0.0, float(rng.uniform(0.2, 0.8))), (float(rng.uniform(0.3, 0.7)), float(rng.uniform(0.2, 0.8)))])
    strokes.append([(float(rng.uniform(0.3, 0.7)), float(rng.uniform(0.2, 0.9))), (1.0, float(rng.uniform(0.2, 0.9)))])
    return strokes


def _modifier_strokes(rng: np.random.Generator):
    # one connected polyline so a modifier is a single component
    return [_random_polyline(rng, int(rng.integers(3, 6)), 0.0, 1.0)]


def _sample_pool(rng, n: int, zone: str, make, min_dist: float,
                 avoid: list[np.ndarray] | None = None, max_tries: int = 2000) -> list[list]:
    shapes: list[list] = []
    bitmaps: list[np.ndarray] = list(avoid or [])
    tries = 0
    dist = min_dist
    while len(shapes) < n:
        strokes = make(rng)
        bm = _glyph_bitmap(strokes)
        tries += 1
        if tries % max_tries == 0:
            dist *= 0.9  # relax when the pool is crowded
        if all(_shape_distance(bm, o) >= dist for o in bitmaps):
            shapes.append(strokes)
            bitmaps.append(bm)
    return shapes


def _freeze(strokes) -> tuple:
    return tuple(tuple((float(np.clip(x, 0, 1)), float(np.clip(y, 0, 1))) for x, y in s) for s in strokes)


MIN_DIST = {"middle": 0.20, "upper": 0.22, "lower": 0.22}


def random_script(n_middle: int, n_upper: int, n_lower: int, seed: int,
                  script_id: str = "S", has_matra: bool = True) -> SyntheticScript:
    if n_middle < 2:
        raise ValueError("a script needs at least 2 middle-zone glyphs")
    if n_upper < 0 or n_lower < 0:
        raise ValueError("modifier counts must be non-negative")
    rng = np.random.default_rng(seed)
    pools = {}
    for zone, n, make in (("middle", n_middle, _middle_strokes),
                          ("upper", n_upper, _modifier_strokes),
                          ("lower", n_lower, _modifier_strokes)):
        shapes = _sample_pool(rng, n, zone, make, MIN_DIST[zone])
        prefix = zone[0] if zone != "middle" else "m"
        pools[zone] = [GlyphDef(f"{script_id}.{prefix}{i:02d}", _freeze(s), zone)
                       for i, s in enumerate(shapes)]
    return SyntheticScript(script_id, pools["middle"], pools["upper"], pools["lower"],
                           full_table(pools["middle"], pools["upper"], pools["lower"]), has_matra)


def derive_script(base: SyntheticScript, overlap: float, seed: int, script_id: str = "T",
                  modifier_overlap: float | None = None) -> tuple[SyntheticScript, dict[str, str]]:
    """Build a target script sharing a fraction of glyphs with `base`.

    Returns the new script and the ground-truth mapping target glyph id ->
    source glyph id for every shared glyph.  `modifier_overlap` defaults to
    `overlap`; it exists for fixtures where only the modifier pools differ.
    """
    if not 0.0 <= overlap <= 1.0:
        raise ValueError(f"overlap {overlap} outside [0, 1]")
    mod_overlap = overlap if modifier_overlap is None else modifier_overlap
    if not 0.0 <= mod_overlap <= 1.0:
        raise ValueError(f"modifier overlap {mod_overlap} outside [0, 1]")
    rng = np.random.default_rng(seed)
    mapping: dict[str, str] = {}
    pools = {}
    for zone, src, frac, make in (("middle", base.middle, overlap, _middle_strokes),
                                  ("upper", base.upper, mod_overlap, _modifier_strokes),
                                  ("lower", base.lower, mod_overlap, _modifier_strokes)):
        n = len(src)
        n_shared = math.ceil(frac * n - 1e-12)
        shared = set(rng.choice(n, size=n_shared, replace=False).tolist()) if n_shared else set()
        src_bitmaps = [_glyph_bitmap(g.strokes) for g in src]
        fresh = iter(_sample_pool(rng, n - n_shared, zone, make, MIN_DIST[zone],
                                  avoid=[src_bitmaps[i] for i in sorted(shared)]))
        entries = []
        for i, g in enumerate(src):
            if i in shared:
                strokes = [[(x + rng.normal(0, 0.02), y + rng.normal(0, 0.02)) for x, y in s]
                           for s in g.strokes]
                entries.append((_freeze(strokes), g.glyph_id))
            else:
                entries.append((_freeze(next(fresh)), None))
        order = rng.permutation(n)
        prefix = zone[0] if zone != "middle" else "m"
        glyphs = []
        for new_idx, old_idx in enumerate(order):
            strokes, src_id = entries[old_idx]
            gid = f"{script_id}.{prefix}{new_idx:02d}"
            glyphs.append(GlyphDef(gid, strokes, zone))
            if src_id is not None:
                mapping[gid] = src_id
        pools[zone] = glyphs
    script = SyntheticScript(script_id, pools["middle"], pools["upper"], pools["lower"],
                             full_table(pools["middle"], pools["upper"], pools["lower"]),
                             base.has_matra)
    return script, mapping


def random_lexicon(script: SyntheticScript, size: int, seed: int, min_len: int = 3,
                   max_len: int = 5, p_upper: float = 0.3, p_lower: float = 0.2) -> list[tuple[str, ...]]:
    """Distinct random words over the script's composite characters."""
    rng = np.random.default_rng(seed)
    words: list[tuple[str, ...]] = []
    seen = set()
    bases = [g.glyph_id for g in script.middle]
    uppers = [g.glyph_id for g in script.upper]
    lowers = [g.glyph_id for g in script.lower]
    while len(words) < size:
        n = int(rng.integers(min_len, max_len + 1))
        word = []
        for _ in range(n):
            b = bases[int(rng.integers(len(bases)))]
            u = uppers[int(rng.integers(len(uppers)))] if uppers and rng.random() < p_upper else None
            lo = lowers[int(rng.integers(len(lowers)))] if lowers and rng.random() < p_lower else None
            word.append(composite_id(b, u, lo))
        w = tuple(word)
        if w not in seen:
            seen.add(w)
            words.append(w)
    return words


# ----------------------------------------------------------------- rendering

@dataclass(frozen=True)
class RenderStyle:
    thickness: int = 2
    slant: float = 0.0          # degrees, positive leans right
    jitter: float = 1.0         # pixels
    scale_noise: float = 0.05   # fraction of glyph width
    pepper: float = 0.0         # fraction of pixels flipped to ink

    def __post_init__(self):
        for name in ("thickness", "jitter", "scale_noise", "pepper"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.jitter > 3.0:
            raise ValueError("jitter amplitude above 3 px breaks zone layout")

    def varied(self, rng: np.random.Generator) -> "RenderStyle":
        """Per-image writer variation around this style."""
        return replace(self,
                       slant=self.slant + float(rng.uniform(-4.0, 4.0)),
                       jitter=float(min(3.0, self.jitter * rng.uniform(0.5, 1.5))))


CLEAN = RenderStyle(thickness=2, slant=0.0, jitter=0.0, scale_noise=0.0, pepper=0.0)


@dataclass
class ModifierTruth:
    zone: str
    label: str
    x_range: tuple[int, int]
    base_index: int


@dataclass
class GroundTruth:
    transcription: tuple[str, ...]
    matra_band: tuple[int, int]
    char_ranges: list[tuple[int, int]]
    modifiers: list[ModifierTruth] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({
            "transcription": list(self.transcription),
            "matra_band": list(self.matra_band),
            "char_ranges": [list(r) for r in self.char_ranges],
            "modifiers": [asdict(m) for m in self.modifiers],
        }, ensure_ascii=False)

    @classmethod
    def from_json(cls, text: str) -> "GroundTruth":
        d = json.loads(text)
        mods = [ModifierTruth(m["zone"], m["label"], tuple(m["x_range"]), m["base_index"])
                for m in d["modifiers"]]
        return cls(tuple(d["transcription"]), tuple(d["matra_band"]),
                   [tuple(r) for r in d["char_ranges"]], mods)


def _draw_layer(shape: tuple[int, int], strokes, x0: float, y0: float, w: float, h: float,
                style: RenderStyle, rng: np.random.Generator, shear: float, y_ref: float) -> np.ndarray:
    img = Image.new("L", (shape[1], shape[0]), 0)
    draw = ImageDraw.Draw(img)
    for s in strokes:
        pts = []
        for x, y in s:
            px = x0 + x * w
            py = y0 + y * h
            if style.jitter > 0:
                px += rng.uniform(-style.jitter, style.jitter)
                # stems keep touching the headline
                if y > 0.0:
                    py += rng.uniform(-style.jitter, style.jitter)
            px += (y_ref - py) * shear
            pts.append((px, py))
        if len(pts) == 1:
            pts = pts * 2
        draw.line(pts, fill=255, width=max(1, int(style.thickness)), joint="curve")
    return np.asarray(img) > 0


def _ink_range(layer: np.ndarray) -> tuple[int, int]:
    cols = np.flatnonzero(layer.any(axis=0))
    return int(cols[0]), int(cols[-1])


def render_word(script: SyntheticScript, word, style: RenderStyle = RenderStyle(),
                seed: int = 0) -> tuple[GrayImage, GroundTruth]:
    word = tuple(word)
    if not word:
        raise ValueError("cannot render an empty word")
    for ch in word:
        if ch not in script.table:
            raise KeyError(f"character {ch!r} not in script {script.script_id}")
    rng = np.random.default_rng(seed)
    glyphs = script.glyphs
    shear = math.tan(math.radians(style.slant))
    margin = 6 + int(math.ceil(abs(shear) * CANVAS_H / 2))
    widths = [GLYPH_W * (1.0 + rng.uniform(-style.scale_noise, style.scale_noise)) for _ in word]
    total_w = int(math.ceil(sum(widths) + GLYPH_GAP * (len(word) - 1))) + 2 * margin
    shape = (CANVAS_H, total_w)
    y_ref = (MIDDLE_TOP + MIDDLE_BOTTOM) / 2.0
    ink = np.zeros(shape, dtype=bool)
    char_ranges, modifiers = [], []
    x = float(margin)
    for i, ch in enumerate(word):
        d = script.table[ch]
        w = widths[i]
        layer = _draw_layer(shape, glyphs[d.base].strokes, x, MIDDLE_TOP, w - 1,
                            MIDDLE_BOTTOM - MIDDLE_TOP, style, rng, shear, y_ref)
        ink |= layer
        char_ranges.append(_ink_range(layer))
        mw = w * MODIFIER_FRAC
        mx = x + (w - mw) / 2.0
        for zone, gid, top, bottom in (("upper", d.upper, UPPER_TOP, UPPER_BOTTOM),
                                       ("lower", d.lower, LOWER_TOP, LOWER_BOTTOM)):
            if gid is None:
                continue
            mlayer = _draw_layer(shape, glyphs[gid].strokes, mx, top, mw - 1, bottom - top,
                                 style, rng, shear, y_ref)
            ink |= mlayer
            modifiers.append(ModifierTruth(zone, gid, _ink_range(mlayer), i))
        x += w + GLYPH_GAP
    band = (MATRA_TOP, MATRA_TOP + MATRA_THICK - 1)
    if script.has_matra:
        x0 = max(0, char_ranges[0][0] - 2)
        x1 = min(total_w - 1, char_ranges[-1][1] + 2)
        ink[band[0]:band[1] + 1, x0:x1 + 1] = True
    if style.pepper > 0:
        ink |= rng.random(shape) < style.pepper
    gray = np.where(ink, 0, 255).astype(np.uint8)
    return GrayImage(gray), GroundTruth(word, band, char_ranges, modifiers)


ZONE_BOX = {
    "middle": (GLYPH_W, MIDDLE_BOTTOM - MIDDLE_TOP + 1),
    "upper": (round(GLYPH_W * MODIFIER_FRAC), UPPER_BOTTOM - UPPER_TOP + 1),
    "lower": (round(GLYPH_W * MODIFIER_FRAC), LOWER_BOTTOM - LOWER_TOP + 1),
}


def render_glyph(glyph: GlyphDef, style: RenderStyle = CLEAN, seed: int = 0) -> np.ndarray:
    """Isolated glyph bitmap (True = ink) at its in-word size; used for templates."""
    rng = np.random.default_rng(seed)
    pad = 4
    w, h = ZONE_BOX[glyph.zone]
    layer = _draw_layer((h + 2 * pad, w + 2 * pad), glyph.strokes, pad, pad, w - 1,
                        h - 1, style, rng, 0.0, 0.0)
    rows = np.flatnonzero(layer.any(axis=1))
    cols = np.flatnonzero(layer.any(axis=0))
    return layer[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1]


def glyph_variants(glyphs: list[GlyphDef], n_variants: int = 5, seed: int = 0) -> list[tuple[str, np.ndarray]]:
    """A clean render plus `n_variants` writer-varied renders of each glyph."""
    out = []
    for g in glyphs:
        out.append((g.glyph_id, render_glyph(g, CLEAN)))
        for k in range(n_variants):
            rng = np.random.default_rng([seed, k])
            out.append((g.glyph_id, render_glyph(g, RenderStyle().varied(rng), seed=k + 1)))
    return out


# ------------------------------------------------------------------ datasets

def gen_dataset(script: SyntheticScript, lexicon, n_images: int, style: RenderStyle,
                seed: int, out_dir: str | Path, vary_style: bool = True) -> Path:
    """Render `n_images` words sampled uniformly from `lexicon` into `out_dir`.

    Writes ``img_NNNNN.pgm`` plus ``img_NNNNN.gt.json`` per image and a
    ``manifest.tsv``; returns the manifest path.
    """
    from .manifest import Manifest, ManifestRow

    lexicon = [tuple(w) for w in lexicon]
    if not lexicon:
        raise ValueError("lexicon is empty")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for idx in range(n_images):
        rng = np.random.default_rng(seed ^ idx)
        word = lexicon[int(rng.integers(len(lexicon)))]
        img_style = style.varied(rng) if vary_style else style
        img, gt = render_word(script, word, img_style, seed=int(rng.integers(2**31)))
        stem = f"img_{idx:05d}"
        save_pgm(img, out / f"{stem}.pgm")
        (out / f"{stem}.gt.json").write_text(gt.to_json(), encoding="utf-8")
        rows.append(ManifestRow(f"{stem}.pgm", word, f"{stem}.gt.json"))
    path = out / "manifest.tsv"
    Manifest(script.script_id, rows, out).save(path)
    return path
