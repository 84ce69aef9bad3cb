"""Cross-script word recognition.

The middle zone is decoded against the source-mapped mid-level lexicon, the
N best hypotheses are aligned back to image columns, classified modifiers
are attached to nearby characters, and the resulting candidate words are
ranked against the target lexicon by edit distance.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .ghmm import Alignment, HmmSet, decode_nbest
from .phog import FeatureSequence, window_features
from .raster import GrayImage
from .synthscript import Decomposition
from .xmap import LexiconTriple, Lut, map_lexicon, resolve_one_to_many
from .zoneseg import Template, ZoneSplit, split_zones

CANDIDATE_CAP = 256
DEFAULT_TOPN = 5


@dataclass
class RecognitionResult:
    candidates: list[tuple[tuple[str, ...], tuple[int, float]]]   # (word, (distance, -loglik))
    alignment: Alignment | None
    modifiers: list[tuple[str, str, int]] = field(default_factory=list)   # (zone, target label, char index)

    @property
    def chosen(self) -> tuple[str, ...]:
        return self.candidates[0][0]

    @property
    def words(self) -> list[tuple[str, ...]]:
        return [w for w, _ in self.candidates]


@dataclass(frozen=True)
class RetrievalMetricsRec:
    top1: float
    top5: float


def levenshtein(a: Sequence, b: Sequence) -> int:
    """Unit-cost edit distance, two-row dynamic programme."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def lexicon_rank(candidates: Sequence[Sequence[str]], lexicon: Sequence[Sequence[str]],
                 fallback: Sequence[str] | None = None) -> tuple[tuple[str, ...], int]:
    """Closest lexicon word to any candidate; ties keep lexicon order.

    With no candidates the bare `fallback` word is ranked instead.
    """
    if not lexicon:
        raise ValueError("empty lexicon")
    cands = [tuple(c) for c in candidates] or ([tuple(fallback)] if fallback is not None else [])
    if not cands:
        raise ValueError("no candidates and no fallback word")
    best, best_d = None, None
    for w in lexicon:
        d = min(levenshtein(c, w) for c in cands)
        if best_d is None or d < best_d:
            best, best_d = tuple(w), d
    return best, best_d


def char_x_ranges(alignment: Alignment, seq: FeatureSequence, image_width: int) -> list[tuple[int, int]]:
    """Per-character column ranges, widened so they tile the whole image."""
    spans = [seq.frame_x_range(s, e) for s, e in alignment.spans]
    cuts = [0]
    for (_, prev_end), (start, _) in zip(spans, spans[1:]):
        cuts.append(max(cuts[-1], (start + prev_end + 1) // 2))
    cuts.append(image_width)
    return [(cuts[i], max(cuts[i], cuts[i + 1] - 1)) for i in range(len(spans))]


def _owner(ranges: Sequence[tuple[int, int]], x_range: tuple[int, int]) -> int:
    centre = (x_range[0] + x_range[1]) / 2.0
    for i, (a, b) in enumerate(ranges):
        if a <= centre <= b:
            return i
    dists = [min(abs(centre - a), abs(centre - b)) for a, b in ranges]
    return int(np.argmin(dists))


def _compose_index(table: Mapping[str, Decomposition]) -> dict[tuple, str]:
    return {(d.base, d.upper, d.lower): ch for ch, d in table.items()}


def _fallback_token(base: str, upper: str | None, lower: str | None) -> str:
    return base + (f"^{upper}" if upper else "") + (f"_{lower}" if lower else "")


def associate_modifiers(char_ranges: Sequence[tuple[int, int]],
                        modifiers: Sequence[tuple[str, str, tuple[int, int]]],
                        base_word: Sequence[str],
                        table: Mapping[str, Decomposition],
                        cap: int = CANDIDATE_CAP) -> list[tuple[str, ...]]:
    """Candidate target words from a middle-zone word and located modifiers.

    Each modifier may belong to the character under its centre or to either
    neighbour. Placements are enumerated with the strict one first, so the
    first candidate is always the strict reading. Once the product would
    exceed `cap`, remaining modifiers keep their strict placement only. When
    two modifiers of one zone land on the same character the earlier one in
    the enumeration wins.
    """
    base_word = tuple(base_word)
    if not modifiers:
        return [base_word]
    n = len(base_word)
    options = []
    size = 1
    for zone, label, xr in modifiers:
        i = _owner(char_ranges, xr)
        places = [i] + [j for j in (i - 1, i + 1) if 0 <= j < n]
        if size * len(places) > cap:
            places = [i]
        size *= len(places)
        options.append((zone, label, places))
    index = _compose_index(table)
    out, seen = [], set()
    for choice in itertools.product(*(p for _, _, p in options)):
        upper: dict[int, str] = {}
        lower: dict[int, str] = {}
        for (zone, label, _), pos in zip(options, choice):
            slot = upper if zone == "upper" else lower
            slot.setdefault(pos, label)
        word = []
        for k, b in enumerate(base_word):
            u, lo = upper.get(k), lower.get(k)
            word.append(index.get((b, u, lo)) or _fallback_token(b, u, lo))
        word = tuple(word)
        if word not in seen:
            seen.add(word)
            out.append(word)
    return out


def best_inverse(lut: Lut, source_label: str) -> str | None:
    """Target character most often recognized as `source_label`."""
    targets = lut.inverse().get(source_label)
    if not targets:
        return None
    return max(targets, key=lambda t: (lut.hist.get(t, {}).get(source_label, 0), -targets.index(t)))


@dataclass
class Recognizer:
    """Everything needed to read target-script words with source models."""

    source: HmmSet
    luts: Mapping[str, Lut]
    triple: LexiconTriple
    table: Mapping[str, Decomposition]
    modifier_models: Mapping[str, object] = field(default_factory=dict)   # zone -> SvmModel
    templates: list[Template] = field(default_factory=list)
    topn: int = DEFAULT_TOPN

    def __post_init__(self):
        if not self.triple.words:
            raise ValueError("empty lexicon")
        if self.triple.source is None:
            self.triple = map_lexicon(self.triple, self.luts["middle"])
        self._entries = list(dict.fromkeys(self.triple.source))
        self._models = [self.source.word_model(w) for w in self._entries]

    def features(self, split: ZoneSplit) -> FeatureSequence:
        return window_features(split.middle_strip(), self.source.width, self.source.shift,
                               x_offset=split.x_span[0])

    def _modifier_labels(self, split: ZoneSplit) -> list[tuple[str, str, tuple[int, int]]]:
        from .rbfsvm import classify_component

        found = []
        for zone, comp, xr in split.modifiers():
            model = self.modifier_models.get(zone)
            lut = self.luts.get(zone)
            if model is None or lut is None:
                continue
            target = best_inverse(lut, classify_component(model, comp))
            if target is not None:
                found.append((zone, target, xr))
        return found

    def recognize(self, img: GrayImage, split: ZoneSplit | None = None) -> RecognitionResult:
        split = split_zones(img, self.templates) if split is None else split
        seq = self.features(split)
        nbest = decode_nbest(seq, self._models, self.topn, hmmset=self.source)
        mods = self._modifier_labels(split)
        width = split.middle.width
        best: dict[tuple[str, ...], tuple[int, float, int]] = {}
        lex_index = {w: i for i, w in enumerate(self.triple.words)}
        winner = None
        for entry in nbest:
            ranges = char_x_ranges(entry.alignment, seq, width)
            for mid in resolve_one_to_many(entry.word, self.luts["middle"], self.triple):
                cands = associate_modifiers(ranges, mods, mid, self.table)
                for w in self.triple.words:
                    d = min(levenshtein(c, w) for c in cands)
                    key = (d, -entry.loglik, lex_index[w])
                    if w not in best or key < best[w]:
                        best[w] = key
                        if winner is None or key < winner[0]:
                            winner = (key, entry.alignment, ranges)
        if not best:
            raise ValueError("no lexicon word matched any hypothesis")
        ranked = sorted(best.items(), key=lambda kv: kv[1])[: self.topn]
        assoc = []
        if winner is not None:
            _, _, ranges = winner
            assoc = [(z, lab, _owner(ranges, xr)) for z, lab, xr in mods]
        return RecognitionResult([(w, (k[0], k[1])) for w, k in ranked],
                                 winner[1] if winner else None, assoc)


def recognize_word(img: GrayImage, source: HmmSet, modifier_models: Mapping[str, object],
                   luts: Mapping[str, Lut], triple: LexiconTriple, table: Mapping[str, Decomposition],
                   templates: list[Template] | None = None, n: int = DEFAULT_TOPN) -> RecognitionResult:
    rec = Recognizer(source, luts, triple, table, modifier_models, templates or [], n)
    return rec.recognize(img)


def evaluate_recognition(results: Sequence[RecognitionResult], gold: Sequence[Sequence[str]]) -> RetrievalMetricsRec:
    if len(results) != len(gold):
        raise ValueError(f"{len(results)} results for {len(gold)} gold words")
    if not results:
        return RetrievalMetricsRec(0.0, 0.0)
    top1 = sum(r.words[:1] == [tuple(g)] for r, g in zip(results, gold))
    top5 = sum(tuple(g) in r.words[:5] for r, g in zip(results, gold))
    return RetrievalMetricsRec(top1 / len(results), top5 / len(results))


def format_results(names: Sequence[str], gold: Sequence[Sequence[str]],
                   results: Sequence[RecognitionResult], topn: int = DEFAULT_TOPN) -> str:
    """``image<TAB>gold<TAB>rank1..rankN`` lines."""
    from .manifest import format_word

    lines = []
    for name, g, r in zip(names, gold, results):
        ranks = [format_word(w) for w in r.words[:topn]]
        ranks += [""] * (topn - len(ranks))
        lines.append("\t".join([name, format_word(g), *ranks]))
    return "".join(line + "\n" for line in lines)
