"""Keyword spotting with a filler-normalized score and modifier re-ranking."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .ghmm import HmmSet, InsufficientFramesError, loop_score, viterbi
from .phog import FeatureSequence
from .synthscript import Decomposition
from .xmap import Lut, make_mid_lexicon, map_lexicon
from .zoneseg import ZoneSplit

REJECT = -math.inf


@dataclass(frozen=True)
class KeywordQuery:
    word: tuple[str, ...]
    middle: tuple[str, ...]
    source: tuple[str, ...]
    layout: tuple[tuple[str, str, int], ...]     # (zone, target label, base index)

    @property
    def counts(self) -> dict[str, int]:
        c = Counter(z for z, _, _ in self.layout)
        return {"upper": c.get("upper", 0), "lower": c.get("lower", 0)}


def make_query(word: Sequence[str], table: Mapping[str, Decomposition], lut: Lut) -> KeywordQuery:
    """Target word -> middle-zone form -> source-script form."""
    triple = map_lexicon(make_mid_lexicon([tuple(word)], table), lut)
    return KeywordQuery(triple.words[0], triple.middle[0], triple.source[0], tuple(triple.layouts[0]))


@dataclass(frozen=True)
class SpotScore:
    keyword: float                 # log p(X|W)
    filler: float                  # log p(X)
    score: float                   # per-frame difference, REJECT when unscoreable
    frames: int
    spans: tuple[tuple[int, int], ...] = ()      # keyword alignment, frame spans per character

    @property
    def rejected(self) -> bool:
        return self.score == REJECT


def filler_score(seq: FeatureSequence, hmmset: HmmSet, table=None) -> float | None:
    """Ergodic-loop log-likelihood, or None when the sequence is too short."""
    try:
        return loop_score(seq, hmmset, table)[0]
    except InsufficientFramesError:
        return None


def spot_score(seq: FeatureSequence, query: KeywordQuery, hmmset: HmmSet,
               table: dict | None = None, filler: float | None = None) -> SpotScore:
    """Keyword versus filler score normalized by frame count.

    `table` (per-character emissions) and `filler` may be precomputed once per
    image and shared across keywords.
    """
    table = hmmset.emissions(seq) if table is None else table
    wm = hmmset.word_model(query.source)
    if wm.nstates > len(seq):
        return SpotScore(REJECT, REJECT, REJECT, len(seq))
    if filler is None:
        filler = filler_score(seq, hmmset, table)
        if filler is None:
            return SpotScore(REJECT, REJECT, REJECT, len(seq))
    al = viterbi(seq, wm, table)
    return SpotScore(al.loglik, filler, (al.loglik - filler) / len(seq), len(seq), tuple(al.spans))


def decide(score: SpotScore | float, threshold: float) -> bool:
    s = score.score if isinstance(score, SpotScore) else score
    return s != REJECT and s >= threshold


def f1_threshold(scores: Sequence[float], relevant: Sequence[bool]) -> float:
    """Threshold maximizing F1 over the observed finite scores.

    Ties in F1 keep the highest threshold. With no relevant items the
    threshold sits above every score.
    """
    pairs = [(s, r) for s, r in zip(scores, relevant) if s != REJECT]
    n_rel = sum(bool(r) for r in relevant)
    if not pairs or n_rel == 0:
        return math.inf
    pairs.sort(key=lambda p: -p[0])
    best_t, best_f = math.inf, -1.0
    tp = fp = 0
    for i, (s, r) in enumerate(pairs):
        tp += bool(r)
        fp += not r
        if i + 1 < len(pairs) and pairs[i + 1][0] == s:
            continue
        f = 2 * tp / (2 * tp + fp + (n_rel - tp))
        if f > best_f:
            best_t, best_f = s, f
    return best_t


def global_threshold(per_keyword: Mapping[str, tuple[Sequence[float], Sequence[bool]]]) -> float:
    scores, rel = [], []
    for s, r in per_keyword.values():
        scores.extend(s)
        rel.extend(r)
    return f1_threshold(scores, rel)


def local_thresholds(per_keyword: Mapping[str, tuple[Sequence[float], Sequence[bool]]]) -> dict[str, float]:
    return {k: f1_threshold(s, r) for k, (s, r) in per_keyword.items()}


# ---------------------------------------------------------------- re-ranking

@dataclass
class Hit:
    image: str
    split: ZoneSplit
    score: SpotScore
    seq: FeatureSequence | None = None


@dataclass
class Reranked:
    kept: list[Hit]
    removed: list[Hit]
    unchecked: list[Hit] = field(default_factory=list)    # below threshold, never examined

    @property
    def ranking(self) -> list[Hit]:
        """Kept hits, then filtered ones, then unexamined ones; order otherwise preserved."""
        return self.kept + self.removed + self.unchecked


def _hit_layout(hit: Hit, svms: Mapping[str, object], luts: Mapping[str, Lut] | None) -> list[tuple[str, str, int]]:
    from .rbfsvm import classify_component
    from .wordrec import best_inverse

    spans = hit.score.spans
    seq = hit.seq
    centres = []
    if spans and seq is not None:
        centres = [sum(seq.frame_x_range(s, e)) / 2.0 for s, e in spans]
    out = []
    for zone, comp, xr in hit.split.modifiers():
        model = svms.get(zone)
        if model is None:
            continue
        label = classify_component(model, comp)
        if luts is not None and zone in luts:
            label = best_inverse(luts[zone], label) or label
        mid = (xr[0] + xr[1]) / 2.0
        idx = int(np.argmin([abs(mid - c) for c in centres])) if centres else -1
        out.append((zone, label, idx))
    return out


def _layout_matches(found: list[tuple[str, str, int]], wanted: Iterable[tuple[str, str, int]]) -> bool:
    unused = list(found)
    for zone, label, idx in wanted:
        for k, (z, lab, j) in enumerate(unused):
            if z == zone and lab == label and (j < 0 or abs(j - idx) <= 1):
                del unused[k]
                break
        else:
            return False
    return not unused


def rerank_with_modifiers(hits: Sequence[Hit], query: KeywordQuery, svms: Mapping[str, object] | None = None,
                          mode: str = "counts", luts: Mapping[str, Lut] | None = None,
                          threshold: float | None = None) -> Reranked:
    """Drop hits whose modifiers disagree with the query.

    ``counts`` compares the number of modifiers per zone; ``labels`` also
    compares classified labels (inverted through `luts` to target labels when
    given) and requires each within one character of its expected base.

    With a `threshold` only accepted hits are checked, so the filter prunes
    false positives from the retrieved set and leaves the rejected tail as
    it was. `hits` are expected in descending score order.
    """
    if mode not in ("counts", "labels"):
        raise ValueError(f"unknown re-ranking mode {mode!r}")
    want = query.counts
    kept, removed, unchecked = [], [], []
    for h in hits:
        if threshold is not None and not decide(h.score, threshold):
            unchecked.append(h)
            continue
        if mode == "counts":
            ok = len(h.split.upper) == want["upper"] and len(h.split.lower) == want["lower"]
        else:
            ok = _layout_matches(_hit_layout(h, svms or {}, luts), query.layout)
        (kept if ok else removed).append(h)
    return Reranked(kept, removed, unchecked)


# ---------------------------------------------------------------- evaluation

@dataclass
class RetrievalMetrics:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    ap: dict[str, float] = field(default_factory=dict)
    map: float = 0.0
    no_relevant: list[str] = field(default_factory=list)


def average_precision(ranked_relevance: Sequence[bool], n_relevant: int) -> float:
    """Trapezoidal area under the precision-recall curve, starting at (0, 1)."""
    if n_relevant <= 0:
        return 0.0
    area, tp = 0.0, 0
    prev_r, prev_p = 0.0, 1.0
    for k, rel in enumerate(ranked_relevance, 1):
        tp += bool(rel)
        r, p = tp / n_relevant, tp / k
        area += (r - prev_r) * (p + prev_p) / 2.0
        prev_r, prev_p = r, p
    return area


def precision_recall(tp: int, fp: int, fn: int) -> tuple[float, float]:
    p = tp / (tp + fp) if tp + fp else 1.0
    r = tp / (tp + fn) if tp + fn else 1.0
    return p, r


def evaluate_retrieval(ranked: Mapping[str, Sequence[tuple[str, bool]]],
                       relevant: Mapping[str, set]) -> RetrievalMetrics:
    """`ranked[kw]` lists (image, accepted) by descending score; `relevant[kw]` the true images."""
    tp = fp = fn = 0
    ap: dict[str, float] = {}
    flagged = []
    for kw, items in ranked.items():
        rel = relevant.get(kw, set())
        flags = [img in rel for img, _ in items]
        if not rel:
            flagged.append(kw)
        ap[kw] = average_precision(flags, len(rel))
        accepted = {img for img, acc in items if acc}
        tp += len(accepted & rel)
        fp += len(accepted - rel)
        fn += len(rel - accepted)
    p, r = precision_recall(tp, fp, fn)
    mean_ap = sum(ap.values()) / len(ap) if ap else 0.0
    return RetrievalMetrics(tp, fp, fn, p, r, ap, mean_ap, flagged)


def write_hits(path, rows: Iterable[tuple[str, str, float, bool]]) -> None:
    from .manifest import format_word

    with open(path, "w", encoding="utf-8") as fh:
        for kw, image, score, accepted in rows:
            kw_text = format_word(kw) if isinstance(kw, tuple) else kw
            fh.write(f"{kw_text}\t{image}\t{score!r}\t{int(bool(accepted))}\n")
