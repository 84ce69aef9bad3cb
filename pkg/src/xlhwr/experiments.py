"""Synthetic end-to-end experiments: corpora, model training, transfer runs.

Everything here renders in memory; the CLI's ``synth`` command is the on-disk
counterpart.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .ghmm import HmmSet, train_hmms
from .phog import FeatureSequence, modifier_features, window_features
from .rbfsvm import DEFAULT_C, DEFAULT_GAMMA, SvmModel, train_svm
from .raster import BinaryImage, GrayImage
from .synthscript import (GLYPH_GAP, GLYPH_W, GroundTruth, RenderStyle, SyntheticScript, glyph_variants, random_lexicon,
                          render_word)
from .wordrec import Recognizer, RetrievalMetricsRec, evaluate_recognition
from .xmap import Lut, build_lut_middle, build_lut_modifier, identity_lut, make_mid_lexicon
from .zoneseg import Template, split_zones, templates_from_glyphs

log = logging.getLogger(__name__)

# isolated characters get the blank margin they would have inside a word
ISOLATED_PAD = GLYPH_GAP


@dataclass
class HmmConfig:
    nstates: int = 8
    nmix: int = 4
    iters: int = 5


@dataclass
class SvmConfig:
    c: float = DEFAULT_C
    gamma: float | str = DEFAULT_GAMMA
    n_variants: int = 12


@dataclass
class CorpusConfig:
    n_middle: int = 20
    n_upper: int = 4
    n_lower: int = 4
    lexicon_size: int = 50
    n_train: int = 500
    n_test: int = 100
    char_samples: int = 8          # isolated renders per character for look-up tables
    style: RenderStyle = field(default_factory=RenderStyle)


@dataclass
class SourceModels:
    script: SyntheticScript
    hmmset: HmmSet
    svms: dict[str, SvmModel]
    templates: list[Template]
    trace: list[float]


TEMPLATE_VARIANTS = 16


def lower_templates(script: SyntheticScript, seed: int = 0, n_variants: int = TEMPLATE_VARIANTS) -> list[Template]:
    """Clean plus writer-varied renders of every lower glyph."""
    return templates_from_glyphs(glyph_variants(script.lower, n_variants, seed=seed))


def render_set(script: SyntheticScript, words, n: int, seed: int,
               style: RenderStyle = RenderStyle()) -> list[tuple[GrayImage, GroundTruth]]:
    """`n` renders of words drawn uniformly from `words`, writer style varied per image."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        w = words[int(rng.integers(len(words)))]
        out.append(render_word(script, w, style.varied(rng), seed=int(rng.integers(2**31))))
    return out


def middle_features(img: GrayImage, templates: list[Template], pad: int = 0,
                    min_width: int = 0) -> FeatureSequence:
    """Window features of the middle strip, optionally padded with blank columns."""
    split = split_zones(img, templates)
    strip = split.middle_strip()
    pad = max(pad, -(-(min_width - strip.width) // 2))
    if pad > 0:
        strip = BinaryImage(np.pad(strip.data, ((0, 0), (pad, pad))))
    return window_features(strip, x_offset=split.x_span[0] - max(pad, 0))


def middle_word(script: SyntheticScript, word) -> tuple[str, ...]:
    return tuple(script.table[c].base for c in word)


def train_source(script: SyntheticScript, corpus: CorpusConfig, hmm: HmmConfig, svm: SvmConfig,
                 seed: int) -> SourceModels:
    """Middle-zone HMMs from rendered training words plus per-zone modifier SVMs."""
    templates = lower_templates(script, seed)
    words = random_lexicon(script, max(corpus.n_train, 1), seed=seed + 101)
    data = []
    for img, gt in render_set(script, words, corpus.n_train, seed + 202, corpus.style):
        data.append((middle_features(img, templates), middle_word(script, gt.transcription)))
    run = train_hmms(data, hmm.nstates, hmm.nmix, hmm.iters, script.script_id,
                     chars=[g.glyph_id for g in script.middle], seed=seed)
    svms = {}
    for zone, pool in (("upper", script.upper), ("lower", script.lower)):
        if len(pool) >= 2:
            samples = [(modifier_features(BinaryImage(bm)), lab)
                       for lab, bm in glyph_variants(pool, svm.n_variants, seed=seed + 303)]
            svms[zone] = train_svm(samples, svm.c, svm.gamma)
    return SourceModels(script, run.hmmset, svms, templates, list(run.trace))


def char_samples(script: SyntheticScript, n: int, seed: int, templates: list[Template],
                 style: RenderStyle = RenderStyle()) -> dict[str, list[FeatureSequence]]:
    """Isolated middle-zone characters rendered as one-character words."""
    rng = np.random.default_rng(seed)
    out: dict[str, list[FeatureSequence]] = {}
    for g in script.middle:
        seqs = []
        for _ in range(n):
            img, _ = render_word(script, (g.glyph_id,), style.varied(rng), seed=int(rng.integers(2**31)))
            seqs.append(middle_features(img, templates, pad=ISOLATED_PAD,
                                        min_width=GLYPH_W + 2 * ISOLATED_PAD))
        out[g.glyph_id] = seqs
    return out


def modifier_samples(script: SyntheticScript, zone: str, n: int, seed: int) -> dict[str, list[BinaryImage]]:
    pool = script.upper if zone == "upper" else script.lower
    out: dict[str, list[BinaryImage]] = {}
    for lab, bm in glyph_variants(pool, n, seed=seed):
        out.setdefault(lab, []).append(BinaryImage(bm))
    return out


def build_luts(source: SourceModels, target: SyntheticScript, n: int, seed: int,
               templates: list[Template] | None = None) -> dict[str, Lut]:
    templates = lower_templates(target, seed) if templates is None else templates
    luts = {"middle": build_lut_middle(source.hmmset, char_samples(target, n, seed, templates))}
    for zone, model in source.svms.items():
        luts[zone] = build_lut_modifier(model, modifier_samples(target, zone, n, seed + 1), zone)
    return luts


def self_luts(script: SyntheticScript) -> dict[str, Lut]:
    return {"middle": identity_lut([g.glyph_id for g in script.middle], "middle"),
            "upper": identity_lut([g.glyph_id for g in script.upper], "upper"),
            "lower": identity_lut([g.glyph_id for g in script.lower], "lower")}


@dataclass
class TransferRun:
    metrics: RetrievalMetricsRec
    middle: RetrievalMetricsRec
    luts: dict[str, Lut]


def run_recognition(source: SourceModels, target: SyntheticScript, luts: dict[str, Lut],
                    corpus: CorpusConfig, seed: int) -> TransferRun:
    """Recognize `corpus.n_test` target renders; reports full-word and middle-zone accuracy."""
    templates = lower_templates(target, seed)
    lexicon = random_lexicon(target, corpus.lexicon_size, seed=seed + 404)
    triple = make_mid_lexicon(lexicon, target.table)
    rec = Recognizer(source.hmmset, luts, triple, target.table, source.svms, templates)
    results, gold = [], []
    mid_hits1 = mid_hits5 = 0
    for img, gt in render_set(target, lexicon, corpus.n_test, seed + 505, corpus.style):
        r = rec.recognize(img)
        results.append(r)
        gold.append(gt.transcription)
        want = middle_word(target, gt.transcription)
        mids = [middle_word(target, w) for w in r.words]
        mid_hits1 += mids[:1] == [want]
        mid_hits5 += want in mids[:5]
    n = max(len(results), 1)
    return TransferRun(evaluate_recognition(results, gold),
                       RetrievalMetricsRec(mid_hits1 / n, mid_hits5 / n), luts)


# ------------------------------------------------------------------ spotting

@dataclass
class SpotRun:
    middle_only: "RetrievalMetrics"
    combined: "RetrievalMetrics"
    threshold: float
    max_score: float               # largest finite S(X) seen; never above zero


def collision_lexicon(script: SyntheticScript, size: int, seed: int) -> list[tuple[str, ...]]:
    """Word pairs sharing a middle zone but differing in modifier counts."""
    base = random_lexicon(script, size, seed, p_upper=0.0, p_lower=0.0)
    out = []
    uppers = [g.glyph_id for g in script.upper]
    rng = np.random.default_rng(seed)
    for w in base[: size // 2]:
        out.append(w)
        k = int(rng.integers(len(w)))
        u = uppers[int(rng.integers(len(uppers)))]
        twin = list(w)
        twin[k] = script.compose(script.table[w[k]].base, u, None)
        out.append(tuple(twin))
    return out


def run_spotting(source: SourceModels, target: SyntheticScript, luts: dict[str, Lut],
                 corpus: CorpusConfig, seed: int, n_keywords: int = 20,
                 lexicon: list[tuple[str, ...]] | None = None, mode: str = "counts") -> SpotRun:
    """Score every keyword against every test render, with and without modifier re-ranking."""
    from .wordspot import (Hit, decide, evaluate_retrieval, filler_score, global_threshold, make_query,
                           rerank_with_modifiers, spot_score)

    templates = lower_templates(target, seed)
    lexicon = lexicon or random_lexicon(target, corpus.lexicon_size, seed=seed + 606)
    test_renders = render_set(target, lexicon, corpus.n_test, seed + 808, corpus.style)
    # keywords are drawn from words that occur in the test renders
    keywords = list(dict.fromkeys(gt.transcription for _, gt in test_renders))[:n_keywords]
    queries = {kw: make_query(kw, target.table, luts["middle"]) for kw in keywords}

    def score_corpus(renders):
        rows = []
        for idx, (img, gt) in enumerate(renders):
            split = split_zones(img, templates)
            seq = window_features(split.middle_strip(), source.hmmset.width, source.hmmset.shift,
                                  x_offset=split.x_span[0])
            table = source.hmmset.emissions(seq)
            filler = filler_score(seq, source.hmmset, table)
            scores = {kw: spot_score(seq, q, source.hmmset, table, filler) for kw, q in queries.items()}
            rows.append((f"img{idx:04d}", gt.transcription, split, seq, scores))
        return rows

    valid = score_corpus(render_set(target, lexicon, max(corpus.n_test // 2, 1), seed + 707, corpus.style))
    per_kw = {kw: ([r[4][kw].score for r in valid], [r[1] == kw for r in valid]) for kw in keywords}
    threshold = global_threshold(per_kw)

    test = score_corpus(test_renders)
    relevant = {kw: {r[0] for r in test if r[1] == kw} for kw in keywords}
    plain, combined = {}, {}
    max_score = -math.inf
    for kw in keywords:
        hits = [Hit(r[0], r[2], r[4][kw], r[3]) for r in test]
        hits.sort(key=lambda h: -h.score.score)
        max_score = max([max_score] + [h.score.score for h in hits if not h.score.rejected])
        plain[kw] = [(h.image, decide(h.score, threshold)) for h in hits]
        rr = rerank_with_modifiers(hits, queries[kw], source.svms, mode, luts, threshold)
        kept = {id(h) for h in rr.kept}
        combined[kw] = [(h.image, decide(h.score, threshold) and id(h) in kept) for h in rr.ranking]
    return SpotRun(evaluate_retrieval(plain, relevant), evaluate_retrieval(combined, relevant),
                   threshold, max_score)


# ---------------------------------------------------------------- similarity

@dataclass
class SimilarityConfig:
    train_samples: int = 10        # isolated renders per character for model training
    test_samples: int = 10         # renders per character scored for entropy
    hmm: HmmConfig = field(default_factory=lambda: HmmConfig(nstates=6, nmix=2, iters=4))


def train_char_models(script: SyntheticScript, cfg: SimilarityConfig, seed: int) -> HmmSet:
    """Middle-zone character HMMs trained on isolated renders."""
    templates = lower_templates(script, seed)
    samples = char_samples(script, cfg.train_samples, seed, templates)
    data = [(seq, (c,)) for c, seqs in samples.items() for seq in seqs]
    run = train_hmms(data, cfg.hmm.nstates, cfg.hmm.nmix, cfg.hmm.iters, script.script_id,
                     chars=list(samples), seed=seed)
    return run.hmmset


def similarity_pair(source_models: HmmSet, target: SyntheticScript, target_models: HmmSet,
                    cfg: SimilarityConfig, seed: int):
    """Relative similarity of `target` read by `source_models`."""
    from .simscore import run_similarity

    samples = char_samples(target, cfg.test_samples, seed + 999, lower_templates(target, seed))
    return run_similarity(source_models, samples, target_models)


def whole_char_samples(script: SyntheticScript, n: int, seed: int,
                       style: RenderStyle = RenderStyle()) -> dict[str, list[FeatureSequence]]:
    """Composite characters without zone segmentation: every inked row goes into the windows."""
    from .raster import binarize

    rng = np.random.default_rng(seed)
    out: dict[str, list[FeatureSequence]] = {}
    for ch in script.table:
        seqs = []
        for _ in range(n):
            img, _ = render_word(script, (ch,), style.varied(rng), seed=int(rng.integers(2**31)))
            ink = binarize(img).data
            rows = np.flatnonzero(ink.any(axis=1))
            cols = np.flatnonzero(ink.any(axis=0))
            crop = ink[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1]
            pad = max(ISOLATED_PAD, -(-(GLYPH_W + 2 * ISOLATED_PAD - crop.shape[1]) // 2))
            seqs.append(window_features(BinaryImage(np.pad(crop, ((0, 0), (pad, pad))))))
        out[ch] = seqs
    return out


def zone_samples(script: SyntheticScript, n: int, seed: int) -> dict[str, list[tuple[str, object]]]:
    """Middle-zone sequences and modifier bitmaps, each tagged with its zone."""
    samples: dict[str, list[tuple[str, object]]] = {
        c: [("middle", q) for q in seqs]
        for c, seqs in char_samples(script, n, seed, lower_templates(script, seed)).items()}
    for zone in ("upper", "lower"):
        for lab, imgs in modifier_samples(script, zone, n - 1, seed + 1).items():
            samples[lab] = [(zone, im) for im in imgs]
    return samples


def zone_recognizer(hmmset: HmmSet, svms: dict[str, SvmModel]):
    """Recognizer for `zone_samples` items: HMMs for the middle zone, SVMs for modifiers."""
    from .ghmm import classify_isolated
    from .rbfsvm import classify

    def rec(item):
        zone, x = item
        if zone == "middle":
            return classify_isolated(x, hmmset)[0]
        return classify(svms[zone], modifier_features(x))[0]
    return rec


def train_modifier_svms(script: SyntheticScript, svm: SvmConfig, seed: int) -> dict[str, SvmModel]:
    out = {}
    for zone, pool in (("upper", script.upper), ("lower", script.lower)):
        if len(pool) >= 2:
            data = [(modifier_features(BinaryImage(bm)), lab)
                    for lab, bm in glyph_variants(pool, svm.n_variants, seed=seed)]
            out[zone] = train_svm(data, svm.c, svm.gamma)
    return out


def train_whole_models(script: SyntheticScript, cfg: SimilarityConfig, seed: int) -> HmmSet:
    samples = whole_char_samples(script, cfg.train_samples, seed)
    data = [(seq, (c,)) for c, seqs in samples.items() for seq in seqs]
    return train_hmms(data, cfg.hmm.nstates, cfg.hmm.nmix, cfg.hmm.iters, script.script_id,
                      chars=list(samples), seed=seed).hmmset


@dataclass
class ZoneVsWhole:
    zone: float
    whole: float


def zone_vs_whole(source: SyntheticScript, target: SyntheticScript, cfg: SimilarityConfig,
                  svm: SvmConfig, seed: int) -> ZoneVsWhole:
    """Relative similarity with and without zone segmentation for one script pair."""
    from .simscore import run_similarity

    src_h, tgt_h = train_char_models(source, cfg, seed), train_char_models(target, cfg, seed + 1)
    src_s, tgt_s = train_modifier_svms(source, svm, seed), train_modifier_svms(target, svm, seed + 1)
    zs = zone_samples(target, cfg.test_samples, seed + 999)
    zone = run_similarity(None, zs, recognize=zone_recognizer(src_h, src_s),
                          recognize_self=zone_recognizer(tgt_h, tgt_s))
    src_w, tgt_w = train_whole_models(source, cfg, seed), train_whole_models(target, cfg, seed + 1)
    ws = whole_char_samples(target, cfg.test_samples, seed + 999)
    whole = run_similarity(src_w, ws, tgt_w)
    return ZoneVsWhole(zone.s_rel, whole.s_rel)
