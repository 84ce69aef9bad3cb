"""Command-line front end.

Exit codes: 0 success, 2 bad configuration or arguments, 3 I/O or file format
failure, 4 insufficient training data, 5 incompatible or corrupt model
bundle, 6 characters not covered by a table or look-up table.
Reports go to stdout or ``--out``; diagnostics go to stderr.
"""
from __future__ import annotations

import argparse
import hashlib
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .bundle import BundleError, ModelBundle, load_bundle, save_bundle
from .ghmm import DEFAULT_MIXTURES, DEFAULT_STATES, InsufficientFramesError, NoDataError
from .manifest import (FormatError, Manifest, ManifestRow, format_word, load_table, load_words,
                       save_mapping, save_table, save_words)
from .phog import PHOG_DIM
from .raster import GrayImage, PgmError, binarize, load_pgm, save_pgm
from .rbfsvm import DEFAULT_C, DEFAULT_GAMMA
from .xmap import CoverageError

log = logging.getLogger("xlhwr")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_DATA, EXIT_BUNDLE, EXIT_COVERAGE = 0, 2, 3, 4, 5, 6


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class IncompatibleError(BundleError):
    pass


# ------------------------------------------------------------------ config

@dataclass
class SynthConfig:
    n_middle: int = 20
    n_upper: int = 4
    n_lower: int = 4
    overlap: float = 0.5
    modifier_overlap: float | None = None
    seed: int = 0
    lexicon_size: int = 50
    n_train: int = 500
    n_test: int = 100
    char_samples: int = 8
    out_dir: str = "synth_out"
    style_thickness: int = 2
    style_slant: float = 0.0
    style_jitter: float = 1.0
    style_scale_noise: float = 0.05
    style_pepper: float = 0.0

    def style(self):
        from .synthscript import RenderStyle

        return RenderStyle(self.style_thickness, self.style_slant, self.style_jitter,
                           self.style_scale_noise, self.style_pepper)


_INT_KEYS = {"n_middle", "n_upper", "n_lower", "seed", "lexicon_size", "n_train", "n_test",
             "char_samples", "style_thickness"}
_FLOAT_KEYS = {"overlap", "modifier_overlap", "style_slant", "style_jitter", "style_scale_noise",
               "style_pepper"}


def parse_config(text: str) -> SynthConfig:
    """key = value lines; ``#`` starts a comment; ``style.x`` keys set render style."""
    cfg = SynthConfig()
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected key = value", no)
        key, value = (p.strip() for p in line.split("=", 1))
        attr = key.replace("style.", "style_", 1) if key.startswith("style.") else key
        if attr not in SynthConfig.__dataclass_fields__:
            raise ConfigError(f"unknown key {key!r}", no)
        try:
            if attr in _INT_KEYS:
                val = int(value)
            elif attr in _FLOAT_KEYS:
                val = float(value)
            else:
                val = value
        except ValueError:
            raise ConfigError(f"bad value {value!r} for {key}", no) from None
        setattr(cfg, attr, val)
    if not 0.0 <= cfg.overlap <= 1.0:
        raise ConfigError(f"overlap {cfg.overlap} outside [0, 1]")
    if cfg.modifier_overlap is not None and not 0.0 <= cfg.modifier_overlap <= 1.0:
        raise ConfigError(f"modifier_overlap {cfg.modifier_overlap} outside [0, 1]")
    for k in ("n_middle", "lexicon_size", "char_samples"):
        if getattr(cfg, k) < 1:
            raise ConfigError(f"{k} must be positive")
    if cfg.n_middle < 2:
        raise ConfigError("n_middle must be at least 2")
    for k in ("n_upper", "n_lower", "n_train", "n_test"):
        if getattr(cfg, k) < 0:
            raise ConfigError(f"{k} must be non-negative")
    try:
        cfg.style()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


# ------------------------------------------------------------------ helpers

def _pmap(fn, items, jobs: int):
    """Ordered map, in worker processes when jobs > 1."""
    items = list(items)
    if jobs <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


def _templates(path):
    from .zoneseg import load_templates

    return load_templates(path) if path else []


def _file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def _write_report(text: str, out) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _middle_bundle(path) -> ModelBundle:
    b = load_bundle(path)
    if b.hmmset is None:
        raise IncompatibleError(f"{path}: bundle holds no middle-zone HMMs")
    dims = {m.dim for m in b.hmmset.models.values()}
    if dims and dims != {PHOG_DIM}:
        raise IncompatibleError(f"{path}: feature dimension {sorted(dims)} != {PHOG_DIM}")
    return b


def _svm_bundle(path, zone: str) -> ModelBundle | None:
    if not path:
        return None
    b = load_bundle(path)
    if b.svm is None:
        raise IncompatibleError(f"{path}: bundle holds no modifier SVM")
    if b.meta.get("zone") not in (None, zone):
        raise IncompatibleError(f"{path}: bundle is for the {b.meta.get('zone')} zone, not {zone}")
    if b.svm.dim != PHOG_DIM:
        raise IncompatibleError(f"{path}: feature dimension {b.svm.dim} != {PHOG_DIM}")
    return b


def _isolated_features(img: GrayImage, templates):
    from .experiments import GLYPH_W, ISOLATED_PAD, middle_features

    return middle_features(img, templates, pad=ISOLATED_PAD, min_width=GLYPH_W + 2 * ISOLATED_PAD)


def _word_features(img: GrayImage, templates):
    from .experiments import middle_features

    return middle_features(img, templates)


# ------------------------------------------------------------------- synth

def cmd_synth(args) -> int:
    from .synthscript import (derive_script, gen_dataset, glyph_variants, random_lexicon, random_script,
                              render_word)
    from .zoneseg import save_templates, templates_from_glyphs
    from .experiments import TEMPLATE_VARIANTS

    cfg = parse_config(Path(args.config).read_text(encoding="utf-8"))
    out = Path(args.out_dir or cfg.out_dir)
    src = random_script(cfg.n_middle, cfg.n_upper, cfg.n_lower, cfg.seed, script_id="S")
    tgt, mapping = derive_script(src, cfg.overlap, cfg.seed + 1, script_id="T",
                                 modifier_overlap=cfg.modifier_overlap)
    style = cfg.style()
    for k, script in enumerate((src, tgt)):
        d = out / ("source" if k == 0 else "target")
        d.mkdir(parents=True, exist_ok=True)
        (d / "script.json").write_text(script.to_json() + "\n", encoding="utf-8")
        save_table(script.table, d / "table.txt")
        lex = random_lexicon(script, cfg.lexicon_size, seed=cfg.seed * 7 + k)
        save_words(lex, d / "lexicon.txt")
        train_words = random_lexicon(script, max(cfg.n_train, cfg.lexicon_size), seed=cfg.seed * 7 + 100 + k)
        gen_dataset(script, train_words, cfg.n_train, style, cfg.seed * 7 + 200 + k, d / "train")
        gen_dataset(script, lex, cfg.n_test, style, cfg.seed * 7 + 300 + k, d / "test")
        save_templates(templates_from_glyphs(glyph_variants(script.lower, TEMPLATE_VARIANTS, seed=cfg.seed)),
                       d / "templates")
        rows = []
        cdir = d / "chars"
        cdir.mkdir(exist_ok=True)
        rng = np.random.default_rng(cfg.seed * 7 + 400 + k)
        for g in script.middle:
            for j in range(cfg.char_samples):
                img, _ = render_word(script, (g.glyph_id,), style.varied(rng), seed=int(rng.integers(2**31)))
                name = f"{g.glyph_id}__{j:02d}.pgm"
                save_pgm(img, cdir / name)
                rows.append(ManifestRow(name, (g.glyph_id,)))
        Manifest(script.script_id, rows, cdir).save(cdir / "manifest.tsv")
        for zone, pool in (("upper", script.upper), ("lower", script.lower)):
            zdir = d / zone
            zdir.mkdir(exist_ok=True)
            rows = []
            for j, (lab, bm) in enumerate(glyph_variants(pool, cfg.char_samples, seed=cfg.seed + k)):
                name = f"{lab}__{j:03d}.pgm"
                save_pgm(GrayImage(np.pad(np.where(bm, 0, 255).astype(np.uint8), 4, constant_values=255)),
                         zdir / name)
                rows.append(ManifestRow(name, (lab,)))
            Manifest(script.script_id, rows, zdir).save(zdir / "manifest.tsv")
    save_mapping(mapping, out / "mapping.tsv")
    print(out)
    return EXIT_OK


# ------------------------------------------------------------------- train

def _load_image(path) -> GrayImage:
    return load_pgm(path)


def cmd_train(args) -> int:
    man = Manifest.load(args.manifest)
    if not man.rows:
        raise NoDataError(f"{args.manifest}: manifest has no rows")
    meta = {"zone": args.zone, "manifest": _file_hash(args.manifest), "seed": args.seed,
            "script_id": man.script_id, "phog_dim": PHOG_DIM}
    if args.zone == "middle":
        from .ghmm import train_hmms

        templates = _templates(args.templates)
        table = load_table(args.table) if args.table else None
        data = []
        for row in man.rows:
            img = _load_image(man.image_path(row))
            if args.isolated:
                seq = _isolated_features(img, templates)
            else:
                seq = _word_features(img, templates)
            word = row.transcription
            if table is not None:
                missing = [c for c in word if c not in table]
                if missing:
                    raise CoverageError(f"{man.image_path(row)}: characters missing from the table", missing)
                word = tuple(table[c].base for c in word)
            data.append((seq, word))
        chars = sorted({d.base for d in table.values()}) if table is not None else None
        t0 = time.perf_counter()
        run = train_hmms(data, args.states, args.mixtures, args.iters, man.script_id, chars, args.seed)
        log.info("final log-likelihood %r after %d updates", run.trace[-1], len(run.trace) - 1)
        meta.update(states=args.states, mixtures=args.mixtures, iters=args.iters,
                    width=run.hmmset.width, shift=run.hmmset.shift, trace=run.trace,
                    seconds=round(time.perf_counter() - t0, 3))
        save_bundle(ModelBundle(hmmset=run.hmmset, meta=meta), args.out)
    else:
        from .phog import modifier_features
        from .rbfsvm import train_svm

        data = []
        for row in man.rows:
            ink = binarize(_load_image(man.image_path(row)))
            if not ink.data.any():
                raise NoDataError(f"{man.image_path(row)}: blank modifier image")
            data.append((modifier_features(ink), row.transcription[0]))
        labels = sorted({lab for _, lab in data})
        if len(labels) < 2:
            raise NoDataError(f"need at least two modifier classes, got {labels}")
        gamma = args.gamma if args.gamma is not None else DEFAULT_GAMMA
        model = train_svm(data, args.C, gamma)
        for m in model.machines:
            log.info("machine %s/%s: %d support vectors, KKT gap %.3g", m.positive, m.negative,
                     len(m.alpha), m.gap)
        meta.update(C=model.c, gamma=model.gamma)
        save_bundle(ModelBundle(svm=model, meta=meta), args.out)
    log.info("wrote %s", args.out)
    return EXIT_OK


# --------------------------------------------------------------------- lut

def _char_sample_sets(manifest_path, templates, isolated=True):
    man = Manifest.load(manifest_path)
    out: dict[str, list] = {}
    for row in man.rows:
        img = _load_image(man.image_path(row))
        seq = _isolated_features(img, templates) if isolated else _word_features(img, templates)
        out.setdefault(row.transcription[0], []).append(seq)
    return out


def _modifier_sample_sets(manifest_path):
    man = Manifest.load(manifest_path)
    out: dict[str, list] = {}
    for row in man.rows:
        out.setdefault(row.transcription[0], []).append(binarize(_load_image(man.image_path(row))))
    return out


def cmd_lut(args) -> int:
    from .xmap import build_lut_middle, build_lut_modifier, save_luts

    src = _middle_bundle(args.source)
    templates = _templates(args.templates)
    luts = {"middle": build_lut_middle(src.hmmset, _char_sample_sets(args.chars, templates))}
    for zone, bpath, samples in (("upper", args.upper, args.upper_samples),
                                 ("lower", args.lower, args.lower_samples)):
        b = _svm_bundle(bpath, zone)
        if b is not None and samples:
            luts[zone] = build_lut_modifier(b.svm, _modifier_sample_sets(samples), zone)
    meta = {"source": src.hmmset.script_id, "source_bundle": _file_hash(args.source)}
    save_bundle(ModelBundle(luts=luts, meta=meta), args.out)
    if args.tsv:
        save_luts(luts.values(), args.tsv)
    return EXIT_OK


# --------------------------------------------------------------- recognize

def _load_luts(path, source) -> dict:
    b = load_bundle(path)
    if "middle" not in b.luts:
        raise IncompatibleError(f"{path}: no middle-zone look-up table")
    unknown = set(b.luts["middle"].mapping.values()) - set(source.hmmset.models)
    if unknown:
        raise IncompatibleError(f"{path}: look-up table targets characters the source models lack: "
                                f"{sorted(unknown)}")
    return b.luts


def _recognizer(args):
    from .wordrec import Recognizer
    from .xmap import make_mid_lexicon

    src = _middle_bundle(args.middle)
    luts = _load_luts(args.luts, src)
    table = load_table(args.table)
    lexicon = load_words(args.lexicon)
    if not lexicon:
        raise NoDataError(f"{args.lexicon}: empty lexicon")
    svms = {}
    for zone in ("upper", "lower"):
        b = _svm_bundle(getattr(args, zone), zone)
        if b is not None:
            svms[zone] = b.svm
    triple = make_mid_lexicon(lexicon, table)
    return Recognizer(src.hmmset, luts, triple, table, svms, _templates(args.templates), args.topn)


@dataclass
class _RecJob:
    rec: object

    def __call__(self, path):
        return self.rec.recognize(_load_image(path))


def cmd_recognize(args) -> int:
    from .wordrec import evaluate_recognition, format_results

    rec = _recognizer(args)
    man = Manifest.load(args.manifest)
    results = _pmap(_RecJob(rec), [man.image_path(r) for r in man.rows], args.jobs)
    gold = [r.transcription for r in man.rows]
    _write_report(format_results([r.image for r in man.rows], gold, results, args.topn), args.out)
    m = evaluate_recognition(results, gold)
    print(f"top1\t{m.top1!r}\ntop5\t{m.top5!r}", file=sys.stderr)
    return EXIT_OK


# -------------------------------------------------------------------- spot

@dataclass
class _SpotJob:
    hmmset: object
    queries: list
    templates: list

    def __call__(self, path):
        from .phog import window_features
        from .wordspot import filler_score, spot_score
        from .zoneseg import split_zones

        split = split_zones(_load_image(path), self.templates)
        seq = window_features(split.middle_strip(), self.hmmset.width, self.hmmset.shift,
                              x_offset=split.x_span[0])
        table = self.hmmset.emissions(seq)
        filler = filler_score(seq, self.hmmset, table)
        return split, seq, [spot_score(seq, q, self.hmmset, table, filler) for q in self.queries]


def cmd_spot(args) -> int:
    from .wordspot import (Hit, decide, evaluate_retrieval, global_threshold, local_thresholds, make_query,
                           rerank_with_modifiers)

    src = _middle_bundle(args.middle)
    luts = _load_luts(args.luts, src)
    table = load_table(args.table)
    keywords = load_words(args.keywords)
    if not keywords:
        raise NoDataError(f"{args.keywords}: no keywords")
    queries = [make_query(k, table, luts["middle"]) for k in keywords]
    svms = {z: b.svm for z in ("upper", "lower") if (b := _svm_bundle(getattr(args, z), z)) is not None}
    templates = _templates(args.templates)
    job = _SpotJob(src.hmmset, queries, templates)

    thresholds = {k: args.threshold for k in keywords}
    if args.validation:
        vman = Manifest.load(args.validation)
        vres = _pmap(job, [vman.image_path(r) for r in vman.rows], args.jobs)
        per_kw = {k: ([res[2][i].score for res in vres], [r.transcription == k for r in vman.rows])
                  for i, k in enumerate(keywords)}
        if args.local:
            thresholds = local_thresholds(per_kw)
        else:
            t = global_threshold(per_kw)
            thresholds = {k: t for k in keywords}
    man = Manifest.load(args.manifest)
    res = _pmap(job, [man.image_path(r) for r in man.rows], args.jobs)
    rows, ranked, relevant = [], {}, {}
    for i, (kw, q) in enumerate(zip(keywords, queries)):
        hits = [Hit(r.image, split, scores[i], seq) for r, (split, seq, scores) in zip(man.rows, res)]
        hits.sort(key=lambda h: -h.score.score)
        t = thresholds[kw]
        if args.mode != "none":
            rr = rerank_with_modifiers(hits, q, svms, args.mode, luts, t)
            hits, kept_ok = rr.ranking, {id(h) for h in rr.kept}
        else:
            kept_ok = {id(h) for h in hits}
        accepted = [(h, decide(h.score, t) and id(h) in kept_ok) for h in hits]
        for h, acc in accepted:
            rows.append((format_word(kw), h.image, h.score.score, acc))
        ranked[kw] = [(h.image, acc) for h, acc in accepted]
        relevant[kw] = {r.image for r in man.rows if r.transcription == kw}
    text = "".join(f"{k}\t{img}\t{s!r}\t{int(a)}\n" for k, img, s, a in rows)
    _write_report(text, args.out)
    m = evaluate_retrieval(ranked, relevant)
    print(f"MAP\t{m.map!r}\nprecision\t{m.precision!r}\nrecall\t{m.recall!r}", file=sys.stderr)
    for kw in m.no_relevant:
        log.warning("keyword %s has no relevant image; AP counted as 0", format_word(kw))
    return EXIT_OK


# ---------------------------------------------------------------- simscore

def cmd_simscore(args) -> int:
    from .simscore import run_similarity

    if args.relative and not args.target_self:
        raise IncompatibleError("--relative needs --target-self (the target script's own models)")
    src = _middle_bundle(args.source)
    tgt = _middle_bundle(args.target_self) if args.target_self else None
    samples = _char_sample_sets(args.samples, _templates(args.templates))
    report = run_similarity(src.hmmset, samples, tgt.hmmset if tgt else None)
    text = report.to_tsv()
    text += f"# S_sim\t{report.s_sim!r}\n"
    if report.s_rel is not None:
        text += f"# S_ref\t{report.s_ref!r}\n# S_rel\t{report.s_rel!r}\n"
    _write_report(text, args.out)
    return EXIT_OK


def cmd_simmatrix(args) -> int:
    from .simscore import format_matrix, similarity_matrix

    scripts = []
    for spec in args.script:
        parts = spec.split(":")
        if len(parts) not in (3, 4):
            raise ConfigError(f"--script expects ID:BUNDLE:MANIFEST[:TEMPLATES], got {spec!r}")
        sid, bpath, mpath = parts[:3]
        templates = _templates(parts[3] if len(parts) == 4 else None)
        scripts.append((sid, _middle_bundle(bpath).hmmset, _char_sample_sets(mpath, templates)))
    ids, rows = similarity_matrix(scripts)
    _write_report(format_matrix(ids, rows), args.out)
    return EXIT_OK


# -------------------------------------------------------------------- grid

@dataclass
class _GridCell:
    train: list
    test: list
    lexicon: list
    iters: int
    seed: int

    def __call__(self, cell):
        from .ghmm import decode_nbest, train_hmms

        states, mixtures = cell
        t0 = time.perf_counter()
        run = train_hmms(self.train, states, mixtures, self.iters, "", None, self.seed)
        models = [run.hmmset.word_model(w) for w in self.lexicon]
        top1 = top5 = 0
        for seq, word in self.test:
            words = [e.word for e in decode_nbest(seq, models, 5, hmmset=run.hmmset)]
            top1 += words[:1] == [word]
            top5 += word in words
        n = max(len(self.test), 1)
        return states, mixtures, top1 / n, top5 / n, time.perf_counter() - t0


def grid_rows(train, test, lexicon, states, mixtures, iters, seed, jobs=1):
    cell = _GridCell(train, test, lexicon, iters, seed)
    return _pmap(cell, [(s, m) for s in states for m in mixtures], jobs)


def format_grid(rows) -> str:
    lines = ["states\tmixtures\ttop1\ttop5\tseconds"]
    for s, m, t1, t5, sec in rows:
        lines.append(f"{s}\t{m}\t{t1:.4f}\t{t5:.4f}\t{sec:.2f}")
    return "\n".join(lines) + "\n"


def cmd_grid(args) -> int:
    table = load_table(args.table)
    templates = _templates(args.templates)

    def load(path):
        man = Manifest.load(path)
        out = []
        for r in man.rows:
            missing = [c for c in r.transcription if c not in table]
            if missing:
                raise CoverageError("characters missing from the table", missing)
            out.append((_word_features(_load_image(man.image_path(r)), templates),
                        tuple(table[c].base for c in r.transcription)))
        return out

    train, test = load(args.manifest), load(args.test)
    if not train:
        raise NoDataError("empty training manifest")
    lexicon = list(dict.fromkeys(tuple(table[c].base for c in w) for w in load_words(args.lexicon)))
    rows = grid_rows(train, test, lexicon, args.states, args.mixtures, args.iters, args.seed, args.jobs)
    _write_report(format_grid(rows), args.out)
    return EXIT_OK


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="xlhwr", description="Cross-script handwritten word recognition and spotting")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("--jobs", type=int, default=1, help="worker processes for per-image work")
    # the same flags are accepted after the subcommand name
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS)
    common.add_argument("--jobs", type=int, default=argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", required=True)
    _add = sub.add_parser
    sub.add_parser = lambda *a, **kw: _add(*a, parents=[common], **kw)

    s = sub.add_parser("synth", help="render a synthetic source/target script pair")
    s.add_argument("config")
    s.add_argument("--out-dir")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("train", help="train middle-zone HMMs or a modifier SVM")
    s.add_argument("--manifest", required=True)
    s.add_argument("--zone", choices=("middle", "upper", "lower"), default="middle")
    s.add_argument("--table", help="decomposition table (middle zone)")
    s.add_argument("--templates", help="lower-modifier template directory")
    s.add_argument("--isolated", action="store_true", help="rows are isolated characters")
    s.add_argument("--states", type=int, default=DEFAULT_STATES)
    s.add_argument("--mixtures", type=int, default=DEFAULT_MIXTURES)
    s.add_argument("--iters", type=int, default=10)
    s.add_argument("--C", type=float, default=DEFAULT_C)
    s.add_argument("--gamma", type=float)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("lut", help="build target->source look-up tables")
    s.add_argument("--source", required=True, help="source middle-zone bundle")
    s.add_argument("--chars", required=True, help="manifest of isolated target characters")
    s.add_argument("--upper")
    s.add_argument("--lower")
    s.add_argument("--upper-samples")
    s.add_argument("--lower-samples")
    s.add_argument("--templates")
    s.add_argument("--tsv", help="also write a readable table")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_lut)

    for name, func in (("recognize", cmd_recognize), ("spot", cmd_spot)):
        s = sub.add_parser(name)
        s.add_argument("--middle", required=True)
        s.add_argument("--upper")
        s.add_argument("--lower")
        s.add_argument("--luts", required=True)
        s.add_argument("--table", required=True)
        s.add_argument("--templates")
        s.add_argument("--manifest", required=True)
        s.add_argument("--out")
        s.set_defaults(func=func)
        if name == "recognize":
            s.add_argument("--lexicon", required=True)
            s.add_argument("--topn", type=int, default=5)
        else:
            s.add_argument("--keywords", required=True)
            s.add_argument("--threshold", type=float, default=-np.inf)
            s.add_argument("--validation", help="manifest for threshold selection")
            s.add_argument("--local", action="store_true", help="per-keyword thresholds")
            s.add_argument("--mode", choices=("none", "counts", "labels"), default="counts")

    s = sub.add_parser("simscore", help="entropy-based script similarity")
    s.add_argument("--source", required=True)
    s.add_argument("--samples", required=True, help="manifest of isolated target characters")
    s.add_argument("--target-self")
    s.add_argument("--relative", action="store_true")
    s.add_argument("--templates")
    s.add_argument("--out")
    s.set_defaults(func=cmd_simscore)

    s = sub.add_parser("simmatrix", help="pairwise relative similarity matrix")
    s.add_argument("--script", action="append", required=True, metavar="ID:BUNDLE:MANIFEST[:TEMPLATES]")
    s.add_argument("--out")
    s.set_defaults(func=cmd_simmatrix)

    s = sub.add_parser("grid", help="states x mixtures sweep on a same-script corpus")
    s.add_argument("--manifest", required=True)
    s.add_argument("--test", required=True)
    s.add_argument("--lexicon", required=True)
    s.add_argument("--table", required=True)
    s.add_argument("--templates")
    s.add_argument("--states", type=int, nargs="+", default=[6, 7, 8, 9])
    s.add_argument("--mixtures", type=int, nargs="+", default=[16, 32, 64])
    s.add_argument("--iters", type=int, default=3)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_grid)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NoDataError, InsufficientFramesError) as exc:
        print(f"insufficient data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except BundleError as exc:
        print(f"bundle error: {exc}", file=sys.stderr)
        return EXIT_BUNDLE
    except CoverageError as exc:
        print(f"coverage error: {exc}", file=sys.stderr)
        return EXIT_COVERAGE
    except (OSError, PgmError, FormatError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
