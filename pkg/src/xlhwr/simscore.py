"""Entropy-based script similarity.

Each target character is recognized many times by source-script models; the
spread of the winning source labels (its entropy) says how ambiguously the
character maps. Weighted over the alphabet and divided by the target
script's self-score this gives a relative similarity index.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

WEIGHT_TOL = 1e-6


@dataclass(frozen=True)
class EntropyRecord:
    char: str
    counts: dict[str, int]
    k: int
    h: float
    hn: float
    s: float


@dataclass
class SimilarityReport:
    records: list[EntropyRecord]
    weights: list[float]
    s_sim: float
    s_ref: float | None = None
    s_rel: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return len(self.records)

    def to_tsv(self) -> str:
        lines = ["char\tK\tH\tH_N\tS\tW"]
        for r, w in zip(self.records, self.weights):
            lines.append(f"{r.char}\t{r.k}\t{r.h!r}\t{r.hn!r}\t{r.s!r}\t{w!r}")
        return "\n".join(lines) + "\n"


def recognition_histogram(samples: Sequence, recognize: Callable[[object], str]) -> Counter:
    """Vote counts of the recognizer's label over every sample."""
    if not samples:
        raise ValueError("no samples")
    return Counter(recognize(x) for x in samples)


def hmm_recognizer(source) -> Callable[[object], str]:
    from .ghmm import classify_isolated

    return lambda seq: classify_isolated(seq, source)[0]


def entropy(counts: Mapping[str, int] | Sequence[int]) -> float:
    """Shannon entropy in bits of a vote histogram."""
    values = list(counts.values()) if isinstance(counts, Mapping) else list(counts)
    if any(v < 0 for v in values):
        raise ValueError("negative count")
    total = sum(values)
    if total <= 0:
        raise ValueError("all-zero histogram")
    h = 0.0
    for v in values:
        if v:
            p = v / total
            h -= p * math.log2(p)
    return max(h, 0.0)


def normalized_entropy(h: float, k: int) -> float:
    """Entropy over one plus the largest entropy achievable with `k` outcomes."""
    if k < 1:
        raise ValueError("K must be >= 1")
    if h < 0 or h > math.log2(k) + 1e-12:
        raise ValueError(f"entropy {h} impossible with K={k}")
    return h / (1.0 + math.log2(k))


def char_similarity(hn: float) -> float:
    if not 0.0 <= hn < 1.0:
        raise ValueError(f"normalized entropy {hn} outside [0, 1)")
    return 1.0 - hn


def entropy_record(char: str, counts: Mapping[str, int]) -> EntropyRecord:
    counts = {c: int(n) for c, n in counts.items() if n}
    k = len(counts)
    h = entropy(counts)
    hn = normalized_entropy(h, k)
    return EntropyRecord(char, counts, k, h, hn, char_similarity(hn))


def script_similarity(records: Sequence[EntropyRecord], weights: Sequence[float]) -> float:
    """(1 - sum_i H_N(i) * W_i) / M with M the number of target characters."""
    if len(records) != len(weights) or not records:
        raise ValueError("need one weight per record and at least one record")
    if abs(math.fsum(weights) - 1.0) > WEIGHT_TOL:
        raise ValueError(f"weights sum to {math.fsum(weights)}, not 1")
    return (1.0 - math.fsum(r.hn * w for r, w in zip(records, weights))) / len(records)


def relative_similarity(s_sim: float, s_ref: float) -> float:
    if s_ref == 0:
        raise ZeroDivisionError("reference similarity is zero")
    return s_sim / s_ref


def frequency_weights(samples: Mapping[str, Sequence]) -> list[float]:
    total = sum(len(v) for v in samples.values())
    if total == 0:
        raise ValueError("no samples")
    return [len(v) / total for v in samples.values()]


def similarity_report(samples: Mapping[str, Sequence], recognize: Callable[[object], str],
                      weights: Sequence[float] | None = None) -> SimilarityReport:
    empty = [c for c, v in samples.items() if not v]
    if empty:
        from .xmap import CoverageError

        raise CoverageError("target characters without samples", empty)
    records = [entropy_record(c, recognition_histogram(v, recognize)) for c, v in samples.items()]
    weights = frequency_weights(samples) if weights is None else list(weights)
    return SimilarityReport(records, weights, script_similarity(records, weights))


def run_similarity(source, samples: Mapping[str, Sequence], target_self=None,
                   recognize: Callable | None = None,
                   recognize_self: Callable | None = None) -> SimilarityReport:
    """Score target `samples` against `source` models, relative to the target's own models.

    `source` and `target_self` are HmmSets unless explicit recognizers are
    given. Without a self reference only the absolute score is filled in.
    """
    rec = recognize or hmm_recognizer(source)
    report = similarity_report(samples, rec)
    if target_self is not None or recognize_self is not None:
        ref_rec = recognize_self or hmm_recognizer(target_self)
        if ref_rec is rec or (recognize is None and recognize_self is None and target_self is source):
            ref = report
        else:
            ref = similarity_report(samples, ref_rec, report.weights)
        report.s_ref = ref.s_sim
        report.s_rel = relative_similarity(report.s_sim, ref.s_sim)
    return report


def similarity_matrix(scripts: Sequence[tuple[str, object, Mapping[str, Sequence]]]) -> tuple[list[str], list[list[float]]]:
    """Relative similarity of every (target row, source column) pair.

    Each entry of `scripts` is (script id, HmmSet, isolated-character samples).
    """
    if len(scripts) < 2:
        raise ValueError("need at least two scripts")
    ids = [sid for sid, _, _ in scripts]
    refs = {}
    for sid, models, samples in scripts:
        refs[sid] = similarity_report(samples, hmm_recognizer(models))
    rows = []
    for tid, _, samples in scripts:
        row = []
        for sid, models, _ in scripts:
            if sid == tid:
                row.append(relative_similarity(refs[tid].s_sim, refs[tid].s_sim))
            else:
                rep = similarity_report(samples, hmm_recognizer(models), refs[tid].weights)
                row.append(relative_similarity(rep.s_sim, refs[tid].s_sim))
        rows.append(row)
    return ids, rows


def format_matrix(ids: Sequence[str], rows: Sequence[Sequence[float]]) -> str:
    lines = ["target\\source\t" + "\t".join(ids)]
    for tid, row in zip(ids, rows):
        lines.append(tid + "\t" + "\t".join(f"{v:.4f}" for v in row))
    return "\n".join(lines) + "\n"


def write_matrix(path: str | Path, ids: Sequence[str], rows: Sequence[Sequence[float]]) -> None:
    Path(path).write_text(format_matrix(ids, rows), encoding="utf-8")
