"""Target -> source character look-up tables and lexicon translation."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .synthscript import Decomposition

LUT_ZONES = ("middle", "upper", "lower")
EXPANSION_CAP = 10_000


class CoverageError(KeyError):
    """Characters missing from a table or look-up table."""

    def __init__(self, what: str, missing: Iterable[str]):
        self.missing = sorted(set(missing))
        super().__init__(f"{what}: {', '.join(self.missing)}")

    def __str__(self) -> str:
        return self.args[0]


@dataclass
class Lut:
    """Majority-vote mapping from target characters to source characters."""

    zone: str
    hist: dict[str, Counter] = field(default_factory=dict)
    mapping: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.zone not in LUT_ZONES:
            raise ValueError(f"unknown LUT zone {self.zone!r}")

    def __getitem__(self, target: str) -> str:
        return self.mapping[target]

    def __contains__(self, target: str) -> bool:
        return target in self.mapping

    def inverse(self) -> dict[str, list[str]]:
        """source -> target characters mapped onto it (insertion order)."""
        inv: dict[str, list[str]] = {}
        for t, s in self.mapping.items():
            inv.setdefault(s, []).append(t)
        return inv


def majority_vote(votes: Mapping[str, int], scores: Mapping[str, Sequence[float]] | None = None) -> str:
    """Histogram argmax; ties go to the higher mean score, then lowest label."""
    if not votes or max(votes.values()) <= 0:
        raise ValueError("empty vote histogram")
    top = max(votes.values())
    tied = sorted(s for s, v in votes.items() if v == top)
    if len(tied) > 1 and scores:
        def mean(s):
            vals = scores.get(s) or []
            return sum(vals) / len(vals) if vals else float("-inf")
        best = max(mean(s) for s in tied)
        tied = [s for s in tied if mean(s) == best]
    return tied[0]


def build_lut(zone: str, samples: Mapping[str, Sequence], recognize: Callable[[object], tuple[str, float]]) -> Lut:
    """Recognize every sample of every target character and vote."""
    lut = Lut(zone)
    for target, items in samples.items():
        if not items:
            raise ValueError(f"no samples for target character {target!r}")
        votes: Counter = Counter()
        scores: dict[str, list[float]] = {}
        for item in items:
            label, score = recognize(item)
            votes[label] += 1
            scores.setdefault(label, []).append(score)
        lut.hist[target] = votes
        lut.mapping[target] = majority_vote(votes, scores)
    return lut


def build_lut_middle(source, samples: Mapping[str, Sequence]) -> Lut:
    """`source` is an HmmSet; samples are isolated-character FeatureSequences."""
    from .ghmm import classify_isolated

    return build_lut("middle", samples, lambda seq: classify_isolated(seq, source))


def build_lut_modifier(source, samples: Mapping[str, Sequence], zone: str) -> Lut:
    """`source` is an SvmModel; samples are modifier Components."""
    from .rbfsvm import classify_component_scored

    if zone not in ("upper", "lower"):
        raise ValueError(f"modifier LUT zone must be upper or lower, got {zone!r}")
    return build_lut(zone, samples, lambda comp: classify_component_scored(source, comp))


# ----------------------------------------------------------------- lexicons

@dataclass
class LexiconTriple:
    words: list[tuple[str, ...]]                     # L^T
    middle: list[tuple[str, ...]]                    # L_M^T
    source: list[tuple[str, ...]] | None             # (L_M^S)_LUT
    layouts: list[list[tuple[str, str, int]]]        # (zone, label, base index)

    def __len__(self) -> int:
        return len(self.words)


def decompose_word(word: Sequence[str], table: Mapping[str, Decomposition]) -> tuple[tuple[str, ...], list[tuple[str, str, int]]]:
    missing = [c for c in word if c not in table]
    if missing:
        raise CoverageError("characters missing from the decomposition table", missing)
    middle, layout = [], []
    for i, c in enumerate(word):
        d = table[c]
        middle.append(d.base)
        if d.upper:
            layout.append(("upper", d.upper, i))
        if d.lower:
            layout.append(("lower", d.lower, i))
    return tuple(middle), layout


def make_mid_lexicon(words: Sequence[Sequence[str]], table: Mapping[str, Decomposition]) -> LexiconTriple:
    words = [tuple(w) for w in words]
    middle, layouts = [], []
    for w in words:
        m, lay = decompose_word(w, table)
        middle.append(m)
        layouts.append(lay)
    return LexiconTriple(words, middle, None, layouts)


def map_sequence(seq: Sequence[str], lut: Lut) -> tuple[str, ...]:
    missing = [c for c in seq if c not in lut]
    if missing:
        raise CoverageError("characters missing from the look-up table", missing)
    return tuple(lut[c] for c in seq)


def map_lexicon(triple: LexiconTriple, lut: Lut) -> LexiconTriple:
    missing = {c for m in triple.middle for c in m if c not in lut}
    if missing:
        raise CoverageError("characters missing from the look-up table", missing)
    source = [map_sequence(m, lut) for m in triple.middle]
    return LexiconTriple(triple.words, triple.middle, source, triple.layouts)


def resolve_one_to_many(source_labels: Sequence[str], lut: Lut, triple: LexiconTriple) -> list[tuple[str, ...]]:
    """Target middle-zone words whose LUT image equals `source_labels`.

    Substituting every inverse candidate at every position and keeping the
    in-lexicon results is the same as keeping lexicon words that map onto
    the label sequence; the latter is what runs, so the expansion never
    materializes and the candidate cap is never reached.
    """
    labels = tuple(source_labels)
    inv = lut.inverse()
    if any(s not in inv for s in labels):
        return []
    out, seen = [], set()
    for m in triple.middle:
        if len(m) != len(labels) or m in seen:
            continue
        if all(lut.mapping.get(c) == s for c, s in zip(m, labels)):
            seen.add(m)
            out.append(m)
    return out


# ---------------------------------------------------------------- LUT files

def save_luts(luts: Iterable[Lut], path: str | Path) -> None:
    lines = []
    for lut in luts:
        for target, source in lut.mapping.items():
            hist = lut.hist.get(target, Counter())
            cells = ",".join(f"{s}={n}" for s, n in sorted(hist.items(), key=lambda kv: (-kv[1], kv[0])))
            lines.append(f"{lut.zone}\t{target}\t{source}\thist:{cells}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_luts(path: str | Path) -> dict[str, Lut]:
    from .manifest import FormatError

    luts: dict[str, Lut] = {}
    for no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not raw.strip() or raw.startswith("#"):
            continue
        cells = raw.split("\t")
        if len(cells) != 4 or not cells[3].startswith("hist:"):
            raise FormatError("expected zone<TAB>target<TAB>source<TAB>hist:...", no)
        zone, target, source, hist = cells
        lut = luts.setdefault(zone, Lut(zone))
        counts: Counter = Counter()
        body = hist[len("hist:"):]
        for item in filter(None, body.split(",")):
            s, _, n = item.rpartition("=")
            counts[s] = int(n)
        lut.hist[target] = counts
        lut.mapping[target] = source
    return luts


def identity_lut(chars: Iterable[str], zone: str = "middle") -> Lut:
    lut = Lut(zone)
    for c in chars:
        lut.hist[c] = Counter({c: 1})
        lut.mapping[c] = c
    return lut
