"""Text formats shared by the command line and experiment scripts.

Manifest (TSV, UTF-8, ``#`` comments)::

    # script: S
    img_00000.pgm<TAB>S.m03 S.m11^u01<TAB>img_00000.gt.json

Transcriptions are whitespace-separated character tokens so arbitrary
Unicode character ids (including multi-codepoint ones) round-trip.

Decomposition table::

    S.m03^u01 = S.m03 +upper:S.u01
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .synthscript import Decomposition


class FormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


def parse_word(text: str) -> tuple[str, ...]:
    return tuple(text.split())


def format_word(word) -> str:
    return " ".join(word)


@dataclass
class ManifestRow:
    image: str
    transcription: tuple[str, ...]
    sidecar: str | None = None


@dataclass
class Manifest:
    script_id: str
    rows: list[ManifestRow]
    root: Path

    def image_path(self, row: ManifestRow) -> Path:
        return self.root / row.image

    def sidecar_path(self, row: ManifestRow) -> Path | None:
        return self.root / row.sidecar if row.sidecar else None

    def save(self, path: str | Path) -> None:
        lines = [f"# script: {self.script_id}"]
        for r in self.rows:
            cells = [r.image, format_word(r.transcription)]
            if r.sidecar:
                cells.append(r.sidecar)
            lines.append("\t".join(cells))
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Manifest":
        path = Path(path)
        script_id = ""
        rows = []
        for no, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("script:"):
                    script_id = body.split(":", 1)[1].strip()
                continue
            cells = line.split("\t")
            if len(cells) < 2 or len(cells) > 3:
                raise FormatError(f"expected 2 or 3 tab-separated fields, got {len(cells)}", no)
            word = parse_word(cells[1])
            if not word:
                raise FormatError("empty transcription", no)
            rows.append(ManifestRow(cells[0], word, cells[2] if len(cells) == 3 and cells[2] else None))
        return cls(script_id, rows, path.parent)


def save_table(table: dict[str, Decomposition], path: str | Path) -> None:
    lines = []
    for ch, d in table.items():
        parts = [f"{ch} = {d.base}"]
        if d.upper:
            parts.append(f"+upper:{d.upper}")
        if d.lower:
            parts.append(f"+lower:{d.lower}")
        lines.append(" ".join(parts))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_table(path: str | Path) -> dict[str, Decomposition]:
    table = {}
    for no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FormatError("expected 'char = base [+upper:u] [+lower:l]'", no)
        lhs, rhs = line.split("=", 1)
        ch = lhs.strip()
        toks = rhs.split()
        if not ch or not toks or toks[0].startswith("+"):
            raise FormatError("missing character or base", no)
        upper = lower = None
        for t in toks[1:]:
            if t.startswith("+upper:"):
                upper = t[len("+upper:"):]
            elif t.startswith("+lower:"):
                lower = t[len("+lower:"):]
            else:
                raise FormatError(f"unexpected token {t!r}", no)
        table[ch] = Decomposition(toks[0], upper, lower)
    return table


def load_words(path: str | Path) -> list[tuple[str, ...]]:
    """Keyword / lexicon file: one word per line."""
    out = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        if raw.strip() and not raw.lstrip().startswith("#"):
            out.append(parse_word(raw))
    return out


def save_words(words, path: str | Path) -> None:
    Path(path).write_text("".join(format_word(w) + "\n" for w in words), encoding="utf-8")


def save_mapping(mapping: dict[str, str], path: str | Path) -> None:
    Path(path).write_text("".join(f"{t}\t{s}\n" for t, s in mapping.items()), encoding="utf-8")


def load_mapping(path: str | Path) -> dict[str, str]:
    out = {}
    for no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not raw.strip():
            continue
        cells = raw.split("\t")
        if len(cells) != 2:
            raise FormatError("expected target<TAB>source", no)
        out[cells[0]] = cells[1]
    return out
