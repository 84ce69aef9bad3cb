import hashlib

import numpy as np
import pytest

from xlhwr.manifest import Manifest
from xlhwr.raster import binarize, h_projection
from xlhwr.synthscript import (CLEAN, MATRA_THICK, GroundTruth, RenderStyle, SyntheticScript, composite_id,
                               derive_script, gen_dataset, random_lexicon, random_script, render_word)


@pytest.fixture(scope="module")
def script():
    return random_script(20, 4, 4, seed=1)


def test_random_script_is_deterministic(script):
    assert random_script(20, 4, 4, seed=1).to_json() == script.to_json()


def test_different_seeds_give_different_strokes(script):
    other = random_script(20, 4, 4, seed=2)
    mine = {g.strokes for g in script.middle + script.upper + script.lower}
    theirs = {g.strokes for g in other.middle + other.upper + other.lower}
    assert mine.isdisjoint(theirs)


def test_bases_only_script():
    s = random_script(2, 0, 0, seed=7)
    assert len(s.table) == 2
    assert all(d.upper is None and d.lower is None for d in s.table.values())


def test_too_few_middle_glyphs():
    with pytest.raises(ValueError):
        random_script(1, 2, 2, seed=0)


def test_script_json_round_trip(script):
    back = SyntheticScript.from_json(script.to_json())
    assert back.table == script.table
    assert back.glyphs == script.glyphs


def test_table_is_full_product(script):
    assert len(script.table) == 20 * 5 * 5
    assert script.compose("S.m03", "S.u01", None) == composite_id("S.m03", "S.u01", None)
    assert script.compose("S.m03", "S.l09", None) is None


@pytest.mark.parametrize("rho, shared", [(0.0, 0), (0.5, 10), (1.0, 20)])
def test_derive_shares_ceil_fraction(script, rho, shared):
    tgt, mapping = derive_script(script, rho, seed=3)
    mids = {t for t in mapping if t in {g.glyph_id for g in tgt.middle}}
    assert len(mids) == shared
    mods = [t for t in mapping if t not in mids]
    assert len(mods) == 2 * int(np.ceil(rho * 4))


def test_full_overlap_is_bijection_with_same_arity(script):
    tgt, mapping = derive_script(script, 1.0, seed=3)
    assert len(set(mapping.values())) == len(mapping) == 28
    arity = lambda s: sorted((d.upper is not None, d.lower is not None) for d in s.table.values())  # noqa: E731
    assert arity(tgt) == arity(script)


def test_derive_rejects_bad_overlap(script):
    with pytest.raises(ValueError):
        derive_script(script, 1.5, seed=0)


def test_lexicon_is_distinct_and_in_table(script):
    lex = random_lexicon(script, 50, seed=4)
    assert len(set(lex)) == 50
    assert all(c in script.table and 3 <= len(w) <= 5 for w in lex for c in w)


def test_single_glyph_range_spans_ink(script):
    img, gt = render_word(script, ("S.m00",), CLEAN, seed=0)
    ink = binarize(img).data.copy()
    ink[gt.matra_band[0]:gt.matra_band[1] + 1] = False
    cols = np.flatnonzero(ink.any(axis=0))
    assert gt.char_ranges == [(int(cols[0]), int(cols[-1]))]


def test_upper_modifier_lies_over_its_base(script):
    word = ("S.m01", composite_id("S.m02", "S.u00", None), "S.m05")
    _, gt = render_word(script, word, RenderStyle(), seed=9)
    ups = [m for m in gt.modifiers if m.zone == "upper"]
    assert len(ups) == 1 and ups[0].base_index == 1 and ups[0].label == "S.u00"
    lo, hi = gt.char_ranges[1]
    assert lo - 2 <= ups[0].x_range[0] and ups[0].x_range[1] <= hi + 2


def test_render_errors(script):
    with pytest.raises(ValueError):
        render_word(script, ())
    with pytest.raises(KeyError):
        render_word(script, ("nope",))


def test_render_is_deterministic_and_has_matra(script):
    lex = random_lexicon(script, 10, seed=1)
    for k, w in enumerate(lex):
        a, ga = render_word(script, w, RenderStyle(), seed=k)
        b, gb = render_word(script, w, RenderStyle(), seed=k)
        np.testing.assert_array_equal(a.data, b.data)
        assert ga.to_json() == gb.to_json()
        proj = h_projection(binarize(a))
        top, bottom = ga.matra_band
        assert bottom - top + 1 == MATRA_THICK
        assert (proj[top:bottom + 1] > 0).all()


def test_ground_truth_ranges_ordered(script):
    lex = random_lexicon(script, 20, seed=2, p_upper=0.5, p_lower=0.5)
    for k, w in enumerate(lex):
        _, gt = render_word(script, w, RenderStyle(), seed=k)
        starts = [a for a, _ in gt.char_ranges]
        assert starts == sorted(starts)
        for zone in ("upper", "lower"):
            xr = [m.x_range for m in gt.modifiers if m.zone == zone]
            assert all(a[1] < b[0] for a, b in zip(xr, xr[1:]))
        assert GroundTruth.from_json(gt.to_json()) == gt


def test_style_validation():
    with pytest.raises(ValueError):
        RenderStyle(jitter=3.5)
    with pytest.raises(ValueError):
        RenderStyle(pepper=-0.1)


def _tree_hash(root):
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(p.relative_to(root).as_posix().encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def test_dataset_is_bit_identical(script, tmp_path):
    lex = random_lexicon(script, 10, seed=5)
    gen_dataset(script, lex, 12, RenderStyle(), seed=8, out_dir=tmp_path / "a")
    gen_dataset(script, lex, 12, RenderStyle(), seed=8, out_dir=tmp_path / "b")
    assert _tree_hash(tmp_path / "a") == _tree_hash(tmp_path / "b")


def test_dataset_rows_come_from_lexicon(script, tmp_path):
    lex = random_lexicon(script, 10, seed=5)
    man = Manifest.load(gen_dataset(script, lex, 100, RenderStyle(), seed=2, out_dir=tmp_path))
    assert len(man.rows) == 100
    assert all(r.transcription in lex for r in man.rows)
    assert all(man.image_path(r).is_file() and man.sidecar_path(r).is_file() for r in man.rows)


def test_empty_dataset(script, tmp_path):
    man = Manifest.load(gen_dataset(script, [("S.m00",)], 0, RenderStyle(), seed=2, out_dir=tmp_path))
    assert man.rows == []
    assert [p.name for p in tmp_path.iterdir()] == ["manifest.tsv"]
