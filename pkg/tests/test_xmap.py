from collections import Counter

import pytest

from xlhwr.experiments import (SimilarityConfig, SvmConfig, char_samples, lower_templates, modifier_samples,
                               train_char_models, train_modifier_svms)
from xlhwr.synthscript import Decomposition, random_script
from xlhwr.xmap import (CoverageError, Lut, build_lut, build_lut_middle, build_lut_modifier, identity_lut,
                        load_luts, majority_vote, make_mid_lexicon, map_lexicon, resolve_one_to_many, save_luts)


def _lut(zone, mapping):
    return Lut(zone, {t: Counter({s: 1}) for t, s in mapping.items()}, dict(mapping))


def test_majority_vote_argmax():
    assert majority_vote({"s1": 7, "s2": 3}) == "s1"


def test_tie_goes_to_confidence_then_label():
    assert majority_vote({"u2": 5, "u1": 5}) == "u1"
    assert majority_vote({"u1": 5, "u2": 5}, {"u1": [0.2], "u2": [0.9]}) == "u2"
    assert majority_vote({"u1": 5, "u2": 5}, {"u1": [0.5], "u2": [0.5]}) == "u1"
    with pytest.raises(ValueError):
        majority_vote({})


def test_build_lut_records_histograms():
    samples = {"x": [1, 2, 3, 4], "y": [5, 6]}
    lut = build_lut("middle", samples, lambda v: ("a" if v < 4 else "b", float(v)))
    assert lut.hist["x"] == Counter({"a": 3, "b": 1})
    assert lut.mapping == {"x": "a", "y": "b"}
    for t, h in lut.hist.items():
        assert lut[t] == majority_vote(h)
    with pytest.raises(ValueError):
        build_lut("middle", {"x": []}, lambda v: ("a", 0.0))
    with pytest.raises(ValueError):
        Lut("sideways")


def test_modifier_zone_checked():
    with pytest.raises(ValueError):
        build_lut_modifier(None, {"u": [object()]}, "middle")


def test_bare_word_lexicon():
    table = {c: Decomposition(c) for c in "abc"}
    triple = make_mid_lexicon([("a", "b", "c")], table)
    assert triple.middle == [("a", "b", "c")] and triple.layouts == [[]]
    mapped = map_lexicon(triple, identity_lut("abc"))
    assert mapped.source == mapped.middle


def test_layout_records_base_index():
    table = {"a": Decomposition("a"), "b": Decomposition("b"), "c^u": Decomposition("c", "u")}
    triple = make_mid_lexicon([("a", "b", "c^u")], table)
    assert triple.middle == [("a", "b", "c")]
    assert triple.layouts == [[("upper", "u", 2)]]


def test_bengali_word_two_step_mapping():
    # visual-order tokens; the i-kar leaves an aa-kar-like stroke ahead of its consonant
    table = {"ক": Decomposition("ক"), "ি": Decomposition("া", "ি"), "ল": Decomposition("ল"),
             "য়ু": Decomposition("য", None, "়ু"), "গ": Decomposition("গ")}
    lut = _lut("middle", {"ক": "क", "া": "ा", "ল": "ल", "য": "य", "গ": "ग"})
    triple = map_lexicon(make_mid_lexicon([("ক", "ি", "ল", "য়ু", "গ")], table), lut)
    assert "".join(triple.middle[0]) == "কালযগ"
    assert "".join(triple.source[0]) == "कालयग"


def test_missing_mapping_is_named():
    table = {c: Decomposition(c) for c in "ab"}
    with pytest.raises(CoverageError) as err:
        map_lexicon(make_mid_lexicon([("a", "b")], table), identity_lut("a"))
    assert err.value.missing == ["b"]
    with pytest.raises(CoverageError):
        make_mid_lexicon([("z",)], table)


def test_one_to_many_fixture():
    lut = _lut("middle", {"d": "u", "v": "u", "k": "k", "a": "a"})
    table = {c: Decomposition(c) for c in "dvka"}
    triple = make_mid_lexicon([("d", "a", "k"), ("v", "a", "k"), ("k", "a", "d"), ("d", "a", "d")], table)
    assert resolve_one_to_many(("u", "a", "k"), lut, triple) == [("d", "a", "k"), ("v", "a", "k")]
    assert resolve_one_to_many(("k", "a", "u"), lut, triple) == [("k", "a", "d")]
    assert resolve_one_to_many(("a", "a", "a"), lut, triple) == []
    assert resolve_one_to_many(("q",), lut, triple) == []


def test_injective_lut_gives_direct_inverse():
    lut = _lut("middle", {"x": "1", "y": "2"})
    triple = make_mid_lexicon([("x", "y"), ("y", "x")], {c: Decomposition(c) for c in "xy"})
    assert resolve_one_to_many(("2", "1"), lut, triple) == [("y", "x")]


def test_lut_file_round_trip(tmp_path):
    mid = Lut("middle", {"ক": Counter({"क": 7, "फ": 3})}, {"ক": "क"})
    up = Lut("upper", {"u1": Counter({"s2": 5, "s1": 5})}, {"u1": "s1"})
    save_luts([mid, up], tmp_path / "lut.tsv")
    assert "middle\tক\tक\thist:क=7,फ=3" in (tmp_path / "lut.tsv").read_text(encoding="utf-8")
    back = load_luts(tmp_path / "lut.tsv")
    assert back["middle"].mapping == mid.mapping and back["middle"].hist == mid.hist
    assert back["upper"].hist == up.hist


@pytest.fixture(scope="module")
def small_script():
    return random_script(8, 3, 3, seed=4)


def test_self_mapping_middle(small_script):
    cfg = SimilarityConfig(train_samples=8, test_samples=8)
    models = train_char_models(small_script, cfg, seed=4)
    samples = char_samples(small_script, 8, seed=99, templates=lower_templates(small_script, 4))
    lut = build_lut_middle(models, samples)
    same = sum(lut[c] == c for c in lut.mapping)
    assert same >= 0.95 * len(lut.mapping)


def test_self_mapping_modifiers(small_script):
    svms = train_modifier_svms(small_script, SvmConfig(), seed=4)
    for zone in ("upper", "lower"):
        lut = build_lut_modifier(svms[zone], modifier_samples(small_script, zone, 8, seed=77), zone)
        same = sum(lut[c] == c for c in lut.mapping)
        assert same >= 0.95 * len(lut.mapping)
