import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import levenshtein_memo
from xlhwr.experiments import CorpusConfig, HmmConfig, SvmConfig, lower_templates, self_luts, train_source
from xlhwr.ghmm import Alignment
from xlhwr.phog import FeatureSequence
from xlhwr.synthscript import CLEAN, Decomposition, composite_id, random_lexicon, random_script, render_word
from xlhwr.wordrec import (RecognitionResult, Recognizer, associate_modifiers, char_x_ranges, evaluate_recognition,
                           format_results, levenshtein, lexicon_rank)
from xlhwr.xmap import make_mid_lexicon

short = st.text(alphabet="abcd", max_size=12)


# ---------------------------------------------------------- edit distance

def test_levenshtein_examples():
    assert levenshtein("abc", "abc") == 0
    assert levenshtein("", "abc") == 3
    assert levenshtein("kitten", "sitting") == 3
    assert levenshtein(("ক", "লি"), ("ক",)) == 1


@given(short, short)
def test_levenshtein_matches_recursive_oracle(a, b):
    assert levenshtein(a, b) == levenshtein_memo(a, b)


@given(short, short, short)
def test_levenshtein_is_a_metric(a, b, c):
    assert levenshtein(a, b) == levenshtein(b, a)
    assert levenshtein(a, c) <= levenshtein(a, b) + levenshtein(b, c)


def test_lexicon_rank():
    assert lexicon_rank(["abd"], ["abc", "xyz"]) == (tuple("abc"), 1)
    assert lexicon_rank(["xyz"], ["abc", "xyz"]) == (tuple("xyz"), 0)
    assert lexicon_rank(["abx"], ["abc", "abd"]) == (tuple("abc"), 1)     # tie keeps lexicon order
    assert lexicon_rank([], ["abc", "xbc"], fallback="xbc") == (tuple("xbc"), 0)
    with pytest.raises(ValueError):
        lexicon_rank(["a"], [])


# ---------------------------------------------------- modifier placement

TABLE = {composite_id(b, u, lo): Decomposition(b, u, lo)
         for b in ("a", "b", "c", "d") for u in (None, "U") for lo in (None, "L")}
RANGES = [(0, 9), (10, 19), (20, 29), (30, 39)]


def test_no_modifiers_gives_base_word():
    assert associate_modifiers(RANGES, [], ("a", "b", "c", "d"), TABLE) == [("a", "b", "c", "d")]


def test_centred_modifier_gives_three_candidates():
    out = associate_modifiers(RANGES, [("upper", "U", (13, 16))], ("a", "b", "c", "d"), TABLE)
    assert out == [("a", "b^U", "c", "d"), ("a^U", "b", "c", "d"), ("a", "b", "c^U", "d")]


def test_word_start_modifier_gives_two():
    out = associate_modifiers(RANGES, [("lower", "L", (2, 6))], ("a", "b", "c", "d"), TABLE)
    assert out == [("a_L", "b", "c", "d"), ("a", "b_L", "c", "d")]


def test_unknown_combination_becomes_fallback_token():
    out = associate_modifiers(RANGES[:1], [("upper", "Q", (2, 6))], ("a",), TABLE)
    assert out == [("a^Q",)]


def test_cap_keeps_strict_placement():
    mods = [("upper", "U", (r[0] + 3, r[0] + 6)) for r in RANGES] * 2
    out = associate_modifiers(RANGES, mods, ("a", "b", "c", "d"), TABLE, cap=9)
    assert out[0] == ("a^U", "b^U", "c^U", "d^U")
    assert len(out) <= 9


def test_char_ranges_tile_the_image():
    seq = FeatureSequence(np.zeros((20, 168)), 8, 3, x_offset=4)
    al = Alignment([(0, 4), (5, 11), (12, 19)], 0.0)
    ranges = char_x_ranges(al, seq, 80)
    assert ranges[0][0] == 0 and ranges[-1][1] == 79
    assert all(b[0] == a[1] + 1 for a, b in zip(ranges, ranges[1:]))


# ------------------------------------------------------------ evaluation

def _res(*words):
    return RecognitionResult([(tuple(w), (0, 0.0)) for w in words], None)


def test_evaluation_counts():
    m = evaluate_recognition([_res("ab", "cd")], ["ab"])
    assert (m.top1, m.top5) == (1.0, 1.0)
    m = evaluate_recognition([_res("x", "y", "ab")], ["ab"])
    assert (m.top1, m.top5) == (0.0, 1.0)
    with pytest.raises(ValueError):
        evaluate_recognition([_res("a")], [])


def test_ten_item_tally():
    gold = [f"w{i}" for i in range(10)]
    ranks = [1, 1, 2, 5, 6, None, 1, 3, None, 1]      # position of the gold word, None when absent
    results = []
    for g, r in zip(gold, ranks):
        words = [f"z{k}" for k in range(7)]
        if r is not None:
            words[r - 1] = g
        results.append(_res(*words))
    m = evaluate_recognition(results, gold)
    # rank 1: items 0, 1, 6, 9; within 5: those plus 2, 3, 7
    assert (m.top1, m.top5) == (0.4, 0.7)
    assert m.top1 <= m.top5


def test_result_tsv():
    text = format_results(["a.pgm"], [("x", "y")], [_res(("x", "y"), ("x",))], topn=3)
    assert text == "a.pgm\tx y\tx y\tx\t\n"


# -------------------------------------------------------- end to end

@pytest.fixture(scope="module")
def self_models():
    script = random_script(6, 2, 2, seed=2)
    corpus = CorpusConfig(n_middle=6, n_upper=2, n_lower=2, n_train=120)
    return script, train_source(script, corpus, HmmConfig(nstates=6, nmix=2, iters=4), SvmConfig(), seed=2)


def test_empty_lexicon_rejected(self_models):
    script, src = self_models
    with pytest.raises(ValueError):
        Recognizer(src.hmmset, self_luts(script), make_mid_lexicon([], script.table), script.table)


def test_self_script_identity_pipeline(self_models):
    script, src = self_models
    lexicon = random_lexicon(script, 5, seed=8)
    rec = Recognizer(src.hmmset, self_luts(script), make_mid_lexicon(lexicon, script.table), script.table,
                     src.svms, lower_templates(script, 2))
    # identity look-up tables make the source-mapped lexicon equal the middle-zone lexicon
    assert rec.triple.source == rec.triple.middle
    for k, w in enumerate(lexicon):
        img, _ = render_word(script, w, CLEAN, seed=k)
        r = rec.recognize(img)
        assert r.chosen == w
        assert r.candidates == sorted(r.candidates, key=lambda c: c[1])
