import pytest
from hypothesis import given
from hypothesis import strategies as st

from xlhwr.manifest import (FormatError, Manifest, ManifestRow, format_word, load_mapping, load_table,
                            load_words, parse_word, save_mapping, save_table, save_words)
from xlhwr.synthscript import Decomposition

token = st.text(alphabet=st.characters(blacklist_categories=("Zs", "Zl", "Zp", "Cc", "Cs")), min_size=1, max_size=4)


@given(st.lists(token, min_size=1, max_size=6))
def test_word_round_trip(word):
    assert parse_word(format_word(word)) == tuple(word)


def test_manifest_round_trip(tmp_path):
    rows = [ManifestRow("a.pgm", ("ক", "লি"), "a.gt.json"), ManifestRow("b.pgm", ("x",))]
    Manifest("B", rows, tmp_path).save(tmp_path / "m.tsv")
    back = Manifest.load(tmp_path / "m.tsv")
    assert back.script_id == "B"
    assert back.rows == rows


def test_manifest_bad_row(tmp_path):
    p = tmp_path / "m.tsv"
    p.write_text("# script: S\nonlyonefield\n", encoding="utf-8")
    with pytest.raises(FormatError) as err:
        Manifest.load(p)
    assert err.value.line == 2


def test_table_round_trip(tmp_path):
    table = {"ক": Decomposition("ক"), "কি": Decomposition("ক", "ি"), "কু": Decomposition("ক", None, "ু"),
             "x": Decomposition("b", "u", "l")}
    save_table(table, tmp_path / "t.txt")
    assert load_table(tmp_path / "t.txt") == table


@pytest.mark.parametrize("line", ["no equals sign", "x = +upper:u", "x = b +side:q"])
def test_table_errors(tmp_path, line):
    p = tmp_path / "t.txt"
    p.write_text(line + "\n", encoding="utf-8")
    with pytest.raises(FormatError):
        load_table(p)


def test_words_and_mapping(tmp_path):
    save_words([("a", "b"), ("c",)], tmp_path / "w.txt")
    assert load_words(tmp_path / "w.txt") == [("a", "b"), ("c",)]
    save_mapping({"T.m00": "S.m04"}, tmp_path / "map.tsv")
    assert load_mapping(tmp_path / "map.tsv") == {"T.m00": "S.m04"}
