from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from leadmine.cli import bundled
from leadmine.patterns import (
    ALL_LABELS,
    Dictionary,
    DictionaryError,
    DictionaryRegistry,
    InDict,
    IsUrl,
    LeadershipLabel,
    LemmaIs,
    Pattern,
    PatternError,
    PosIs,
    PosTag,
    RankedPatternList,
    load_dictionaries,
    load_pattern_file,
    parse_pattern_line,
    parse_pattern_text,
    serialize_list,
)


@pytest.fixture
def registry():
    return DictionaryRegistry([Dictionary("inquiry_verb", frozenset({"provide", "give", "upload", "share"}))])


def test_label_and_tag_sets_are_closed():
    assert [lab.value for lab in ALL_LABELS] == ["LD1", "LD2", "LD3", "LD4", "LD5", "LD6", "N"]
    assert len(PosTag) == 17
    with pytest.raises(ValueError):
        PosTag.parse("VBZ")


def test_parse_three_element_inquiry_pattern(registry):
    p = parse_pattern_line("p1 LD4: [pos:AUX] [lemma:you] [dict:inquiry_verb]", registry)
    assert p.label is LeadershipLabel.LD4
    assert p.elements[0] == PosIs(PosTag.AUX)
    assert p.elements[1] == LemmaIs("you")
    assert isinstance(p.elements[2], InDict) and "provide" in p.elements[2].lemmas


def test_parse_url_element():
    p = parse_pattern_line("p2 LD2: [lemma:duplicate] [lemma:of] [url]")
    assert p.label is LeadershipLabel.LD2
    assert p.elements == (LemmaIs("duplicate"), LemmaIs("of"), IsUrl())


def test_source_project_annotation():
    p = parse_pattern_line("p9 LD1 @bitcoin: [lemma:try]")
    assert p.source_project == "bitcoin"
    assert parse_pattern_line(p.render()) == p


@pytest.mark.parametrize(
    "line, fragment",
    [
        ("p3 LD9: [lemma:x]", "label"),
        ("p3 N: [lemma:x]", "N"),
        ("p3 LD1: [pos:VBZ]", "VBZ"),
        ("p3 LD1: " + " ".join(["[lemma:x]"] * 9), "8"),
        ("p3 LD1: [lemma:X]", "lowercase"),
        ("p3 LD1 [lemma:x]", ":"),
        ("p3 LD1:", "element"),
        ("p3 LD1: [word:x]", "element"),
    ],
)
def test_parse_errors(line, fragment):
    with pytest.raises(PatternError) as exc:
        parse_pattern_line(line)
    assert fragment.lower() in str(exc.value).lower()


def test_parse_error_reports_column():
    with pytest.raises(PatternError) as exc:
        parse_pattern_line("p1 LD1: [lemma:ok] [bogus]")
    assert exc.value.column == 20


def test_pattern_file_order_comments_and_errors(tmp_path: Path, registry):
    f = tmp_path / "a.patterns"
    f.write_text("# header\nb LD1: [lemma:try]\n\na LD4: [pos:AUX] [lemma:you]\n")
    lst = load_pattern_file(f, registry)
    assert list(lst.ids) == ["b", "a"]

    f.write_text("a LD1: [lemma:x]\na LD2: [lemma:y]\n")
    with pytest.raises(PatternError, match="'a'") as exc:
        load_pattern_file(f)
    assert exc.value.line == 2

    f.write_text("a LD1: [dict:missing]\n")
    with pytest.raises(PatternError, match="missing"):
        load_pattern_file(f, registry)


def test_load_dictionaries(tmp_path: Path):
    (tmp_path / "inquiry_verb.txt").write_text("provide\ngive\nupload\nshare\n")
    (tmp_path / "close_verb.txt").write_text("# comment\nProvide\nprovide\n\n")
    reg = load_dictionaries(tmp_path)
    assert len(reg["inquiry_verb"]) == 4
    assert reg["close_verb"].lemmas == frozenset({"provide"})

    (tmp_path / "empty.txt").write_text("# nothing here\n")
    with pytest.raises(DictionaryError, match="empty"):
        load_dictionaries(tmp_path)


def test_duplicate_dictionary_names_rejected(tmp_path: Path):
    (tmp_path / "verbs.txt").write_text("a\n")
    (tmp_path / "Verbs.txt").write_text("b\n")
    with pytest.raises(DictionaryError):
        load_dictionaries(tmp_path)


def test_ranked_list_equality_is_order_sensitive():
    a = Pattern("a", LeadershipLabel.LD1, (LemmaIs("x"),))
    b = Pattern("b", LeadershipLabel.LD2, (LemmaIs("y"),))
    assert RankedPatternList([a, b]) != RankedPatternList([b, a])
    assert RankedPatternList([a, b]).moved("b", "a") == RankedPatternList([b, a])
    with pytest.raises(ValueError):
        RankedPatternList([a, a])


def test_serialize_small_lists():
    assert serialize_list([]) == ""
    pats = [Pattern(f"p{i}", LeadershipLabel.LD1, (LemmaIs(f"w{i}"),)) for i in range(3)]
    lines = serialize_list(pats).splitlines()
    assert [ln.split()[0] for ln in lines] == ["p0", "p1", "p2"]


def test_bundled_seed_file_round_trips():
    reg = load_dictionaries(bundled("dictionaries"))
    lst = load_pattern_file(bundled("patterns", "seed.patterns"), reg)
    assert len(lst) == 20
    again = parse_pattern_text(serialize_list(lst), reg)
    assert again == lst
    assert len(reg["inquiry_verb"]) >= 4 and {"provide", "give", "upload", "share"} <= reg["inquiry_verb"].lemmas


_lemma = st.text(alphabet="abcdefghijklmnopqrstuvwxyz'-", min_size=1, max_size=8)
_elem = st.one_of(
    _lemma.map(LemmaIs),
    st.sampled_from(list(PosTag)).map(PosIs),
    st.sampled_from(["d1", "d2"]).map(lambda n: InDict(n, frozenset({"q"}))),
    st.just(IsUrl()),
)
_pattern = st.builds(
    Pattern,
    st.text(alphabet="abcxyz_0123456789", min_size=1, max_size=6).map(lambda s: "p" + s),
    st.sampled_from(list(LeadershipLabel)[:6]),
    st.lists(_elem, min_size=1, max_size=8).map(tuple),
)


@given(st.lists(_pattern, max_size=12, unique_by=lambda p: p.id))
def test_round_trip_property(pats):
    reg = DictionaryRegistry([Dictionary("d1", frozenset({"q"})), Dictionary("d2", frozenset({"q"}))])
    lst = RankedPatternList(pats)
    assert parse_pattern_text(serialize_list(lst), reg) == lst
