import json
from datetime import datetime, timezone

import pytest
from hypothesis import given, strategies as st

from leadmine.patterns import PosTag
from leadmine.preprocess import (
    AnnotatedComment,
    PretaggedFormatError,
    RawComment,
    annotate_text,
    export_pretagged,
    import_pretagged,
    lemmatize_open,
    preprocess,
    strip_quotes,
    tag_tokens,
    tokenize,
)

T0 = datetime(2021, 5, 1, tzinfo=timezone.utc)


def raw(body: str, cid: str = "c1") -> RawComment:
    return RawComment(cid, "i1", "alice", T0, body)


def words(sentence):
    return [t.surface for t in sentence]


class TestStripQuotes:
    def test_markdown_quote_line(self):
        assert strip_quotes("> Have you tried safe mode?\nYes, same error.") == "Yes, same error."

    def test_no_quotes_unchanged(self):
        body = "First line.\n\nSecond line with a > sign inside."
        assert strip_quotes(body) == body

    def test_fenced_code_removed(self):
        assert strip_quotes("```\ncode\n```\nTry install Bitcoin Core 0.17.") == "Try install Bitcoin Core 0.17."

    def test_fence_kept_when_disabled(self):
        assert "code" in strip_quotes("```\ncode\n```\nok", strip_code=False)

    def test_unclosed_fence_strips_to_end(self):
        assert strip_quotes("keep\n~~~\nlost\nlost too") == "keep"

    def test_blockquote_spans_nested(self):
        body = "a <blockquote>x <blockquote>y</blockquote> z</blockquote> b\nnext"
        assert strip_quotes(body) == "a  b\nnext"

    def test_blockquote_only_line_dropped(self):
        assert strip_quotes("<blockquote>quoted</blockquote>\nreply") == "reply"

    def test_indented_quote_marker(self):
        assert strip_quotes("   > quoted\n    > code-indented stays") == "    > code-indented stays"


@given(st.lists(st.text(alphabet="abc xyz.>`~<", max_size=12), max_size=8))
def test_unquoted_lines_survive(lines):
    body = "\n".join(lines)
    kept = strip_quotes(body).split("\n")
    for ln in lines:
        s = ln.lstrip(" ")
        if s.startswith(("```", "~~~")):
            # fence toggles are structural; stop checking once any fence appears
            break
        if "<blockquote" in ln.lower():
            break
        if len(ln) - len(s) <= 3 and s.startswith(">"):
            continue
        if ln.strip():
            assert ln in kept


class TestTokenizeAndSplit:
    def test_url_is_one_token(self):
        (sent,) = annotate_text("Duplicate of https://x.y/z")
        assert words(sent) == ["Duplicate", "of", "https://x.y/z"]
        assert sent[2].is_url and sent[2].upos is PosTag.X
        assert not sent[0].is_url

    def test_url_trailing_punctuation_trimmed(self):
        toks = [t.text for t in tokenize("see https://a.b/c).")]
        assert "https://a.b/c" in toks

    def test_sentence_split(self):
        sents = annotate_text("Can you provide more information? I've just done a build.")
        assert len(sents) == 2
        assert words(sents[0])[:3] == ["Can", "you", "provide"]

    def test_version_and_abbreviation_not_split(self):
        assert len(annotate_text("Try v0.17.1 e.g. with the flag.")) == 1

    def test_newline_is_hard_split(self):
        assert len(annotate_text("first part\nsecond part")) == 2

    def test_empty_body_gives_no_sentences(self):
        assert annotate_text("") == ()
        assert annotate_text("> only a quote") == ()

    def test_contractions_split(self):
        toks = [t.text for t in tokenize("I've can't")]
        assert toks == ["I", "'ve", "ca", "n't"]

    def test_markdown_emphasis_dropped(self):
        (sent,) = annotate_text("**Please** reopen `this`")
        assert words(sent) == ["Please", "reopen", "this"]


class TestTagger:
    def test_can_you_provide(self):
        assert tag_tokens(["can", "you", "provide"]) == [PosTag.AUX, PosTag.PRON, PosTag.VERB]

    def test_number(self):
        assert tag_tokens(["17576"]) == [PosTag.NUM]

    def test_duplicate_of_resolves_noun(self):
        assert tag_tokens(["duplicate", "of"]) == [PosTag.NOUN, PosTag.ADP]

    def test_ambiguous_word_after_modal_is_verb(self):
        assert tag_tokens(["i", "will", "fix", "it"])[2] is PosTag.VERB

    def test_suffix_rules(self):
        assert tag_tokens(["quickly"]) == [PosTag.ADV]
        assert tag_tokens(["configuration"]) == [PosTag.NOUN]

    def test_every_token_has_a_upos(self):
        for sent in annotate_text("Well... that's weird!!! 3 × 4 = 12 :) @bob #12"):
            assert all(isinstance(t.upos, PosTag) for t in sent)

    def test_lemmas(self):
        assert [lemmatize_open(w) for w in ("uploading", "tried", "fixes", "stopped", "using", "issues")] == [
            "upload", "try", "fix", "stop", "use", "issue",
        ]


class TestPreprocess:
    def test_can_token(self):
        c = preprocess(raw("Can you provide more information?"))
        assert len(c.sentences) == 1
        tok = c.sentences[0][0]
        assert (tok.lemma, tok.upos) == ("can", PosTag.AUX)

    def test_token_invariants(self):
        c = preprocess(raw("Closing this. See https://example.com/a for the FAQ!\nThanks, Bob."))
        for sent in c.sentences:
            assert sent
            assert [t.index for t in sent] == list(range(len(sent)))
            for t in sent:
                assert t.lemma == t.lemma.lower()
                assert not t.is_url or t.upos is PosTag.X

    def test_deterministic(self):
        body = "I would like to work on this. It's just a workaround... plz reopen this."
        assert preprocess(raw(body)) == preprocess(raw(body))

    def test_empty_comment(self):
        assert preprocess(raw("")).sentences == ()


class TestPretagged:
    def test_round_trip(self, tmp_path):
        comments = [preprocess(raw("Can you share the log?", "a")), preprocess(raw("Duplicate of #12. Closing.", "b"))]
        p = tmp_path / "c.jsonl"
        assert export_pretagged(comments, p) == 2
        back = import_pretagged(p)
        assert back == comments
        assert all(isinstance(c, AnnotatedComment) for c in back)

    def test_bad_upos_names_record(self, tmp_path):
        good = preprocess(raw("Can you share the log?", "a")).to_record()
        bad = json.loads(json.dumps(good))
        bad["sentences"][0][0]["upos"] = "VBZ"
        p = tmp_path / "c.jsonl"
        p.write_text(json.dumps(good) + "\n" + json.dumps(bad) + "\n")
        with pytest.raises(PretaggedFormatError, match="record 2"):
            import_pretagged(p)

    def test_missing_field(self, tmp_path):
        p = tmp_path / "c.jsonl"
        p.write_text(json.dumps({"comment_id": "x"}) + "\n")
        with pytest.raises(PretaggedFormatError):
            import_pretagged(p)
