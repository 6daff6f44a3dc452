"""Comment preprocessing: quote stripping, tokenization, tagging, lemmatization.

The built-in :class:`Tagger` is a lexicon-first rule tagger. It is exact on
the closed-class words (auxiliaries, pronouns, prepositions...) that most
patterns hinge on, and approximate elsewhere. Output of an external tagger
can be loaded with :func:`import_pretagged` instead.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import datetime
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import jsonschema

from . import lexicon as lx
from ._util import dumps_record, format_timestamp, parse_timestamp, read_jsonl
from .patterns import PosTag


@dataclass(frozen=True)
class RawComment:
    comment_id: str
    issue_id: str
    author: str
    created_at: datetime
    body: str

    @classmethod
    def from_record(cls, rec: dict) -> "RawComment":
        return cls(
            comment_id=str(rec["comment_id"]),
            issue_id=str(rec["issue_id"]),
            author=rec.get("author") or "",
            created_at=parse_timestamp(rec["created_at"]),
            body=rec.get("body") or "",
        )


@dataclass(frozen=True, slots=True)
class AnnotatedToken:
    surface: str
    lemma: str
    upos: PosTag
    is_url: bool
    index: int

    def to_record(self) -> dict:
        return {"surface": self.surface, "lemma": self.lemma, "upos": self.upos.value, "is_url": self.is_url}


Sentence = tuple[AnnotatedToken, ...]


@dataclass(frozen=True)
class AnnotatedComment:
    comment_id: str
    sentences: tuple[Sentence, ...]
    issue_id: str | None = None
    author: str | None = None
    created_at: datetime | None = field(default=None, compare=True)

    def __post_init__(self) -> None:
        for s in self.sentences:
            if not s:
                raise ValueError(f"comment {self.comment_id}: empty sentence")

    def lemmas(self, *, skip_punct: bool = True) -> list[str]:
        skip = {PosTag.PUNCT, PosTag.SYM} if skip_punct else set()
        return [t.lemma for s in self.sentences for t in s if t.upos not in skip]

    def to_record(self) -> dict:
        return {
            "comment_id": self.comment_id,
            "issue_id": self.issue_id,
            "author": self.author,
            "created_at": format_timestamp(self.created_at) if self.created_at else None,
            "sentences": [[t.to_record() for t in s] for s in self.sentences],
        }


# ---------------------------------------------------------------------------
# quote stripping

_FENCE = re.compile(r"^ {0,3}(`{3,}|~{3,})")
_QUOTE_LINE = re.compile(r"^ {0,3}>")
_BQ_TAG = re.compile(r"<(/?)blockquote\b[^>]*>", re.IGNORECASE)
_SENTINEL = "\x00"


def _remove_blockquote_spans(text: str) -> str:
    out = []
    depth = 0
    pos = 0
    for m in _BQ_TAG.finditer(text):
        closing = m.group(1) == "/"
        if depth == 0:
            if closing:
                continue  # stray close tag stays verbatim
            out.append(text[pos:m.start()])
            out.append(_SENTINEL)
            depth = 1
        else:
            depth += -1 if closing else 1
        pos = m.end()
    if depth == 0:
        out.append(text[pos:])
    return "".join(out)


def strip_quotes(body: str, strip_code: bool = True) -> str:
    """Remove quoted material (``>`` lines, ``<blockquote>`` spans) and fenced code.

    Lines outside those constructs are kept verbatim. An unclosed fence or
    blockquote swallows the rest of the body.
    """
    if _BQ_TAG.search(body):
        body = _remove_blockquote_spans(body)
    kept = []
    fence: str | None = None
    for line in body.split("\n"):
        if strip_code:
            m = _FENCE.match(line)
            if fence is None and m:
                fence = m.group(1)[0] * 3
                continue
            if fence is not None:
                if line.strip().startswith(fence) and line.strip().strip(fence[0]) == "":
                    fence = None
                continue
        if _QUOTE_LINE.match(line):
            continue
        if _SENTINEL in line:
            if not line.replace(_SENTINEL, "").strip():
                continue
            line = line.replace(_SENTINEL, "")
        kept.append(line)
    return "\n".join(kept).strip("\n")


# ---------------------------------------------------------------------------
# tokenization

_URL = r"(?:https?://|www\.)[^\s<>\"'`]+"
_TOKEN = re.compile(
    rf"(?P<url>{_URL})"
    r"|(?P<mention>@[A-Za-z0-9][A-Za-z0-9_\-]*)"
    r"|(?P<num>\d+(?:[.,:]\d+)+)"
    r"|(?P<word>[^\W_]+(?:['\-.][^\W_]+)*(?:n't|'[a-z]+)?)"
    r"|(?P<other>\S)"
)
_URL_TRAIL = ".,;:!?)]}'\""
_HTML_TAG = re.compile(r"</?[A-Za-z][^<>]*>")
_MARKDOWN_CHARS = frozenset("*_`~")
_PUNCT_CHARS = frozenset(".,;:!?'\"()[]{}-…/")
_NUMBER = re.compile(r"^[+-]?\d+(?:[.,:]\d+)*(?:st|nd|rd|th|x|k)?$")
_NUMBER_WORDS = lx._words("zero one two three four five six seven eight nine ten hundred thousand")


@dataclass(frozen=True)
class _RawToken:
    text: str
    start: int
    end: int
    is_url: bool = False


def _split_contraction(text: str, start: int) -> list[_RawToken]:
    low = text.lower()
    for suf in lx.CONTRACTION_SUFFIXES:
        if low.endswith(suf) and len(low) > len(suf):
            cut = len(text) - len(suf)
            return [_RawToken(text[:cut], start, start + cut), _RawToken(text[cut:], start + cut, start + len(text))]
    return [_RawToken(text, start, start + len(text))]


def tokenize(text: str) -> list[_RawToken]:
    text = text.replace("’", "'").replace("‘", "'")
    tokens: list[_RawToken] = []
    for m in _TOKEN.finditer(text):
        kind = m.lastgroup
        tok = m.group()
        if kind == "url":
            trimmed = tok.rstrip(_URL_TRAIL)
            tokens.append(_RawToken(trimmed, m.start(), m.start() + len(trimmed), True))
            for i, ch in enumerate(tok[len(trimmed):]):
                pos = m.start() + len(trimmed) + i
                tokens.append(_RawToken(ch, pos, pos + 1))
        elif kind == "word":
            tokens.extend(_split_contraction(tok, m.start()))
        elif kind == "other":
            if tok in _MARKDOWN_CHARS:
                continue
            tokens.append(_RawToken(tok, m.start(), m.end()))
        else:
            tokens.append(_RawToken(tok, m.start(), m.end()))
    return tokens


def _split_sentences(text: str, tokens: list[_RawToken]) -> list[list[_RawToken]]:
    sentences: list[list[_RawToken]] = []
    current: list[_RawToken] = []
    for i, tok in enumerate(tokens):
        current.append(tok)
        if tok.is_url or tok.text not in ".?!":
            continue
        nxt = tokens[i + 1] if i + 1 < len(tokens) else None
        if nxt is not None and nxt.text in ".?!" and nxt.start == tok.end:
            continue  # keep runs like "?!" or "..." together
        if nxt is None:
            boundary = True
        elif tok.text in "?!":
            boundary = nxt.start > tok.end
        else:
            prev = current[-2].text.lower() if len(current) >= 2 else ""
            gap = text[tok.end:nxt.start]
            boundary = bool(gap) and gap.isspace() and nxt.text[:1].isupper() and prev not in lx.ABBREVIATIONS
        if boundary:
            sentences.append(current)
            current = []
    if current:
        sentences.append(current)
    return sentences


# ---------------------------------------------------------------------------
# tagging and lemmatization

_KNOWN_OPEN = lx.VERB_LEMMAS | lx.AMBIGUOUS_NOUN_VERB | lx.NOUN_LEMMAS
_VOWELS = frozenset("aeiouy")
_E_RESTORE = ("at", "ut", "iz", "ys", "ag", "ur", "ar", "dl", "bl", "pl", "gl", "tl", "kl", "rs", "ov", "os")


def _repair_stem(stem: str) -> str:
    if stem in _KNOWN_OPEN:
        return stem
    if stem + "e" in _KNOWN_OPEN:
        return stem + "e"
    if len(stem) >= 3 and stem[-1] == stem[-2] and stem[-1] not in "lsz" and stem[-1] not in _VOWELS:
        return stem[:-1]
    if stem[-1] in "vcz" or stem.endswith(_E_RESTORE):
        return stem + "e"
    return stem


@lru_cache(maxsize=65536)
def lemmatize_open(word: str) -> str:
    """Lemma of an open-class word: irregular lexicon, then suffix stripping."""
    if word in lx.IRREGULAR_LEMMAS:
        return lx.IRREGULAR_LEMMAS[word]
    if word in _KNOWN_OPEN or len(word) <= 3 or not word.isalpha():
        return word
    if word.endswith(("ies", "ied")) and len(word) > 4:
        return word[:-3] + "y"
    if word.endswith("ing") and len(word) > 5:
        stem = word[:-3]
        if _VOWELS.intersection(stem):
            return _repair_stem(stem)
        return word
    if word.endswith("ed"):
        if word[:-1] in _KNOWN_OPEN:
            return word[:-1]
        stem = word[:-2]
        if len(stem) >= 2 and _VOWELS.intersection(stem):
            return _repair_stem(stem)
        return word
    if word.endswith("es") and len(word) > 4:
        if word[:-2] in _KNOWN_OPEN:
            return word[:-2]
        if word[:-1] in _KNOWN_OPEN:
            return word[:-1]
        if word[:-2].endswith(("s", "x", "z", "ch", "sh")):
            return word[:-2]
        return word[:-1]
    if word.endswith("s") and not word.endswith(("ss", "us", "is", "ous")):
        return word[:-1]
    return word


def _is_punct(tok: str) -> bool:
    return bool(tok) and not any(c.isalnum() for c in tok)


_URL_RE = re.compile(rf"^{_URL}$")
_VERBAL_FOLLOWERS = lx.VERB_LEMMAS | lx.AMBIGUOUS_NOUN_VERB


class Tagger:
    """Deterministic lexicon-and-suffix UPOS tagger with a rule lemmatizer.

    Instances hold no mutable state and may be shared between threads.
    """

    version = lx.LEXICON_VERSION

    def _lexical(self, tok: str) -> PosTag | str:
        if _URL_RE.match(tok):
            return PosTag.X
        if _is_punct(tok):
            return PosTag.PUNCT if all(c in _PUNCT_CHARS for c in tok) else PosTag.SYM
        if _NUMBER.match(tok) or tok in _NUMBER_WORDS:
            return PosTag.NUM
        if tok.startswith("@"):
            return PosTag.PROPN
        if tok in lx.AUX_WORDS:
            return PosTag.AUX
        if tok in lx.DO_FORMS:
            return "do"
        if tok in lx.HAVE_FORMS:
            return "have"
        if tok in ("like", "to"):
            return tok
        for words, tag in (
            (lx.PRON_WORDS, PosTag.PRON),
            (lx.DET_WORDS, PosTag.DET),
            (lx.PART_WORDS, PosTag.PART),
            (lx.ADP_WORDS, PosTag.ADP),
            (lx.CCONJ_WORDS, PosTag.CCONJ),
            (lx.SCONJ_WORDS, PosTag.SCONJ),
            (lx.INTJ_WORDS, PosTag.INTJ),
            (lx.ADJ_WORDS, PosTag.ADJ),
            (lx.ADV_WORDS, PosTag.ADV),
        ):
            if tok in words:
                return tag
        lemma = lemmatize_open(tok)
        if lemma in lx.AMBIGUOUS_NOUN_VERB and tok == lemma:
            return "nv"
        if tok.endswith("ly") and len(tok) > 4:
            return PosTag.ADV
        if lemma in lx.VERB_LEMMAS:
            return PosTag.VERB
        if lemma in lx.AMBIGUOUS_NOUN_VERB:
            # inflected form of an ambiguous lemma: -ing/-ed read as verbs
            return PosTag.VERB if tok.endswith(("ing", "ed")) else "nv"
        if tok.endswith(("tion", "sion", "ness", "ment", "ity", "ance", "ence", "ship")):
            return PosTag.NOUN
        if tok.endswith(("ous", "ful", "able", "ible", "ive", "less")):
            return PosTag.ADJ
        if tok.endswith(("ing", "ed")) and len(tok) > 4:
            return PosTag.VERB
        return PosTag.NOUN

    def tag(self, tokens: Sequence[str]) -> list[PosTag]:
        """Tag lowercased tokens with UPOS."""
        toks = [t.lower() for t in tokens]
        lex = [self._lexical(t) for t in toks]
        tags: list[PosTag] = []
        n = len(toks)

        def following(i: int, skip_pron: bool = False) -> str | None:
            j = i + 1
            while j < n and (toks[j] in ("not", "n't") or lex[j] is PosTag.ADV or (skip_pron and lex[j] is PosTag.PRON)):
                j += 1
            return toks[j] if j < n else None

        for i, (tok, lt) in enumerate(zip(toks, lex)):
            prev_tag = tags[i - 1] if i > 0 else None
            prev_tok = toks[i - 1] if i > 0 else None
            if isinstance(lt, PosTag):
                tags.append(lt)
                continue
            if lt == "do":
                nxt = toks[i + 1] if i + 1 < n else None
                nxt2 = toks[i + 2] if i + 2 < n else None
                aux = (
                    nxt in ("not", "n't")
                    or (nxt in lx.PRON_WORDS and nxt2 is not None and (
                        lemmatize_open(nxt2) in _VERBAL_FOLLOWERS or nxt2 in lx.ADV_WORDS or nxt2 in lx.HAVE_FORMS))
                )
                tags.append(PosTag.AUX if aux else PosTag.VERB)
            elif lt == "have":
                nxt = following(i, skip_pron=(prev_tag is None or prev_tag is PosTag.PUNCT))
                aux = nxt is not None and (
                    nxt in lx.IRREGULAR_PARTICIPLES or (nxt.endswith("ed") and len(nxt) > 3)
                )
                tags.append(PosTag.AUX if aux else PosTag.VERB)
            elif lt == "like":
                verbal = prev_tag in (PosTag.AUX, PosTag.PRON) or prev_tok in ("to", "do", "'d")
                tags.append(PosTag.VERB if verbal else PosTag.ADP)
            elif lt == "to":
                nxt = toks[i + 1] if i + 1 < n else None
                verbal = nxt is not None and (
                    nxt in ("be", "have", "do") or lemmatize_open(nxt) in _VERBAL_FOLLOWERS and nxt == lemmatize_open(nxt)
                )
                tags.append(PosTag.PART if verbal else PosTag.ADP)
            else:  # noun/verb ambiguous
                j = i - 1
                while j >= 0 and tags[j] is PosTag.ADV:
                    j -= 1
                p_tag = tags[j] if j >= 0 else None
                p_tok = toks[j] if j >= 0 else None
                verbal = p_tag in (PosTag.AUX, PosTag.PRON) or (p_tag is PosTag.PART and p_tok == "to") or p_tok in (
                    "please", "plz", "pls", "and", "or", "n't", "not")
                if p_tok in ("and", "or"):
                    verbal = j >= 1 and tags[j - 1] is PosTag.VERB
                tags.append(PosTag.VERB if verbal else PosTag.NOUN)
        return tags

    def lemmatize(self, token: str, upos: PosTag) -> str:
        tok = token.lower()
        if tok in lx.IRREGULAR_LEMMAS:
            return lx.IRREGULAR_LEMMAS[tok]
        if upos in (PosTag.NOUN, PosTag.VERB, PosTag.AUX):
            return lemmatize_open(tok)
        return tok


_DEFAULT_TAGGER = Tagger()


def tag_tokens(tokens: Sequence[str], tagger: Tagger | None = None) -> list[PosTag]:
    return (tagger or _DEFAULT_TAGGER).tag(tokens)


def annotate_text(text: str, tagger: Tagger | None = None, strip_code: bool = True) -> tuple[Sentence, ...]:
    """Quote-strip, split and annotate ``text`` into sentences."""
    tagger = tagger or _DEFAULT_TAGGER
    body = strip_quotes(text, strip_code=strip_code)
    body = _HTML_TAG.sub(" ", body)
    sentences: list[Sentence] = []
    for line in body.split("\n"):
        if not line.strip():
            continue
        raw = tokenize(line)
        for chunk in _split_sentences(line.replace("’", "'").replace("‘", "'"), raw):
            if all(_is_punct(t.text) and not t.is_url for t in chunk):
                continue
            tags = tagger.tag([t.text.lower() for t in chunk])
            sent = []
            for idx, (rt, tag) in enumerate(zip(chunk, tags)):
                if rt.is_url:
                    sent.append(AnnotatedToken(rt.text, rt.text.lower(), PosTag.X, True, idx))
                else:
                    sent.append(AnnotatedToken(rt.text, tagger.lemmatize(rt.text, tag), tag, False, idx))
            sentences.append(tuple(sent))
    return tuple(sentences)


def preprocess(raw: RawComment, tagger: Tagger | None = None, strip_code: bool = True) -> AnnotatedComment:
    return AnnotatedComment(
        comment_id=raw.comment_id,
        sentences=annotate_text(raw.body, tagger, strip_code=strip_code),
        issue_id=raw.issue_id,
        author=raw.author,
        created_at=raw.created_at,
    )


# ---------------------------------------------------------------------------
# pre-tagged corpus format


class PretaggedFormatError(ValueError):
    pass


@lru_cache(maxsize=1)
def pretagged_schema() -> dict:
    text = resources.files("leadmine.data").joinpath("pretagged.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def comment_from_record(rec: dict, record_no: int | None = None) -> AnnotatedComment:
    where = f"record {record_no}: " if record_no is not None else ""
    try:
        jsonschema.validate(rec, pretagged_schema())
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path)
        raise PretaggedFormatError(f"{where}schema violation at '{path}': {exc.message}") from None
    sentences = []
    for s in rec["sentences"]:
        toks = []
        for i, t in enumerate(s):
            upos = PosTag(t["upos"])
            toks.append(AnnotatedToken(t["surface"], t["lemma"], upos, bool(t["is_url"]), i))
        sentences.append(tuple(toks))
    created = rec.get("created_at")
    return AnnotatedComment(
        comment_id=str(rec["comment_id"]),
        sentences=tuple(sentences),
        issue_id=rec.get("issue_id"),
        author=rec.get("author"),
        created_at=parse_timestamp(created) if created else None,
    )


def import_pretagged(path: str | Path) -> list[AnnotatedComment]:
    """Load a line-delimited pre-tagged corpus, bypassing the built-in tagger."""
    out = []
    for record_no, (_, rec) in enumerate(read_jsonl(path), start=1):
        out.append(comment_from_record(rec, record_no))
    return out


def export_pretagged(comments: Iterable[AnnotatedComment], path: str | Path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for c in comments:
            fh.write(dumps_record(c.to_record()) + "\n")
            n += 1
    return n
