"""Pattern DSL, dictionaries, labels and the ranked pattern list.

A pattern file holds one pattern per line::

    # comment
    p1 LD4: [pos:AUX] [lemma:you] [dict:inquiry_verb]
    p2 LD2 @atom: [lemma:duplicate] [lemma:of] [url]

The optional ``@project`` tag records which project a pattern was extracted
from. Line order is rank order: the first pattern has the highest priority.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence, Union

MAX_ELEMENTS = 8


class LeadershipLabel(str, enum.Enum):
    LD1 = "LD1"  # proposal
    LD2 = "LD2"  # redirection
    LD3 = "LD3"  # confirmation
    LD4 = "LD4"  # inquiry
    LD5 = "LD5"  # operation
    LD6 = "LD6"  # volunteer
    N = "N"  # no leadership behaviour

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, token: str) -> "LeadershipLabel":
        try:
            return cls(token.strip().upper())
        except ValueError:
            raise ValueError(f"unknown leadership label {token!r}") from None

    @property
    def is_leadership(self) -> bool:
        return self is not LeadershipLabel.N


LEADERSHIP_LABELS: tuple[LeadershipLabel, ...] = tuple(
    lab for lab in LeadershipLabel if lab is not LeadershipLabel.N
)
ALL_LABELS: tuple[LeadershipLabel, ...] = tuple(LeadershipLabel)

CATEGORY_NAMES = {
    LeadershipLabel.LD1: "Proposal",
    LeadershipLabel.LD2: "Redirection",
    LeadershipLabel.LD3: "Confirmation",
    LeadershipLabel.LD4: "Inquiry",
    LeadershipLabel.LD5: "Operation",
    LeadershipLabel.LD6: "Volunteer",
    LeadershipLabel.N: "None",
}


class PosTag(str, enum.Enum):
    """Universal POS tags."""

    ADJ = "ADJ"
    ADP = "ADP"
    ADV = "ADV"
    AUX = "AUX"
    CCONJ = "CCONJ"
    DET = "DET"
    INTJ = "INTJ"
    NOUN = "NOUN"
    NUM = "NUM"
    PART = "PART"
    PRON = "PRON"
    PROPN = "PROPN"
    PUNCT = "PUNCT"
    SCONJ = "SCONJ"
    SYM = "SYM"
    VERB = "VERB"
    X = "X"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, token: str) -> "PosTag":
        try:
            return cls(token)
        except ValueError:
            raise ValueError(f"unknown POS tag {token!r}") from None


class PatternError(ValueError):
    """Raised for malformed pattern lines or files."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.message = message
        self.line = line
        self.column = column
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        prefix = (", ".join(where) + ": ") if where else ""
        super().__init__(prefix + message)


class DictionaryError(ValueError):
    pass


# ---------------------------------------------------------------------------
# elements


@dataclass(frozen=True)
class LemmaIs:
    lemma: str

    def __post_init__(self) -> None:
        if not self.lemma or self.lemma != self.lemma.lower() or any(c.isspace() for c in self.lemma):
            raise ValueError(f"lemma must be lowercase, non-empty and whitespace-free: {self.lemma!r}")

    def render(self) -> str:
        return f"[lemma:{self.lemma}]"


@dataclass(frozen=True)
class PosIs:
    tag: PosTag

    def render(self) -> str:
        return f"[pos:{self.tag.value}]"


@dataclass(frozen=True)
class InDict:
    """Dictionary membership; ``lemmas`` is filled in when resolved."""

    name: str
    lemmas: frozenset[str] | None = field(default=None)

    @property
    def resolved(self) -> bool:
        return self.lemmas is not None

    def render(self) -> str:
        return f"[dict:{self.name}]"


@dataclass(frozen=True)
class IsUrl:
    def render(self) -> str:
        return "[url]"


PatternElement = Union[LemmaIs, PosIs, InDict, IsUrl]


@dataclass(frozen=True)
class Pattern:
    id: str
    label: LeadershipLabel
    elements: tuple[PatternElement, ...]
    source_project: str | None = None

    def __post_init__(self) -> None:
        if self.label is LeadershipLabel.N:
            raise ValueError("a pattern cannot carry the N label")
        if not 1 <= len(self.elements) <= MAX_ELEMENTS:
            raise ValueError(f"pattern {self.id!r} has {len(self.elements)} elements; allowed 1..{MAX_ELEMENTS}")

    def render(self) -> str:
        head = f"{self.id} {self.label.value}"
        if self.source_project:
            head += f" @{self.source_project}"
        return head + ": " + " ".join(e.render() for e in self.elements)

    def __str__(self) -> str:
        return self.render()


# ---------------------------------------------------------------------------
# dictionaries


@dataclass(frozen=True)
class Dictionary:
    name: str
    lemmas: frozenset[str]

    def __post_init__(self) -> None:
        if not self.lemmas:
            raise DictionaryError(f"dictionary {self.name!r} is empty")
        if any(w != w.lower() for w in self.lemmas):
            raise DictionaryError(f"dictionary {self.name!r} has non-lowercase entries")

    def __contains__(self, lemma: str) -> bool:
        return lemma in self.lemmas

    def __len__(self) -> int:
        return len(self.lemmas)


class DictionaryRegistry(Mapping[str, Dictionary]):
    """Read-only name -> Dictionary mapping."""

    def __init__(self, dictionaries: Iterable[Dictionary] = ()):
        self._dicts: dict[str, Dictionary] = {}
        for d in dictionaries:
            if d.name in self._dicts:
                raise DictionaryError(f"duplicate dictionary name {d.name!r}")
            self._dicts[d.name] = d

    def __getitem__(self, name: str) -> Dictionary:
        return self._dicts[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._dicts)

    def __len__(self) -> int:
        return len(self._dicts)

    def __repr__(self) -> str:
        return f"DictionaryRegistry({sorted(self._dicts)})"


_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


def load_dictionaries(directory: str | Path) -> DictionaryRegistry:
    """Load every ``<name>.txt`` in ``directory``; blank lines and ``#`` lines are skipped."""
    directory = Path(directory)
    if not directory.is_dir():
        raise DictionaryError(f"dictionary directory not found: {directory}")
    dicts = []
    seen: set[str] = set()
    for path in sorted(directory.glob("*.txt")):
        name = path.stem
        if not _IDENT.match(name):
            raise DictionaryError(f"invalid dictionary name {name!r} ({path})")
        if name.lower() in seen:
            raise DictionaryError(f"duplicate dictionary name {name!r}")
        seen.add(name.lower())
        lemmas = set()
        for raw in path.read_text(encoding="utf-8").splitlines():
            word = raw.strip()
            if not word or word.startswith("#"):
                continue
            lemmas.add(word.lower())
        if not lemmas:
            raise DictionaryError(f"dictionary file is empty: {path}")
        dicts.append(Dictionary(name, frozenset(lemmas)))
    return DictionaryRegistry(dicts)


# ---------------------------------------------------------------------------
# parsing

_HEAD = re.compile(
    r"\s*(?P<id>[A-Za-z0-9_.\-]+)\s+(?P<label>[A-Za-z0-9]+)"
    r"(?:\s+@(?P<project>[A-Za-z0-9_.\-/]+))?\s*:"
)
_ELEM = re.compile(r"\s*\[(?P<body>[^\[\]]*)\]")


def _parse_element(body: str, column: int, line_no: int | None, registry) -> PatternElement:
    body = body.strip()
    if body == "url":
        return IsUrl()
    kind, sep, value = body.partition(":")
    if not sep or not value:
        raise PatternError(f"malformed element [{body}]", line_no, column)
    kind = kind.strip()
    value = value.strip()
    if kind == "lemma":
        if value != value.lower() or any(c.isspace() for c in value):
            raise PatternError(f"lemma must be lowercase without spaces: {value!r}", line_no, column)
        return LemmaIs(value)
    if kind == "pos":
        try:
            return PosIs(PosTag.parse(value))
        except ValueError as exc:
            raise PatternError(str(exc), line_no, column) from None
    if kind == "dict":
        if not _IDENT.match(value):
            raise PatternError(f"invalid dictionary name {value!r}", line_no, column)
        if registry is None:
            return InDict(value)
        if value not in registry:
            raise PatternError(f"unresolved dictionary {value!r}", line_no, column)
        return InDict(value, registry[value].lemmas)
    raise PatternError(f"unknown element kind {kind!r}", line_no, column)


def parse_pattern_line(
    line: str, registry: Mapping[str, Dictionary] | None = None, line_no: int | None = None
) -> Pattern:
    """Parse one pattern line.

    With a registry, ``dict:`` elements are resolved and unknown names are
    rejected; without one they are left unresolved. Errors carry 1-based
    column positions.
    """
    text = line.rstrip("\n")
    if not text.strip():
        raise PatternError("empty pattern line", line_no)
    head = _HEAD.match(text)
    if head is None:
        raise PatternError("expected '<id> <label>:'", line_no, 1)
    try:
        label = LeadershipLabel.parse(head["label"])
    except ValueError as exc:
        raise PatternError(str(exc), line_no, head.start("label") + 1) from None
    if label is LeadershipLabel.N:
        raise PatternError("patterns cannot be labelled N", line_no, head.start("label") + 1)

    elements: list[PatternElement] = []
    pos = head.end()
    while pos < len(text):
        if not text[pos:].strip():
            break
        m = _ELEM.match(text, pos)
        if m is None:
            col = pos + (len(text[pos:]) - len(text[pos:].lstrip())) + 1
            raise PatternError("expected '[element]'", line_no, col)
        elements.append(_parse_element(m["body"], m.start("body"), line_no, registry))
        pos = m.end()
    if not elements:
        raise PatternError("pattern has no elements", line_no, len(text) + 1)
    if len(elements) > MAX_ELEMENTS:
        raise PatternError(f"pattern has {len(elements)} elements (max {MAX_ELEMENTS})", line_no)
    return Pattern(head["id"], label, tuple(elements), head["project"])


class RankedPatternList(Sequence[Pattern]):
    """Immutable ordered rule list; index 0 has the highest priority."""

    __slots__ = ("_patterns", "_index")

    def __init__(self, patterns: Iterable[Pattern] = ()):
        self._patterns: tuple[Pattern, ...] = tuple(patterns)
        self._index: dict[str, int] = {}
        for i, p in enumerate(self._patterns):
            if p.id in self._index:
                raise PatternError(f"duplicate pattern id {p.id!r}")
            self._index[p.id] = i

    def __getitem__(self, i):
        if isinstance(i, slice):
            return RankedPatternList(self._patterns[i])
        return self._patterns[i]

    def __len__(self) -> int:
        return len(self._patterns)

    def __iter__(self) -> Iterator[Pattern]:
        return iter(self._patterns)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, RankedPatternList):
            return self._patterns == other._patterns
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self._patterns)

    def __repr__(self) -> str:
        return f"RankedPatternList({[p.id for p in self._patterns]})"

    @property
    def ids(self) -> list[str]:
        return [p.id for p in self._patterns]

    def rank_of(self, pattern_id: str) -> int:
        return self._index[pattern_id]

    def get(self, pattern_id: str) -> Pattern | None:
        i = self._index.get(pattern_id)
        return None if i is None else self._patterns[i]

    def __contains__(self, item: object) -> bool:
        if isinstance(item, str):
            return item in self._index
        if isinstance(item, Pattern):
            return self._index.get(item.id) is not None and self._patterns[self._index[item.id]] == item
        return False

    def inserted(self, position: int, pattern: Pattern) -> "RankedPatternList":
        ps = list(self._patterns)
        ps.insert(position, pattern)
        return RankedPatternList(ps)

    def without(self, pattern_ids: Iterable[str]) -> "RankedPatternList":
        drop = set(pattern_ids)
        return RankedPatternList(p for p in self._patterns if p.id not in drop)

    def moved(self, pattern_id: str, before_id: str) -> "RankedPatternList":
        """Move ``pattern_id`` so it sits immediately before ``before_id``."""
        p = self._patterns[self._index[pattern_id]]
        ps = [q for q in self._patterns if q.id != pattern_id]
        target = next(i for i, q in enumerate(ps) if q.id == before_id)
        ps.insert(target, p)
        return RankedPatternList(ps)


def parse_pattern_text(text: str, registry: Mapping[str, Dictionary] | None = None) -> RankedPatternList:
    patterns = []
    seen: dict[str, int] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        p = parse_pattern_line(line, registry, line_no)
        if p.id in seen:
            raise PatternError(f"duplicate pattern id {p.id!r} (first defined on line {seen[p.id]})", line_no)
        seen[p.id] = line_no
        patterns.append(p)
    return RankedPatternList(patterns)


def load_pattern_file(path: str | Path, registry: Mapping[str, Dictionary] | None = None) -> RankedPatternList:
    """Load a pattern file; every ``dict:`` reference must resolve in ``registry``."""
    text = Path(path).read_text(encoding="utf-8")
    return parse_pattern_text(text, registry if registry is not None else DictionaryRegistry())


def serialize_list(patterns: Iterable[Pattern]) -> str:
    lines = [p.render() for p in patterns]
    return "".join(line + "\n" for line in lines)


def save_pattern_file(patterns: Iterable[Pattern], path: str | Path) -> None:
    Path(path).write_text(serialize_list(patterns), encoding="utf-8")


def resolve(pattern: Pattern, registry: Mapping[str, Dictionary]) -> Pattern:
    """Return ``pattern`` with its dictionary elements bound to ``registry``."""
    elems = []
    for e in pattern.elements:
        if isinstance(e, InDict):
            if e.name not in registry:
                raise PatternError(f"unresolved dictionary {e.name!r} in pattern {pattern.id!r}")
            e = InDict(e.name, registry[e.name].lemmas)
        elems.append(e)
    return Pattern(pattern.id, pattern.label, tuple(elems), pattern.source_project)
