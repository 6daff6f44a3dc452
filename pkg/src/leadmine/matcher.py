"""Pattern matching over annotated comments and first-match classification.

A pattern matches a sentence when its elements can be assigned to token
positions ``i1 < i2 < ... < ik`` with consecutive gaps of at most
``MAX_GAP`` and every element accepting its token. Matching never crosses a
sentence boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .patterns import InDict, IsUrl, LeadershipLabel, LemmaIs, Pattern, PatternElement, PosIs
from .preprocess import AnnotatedComment, AnnotatedToken, Sentence

MAX_GAP = 3


def element_matches(elem: PatternElement, tok: AnnotatedToken) -> bool:
    if isinstance(elem, LemmaIs):
        return tok.lemma == elem.lemma
    if isinstance(elem, PosIs):
        return tok.upos is elem.tag
    if isinstance(elem, InDict):
        if elem.lemmas is None:
            raise ValueError(f"dictionary element {elem.name!r} is not resolved")
        return tok.lemma in elem.lemmas
    if isinstance(elem, IsUrl):
        return tok.is_url
    raise TypeError(f"not a pattern element: {elem!r}")


@dataclass(frozen=True)
class MatchResult:
    pattern_id: str
    label: LeadershipLabel
    sentence_index: int
    matched_token_indices: tuple[int, ...]


def _assign(elements: Sequence[PatternElement], sentence: Sentence) -> tuple[int, ...] | None:
    """Lexicographically smallest valid index vector, or None.

    Depth-first search trying positions in increasing order; dead
    ``(element, position)`` states are memoized so the search is
    O(len(sentence) * len(elements) * MAX_GAP).
    """
    n, k = len(sentence), len(elements)
    if k == 0 or k > n:
        return None
    hits = [[element_matches(e, t) for t in sentence] for e in elements]
    dead: set[tuple[int, int]] = set()

    def extend(j: int, pos: int) -> list[int] | None:
        # element j sits at pos; place elements j+1..k-1
        if j == k - 1:
            return [pos]
        if (j, pos) in dead:
            return None
        row = hits[j + 1]
        for nxt in range(pos + 1, min(n, pos + MAX_GAP + 1)):
            if row[nxt]:
                rest = extend(j + 1, nxt)
                if rest is not None:
                    return [pos] + rest
        dead.add((j, pos))
        return None

    first = hits[0]
    for start in range(n - k + 1):
        if first[start]:
            found = extend(0, start)
            if found is not None:
                return tuple(found)
    return None


def match_in_sentence(pattern: Pattern, sentence: Sentence, sentence_index: int = 0) -> MatchResult | None:
    idx = _assign(pattern.elements, sentence)
    if idx is None:
        return None
    return MatchResult(pattern.id, pattern.label, sentence_index, idx)


def match_comment(pattern: Pattern, comment: AnnotatedComment) -> MatchResult | None:
    """First sentence (reading order) in which ``pattern`` matches."""
    for si, sent in enumerate(comment.sentences):
        res = match_in_sentence(pattern, sent, si)
        if res is not None:
            return res
    return None


def classify(patterns: Iterable[Pattern], comment: AnnotatedComment) -> tuple[LeadershipLabel, MatchResult | None]:
    """Label from the highest-ranked matching pattern; ``N`` if none matches."""
    for p in patterns:
        res = match_comment(p, comment)
        if res is not None:
            return p.label, res
    return LeadershipLabel.N, None


def classify_corpus(
    patterns: Sequence[Pattern], comments: Sequence[AnnotatedComment], workers: int = 1
) -> list[tuple[LeadershipLabel, MatchResult | None]]:
    """Classify many comments; the result does not depend on ``workers``."""
    if workers <= 1 or len(comments) < 2:
        return [classify(patterns, c) for c in comments]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda c: classify(patterns, c), comments))


# ---------------------------------------------------------------------------
# explain


@dataclass(frozen=True)
class PatternDiagnostic:
    pattern_id: str
    label: LeadershipLabel
    matched: bool
    match: MatchResult | None = None
    # index of the first element that no sentence can accommodate
    failed_element: int | None = None


@dataclass(frozen=True)
class Explanation:
    comment_id: str
    label: LeadershipLabel
    winner: MatchResult | None
    patterns: tuple[PatternDiagnostic, ...] = field(default=())

    def to_record(self, comment: AnnotatedComment | None = None) -> dict:
        rec: dict = {"comment_id": self.comment_id, "label": self.label.value}
        if self.winner is not None:
            rec.update(
                pattern_id=self.winner.pattern_id,
                sentence_index=self.winner.sentence_index,
                token_indices=list(self.winner.matched_token_indices),
            )
            if comment is not None:
                sent = comment.sentences[self.winner.sentence_index]
                rec["tokens"] = [sent[i].surface for i in self.winner.matched_token_indices]
        rec["patterns"] = [
            {"pattern_id": d.pattern_id, "matched": d.matched}
            | ({"failed_element": d.failed_element} if d.failed_element is not None else {})
            for d in self.patterns
        ]
        return rec


def _matchable_prefix(pattern: Pattern, comment: AnnotatedComment) -> int:
    """Longest element prefix of ``pattern`` that matches some sentence."""
    best = 0
    for sent in comment.sentences:
        lo, hi = best, len(pattern.elements)
        # prefix matchability is monotone, so binary search the boundary
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if _assign(pattern.elements[:mid], sent) is not None:
                lo = mid
            else:
                hi = mid - 1
        best = max(best, lo)
        if best == len(pattern.elements):
            break
    return best


def explain(patterns: Sequence[Pattern], comment: AnnotatedComment) -> Explanation:
    diags = []
    winner: MatchResult | None = None
    label = LeadershipLabel.N
    for p in patterns:
        res = match_comment(p, comment)
        if res is not None:
            diags.append(PatternDiagnostic(p.id, p.label, True, res))
            if winner is None:
                winner, label = res, p.label
        else:
            diags.append(PatternDiagnostic(p.id, p.label, False, None, _matchable_prefix(p, comment)))
    return Explanation(comment.comment_id, label, winner, tuple(diags))


def classification_record(comment_id: str, label: LeadershipLabel, result: MatchResult | None) -> dict:
    rec: dict = {"comment_id": comment_id, "label": label.value}
    if result is not None:
        rec["pattern_id"] = result.pattern_id
        rec["sentence_index"] = result.sentence_index
        rec["token_indices"] = list(result.matched_token_indices)
    return rec
