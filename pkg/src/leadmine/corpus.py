"""Labeled corpora: label import, annotator files, seeded issue-level sampling."""

from __future__ import annotations

import csv
import random
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence, TypeVar

from .patterns import LEADERSHIP_LABELS, LeadershipLabel
from .preprocess import AnnotatedComment


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class LabeledComment:
    comment_id: str
    project: str
    annotated: AnnotatedComment
    gold: LeadershipLabel


def read_label_file(path: str | Path) -> list[tuple[str, LeadershipLabel]]:
    """Read a ``comment_id,label`` CSV (header required)."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"comment_id", "label"} <= set(reader.fieldnames):
            raise CorpusError(f"{path}: expected columns comment_id,label")
        for row_no, row in enumerate(reader, start=2):
            try:
                label = LeadershipLabel.parse(row["label"])
            except ValueError:
                raise CorpusError(f"{path}:{row_no}: invalid label {row['label']!r}") from None
            rows.append((row["comment_id"].strip(), label))
    return rows


def label_counts(labeled: Iterable[LabeledComment]) -> dict[str, int]:
    """Per-label counts in the LD1..LD6, TotalLD layout."""
    counts = Counter(c.gold for c in labeled)
    table = {lab.value: counts.get(lab, 0) for lab in LEADERSHIP_LABELS}
    table["TotalLD"] = sum(table.values())
    table["N"] = counts.get(LeadershipLabel.N, 0)
    return table


def import_labels(
    labels: str | Path | Sequence[tuple[str, LeadershipLabel]],
    comments: Iterable[AnnotatedComment] | Mapping[str, AnnotatedComment],
    project: str = "",
) -> list[LabeledComment]:
    """Join gold labels onto preprocessed comments.

    Output follows the label file's row order. Every labelled id must exist
    in ``comments`` and appear only once.
    """
    rows = read_label_file(labels) if isinstance(labels, (str, Path)) else list(labels)
    by_id = dict(comments) if isinstance(comments, Mapping) else {c.comment_id: c for c in comments}
    out = []
    seen: set[str] = set()
    for cid, label in rows:
        if cid in seen:
            raise CorpusError(f"duplicate label row for comment {cid!r}")
        seen.add(cid)
        if cid not in by_id:
            raise CorpusError(f"label row references unknown comment_id {cid!r}")
        out.append(LabeledComment(cid, project, by_id[cid], LeadershipLabel(label)))
    return out


def read_annotator_file(path: str | Path) -> dict[str, dict[str, LeadershipLabel]]:
    """Read ``comment_id,annotator,label`` rows into annotator -> {comment_id: label}."""
    out: dict[str, dict[str, LeadershipLabel]] = defaultdict(dict)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"comment_id", "annotator", "label"} <= set(reader.fieldnames):
            raise CorpusError(f"{path}: expected columns comment_id,annotator,label")
        for row_no, row in enumerate(reader, start=2):
            try:
                label = LeadershipLabel.parse(row["label"])
            except ValueError:
                raise CorpusError(f"{path}:{row_no}: invalid label {row['label']!r}") from None
            who = row["annotator"].strip()
            cid = row["comment_id"].strip()
            if cid in out[who]:
                raise CorpusError(f"{path}:{row_no}: annotator {who!r} labels {cid!r} twice")
            out[who][cid] = label
    return dict(out)


def aligned_annotations(by_annotator: Mapping[str, Mapping[str, LeadershipLabel]]) -> tuple[list[str], list[list[LeadershipLabel]]]:
    """Label vectors over the common comment ids, annotators in sorted order."""
    names = sorted(by_annotator)
    ids = set.intersection(*(set(by_annotator[n]) for n in names)) if names else set()
    for n in names:
        missing = set(by_annotator[n]) - ids
        if missing:
            raise CorpusError(f"annotator {n!r} labelled comments others did not: {sorted(missing)[:5]}")
    order = sorted(ids)
    return names, [[by_annotator[n][cid] for cid in order] for n in names]


T = TypeVar("T")


def sample_comments(comments: Sequence[T], target_count: int, seed: int, issue_of=None) -> list[T]:
    """Seeded issue-level sample of at least ``target_count`` comments.

    Whole issues are drawn in a seeded random order until the running comment
    count reaches the target; an issue's comments are never split. The
    result keeps the input order.
    """
    if issue_of is None:
        issue_of = lambda c: c.issue_id  # noqa: E731
    if target_count > len(comments):
        raise CorpusError(f"requested {target_count} comments but only {len(comments)} available")
    groups: dict[str, list[int]] = defaultdict(list)
    for i, c in enumerate(comments):
        groups[str(issue_of(c))].append(i)
    issues = sorted(groups)
    random.Random(seed).shuffle(issues)
    chosen: set[int] = set()
    for iss in issues:
        if len(chosen) >= target_count:
            break
        chosen.update(groups[iss])
    return [c for i, c in enumerate(comments) if i in chosen]


def split_projects(
    labeled: Iterable[LabeledComment], fitted: Iterable[str]
) -> tuple[list[LabeledComment], list[LabeledComment]]:
    """Partition into (fitted, unfitted) by project name."""
    fitted = set(fitted)
    a, b = [], []
    for c in labeled:
        (a if c.project in fitted else b).append(c)
    return a, b
