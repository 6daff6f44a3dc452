"""Precision/recall/F1 reports and inter-annotator agreement."""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from .patterns import ALL_LABELS, LEADERSHIP_LABELS, LeadershipLabel

LABEL_INDEX = {lab: i for i, lab in enumerate(ALL_LABELS)}
N_LABELS = len(ALL_LABELS)


@dataclass(frozen=True)
class ClassScores:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class EvalReport:
    per_class: dict[LeadershipLabel, ClassScores]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    # rows = gold, columns = predicted, ordered LD1..LD6, N
    confusion: tuple[tuple[int, ...], ...]

    @property
    def accuracy(self) -> float:
        total = sum(map(sum, self.confusion))
        return sum(self.confusion[i][i] for i in range(N_LABELS)) / total if total else 0.0

    def to_dict(self) -> dict:
        return {
            "per_class": {
                lab.value: {"precision": s.precision, "recall": s.recall, "f1": s.f1}
                for lab, s in self.per_class.items()
            },
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "accuracy": self.accuracy,
            "labels": [lab.value for lab in ALL_LABELS],
            "confusion": [list(r) for r in self.confusion],
        }

    def format_table(self) -> str:
        lines = [f"{'label':<6} {'precision':>9} {'recall':>7} {'f1':>7}"]
        for lab, s in self.per_class.items():
            lines.append(f"{lab.value:<6} {s.precision:>9.3f} {s.recall:>7.3f} {s.f1:>7.3f}")
        lines.append(f"{'macro':<6} {self.macro_precision:>9.3f} {self.macro_recall:>7.3f} {self.macro_f1:>7.3f}")
        lines.append(f"accuracy {self.accuracy:.3f}")
        return "\n".join(lines)


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def scores_from_confusion(confusion: np.ndarray) -> EvalReport:
    """Build a report from a 7x7 gold-by-predicted count matrix."""
    conf = np.asarray(confusion, dtype=np.int64)
    per_class = {}
    for lab in LEADERSHIP_LABELS:
        i = LABEL_INDEX[lab]
        tp = int(conf[i, i])
        fp = int(conf[:, i].sum()) - tp
        fn = int(conf[i, :].sum()) - tp
        p = _ratio(tp, tp + fp)
        r = _ratio(tp, tp + fn)
        f = _ratio(2 * p * r, p + r)
        per_class[lab] = ClassScores(p, r, f)
    k = len(LEADERSHIP_LABELS)
    return EvalReport(
        per_class=per_class,
        macro_precision=sum(s.precision for s in per_class.values()) / k,
        macro_recall=sum(s.recall for s in per_class.values()) / k,
        macro_f1=sum(s.f1 for s in per_class.values()) / k,
        confusion=tuple(tuple(int(x) for x in row) for row in conf),
    )


def macro_f1_from_confusion(conf: np.ndarray) -> float:
    """Macro F1 over LD1..LD6 (N excluded); same arithmetic as :func:`scores_from_confusion`."""
    total = 0.0
    for i in range(len(LEADERSHIP_LABELS)):
        tp = int(conf[i, i])
        pred = int(conf[:, i].sum())
        gold = int(conf[i, :].sum())
        p = _ratio(tp, pred)
        r = _ratio(tp, gold)
        total += _ratio(2 * p * r, p + r)
    return total / len(LEADERSHIP_LABELS)


def confusion_matrix(predicted: Sequence[LeadershipLabel], gold: Sequence[LeadershipLabel]) -> np.ndarray:
    if len(predicted) != len(gold):
        raise ValueError(f"length mismatch: {len(predicted)} predictions vs {len(gold)} gold labels")
    if not gold:
        raise ValueError("cannot evaluate an empty label sequence")
    conf = np.zeros((N_LABELS, N_LABELS), dtype=np.int64)
    for p, g in zip(predicted, gold):
        conf[LABEL_INDEX[LeadershipLabel(g)], LABEL_INDEX[LeadershipLabel(p)]] += 1
    return conf


def evaluate(predicted: Sequence[LeadershipLabel], gold: Sequence[LeadershipLabel]) -> EvalReport:
    """Per-class and macro (LD1..LD6) scores; zero denominators score 0."""
    return scores_from_confusion(confusion_matrix(predicted, gold))


def cohen_kappa(labels_a: Sequence[Hashable], labels_b: Sequence[Hashable]) -> float:
    if len(labels_a) != len(labels_b):
        raise ValueError(f"length mismatch: {len(labels_a)} vs {len(labels_b)}")
    n = len(labels_a)
    if n == 0:
        raise ValueError("cannot compute kappa on empty sequences")
    p_o = sum(a == b for a, b in zip(labels_a, labels_b)) / n
    count_a, count_b = Counter(labels_a), Counter(labels_b)
    p_e = sum(count_a[c] * count_b[c] for c in count_a) / (n * n)
    if p_e == 1.0:
        # both raters used one and the same category throughout
        return 1.0
    return (p_o - p_e) / (1.0 - p_e)


def average_pairwise_kappa(annotations: Sequence[Sequence[Hashable]]) -> float:
    if len(annotations) < 2:
        raise ValueError("need at least two annotators")
    pairs = list(itertools.combinations(annotations, 2))
    return sum(cohen_kappa(a, b) for a, b in pairs) / len(pairs)
