"""Insert / reorder / prune consolidation of ranked pattern lists.

Every phase is a hill climb on macro F1 (LD1..LD6) over a labeled corpus: a
tentative update is kept only when the objective strictly improves.
Pattern-vs-comment match outcomes are computed once per pattern and held in a
:class:`MatchTable`; all candidate lists are scored from that table.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ._util import dumps_record
from .corpus import LabeledComment
from .matcher import match_comment
from .metrics import LABEL_INDEX, N_LABELS, macro_f1_from_confusion, scores_from_confusion
from .patterns import LeadershipLabel, Pattern, RankedPatternList

log = logging.getLogger(__name__)

EPS = 1e-12
N_INDEX = LABEL_INDEX[LeadershipLabel.N]

ITERATION_COLUMNS = (
    "Iteration", "Projects", "#Patterns", "#Add", "#Delete", "#Change", "Precision", "Recall", "F1-Score",
)


@dataclass(frozen=True)
class ConsolidationConfig:
    convergence_threshold: float = 0.01
    max_full_passes: int = 50
    prune_individually: bool = False

    def __post_init__(self) -> None:
        if not self.convergence_threshold > 0:
            raise ValueError("convergence_threshold must be > 0")
        if self.max_full_passes < 1:
            raise ValueError("max_full_passes must be >= 1")


@dataclass(frozen=True)
class TraceStep:
    phase: str
    pattern_ids: tuple[str, ...]
    action: str
    objective_before: float
    objective_after: float
    accepted: bool
    comment_id: str | None = None

    def to_record(self) -> dict:
        rec = {
            "phase": self.phase,
            "pattern_ids": list(self.pattern_ids),
            "action": self.action,
            "objective_before": self.objective_before,
            "objective_after": self.objective_after,
            "accepted": self.accepted,
        }
        if self.comment_id is not None:
            rec["comment_id"] = self.comment_id
        return rec


@dataclass(frozen=True)
class WinnerAnalysis:
    comment_id: str
    realwinner: str | None
    fakewinners: tuple[str, ...]


def find_winners(patterns: Sequence[Pattern], comment, gold_label: LeadershipLabel) -> WinnerAnalysis:
    """Highest-ranked correct matcher and the wrong matchers ranked above it.

    With no correct matcher (always the case for gold ``N``), every matching
    pattern is a fakewinner.
    """
    annotated = getattr(comment, "annotated", comment)
    fakes = []
    for p in patterns:
        if match_comment(p, annotated) is None:
            continue
        if p.label == gold_label:
            return WinnerAnalysis(annotated.comment_id, p.id, tuple(fakes))
        fakes.append(p.id)
    return WinnerAnalysis(annotated.comment_id, None, tuple(fakes))


class MatchTable:
    """Memo of which comments each pattern matches."""

    def __init__(self, corpus: Sequence[LabeledComment]):
        self.corpus = list(corpus)
        self.gold = np.array([LABEL_INDEX[c.gold] for c in self.corpus], dtype=np.int64)
        self._rows: dict[Pattern, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self.corpus)

    def row(self, pattern: Pattern) -> np.ndarray:
        r = self._rows.get(pattern)
        if r is None:
            r = np.fromiter(
                (match_comment(pattern, c.annotated) is not None for c in self.corpus),
                dtype=bool,
                count=len(self.corpus),
            )
            r.setflags(write=False)
            self._rows[pattern] = r
        return r

    def matrix(self, patterns: Sequence[Pattern]) -> np.ndarray:
        if not patterns:
            return np.zeros((0, len(self.corpus)), dtype=bool)
        return np.vstack([self.row(p) for p in patterns])


def _confusion(gold: np.ndarray, pred: np.ndarray) -> np.ndarray:
    return np.bincount(gold * N_LABELS + pred, minlength=N_LABELS * N_LABELS).reshape(N_LABELS, N_LABELS)


class _State:
    """Current ranking with per-comment winner rank and predicted label."""

    def __init__(self, table: MatchTable, patterns: Sequence[Pattern], cols: np.ndarray | None = None):
        self.table = table
        self.cols = np.arange(len(table)) if cols is None else np.asarray(cols)
        self.gold = table.gold[self.cols]
        self.set_order(list(patterns))

    def set_order(self, order: list[Pattern]) -> None:
        self.order = order
        self.labels = np.array([LABEL_INDEX[p.label] for p in order], dtype=np.int64)
        full = self.table.matrix(order)
        self.M = full[:, self.cols] if len(order) else np.zeros((0, len(self.cols)), dtype=bool)
        L = len(order)
        if L:
            hit = self.M.any(axis=0)
            first = self.M.argmax(axis=0)
            self.rank = np.where(hit, first, L)
            self.pred = np.where(hit, self.labels[first], N_INDEX)
        else:
            self.rank = np.zeros(len(self.cols), dtype=np.int64)
            self.pred = np.full(len(self.cols), N_INDEX, dtype=np.int64)
        self.conf = _confusion(self.gold, self.pred)
        self.objective = macro_f1_from_confusion(self.conf)

    def comment_id(self, j: int) -> str:
        return self.table.corpus[int(self.cols[j])].comment_id

    # -- insert --------------------------------------------------------------

    def probe_insert(self, pattern: Pattern) -> list[float]:
        """Objective for inserting ``pattern`` at every position 0..len(order)."""
        L = len(self.order)
        m = self.table.row(pattern)[self.cols]
        lab = LABEL_INDEX[pattern.label]
        affected = np.nonzero(m)[0]
        by_rank: dict[int, list[int]] = {}
        for j in affected:
            by_rank.setdefault(int(self.rank[j]), []).append(int(j))
        conf = self.conf.copy()
        values = [0.0] * (L + 1)
        # placing the pattern at k overrides every matched comment whose winner rank >= k
        for k in range(L, -1, -1):
            for j in by_rank.get(k, ()):
                g = self.gold[j]
                conf[g, self.pred[j]] -= 1
                conf[g, lab] += 1
            values[k] = macro_f1_from_confusion(conf)
        return values

    # -- reorder / prune -----------------------------------------------------

    def winners(self, j: int) -> tuple[int | None, list[int]]:
        """(realwinner rank, fakewinner ranks) for comment column ``j``."""
        ranks = np.nonzero(self.M[:, j])[0]
        g = self.gold[j]
        fakes = []
        for r in ranks:
            if self.labels[r] == g:
                return int(r), fakes
            fakes.append(int(r))
        return None, fakes

    def objective_if_moved(self, src: int, dst: int) -> float:
        """Objective after moving rank ``src`` to rank ``dst`` (dst < src)."""
        m = self.M[src]
        aff = np.nonzero(m & (self.rank >= dst) & (self.rank < src))[0]
        conf = self.conf.copy()
        lab = self.labels[src]
        np.add.at(conf, (self.gold[aff], self.pred[aff]), -1)
        np.add.at(conf, (self.gold[aff], np.full(len(aff), lab)), 1)
        return macro_f1_from_confusion(conf)

    def objective_if_removed(self, ranks: Iterable[int]) -> float:
        drop = np.zeros(len(self.order), dtype=bool)
        drop[list(ranks)] = True
        aff = np.nonzero(drop[np.minimum(self.rank, len(self.order) - 1)] & (self.rank < len(self.order)))[0]
        if len(aff) == 0:
            return self.objective
        sub = self.M[~drop][:, aff]
        keep_labels = self.labels[~drop]
        if sub.shape[0]:
            hit = sub.any(axis=0)
            new_pred = np.where(hit, keep_labels[sub.argmax(axis=0)], N_INDEX)
        else:
            new_pred = np.full(len(aff), N_INDEX)
        conf = self.conf.copy()
        np.add.at(conf, (self.gold[aff], self.pred[aff]), -1)
        np.add.at(conf, (self.gold[aff], new_pred), 1)
        return macro_f1_from_confusion(conf)


def _improves(after: float, before: float) -> bool:
    return after > before + EPS


def _check_new(base: Sequence[Pattern], new_patterns: Sequence[Pattern]) -> list[Pattern]:
    existing = {p.id: p for p in base}
    out = []
    seen: set[str] = set()
    for p in new_patterns:
        if p.id in seen:
            raise ValueError(f"duplicate new pattern id {p.id!r}")
        seen.add(p.id)
        if p.id in existing:
            if existing[p.id] != p:
                raise ValueError(f"new pattern {p.id!r} conflicts with an existing pattern of the same id")
            continue
        out.append(p)
    return out


def _insert(state: _State, new_patterns: Sequence[Pattern], trace: list[TraceStep]) -> None:
    for p in new_patterns:
        before = state.objective
        values = state.probe_insert(p)
        best = max(values)
        pos = values.index(best)  # topmost among ties
        ok = _improves(best, before)
        trace.append(TraceStep("insert", (p.id,), f"insert@{pos}" if ok else "discard", before, best, ok))
        if ok:
            order = list(state.order)
            order.insert(pos, p)
            state.set_order(order)


def _reorder(state: _State, cfg: ConsolidationConfig, trace: list[TraceStep]) -> None:
    for _ in range(cfg.max_full_passes):
        accepted = 0
        for j in range(len(state.cols)):
            if state.pred[j] == state.gold[j]:
                continue
            real, fakes = state.winners(j)
            if real is None or not fakes:
                continue
            dst = fakes[0]
            before = state.objective
            after = state.objective_if_moved(real, dst)
            ok = _improves(after, before)
            mover, anchor = state.order[real], state.order[dst]
            trace.append(TraceStep(
                "reorder", (mover.id, anchor.id), f"move {mover.id} before {anchor.id}",
                before, after, ok, state.comment_id(j),
            ))
            if ok:
                order = list(state.order)
                del order[real]
                order.insert(dst, mover)
                state.set_order(order)
                accepted += 1
        if not accepted:
            return
    log.warning("reorder stopped at the pass cap (%d)", cfg.max_full_passes)


def _prune(state: _State, cfg: ConsolidationConfig, trace: list[TraceStep]) -> None:
    for _ in range(cfg.max_full_passes):
        accepted = 0
        for j in range(len(state.cols)):
            if state.pred[j] == state.gold[j]:
                continue
            _, fakes = state.winners(j)
            if not fakes:
                continue
            groups = [[r] for r in fakes] if cfg.prune_individually else [fakes]
            for ranks in groups:
                before = state.objective
                after = state.objective_if_removed(ranks)
                ok = _improves(after, before)
                ids = tuple(state.order[r].id for r in ranks)
                trace.append(TraceStep("prune", ids, "remove " + ",".join(ids), before, after, ok, state.comment_id(j)))
                if ok:
                    drop = set(ranks)
                    state.set_order([p for r, p in enumerate(state.order) if r not in drop])
                    accepted += 1
                    break  # ranks shifted; re-read this comment on the next pass
        if not accepted:
            return
    log.warning("prune stopped at the pass cap (%d)", cfg.max_full_passes)


def _result(state: _State) -> RankedPatternList:
    return RankedPatternList(state.order)


def insert_patterns(patterns, new_patterns, corpus, config=None, table=None):
    """Insert each new pattern at its best position if that strictly improves the objective."""
    table = table or MatchTable(corpus)
    state = _State(table, list(patterns))
    trace: list[TraceStep] = []
    _insert(state, _check_new(state.order, list(new_patterns)), trace)
    return _result(state), trace


def reorder(patterns, corpus, config=None, table=None):
    cfg = config or ConsolidationConfig()
    state = _State(table or MatchTable(corpus), list(patterns))
    trace: list[TraceStep] = []
    _reorder(state, cfg, trace)
    return _result(state), trace


def prune(patterns, corpus, config=None, table=None):
    cfg = config or ConsolidationConfig()
    state = _State(table or MatchTable(corpus), list(patterns))
    trace: list[TraceStep] = []
    _prune(state, cfg, trace)
    return _result(state), trace


def consolidate(
    patterns: Sequence[Pattern],
    new_patterns: Sequence[Pattern],
    corpus: Sequence[LabeledComment],
    config: ConsolidationConfig | None = None,
    table: MatchTable | None = None,
    columns: np.ndarray | None = None,
) -> tuple[RankedPatternList, list[TraceStep]]:
    """Insert, then reorder, then prune.

    ``columns`` restricts the objective to a subset of corpus positions.
    """
    cfg = config or ConsolidationConfig()
    table = table or MatchTable(corpus)
    state = _State(table, list(patterns), columns)
    trace: list[TraceStep] = []
    _insert(state, _check_new(state.order, list(new_patterns)), trace)
    _reorder(state, cfg, trace)
    _prune(state, cfg, trace)
    return _result(state), trace


def objective(patterns: Sequence[Pattern], corpus: Sequence[LabeledComment], table: MatchTable | None = None) -> float:
    return _State(table or MatchTable(corpus), list(patterns)).objective


# ---------------------------------------------------------------------------
# multi-project convergence


@dataclass(frozen=True)
class PatternSet:
    project: str
    patterns: tuple[Pattern, ...]


@dataclass(frozen=True)
class IterationReport:
    iteration: int
    projects: str
    n_patterns: int
    added: int
    deleted: int
    changed: int
    precision: float
    recall: float
    f1: float
    gain: float

    def row(self) -> list[str]:
        return [
            str(self.iteration), self.projects, str(self.n_patterns), str(self.added), str(self.deleted),
            str(self.changed), f"{self.precision:.6f}", f"{self.recall:.6f}", f"{self.f1:.6f}",
        ]


@dataclass
class ConvergenceResult:
    patterns: RankedPatternList
    reports: list[IterationReport]
    trace: list[TraceStep] = field(default_factory=list)
    stopped_early: bool = False


def converge(
    project_sets: Sequence[PatternSet | Sequence[Pattern]],
    corpus: Sequence[LabeledComment],
    config: ConsolidationConfig | None = None,
    initial: Sequence[Pattern] = (),
    scope: str = "all",
) -> ConvergenceResult:
    """Consolidate project pattern sets in order until the F1 gain drops below the threshold.

    ``scope="all"`` scores every iteration on the whole corpus;
    ``scope="cumulative"`` only on comments of the projects merged so far.
    Columns of each report: patterns after the iteration, inserted, pruned
    and accepted reorder moves, and P/R/F1 after the iteration.
    """
    if not project_sets:
        raise ValueError("need at least one project pattern set")
    if scope not in ("all", "cumulative"):
        raise ValueError(f"unknown scope {scope!r}")
    cfg = config or ConsolidationConfig()
    table = MatchTable(corpus)
    sets = [s if isinstance(s, PatternSet) else PatternSet(f"S{i + 1}", tuple(s)) for i, s in enumerate(project_sets)]
    current: list[Pattern] = list(initial)
    reports: list[IterationReport] = []
    all_trace: list[TraceStep] = []
    seen_projects: list[str] = []
    stopped = False
    for it, ps in enumerate(sets, start=1):
        seen_projects.append(ps.project)
        cols = None
        if scope == "cumulative":
            cols = np.array([i for i, c in enumerate(table.corpus) if c.project in seen_projects], dtype=np.int64)
        before = _State(table, current, cols).objective
        result, trace = consolidate(current, ps.patterns, corpus, cfg, table, cols)
        all_trace.extend(trace)
        final_state = _State(table, list(result), cols)
        rep = scores_from_confusion(final_state.conf)
        gain = rep.macro_f1 - before
        reports.append(IterationReport(
            iteration=it,
            projects="-".join(seen_projects) if len(seen_projects) <= 2 else f"{seen_projects[0]}-{seen_projects[-1]}",
            n_patterns=len(result),
            added=sum(1 for s in trace if s.phase == "insert" and s.accepted),
            deleted=sum(len(s.pattern_ids) for s in trace if s.phase == "prune" and s.accepted),
            changed=sum(1 for s in trace if s.phase == "reorder" and s.accepted),
            precision=rep.macro_precision,
            recall=rep.macro_recall,
            f1=rep.macro_f1,
            gain=gain,
        ))
        log.info("iteration %d (%s): %d patterns, F1 %.4f (gain %.4f)", it, ps.project, len(result), rep.macro_f1, gain)
        current = list(result)
        if gain < cfg.convergence_threshold - EPS:
            stopped = it < len(sets)
            break
    return ConvergenceResult(RankedPatternList(current), reports, all_trace, stopped)


def iteration_csv(reports: Sequence[IterationReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ITERATION_COLUMNS)
    for r in reports:
        w.writerow(r.row())
    return buf.getvalue()


def write_trace(trace: Iterable[TraceStep], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for step in trace:
            fh.write(dumps_record(step.to_record()) + "\n")
