import random

import pytest
from hypothesis import given, settings, strategies as st

from leadmine.consolidation import (
    EPS,
    ConsolidationConfig,
    PatternSet,
    consolidate,
    converge,
    find_winners,
    insert_patterns,
    iteration_csv,
    objective,
    prune,
    reorder,
)
from leadmine.matcher import classify
from leadmine.metrics import evaluate
from leadmine.patterns import LeadershipLabel as L, LemmaIs, Pattern

from synth import labeled, random_corpus, random_pattern


def pat(pid, label, *lemmas):
    return Pattern(pid, label, tuple(LemmaIs(x) for x in lemmas))


def reclassified_objective(patterns, corpus):
    pred = [classify(patterns, c.annotated)[0] for c in corpus]
    return evaluate(pred, [c.gold for c in corpus]).macro_f1


A = pat("A", L.LD1, "x")
B = pat("B", L.LD2, "y")


def test_insert_into_empty_list():
    corpus = [labeled("c1", "x", L.LD1), labeled("c2", "q", L.N)]
    lst, trace = insert_patterns([], [A], corpus)
    assert list(lst.ids) == ["A"]
    assert trace[0].action == "insert@0" and trace[0].accepted
    assert trace[0].objective_before == 0.0 and trace[0].objective_after == pytest.approx(1 / 6)


def test_insert_discards_useless_pattern():
    corpus = [labeled("c1", "x", L.LD1)]
    lst, trace = insert_patterns([A], [pat("Z", L.LD3, "nothing")], corpus)
    assert list(lst.ids) == ["A"]
    assert trace[0].action == "discard" and not trace[0].accepted


def test_insert_picks_topmost_on_tie():
    # A and B never meet on a comment, so every position scores the same
    corpus = [labeled("c1", "x", L.LD1), labeled("c2", "y", L.LD2)]
    lst, trace = insert_patterns([B], [A], corpus)
    assert list(lst.ids) == ["A", "B"] and trace[0].action == "insert@0"


def test_insert_uses_best_position():
    # inserting the LD1 pattern above B would steal the LD2 comment "x y"
    corpus = [labeled("c1", "x y", L.LD2), labeled("c2", "x", L.LD1)]
    lst, _ = insert_patterns([B], [A], corpus)
    assert list(lst.ids) == ["B", "A"]


def test_insert_skips_identical_existing_and_rejects_conflicts():
    corpus = [labeled("c1", "x", L.LD1)]
    lst, trace = insert_patterns([A], [A], corpus)
    assert list(lst.ids) == ["A"] and trace == []
    with pytest.raises(ValueError):
        insert_patterns([A], [pat("A", L.LD2, "x")], corpus)


def test_find_winners():
    c = labeled("c", "x y", L.LD2)
    w = find_winners([A, pat("A2", L.LD3, "y"), B], c, L.LD2)
    assert w.realwinner == "B" and w.fakewinners == ("A", "A2")
    n = find_winners([A, B], labeled("n", "x y", L.N), L.N)
    assert n.realwinner is None and n.fakewinners == ("A", "B")


def test_reorder_moves_realwinner_above_fakewinner():
    corpus = [
        labeled("c1", "x y", L.LD2),
        labeled("c2", "x y", L.LD2),
        labeled("c3", "x", L.LD1),
        labeled("c4", "y", L.LD2),
    ]
    assert objective([A, B], corpus) < 1.0
    lst, trace = reorder([A, B], corpus)
    assert list(lst.ids) == ["B", "A"]
    assert objective(lst, corpus) == pytest.approx(2 / 6)
    accepted = [s for s in trace if s.accepted]
    assert len(accepted) == 1 and accepted[0].pattern_ids == ("B", "A")


def test_reorder_rejects_harmful_move():
    # moving B up fixes c1 but breaks c2 and c3: no strict gain
    corpus = [labeled("c1", "x y", L.LD2), labeled("c2", "x y", L.LD1), labeled("c3", "x y", L.LD1)]
    lst, trace = reorder([A, B], corpus)
    assert list(lst.ids) == ["A", "B"]
    assert trace and not any(s.accepted for s in trace)


C = pat("C", L.LD2, "x")
Z = pat("Z", L.LD1, "z")
W = pat("W", L.LD2, "w")
PRUNE_CORPUS = [labeled("c1", "x", L.N), labeled("c2", "z", L.LD1), labeled("c3", "w", L.LD2)]


def test_prune_removes_fakewinners_together():
    lst, trace = prune([A, C, Z, W], PRUNE_CORPUS)
    assert list(lst.ids) == ["Z", "W"]
    step = next(s for s in trace if s.accepted)
    assert step.pattern_ids == ("A", "C")


def test_prune_individually_finds_no_single_gain():
    # removing A alone hands c1 to C, and removing C alone leaves A: neither helps
    cfg = ConsolidationConfig(prune_individually=True)
    lst, _ = prune([A, C, Z, W], PRUNE_CORPUS, cfg)
    assert list(lst.ids) == ["A", "C", "Z", "W"]


def test_prune_single_fakewinner():
    corpus = [labeled("c1", "x", L.N), labeled("c2", "z", L.LD1)]
    lst, _ = prune([A, Z], corpus)
    assert list(lst.ids) == ["Z"]


def test_config_validation():
    with pytest.raises(ValueError):
        ConsolidationConfig(convergence_threshold=0)


def _insert_position_values(current, p, corpus):
    return [reclassified_objective(current[:k] + [p] + current[k:], corpus) for k in range(len(current) + 1)]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**9))
def test_insert_matches_exhaustive_reprobe(seed):
    rng = random.Random(seed)
    corpus = random_corpus(rng, 40, vocab=("a", "b", "c"))
    base = [random_pattern(rng, f"b{i}", 2, vocab=("a", "b", "c")) for i in range(4)]
    new = [random_pattern(rng, f"n{i}", 2, vocab=("a", "b", "c")) for i in range(4)]
    _, trace = insert_patterns(base, new, corpus)
    current = list(base)
    pool = {p.id: p for p in new}
    for step in trace:
        p = pool[step.pattern_ids[0]]
        values = _insert_position_values(current, p, corpus)
        assert step.objective_before == pytest.approx(reclassified_objective(current, corpus), abs=1e-12)
        best = max(values)
        assert step.objective_after == pytest.approx(best, abs=1e-12)
        if step.accepted:
            pos = int(step.action.split("@")[1])
            assert pos == values.index(best)
            assert best > step.objective_before
            current.insert(pos, p)
        else:
            assert best <= step.objective_before + EPS


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**9))
def test_consolidate_properties(seed):
    rng = random.Random(seed)
    corpus = random_corpus(rng, 50, vocab=("a", "b", "c", "d"))
    base = [random_pattern(rng, f"b{i}", 3, vocab=("a", "b", "c", "d")) for i in range(5)]
    new = [random_pattern(rng, f"n{i}", 3, vocab=("a", "b", "c", "d")) for i in range(5)]
    lst, trace = consolidate(base, new, corpus)
    final = objective(lst, corpus)
    # internal scoring agrees with classify + evaluate
    assert final == pytest.approx(reclassified_objective(list(lst), corpus), abs=1e-12)
    assert final >= objective(base, corpus) - 1e-12
    for s in trace:
        assert s.accepted == (s.objective_after > s.objective_before + EPS)
    assert consolidate(base, new, corpus) == (lst, trace)
    again, _ = consolidate(lst, [], corpus)
    assert objective(again, corpus) >= final - 1e-12


def test_converge_single_set_high_threshold():
    corpus = [labeled("c1", "x", L.LD1), labeled("c2", "y", L.LD2)]
    res = converge([PatternSet("p1", (A,)), PatternSet("p2", (B,))], corpus, ConsolidationConfig(convergence_threshold=1.0))
    assert len(res.reports) == 1 and res.stopped_early
    r = res.reports[0]
    assert (r.iteration, r.projects, r.n_patterns, r.added, r.deleted, r.changed) == (1, "p1", 1, 1, 0, 0)
    assert list(res.patterns.ids) == ["A"]


def test_converge_runs_all_sets_when_gains_are_large():
    corpus = [labeled("c1", "x", L.LD1), labeled("c2", "y", L.LD2)]
    res = converge([[A], [B]], corpus, ConsolidationConfig(convergence_threshold=0.1))
    assert [r.projects for r in res.reports] == ["S1", "S1-S2"]
    assert not res.stopped_early
    assert res.reports[-1].f1 == pytest.approx(2 / 6)
    assert iteration_csv(res.reports).splitlines()[0].startswith("Iteration,Projects,#Patterns")


def test_converge_cumulative_scope():
    corpus = [labeled("c1", "x", L.LD1, "p1"), labeled("c2", "y", L.LD2, "p2")]
    res = converge([PatternSet("p1", (A,)), PatternSet("p2", (B,))], corpus, ConsolidationConfig(0.01), scope="cumulative")
    # on p1's own comments A gives LD1 a perfect score
    assert res.reports[0].f1 == pytest.approx(1 / 6)
    with pytest.raises(ValueError):
        converge([[A]], corpus, scope="bogus")
    with pytest.raises(ValueError):
        converge([], corpus)
