"""Empirical analyses over classified corpora.

Label distributions, developer Pareto curves, rank correlation against
traditional indicators (commits, followers), 24-hour influence features and
Mann-Whitney hypothesis tests against non-leadership comments.
"""

from __future__ import annotations

import csv
import io
import math
from collections import Counter, defaultdict
from dataclasses import astuple, dataclass, fields
from datetime import datetime, timedelta
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .patterns import ALL_LABELS, LEADERSHIP_LABELS, LeadershipLabel

EXACT_MAX = 8
DEFAULT_WINDOW = timedelta(hours=24)

# ---------------------------------------------------------------------------
# distribution and Pareto


def label_distribution(labels: Iterable[LeadershipLabel]) -> dict[LeadershipLabel, float]:
    """Fraction of comments per label, over all seven labels."""
    counts = Counter(LeadershipLabel(lab) for lab in labels)
    total = sum(counts.values())
    if total == 0:
        raise ValueError("label distribution of an empty corpus")
    return {lab: counts.get(lab, 0) / total for lab in ALL_LABELS}


def pareto_curve(counts: Mapping[str, int]) -> list[tuple[float, float]]:
    """Cumulative (developer fraction, leadership fraction) points.

    Developers are ordered by count descending, ties by login. With all
    counts zero the curve stays at 0 and jumps to (1, 1) at the last point.
    """
    if not counts:
        raise ValueError("pareto curve needs at least one developer")
    if any(c < 0 for c in counts.values()):
        raise ValueError("negative leadership count")
    order = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    n = len(order)
    total = sum(counts.values())
    points = []
    running = 0
    for k, (_, c) in enumerate(order, start=1):
        running += c
        share = running / total if total else 0.0
        points.append((k / n, share))
    points[-1] = (1.0, 1.0)
    return points


def top_share(curve: Sequence[tuple[float, float]], threshold: float = 0.8) -> float:
    """Smallest developer fraction whose cumulative share exceeds ``threshold``."""
    for dev_frac, share in curve:
        if share > threshold:
            return dev_frac
    return 1.0


# ---------------------------------------------------------------------------
# correlation


def rank_average(values: Sequence[float]) -> np.ndarray:
    """1-based ranks with ties given the mean of their positions."""
    x = np.asarray(values, dtype=float)
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x), dtype=float)
    sx = x[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Pearson correlation; NaN when either vector is constant."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 3:
        raise ValueError("correlation needs at least 3 pairs")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        return math.nan
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Spearman rank correlation (average ranks for ties).

    Returns NaN, meaning undefined, when either vector is constant.
    """
    if len(xs) != len(ys):
        raise ValueError(f"length mismatch: {len(xs)} vs {len(ys)}")
    if len(xs) < 3:
        raise ValueError("correlation needs at least 3 pairs")
    return pearson(rank_average(xs), rank_average(ys))


INDICATORS = ("commit_count", "follower_count")


@dataclass(frozen=True)
class DeveloperProfile:
    login: str
    label_counts: dict[LeadershipLabel, int]
    commit_count: int = 0
    follower_count: int = 0

    @property
    def total_comments(self) -> int:
        return sum(self.label_counts.values())

    @property
    def leadership_count(self) -> int:
        return sum(self.label_counts.get(lab, 0) for lab in LEADERSHIP_LABELS)

    @property
    def leadership_percentage(self) -> float:
        total = self.total_comments
        return self.leadership_count / total if total else 0.0


def developer_profiles(
    authored_labels: Iterable[tuple[str, LeadershipLabel]],
    stats: Mapping[str, object] | None = None,
) -> list[DeveloperProfile]:
    """Per-developer label totals joined with commit and follower counts.

    ``stats`` maps login to anything with ``commit_count`` and
    ``follower_count`` attributes (e.g. ingestion's DeveloperStats).
    """
    per: dict[str, Counter] = defaultdict(Counter)
    for login, lab in authored_labels:
        if login:
            per[login][LeadershipLabel(lab)] += 1
    stats = stats or {}
    out = []
    for login in sorted(per):
        s = stats.get(login)
        out.append(
            DeveloperProfile(
                login,
                {lab: per[login].get(lab, 0) for lab in ALL_LABELS},
                int(getattr(s, "commit_count", 0)) if s is not None else 0,
                int(getattr(s, "follower_count", 0)) if s is not None else 0,
            )
        )
    return out


def leadership_measures(p: DeveloperProfile) -> dict[str, float]:
    m: dict[str, float] = {lab.value: float(p.label_counts.get(lab, 0)) for lab in LEADERSHIP_LABELS}
    m["TotalLD"] = float(p.leadership_count)
    m["LeadershipPct"] = p.leadership_percentage
    return m


def correlation_table(profiles: Sequence[DeveloperProfile], method: str = "spearman") -> dict[tuple[str, str], float]:
    """Correlation of every leadership measure with every indicator."""
    fn = {"spearman": spearman, "pearson": pearson}.get(method)
    if fn is None:
        raise ValueError(f"unknown correlation method {method!r}")
    measures = [leadership_measures(p) for p in profiles]
    out = {}
    for name in measures[0] if measures else ():
        xs = [m[name] for m in measures]
        for ind in INDICATORS:
            ys = [getattr(p, ind) for p in profiles]
            out[(name, ind)] = fn(xs, ys)
    return out


# ---------------------------------------------------------------------------
# Mann-Whitney U


class MannWhitneyResult(NamedTuple):
    u: float
    p_value: float


def _u_statistic(a: Sequence[float], b: Sequence[float]) -> tuple[float, np.ndarray]:
    ranks = rank_average(list(a) + list(b))
    n = len(a)
    return float(ranks[:n].sum()) - n * (n + 1) / 2.0, ranks


def _rank_sum_counts(doubled: np.ndarray, k: int) -> np.ndarray:
    """Number of k-subsets of ``doubled`` rank values per subset sum."""
    top = int(np.sort(doubled)[-k:].sum()) if k else 0
    dp = np.zeros((k + 1, top + 1))
    dp[0, 0] = 1.0
    for r in doubled:
        r = int(r)
        for j in range(k, 0, -1):
            dp[j, r:] += dp[j - 1, : top + 1 - r]
    return dp[k]


def mwu_exact_p(a: Sequence[float], b: Sequence[float]) -> float:
    """Exact two-sided p from the permutation distribution of the rank sum.

    Ties are kept at their mid-ranks, so this is the exact conditional test.
    """
    if not a or not b:
        raise ValueError("Mann-Whitney U needs two non-empty samples")
    _, ranks = _u_statistic(a, b)
    doubled = np.rint(ranks * 2).astype(np.int64)
    n, m = len(a), len(b)
    # enumerate subsets of the smaller sample's size
    if n <= m:
        k, observed = n, int(doubled[:n].sum())
    else:
        k, observed = m, int(doubled[n:].sum())
    counts = _rank_sum_counts(doubled, k)
    total = counts.sum()
    lower = counts[: observed + 1].sum() / total
    upper = counts[observed:].sum() / total
    return float(min(1.0, 2.0 * min(lower, upper)))


def mwu_normal_p(a: Sequence[float], b: Sequence[float]) -> float:
    """Normal approximation with tie and continuity correction."""
    if not a or not b:
        raise ValueError("Mann-Whitney U needs two non-empty samples")
    u, ranks = _u_statistic(a, b)
    n, m = len(a), len(b)
    big_n = n + m
    _, tie_sizes = np.unique(ranks, return_counts=True)
    ties = float(((tie_sizes**3) - tie_sizes).sum())
    var = n * m / 12.0 * ((big_n + 1) - ties / (big_n * (big_n - 1)))
    if var <= 0:
        return 1.0
    z = max(abs(u - n * m / 2.0) - 0.5, 0.0) / math.sqrt(var)
    return min(1.0, math.erfc(z / math.sqrt(2.0)))


def mann_whitney_u(a: Sequence[float], b: Sequence[float], method: str = "auto") -> MannWhitneyResult:
    """U statistic of ``a`` and its two-sided p value.

    ``auto`` uses the exact distribution when the smaller sample has at most
    8 values and the normal approximation otherwise.
    """
    a, b = list(a), list(b)
    if not a or not b:
        raise ValueError("Mann-Whitney U needs two non-empty samples")
    if method == "auto":
        method = "exact" if min(len(a), len(b)) <= EXACT_MAX else "normal"
    if method == "exact":
        p = mwu_exact_p(a, b)
    elif method == "normal":
        p = mwu_normal_p(a, b)
    else:
        raise ValueError(f"unknown method {method!r}")
    u, _ = _u_statistic(a, b)
    return MannWhitneyResult(u, p)


# ---------------------------------------------------------------------------
# influence features


@dataclass(frozen=True)
class ThreadComment:
    comment_id: str
    author: str
    created_at: datetime
    label: LeadershipLabel
    lemmas: tuple[str, ...] = ()


@dataclass(frozen=True)
class Thread:
    issue_id: str
    reporter: str
    created_at: datetime
    closed_at: datetime
    comments: tuple[ThreadComment, ...]

    def __post_init__(self) -> None:
        ordered = tuple(sorted(self.comments, key=lambda c: (c.created_at, c.comment_id)))
        object.__setattr__(self, "comments", ordered)

    def comment(self, comment_id: str) -> ThreadComment:
        for c in self.comments:
            if c.comment_id == comment_id:
                return c
        raise KeyError(f"comment {comment_id!r} is not in issue {self.issue_id!r}")


@dataclass(frozen=True)
class InfluenceFeatures:
    other_commenter: int
    comment_num: int
    reporter_response: int
    self_response: int
    other_response: int
    ld_num: int
    ld_types: int
    word_divergence: float
    time_from_start: float
    time_to_close: float


FEATURE_NAMES = tuple(f.name for f in fields(InfluenceFeatures))


def influence_features(thread: Thread, comment: ThreadComment | str, window: timedelta = DEFAULT_WINDOW) -> InfluenceFeatures:
    """Features of the discussion in ``(t, t + window]`` after a comment.

    Later comments by the comment's own author count as self responses, even
    when that author also reported the issue.
    """
    if isinstance(comment, str):
        comment = thread.comment(comment)
    elif comment not in thread.comments:
        raise KeyError(f"comment {comment.comment_id!r} is not in issue {thread.issue_id!r}")
    t = comment.created_at
    if thread.closed_at < t:
        raise ValueError(
            f"comment {comment.comment_id} was posted after issue {thread.issue_id} closed"
        )
    if t < thread.created_at:
        raise ValueError(f"comment {comment.comment_id} predates issue {thread.issue_id}")
    end = t + window
    in_window = [c for c in thread.comments if t < c.created_at <= end and c is not comment]

    reporter = self_ = other = 0
    others: set[str] = set()
    for c in in_window:
        if c.author == comment.author:
            self_ += 1
        elif c.author == thread.reporter:
            reporter += 1
        else:
            other += 1
            others.add(c.author)
    ld = [c.label for c in in_window if c.label.is_leadership]
    words = [w for c in in_window for w in c.lemmas]
    return InfluenceFeatures(
        other_commenter=len(others),
        comment_num=len(in_window),
        reporter_response=reporter,
        self_response=self_,
        other_response=other,
        ld_num=len(ld),
        ld_types=len(set(ld)),
        word_divergence=len(set(words)) / len(words) if words else 0.0,
        time_from_start=(t - thread.created_at).total_seconds() / 3600.0,
        time_to_close=(thread.closed_at - t).total_seconds() / 3600.0,
    )


def corpus_features(threads: Iterable[Thread], window: timedelta = DEFAULT_WINDOW) -> list[tuple[Thread, ThreadComment, InfluenceFeatures]]:
    out = []
    for th in threads:
        for c in th.comments:
            out.append((th, c, influence_features(th, c, window)))
    return out


def build_threads(
    issues: Iterable,
    comments: Iterable,
    labels: Mapping[str, LeadershipLabel],
    lemmas: Mapping[str, Sequence[str]] | None = None,
) -> list[Thread]:
    """Join ingested issues and comments with classifier labels.

    Comments without a label are left out of the thread.
    """
    lemmas = lemmas or {}
    by_issue: dict[int, list[ThreadComment]] = defaultdict(list)
    for c in comments:
        lab = labels.get(c.comment_id)
        if lab is None:
            continue
        by_issue[c.issue_number].append(
            ThreadComment(c.comment_id, c.author, c.created_at, LeadershipLabel(lab), tuple(lemmas.get(c.comment_id, ())))
        )
    out = []
    for issue in issues:
        if by_issue.get(issue.number):
            out.append(Thread(str(issue.number), issue.reporter, issue.created_at, issue.closed_at, tuple(by_issue[issue.number])))
    return out


# ---------------------------------------------------------------------------
# hypothesis table


def significance_band(p: float) -> str:
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return "ns"


@dataclass(frozen=True)
class HypothesisCell:
    feature: str
    label: LeadershipLabel
    direction: str
    significance: str
    p_value: float
    n_label: int
    n_baseline: int

    def render(self) -> str:
        return f"({self.direction}){'#' if self.significance == 'ns' else self.significance}"


@dataclass(frozen=True)
class HypothesisTable:
    cells: dict[tuple[str, LeadershipLabel], HypothesisCell]
    insufficient: tuple[LeadershipLabel, ...]
    features: tuple[str, ...] = FEATURE_NAMES

    def cell(self, feature: str, label: LeadershipLabel) -> HypothesisCell | None:
        return self.cells.get((feature, LeadershipLabel(label)))


def hypothesis_table(
    samples: Iterable[tuple[LeadershipLabel, InfluenceFeatures]],
    features: Sequence[str] = FEATURE_NAMES,
) -> HypothesisTable:
    """Compare each LDk's feature values against N comments' values.

    Direction is the sign of the mean difference ("=" when the means are
    equal); labels without comments are reported as insufficient data.
    """
    groups: dict[LeadershipLabel, list[InfluenceFeatures]] = defaultdict(list)
    for lab, feats in samples:
        groups[LeadershipLabel(lab)].append(feats)
    base = groups.get(LeadershipLabel.N, [])
    if not base:
        raise ValueError("hypothesis testing needs non-leadership (N) comments as the baseline")
    cells = {}
    insufficient = []
    for lab in LEADERSHIP_LABELS:
        group = groups.get(lab, [])
        if not group:
            insufficient.append(lab)
            continue
        for feat in features:
            a = [getattr(f, feat) for f in group]
            b = [getattr(f, feat) for f in base]
            _, p = mann_whitney_u(a, b)
            # fsum keeps the means independent of sample order
            diff = math.fsum(a) / len(a) - math.fsum(b) / len(b)
            direction = "+" if diff > 0 else "-" if diff < 0 else "="
            cells[(feat, lab)] = HypothesisCell(feat, lab, direction, significance_band(p), p, len(a), len(b))
    return HypothesisTable(cells, tuple(insufficient), tuple(features))


# ---------------------------------------------------------------------------
# CSV and SVG output


def _fmt(x: float) -> str:
    if isinstance(x, float) and math.isnan(x):
        return "undefined"
    if isinstance(x, float):
        return f"{x:.6f}"
    return str(x)


def _write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def write_distribution_csv(dist: Mapping[LeadershipLabel, float], path: str | Path) -> None:
    _write_csv(path, ["label", "fraction"], [(lab.value, float(dist[lab])) for lab in ALL_LABELS])


def write_pareto_csv(curves: Mapping[str, Sequence[tuple[float, float]]], path: str | Path) -> None:
    rows = [(name, i + 1, float(x), float(y)) for name in sorted(curves) for i, (x, y) in enumerate(curves[name])]
    _write_csv(path, ["project", "rank", "developer_fraction", "leadership_fraction"], rows)


def write_correlation_csv(table: Mapping[tuple[str, str], float], path: str | Path) -> None:
    measures = list(dict.fromkeys(k[0] for k in table))
    _write_csv(path, ["measure", *INDICATORS], [(m, *(float(table[(m, i)]) for i in INDICATORS)) for m in measures])


def write_feature_csv(rows: Iterable[tuple[Thread, ThreadComment, InfluenceFeatures]], path: str | Path) -> None:
    _write_csv(
        path,
        ["issue_id", "comment_id", "label", *FEATURE_NAMES],
        [(th.issue_id, c.comment_id, c.label.value, *astuple(f)) for th, c, f in rows],
    )


def write_hypothesis_csv(table: HypothesisTable, path: str | Path) -> None:
    rows = []
    for feat in table.features:
        for lab in LEADERSHIP_LABELS:
            cell = table.cell(feat, lab)
            if cell is None:
                rows.append((feat, lab.value, "", "insufficient-data", "", "", 0, 0))
            else:
                rows.append((feat, lab.value, cell.direction, cell.significance, cell.render(), cell.p_value, cell.n_label, cell.n_baseline))
    _write_csv(path, ["feature", "label", "direction", "significance", "cell", "p_value", "n_label", "n_baseline"], rows)


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "leadmine"
    plt.rcParams["svg.fonttype"] = "none"
    return plt


def plot_distribution_svg(dist: Mapping[LeadershipLabel, float], path: str | Path, title: str = "Label distribution") -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 3.5))
    labs = [lab.value for lab in ALL_LABELS]
    ax.bar(labs, [dist[lab] for lab in ALL_LABELS], color="#4878a8")
    ax.set_ylabel("fraction of comments")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_pareto_svg(curves: Mapping[str, Sequence[tuple[float, float]]], path: str | Path) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 4))
    for name in sorted(curves):
        pts = [(0.0, 0.0), *curves[name]]
        ax.plot([x for x, _ in pts], [y for _, y in pts], label=name, linewidth=1.2)
    ax.axhline(0.8, color="grey", linestyle=":", linewidth=0.8)
    ax.set_xlabel("fraction of developers")
    ax.set_ylabel("fraction of leadership comments")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.02)
    if len(curves) > 1:
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
