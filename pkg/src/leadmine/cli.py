"""Command-line entry point: ``leadmine <subcommand> ...``.

Every subcommand that produces files writes them under ``--out`` together
with ``manifest.json`` (artifacts, seed and effective settings). Settings can
come from a TOML file given with ``--config``; flags win over the file.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import dataclass, fields
from importlib.resources import files
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from ._util import dumps_record, read_jsonl, write_jsonl

log = logging.getLogger("leadmine")

EXIT_OK, EXIT_ERROR, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    cache_dir: str = "cache"
    patterns_path: str | None = None
    dicts_dir: str | None = None
    corpus_paths: tuple[str, ...] = ()
    seed: int = 0
    convergence_threshold: float = 0.01
    worker_count: int = 1
    output_dir: str = "out"

    @classmethod
    def load(cls, path: str | None) -> "RunConfig":
        if path is None:
            return cls()
        try:
            import tomllib
        except ModuleNotFoundError:  # Python 3.10
            import tomli as tomllib

        with open(path, "rb") as fh:
            data = tomllib.load(fh)
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise UsageError(f"{path}: unknown config keys: {', '.join(unknown)}")
        if "corpus_paths" in data:
            data["corpus_paths"] = tuple(data["corpus_paths"])
        return cls(**data)


def bundled(*parts: str) -> Path:
    """Path of a file shipped in the package's data directory."""
    return Path(str(files("leadmine").joinpath("data", *parts)))


def _pick(flag: Any, configured: Any) -> Any:
    return configured if flag is None else flag


def _require_paths(*paths: str | Path | None) -> None:
    for p in paths:
        if p is not None and not Path(p).exists():
            raise FileNotFoundError(f"no such file or directory: {p}")


class Output:
    """Collects the artifacts written under one output directory."""

    def __init__(self, directory: str | Path, command: str, seed: int, settings: dict):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.seed = seed
        self.settings = settings
        self.artifacts: list[str] = []

    def path(self, name: str) -> Path:
        self.artifacts.append(name)
        return self.dir / name

    def finish(self) -> None:
        manifest = {
            "artifacts": sorted(self.artifacts),
            "command": self.command,
            "seed": self.seed,
            "settings": self.settings,
            "version": __version__,
        }
        (self.dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# loaders shared by subcommands


def load_comments(path: str | Path, strip_code: bool = True):
    """Annotated comments from pre-tagged or raw JSONL (raw is preprocessed)."""
    from .preprocess import RawComment, comment_from_record, preprocess

    out = []
    for line_no, rec in read_jsonl(path):
        if "sentences" in rec:
            out.append(comment_from_record(rec, line_no))
            continue
        if "body" not in rec or "comment_id" not in rec:
            raise ValueError(f"{path}:{line_no}: record has neither 'sentences' nor 'comment_id'/'body'")
        if "issue_id" not in rec and "issue_number" in rec:
            rec = dict(rec, issue_id=rec["issue_number"])
        rec.setdefault("issue_id", "")
        rec.setdefault("created_at", "1970-01-01T00:00:00Z")
        out.append(preprocess(RawComment.from_record(rec), strip_code=strip_code))
    return out


def load_patterns(patterns_path: str | Path | None, dicts_dir: str | Path | None):
    from .patterns import load_dictionaries, load_pattern_file

    registry = load_dictionaries(dicts_dir)
    pats = load_pattern_file(patterns_path, registry) if patterns_path else None
    return pats, registry


def load_label_map(path: str | Path) -> dict:
    """comment_id -> label from a classify output (JSONL) or a label CSV."""
    from .corpus import read_label_file
    from .patterns import LeadershipLabel

    p = Path(path)
    if p.suffix == ".jsonl":
        out = {}
        for line_no, rec in read_jsonl(p):
            try:
                out[str(rec["comment_id"])] = LeadershipLabel.parse(rec["label"])
            except (KeyError, ValueError):
                raise ValueError(f"{p}:{line_no}: expected comment_id and a valid label") from None
        return out
    return dict(read_label_file(p))


def load_classified(path: str | Path) -> list[dict]:
    recs = [rec for _, rec in read_jsonl(path)]
    for r in recs:
        if "comment_id" not in r or "label" not in r:
            raise ValueError(f"{path}: records need comment_id and label")
    return recs


def _labeled_corpus(corpus_paths: Sequence[str], label_paths: Sequence[str]):
    from .corpus import import_labels

    if len(corpus_paths) != len(label_paths):
        raise UsageError("give one --labels file per --corpus file")
    labeled = []
    for cp, lp in zip(corpus_paths, label_paths):
        labeled.extend(import_labels(lp, load_comments(cp), project=Path(cp).stem))
    return labeled


# ---------------------------------------------------------------------------
# subcommands


def cmd_ingest(args, cfg: RunConfig) -> int:
    from .ingestion import DEFAULT_API, fetch_project

    token = os.environ.get(args.token_env)
    if args.require_auth and not token:
        print(f"error: --require-auth given but ${args.token_env} is not set", file=sys.stderr)
        return EXIT_USAGE
    cache = _pick(args.cache, cfg.cache_dir)
    summary = fetch_project(
        args.repo,
        token,
        cache,
        base_url=args.api_url or DEFAULT_API,
        requests_per_second=args.rate,
        workers=_pick(args.workers, max(cfg.worker_count, 2)),
    )
    print(summary.format())
    return EXIT_OK


def cmd_preprocess(args, cfg: RunConfig) -> int:
    from .preprocess import export_pretagged

    _require_paths(args.input)
    comments = load_comments(args.input, strip_code=not args.keep_code)
    out = Output(_pick(args.out, cfg.output_dir), "preprocess", cfg.seed, {"input": args.input, "keep_code": args.keep_code})
    n = export_pretagged(comments, out.path("comments.jsonl"))
    out.finish()
    print(f"{n} comments preprocessed")
    return EXIT_OK


def cmd_sample(args, cfg: RunConfig) -> int:
    from .corpus import sample_comments

    _require_paths(args.input)
    seed = _pick(args.seed, cfg.seed)
    recs = [rec for _, rec in read_jsonl(args.input)]

    def issue_of(rec: dict) -> str:
        return str(rec.get("issue_id", rec.get("issue_number", "")))

    chosen = sample_comments(recs, args.target, seed, issue_of=issue_of)
    out = Output(_pick(args.out, cfg.output_dir), "sample", seed, {"input": args.input, "target": args.target})
    write_jsonl(out.path("sample.jsonl"), chosen)
    out.finish()
    print(f"sampled {len(chosen)} comments from {len({issue_of(r) for r in chosen})} issues (seed {seed})")
    return EXIT_OK


def cmd_classify(args, cfg: RunConfig) -> int:
    from .analysis import label_distribution, write_distribution_csv
    from .matcher import classification_record, classify_corpus, explain
    from .patterns import ALL_LABELS

    patterns_path = _pick(args.patterns, cfg.patterns_path) or bundled("patterns", "seed.patterns")
    dicts_dir = _pick(args.dicts, cfg.dicts_dir) or bundled("dictionaries")
    _require_paths(patterns_path, dicts_dir, args.input)
    patterns, _ = load_patterns(patterns_path, dicts_dir)
    comments = load_comments(args.input)
    workers = _pick(args.workers, cfg.worker_count)
    results = classify_corpus(list(patterns), comments, workers=workers)

    out = Output(
        _pick(args.out, cfg.output_dir), "classify", cfg.seed,
        {"patterns": str(patterns_path), "dicts": str(dicts_dir), "input": args.input, "workers": workers},
    )
    with open(out.path("labels.jsonl"), "w", encoding="utf-8") as fh:
        for c, (label, res) in zip(comments, results):
            rec = classification_record(c.comment_id, label, res)
            rec.update(issue_id=c.issue_id, author=c.author)
            if args.explain:
                rec["explain"] = explain(list(patterns), c).to_record(c)
            fh.write(dumps_record(rec) + "\n")
    labels = [lab for lab, _ in results]
    if labels:
        dist = label_distribution(labels)
        write_distribution_csv(dist, out.path("distribution.csv"))
        print("  ".join(f"{lab.value}={dist[lab]:.3f}" for lab in ALL_LABELS))
    out.finish()
    print(f"{len(labels)} comments classified with {len(patterns)} patterns")
    return EXIT_OK


def cmd_consolidate(args, cfg: RunConfig) -> int:
    from .consolidation import ConsolidationConfig, PatternSet, converge, iteration_csv, write_trace
    from .patterns import load_dictionaries, load_pattern_file, save_pattern_file

    dicts_dir = _pick(args.dicts, cfg.dicts_dir) or bundled("dictionaries")
    corpus_paths = args.corpus or list(cfg.corpus_paths)
    if not args.new:
        raise UsageError("consolidate needs at least one --new pattern file")
    if not corpus_paths:
        raise UsageError("consolidate needs --corpus")
    _require_paths(args.base, dicts_dir, *args.new, *corpus_paths, *args.labels)
    registry = load_dictionaries(dicts_dir)
    base = list(load_pattern_file(args.base, registry)) if args.base else []
    sets = [PatternSet(Path(p).stem, tuple(load_pattern_file(p, registry))) for p in args.new]
    corpus = _labeled_corpus(corpus_paths, args.labels)
    threshold = _pick(args.threshold, cfg.convergence_threshold)
    config = ConsolidationConfig(convergence_threshold=threshold, prune_individually=args.prune_individually)
    result = converge(sets, corpus, config, initial=base, scope=args.scope)

    table = iteration_csv(result.reports)
    accepted = sum(1 for s in result.trace if s.accepted)
    if args.dry_run:
        for step in result.trace:
            print(dumps_record(step.to_record()))
        print(table, end="")
        print(f"dry run: {accepted} accepted steps, {len(result.patterns)} patterns; nothing written")
        return EXIT_OK
    out = Output(
        _pick(args.out, cfg.output_dir), "consolidate", cfg.seed,
        {"base": args.base, "new": list(args.new), "corpus": list(corpus_paths), "labels": list(args.labels),
         "threshold": threshold, "scope": args.scope, "prune_individually": args.prune_individually},
    )
    save_pattern_file(result.patterns, out.path("consolidated.patterns"))
    write_trace(result.trace, out.path("trace.jsonl"))
    out.path("iterations.csv").write_text(table, encoding="utf-8")
    out.finish()
    print(table, end="")
    print(f"{len(result.reports)} iterations, {len(result.patterns)} patterns"
          + (" (converged early)" if result.stopped_early else ""))
    return EXIT_OK


def cmd_evaluate(args, cfg: RunConfig) -> int:
    from .metrics import evaluate
    from .patterns import ALL_LABELS

    _require_paths(args.pred, args.gold)
    pred = load_label_map(args.pred)
    gold = load_label_map(args.gold)
    missing = sorted(set(gold) - set(pred))
    if missing:
        raise ValueError(f"{len(missing)} gold comments have no prediction, e.g. {missing[:5]}")
    ids = sorted(gold)
    report = evaluate([pred[i] for i in ids], [gold[i] for i in ids])
    print(report.format_table())
    if args.out:
        out = Output(args.out, "evaluate", cfg.seed, {"pred": args.pred, "gold": args.gold})
        out.path("report.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
        with open(out.path("confusion.csv"), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["gold\\pred", *(lab.value for lab in ALL_LABELS)])
            for lab, row in zip(ALL_LABELS, report.confusion):
                w.writerow([lab.value, *row])
        out.finish()
    return EXIT_OK


def cmd_kappa(args, cfg: RunConfig) -> int:
    import itertools

    from .corpus import aligned_annotations, read_annotator_file
    from .metrics import average_pairwise_kappa, cohen_kappa

    _require_paths(args.annotations)
    names, vectors = aligned_annotations(read_annotator_file(args.annotations))
    if len(names) < 2:
        raise ValueError("need at least two annotators")
    for (na, a), (nb, b) in itertools.combinations(zip(names, vectors), 2):
        print(f"{na} vs {nb}: {cohen_kappa(a, b):.4f}")
    print(f"average pairwise kappa over {len(vectors[0])} comments: {average_pairwise_kappa(vectors):.4f}")
    return EXIT_OK


def _threads(args):
    from .analysis import build_threads
    from .ingestion import load_cache

    _require_paths(args.cache, args.classified)
    issues, comments, devs = load_cache(args.cache)
    labels = load_label_map(args.classified)
    if args.comments:
        annotated = load_comments(args.comments)
    else:
        annotated = load_comments_from_cache(comments)
    lemmas = {c.comment_id: tuple(c.lemmas()) for c in annotated}
    return build_threads(issues, comments, labels, lemmas), devs


def load_comments_from_cache(comments):
    from .preprocess import preprocess

    return [preprocess(c.raw_comment()) for c in comments]


def cmd_analyze(args, cfg: RunConfig) -> int:
    from . import analysis as an
    from .patterns import LeadershipLabel

    out = Output(_pick(args.out, cfg.output_dir), f"analyze {args.what}", cfg.seed, {k: v for k, v in vars(args).items() if k not in ("func", "config")})

    if args.what == "dist":
        _require_paths(*args.classified)
        labels = [LeadershipLabel.parse(r["label"]) for p in args.classified for r in load_classified(p)]
        dist = an.label_distribution(labels)
        an.write_distribution_csv(dist, out.path("distribution.csv"))
        an.plot_distribution_svg(dist, out.path("distribution.svg"))
        print("  ".join(f"{lab.value}={v:.3f}" for lab, v in dist.items()))
    elif args.what == "pareto":
        _require_paths(*args.classified)
        curves = {}
        for p in args.classified:
            counts: dict[str, int] = {}
            for r in load_classified(p):
                author = r.get("author") or ""
                if not author:
                    continue
                counts.setdefault(author, 0)
                if LeadershipLabel.parse(r["label"]).is_leadership:
                    counts[author] += 1
            curves[Path(p).parent.name if Path(p).name == "labels.jsonl" else Path(p).stem] = an.pareto_curve(counts)
        an.write_pareto_csv(curves, out.path("pareto.csv"))
        an.plot_pareto_svg(curves, out.path("pareto.svg"))
        for name, curve in sorted(curves.items()):
            print(f"{name}: top {an.top_share(curve):.1%} of developers account for more than 80% of leadership comments")
    elif args.what == "corr":
        _require_paths(args.cache, *args.classified)
        from .ingestion import load_cache

        _, _, devs = load_cache(args.cache)
        pairs = []
        for p in args.classified:
            pairs.extend((r.get("author") or "", LeadershipLabel.parse(r["label"])) for r in load_classified(p))
        profiles = an.developer_profiles(pairs, devs)
        table = an.correlation_table(profiles, args.method)
        an.write_correlation_csv(table, out.path("correlation.csv"))
        print(f"{args.method} correlation over {len(profiles)} developers")
        for (m, ind), v in table.items():
            print(f"  {m:<14} {ind:<15} {an._fmt(v)}")
    elif args.what in ("influence", "hypothesis"):
        threads, _ = _threads(args)
        rows = an.corpus_features(threads)
        if args.what == "influence":
            an.write_feature_csv(rows, out.path("features.csv"))
            print(f"features for {len(rows)} comments in {len(threads)} issues")
        else:
            table = an.hypothesis_table([(c.label, f) for _, c, f in rows])
            an.write_hypothesis_csv(table, out.path("hypothesis.csv"))
            labels = ["LD1", "LD2", "LD3", "LD4", "LD5", "LD6"]
            print(f"{'feature':<18}" + "".join(f"{lab:>9}" for lab in labels))
            for feat in table.features:
                cells = [table.cell(feat, lab) for lab in labels]
                print(f"{feat:<18}" + "".join(f"{(c.render() if c else 'n/a'):>9}" for c in cells))
    out.finish()
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="leadmine", description="Identify leadership behaviour in issue discussions.")
    ap.add_argument("--config", help="TOML file with default settings")
    ap.add_argument("-v", "--verbose", action="store_true")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="fetch closed issues, comments, commits and followers")
    p.add_argument("repo", help="owner/name")
    p.add_argument("--cache", help="cache root directory")
    p.add_argument("--token-env", default="GITHUB_TOKEN", help="environment variable holding the API token")
    p.add_argument("--require-auth", action="store_true", help="fail if the token variable is unset")
    p.add_argument("--api-url", help="API base URL (default: GitHub)")
    p.add_argument("--rate", type=float, default=1.0, help="maximum requests per second")
    p.add_argument("--workers", type=int, help="concurrent profile fetches")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("preprocess", help="strip quotes, tokenize, tag and lemmatize comments")
    p.add_argument("--input", required=True, help="raw comment JSONL")
    p.add_argument("--keep-code", action="store_true", help="keep fenced code blocks")
    p.add_argument("--out")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("sample", help="seeded issue-level sample of comments")
    p.add_argument("--input", required=True)
    p.add_argument("--target", type=int, required=True, help="minimum number of comments")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("classify", help="label comments with a ranked pattern list")
    p.add_argument("--patterns", help="ranked pattern file (default: bundled seed list)")
    p.add_argument("--dicts", help="dictionary directory (default: bundled dictionaries)")
    p.add_argument("--input", required=True, help="raw or pre-tagged comment JSONL")
    p.add_argument("--explain", action="store_true", help="include per-pattern diagnostics")
    p.add_argument("--workers", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("consolidate", help="merge project pattern sets into one ranked list")
    p.add_argument("--base", help="starting ranked list (default: empty)")
    p.add_argument("--new", action="append", default=[], help="project pattern file, in merge order (repeatable)")
    p.add_argument("--corpus", action="append", default=[], help="comment JSONL (repeatable)")
    p.add_argument("--labels", action="append", default=[], help="gold label CSV per --corpus")
    p.add_argument("--dicts", help="dictionary directory (default: bundled dictionaries)")
    p.add_argument("--threshold", type=float, help="stop when the F1 gain of an iteration is below this")
    p.add_argument("--scope", choices=("all", "cumulative"), default="all", help="comments scored in each iteration")
    p.add_argument("--prune-individually", action="store_true", help="try removing fakewinners one at a time")
    p.add_argument("--dry-run", action="store_true", help="print the trace, write nothing")
    p.add_argument("--out")
    p.set_defaults(func=cmd_consolidate)

    p = sub.add_parser("evaluate", help="precision, recall and F1 against gold labels")
    p.add_argument("--pred", required=True, help="classify labels.jsonl or label CSV")
    p.add_argument("--gold", required=True, help="label CSV")
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("kappa", help="Cohen's kappa between annotators")
    p.add_argument("--annotations", required=True, help="CSV comment_id,annotator,label")
    p.set_defaults(func=cmd_kappa)

    p = sub.add_parser("analyze", help="distribution, Pareto, correlation, influence and hypothesis analyses")
    p.add_argument("what", choices=("dist", "pareto", "corr", "influence", "hypothesis"))
    p.add_argument("--classified", action="append", default=[], help="classify labels.jsonl (repeatable for dist/pareto/corr)")
    p.add_argument("--cache", help="ingestion cache directory of one repository")
    p.add_argument("--comments", help="pre-tagged comments for word divergence (default: preprocess cached bodies)")
    p.add_argument("--method", choices=("spearman", "pearson"), default="spearman")
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if not args.verbose:
        logging.getLogger("httpx").setLevel(logging.WARNING)
    try:
        cfg = RunConfig.load(args.config)
        if args.command == "analyze":
            if not args.classified:
                raise UsageError("analyze needs --classified")
            if args.what in ("corr", "influence", "hypothesis"):
                if not args.cache:
                    raise UsageError(f"analyze {args.what} needs --cache")
                if args.what != "corr" and len(args.classified) != 1:
                    raise UsageError(f"analyze {args.what} takes exactly one --classified file")
                if args.what != "corr":
                    args.classified = args.classified[0]
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, KeyError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
