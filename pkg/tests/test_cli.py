import json

import pytest

from leadmine.cli import bundled, main
from leadmine.ingestion import repo_cache_dir
from leadmine.mockapi import MockGitHubServer, build_fixture

from planted import planted_threads

FIXTURE = bundled("fixtures", "seed_corpus.jsonl")
GOLD = bundled("fixtures", "seed_labels.csv")


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def read_jsonl(path):
    return [json.loads(ln) for ln in path.read_text().splitlines() if ln.strip()]


@pytest.fixture(scope="module")
def classified(tmp_path_factory):
    out = tmp_path_factory.mktemp("cls")
    assert main(["classify", "--input", str(FIXTURE), "--out", str(out)]) == 0
    return out


def test_classify_fixture(classified):
    recs = {r["comment_id"]: r for r in read_jsonl(classified / "labels.jsonl")}
    assert len(recs) == 60
    bodies = {r["comment_id"]: r["body"] for r in read_jsonl(FIXTURE)}
    boost = next(cid for cid, b in bodies.items() if b.startswith("What version of Boost are you using?"))
    assert recs[boost]["label"] == "LD4"
    assert recs[boost]["pattern_id"] is not None and recs[boost]["token_indices"]
    manifest = json.loads((classified / "manifest.json").read_text())
    assert "labels.jsonl" in manifest["artifacts"]
    assert (classified / "distribution.csv").exists()


def test_evaluate_against_gold(classified, capsys, tmp_path):
    code, out, _ = run(capsys, "evaluate", "--pred", classified / "labels.jsonl", "--gold", GOLD, "--out", tmp_path)
    assert code == 0 and "macro" in out
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["accuracy"] >= 0.95


def test_evaluate_identical_files(capsys, tmp_path):
    code, _, _ = run(capsys, "evaluate", "--pred", GOLD, "--gold", GOLD, "--out", tmp_path)
    assert code == 0
    assert json.loads((tmp_path / "report.json").read_text())["macro_f1"] == 1.0
    assert (tmp_path / "confusion.csv").read_text().startswith("gold\\pred,LD1")


def test_empty_pattern_file_labels_everything_n(capsys, tmp_path):
    pats = tmp_path / "empty.patterns"
    pats.write_text("# nothing yet\n")
    code, _, _ = run(capsys, "classify", "--patterns", pats, "--input", FIXTURE, "--out", tmp_path / "o")
    assert code == 0
    assert {r["label"] for r in read_jsonl(tmp_path / "o" / "labels.jsonl")} == {"N"}


def test_explain(capsys, tmp_path):
    code, _, _ = run(capsys, "classify", "--input", FIXTURE, "--explain", "--out", tmp_path)
    assert code == 0
    rec = read_jsonl(tmp_path / "labels.jsonl")[0]
    assert "explain" in rec and len(rec["explain"]["patterns"]) == 20


def test_classify_deterministic_across_workers(capsys, tmp_path):
    for w in (1, 3):
        assert run(capsys, "classify", "--input", FIXTURE, "--workers", w, "--out", tmp_path / str(w))[0] == 0
    assert (tmp_path / "1" / "labels.jsonl").read_bytes() == (tmp_path / "3" / "labels.jsonl").read_bytes()


def test_preprocess_then_classify(capsys, tmp_path):
    assert run(capsys, "preprocess", "--input", FIXTURE, "--out", tmp_path / "pre")[0] == 0
    tagged = tmp_path / "pre" / "comments.jsonl"
    assert "sentences" in read_jsonl(tagged)[0]
    assert run(capsys, "classify", "--input", tagged, "--out", tmp_path / "c")[0] == 0
    assert run(capsys, "classify", "--input", FIXTURE, "--out", tmp_path / "r")[0] == 0
    a = [(r["comment_id"], r["label"]) for r in read_jsonl(tmp_path / "c" / "labels.jsonl")]
    b = [(r["comment_id"], r["label"]) for r in read_jsonl(tmp_path / "r" / "labels.jsonl")]
    assert a == b


def test_sample(capsys, tmp_path):
    for name in ("a", "b"):
        assert run(capsys, "sample", "--input", FIXTURE, "--target", 10, "--seed", 3, "--out", tmp_path / name)[0] == 0
    a = (tmp_path / "a" / "sample.jsonl").read_bytes()
    assert a == (tmp_path / "b" / "sample.jsonl").read_bytes()
    assert len(a.splitlines()) >= 10


def _synthetic_sets(tmp_path):
    corpus = tmp_path / "corpus.jsonl"
    rows = [("k1", "Can you share the log?", "LD4"), ("k2", "Duplicate of #3.", "LD2"), ("k3", "Thanks a lot.", "N")]
    corpus.write_text("".join(
        json.dumps({"comment_id": c, "issue_id": "i1", "author": "a", "created_at": "2021-01-01T00:00:00Z", "body": b}) + "\n"
        for c, b, _ in rows
    ))
    labels = tmp_path / "labels.csv"
    labels.write_text("comment_id,label\n" + "".join(f"{c},{g}\n" for c, _, g in rows))
    s1 = tmp_path / "p1.patterns"
    s1.write_text("iq LD4: [lemma:you] [lemma:share]\nbad LD1: [lemma:thanks]\n")
    s2 = tmp_path / "p2.patterns"
    s2.write_text("dup LD2: [lemma:duplicate] [lemma:of]\n")
    return corpus, labels, s1, s2


def test_consolidate(capsys, tmp_path):
    corpus, labels, s1, s2 = _synthetic_sets(tmp_path)
    out = tmp_path / "out"
    code, stdout, _ = run(
        capsys, "consolidate", "--new", s1, "--new", s2, "--corpus", corpus, "--labels", labels,
        "--threshold", 1.0, "--out", out,
    )
    assert code == 0 and "converged early" in stdout
    assert (out / "consolidated.patterns").read_text().split()[0] == "iq"
    rows = (out / "iterations.csv").read_text().splitlines()
    assert rows[0].startswith("Iteration,Projects,#Patterns,#Add,#Delete,#Change") and len(rows) == 2
    trace = read_jsonl(out / "trace.jsonl")
    assert {t["pattern_ids"][0]: t["action"] for t in trace if t["phase"] == "insert"} == {"iq": "insert@0", "bad": "discard"}


def test_consolidate_dry_run_writes_nothing(capsys, tmp_path):
    corpus, labels, s1, s2 = _synthetic_sets(tmp_path)
    out = tmp_path / "out"
    code, stdout, _ = run(capsys, "consolidate", "--new", s1, "--new", s2, "--corpus", corpus, "--labels", labels, "--dry-run", "--out", out)
    assert code == 0 and "nothing written" in stdout
    assert not out.exists()


def test_analyze_dist(classified, capsys, tmp_path):
    code, out, _ = run(capsys, "analyze", "dist", "--classified", classified / "labels.jsonl", "--out", tmp_path)
    assert code == 0
    fracs = [float(ln.split(",")[1]) for ln in (tmp_path / "distribution.csv").read_text().splitlines()[1:]]
    assert sum(fracs) == pytest.approx(1.0)
    assert (tmp_path / "distribution.svg").read_text().lstrip().startswith("<?xml")


def test_analyze_pareto(classified, capsys, tmp_path):
    code, out, _ = run(capsys, "analyze", "pareto", "--classified", classified / "labels.jsonl", "--out", tmp_path)
    assert code == 0 and "80%" in out
    assert (tmp_path / "pareto.csv").read_text().splitlines()[-1].endswith("1.000000,1.000000")


def _planted_cache(tmp_path, n=200):
    issues, comments, labels = planted_threads(n)
    cache = tmp_path / "cache"
    cache.mkdir()
    (cache / "issues.jsonl").write_text("".join(json.dumps(i.to_record()) + "\n" for i in issues))
    (cache / "comments.jsonl").write_text("".join(json.dumps(c.to_record()) + "\n" for c in comments))
    cls = tmp_path / "labels.jsonl"
    cls.write_text("".join(json.dumps({"comment_id": k, "label": v.value}) + "\n" for k, v in labels.items()))
    return cache, cls


def test_analyze_hypothesis_planted(capsys, tmp_path):
    cache, cls = _planted_cache(tmp_path)
    outs = []
    for name in ("a", "b"):
        code, stdout, _ = run(capsys, "analyze", "hypothesis", "--cache", cache, "--classified", cls, "--out", tmp_path / name)
        assert code == 0
        outs.append((tmp_path / name / "hypothesis.csv").read_bytes())
    assert outs[0] == outs[1]
    row = next(ln for ln in outs[0].decode().splitlines() if ln.startswith("comment_num,LD4,"))
    assert "(+)***" in row
    assert "comment_num" in stdout


def test_analyze_influence(capsys, tmp_path):
    cache, cls = _planted_cache(tmp_path, 3)
    code, stdout, _ = run(capsys, "analyze", "influence", "--cache", cache, "--classified", cls, "--out", tmp_path / "o")
    assert code == 0 and "features for" in stdout
    header = (tmp_path / "o" / "features.csv").read_text().splitlines()[0]
    assert header.startswith("issue_id,comment_id,label,other_commenter")


def test_analyze_without_classified_is_usage_error(capsys):
    assert run(capsys, "analyze", "dist")[0] == 2


class TestIngest:
    def test_counts_and_rerun(self, capsys, tmp_path):
        repo = build_fixture(n_issues=30, n_commits=20)
        with MockGitHubServer(repo) as srv:
            args = ("ingest", repo.full_name, "--cache", tmp_path, "--api-url", srv.url, "--rate", 50)
            code, out, _ = run(capsys, *args)
            assert code == 0
            assert f"{repo.closed_issue_count} issues" in out and f"{repo.issue_comment_count} comments" in out
            code, out, _ = run(capsys, *args)
            assert code == 0 and "cache up to date" in out
        assert repo_cache_dir(tmp_path, repo.full_name).is_dir()

    def test_require_auth_without_token(self, capsys, monkeypatch, tmp_path):
        monkeypatch.delenv("LEADMINE_TEST_TOKEN", raising=False)
        code, _, err = run(capsys, "ingest", "a/b", "--cache", tmp_path, "--token-env", "LEADMINE_TEST_TOKEN", "--require-auth")
        assert code == 2 and "LEADMINE_TEST_TOKEN" in err

    def test_bad_token_exit_code(self, capsys, monkeypatch, tmp_path):
        repo = build_fixture(n_issues=5, n_commits=5)
        monkeypatch.setenv("LEADMINE_TEST_TOKEN", "wrong")
        with MockGitHubServer(repo, token="right") as srv:
            code, _, err = run(capsys, "ingest", repo.full_name, "--cache", tmp_path, "--api-url", srv.url,
                               "--token-env", "LEADMINE_TEST_TOKEN", "--rate", 50)
        assert code == 1 and "GITHUB_TOKEN" in err


def test_missing_input_file(capsys, tmp_path):
    code, _, err = run(capsys, "classify", "--input", tmp_path / "nope.jsonl", "--out", tmp_path)
    assert code == 1 and "nope.jsonl" in err


def test_config_file_and_flag_override(capsys, tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text(f'output_dir = "{(tmp_path / "from_cfg").as_posix()}"\nseed = 4\n')
    assert run(capsys, "--config", cfg, "classify", "--input", FIXTURE)[0] == 0
    assert (tmp_path / "from_cfg" / "labels.jsonl").exists()
    assert json.loads((tmp_path / "from_cfg" / "manifest.json").read_text())["seed"] == 4
    assert run(capsys, "--config", cfg, "classify", "--input", FIXTURE, "--out", tmp_path / "flag")[0] == 0
    assert (tmp_path / "flag" / "labels.jsonl").exists()


def test_config_unknown_key(capsys, tmp_path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("colour = 1\n")
    assert run(capsys, "--config", cfg, "classify", "--input", FIXTURE)[0] in (1, 2)


def test_kappa(capsys, tmp_path):
    f = tmp_path / "ann.csv"
    f.write_text("comment_id,annotator,label\nc1,a,LD1\nc2,a,N\nc1,b,LD1\nc2,b,N\n")
    code, out, _ = run(capsys, "kappa", "--annotations", f)
    assert code == 0 and "1.000" in out

