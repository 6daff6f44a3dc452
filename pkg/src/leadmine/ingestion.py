"""GitHub REST ingestion into a resumable line-delimited cache.

Cache layout, one directory per repository::

    <cache>/<owner>__<repo>/issues.jsonl
                            comments.jsonl
                            commits.jsonl
                            users.jsonl
                            state.json

``state.json`` records every completed page (its URL, the next-page URL and
how many records it contributed), so an interrupted or truncated cache
resumes from the first page that is not fully on disk.
"""

from __future__ import annotations

import json
import logging
import os
import random
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from datetime import datetime
from pathlib import Path
from typing import Callable, Iterable
from urllib.parse import urlsplit

import httpx

from ._util import dumps_record, format_timestamp, parse_timestamp, read_jsonl

log = logging.getLogger(__name__)

DEFAULT_API = "https://api.github.com"
TOKEN_ENV = "GITHUB_TOKEN"
KINDS = ("issues", "comments", "commits", "users")


class IngestionError(RuntimeError):
    pass


class AuthenticationError(IngestionError):
    pass


class RepositoryNotFound(IngestionError):
    pass


class MalformedPageError(IngestionError):
    def __init__(self, url: str, reason: str):
        self.url = url
        super().__init__(f"malformed page {url}: {reason}")


class CacheIntegrityError(ValueError):
    pass


# ---------------------------------------------------------------------------
# records


@dataclass(frozen=True)
class IssueRecord:
    number: int
    title: str
    reporter: str
    created_at: datetime
    closed_at: datetime
    is_pull_request: bool = False

    def to_record(self) -> dict:
        d = asdict(self)
        d["created_at"] = format_timestamp(self.created_at)
        d["closed_at"] = format_timestamp(self.closed_at)
        return d

    @classmethod
    def from_record(cls, rec: dict) -> "IssueRecord":
        return cls(
            number=int(rec["number"]),
            title=rec.get("title") or "",
            reporter=rec.get("reporter") or "",
            created_at=parse_timestamp(rec["created_at"]),
            closed_at=parse_timestamp(rec["closed_at"]),
            is_pull_request=bool(rec.get("is_pull_request", False)),
        )


@dataclass(frozen=True)
class CommentRecord:
    comment_id: str
    issue_number: int
    author: str
    created_at: datetime
    body: str

    def to_record(self) -> dict:
        d = asdict(self)
        d["created_at"] = format_timestamp(self.created_at)
        return d

    @classmethod
    def from_record(cls, rec: dict) -> "CommentRecord":
        return cls(
            comment_id=str(rec["comment_id"]),
            issue_number=int(rec["issue_number"]),
            author=rec.get("author") or "",
            created_at=parse_timestamp(rec["created_at"]),
            body=rec.get("body") or "",
        )

    def raw_comment(self):
        from .preprocess import RawComment

        return RawComment(self.comment_id, str(self.issue_number), self.author, self.created_at, self.body)


@dataclass(frozen=True)
class DeveloperStats:
    login: str
    commit_count: int = 0
    follower_count: int = 0
    comment_count: int = 0


@dataclass(frozen=True)
class FetchSummary:
    repo: str
    issues: int
    comments: int
    commits: int
    users: int
    skipped_pull_requests: int
    unattributed_commits: int
    requests: int
    up_to_date: bool = False

    def format(self) -> str:
        if self.up_to_date:
            head = f"{self.repo}: cache up to date"
        else:
            head = f"{self.repo}: fetched"
        return (
            f"{head} ({self.issues} issues, {self.comments} comments, {self.commits} commits, "
            f"{self.users} users; {self.skipped_pull_requests} pull requests and "
            f"{self.unattributed_commits} unattributed commits skipped; {self.requests} requests)"
        )


# ---------------------------------------------------------------------------
# HTTP


class RateLimiter:
    """Spaces request start times at least ``1/rate`` seconds apart across threads."""

    def __init__(self, rate: float, clock: Callable[[], float] = time.monotonic, sleep: Callable[[float], None] = time.sleep):
        if rate <= 0:
            raise ValueError("rate must be positive")
        self.interval = 1.0 / rate
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._next = 0.0

    def acquire(self) -> None:
        with self._lock:
            now = self._clock()
            slot = max(now, self._next)
            self._next = slot + self.interval
        if slot > now:
            self._sleep(slot - now)

    def block_for(self, seconds: float) -> None:
        """Hold back every caller for ``seconds`` (shared rate-limit reset)."""
        with self._lock:
            self._next = max(self._next, self._clock() + seconds)


class GitHubClient:
    def __init__(
        self,
        token: str | None = None,
        base_url: str = DEFAULT_API,
        requests_per_second: float = 1.0,
        max_rate_limit_waits: int = 10,
        max_retries: int = 3,
        timeout: float = 30.0,
        sleep: Callable[[float], None] = time.sleep,
        wall_clock: Callable[[], float] = time.time,
    ):
        headers = {"Accept": "application/vnd.github+json", "User-Agent": "leadmine"}
        if token:
            headers["Authorization"] = f"Bearer {token}"
        self.has_token = bool(token)
        self._http = httpx.Client(base_url=base_url.rstrip("/"), headers=headers, timeout=timeout)
        self.limiter = RateLimiter(requests_per_second, sleep=sleep)
        self._sleep = sleep
        self._wall = wall_clock
        self.max_rate_limit_waits = max_rate_limit_waits
        self.max_retries = max_retries
        self.requests = 0
        self._count_lock = threading.Lock()

    def relative(self, url: str) -> str:
        """``url`` as path and query under the base URL, so cached links survive a host change."""
        parts = urlsplit(url)
        prefix = self._http.base_url.path.rstrip("/")
        path = parts.path[len(prefix):] if prefix and parts.path.startswith(prefix + "/") else parts.path
        return path + (f"?{parts.query}" if parts.query else "")

    def close(self) -> None:
        self._http.close()

    def __enter__(self) -> "GitHubClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _rate_limit_wait(self, resp: httpx.Response) -> float | None:
        if resp.status_code not in (403, 429):
            return None
        retry_after = resp.headers.get("Retry-After")
        if retry_after is not None:
            return max(float(retry_after), 0.0)
        if resp.headers.get("X-RateLimit-Remaining") == "0":
            reset = float(resp.headers.get("X-RateLimit-Reset", "0"))
            return max(reset - self._wall(), 0.0)
        return None

    def get(self, url: str, params: dict | None = None, headers: dict | None = None) -> httpx.Response:
        waits = 0
        errors = 0
        while True:
            self.limiter.acquire()
            with self._count_lock:
                self.requests += 1
            try:
                resp = self._http.get(url, params=params, headers=headers)
            except httpx.TransportError as exc:
                errors += 1
                if errors > self.max_retries:
                    raise IngestionError(f"network error fetching {url}: {exc}") from exc
                self._sleep(min(2 ** errors, 30))
                continue
            wait = self._rate_limit_wait(resp)
            if wait is not None:
                waits += 1
                if waits > self.max_rate_limit_waits:
                    raise IngestionError(f"rate limit still exhausted after {waits - 1} waits: {resp.url}")
                wait += random.uniform(0.0, 0.25)
                log.warning("rate limit exhausted; waiting %.1fs before retrying %s", wait, resp.url)
                self.limiter.block_for(wait)
                continue
            if resp.status_code == 401:
                hint = "the token was rejected" if self.has_token else "no token was supplied"
                raise AuthenticationError(
                    f"authentication failed for {resp.url} ({hint}); set {TOKEN_ENV} to a valid personal access token"
                )
            if resp.status_code == 404:
                raise RepositoryNotFound(f"not found: {resp.url}")
            if resp.status_code >= 500:
                errors += 1
                if errors > self.max_retries:
                    raise IngestionError(f"server error {resp.status_code} for {resp.url}")
                self._sleep(min(2 ** errors, 30))
                continue
            if resp.status_code == 403:
                raise AuthenticationError(f"access forbidden for {resp.url}; check the token's scopes")
            remaining = resp.headers.get("X-RateLimit-Remaining")
            if remaining == "0" and resp.status_code == 200:
                reset = float(resp.headers.get("X-RateLimit-Reset", "0"))
                self.limiter.block_for(max(reset - self._wall(), 0.0))
            return resp


def _json_list(resp: httpx.Response) -> list:
    try:
        data = resp.json()
    except (json.JSONDecodeError, UnicodeDecodeError):
        raise MalformedPageError(str(resp.url), "response is not JSON") from None
    if not isinstance(data, list):
        raise MalformedPageError(str(resp.url), f"expected a JSON array, got {type(data).__name__}")
    return data


# ---------------------------------------------------------------------------
# wire -> record conversion

_ISSUE_URL = re.compile(r"/issues/(\d+)$")


def issue_from_api(item: dict) -> IssueRecord:
    return IssueRecord(
        number=int(item["number"]),
        title=item.get("title") or "",
        reporter=(item.get("user") or {}).get("login") or "",
        created_at=parse_timestamp(item["created_at"]),
        closed_at=parse_timestamp(item["closed_at"]),
        is_pull_request="pull_request" in item,
    )


def comment_from_api(item: dict) -> CommentRecord:
    m = _ISSUE_URL.search(item.get("issue_url", ""))
    if m is None:
        raise ValueError(f"comment {item.get('id')} has no issue_url")
    return CommentRecord(
        comment_id=str(item["id"]),
        issue_number=int(m.group(1)),
        author=(item.get("user") or {}).get("login") or "",
        created_at=parse_timestamp(item["created_at"]),
        body=item.get("body") or "",
    )


# ---------------------------------------------------------------------------
# cache


def repo_cache_dir(cache_root: str | Path, repo: str) -> Path:
    owner, sep, name = repo.partition("/")
    if not sep or not owner or not name or "/" in name:
        raise ValueError(f"repository must look like owner/name: {repo!r}")
    return Path(cache_root) / f"{owner}__{name}"


class _Cache:
    """Single-writer access to one repository's cache directory."""

    def __init__(self, root: Path):
        self.root = root
        root.mkdir(parents=True, exist_ok=True)
        self.state_path = root / "state.json"
        self.state = json.loads(self.state_path.read_text()) if self.state_path.exists() else {}

    def path(self, kind: str) -> Path:
        return self.root / f"{kind}.jsonl"

    def save_state(self) -> None:
        tmp = self.state_path.with_suffix(".tmp")
        tmp.write_text(json.dumps(self.state, indent=1, sort_keys=True))
        tmp.replace(self.state_path)

    def lines(self, kind: str) -> list[str]:
        p = self.path(kind)
        if not p.exists():
            return []
        return [ln for ln in p.read_text(encoding="utf-8").splitlines() if ln.strip()]

    def truncate(self, kind: str, keep: int) -> None:
        lines = self.lines(kind)[:keep]
        self.path(kind).write_text("".join(ln + "\n" for ln in lines), encoding="utf-8")

    def append(self, kind: str, records: Iterable[dict]) -> None:
        with open(self.path(kind), "a", encoding="utf-8") as fh:
            for rec in records:
                fh.write(dumps_record(rec) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def reset(self) -> None:
        for kind in KINDS:
            self.path(kind).unlink(missing_ok=True)
        self.state = {}
        self.save_state()

    def resume_point(self, kind: str, first_url: str) -> str | None:
        """URL of the first page not fully on disk, or None when complete.

        Trims the data file and page log back to the last page whose records
        are all present.
        """
        ks = self.state.setdefault(kind, {"pages": []})
        have = len(self.lines(kind))
        kept, total = [], 0
        for page in ks["pages"]:
            if total + page["count"] > have:
                break
            kept.append(page)
            total += page["count"]
        if total != have or len(kept) != len(ks["pages"]):
            log.info("%s: resuming after %d intact pages", kind, len(kept))
            self.truncate(kind, total)
            ks["pages"] = kept
            self.save_state()
        if not kept:
            return first_url
        return kept[-1]["next"]


def _paginate(
    client: GitHubClient,
    cache: _Cache,
    kind: str,
    first_url: str,
    convert: Callable[[list], tuple[list[dict], int]],
) -> None:
    url = cache.resume_point(kind, first_url)
    while url is not None:
        resp = client.get(url)
        items = _json_list(resp)
        try:
            records, skipped = convert(items)
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedPageError(url, f"unexpected record shape ({exc})") from None
        nxt = resp.links.get("next", {}).get("url")
        if nxt is not None:
            nxt = client.relative(nxt)
        cache.append(kind, records)
        page = {"url": url, "next": nxt, "count": len(records), "skipped": skipped}
        if kind == "issues" and url == first_url:
            cache.state["etag"] = resp.headers.get("ETag")
        cache.state[kind]["pages"].append(page)
        cache.save_state()
        url = nxt


def _skipped(cache: _Cache, kind: str) -> int:
    return sum(p.get("skipped", 0) for p in cache.state.get(kind, {}).get("pages", []))


def _complete(cache: _Cache, kind: str) -> bool:
    pages = cache.state.get(kind, {}).get("pages", [])
    if not pages or pages[-1]["next"] is not None:
        return False
    return len(cache.lines(kind)) == sum(p["count"] for p in pages)


def fetch_project(
    repo: str,
    auth_token: str | None = None,
    cache_dir: str | Path = "cache",
    *,
    base_url: str = DEFAULT_API,
    requests_per_second: float = 1.0,
    workers: int = 2,
    per_page: int = 100,
    client: GitHubClient | None = None,
) -> FetchSummary:
    """Fetch closed issues, their comments, commit authors, and user follower counts.

    Re-running is cheap: a complete cache costs one conditional request on
    the first issues page; anything missing is fetched from where it stopped.
    """
    cache = _Cache(repo_cache_dir(cache_dir, repo))
    own_client = client is None
    client = client or GitHubClient(auth_token, base_url, requests_per_second)
    base = f"/repos/{repo}"
    first = {
        "issues": f"{base}/issues?state=closed&per_page={per_page}&page=1",
        "comments": f"{base}/issues/comments?per_page={per_page}&page=1",
        "commits": f"{base}/commits?per_page={per_page}&page=1",
    }
    try:
        before = client.requests
        if all(_complete(cache, k) for k in ("issues", "comments", "commits")) and cache.state.get("users_complete"):
            etag = cache.state.get("etag")
            resp = client.get(first["issues"], headers={"If-None-Match": etag} if etag else None)
            if resp.status_code == 304:
                return _summary(repo, cache, client.requests - before, up_to_date=True)
            log.info("%s changed upstream; refetching", repo)
            cache.reset()

        def convert_issues(items: list) -> tuple[list[dict], int]:
            out, prs = [], 0
            for it in items:
                if "pull_request" in it:
                    prs += 1
                    continue
                if it.get("state", "closed") != "closed" or not it.get("closed_at"):
                    continue
                out.append(issue_from_api(it).to_record())
            return out, prs

        _paginate(client, cache, "issues", first["issues"], convert_issues)
        issue_numbers = {json.loads(ln)["number"] for ln in cache.lines("issues")}

        def convert_comments(items: list) -> tuple[list[dict], int]:
            out, other = [], 0
            for it in items:
                c = comment_from_api(it)
                if c.issue_number in issue_numbers:
                    out.append(c.to_record())
                else:
                    other += 1
            return out, other

        _paginate(client, cache, "comments", first["comments"], convert_comments)

        def convert_commits(items: list) -> tuple[list[dict], int]:
            out, anon = [], 0
            for it in items:
                login = (it.get("author") or {}).get("login")
                if not login:
                    anon += 1
                    continue
                date = ((it.get("commit") or {}).get("author") or {}).get("date")
                out.append({"sha": it["sha"], "author": login, "date": date})
            return out, anon

        _paginate(client, cache, "commits", first["commits"], convert_commits)
        _fetch_users(client, cache, workers)
        return _summary(repo, cache, client.requests - before)
    finally:
        if own_client:
            client.close()


def _fetch_users(client: GitHubClient, cache: _Cache, workers: int) -> None:
    logins: set[str] = set()
    for ln in cache.lines("issues"):
        logins.add(json.loads(ln)["reporter"])
    for ln in cache.lines("comments"):
        logins.add(json.loads(ln)["author"])
    for ln in cache.lines("commits"):
        logins.add(json.loads(ln)["author"])
    logins.discard("")
    done = {json.loads(ln)["login"] for ln in cache.lines("users")}
    todo = sorted(logins - done)

    def one(login: str) -> dict:
        try:
            resp = client.get(f"/users/{login}")
        except RepositoryNotFound:
            return {"login": login, "followers": 0, "missing": True}
        try:
            data = resp.json()
            return {"login": login, "followers": int(data.get("followers", 0))}
        except (ValueError, AttributeError):
            raise MalformedPageError(str(resp.url), "user profile is not a JSON object") from None

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        # map() yields in submission order, so the cache stays sorted by login
        for rec in pool.map(one, todo):
            cache.append("users", [rec])
    cache.state["users_complete"] = True
    cache.save_state()


def _summary(repo: str, cache: _Cache, requests: int, up_to_date: bool = False) -> FetchSummary:
    return FetchSummary(
        repo=repo,
        issues=len(cache.lines("issues")),
        comments=len(cache.lines("comments")),
        commits=len(cache.lines("commits")),
        users=len(cache.lines("users")),
        skipped_pull_requests=_skipped(cache, "issues"),
        unattributed_commits=_skipped(cache, "commits"),
        requests=requests,
        up_to_date=up_to_date,
    )


def load_cache(repo_dir: str | Path) -> tuple[list[IssueRecord], list[CommentRecord], dict[str, DeveloperStats]]:
    """Load one repository's cache and check comment -> issue references."""
    repo_dir = Path(repo_dir)
    issues: list[IssueRecord] = []
    comments: list[CommentRecord] = []
    if not repo_dir.exists():
        return issues, comments, {}

    def records(kind: str):
        p = repo_dir / f"{kind}.jsonl"
        if not p.exists():
            return
        for line_no, rec in read_jsonl(p):
            yield line_no, rec

    try:
        for line_no, rec in records("issues"):
            issue = IssueRecord.from_record(rec)
            if issue.is_pull_request:
                raise CacheIntegrityError(f"issues.jsonl:{line_no}: pull request #{issue.number} in issue cache")
            if issue.closed_at < issue.created_at:
                raise CacheIntegrityError(f"issues.jsonl:{line_no}: issue #{issue.number} closed before it was opened")
            issues.append(issue)
        for line_no, rec in records("comments"):
            comments.append(CommentRecord.from_record(rec))
        commit_counts: dict[str, int] = {}
        for line_no, rec in records("commits"):
            commit_counts[rec["author"]] = commit_counts.get(rec["author"], 0) + 1
        followers: dict[str, int] = {}
        for line_no, rec in records("users"):
            followers[rec["login"]] = int(rec["followers"])
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, CacheIntegrityError):
            raise
        raise CacheIntegrityError(f"schema violation in {repo_dir}: {exc}") from None

    by_number = {i.number: i for i in issues}
    dangling = [c.comment_id for c in comments if c.issue_number not in by_number]
    if dangling:
        raise CacheIntegrityError(f"comments reference missing issues: {', '.join(dangling[:10])}")
    for c in comments:
        if c.created_at < by_number[c.issue_number].created_at:
            log.warning("comment %s predates issue #%d", c.comment_id, c.issue_number)

    comment_counts: dict[str, int] = {}
    for c in comments:
        comment_counts[c.author] = comment_counts.get(c.author, 0) + 1
    logins = set(commit_counts) | set(followers) | set(comment_counts)
    devs = {
        login: DeveloperStats(login, commit_counts.get(login, 0), followers.get(login, 0), comment_counts.get(login, 0))
        for login in sorted(logins)
    }
    return issues, comments, devs
