"""A small in-process stand-in for the GitHub REST endpoints used by ingestion.

Serves deterministic fixture data with Link-header pagination, ETags,
optional token checks and injectable failures (rate-limit 403s, malformed
pages). Every request is logged with its arrival time so tests can check the
client's pacing.
"""

from __future__ import annotations

import hashlib
import json
import random
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlsplit

from ._util import format_timestamp


@dataclass
class MockRepo:
    owner: str
    name: str
    issues: list[dict]
    comments: list[dict]
    commits: list[dict]
    users: dict[str, dict]

    @property
    def full_name(self) -> str:
        return f"{self.owner}/{self.name}"

    # counts a correct client should end up with
    @property
    def closed_issue_count(self) -> int:
        return sum(1 for i in self.issues if "pull_request" not in i and i["state"] == "closed")

    @property
    def issue_comment_count(self) -> int:
        closed = {i["number"] for i in self.issues if "pull_request" not in i and i["state"] == "closed"}
        return sum(1 for c in self.comments if int(c["issue_url"].rsplit("/", 1)[1]) in closed)

    @property
    def attributed_commit_count(self) -> int:
        return sum(1 for c in self.commits if c["author"] is not None)


def build_fixture(
    owner: str = "acme",
    name: str = "widget",
    n_issues: int = 300,
    n_commits: int = 250,
    n_users: int = 12,
    seed: int = 7,
) -> MockRepo:
    """Closed issues plus one planted pull request, with comments and commits.

    Issue ``k`` (1-based) carries ``k % 4`` comments; every 25th commit has
    no linked account.
    """
    rng = random.Random(seed)
    logins = [f"dev{i:02d}" for i in range(n_users)]
    t0 = datetime(2021, 1, 1, tzinfo=timezone.utc)
    issues, comments = [], []
    cid = 1000
    base = f"https://api.github.test/repos/{owner}/{name}"
    numbers = list(range(1, n_issues + 2))
    pr_number = numbers[n_issues // 2]
    for number in numbers:
        created = t0 + timedelta(hours=7 * number)
        closed = created + timedelta(hours=rng.randint(2, 400))
        item = {
            "number": number,
            "title": f"Issue {number}",
            "state": "closed",
            "user": {"login": rng.choice(logins)},
            "created_at": format_timestamp(created),
            "closed_at": format_timestamp(closed),
        }
        n_comments = number % 4
        if number == pr_number:
            item["title"] = f"Pull request {number}"
            item["pull_request"] = {"url": f"{base}/pulls/{number}"}
            n_comments = 2
        issues.append(item)
        for j in range(n_comments):
            cid += 1
            comments.append(
                {
                    "id": cid,
                    "issue_url": f"{base}/issues/{number}",
                    "user": {"login": rng.choice(logins)},
                    "created_at": format_timestamp(created + timedelta(minutes=30 * (j + 1))),
                    "body": f"Comment {j + 1} on issue {number}. Could you share the log?",
                }
            )
    # newest first, like the real endpoint's default ordering
    issues.reverse()
    commits = []
    for k in range(n_commits):
        author = None if k % 25 == 0 else {"login": logins[k % len(logins)]}
        commits.append(
            {
                "sha": hashlib.sha1(f"{seed}-{k}".encode()).hexdigest(),
                "author": author,
                "commit": {"author": {"date": format_timestamp(t0 + timedelta(hours=k))}},
            }
        )
    users = {login: {"login": login, "followers": (i * 37) % 101} for i, login in enumerate(logins)}
    return MockRepo(owner, name, issues, comments, commits, users)


@dataclass
class RequestLogEntry:
    time: float
    path: str
    query: dict[str, str]
    status: int


@dataclass
class Faults:
    # (kind, page) pairs answered once with a rate-limit 403
    rate_limited: set[tuple[str, int]] = field(default_factory=set)
    rate_limit_reset_after: float = 1.0
    # (kind, page) pairs answered with a body that is not JSON, until cleared
    malformed: set[tuple[str, int]] = field(default_factory=set)


class MockGitHubServer:
    """Run with ``with MockGitHubServer(repo) as srv: ... srv.url ...``."""

    def __init__(self, repo: MockRepo, token: str | None = None, faults: Faults | None = None):
        self.repo = repo
        self.token = token
        self.faults = faults or Faults()
        self.log: list[RequestLogEntry] = []
        self._lock = threading.Lock()
        self._httpd: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        assert self._httpd is not None, "server not started"
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "MockGitHubServer":
        server = self

        class Handler(BaseHTTPRequestHandler):
            def do_GET(self):  # noqa: N802
                server._handle(self)

            def log_message(self, *args):
                pass

        self._httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._httpd.daemon_threads = True
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        if self._httpd is not None:
            self._httpd.shutdown()
            self._httpd.server_close()
            self._httpd = None

    def __enter__(self) -> "MockGitHubServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    def requests_for(self, kind: str) -> list[RequestLogEntry]:
        return [e for e in self.log if self._kind(e.path)[0] == kind]

    # -- request handling ---------------------------------------------------

    def _kind(self, path: str) -> tuple[str | None, str | None]:
        prefix = f"/repos/{self.repo.full_name}"
        if path == f"{prefix}/issues":
            return "issues", None
        if path == f"{prefix}/issues/comments":
            return "comments", None
        if path == f"{prefix}/commits":
            return "commits", None
        if path.startswith("/users/"):
            return "users", path[len("/users/") :]
        return None, None

    def _items(self, kind: str, query: dict[str, str]) -> list[dict]:
        if kind == "issues":
            state = query.get("state", "open")
            return [i for i in self.repo.issues if state == "all" or i["state"] == state]
        if kind == "comments":
            return self.repo.comments
        return self.repo.commits

    def _handle(self, h: BaseHTTPRequestHandler) -> None:
        arrived = time.monotonic()
        parts = urlsplit(h.path)
        query = {k: v[-1] for k, v in parse_qs(parts.query).items()}
        status, headers, body = self._respond(h, parts.path, query)
        with self._lock:
            self.log.append(RequestLogEntry(arrived, parts.path, query, status))
        h.send_response(status)
        for k, v in headers.items():
            h.send_header(k, v)
        h.send_header("Content-Length", str(len(body)))
        h.end_headers()
        h.wfile.write(body)

    def _respond(self, h, path: str, query: dict[str, str]) -> tuple[int, dict[str, str], bytes]:
        js = {"Content-Type": "application/json"}
        if self.token is not None:
            auth = h.headers.get("Authorization", "")
            if auth not in (f"Bearer {self.token}", f"token {self.token}"):
                return 401, js, b'{"message": "Bad credentials"}'
        kind, login = self._kind(path)
        if kind is None:
            return 404, js, b'{"message": "Not Found"}'
        if kind == "users":
            user = self.repo.users.get(login or "")
            if user is None:
                return 404, js, b'{"message": "Not Found"}'
            return 200, js, json.dumps(user).encode()

        page = int(query.get("page", "1"))
        per_page = min(int(query.get("per_page", "30")), 100)
        with self._lock:
            if (kind, page) in self.faults.rate_limited:
                self.faults.rate_limited.discard((kind, page))
                reset = time.time() + self.faults.rate_limit_reset_after
                return 403, js | {"X-RateLimit-Remaining": "0", "X-RateLimit-Reset": f"{reset:.3f}"}, b'{"message": "API rate limit exceeded"}'
            if (kind, page) in self.faults.malformed:
                return 200, js, b"<html>upstream hiccup</html>"

        items = self._items(kind, query)
        chunk = items[(page - 1) * per_page : page * per_page]
        body = json.dumps(chunk, sort_keys=True).encode()
        etag = '"' + hashlib.sha1(body).hexdigest() + '"'
        headers = js | {"ETag": etag, "X-RateLimit-Remaining": "4999"}
        last = max(1, -(-len(items) // per_page))
        host = h.headers.get("Host", "127.0.0.1")

        def link(p: int) -> str:
            q = dict(query, page=str(p), per_page=str(per_page))
            qs = "&".join(f"{k}={v}" for k, v in sorted(q.items()))
            return f"<http://{host}{path}?{qs}>"

        links = []
        if page < last:
            links.append(f'{link(page + 1)}; rel="next"')
            links.append(f'{link(last)}; rel="last"')
        if page > 1:
            links.append(f'{link(1)}; rel="first"')
        if links:
            headers["Link"] = ", ".join(links)
        if h.headers.get("If-None-Match") == etag:
            return 304, {"ETag": etag}, b""
        return 200, headers, body
