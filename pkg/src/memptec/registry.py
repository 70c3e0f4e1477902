"""Registry and repository-host ingestion with an on-disk cache.

Raw registry responses are persisted before parsing, one file per package
(``<url-quoted name>.json``) plus a sidecar ``.meta.json`` holding the ETag,
source URL and fetch time. ``offline_only`` never touches the network.
"""

from __future__ import annotations

import json
import os
import re
import threading
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Callable, Iterable, Optional
from urllib.parse import quote

import httpx

from .errors import BadLabel, MalformedDocument, MissingName, NetworkUnavailable, NotFound, UnsupportedHost
from .pmi import (
    ROLES,
    InteractionCounts,
    LabeledPMI,
    PackageMetadata,
    StakeholderRecord,
    format_timestamp,
    parse_document,
    parse_pmi,
    person_id,
)

REGISTRY_URL = "https://registry.npmjs.org"
GITHUB_API_URL = "https://api.github.com"
TOKEN_ENV = "MEMPTEC_GITHUB_TOKEN"
CACHE_DIR_ENV = "MEMPTEC_CACHE_DIR"

OFFLINE_ONLY = "offline_only"
CACHE_FIRST = "cache_first"
REFRESH = "refresh"


class IngestWarning(UserWarning):
    pass


@dataclass(frozen=True)
class CachePolicy:
    mode: str = CACHE_FIRST
    cache_dir: Path = field(default_factory=lambda: Path(os.environ.get(CACHE_DIR_ENV, ".memptec-cache")))
    max_age: timedelta = timedelta(days=7)

    def __post_init__(self):
        if self.mode not in (OFFLINE_ONLY, CACHE_FIRST, REFRESH):
            raise ValueError(f"unknown cache mode {self.mode!r}")
        object.__setattr__(self, "cache_dir", Path(self.cache_dir))


@dataclass(frozen=True)
class FetchBudget:
    max_concurrent: int = 4
    requests_per_second: float = 2.0
    retries: int = 3
    backoff: float = 0.5

    def __post_init__(self):
        if self.max_concurrent < 1 or self.requests_per_second <= 0 or self.retries < 0:
            raise ValueError("invalid fetch budget")


class RateLimiter:
    """Spaces request start times at least 1/rps apart (thread-safe)."""

    def __init__(self, rps: float, clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep):
        self.interval = 1.0 / rps
        self._clock = clock
        self._sleep = sleep
        self._next = None
        self._lock = threading.Lock()

    def acquire(self):
        with self._lock:
            now = self._clock()
            slot = now if self._next is None else max(now, self._next)
            self._next = slot + self.interval
        if slot > now:
            self._sleep(slot - now)


def cache_key(name: str) -> str:
    return quote(name, safe="")


def _atomic_write(path: Path, data: bytes):
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.{os.getpid()}.{threading.get_ident()}.tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


class RegistryClient:
    """HTTP client bound to a cache policy and a fetch budget.

    ``transport`` may be an ``httpx.MockTransport`` for offline tests.
    """

    def __init__(self, policy: CachePolicy = CachePolicy(), budget: FetchBudget = FetchBudget(),
                 *, transport: Optional[httpx.BaseTransport] = None, token: Optional[str] = None,
                 registry_url: str = REGISTRY_URL, api_url: str = GITHUB_API_URL,
                 clock: Callable[[], float] = time.monotonic, sleep: Callable[[float], None] = time.sleep,
                 now: Callable[[], datetime] = lambda: datetime.now(timezone.utc)):
        self.policy = policy
        self.budget = budget
        self.registry_url = registry_url.rstrip("/")
        self.api_url = api_url.rstrip("/")
        self.token = token if token is not None else os.environ.get(TOKEN_ENV)
        self._transport = transport
        self._client = None
        self._limiter = RateLimiter(budget.requests_per_second, clock, sleep)
        self._slots = threading.BoundedSemaphore(budget.max_concurrent)
        self._sleep = sleep
        self._now = now
        self.network_calls = 0
        self._count_lock = threading.Lock()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self):
        if self._client is not None:
            self._client.close()
            self._client = None

    @property
    def client(self) -> httpx.Client:
        if self.policy.mode == OFFLINE_ONLY:
            raise NetworkUnavailable("offline_only policy forbids network access")
        if self._client is None:
            self._client = httpx.Client(transport=self._transport, timeout=30.0, follow_redirects=True)
        return self._client

    def _get(self, url: str, headers: dict) -> httpx.Response:
        client = self.client
        last_exc = None
        for attempt in range(self.budget.retries + 1):
            if attempt:
                self._sleep(self.budget.backoff * 2 ** (attempt - 1))
            self._limiter.acquire()
            with self._slots:
                with self._count_lock:
                    self.network_calls += 1
                try:
                    resp = client.get(url, headers=headers)
                except httpx.TransportError as exc:
                    last_exc = exc
                    continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last_exc = httpx.HTTPStatusError(f"HTTP {resp.status_code}", request=resp.request, response=resp)
                continue
            return resp
        raise NetworkUnavailable(f"GET {url} failed after {self.budget.retries + 1} attempts: {last_exc}")

    # -- registry documents -------------------------------------------------

    def _paths(self, name: str):
        base = self.policy.cache_dir / cache_key(name)
        return base.with_name(base.name + ".json"), base.with_name(base.name + ".meta.json")

    def _read_meta(self, meta_path: Path) -> dict:
        try:
            return json.loads(meta_path.read_text(encoding="utf-8"))
        except (OSError, ValueError):
            return {}

    def _fresh(self, meta: dict) -> bool:
        try:
            fetched = datetime.fromisoformat(meta["fetch_time"].replace("Z", "+00:00"))
        except (KeyError, ValueError, AttributeError):
            return False
        return self._now() - fetched <= self.policy.max_age

    def fetch_raw(self, name: str) -> bytes:
        if not name or not name.strip():
            raise MissingName("package name must be non-empty")
        doc_path, meta_path = self._paths(name)
        cached = doc_path.exists()
        meta = self._read_meta(meta_path) if cached else {}
        mode = self.policy.mode
        if mode == OFFLINE_ONLY:
            if not cached:
                raise NetworkUnavailable(f"{name}: not in cache and policy is offline_only")
            return doc_path.read_bytes()
        if mode == CACHE_FIRST and cached and self._fresh(meta):
            return doc_path.read_bytes()

        url = f"{self.registry_url}/{quote(name, safe='@')}"
        headers = {"Accept": "application/json"}
        if cached and meta.get("etag"):
            headers["If-None-Match"] = meta["etag"]
        resp = self._get(url, headers)
        if resp.status_code == 304 and cached:
            meta["fetch_time"] = format_timestamp(self._now())
            _atomic_write(meta_path, json.dumps(meta, sort_keys=True).encode())
            return doc_path.read_bytes()
        if resp.status_code == 404:
            raise NotFound(f"{name}: not found in registry")
        if resp.status_code != 200:
            raise NetworkUnavailable(f"{name}: unexpected HTTP {resp.status_code}")
        body = resp.content
        _atomic_write(doc_path, body)
        new_meta = {"url": url, "fetch_time": format_timestamp(self._now())}
        if resp.headers.get("etag"):
            new_meta["etag"] = resp.headers["etag"]
        _atomic_write(meta_path, json.dumps(new_meta, sort_keys=True).encode())
        return body

    def fetch_package(self, name: str) -> PackageMetadata:
        return parse_pmi(self.fetch_raw(name))

    def fetch_many(self, names: Iterable[str]) -> list:
        """Fetch several packages concurrently; result order follows ``names``."""
        names = list(names)
        with ThreadPoolExecutor(max_workers=self.budget.max_concurrent) as pool:
            return list(pool.map(self.fetch_package, names))

    # -- repository interactions --------------------------------------------

    def fetch_repo_interactions(self, repo_url: str) -> InteractionCounts:
        owner, repo = parse_repo_url(repo_url)
        cache_path = self.policy.cache_dir / "repos" / f"{cache_key(owner)}__{cache_key(repo)}.json"
        if self.policy.mode == OFFLINE_ONLY:
            if not cache_path.exists():
                raise NetworkUnavailable(f"{owner}/{repo}: not in cache and policy is offline_only")
            return interactions_from_api(json.loads(cache_path.read_text(encoding="utf-8")))
        if self.policy.mode == CACHE_FIRST and cache_path.exists():
            return interactions_from_api(json.loads(cache_path.read_text(encoding="utf-8")))

        headers = {"Accept": "application/vnd.github+json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        resp = self._get(f"{self.api_url}/repos/{owner}/{repo}", headers)
        if resp.status_code == 404:
            raise NotFound(f"{owner}/{repo}: repository not found")
        if resp.status_code != 200:
            raise NetworkUnavailable(f"{owner}/{repo}: unexpected HTTP {resp.status_code}")
        try:
            payload = resp.json()
        except ValueError as exc:
            raise MalformedDocument(f"{owner}/{repo}: unparseable API response") from exc
        if "open_pull_requests" not in payload:
            prs = self._open_pull_requests(owner, repo, headers)
            if prs is not None:
                payload["open_pull_requests"] = prs
        _atomic_write(cache_path, json.dumps(payload, sort_keys=True).encode())
        return interactions_from_api(payload)

    def _open_pull_requests(self, owner, repo, headers) -> Optional[int]:
        try:
            resp = self._get(f"{self.api_url}/repos/{owner}/{repo}/pulls?state=open&per_page=1", headers)
        except NetworkUnavailable:
            return None
        if resp.status_code != 200:
            return None
        m = re.search(r'[?&]page=(\d+)>;\s*rel="last"', resp.headers.get("link", ""))
        if m:
            return int(m.group(1))
        try:
            return len(resp.json())
        except ValueError:
            return None

    def ingest(self, name: str) -> PackageMetadata:
        """Registry document plus repository counts when a GitHub link is present."""
        pmi = self.fetch_package(name)
        if pmi.github_link:
            try:
                pmi = pmi.with_interactions(self.fetch_repo_interactions(pmi.github_link))
            except UnsupportedHost:
                warnings.warn(f"{name}: repository host unsupported, interactions left at 0", IngestWarning)
            except NotFound:
                warnings.warn(f"{name}: repository not found, interactions left at 0", IngestWarning)
        return pmi


_REPO_PATTERNS = [
    re.compile(r"^(?:git\+)?(?:https?|git|ssh)://(?:[^@/]+@)?github\.com[/:]([^/]+)/([^/#?]+)"),
    re.compile(r"^git@github\.com:([^/]+)/([^/#?]+)"),
    re.compile(r"^github:([^/]+)/([^/#?]+)"),
    re.compile(r"^([A-Za-z0-9_.-]+)/([A-Za-z0-9_.-]+)$"),
]


def parse_repo_url(url: str):
    """Return ``(owner, repo)`` for a GitHub repository URL."""
    url = (url or "").strip()
    for pat in _REPO_PATTERNS:
        m = pat.match(url)
        if m:
            owner, repo = m.group(1), m.group(2)
            if repo.endswith(".git"):
                repo = repo[:-4]
            return owner, repo
    raise UnsupportedHost(f"unsupported repository URL: {url!r}")


_API_FIELDS = {
    "star": "stargazers_count",
    "fork_number": "forks_count",
    "subscriber_count": "subscribers_count",
    "issues": "open_issues_count",
    "pull_request": "open_pull_requests",
}


def interactions_from_api(payload: dict) -> InteractionCounts:
    """Map a repository API payload to counts; missing fields become 0 with a warning."""
    counts = {}
    for ours, theirs in _API_FIELDS.items():
        value = payload.get(theirs)
        if isinstance(value, int) and value >= 0:
            counts[ours] = value
        else:
            warnings.warn(f"repository response lacks {theirs!r}; {ours} set to 0", IngestWarning)
            counts[ours] = 0
    return InteractionCounts(**counts)


def build_stakeholder_history(corpus: Iterable) -> dict:
    """Aggregate stakeholders across a corpus.

    CPN counts distinct packages listing the person in any role; first_seen is
    the earliest ``created_time`` among those packages; role is the first role
    the person was seen in (author, maintainer, contributor, publisher order).
    """
    corpus = [c.metadata if isinstance(c, LabeledPMI) else c for c in corpus]
    if not corpus:
        raise ValueError("corpus is empty")
    packages: dict = {}
    first_seen: dict = {}
    first_role: dict = {}
    for pmi in corpus:
        for role in ROLES:
            for person in pmi.people(role):
                pid = person_id(person)
                if pid == "|":
                    continue
                packages.setdefault(pid, set()).add(pmi.package_name)
                first_role.setdefault(pid, role)
                if pmi.created_time is not None:
                    prev = first_seen.get(pid)
                    if prev is None or pmi.created_time < prev:
                        first_seen[pid] = pmi.created_time
    epoch = datetime(1970, 1, 1, tzinfo=timezone.utc)
    return {
        pid: StakeholderRecord(first_role[pid], first_seen.get(pid, epoch), len(pkgs))
        for pid, pkgs in packages.items()
    }


def attach_history(corpus: list, history: Optional[dict] = None) -> list:
    """Return the corpus with each record carrying the stakeholders it lists."""
    history = history if history is not None else build_stakeholder_history(corpus)
    out = []
    for item in corpus:
        pmi = item.metadata if isinstance(item, LabeledPMI) else item
        own = {}
        for role in ROLES:
            for person in pmi.people(role):
                pid = person_id(person)
                if pid in history:
                    own[pid] = history[pid]
        pmi = pmi.with_history(own)
        out.append(LabeledPMI(pmi, item.label) if isinstance(item, LabeledPMI) else pmi)
    return out


def load_fixture_corpus(path) -> list:
    """Read a JSON Lines corpus of ``{"package": <document>, "label": 0|1}``.

    A line holding only a ``__meta__`` object (provenance header) is skipped.
    """
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except ValueError as exc:
                raise MalformedDocument(f"invalid JSON: {exc}", line=lineno) from exc
            if isinstance(rec, dict) and set(rec) == {"__meta__"}:
                continue
            if not isinstance(rec, dict) or "package" not in rec:
                raise MalformedDocument("expected an object with a 'package' key", line=lineno)
            label = rec.get("label")
            if isinstance(label, bool) or label not in (0, 1):
                raise BadLabel(f"label must be 0 or 1, got {label!r}", line=lineno)
            try:
                pmi = parse_document(rec["package"])
            except MalformedDocument as exc:
                raise MalformedDocument(str(exc), line=lineno) from exc
            out.append(LabeledPMI(pmi, int(label)))
    return out


def write_corpus(path, corpus: Iterable[LabeledPMI], meta: Optional[dict] = None):
    from .pmi import to_document

    lines = [json.dumps({"__meta__": meta}, sort_keys=True)] if meta else []
    lines += [json.dumps({"package": to_document(c.metadata), "label": c.label}, sort_keys=True,
                        ensure_ascii=False) for c in corpus]
    _atomic_write(Path(path), ("\n".join(lines) + ("\n" if lines else "")).encode("utf-8"))
