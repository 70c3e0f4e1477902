import json
import threading
import time
from datetime import datetime, timedelta, timezone

import httpx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memptec.errors import BadLabel, MalformedDocument, NetworkUnavailable, NotFound, UnsupportedHost
from memptec.fixtures import axios_document, axios_repo_response
from memptec.pmi import PackageMetadata, Person, to_document
from memptec.registry import (
    CACHE_FIRST,
    OFFLINE_ONLY,
    REFRESH,
    CachePolicy,
    FetchBudget,
    IngestWarning,
    RateLimiter,
    RegistryClient,
    build_stakeholder_history,
    interactions_from_api,
    load_fixture_corpus,
    parse_repo_url,
    write_corpus,
)


def _registry_handler(calls):
    def handler(request: httpx.Request):
        calls.append(request)
        path = request.url.path
        if path == "/axios":
            return httpx.Response(200, json=axios_document(), headers={"etag": '"v1"'})
        if path == "/repos/axios/axios":
            return httpx.Response(200, json=axios_repo_response())
        if path == "/repos/axios/axios/pulls":
            return httpx.Response(200, json=[{}], headers={"link": '<https://x/pulls?state=open&page=77>; rel="last"'})
        return httpx.Response(404, json={"error": "Not found"})
    return handler


def _client(tmp_path, mode=CACHE_FIRST, calls=None, **kw):
    calls = [] if calls is None else calls
    return RegistryClient(CachePolicy(mode, tmp_path), FetchBudget(requests_per_second=1000),
                          transport=httpx.MockTransport(_registry_handler(calls)), token="", **kw), calls


def test_refresh_fetches_latest_tag(tmp_path):
    client, calls = _client(tmp_path, REFRESH)
    pmi = client.fetch_package("axios")
    assert pmi.distribution_tags["latest"] == "1.3.2"
    assert len(calls) == 1
    assert (tmp_path / "axios.json").exists()
    meta = json.loads((tmp_path / "axios.meta.json").read_text())
    assert meta["etag"] == '"v1"'


def test_warm_cache_hit_makes_no_network_call(tmp_path):
    client, calls = _client(tmp_path, REFRESH)
    client.fetch_package("axios")
    warm, warm_calls = _client(tmp_path, CACHE_FIRST)
    assert warm.fetch_package("axios").package_name == "axios"
    assert warm_calls == []
    assert warm.network_calls == 0


def test_cache_first_idempotent(tmp_path):
    client, _ = _client(tmp_path)
    client.fetch_raw("axios")
    first = (tmp_path / "axios.json").read_bytes()
    client.fetch_raw("axios")
    assert (tmp_path / "axios.json").read_bytes() == first


def test_stale_cache_revalidates_with_etag(tmp_path):
    client, _ = _client(tmp_path, REFRESH)
    client.fetch_raw("axios")
    seen = []

    def handler(request):
        seen.append(request.headers.get("if-none-match"))
        return httpx.Response(304)

    later = lambda: datetime.now(timezone.utc) + timedelta(days=30)  # noqa: E731
    stale = RegistryClient(CachePolicy(CACHE_FIRST, tmp_path), FetchBudget(requests_per_second=1000),
                           transport=httpx.MockTransport(handler), now=later)
    assert stale.fetch_package("axios").package_name == "axios"
    assert seen == ['"v1"']


def test_unknown_package_not_found(tmp_path):
    client, _ = _client(tmp_path, REFRESH)
    with pytest.raises(NotFound):
        client.fetch_package("definitely-not-a-real-pkg-xyz")


def test_offline_miss_never_touches_network(tmp_path):
    client, calls = _client(tmp_path, OFFLINE_ONLY)
    with pytest.raises(NetworkUnavailable):
        client.fetch_package("axios")
    with pytest.raises(NetworkUnavailable):
        client.fetch_repo_interactions("https://github.com/axios/axios")
    assert calls == []


def test_transport_failure_retries_then_gives_up(tmp_path):
    attempts = []

    def handler(request):
        attempts.append(1)
        raise httpx.ConnectError("down")

    sleeps = []
    client = RegistryClient(CachePolicy(REFRESH, tmp_path), FetchBudget(retries=2, requests_per_second=1000),
                            transport=httpx.MockTransport(handler), sleep=sleeps.append)
    with pytest.raises(NetworkUnavailable):
        client.fetch_raw("axios")
    assert len(attempts) == 3
    assert [s for s in sleeps if s >= 0.5] == [0.5, 1.0]


def test_malformed_registry_body(tmp_path):
    client = RegistryClient(CachePolicy(REFRESH, tmp_path), FetchBudget(requests_per_second=1000),
                            transport=httpx.MockTransport(lambda r: httpx.Response(200, content=b"<html>")))
    with pytest.raises(MalformedDocument):
        client.fetch_package("axios")
    # the raw body was persisted before parsing
    assert (tmp_path / "axios.json").read_bytes() == b"<html>"


def test_repo_interactions_from_fixture(tmp_path):
    client, _ = _client(tmp_path, REFRESH)
    counts = client.fetch_repo_interactions("git+https://github.com/axios/axios.git")
    assert counts.star == 10300
    assert counts.fork_number == 10900
    assert counts.subscriber_count == 1200
    assert counts.issues == 488
    assert counts.pull_request == 77


def test_missing_subscriber_field_defaults_to_zero():
    payload = dict(axios_repo_response())
    del payload["subscribers_count"]
    payload["open_pull_requests"] = 3
    with pytest.warns(IngestWarning, match="subscribers_count"):
        counts = interactions_from_api(payload)
    assert counts.subscriber_count == 0
    assert counts.star == 10300


def test_ingest_attaches_interactions(tmp_path):
    client, _ = _client(tmp_path, REFRESH)
    pmi = client.ingest("axios")
    assert pmi.interactions.star == 10300


@pytest.mark.parametrize("url,expected", [
    ("https://github.com/axios/axios", ("axios", "axios")),
    ("git+https://github.com/axios/axios.git", ("axios", "axios")),
    ("git@github.com:owner/repo.git", ("owner", "repo")),
    ("github:owner/repo", ("owner", "repo")),
])
def test_parse_repo_url(url, expected):
    assert parse_repo_url(url) == expected


def test_unsupported_host():
    with pytest.raises(UnsupportedHost):
        parse_repo_url("https://gitlab.com/a/b")


def test_rate_limiter_spacing_with_fake_clock():
    now = [0.0]
    starts = []

    def sleep(dt):
        now[0] += dt

    limiter = RateLimiter(2.0, clock=lambda: now[0], sleep=sleep)
    for _ in range(25):
        limiter.acquire()
        starts.append(now[0])
    # any 5-second window holds at most rps * 5 * 1.25 starts
    for t0 in starts:
        assert sum(1 for t in starts if t0 <= t < t0 + 5.0) <= 2.0 * 5 * 1.25


def test_in_flight_requests_bounded(tmp_path):
    live = [0]
    peak = [0]
    lock = threading.Lock()

    def handler(request):
        with lock:
            live[0] += 1
            peak[0] = max(peak[0], live[0])
        time.sleep(0.02)
        with lock:
            live[0] -= 1
        doc = dict(axios_document())
        doc["name"] = request.url.path.strip("/")
        return httpx.Response(200, json=doc)

    client = RegistryClient(CachePolicy(REFRESH, tmp_path), FetchBudget(max_concurrent=2, requests_per_second=1e6),
                            transport=httpx.MockTransport(handler))
    names = [f"pkg{i}" for i in range(10)]
    out = client.fetch_many(names)
    assert [p.package_name for p in out] == names
    assert peak[0] <= 2


def _pkg(name, created_year, people):
    return PackageMetadata(package_name=name, created_time=datetime(created_year, 1, 1, tzinfo=timezone.utc),
                           authors=people)


def test_history_three_packages():
    alice = Person("Alice", "a@x.org")
    corpus = [_pkg("p1", 2021, [alice]), _pkg("p2", 2020, [alice]), _pkg("p3", 2022, [alice])]
    rec = build_stakeholder_history(corpus)["alice|a@x.org"]
    assert rec.contributed_package_count == 3
    assert rec.first_seen == datetime(2020, 1, 1, tzinfo=timezone.utc)


def test_history_single_package_and_case_folding():
    assert build_stakeholder_history([_pkg("p", 2020, [Person("Bob", None)])])["bob|"].contributed_package_count == 1
    corpus = [_pkg("a", 2020, [Person("BOB", "B@X.ORG")]), _pkg("b", 2021, [Person("bob", "b@x.org")])]
    hist = build_stakeholder_history(corpus)
    assert list(hist) == ["bob|b@x.org"]
    assert hist["bob|b@x.org"].contributed_package_count == 2


def test_history_empty_corpus():
    with pytest.raises(ValueError):
        build_stakeholder_history([])


_people_pool = [Person(f"p{i}", f"p{i}@x.org") for i in range(5)]


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(2000, 2022), st.lists(st.sampled_from(_people_pool), max_size=3),
                          st.lists(st.sampled_from(_people_pool), max_size=2)), min_size=1, max_size=20))
def test_history_matches_brute_force(rows):
    corpus = [PackageMetadata(package_name=f"pkg{i}", created_time=datetime(y, 1, 1, tzinfo=timezone.utc),
                              authors=a, maintainers=m) for i, (y, a, m) in enumerate(rows)]
    hist = build_stakeholder_history(corpus)
    for person in _people_pool:
        pid = f"{person.name}|{person.email}"
        listing = [p for p in corpus if person in p.authors or person in p.maintainers]
        if not listing:
            assert pid not in hist
            continue
        assert hist[pid].contributed_package_count == len(listing)
        assert hist[pid].first_seen == min(p.created_time for p in listing)


def _write_lines(path, lines):
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def test_load_corpus_counts_and_order(tmp_path):
    lines = [json.dumps({"package": {"name": f"p{i}"}, "label": i % 2}) for i in range(10)]
    _write_lines(tmp_path / "c.jsonl", lines)
    corpus = load_fixture_corpus(tmp_path / "c.jsonl")
    assert len(corpus) == 10
    assert [c.metadata.package_name for c in corpus] == [f"p{i}" for i in range(10)]
    assert sum(c.label for c in corpus) == 5


def test_load_corpus_bad_label_line(tmp_path):
    lines = [json.dumps({"package": {"name": "a"}, "label": 0}), json.dumps({"package": {"name": "b"}, "label": 2})]
    _write_lines(tmp_path / "c.jsonl", lines)
    with pytest.raises(BadLabel) as err:
        load_fixture_corpus(tmp_path / "c.jsonl")
    assert err.value.line == 2


def test_load_corpus_malformed_line(tmp_path):
    _write_lines(tmp_path / "c.jsonl", [json.dumps({"package": {"name": "a"}, "label": 0}), "{oops"])
    with pytest.raises(MalformedDocument, match="line 2"):
        load_fixture_corpus(tmp_path / "c.jsonl")


def test_load_corpus_empty_file(tmp_path):
    _write_lines(tmp_path / "c.jsonl", [])
    assert load_fixture_corpus(tmp_path / "c.jsonl") == []


def test_corpus_write_read_round_trip(tmp_path, small_synth):
    _, corpus = small_synth
    write_corpus(tmp_path / "c.jsonl", corpus[:5], {"seed": 1})
    back = load_fixture_corpus(tmp_path / "c.jsonl")
    assert [to_document(c.metadata) for c in back] == [to_document(c.metadata) for c in corpus[:5]]
    assert [c.label for c in back] == [c.label for c in corpus[:5]]
