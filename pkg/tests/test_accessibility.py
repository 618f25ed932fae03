import datetime as dt
import socket
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st
from httpfixture import FixtureServer, Route, redirect

from odlq.accessibility import (
    HISTOGRAM_CLASSES,
    HostGate,
    ProbeCache,
    ProbeConfig,
    ProbeResult,
    accessibility_ratio,
    is_probeable,
    probe_all,
    probe_url,
    status_histogram,
    url_accessibility_ratio,
)
from odlq.model import DistributionRecord

FAST = ProbeConfig(concurrency=8, per_host_limit=4, timeout=0.4)
TODAY = dt.date(2021, 6, 1)


def dist(url):
    return DistributionRecord(node=f"n:{url}", access_url=url)


def closed_port_url():
    s = socket.socket()
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]
    s.close()
    return f"http://127.0.0.1:{port}/x"


def twenty_url_routes():
    routes = {}
    plan = {}
    for i in range(20):
        kind = ["200", "301-200", "404", "500", "timeout", "head405", "302-404", "403", "200", "200"][i % 10]
        path = f"/f{i}"
        if kind == "200":
            routes[path] = Route(200)
        elif kind == "301-200":
            routes[path], routes[path + "/to"] = redirect(path + "/to"), Route(200)
        elif kind == "302-404":
            routes[path] = redirect(path + "/to", 302)
            routes[path + "/to"] = Route(404)
        elif kind == "timeout":
            routes[path] = Route(200, delay=1.5)
        elif kind == "head405":
            routes[path] = Route(200, allow_head=False)
        else:
            routes[path] = Route(int(kind))
        plan[path] = kind
    return routes, plan


def test_single_outcomes():
    routes = {"/ok": Route(200), "/moved": redirect("/ok"), "/missing": Route(404), "/boom": Route(503),
              "/slow": Route(200, delay=1.5), "/nohead": Route(200, allow_head=False),
              "/loop": redirect("/loop")}
    with FixtureServer(routes) as srv:
        r = {p: probe_url(srv.url + p, FAST) for p in routes}
        assert r["/ok"].ok and r["/ok"].redirects_followed == 0
        assert (r["/moved"].status, r["/moved"].redirects_followed) == (200, 1) and r["/moved"].ok
        assert r["/missing"].status_class == "4xx" and r["/boom"].status_class == "5xx"
        assert r["/slow"].outcome == "timeout" and r["/slow"].status_class == "no-response"
        assert r["/nohead"].ok
        assert ("GET", "/nohead") in srv.log and ("GET", "/ok") not in srv.log
        assert r["/loop"].status == 301 and r["/loop"].redirects_followed == FAST.redirect_limit
        assert r["/loop"].status_class == "3xx-final"
    assert probe_url(closed_port_url(), FAST).outcome == "connection_error"


@pytest.mark.parametrize("url", ["", "not a url", "ftp://x.example/f", "http://", "http://exa mple.org/"])
def test_invalid_urls_are_outcomes(url):
    assert not is_probeable(url)
    assert probe_url(url, FAST).outcome == "invalid_url"


def test_ratio_example():
    with FixtureServer({"/ok": Route(200), "/gone": Route(404), "/slow": Route(200, delay=1.5)}) as srv:
        dists = [dist(srv.url + "/ok"), dist(srv.url + "/gone"), dist(srv.url + "/slow"), dist(None)]
        results = probe_all([d.access_url for d in dists if d.access_url], FAST, today=TODAY)
    r = accessibility_ratio(results, dists)
    assert (r.numerator, r.denominator) == (1, 4) and r.value == Fraction(1, 4)


def test_twenty_url_fixture_exact():
    routes, plan = twenty_url_routes()
    with FixtureServer(routes) as srv:
        urls = [srv.url + p for p in plan]
        results = probe_all(urls, FAST, today=TODAY)
        sequential = probe_all(urls, ProbeConfig(concurrency=1, per_host_limit=1, timeout=0.4), today=TODAY)
    kinds = [plan[r.url[len(srv.url):]] for r in results]
    assert [r.ok for r in results] == [k in ("200", "301-200", "head405") for k in kinds]
    assert url_accessibility_ratio(results).value == Fraction(10, 20)
    assert status_histogram(results) == {"200": 10, "4xx": 6, "5xx": 2, "no-response": 2}
    assert [(r.url, r.outcome, r.status) for r in results] == [(r.url, r.outcome, r.status) for r in sequential]


def test_per_host_limit_is_respected():
    routes = {f"/s{i}": Route(200, delay=0.15) for i in range(16)}
    with FixtureServer(routes) as a, FixtureServer(routes) as b:
        gate = HostGate(2)
        urls = [srv.url + p for srv in (a, b) for p in routes]
        results = probe_all(urls, ProbeConfig(concurrency=8, per_host_limit=2, timeout=5), today=TODAY, gate=gate)
        assert all(r.ok for r in results)
        assert a.peak_inflight <= 2 and b.peak_inflight <= 2
        assert max(gate.peak.values()) <= 2
        # the pool is actually concurrent across hosts
        assert a.peak_inflight == 2


def test_cache_hit_makes_no_requests(tmp_path):
    with FixtureServer({"/a": Route(200), "/b": Route(404)}) as srv:
        urls = [srv.url + "/a", srv.url + "/b"]
        cache = ProbeCache(tmp_path / "cache.jsonl", ttl_days=7)
        first = probe_all(urls, FAST, cache=cache, today=TODAY)
        cache.save()
        n = len(srv.log)
        reloaded = ProbeCache(tmp_path / "cache.jsonl", ttl_days=7)
        second = probe_all(urls, FAST, cache=reloaded, today=TODAY + dt.timedelta(days=7))
        assert len(srv.log) == n
        assert [(r.url, r.status) for r in second] == [(r.url, r.status) for r in first]
        probe_all(urls, FAST, cache=reloaded, today=TODAY + dt.timedelta(days=8))
        assert len(srv.log) > n


def test_cache_file_is_sorted_and_stable(tmp_path):
    cache = ProbeCache(tmp_path / "c.jsonl")
    for u in ("http://b", "http://a"):
        cache.put(ProbeResult(u, "status", 200), TODAY)
    cache.save()
    text = (tmp_path / "c.jsonl").read_text()
    assert text.index("http://a") < text.index("http://b")
    cache.save()
    assert (tmp_path / "c.jsonl").read_text() == text


def test_probe_all_dedupes_and_sorts():
    with FixtureServer({"/a": Route(200)}) as srv:
        results = probe_all([srv.url + "/a", srv.url + "/a", "bogus"], FAST, today=TODAY)
        assert [r.url for r in results] == sorted({srv.url + "/a", "bogus"})
        assert len(srv.requests_for("/a")) == 1


def test_empty_histogram():
    assert status_histogram([]) == {}
    assert url_accessibility_ratio([]).value == 0


_results = st.lists(st.builds(
    ProbeResult,
    url=st.text(alphabet="abcdef", min_size=1, max_size=4),
    outcome=st.sampled_from(["status", "timeout", "connection_error", "invalid_url"]),
    status=st.integers(100, 599),
))


@given(_results)
def test_histogram_is_a_partition(results):
    hist = status_histogram(results)
    assert sum(hist.values()) == len({r.url for r in results})
    assert list(hist) == [c for c in HISTOGRAM_CLASSES if c in hist]


def test_probe_config_validation():
    with pytest.raises(ValueError):
        ProbeConfig(concurrency=2, per_host_limit=3)
    with pytest.raises(ValueError):
        ProbeConfig(timeout=0)
    with pytest.raises(ValueError):
        ProbeConfig(method="options")
