"""Access-URL probing and the accessibility ratio.

URLs are probed with a thread pool bounded globally and per host.
Redirects are followed by hand so the number of hops is known. A URL
"works" only if its final response is HTTP 200.
"""

from __future__ import annotations

import datetime as dt
import json
import threading
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import asdict, dataclass
from pathlib import Path
from urllib.parse import urljoin, urlsplit

import requests

from .metrics import RatioResult

OUTCOMES = ("status", "timeout", "connection_error", "invalid_url")
HISTOGRAM_CLASSES = ("200", "3xx-final", "4xx", "5xx", "no-response", "other")
_REDIRECTS = frozenset({301, 302, 303, 307, 308})


@dataclass(frozen=True)
class ProbeConfig:
    concurrency: int = 16
    per_host_limit: int = 4
    timeout: float = 30.0
    redirect_limit: int = 10
    method: str = "head_then_get"

    def __post_init__(self):
        if self.concurrency < 1 or self.per_host_limit < 1:
            raise ValueError("concurrency and per_host_limit must be positive")
        if self.per_host_limit > self.concurrency:
            raise ValueError("per_host_limit cannot exceed concurrency")
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if self.method not in ("head_then_get", "get"):
            raise ValueError(f"unknown probe method {self.method!r}")


@dataclass(frozen=True)
class ProbeResult:
    url: str
    outcome: str
    status: int | None = None
    elapsed: float = 0.0
    redirects_followed: int = 0

    @property
    def ok(self) -> bool:
        return self.outcome == "status" and self.status == 200

    @property
    def status_class(self) -> str:
        if self.outcome != "status":
            return "no-response"
        code = self.status
        if code == 200:
            return "200"
        if 300 <= code < 400:
            return "3xx-final"
        if 400 <= code < 500:
            return "4xx"
        if 500 <= code < 600:
            return "5xx"
        return "other"


def is_probeable(url: str) -> bool:
    if not url or any(c.isspace() for c in url):
        return False
    try:
        parts = urlsplit(url)
    except ValueError:
        return False
    if parts.scheme not in ("http", "https") or not parts.hostname:
        return False
    try:
        requests.Request("GET", url).prepare()
    except requests.RequestException:
        return False
    return True


class HostGate:
    """Per-host semaphores; also records the peak in-flight count per host."""

    def __init__(self, limit: int):
        self.limit = limit
        self._lock = threading.Lock()
        self._sems: dict = {}
        self._inflight: Counter = Counter()
        self.peak: Counter = Counter()

    @contextmanager
    def hold(self, host: str):
        with self._lock:
            sem = self._sems.setdefault(host, threading.BoundedSemaphore(self.limit))
        with sem:
            with self._lock:
                self._inflight[host] += 1
                self.peak[host] = max(self.peak[host], self._inflight[host])
            try:
                yield
            finally:
                with self._lock:
                    self._inflight[host] -= 1


def _request(session, method, url, config):
    resp = session.request(method, url, allow_redirects=False, timeout=config.timeout, stream=True)
    resp.close()
    return resp


def probe_url(url: str, config: ProbeConfig, session: requests.Session | None = None,
              gate: HostGate | None = None) -> ProbeResult:
    if not is_probeable(url):
        return ProbeResult(url, "invalid_url")
    session = session or requests.Session()
    gate = gate or HostGate(config.per_host_limit)
    start = time.monotonic()
    current, hops = url, 0
    try:
        while True:
            host = urlsplit(current).netloc.lower()
            with gate.hold(host):
                if config.method == "head_then_get":
                    resp = _request(session, "HEAD", current, config)
                    if resp.status_code in (405, 501):
                        resp = _request(session, "GET", current, config)
                else:
                    resp = _request(session, "GET", current, config)
            location = resp.headers.get("Location")
            if resp.status_code in _REDIRECTS and location and hops < config.redirect_limit:
                nxt = urljoin(current, location)
                if not is_probeable(nxt):
                    return ProbeResult(url, "invalid_url", None, time.monotonic() - start, hops)
                current, hops = nxt, hops + 1
                continue
            return ProbeResult(url, "status", resp.status_code, time.monotonic() - start, hops)
    except requests.Timeout:
        return ProbeResult(url, "timeout", None, time.monotonic() - start, hops)
    except (requests.exceptions.InvalidURL, requests.exceptions.MissingSchema,
            requests.exceptions.InvalidSchema):
        return ProbeResult(url, "invalid_url", None, time.monotonic() - start, hops)
    except requests.RequestException:
        return ProbeResult(url, "connection_error", None, time.monotonic() - start, hops)


class ProbeCache:
    """Line-delimited JSON cache of probe results keyed by URL and probe date."""

    def __init__(self, path, ttl_days: int = 7):
        self.path = Path(path)
        self.ttl_days = ttl_days
        self.entries: dict = {}
        if self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                row = json.loads(line)
                prev = self.entries.get(row["url"])
                if prev is None or row["probe_date"] >= prev["probe_date"]:
                    self.entries[row["url"]] = row

    def get(self, url: str, today: dt.date) -> ProbeResult | None:
        row = self.entries.get(url)
        if row is None:
            return None
        age = (today - dt.date.fromisoformat(row["probe_date"])).days
        if age < 0 or age > self.ttl_days:
            return None
        return ProbeResult(row["url"], row["outcome"], row["status"], row["elapsed"], row["redirects_followed"])

    def put(self, result: ProbeResult, today: dt.date) -> None:
        row = asdict(result)
        row["probe_date"] = today.isoformat()
        self.entries[result.url] = row

    def save(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        lines = [json.dumps(self.entries[u], sort_keys=True) for u in sorted(self.entries)]
        self.path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def probe_all(urls, config: ProbeConfig | None = None, cache: ProbeCache | None = None,
              today: dt.date | None = None, gate: HostGate | None = None) -> list[ProbeResult]:
    """Probe each distinct URL once; failures become outcomes, never exceptions.

    Results come back sorted by URL. Fresh cache entries are reused without
    network I/O; new results are written into ``cache`` (call ``save``).
    """
    config = config or ProbeConfig()
    today = today or dt.date.today()
    gate = gate or HostGate(config.per_host_limit)
    distinct = sorted(set(urls))
    results: dict = {}
    todo = []
    for u in distinct:
        hit = cache.get(u, today) if cache is not None else None
        if hit is not None:
            results[u] = hit
        else:
            todo.append(u)

    local = threading.local()

    def work(u):
        if not hasattr(local, "session"):
            local.session = requests.Session()
            local.session.headers["User-Agent"] = "odlq-linkcheck/0.1"
        return probe_url(u, config, local.session, gate)

    if todo:
        with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
            for r in pool.map(work, todo):
                results[r.url] = r
                if cache is not None:
                    cache.put(r, today)
    return [results[u] for u in distinct]


def accessibility_ratio(results, distributions) -> RatioResult:
    """Distributions whose access URL finally answered 200, over all distributions."""
    by_url = {r.url: r for r in results}
    ok = 0
    total = 0
    for d in distributions:
        total += 1
        r = by_url.get(d.access_url) if d.access_url else None
        if r is not None and r.ok:
            ok += 1
    return RatioResult("accessibility_ratio", ok, total)


def url_accessibility_ratio(results) -> RatioResult:
    results = list(results)
    return RatioResult("url_accessibility_ratio", sum(1 for r in results if r.ok), len(results))


def status_histogram(results) -> dict:
    counts = Counter(r.status_class for r in {r.url: r for r in results}.values())
    return {c: counts[c] for c in HISTOGRAM_CLASSES if counts[c]}
