"""Harvest portal metadata into catalog graphs.

Two routes exist: portals with a native DCAT endpoint are downloaded and
repaired line by line until the payload parses; CKAN/DKAN portals are read
through their JSON action API and converted to DCAT with a data-driven
field mapping (``data/ckan_mapping.json``).
"""

from __future__ import annotations

import datetime as dt
import json
import logging
import re
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from urllib.parse import quote, urljoin, urlparse

import requests
from rdflib import BNode, Graph, Literal, Namespace, URIRef
from rdflib.namespace import DCAT, DCTERMS, FOAF, RDF, XSD
from rdflib.plugins.parsers.notation3 import BadSyntax

from .model import (
    CatalogGraph,
    LandscapeRegistry,
    PortalDescriptor,
    _data_path,
    is_absolute_url,
    load_portal_list,
    read_catalog,
    write_catalog,
    write_portal_list,
)

log = logging.getLogger(__name__)

HYDRA = Namespace("http://www.w3.org/ns/hydra/core#")
VCARD = Namespace("http://www.w3.org/2006/vcard/ns#")

USER_AGENT = "odlq-harvester/0.1"


class HarvestError(RuntimeError):
    """Endpoint could not be fetched within the retry budget."""

    def __init__(self, message, url=None, status=None):
        super().__init__(message)
        self.url = url
        self.status = status


class PayloadFormatError(ValueError):
    """Payload could not be turned into any triples."""


@dataclass(frozen=True)
class HarvestJob:
    portal: PortalDescriptor
    page_size: int = 100
    max_retries: int = 3
    timeout: float = 30.0
    backoff: float = 1.0
    crawl_date: dt.date | None = None

    def __post_init__(self):
        if self.page_size < 1:
            raise ValueError("page_size must be >= 1")
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


@dataclass
class RepairLog:
    source: str
    removed_lines: int = 0
    repaired_iris: int = 0
    skipped_packages: int = 0
    removed: list = field(default_factory=list, repr=False)

    def absorb(self, other: "RepairLog") -> None:
        self.removed_lines += other.removed_lines
        self.repaired_iris += other.repaired_iris
        self.skipped_packages += other.skipped_packages
        self.removed.extend(other.removed)


# -- HTTP --------------------------------------------------------------------

def new_session() -> requests.Session:
    s = requests.Session()
    s.headers["User-Agent"] = USER_AGENT
    return s


def fetch(session: requests.Session, url: str, job: HarvestJob, params=None,
          accept: str | None = None) -> requests.Response:
    """GET with exponential backoff; 4xx other than 429 fail immediately."""
    headers = {"Accept": accept} if accept else None
    last = None
    for attempt in range(job.max_retries + 1):
        if attempt:
            time.sleep(job.backoff * 2 ** (attempt - 1))
        try:
            resp = session.get(url, params=params, headers=headers, timeout=job.timeout)
        except requests.RequestException as exc:
            last = HarvestError(f"{url}: {exc}", url=url)
            continue
        if resp.status_code == 200:
            return resp
        last = HarvestError(f"{url}: HTTP {resp.status_code}", url=url, status=resp.status_code)
        if 400 <= resp.status_code < 500 and resp.status_code != 429:
            break
    raise last


# -- line-tolerant RDF repair --------------------------------------------------

_IRI_BAD_CHARS = re.compile(r'[\x00-\x20<>"{}|^`\\]')


def _scan_line(line: str, in_long: str | None) -> tuple[list, str | None]:
    """IRI-ref spans on one line, tracking open triple-quoted literals."""
    spans = []
    i, n = 0, len(line)
    while i < n:
        if in_long:
            j = line.find(in_long, i)
            if j < 0:
                return spans, in_long
            i, in_long = j + 3, None
            continue
        c = line[i]
        if c == "#":
            break
        if line.startswith('"""', i) or line.startswith("'''", i):
            in_long = line[i:i + 3]
            i += 3
            continue
        if c in "\"'":
            j = i + 1
            while j < n and line[j] != c:
                j += 2 if line[j] == "\\" else 1
            i = j + 1
            continue
        if c == "<":
            j = line.find(">", i + 1)
            if j < 0:
                spans.append((i, n))
                break
            spans.append((i, j + 1))
            i = j + 1
            continue
        i += 1
    return spans, in_long


def _check_iris(lines: list[str], log_: RepairLog) -> list:
    """Trim padded IRIs in place; return indexes of lines with broken IRIs."""
    bad = []
    in_long = None
    for idx, line in enumerate(lines):
        spans, in_long_next = _scan_line(line, in_long)
        in_long = in_long_next
        fixed = line
        broken = False
        for start, end in reversed(spans):
            token = line[start:end]
            if not token.endswith(">"):
                broken = True
                break
            inner = token[1:-1]
            if _IRI_BAD_CHARS.search(inner):
                stripped = inner.strip()
                if stripped and not _IRI_BAD_CHARS.search(stripped):
                    fixed = fixed[:start] + "<" + stripped + ">" + fixed[end:]
                    log_.repaired_iris += 1
                else:
                    broken = True
                    break
        if broken:
            bad.append(idx)
        else:
            lines[idx] = fixed
    return bad


def _is_statement(line: str) -> bool:
    s = line.strip()
    return bool(s) and not s.startswith("#")


def repair_parse(text: str, fmt: str = "turtle", base: str | None = None,
                 source: str = "") -> tuple[Graph, RepairLog]:
    """Parse ``text`` dropping offending lines until it parses cleanly.

    Lines with syntactically invalid IRIs are dropped first; after that the
    parser is run repeatedly and the line it reports is removed each time.
    Only line-oriented formats (Turtle, N-Triples) are repaired; other
    formats must parse as-is.
    """
    log_ = RepairLog(source=source)
    if fmt not in ("turtle", "nt"):
        g = Graph()
        try:
            g.parse(data=text, format=fmt, publicID=base)
        except Exception as exc:
            raise PayloadFormatError(f"{source}: unparseable {fmt} payload: {exc}") from exc
        return g, log_

    lines = text.splitlines()
    live = [True] * len(lines)

    def drop(idx):
        live[idx] = False
        log_.removed_lines += 1
        log_.removed.append(idx + 1)

    for idx in _check_iris(lines, log_):
        drop(idx)

    for _ in range(len(lines) + 1):
        keep = [i for i, ok in enumerate(live) if ok]
        g = Graph()
        try:
            # N-Triples is a subset of Turtle; the Turtle parser reports line numbers
            g.parse(data="\n".join(lines[i] for i in keep), format="turtle", publicID=base)
            break
        except BadSyntax as exc:
            pos = min(max(exc.lines, 0), len(keep) - 1) if keep else -1
            if pos < 0:
                break
            # error reported on a blank/comment line: blame the statement before it
            while pos > 0 and not _is_statement(lines[keep[pos]]):
                pos -= 1
            drop(keep[pos])
    else:  # pragma: no cover - loop bound is the line count
        raise PayloadFormatError(f"{source}: repair did not converge")

    if len(g) == 0 and log_.removed_lines and any(_is_statement(l) for l in lines):
        raise PayloadFormatError(f"{source}: no parseable statements in payload")
    return g, log_


# -- DCAT route ----------------------------------------------------------------

_CONTENT_TYPES = {
    "text/turtle": "turtle",
    "application/x-turtle": "turtle",
    "application/n-triples": "nt",
    "text/plain": "nt",
    "application/rdf+xml": "xml",
    "application/ld+json": "json-ld",
}
_SUFFIXES = {".ttl": "turtle", ".nt": "nt", ".rdf": "xml", ".xml": "xml", ".jsonld": "json-ld"}


def detect_format(url: str, content_type: str | None) -> str:
    if content_type:
        ct = content_type.split(";", 1)[0].strip().lower()
        if ct in _CONTENT_TYPES:
            return _CONTENT_TYPES[ct]
    suffix = Path(urlparse(url).path).suffix.lower()
    return _SUFFIXES.get(suffix, "turtle")


def _strip_paging(g: Graph) -> tuple[Graph, str | None]:
    nxt = None
    out = Graph()
    for s, p, o in g:
        if str(p).startswith(str(HYDRA)) or (p == RDF.type and str(o).startswith(str(HYDRA))):
            if p == HYDRA.nextPage:
                nxt = str(o)
            continue
        out.add((s, p, o))
    return out, nxt


def _catalog_iri(g: Graph, fallback: str) -> URIRef:
    typed = sorted(str(s) for s in g.subjects(RDF.type, DCAT.Catalog) if isinstance(s, URIRef))
    if typed:
        return URIRef(typed[0])
    linking = sorted({str(s) for s in g.subjects(DCAT.dataset, None) if isinstance(s, URIRef)})
    return URIRef(linking[0]) if linking else URIRef(fallback)


def harvest_dcat(job: HarvestJob, session: requests.Session | None = None) -> tuple[CatalogGraph, RepairLog]:
    """Download a DCAT endpoint (following hydra paging) and repair it."""
    portal = job.portal
    if portal.api_kind != "dcat":
        raise ValueError(f"portal {portal.id}: harvest_dcat needs api_kind=dcat, got {portal.api_kind}")
    session = session or new_session()
    total = RepairLog(source=portal.id)
    merged = Graph()
    url, seen = portal.endpoint_url, set()
    while url and url not in seen:
        seen.add(url)
        resp = fetch(session, url, job, accept="text/turtle, application/n-triples;q=0.9, application/rdf+xml;q=0.8")
        fmt = detect_format(url, resp.headers.get("Content-Type"))
        g, page_log = repair_parse(resp.text, fmt, base=url, source=portal.id)
        total.absorb(page_log)
        g, nxt = _strip_paging(g)
        for t in g:
            merged.add(t)
        url = urljoin(url, nxt) if nxt else None
    graph = CatalogGraph.from_graph(
        merged, _catalog_iri(merged, portal.endpoint_url), portal.id, job.crawl_date or dt.date.today()
    )
    return graph, total


# -- JSON route ----------------------------------------------------------------

@lru_cache(maxsize=None)
def default_mapping() -> dict:
    return json.loads(_data_path("ckan_mapping.json").read_text(encoding="utf-8"))


def portal_base(endpoint_url: str) -> str:
    base = endpoint_url.split("/api/", 1)[0]
    return base.rstrip("/")


def _api_url(portal: PortalDescriptor) -> tuple[str, str, str]:
    """(url, size-param, offset-param) of the package listing action."""
    if portal.api_kind == "ckan":
        action, size, offset = "package_search", "rows", "start"
    else:
        action, size, offset = "current_package_list_with_resources", "limit", "offset"
    if "/api/" in portal.endpoint_url:
        return portal.endpoint_url, size, offset
    return f"{portal_base(portal.endpoint_url)}/api/3/action/{action}", size, offset


def _page_packages(payload) -> tuple[list, int | None]:
    result = payload.get("result") if isinstance(payload, dict) else payload
    if isinstance(result, dict):
        return list(result.get("results") or []), result.get("count")
    if isinstance(result, list):
        # some DKAN versions wrap the page in an extra list
        if len(result) == 1 and isinstance(result[0], list):
            result = result[0]
        return list(result), None
    raise PayloadFormatError("unexpected package listing shape")


def fetch_packages(job: HarvestJob, session: requests.Session) -> list:
    url, size_key, offset_key = _api_url(job.portal)
    packages, offset = [], 0
    while True:
        resp = fetch(session, url, job, params={size_key: job.page_size, offset_key: offset})
        try:
            page, count = _page_packages(resp.json())
        except ValueError as exc:
            raise PayloadFormatError(f"{job.portal.id}: {exc}") from exc
        packages.extend(page)
        offset += len(page)
        if not page or len(page) < job.page_size or (count is not None and offset >= count):
            return packages


def _date_literal(value) -> Literal | None:
    if not isinstance(value, str) or not value.strip():
        return None
    v = value.strip()
    if re.fullmatch(r"\d{4}-\d{2}-\d{2}", v):
        return Literal(v, datatype=XSD.date)
    if re.match(r"\d{4}-\d{2}-\d{2}T", v):
        return Literal(v, datatype=XSD.dateTime)
    return Literal(v)


def _term(kind: str, value):
    if value is None or (isinstance(value, str) and not value.strip()):
        return None
    if kind == "literal":
        return Literal(str(value).strip())
    if kind == "datetime":
        return _date_literal(value)
    if kind == "iri":
        # portal URLs often carry literal spaces; everything else invalid is dropped
        v = str(value).strip().replace(" ", "%20")
        return URIRef(v) if is_absolute_url(v) and not _IRI_BAD_CHARS.search(v) else None
    raise ValueError(f"unknown mapping kind {kind!r}")


def _extras(pkg: dict) -> dict:
    extras = pkg.get("extras") or []
    if isinstance(extras, dict):
        return {str(k): v for k, v in extras.items()}
    out = {}
    for e in extras:
        if isinstance(e, dict) and "key" in e:
            out[str(e["key"])] = e.get("value")
    return out


def package_triples(pkg: dict, base: str, catalog: URIRef, mapping: dict | None = None) -> list:
    """DCAT triples for one CKAN/DKAN package dict.

    Raises KeyError/TypeError when the package lacks an id and a name.
    """
    m = mapping or default_mapping()
    if not isinstance(pkg, dict):
        raise TypeError("package is not an object")
    key = pkg.get("id") or pkg.get("name")
    if not key:
        raise KeyError("package has neither id nor name")
    ds = URIRef(f"{base}/dataset/{quote(str(key), safe='')}")
    out = [(catalog, DCAT.dataset, ds), (ds, RDF.type, DCAT.Dataset)]

    def add(subject, spec, value):
        term = _term(spec["kind"], value)
        if term is not None:
            out.append((subject, URIRef(spec["predicate"]), term))

    for field_name, spec in m["dataset"].items():
        value = pkg.get(field_name)
        if field_name == "title" and not (isinstance(value, str) and value.strip()):
            value = pkg.get(m["title_fallback"])
        add(ds, spec, value)

    tag_spec = m["tags"]
    for tag in pkg.get("tags") or []:
        name = tag.get(tag_spec["key"]) if isinstance(tag, dict) else tag
        if isinstance(name, str) and name.strip():
            out.append((ds, URIRef(tag_spec["predicate"]), Literal(name.strip())))

    org = pkg.get("organization")
    if isinstance(org, dict) and org.get(m["organization"]["name_key"]):
        pub = BNode(f"pub{key}")
        out += [(ds, URIRef(m["organization"]["predicate"]), pub),
                (pub, RDF.type, FOAF.Organization),
                (pub, FOAF.name, Literal(str(org[m["organization"]["name_key"]]).strip()))]

    contact = m["contact"]
    name = next((pkg[k] for k in contact["name_keys"] if isinstance(pkg.get(k), str) and pkg[k].strip()), None)
    email = next((pkg[k] for k in contact["email_keys"] if isinstance(pkg.get(k), str) and pkg[k].strip()), None)
    if name or email:
        cp = BNode(f"cp{key}")
        out += [(ds, URIRef(contact["predicate"]), cp), (cp, RDF.type, VCARD.Kind)]
        if name:
            out.append((cp, VCARD.fn, Literal(name.strip())))
        if email:
            out.append((cp, VCARD.hasEmail, URIRef("mailto:" + email.strip())))

    extras = _extras(pkg)
    period = None
    for ekey, spec in m["extras"].items():
        value = extras.get(ekey)
        if value is None or (isinstance(value, str) and not value.strip()):
            continue
        if spec["kind"] in ("period_start", "period_end"):
            if period is None:
                period = BNode(f"pt{key}")
                out += [(ds, URIRef(spec["predicate"]), period), (period, RDF.type, DCTERMS.PeriodOfTime)]
            pred = DCAT.startDate if spec["kind"] == "period_start" else DCAT.endDate
            lit = _date_literal(value)
            if lit is not None:
                out.append((period, pred, lit))
        else:
            add(ds, spec, value)

    lic = m["license"]
    license_term = _term("iri", pkg.get(lic["iri_key"]))
    if license_term is None:
        text = next((pkg[k] for k in lic["text_keys"] if isinstance(pkg.get(k), str) and pkg[k].strip()), None)
        license_term = Literal(text.strip()) if text else None

    for i, res in enumerate(pkg.get("resources") or []):
        if not isinstance(res, dict):
            continue
        rid = res.get("id") or str(i)
        dist = URIRef(f"{ds}/resource/{quote(str(rid), safe='')}")
        out += [(ds, DCAT.distribution, dist), (dist, RDF.type, DCAT.Distribution)]
        for field_name, spec in m["resource"].items():
            add(dist, spec, res.get(field_name))
        if license_term is not None:
            out.append((dist, URIRef(lic["predicate"]), license_term))
    return out


def packages_to_graph(packages: list, portal: PortalDescriptor, crawl_date: dt.date,
                      mapping: dict | None = None) -> tuple[CatalogGraph, RepairLog]:
    base = portal_base(portal.endpoint_url)
    catalog = URIRef(base + "/")
    log_ = RepairLog(source=portal.id)
    triples = []
    for pkg in packages:
        try:
            triples.extend(package_triples(pkg, base, catalog, mapping))
        except (KeyError, TypeError, AttributeError) as exc:
            log.warning("%s: skipping package: %s", portal.id, exc)
            log_.skipped_packages += 1
    if triples:
        triples.append((catalog, RDF.type, DCAT.Catalog))
        if portal.name:
            triples.append((catalog, DCTERMS.title, Literal(portal.name)))
    return CatalogGraph(catalog, frozenset(triples), portal.id, crawl_date), log_


def harvest_json(job: HarvestJob, session: requests.Session | None = None,
                 mapping: dict | None = None) -> tuple[CatalogGraph, RepairLog]:
    """Page through a CKAN/DKAN package listing and convert it to DCAT."""
    if job.portal.api_kind not in ("ckan", "dkan"):
        raise ValueError(f"portal {job.portal.id}: harvest_json needs ckan/dkan, got {job.portal.api_kind}")
    packages = fetch_packages(job, session or new_session())
    return packages_to_graph(packages, job.portal, job.crawl_date or dt.date.today(), mapping)


# -- post-processing and pipeline ---------------------------------------------

def rewrite_namespaces(graph: CatalogGraph, rewrite_map: dict) -> CatalogGraph:
    """Replace IRI prefixes (longest match first) throughout the graph."""
    if not rewrite_map:
        return graph
    prefixes = sorted(rewrite_map, key=len, reverse=True)

    def fix(term):
        if isinstance(term, URIRef):
            s = str(term)
            for old in prefixes:
                if s.startswith(old):
                    return URIRef(rewrite_map[old] + s[len(old):])
        return term

    triples = frozenset((fix(s), fix(p), fix(o)) for s, p, o in graph.triples)
    return CatalogGraph(fix(graph.catalog_iri), triples, graph.source_portal, graph.crawl_date)


def harvest(job: HarvestJob, session: requests.Session | None = None) -> tuple[CatalogGraph, RepairLog]:
    if job.portal.api_kind == "dcat":
        return harvest_dcat(job, session)
    if job.portal.api_kind in ("ckan", "dkan"):
        return harvest_json(job, session)
    raise ValueError(f"portal {job.portal.id} has no crawlable API")


@dataclass
class PipelineRun:
    registry: LandscapeRegistry
    repair_logs: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)

    @property
    def succeeded(self) -> list:
        return sorted(self.repair_logs)


def run_pipeline(registry: LandscapeRegistry, *, concurrency: int = 4, page_size: int = 100,
                 max_retries: int = 3, timeout: float = 30.0, backoff: float = 1.0,
                 crawl_date: dt.date | None = None, rewrite_map: dict | None = None) -> PipelineRun:
    """Harvest every crawlable portal and fold the results into the registry.

    A failing portal is recorded in ``failures`` and does not stop the run;
    a successful re-crawl replaces the portal's previous catalog.
    """
    crawl_date = crawl_date or dt.date.today()
    crawlable = [p for p in registry.portals if p.open_api]
    run = PipelineRun(registry)
    if not crawlable:
        return run

    def work(portal):
        job = HarvestJob(portal, page_size=page_size, max_retries=max_retries, timeout=timeout,
                         backoff=backoff, crawl_date=crawl_date)
        graph, rlog = harvest(job, new_session())
        return rewrite_namespaces(graph, rewrite_map or {}), rlog

    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
        futures = {p.id: pool.submit(work, p) for p in crawlable}
        for pid in sorted(futures):
            try:
                graph, rlog = futures[pid].result()
            except (HarvestError, PayloadFormatError, requests.RequestException) as exc:
                log.error("portal %s failed: %s", pid, exc)
                run.failures[pid] = str(exc)
                continue
            run.registry = run.registry.with_catalog(graph)
            run.repair_logs[pid] = rlog
    return run


# -- registry directory ----------------------------------------------------------

CATALOG_DIR = "catalogs"
MERGED_FILE = "merged.ttl"
PORTALS_FILE = "portals.csv"


def write_registry(registry: LandscapeRegistry, directory) -> list[Path]:
    """Write one Turtle file per portal plus the merged catalog.

    Catalog files of portals no longer in the registry are left alone.
    """
    root = Path(directory)
    (root / CATALOG_DIR).mkdir(parents=True, exist_ok=True)
    write_portal_list(registry.portals, root / PORTALS_FILE)
    written = []
    for c in registry.merged_catalogs:
        written.append(write_catalog(c, root / CATALOG_DIR / f"{c.source_portal}.ttl"))
    if registry.merged_catalogs:
        written.append(write_catalog(registry.merged, root / MERGED_FILE))
    return written


def read_registry(directory, landscape_id: str | None = None, crawl_date: dt.date | None = None) -> LandscapeRegistry:
    """Load a registry directory written by :func:`write_registry`.

    Extra ``*.ttl``/``*.nt`` files dropped into ``catalogs/`` (such as a
    published dump) are loaded too; they need ``crawl_date`` if they carry
    no header.
    """
    root = Path(directory)
    if not root.is_dir():
        raise FileNotFoundError(f"registry directory {root} does not exist")
    portals = load_portal_list(root / PORTALS_FILE) if (root / PORTALS_FILE).exists() else []
    if landscape_id is None:
        ids = sorted({p.landscape_id for p in portals if p.landscape_id})
        landscape_id = "+".join(ids) or root.name
    registry = LandscapeRegistry(landscape_id=landscape_id, portals=tuple(portals))
    files = sorted(list((root / CATALOG_DIR).glob("*.ttl")) + list((root / CATALOG_DIR).glob("*.nt")))
    for f in files:
        registry = registry.with_catalog(read_catalog(f, crawl_date=crawl_date))
    return registry


def load_rewrite_map(path) -> dict:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise ValueError(f"{path}: rewrite map must be a JSON object")
    return {str(k): str(v) for k, v in data.items()}


def repair_stats(logs: dict) -> dict:
    c = Counter()
    for rlog in logs.values():
        c["removed_lines"] += rlog.removed_lines
        c["repaired_iris"] += rlog.repaired_iris
        c["skipped_packages"] += rlog.skipped_packages
    return dict(sorted(c.items()))
