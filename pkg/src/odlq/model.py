"""Normalized data model for portals, catalog graphs, datasets and distributions.

Everything downstream (metrics, topics, accessibility, report) reads these
types. A :class:`CatalogGraph` is an immutable set of RDF triples plus the
harvest metadata; :func:`project_datasets` materializes the per-dataset view
the metrics work on.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, replace
from functools import cached_property, lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable
from urllib.parse import urlparse

from rdflib import BNode, Graph, Literal, URIRef
from rdflib.compare import to_canonical_graph
from rdflib.namespace import DCAT, DCTERMS, RDF

API_KINDS = ("dcat", "ckan", "dkan", "none")
OPEN_API_KINDS = frozenset({"dcat", "ckan", "dkan"})

MERGED_CATALOG_IRI = URIRef("urn:odlq:landscape")


class MergeError(ValueError):
    """Raised when two portals claim the same catalog node."""


def is_absolute_url(value: str) -> bool:
    parts = urlparse(value)
    return bool(parts.scheme) and bool(parts.netloc)


@dataclass(frozen=True)
class PortalDescriptor:
    id: str
    name: str
    endpoint_url: str
    api_kind: str
    location_code: str | None = None
    landscape_id: str = ""

    def __post_init__(self):
        if self.api_kind not in API_KINDS:
            raise ValueError(f"portal {self.id!r}: unknown api_kind {self.api_kind!r}")
        if self.api_kind != "none" and not is_absolute_url(self.endpoint_url):
            raise ValueError(f"portal {self.id!r}: endpoint_url must be absolute, got {self.endpoint_url!r}")

    @property
    def open_api(self) -> bool:
        return self.api_kind in OPEN_API_KINDS


class _TripleIndex:
    """Subject/predicate lookups over a frozen triple set."""

    def __init__(self, triples: Iterable[tuple]):
        self.sp: dict = defaultdict(lambda: defaultdict(list))
        self.by_pred: dict = defaultdict(list)
        for s, p, o in triples:
            self.sp[s][p].append(o)
            self.by_pred[p].append((s, o))

    def objects(self, s, p) -> list:
        node = self.sp.get(s)
        if node is None:
            return []
        return node.get(p, [])

    def pairs(self, p) -> list:
        return self.by_pred.get(p, [])


@dataclass(frozen=True)
class CatalogGraph:
    catalog_iri: URIRef
    triples: frozenset
    source_portal: str
    crawl_date: dt.date

    def __len__(self) -> int:
        return len(self.triples)

    @cached_property
    def index(self) -> _TripleIndex:
        return _TripleIndex(self.triples)

    @cached_property
    def catalog_nodes(self) -> tuple:
        """Every node that links a dataset, plus the declared catalog IRI."""
        nodes = {s for s, _ in self.index.pairs(DCAT.dataset)}
        nodes.update(s for s, o in self.index.pairs(RDF.type) if o == DCAT.Catalog)
        return tuple(sorted(nodes, key=_node_key))

    def to_graph(self) -> Graph:
        g = Graph()
        for t in self.triples:
            g.add(t)
        return g

    @classmethod
    def from_graph(cls, g: Graph, catalog_iri, source_portal: str, crawl_date: dt.date) -> "CatalogGraph":
        return cls(URIRef(catalog_iri), frozenset(g), source_portal, crawl_date)


@dataclass(frozen=True)
class DistributionRecord:
    node: URIRef | BNode
    access_url: str | None = None
    format_raw: str | None = None
    format_norm: str | None = None
    license_ref: str | None = None
    license_is_iri: bool = False


@dataclass(frozen=True)
class DatasetRecord:
    node: URIRef
    identifier: str | None = None
    title: str | None = None
    description: str | None = None
    keywords: tuple = ()
    issued: dt.date | None = None
    modified: dt.date | None = None
    themes: frozenset = frozenset()
    contact_point: bool = False
    publisher: bool = False
    spatial: bool = False
    temporal: bool = False
    has_distribution: bool = False
    distributions: tuple = ()
    catalogs: tuple = ()
    # URLs of every linked distribution, shared ones included
    access_urls: frozenset = frozenset()


@dataclass(frozen=True)
class LandscapeRegistry:
    landscape_id: str
    portals: tuple = ()
    merged_catalogs: tuple = ()

    def __post_init__(self):
        ids = [p.id for p in self.portals]
        dupes = sorted(k for k, n in Counter(ids).items() if n > 1)
        if dupes:
            raise ValueError(f"duplicate portal ids in registry: {dupes}")

    def portal(self, portal_id: str) -> PortalDescriptor:
        for p in self.portals:
            if p.id == portal_id:
                return p
        raise KeyError(portal_id)

    def with_catalog(self, graph: CatalogGraph) -> "LandscapeRegistry":
        """Return a registry where ``graph`` replaces any prior crawl of its portal."""
        kept = tuple(c for c in self.merged_catalogs if c.source_portal != graph.source_portal)
        catalogs = tuple(sorted(kept + (graph,), key=lambda c: c.source_portal))
        return replace(self, merged_catalogs=catalogs)

    @cached_property
    def merged(self) -> CatalogGraph:
        if not self.merged_catalogs:
            return CatalogGraph(MERGED_CATALOG_IRI, frozenset(), "", dt.date(1970, 1, 1))
        return merge_catalogs(list(self.merged_catalogs))

    @cached_property
    def projection(self) -> tuple:
        """``(records, diagnostics)`` for the merged graph, computed once."""
        diag: Counter = Counter()
        return project_datasets(self.merged, diag), diag

    def catalog_for(self, portal_id: str) -> CatalogGraph | None:
        for c in self.merged_catalogs:
            if c.source_portal == portal_id:
                return c
        return None


def _node_key(node) -> tuple:
    # blank nodes sort after IRIs; within each kind, lexical order
    return (isinstance(node, BNode), str(node))


# -- normalization tables ----------------------------------------------------

def _data_path(name: str) -> Path:
    return Path(str(resources.files("odlq").joinpath("data", name)))


def read_token_list(path) -> list[str]:
    """Read a one-token-per-line file, skipping blanks and ``#`` comments."""
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            out.append(line)
    return out


@lru_cache(maxsize=None)
def default_format_aliases() -> dict:
    return json.loads(_data_path("format_aliases.json").read_text(encoding="utf-8"))


def default_open_formats() -> frozenset:
    return frozenset(read_token_list(_data_path("open_formats.txt")))


def default_open_licenses() -> frozenset:
    return frozenset(read_token_list(_data_path("open_licenses.txt")))


_MIME_PREFIXES = ("application/", "text/")


def normalize_format(raw: str | None, aliases: dict | None = None) -> str | None:
    """Canonical lowercase format token for a free-text format field.

    >>> normalize_format("text/CSV")
    'csv'
    >>> normalize_format("application/vnd.ms-excel")
    'xls'
    """
    if raw is None:
        return None
    s = raw.strip().lower()
    if not s:
        return None
    if "://" in s:
        # vocabulary IRIs such as .../file-type/CSV or IANA media-type pages
        s = s.rstrip("/").rsplit("/", 1)[-1]
    s = s.split(";", 1)[0].strip()
    for prefix in _MIME_PREFIXES:
        if s.startswith(prefix):
            s = s[len(prefix):]
            break
    s = s.lstrip(".")
    if not s:
        return None
    table = default_format_aliases() if aliases is None else aliases
    return table.get(s, s)


def normalize_keywords(values: Iterable[str]) -> tuple:
    """Trim, drop empties, keep display case; sorted for determinism."""
    return tuple(sorted(v.strip() for v in values if v is not None and v.strip()))


_DATE_RE = re.compile(
    r"^(\d{4})-(\d{2})-(\d{2})(?:[T ]\d{2}:\d{2}(?::\d{2}(?:\.\d+)?)?)?(?:Z|[+-]\d{2}:?\d{2})?$"
)


def parse_date(value) -> dt.date | None:
    """Calendar date of an xsd:date / xsd:dateTime lexical form, else None."""
    if value is None:
        return None
    m = _DATE_RE.match(str(value).strip())
    if not m:
        return None
    try:
        return dt.date(int(m.group(1)), int(m.group(2)), int(m.group(3)))
    except ValueError:
        return None


# -- projection --------------------------------------------------------------

def _first_text(values) -> str | None:
    texts = sorted(str(v).strip() for v in values if isinstance(v, Literal) and str(v).strip())
    return texts[0] if texts else None


def _project_distribution(index: _TripleIndex, node, aliases) -> DistributionRecord:
    urls = sorted(str(u).strip() for u in index.objects(node, DCAT.accessURL) if not isinstance(u, BNode))
    fmt = sorted(str(f).strip() for f in index.objects(node, DCTERMS.format) if not isinstance(f, BNode))
    if not fmt:
        fmt = sorted(str(f).strip() for f in index.objects(node, DCAT.mediaType) if not isinstance(f, BNode))
    fmt = [f for f in fmt if f]
    format_raw = fmt[0] if fmt else None

    license_ref, license_is_iri = None, False
    lic = index.objects(node, DCTERMS.license)
    iris = sorted(str(x) for x in lic if isinstance(x, URIRef))
    if iris:
        license_ref, license_is_iri = iris[0], True
    else:
        texts = sorted(str(x).strip() for x in lic if isinstance(x, Literal) and str(x).strip())
        if texts:
            license_ref = texts[0]
        elif any(isinstance(x, BNode) for x in lic):
            license_ref = "_:license"

    return DistributionRecord(
        node=node,
        access_url=urls[0] if urls else None,
        format_raw=format_raw,
        format_norm=normalize_format(format_raw, aliases),
        license_ref=license_ref,
        license_is_iri=license_is_iri,
    )


def project_datasets(catalog: CatalogGraph, diagnostics: Counter | None = None,
                     format_aliases: dict | None = None) -> list[DatasetRecord]:
    """One record per non-blank dataset node linked from a catalog node.

    Malformed date literals become absent fields and are tallied into
    ``diagnostics`` under ``unparseable_date``. A distribution linked from
    several datasets is attached to the first owner in sort order only
    (tallied as ``shared_distribution``); the others keep
    ``has_distribution=True``.
    """
    diag = diagnostics if diagnostics is not None else Counter()
    index = catalog.index
    owners: dict = defaultdict(set)
    for cat, ds in index.pairs(DCAT.dataset):
        if isinstance(ds, BNode):
            diag["blank_dataset_link"] += 1
            continue
        if isinstance(ds, Literal):
            diag["literal_dataset_link"] += 1
            continue
        owners[ds].add(cat)

    claimed: set = set()
    records = []
    for ds in sorted(owners, key=str):
        def text(pred):
            return _first_text(index.objects(ds, pred))

        dates = {}
        for name, pred in (("issued", DCTERMS.issued), ("modified", DCTERMS.modified)):
            raw = index.objects(ds, pred)
            parsed = None
            if raw:
                parsed = min((d for d in map(parse_date, raw) if d is not None), default=None)
                if parsed is None:
                    diag["unparseable_date"] += 1
            dates[name] = parsed

        dist_nodes = sorted(set(index.objects(ds, DCAT.distribution)), key=_node_key)
        dist_nodes = [d for d in dist_nodes if not isinstance(d, Literal)]
        urls = frozenset(
            str(u).strip() for d in dist_nodes for u in index.objects(d, DCAT.accessURL)
            if not isinstance(u, BNode) and str(u).strip()
        )
        own = []
        for d in dist_nodes:
            if d in claimed:
                diag["shared_distribution"] += 1
                continue
            claimed.add(d)
            own.append(_project_distribution(index, d, format_aliases))

        records.append(DatasetRecord(
            node=ds,
            identifier=text(DCTERMS.identifier),
            title=text(DCTERMS.title),
            description=text(DCTERMS.description),
            keywords=normalize_keywords(str(k) for k in index.objects(ds, DCAT.keyword) if isinstance(k, Literal)),
            issued=dates["issued"],
            modified=dates["modified"],
            themes=frozenset(str(t) for t in index.objects(ds, DCAT.theme) if isinstance(t, URIRef)),
            contact_point=bool(index.objects(ds, DCAT.contactPoint)),
            publisher=bool(index.objects(ds, DCTERMS.publisher)),
            spatial=bool(index.objects(ds, DCTERMS.spatial)),
            temporal=bool(index.objects(ds, DCTERMS.temporal)),
            has_distribution=bool(dist_nodes),
            distributions=tuple(own),
            catalogs=tuple(sorted(owners[ds], key=_node_key)),
            access_urls=urls,
        ))
    return records


# -- merging -----------------------------------------------------------------

def merge_catalogs(catalogs: list[CatalogGraph], catalog_iri=None) -> CatalogGraph:
    """Union of triples, every source catalog node kept distinct.

    Raises :class:`MergeError` when two inputs from different portals both
    carry the same catalog node.
    """
    if not catalogs:
        raise ValueError("merge_catalogs needs at least one catalog")
    if len(catalogs) == 1 and catalog_iri is None:
        return catalogs[0]

    seen: dict = {}
    for c in catalogs:
        for node in set(c.catalog_nodes) | {c.catalog_iri}:
            prev = seen.setdefault(node, c.source_portal)
            if prev != c.source_portal:
                raise MergeError(f"catalog {node} claimed by portals {prev!r} and {c.source_portal!r}")

    triples = frozenset().union(*(c.triples for c in catalogs))
    portals = sorted({p for c in catalogs for p in c.source_portal.split("+") if p})
    return CatalogGraph(
        catalog_iri=URIRef(catalog_iri) if catalog_iri is not None else MERGED_CATALOG_IRI,
        triples=triples,
        source_portal="+".join(portals),
        crawl_date=max(c.crawl_date for c in catalogs),
    )


# -- files -------------------------------------------------------------------

PORTAL_COLUMNS = ("id", "name", "endpoint_url", "api_kind", "location_code", "landscape_id")


def load_portal_list(path) -> list[PortalDescriptor]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in PORTAL_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"{path}: portal list lacks columns {missing}")
        portals = []
        for row in reader:
            portals.append(PortalDescriptor(
                id=row["id"].strip(),
                name=row["name"].strip(),
                endpoint_url=row["endpoint_url"].strip(),
                api_kind=row["api_kind"].strip().lower() or "none",
                location_code=(row["location_code"] or "").strip() or None,
                landscape_id=row["landscape_id"].strip(),
            ))
    return portals


def write_portal_list(portals: Iterable[PortalDescriptor], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PORTAL_COLUMNS)
        for p in portals:
            w.writerow([p.id, p.name, p.endpoint_url, p.api_kind, p.location_code or "", p.landscape_id])


def load_registry(portal_list_path, landscape_id: str | None = None) -> LandscapeRegistry:
    portals = load_portal_list(portal_list_path)
    if landscape_id is None:
        ids = sorted({p.landscape_id for p in portals if p.landscape_id})
        landscape_id = ids[0] if len(ids) == 1 else "+".join(ids)
    return LandscapeRegistry(landscape_id=landscape_id, portals=tuple(portals))


_HEADER_RE = re.compile(r"^#\s*odlq-(catalog|portal|crawl-date):\s*(.*?)\s*$")


def serialize_catalog(graph: CatalogGraph, fmt: str = "turtle") -> str:
    """Deterministic text form; blank nodes get canonical labels."""
    canon = Graph()
    for t in to_canonical_graph(graph.to_graph()):
        canon.add(t)
    if fmt == "nt":
        lines = sorted(set(canon.serialize(format="nt").splitlines()) - {""})
        body = "\n".join(lines) + ("\n" if lines else "")
    else:
        for prefix, ns in (("dcat", DCAT), ("dct", DCTERMS)):
            canon.bind(prefix, ns, override=True)
        body = canon.serialize(format="turtle")
    header = (
        f"# odlq-catalog: {graph.catalog_iri}\n"
        f"# odlq-portal: {graph.source_portal}\n"
        f"# odlq-crawl-date: {graph.crawl_date.isoformat()}\n"
    )
    return header + body


def write_catalog(graph: CatalogGraph, path) -> Path:
    path = Path(path)
    fmt = "nt" if path.suffix == ".nt" else "turtle"
    path.write_text(serialize_catalog(graph, fmt), encoding="utf-8")
    return path


def read_catalog(path, crawl_date: dt.date | None = None, source_portal: str | None = None) -> CatalogGraph:
    """Load a Turtle / N-Triples catalog file written by :func:`write_catalog`.

    Files without the ``# odlq-*`` header (e.g. third-party dumps) take the
    first catalog node as ``catalog_iri`` and need ``crawl_date`` passed in.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    meta = {}
    for line in text.splitlines()[:3]:
        m = _HEADER_RE.match(line)
        if m:
            meta[m.group(1)] = m.group(2)
    fmt = "nt" if path.suffix == ".nt" else "turtle"
    g = Graph()
    try:
        g.parse(data=text, format=fmt)
    except Exception as exc:  # rdflib parsers raise unrelated exception types
        raise ValueError(f"{path}: not valid {fmt}: {exc}") from exc
    triples = frozenset(g)
    if "crawl-date" in meta:
        date = dt.date.fromisoformat(meta["crawl-date"])
    elif crawl_date is not None:
        date = crawl_date
    else:
        raise ValueError(f"{path}: no crawl date in file header and none given")
    portal = meta.get("portal") or source_portal or path.stem
    iri = meta.get("catalog")
    if not iri:
        probe = CatalogGraph(MERGED_CATALOG_IRI, triples, portal, date)
        iri = str(probe.catalog_nodes[0]) if probe.catalog_nodes else f"urn:odlq:catalog:{portal}"
    return CatalogGraph(URIRef(iri), triples, portal, date)
