"""Quality metrics over a landscape registry.

All ratio metrics return :class:`RatioResult` with integer numerator and
denominator so that callers can format exact values. Logarithms are natural
throughout; every normalized output is independent of the base.
"""

from __future__ import annotations

import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from rdflib import BNode, Literal, URIRef
from rdflib.namespace import DCAT, RDF

from .model import (
    DatasetRecord,
    LandscapeRegistry,
    default_open_formats,
    default_open_licenses,
    project_datasets,
)

UNIQUENESS_PROPERTIES = ("identifier", "title", "description")
DAYS_PER_MONTH = 30.44
_MONTH = Fraction(str(DAYS_PER_MONTH))


@dataclass(frozen=True)
class RatioResult:
    name: str
    numerator: int
    denominator: int

    def __post_init__(self):
        if self.numerator < 0 or self.denominator < 0:
            raise ValueError(f"{self.name}: negative count")
        if self.numerator > self.denominator:
            raise ValueError(f"{self.name}: numerator {self.numerator} > denominator {self.denominator}")

    @property
    def value(self) -> Fraction:
        if self.denominator == 0:
            return Fraction(0)
        return Fraction(self.numerator, self.denominator)

    def to_dict(self) -> dict:
        return {"name": self.name, "numerator": self.numerator, "denominator": self.denominator}


@dataclass(frozen=True)
class KeyData:
    dataset_count: int
    distribution_count: int
    access_url_count: int
    catalog_count: int

    @property
    def per_portal_means(self) -> tuple | None:
        """Totals divided by the number of catalogs; None for an empty registry."""
        if self.catalog_count == 0:
            return None
        n = self.catalog_count
        return (Fraction(self.dataset_count, n), Fraction(self.distribution_count, n),
                Fraction(self.access_url_count, n))


@dataclass(frozen=True)
class SummaryStats:
    mean: float
    std: float
    max: float
    min: float
    count: int

    @classmethod
    def of(cls, values) -> "SummaryStats | None":
        if not values:
            return None
        arr = np.asarray(values, dtype=float)
        return cls(float(arr.mean()), float(arr.std()), float(arr.max()), float(arr.min()), len(values))


@dataclass
class UniquenessResult:
    per_property: dict
    compound: SummaryStats | None
    per_dataset: dict = field(repr=False)
    duplicates_removed: int = 0
    without_properties: int = 0


@dataclass
class KeywordICResult:
    per_dataset: dict = field(repr=False)
    mean_normalized: float | None
    max_frequency: int


@dataclass
class FreshnessDistribution:
    months_since_issued: list
    months_since_modified: list
    missing_issued: int = 0
    missing_modified: int = 0
    clamped_future: int = 0
    scope: str = "all"

    @staticmethod
    def quartiles(values) -> dict | None:
        if not values:
            return None
        q = np.percentile(np.asarray(values, dtype=float), [0, 25, 50, 75, 100])
        return dict(zip(("min", "q1", "median", "q3", "max"), (float(x) for x in q)))


@dataclass
class NamespaceDistribution:
    counts: dict
    relative_iris: int = 0


# -- key data ----------------------------------------------------------------

def _join_chain(index):
    """Yield (catalog, dataset, distribution, url) along the key-data join."""
    for cat, ds in index.pairs(DCAT.dataset):
        if isinstance(ds, (BNode, Literal)):
            continue
        for dist in index.objects(ds, DCAT.distribution):
            if isinstance(dist, (BNode, Literal)):
                continue
            for url in index.objects(dist, DCAT.accessURL):
                yield cat, ds, dist, url


def key_data(registry: LandscapeRegistry) -> KeyData:
    datasets, dists, urls = set(), set(), set()
    for _, ds, dist, url in _join_chain(registry.merged.index):
        datasets.add(ds)
        dists.add(dist)
        urls.add(url)
    return KeyData(len(datasets), len(dists), len(urls), len(registry.merged_catalogs))


# -- location coverage -------------------------------------------------------

_NUTS_RE = re.compile(r"^[A-Z]{2}[0-9A-Z]{0,3}$")


def nuts_level(code: str) -> int | None:
    code = code.strip().upper()
    if not _NUTS_RE.match(code):
        return None
    return len(code) - 2


def location_coverage(registry: LandscapeRegistry, loco: dict, api_only: bool = False,
                      diagnostics: Counter | None = None) -> list[RatioResult]:
    """Share of regions per level that host at least one portal."""
    diag = diagnostics if diagnostics is not None else Counter()
    covered = defaultdict(set)
    for p in registry.portals:
        if api_only and not p.open_api:
            continue
        if not p.location_code:
            diag["portal_without_location"] += 1
            continue
        level = nuts_level(p.location_code)
        if level is None:
            diag["unmappable_location_code"] += 1
            continue
        covered[level].add(p.location_code.strip().upper())
    out = []
    for level in sorted(loco):
        denom = int(loco[level])
        num = len(covered.get(level, ()))
        out.append(RatioResult(f"loco_level_{level}", min(num, denom), denom))
    return out


def load_loco_table(path) -> dict:
    import csv

    with open(path, newline="", encoding="utf-8") as fh:
        return {int(row["level"]): int(row["region_count"]) for row in csv.DictReader(fh)}


# -- uniqueness --------------------------------------------------------------

def uniqueness_score(t_f: int, v_f: int) -> float:
    """BM25-style score of a value shared by ``v_f`` of ``t_f`` datasets."""
    return math.log(1.0 + (t_f - v_f + 0.5) / (v_f + 0.5))


def uniqueness_value(t_f: int, v_f: int) -> float:
    """Score relative to the ideal score of a value that occurs once."""
    if t_f < 2 or v_f == 1:
        return 1.0
    return uniqueness_score(t_f, v_f) / uniqueness_score(t_f, 1)


def deduplicate(records: list[DatasetRecord]) -> tuple[list[DatasetRecord], int]:
    """Drop datasets whose identifier, title, description and URL set all match an earlier one."""
    seen = set()
    kept = []
    for r in records:
        key = (r.identifier, r.title, r.description, r.access_urls)
        if key in seen:
            continue
        seen.add(key)
        kept.append(r)
    return kept, len(records) - len(kept)


def uniqueness(registry: LandscapeRegistry, records: list[DatasetRecord] | None = None) -> UniquenessResult:
    if records is None:
        records = registry.projection[0]
    kept, removed = deduplicate(sorted(records, key=lambda r: str(r.node)))

    per_dataset: dict = defaultdict(dict)
    per_property = {}
    for prop in UNIQUENESS_PROPERTIES:
        carriers = [(r.node, getattr(r, prop)) for r in kept if getattr(r, prop) is not None]
        t_f = len(carriers)
        v_counts = Counter(v for _, v in carriers)
        scores = []
        for node, v in carriers:
            s = uniqueness_value(t_f, v_counts[v])
            per_dataset[node][prop] = s
            scores.append(s)
        per_property[prop] = SummaryStats.of(scores)

    compound = []
    for r in kept:
        s = per_dataset.get(r.node)
        if s:
            compound.append(math.fsum(s.values()) / len(s))
    without = sum(1 for r in kept if r.node not in per_dataset)
    return UniquenessResult(
        per_property=per_property,
        compound=SummaryStats.of(compound),
        per_dataset=dict(per_dataset),
        duplicates_removed=removed,
        without_properties=without,
    )


# -- interoperability --------------------------------------------------------

def interoperability_ratios(registry: LandscapeRegistry, open_formats=None) -> dict:
    open_formats = default_open_formats() if open_formats is None else frozenset(open_formats)
    portals = registry.portals
    records = registry.projection[0]
    open_format_datasets = sum(
        1 for r in records if any(d.format_norm in open_formats for d in r.distributions)
    )
    return {
        "open_ratio": RatioResult("open_ratio", sum(1 for p in portals if p.open_api), len(portals)),
        "dcat_ratio": RatioResult("dcat_ratio", sum(1 for p in portals if p.api_kind == "dcat"), len(portals)),
        "open_format_ratio": RatioResult("open_format_ratio", open_format_datasets, len(records)),
    }


def format_histogram(registry: LandscapeRegistry) -> dict:
    counts = Counter(d.format_norm or "unknown" for r in registry.projection[0] for d in r.distributions)
    return dict(sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])))


def split_namespace(iri: str) -> str:
    cut = max(iri.rfind("#"), iri.rfind("/"))
    return iri[: cut + 1] if cut >= 0 else iri


def namespace_distribution(registry: LandscapeRegistry) -> NamespaceDistribution:
    """Namespace counts over predicate IRIs and rdf:type object IRIs."""
    counts: Counter = Counter()
    relative = 0

    def count(term):
        nonlocal relative
        iri = str(term)
        if ":" not in iri.split("/", 1)[0]:
            relative += 1
            return
        counts[split_namespace(iri)] += 1

    for _, p, o in registry.merged.triples:
        count(p)
        if p == RDF.type and isinstance(o, URIRef):
            count(o)
    ordered = dict(sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])))
    return NamespaceDistribution(ordered, relative)


# -- legal -------------------------------------------------------------------

def license_ratios(registry: LandscapeRegistry, open_licenses=None) -> dict:
    open_licenses = default_open_licenses() if open_licenses is None else frozenset(open_licenses)
    dists = [d for r in registry.projection[0] for d in r.distributions]
    licensed = sum(1 for d in dists if d.license_ref is not None)
    opened = sum(1 for d in dists if d.license_is_iri and d.license_ref in open_licenses)
    return {
        "license_ratio": RatioResult("license_ratio", licensed, len(dists)),
        "open_license_ratio": RatioResult("open_license_ratio", opened, len(dists)),
    }


# -- findability -------------------------------------------------------------

def replica_ratio(registry: LandscapeRegistry, variant: str = "prose") -> RatioResult:
    """Share of datasets reachable through an access URL seen under two catalogs.

    ``variant="prose"`` flags a URL once it appears on datasets of two
    different catalog nodes. ``variant="listing"`` only considers URLs of
    datasets that are themselves registered under two catalog nodes.
    """
    if variant not in ("prose", "listing"):
        raise ValueError(f"unknown replica variant {variant!r}")
    chain = list(_join_chain(registry.merged.index))
    all_datasets = {ds for _, ds, _, _ in chain}

    if variant == "prose":
        url_catalogs = defaultdict(set)
        for cat, _, _, url in chain:
            url_catalogs[url].add(cat)
        shared = {u for u, cats in url_catalogs.items() if len(cats) > 1}
    else:
        ds_catalogs = defaultdict(set)
        for cat, ds, _, _ in chain:
            ds_catalogs[ds].add(cat)
        shared = {url for _, ds, _, url in chain if len(ds_catalogs[ds]) > 1}

    replicas = {ds for _, ds, _, url in chain if url in shared}
    return RatioResult(f"replica_ratio_{variant}" if variant != "prose" else "replica_ratio",
                       len(replicas), len(all_datasets))


def keyword_information_content(keyword_sets: list, freq: Counter, n: int) -> list[float]:
    out = []
    for ks in keyword_sets:
        if not ks:
            out.append(0.0)
            continue
        w = 1.0 / len(ks)
        out.append(0.0 - math.fsum(w * math.log(freq[k] / n) for k in ks))
    return out


def min_max(values: list[float]) -> list[float]:
    if not values:
        return []
    lo, hi = min(values), max(values)
    if hi == lo:
        return [0.0] * len(values)
    span = hi - lo
    return [(v - lo) / span for v in values]


def keyword_ic(registry: LandscapeRegistry, records: list[DatasetRecord] | None = None) -> KeywordICResult:
    """Mean information content of each dataset's keywords, min-max scaled.

    Keywords compare case-insensitively; a keyword attached twice to the
    same dataset (in different casing) counts once for that dataset.
    """
    if records is None:
        records = registry.projection[0]
    keyword_sets = [sorted({k.casefold() for k in r.keywords}) for r in records]
    freq = Counter(k for ks in keyword_sets for k in ks)
    n = max(freq.values(), default=0)
    raw = keyword_information_content(keyword_sets, freq, n) if n else [0.0] * len(records)
    norm = min_max(raw)
    per_dataset = {r.node: (a, b) for r, a, b in zip(records, raw, norm)}
    mean = math.fsum(norm) / len(norm) if norm else None
    return KeywordICResult(per_dataset=per_dataset, mean_normalized=mean, max_frequency=n)


# -- completeness ------------------------------------------------------------

def has_mandatory(r: DatasetRecord) -> bool:
    return bool(r.title) and bool(r.description)


def has_recommended(r: DatasetRecord) -> bool:
    return (r.has_distribution and bool(r.keywords) and r.temporal and r.contact_point
            and r.spatial and r.publisher)


def completeness(registry: LandscapeRegistry) -> dict:
    records = registry.projection[0]
    return {
        "mandatory": RatioResult("completeness_mandatory", sum(map(has_mandatory, records)), len(records)),
        "recommended": RatioResult("completeness_recommended", sum(map(has_recommended, records)), len(records)),
    }


# -- freshness ---------------------------------------------------------------

def months_between(earlier, later) -> tuple[int, bool]:
    """Whole 30.44-day months from ``earlier`` to ``later``; (0, True) if in the future."""
    days = (later - earlier).days
    if days < 0:
        return 0, True
    # exact: 761 // 30.44 is 24.0 in binary floating point
    return int(days // _MONTH), False


def freshness(registry: LandscapeRegistry, scope: str | None = None) -> FreshnessDistribution:
    """Months since issue / modification relative to the crawl date.

    ``scope`` is a portal id; ``None`` covers the whole landscape against
    the latest crawl date.
    """
    if scope is None:
        graph = registry.merged
        records = registry.projection[0]
    else:
        graph = registry.catalog_for(scope)
        if graph is None:
            raise KeyError(f"no catalog for portal {scope!r}")
        records = project_datasets(graph)
    crawl = graph.crawl_date
    result = FreshnessDistribution([], [], scope=scope or "all")
    for r in records:
        for attr, bucket, missing in (("issued", result.months_since_issued, "missing_issued"),
                                      ("modified", result.months_since_modified, "missing_modified")):
            when = getattr(r, attr)
            if when is None:
                setattr(result, missing, getattr(result, missing) + 1)
                continue
            months, clamped = months_between(when, crawl)
            result.clamped_future += clamped
            bucket.append(months)
    return result
