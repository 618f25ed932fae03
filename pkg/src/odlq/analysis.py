"""Run every metric over a registry and assemble the quality report."""

from __future__ import annotations

import datetime as dt
import hashlib
import json
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import metrics as M
from .accessibility import (
    ProbeCache,
    ProbeConfig,
    accessibility_ratio,
    probe_all,
    status_histogram,
    url_accessibility_ratio,
)
from .model import (
    LandscapeRegistry,
    _data_path,
    default_open_formats,
    default_open_licenses,
    project_datasets,
    read_token_list,
)
from .report import QualityReport, assemble, skipped
from .topics import build_corpus, fit_lda, top_terms

DEFAULT_SEED = 20210601


@dataclass
class LDAConfig:
    k: int = 6
    iterations: int = 1000
    field: str = "title"
    stopwords: str = "de"
    alpha: float | None = None
    beta: float = 0.01
    per_topic: int = 10


@dataclass
class AnalysisConfig:
    open_format_list_path: str | None = None
    open_license_list_path: str | None = None
    loco_table_path: str | None = None
    offline: bool = False
    seed: int = DEFAULT_SEED
    lda: LDAConfig = field(default_factory=LDAConfig)
    topics: bool = True
    probe: ProbeConfig = field(default_factory=ProbeConfig)
    probe_cache_path: str | None = None
    probe_cache_ttl_days: int = 7
    probe_date: dt.date | None = None
    # portal ids that get their own freshness / keyword-IC distributions
    scopes: tuple | None = None

    def open_formats(self) -> frozenset:
        if self.open_format_list_path is None:
            return default_open_formats()
        return frozenset(read_token_list(self.open_format_list_path))

    def open_licenses(self) -> frozenset:
        if self.open_license_list_path is None:
            return default_open_licenses()
        return frozenset(read_token_list(self.open_license_list_path))

    def loco(self) -> dict:
        return M.load_loco_table(self.loco_table_path or _data_path("nuts_de.csv"))

    def fingerprint(self) -> dict:
        """Content-level view of the configuration (no file paths)."""
        fp = {
            "open_formats": sorted(self.open_formats()),
            "open_licenses": sorted(self.open_licenses()),
            "loco": {str(k): v for k, v in sorted(self.loco().items())},
            "offline": self.offline,
            "seed": self.seed,
            "lda": asdict(self.lda) if self.topics else None,
        }
        if not self.offline:
            fp["probe"] = asdict(self.probe)
        return fp

    def config_hash(self) -> str:
        blob = json.dumps(self.fingerprint(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def _stats(s: M.SummaryStats | None) -> dict | None:
    return None if s is None else {"mean": s.mean, "std": s.std, "max": s.max, "min": s.min, "count": s.count}


def _frac(f) -> dict:
    return {"numerator": f.numerator, "denominator": f.denominator}


def key_data_section(kd: M.KeyData) -> dict:
    means = kd.per_portal_means
    return {
        "datasets": kd.dataset_count,
        "distributions": kd.distribution_count,
        "access_urls": kd.access_url_count,
        "catalogs": kd.catalog_count,
        "per_portal_means": None if means is None else [_frac(m) for m in means],
    }


def uniqueness_section(u: M.UniquenessResult) -> dict:
    return {
        "per_property": {p: _stats(s) for p, s in u.per_property.items()},
        "compound": _stats(u.compound),
        "duplicates_removed": u.duplicates_removed,
        "without_properties": u.without_properties,
    }


def freshness_block(f: M.FreshnessDistribution) -> dict:
    return {
        "issued": {"months": sorted(f.months_since_issued), "missing": f.missing_issued,
                   "quartiles": f.quartiles(f.months_since_issued)},
        "modified": {"months": sorted(f.months_since_modified), "missing": f.missing_modified,
                     "quartiles": f.quartiles(f.months_since_modified)},
        "clamped_future": f.clamped_future,
    }


def _scopes(registry: LandscapeRegistry, config: AnalysisConfig) -> list:
    if config.scopes is not None:
        return [s for s in config.scopes if registry.catalog_for(s) is not None]
    return [c.source_portal for c in registry.merged_catalogs] if len(registry.merged_catalogs) > 1 else []


def topics_section(registry: LandscapeRegistry, config: AnalysisConfig) -> dict:
    lda = config.lda
    corpus = build_corpus(registry, lda.field, lda.stopwords)
    if len(corpus) == 0:
        return skipped("empty corpus")
    if len(corpus.vocabulary) < lda.k:
        return skipped(f"vocabulary of {len(corpus.vocabulary)} terms is smaller than k={lda.k}")
    model = fit_lda(corpus, k=lda.k, iterations=lda.iterations, seed=config.seed, alpha=lda.alpha, beta=lda.beta)
    return {
        "k": model.k,
        "iterations": model.iterations,
        "seed": model.seed,
        "alpha": model.alpha,
        "beta": model.beta,
        "field": lda.field,
        "stopwords": lda.stopwords,
        "documents": len(corpus),
        "dropped_documents": corpus.dropped,
        "vocabulary": len(corpus.vocabulary),
        "perplexity": model.perplexity,
        "topics": [
            {"topic": t, "terms": [{"term": w, "count": c, "weight": wt} for w, c, wt in terms]}
            for t, terms in top_terms(model, lda.per_topic)
        ],
    }


def accessibility_section(registry: LandscapeRegistry, config: AnalysisConfig) -> dict:
    if config.offline:
        return skipped("network disabled")
    dists = [d for r in registry.projection[0] for d in r.distributions]
    urls = {d.access_url for d in dists if d.access_url}
    cache = ProbeCache(config.probe_cache_path, config.probe_cache_ttl_days) if config.probe_cache_path else None
    results = probe_all(urls, config.probe, cache=cache, today=config.probe_date)
    if cache is not None:
        cache.save()
    return {
        "ratio": accessibility_ratio(results, dists).to_dict(),
        "url_ratio": url_accessibility_ratio(results).to_dict(),
        "histogram": status_histogram(results),
        "probed_urls": len(results),
        "outcomes": dict(sorted(Counter(r.outcome for r in results).items())),
    }


def compute_sections(registry: LandscapeRegistry, config: AnalysisConfig) -> tuple[dict, Counter]:
    diag: Counter = Counter(registry.projection[1])
    records = registry.projection[0]
    sections: dict = {}

    sections["key_data"] = key_data_section(M.key_data(registry))

    if config.topics:
        sections["topics"] = topics_section(registry, config)
    else:
        sections["topics"] = skipped("disabled by configuration")

    scopes = _scopes(registry, config)
    fresh = {"all": freshness_block(M.freshness(registry))}
    for s in scopes:
        fresh[s] = freshness_block(M.freshness(registry, s))
    sections["freshness"] = {"days_per_month": M.DAYS_PER_MONTH, "scopes": fresh}

    if registry.portals:
        loco = config.loco()
        sections["location_coverage"] = {
            "all": [r.to_dict() for r in M.location_coverage(registry, loco, diagnostics=diag)],
            "api_only": [r.to_dict() for r in M.location_coverage(registry, loco, api_only=True)],
        }
    else:
        sections["location_coverage"] = skipped("no portal list in registry")

    sections["uniqueness"] = uniqueness_section(M.uniqueness(registry))

    interop = M.interoperability_ratios(registry, config.open_formats())
    sections["interoperability"] = {k: v.to_dict() for k, v in interop.items()}

    lic = M.license_ratios(registry, config.open_licenses())
    sections["license"] = {k: v.to_dict() for k, v in lic.items()}

    ic = M.keyword_ic(registry)
    ic_scopes = {"all": sorted(n for _, n in ic.per_dataset.values())}
    for s in scopes:
        sub = M.keyword_ic(registry, project_datasets(registry.catalog_for(s)))
        ic_scopes[s] = sorted(n for _, n in sub.per_dataset.values())
    normalized = [n for _, n in ic.per_dataset.values()]
    sections["findability"] = {
        "replica": M.replica_ratio(registry).to_dict(),
        "replica_listing": M.replica_ratio(registry, variant="listing").to_dict(),
        "keyword_ic": {
            "mean_normalized": ic.mean_normalized,
            "max_frequency": ic.max_frequency,
            "log_base": "e",
            "summary": _stats(M.SummaryStats.of(normalized)),
            "normalized_by_scope": ic_scopes,
        },
        "accessibility": accessibility_section(registry, config),
    }

    comp = M.completeness(registry)
    sections["completeness"] = {k: v.to_dict() for k, v in comp.items()}

    ns = M.namespace_distribution(registry)
    sections["namespaces"] = {"counts": ns.counts, "relative_iris": ns.relative_iris}
    sections["format_histogram"] = {"counts": M.format_histogram(registry)}

    diag["datasets_projected"] = len(records)
    return sections, diag


def analyze(registry: LandscapeRegistry, config: AnalysisConfig | None = None) -> QualityReport:
    config = config or AnalysisConfig()
    sections, diag = compute_sections(registry, config)
    inputs = {
        "portals": len(registry.portals),
        "catalogs": [
            {"portal": c.source_portal, "catalog_iri": str(c.catalog_iri), "triples": len(c),
             "crawl_date": c.crawl_date.isoformat()}
            for c in registry.merged_catalogs
        ],
        "config": config.fingerprint(),
    }
    crawl_dates = {c.source_portal: c.crawl_date.isoformat() for c in registry.merged_catalogs}
    return assemble(registry.landscape_id, crawl_dates, sections, config_hash=config.config_hash(),
                    inputs=inputs, diagnostics=dict(diag))


def write_report(report: QualityReport, out_dir) -> list[Path]:
    from .report import render

    written = []
    for fmt in ("json", "markdown", "csv-bundle"):
        written += render(report, fmt, out_dir)
    return written
