"""Compare every metric of a registry against the brute-force oracles."""

from __future__ import annotations

import math
from fractions import Fraction

import oracles as O

from odlq import metrics as M
from odlq.model import default_open_formats, default_open_licenses, project_datasets

TOL = 1e-12


def _close(a, b):
    return math.isclose(a, b, rel_tol=0.0, abs_tol=TOL)


def _stats_match(got, values):
    want = O.stats(values)
    if got is None or want is None:
        return got is None and want is None
    return (all(_close(x, y) for x, y in zip((got.mean, got.std, got.max, got.min), want[:4]))
            and got.count == want[4])


def mismatches(registry, loco) -> list[str]:
    """Names of metrics where the implementation and the oracle disagree."""
    bad = []
    triples = sorted(registry.merged.triples, key=lambda t: tuple(map(str, t)))
    n_cat = len(registry.merged_catalogs)

    kd = M.key_data(registry)
    counts, means = O.key_data(triples, n_cat)
    if (kd.dataset_count, kd.distribution_count, kd.access_url_count) != counts or kd.per_portal_means != means:
        bad.append("key_data")

    for api_only in (False, True):
        got = {int(r.name.rsplit("_", 1)[1]): (r.numerator, r.denominator)
               for r in M.location_coverage(registry, loco, api_only=api_only)}
        if got != O.location_coverage(registry.portals, loco, api_only):
            bad.append(f"location_coverage(api_only={api_only})")

    u = M.uniqueness(registry)
    per_prop, compound, removed = O.uniqueness(triples)
    for prop, values in per_prop.items():
        if not _stats_match(u.per_property[prop], values):
            bad.append(f"uniqueness.{prop}")
    if not _stats_match(u.compound, compound) or u.duplicates_removed != removed:
        bad.append("uniqueness.compound")

    open_formats = default_open_formats()
    interop = M.interoperability_ratios(registry, open_formats)
    if (interop["open_format_ratio"].numerator, interop["open_format_ratio"].denominator) != \
            O.open_format_ratio(triples, open_formats):
        bad.append("open_format_ratio")
    portals = registry.portals
    if interop["open_ratio"].value != Fraction(sum(p.api_kind != "none" for p in portals), len(portals)):
        bad.append("open_ratio")
    if interop["dcat_ratio"].value != Fraction(sum(p.api_kind == "dcat" for p in portals), len(portals)):
        bad.append("dcat_ratio")
    if M.format_histogram(registry) != O.format_histogram(triples):
        bad.append("format_histogram")
    if M.namespace_distribution(registry).counts != O.namespaces(triples):
        bad.append("namespaces")

    lic = M.license_ratios(registry, default_open_licenses())
    lr, olr = O.license_ratios(triples, default_open_licenses())
    if (lic["license_ratio"].numerator, lic["license_ratio"].denominator) != lr:
        bad.append("license_ratio")
    if (lic["open_license_ratio"].numerator, lic["open_license_ratio"].denominator) != olr:
        bad.append("open_license_ratio")

    for variant in ("prose", "listing"):
        r = M.replica_ratio(registry, variant)
        if (r.numerator, r.denominator) != O.replica_ratio(triples, variant):
            bad.append(f"replica_ratio.{variant}")

    ic = M.keyword_ic(registry)
    raw, norm = O.keyword_ic(triples)
    if set(ic.per_dataset) != set(raw) or not all(
            _close(ic.per_dataset[ds][0], raw[ds]) and _close(ic.per_dataset[ds][1], norm[ds]) for ds in raw):
        bad.append("keyword_ic")

    comp = M.completeness(registry)
    mand, rec = O.completeness(triples)
    if (comp["mandatory"].numerator, comp["mandatory"].denominator) != mand:
        bad.append("completeness.mandatory")
    if (comp["recommended"].numerator, comp["recommended"].denominator) != rec:
        bad.append("completeness.recommended")

    fr = M.freshness(registry)
    want = O.freshness(triples, max(c.crawl_date for c in registry.merged_catalogs))
    if sorted(fr.months_since_issued) != want["issued"] or sorted(fr.months_since_modified) != want["modified"]:
        bad.append("freshness")
    for c in registry.merged_catalogs:
        got = M.freshness(registry, c.source_portal)
        sub = O.freshness(sorted(c.triples, key=lambda t: tuple(map(str, t))), c.crawl_date)
        if sorted(got.months_since_issued) != sub["issued"] or sorted(got.months_since_modified) != sub["modified"]:
            bad.append(f"freshness[{c.source_portal}]")
        if len(project_datasets(c)) != len(O.dataset_nodes(c.triples)):
            bad.append(f"projection[{c.source_portal}]")
    return bad
