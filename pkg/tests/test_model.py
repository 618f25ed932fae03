import datetime as dt
from collections import Counter

import pytest
from conftest import CRAWL, catalog, dataset, iri, registry_of
from hypothesis import given, settings
from hypothesis import strategies as st
from rdflib import BNode, Literal, URIRef
from rdflib.namespace import DCAT, DCTERMS, RDF

from odlq.model import (
    MERGED_CATALOG_IRI,
    CatalogGraph,
    LandscapeRegistry,
    MergeError,
    PortalDescriptor,
    load_portal_list,
    merge_catalogs,
    normalize_format,
    normalize_keywords,
    parse_date,
    project_datasets,
    read_catalog,
    serialize_catalog,
    write_catalog,
    write_portal_list,
)


def test_portal_descriptor_validation():
    p = PortalDescriptor("a", "A", "https://a.example/api", "ckan", "DEA", "de")
    assert p.open_api
    assert not PortalDescriptor("b", "B", "", "none").open_api
    with pytest.raises(ValueError):
        PortalDescriptor("c", "C", "not-a-url", "dcat")
    with pytest.raises(ValueError):
        PortalDescriptor("d", "D", "https://d.example", "sparql")


def test_registry_rejects_duplicate_portal_ids():
    p = PortalDescriptor("a", "A", "https://a.example", "dcat")
    with pytest.raises(ValueError):
        LandscapeRegistry("x", (p, p))


def test_empty_catalog_projects_to_nothing():
    assert project_datasets(catalog("c", [])) == []


def test_eight_triple_fixture():
    cat, ds, d1, d2 = iri("cat"), iri("ds"), iri("d1"), iri("d2")
    triples = [
        (cat, RDF.type, DCAT.Catalog),
        (cat, DCAT.dataset, ds),
        (ds, RDF.type, DCAT.Dataset),
        (ds, DCTERMS.title, Literal("Radwege")),
        (ds, DCAT.distribution, d1),
        (ds, DCAT.distribution, d2),
        (d1, DCAT.accessURL, URIRef("http://f.example/1")),
        (d2, DCTERMS.format, Literal("CSV")),
    ]
    assert len(triples) == 8
    recs = project_datasets(CatalogGraph(cat, frozenset(triples), "p", CRAWL))
    assert len(recs) == 1
    r = recs[0]
    assert r.title == "Radwege"
    assert len(r.distributions) == 2
    assert {d.access_url for d in r.distributions} == {"http://f.example/1", None}
    assert {d.format_norm for d in r.distributions} == {"csv", None}


def test_blank_dataset_is_excluded_and_tallied():
    diag = Counter()
    c = catalog("c", dataset(iri("c"), BNode("b"), title="x"))
    assert project_datasets(c, diag) == []
    assert diag["blank_dataset_link"] == 1


def test_malformed_dates_become_absent():
    diag = Counter()
    c = catalog("c", dataset(iri("c"), "ds", issued="yesterday", modified="2020-02-30"))
    r = project_datasets(c, diag)[0]
    assert r.issued is None and r.modified is None
    assert diag["unparseable_date"] == 2


def test_shared_distribution_has_one_owner():
    cat = iri("c")
    shared = {"node": iri("shared"), "url": "http://f.example/x"}
    c = catalog("c", dataset(cat, "a", dists=[shared]) + dataset(cat, "b", dists=[shared]))
    diag = Counter()
    a, b = project_datasets(c, diag)
    assert len(a.distributions) == 1 and b.distributions == ()
    assert b.has_distribution
    assert a.access_urls == b.access_urls == frozenset({"http://f.example/x"})
    assert diag["shared_distribution"] == 1


def test_keywords_trimmed_and_empties_dropped():
    c = catalog("c", dataset(iri("c"), "ds", keywords=[" Verkehr ", "", "   ", "verkehr"]))
    assert project_datasets(c)[0].keywords == ("Verkehr", "verkehr")
    assert normalize_keywords(["b", " a", None, ""]) == ("a", "b")


@pytest.mark.parametrize("raw,want", [
    ("CSV", "csv"), ("text/csv", "csv"), (" text/CSV; charset=utf-8", "csv"),
    ("application/vnd.ms-excel", "xls"), ("geo+json", "geojson"), ("application/geo+json", "geojson"),
    (".xlsx", "xlsx"), ("http://publications.europa.eu/resource/authority/file-type/CSV", "csv"),
    ("Shapefile", "shp"), ("Parquet", "parquet"), ("", None), (None, None),
])
def test_normalize_format(raw, want):
    assert normalize_format(raw) == want


@given(st.text(max_size=30))
def test_normalized_format_is_lowercase(raw):
    out = normalize_format(raw)
    assert out is None or out == out.lower()


@pytest.mark.parametrize("raw,want", [
    ("2021-06-01", dt.date(2021, 6, 1)),
    ("2021-06-01T10:00:00Z", dt.date(2021, 6, 1)),
    ("2021-06-01T10:00:00.123+02:00", dt.date(2021, 6, 1)),
    ("2021-13-01", None), ("01.06.2021", None), ("", None),
])
def test_parse_date(raw, want):
    assert parse_date(raw) == want


# -- merge --------------------------------------------------------------------

def test_merge_of_one_is_identity():
    c = catalog("c", dataset(iri("c"), "a", title="t"))
    assert merge_catalogs([c]).triples == c.triples


def test_merge_disjoint_is_union():
    a = CatalogGraph(iri("A"), frozenset((iri(f"s{i}"), iri("p"), Literal(i)) for i in range(10)), "a", CRAWL)
    b = CatalogGraph(iri("B"), frozenset((iri(f"t{i}"), iri("p"), Literal(i)) for i in range(15)), "b",
                     CRAWL + dt.timedelta(days=1))
    m = merge_catalogs([a, b])
    assert len(m) == 25
    assert m.catalog_iri == MERGED_CATALOG_IRI
    assert m.crawl_date == CRAWL + dt.timedelta(days=1)


def test_merge_keeps_both_catalog_links_of_shared_dataset():
    a = catalog("A", dataset(iri("A"), "shared", title="t"), portal="a")
    b = catalog("B", dataset(iri("B"), "shared", title="t"), portal="b")
    m = merge_catalogs([a, b])
    links = [t for t in m.triples if t[1] == DCAT.dataset and t[2] == iri("shared")]
    assert len(links) == 2
    rec = project_datasets(m)[0]
    assert set(rec.catalogs) == {iri("A"), iri("B")}


def test_merge_rejects_same_catalog_from_two_portals():
    a = catalog("A", dataset(iri("A"), "x"), portal="a")
    b = catalog("A", dataset(iri("A"), "y"), portal="b")
    with pytest.raises(MergeError):
        merge_catalogs([a, b])


_triple = st.tuples(st.sampled_from([iri(f"s{i}") for i in range(4)]),
                    st.sampled_from([iri("p"), DCAT.dataset, DCTERMS.title]),
                    st.sampled_from([iri(f"o{i}") for i in range(4)] + [Literal("x"), Literal("y")]))


def _cat(name, triples):
    return CatalogGraph(iri(name), frozenset(triples), name, CRAWL)


@settings(max_examples=60)
@given(st.lists(_triple, max_size=8), st.lists(_triple, max_size=8), st.lists(_triple, max_size=8))
def test_merge_associative_and_commutative(x, y, z):
    a, b, c = _cat("a", x), _cat("b", y), _cat("c", z)

    def attempt(f):
        try:
            return f().triples
        except MergeError:
            return MergeError

    ab_c = attempt(lambda: merge_catalogs([merge_catalogs([a, b]), c]))
    a_bc = attempt(lambda: merge_catalogs([a, merge_catalogs([b, c])]))
    assert ab_c == a_bc
    assert attempt(lambda: merge_catalogs([a, b])) == attempt(lambda: merge_catalogs([b, a]))


@settings(max_examples=40)
@given(st.permutations(range(6)))
def test_projection_ignores_triple_order(order):
    cat = iri("c")
    triples = []
    for i in order:
        triples += dataset(cat, f"d{i}", title=f"t{i % 2}", keywords=[f"k{i}"],
                           dists=[{"url": f"http://f.example/{i}"}])
    a = project_datasets(catalog("c", triples))
    b = project_datasets(catalog("c", sorted(triples, key=str)))
    assert a == b


def test_registry_with_catalog_replaces_previous():
    r = registry_of(catalog("c", dataset(iri("c"), "a")))
    newer = catalog("c", dataset(iri("c"), "b"))
    r2 = r.with_catalog(newer)
    assert [x.node for x in r2.projection[0]] == [iri("b")]
    assert [x.node for x in r.projection[0]] == [iri("a")]


# -- files ----------------------------------------------------------------------

@pytest.mark.parametrize("fmt", ["turtle", "nt"])
def test_catalog_round_trip(tmp_path, fmt):
    c = catalog("c", dataset(iri("c"), "a", title="Münster", keywords=["x"], extra=[DCAT.contactPoint],
                             dists=[{"url": "http://f.example/a%20b", "format": "CSV"}]))
    path = tmp_path / ("c.ttl" if fmt == "turtle" else "c.nt")
    path.write_text(serialize_catalog(c, fmt), encoding="utf-8")
    back = read_catalog(path)
    assert back.crawl_date == c.crawl_date and back.source_portal == c.source_portal
    assert project_datasets(back) == project_datasets(c)
    assert len(back) == len(c)


def test_serialization_is_byte_stable(tmp_path):
    c = catalog("c", dataset(iri("c"), "a", title="t", extra=[DCTERMS.publisher, DCTERMS.spatial]))
    p1, p2 = write_catalog(c, tmp_path / "1.ttl"), write_catalog(c, tmp_path / "2.ttl")
    assert p1.read_bytes() == p2.read_bytes()


def test_headerless_file_needs_crawl_date(tmp_path):
    p = tmp_path / "dump.ttl"
    p.write_text("<http://ex.org/c> <http://www.w3.org/ns/dcat#dataset> <http://ex.org/d> .\n")
    with pytest.raises(ValueError):
        read_catalog(p)
    c = read_catalog(p, crawl_date=CRAWL)
    assert c.crawl_date == CRAWL and len(c) == 1


def test_portal_list_round_trip(tmp_path):
    portals = [PortalDescriptor("a", "Stadt A", "https://a.example/api/3", "ckan", "DEA12", "nrw"),
               PortalDescriptor("b", "Kreis B", "", "none", None, "nrw")]
    write_portal_list(portals, tmp_path / "p.csv")
    assert load_portal_list(tmp_path / "p.csv") == portals
