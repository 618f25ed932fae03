import datetime as dt

import pytest
from rdflib import BNode, Literal, URIRef
from rdflib.namespace import DCAT, DCTERMS, RDF

from odlq.metrics import load_loco_table
from odlq.model import CatalogGraph, LandscapeRegistry, PortalDescriptor, _data_path

CRAWL = dt.date(2021, 6, 1)


def iri(s: str) -> URIRef:
    return URIRef(s if "://" in s else f"http://ex.org/{s}")


def dataset(cat, name, *, title=None, description=None, identifier=None, keywords=(), issued=None,
            modified=None, dists=(), extra=()):
    """Triples for one dataset; ``dists`` items are dicts with url/format/license/node."""
    ds = iri(name) if not isinstance(name, BNode) else name
    t = [(cat, DCAT.dataset, ds), (ds, RDF.type, DCAT.Dataset)]
    for pred, val in ((DCTERMS.title, title), (DCTERMS.description, description),
                      (DCTERMS.identifier, identifier), (DCTERMS.issued, issued), (DCTERMS.modified, modified)):
        if val is not None:
            t.append((ds, pred, Literal(val)))
    t += [(ds, DCAT.keyword, Literal(k)) for k in keywords]
    for pred in extra:
        t.append((ds, pred, BNode()))
    for i, d in enumerate(dists):
        node = d.get("node") or iri(f"{name}/d{i}")
        t += [(ds, DCAT.distribution, node), (node, RDF.type, DCAT.Distribution)]
        if d.get("url"):
            t.append((node, DCAT.accessURL, URIRef(d["url"])))
        if d.get("format"):
            t.append((node, DCTERMS.format, Literal(d["format"])))
        lic = d.get("license")
        if lic is not None:
            t.append((node, DCTERMS.license, URIRef(lic) if "://" in lic else Literal(lic)))
    return t


def catalog(name, triples, portal=None, crawl_date=CRAWL) -> CatalogGraph:
    cat = iri(name)
    return CatalogGraph(cat, frozenset(list(triples) + [(cat, RDF.type, DCAT.Catalog)]), portal or name, crawl_date)


def registry_of(*catalogs, portals=None) -> LandscapeRegistry:
    if portals is None:
        portals = [PortalDescriptor(c.source_portal, c.source_portal, f"http://{c.source_portal}.example/", "dcat",
                                    None, "test") for c in catalogs]
    reg = LandscapeRegistry("test", tuple(portals))
    for c in catalogs:
        reg = reg.with_catalog(c)
    return reg


@pytest.fixture
def loco():
    return load_loco_table(_data_path("nuts_de.csv"))


# -- acceptance summary ----------------------------------------------------------

ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
