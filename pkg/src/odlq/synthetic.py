"""Seeded synthetic landscapes for oracle checks and demos.

The generator plants the awkward cases real portals produce: exact
duplicate datasets, access URLs shared across catalogs, a dataset listed by
two catalogs, blank dataset/distribution nodes, missing mandatory fields,
free-text and closed licenses, malformed and future dates, and keywords
that differ only by case.
"""

from __future__ import annotations

import datetime as dt
import random

from rdflib import BNode, Literal, URIRef
from rdflib.namespace import DCAT, DCTERMS, RDF, XSD

from .model import CatalogGraph, LandscapeRegistry, PortalDescriptor

OPEN_LICENSE = "http://dcat-ap.de/def/licenses/dl-by-de/2.0"
OPEN_LICENSE_2 = "http://dcat-ap.de/def/licenses/cc-by/4.0"
CLOSED_LICENSE = "http://dcat-ap.de/def/licenses/other-closed"

_TITLE_WORDS = ["Bebauungsplan", "Haushalt", "Wahlergebnisse", "Baumkataster", "Radwege",
                "Parkplätze", "Schulen", "Einwohner", "Luftqualität", "Fahrplan"]
_PLACES = ["Münster", "Jena", "Hamburg", "Bonn", "Köln"]
_KEYWORDS = ["verkehr", "Verkehr", "umwelt", "haushalt", "wahl", "geodaten", "bildung", "bevölkerung",
             "karte", "statistik", "energie", "kultur"]
_FORMATS = ["CSV", "text/csv", "application/json", "PDF", "application/vnd.ms-excel", "XLSX",
            "geo+json", "XML", "html", "SHP", None]
_STATUSES = [200, 200, 200, 404, 500, 403, 301, "timeout"]


def _date_lit(rng: random.Random, crawl: dt.date) -> Literal:
    roll = rng.random()
    if roll < 0.07:
        return Literal("not a date")
    if roll < 0.12:
        return Literal((crawl + dt.timedelta(days=rng.randint(1, 40))).isoformat(), datatype=XSD.date)
    d = crawl - dt.timedelta(days=rng.randint(0, 2000))
    if rng.random() < 0.5:
        return Literal(f"{d.isoformat()}T12:00:00", datatype=XSD.dateTime)
    return Literal(d.isoformat(), datatype=XSD.date)


def synthetic_landscape(seed: int, n_datasets: int = 80, n_catalogs: int = 3,
                        crawl_date: dt.date = dt.date(2021, 6, 1),
                        file_hosts: list | None = None) -> tuple[LandscapeRegistry, dict]:
    """Registry of at most ``n_datasets`` datasets plus a URL -> planted status map.

    Statuses are ints, ``"timeout"``, or ``("redirect", code)`` for a
    301 hop that ends in ``code``. ``file_hosts`` are the URL prefixes
    access URLs are drawn from (five example.org-style hosts by default).
    """
    rng = random.Random(seed)
    hosts = file_hosts or [f"http://files{i}.example" for i in range(5)]
    portals = []
    per_catalog: list[list] = [[] for _ in range(n_catalogs)]
    cat_iris = [URIRef(f"http://portal{i}.example/catalog") for i in range(n_catalogs)]
    kinds = ["dcat", "ckan", "dkan"]
    nuts = ["DEA", "DEA", "DE1", "DEA12", "DE300", "DEF0C", "XX_bad"]
    for i in range(n_catalogs):
        portals.append(PortalDescriptor(f"p{i}", f"Portal {i}", f"http://portal{i}.example/",
                                        kinds[i % 3], nuts[rng.randrange(len(nuts))], "synthetic"))
    for j in range(rng.randint(1, 3)):
        portals.append(PortalDescriptor(f"w{j}", f"Website {j}", f"http://web{j}.example/", "none",
                                        rng.choice(nuts + [None]), "synthetic"))

    url_pool: list[str] = []
    statuses: dict = {}

    def new_url():
        u = f"{hosts[rng.randrange(len(hosts))].rstrip('/')}/data/{seed}/{len(url_pool)}"
        url_pool.append(u)
        s = rng.choice(_STATUSES)
        statuses[u] = ("redirect", rng.choice([200, 404])) if s == 301 else s
        return u

    created = []
    for n in range(n_datasets):
        c = rng.randrange(n_catalogs)
        triples = per_catalog[c]
        blank = rng.random() < 0.05
        ds = BNode(f"bds{seed}_{n}") if blank else URIRef(f"http://portal{c}.example/dataset/{n}")
        triples.append((cat_iris[c], DCAT.dataset, ds))
        triples.append((ds, RDF.type, DCAT.Dataset))

        # planted exact duplicate of an earlier dataset (different node, same values and URLs)
        if created and rng.random() < 0.08:
            src_triples, src_node = rng.choice(created)
            for s, p, o in src_triples:
                if s == src_node:
                    triples.append((ds, p, o))
                elif p == DCAT.distribution:
                    triples.append((ds, p, o))
            created.append(([t for t in triples if t[0] == ds], ds))
            continue

        own = []
        if rng.random() < 0.9:
            own.append((ds, DCTERMS.identifier, Literal(f"id-{n if rng.random() < 0.95 else 0}")))
        if rng.random() < 0.93:
            title = f"{rng.choice(_TITLE_WORDS)} {rng.choice(_PLACES)}"
            if rng.random() < 0.5:
                title += f" {rng.randint(2015, 2021)}"
            own.append((ds, DCTERMS.title, Literal(title)))
        if rng.random() < 0.8:
            desc = rng.choice(["Keine Beschreibung", f"Daten zu {rng.choice(_TITLE_WORDS)}",
                               f"Datensatz {n} der Stadt {rng.choice(_PLACES)}"])
            own.append((ds, DCTERMS.description, Literal(desc)))
        elif rng.random() < 0.3:
            own.append((ds, DCTERMS.description, Literal("   ")))
        for kw in rng.sample(_KEYWORDS, rng.randint(0, 4)):
            own.append((ds, DCAT.keyword, Literal(kw)))
        if rng.random() < 0.85:
            own.append((ds, DCTERMS.issued, _date_lit(rng, crawl_date)))
        if rng.random() < 0.75:
            own.append((ds, DCTERMS.modified, _date_lit(rng, crawl_date)))
        for pred, p in ((DCAT.contactPoint, 0.7), (DCTERMS.publisher, 0.8), (DCTERMS.spatial, 0.6),
                        (DCTERMS.temporal, 0.5)):
            if rng.random() < p:
                own.append((ds, pred, BNode(f"{pred.split('#')[-1].split('/')[-1]}{seed}_{n}")))

        for k in range(rng.choice([0, 1, 1, 2, 3])):
            dist = (BNode(f"bdist{seed}_{n}_{k}") if rng.random() < 0.05
                    else URIRef(f"http://portal{c}.example/dataset/{n}/dist/{k}"))
            own.append((ds, DCAT.distribution, dist))
            own.append((dist, RDF.type, DCAT.Distribution))
            if rng.random() < 0.92:
                url = rng.choice(url_pool) if url_pool and rng.random() < 0.15 else new_url()
                own.append((dist, DCAT.accessURL, URIRef(url)))
            fmt = rng.choice(_FORMATS)
            if fmt is not None:
                own.append((dist, DCTERMS.format, Literal(fmt)))
            lic = rng.random()
            if lic < 0.55:
                own.append((dist, DCTERMS.license, URIRef(OPEN_LICENSE)))
            elif lic < 0.7:
                own.append((dist, DCTERMS.license, URIRef(OPEN_LICENSE_2)))
            elif lic < 0.8:
                own.append((dist, DCTERMS.license, URIRef(CLOSED_LICENSE)))
            elif lic < 0.9:
                own.append((dist, DCTERMS.license, Literal(rng.choice(["None", "Not specified"]))))
        triples.extend(own)
        created.append((own, ds))

        # the same dataset node registered by a second catalog
        if not blank and n_catalogs > 1 and rng.random() < 0.05:
            other = (c + 1 + rng.randrange(n_catalogs - 1)) % n_catalogs
            per_catalog[other].append((cat_iris[other], DCAT.dataset, ds))

    catalogs = []
    for i in range(n_catalogs):
        triples = per_catalog[i] + [(cat_iris[i], RDF.type, DCAT.Catalog)]
        catalogs.append(CatalogGraph(cat_iris[i], frozenset(triples), f"p{i}",
                                     crawl_date - dt.timedelta(days=rng.randint(0, 2))))
    registry = LandscapeRegistry("synthetic", tuple(portals))
    for c in catalogs:
        registry = registry.with_catalog(c)
    return registry, statuses


_TITLE_EXTRA = ["Stadt", "Kreis", "Bezirk", "Liste", "Standorte", "Statistik", "Bericht", "Karte", "Daten",
                "Ergebnisse", "Verzeichnis", "Übersicht", "Messwerte", "Plan", "Zählung", "Förderung"]


def synthetic_titles(n: int, seed: int = 0) -> list[tuple[str, str]]:
    """``n`` German-looking dataset titles as ``(doc_id, title)`` pairs."""
    rng = random.Random(seed)
    out = []
    for i in range(n):
        words = [rng.choice(_TITLE_WORDS), rng.choice(_PLACES)]
        words += rng.sample(_TITLE_EXTRA, rng.randint(1, 4))
        if rng.random() < 0.4:
            words.append(str(rng.randint(2010, 2021)))
        rng.shuffle(words)
        out.append((f"doc{i:05d}", " ".join(words)))
    return out
