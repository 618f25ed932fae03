"""Quality report assembly and rendering.

The report is a plain JSON document. Ratios are stored as integer
numerator/denominator pairs and formatted only when rendered, so a report
can be parsed and re-rendered any number of times without drift.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import __version__

SCHEMA_VERSION = "1.0"

# order of the dimension tree; key_data is the only mandatory one
DIMENSIONS = (
    "key_data",
    "topics",
    "freshness",
    "location_coverage",
    "uniqueness",
    "interoperability",
    "license",
    "findability",
    "completeness",
)
AUXILIARY = ("namespaces", "format_histogram")
_META = ("schema_version", "tool", "landscape_id", "crawl_dates", "config_hash", "inputs", "diagnostics")

RENDER_FORMATS = ("json", "markdown", "csv-bundle")
PLOT_FILES = ("freshness.csv", "keyword_ic.csv", "formats.csv", "status.csv")


class AssemblyError(ValueError):
    pass


def skipped(reason: str) -> dict:
    return {"skipped": True, "reason": reason}


def is_skipped(section) -> bool:
    return isinstance(section, dict) and section.get("skipped") is True


@dataclass
class QualityReport:
    landscape_id: str
    crawl_dates: dict
    config_hash: str
    inputs: dict
    sections: dict
    diagnostics: dict = field(default_factory=dict)
    schema_version: str = SCHEMA_VERSION
    tool: dict = field(default_factory=lambda: {"name": "odlq", "version": __version__})
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "schema_version": self.schema_version,
            "tool": self.tool,
            "landscape_id": self.landscape_id,
            "crawl_dates": self.crawl_dates,
            "config_hash": self.config_hash,
            "inputs": self.inputs,
            "diagnostics": self.diagnostics,
        }
        out.update(self.sections)
        out.update(self.extra)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "QualityReport":
        known = set(DIMENSIONS) | set(AUXILIARY)
        return cls(
            landscape_id=data["landscape_id"],
            crawl_dates=data.get("crawl_dates", {}),
            config_hash=data.get("config_hash", ""),
            inputs=data.get("inputs", {}),
            sections={k: data[k] for k in data if k in known},
            diagnostics=data.get("diagnostics", {}),
            schema_version=data.get("schema_version", SCHEMA_VERSION),
            tool=data.get("tool", {}),
            extra={k: data[k] for k in data if k not in known and k not in _META},
        )

    @classmethod
    def from_json(cls, text: str) -> "QualityReport":
        return cls.from_dict(json.loads(text))


def assemble(landscape_id: str, crawl_dates: dict, sections: dict, *, config_hash: str = "",
             inputs: dict | None = None, diagnostics: dict | None = None) -> QualityReport:
    """Build a report from already-serialized metric sections.

    ``key_data`` must be present and not skipped. Any other dimension that
    is missing is recorded as skipped so the report stays self-describing.
    """
    kd = sections.get("key_data")
    if kd is None or is_skipped(kd):
        raise AssemblyError("key_data section is mandatory")
    unknown = set(sections) - set(DIMENSIONS) - set(AUXILIARY)
    if unknown:
        raise AssemblyError(f"unknown report sections: {sorted(unknown)}")
    full = {}
    for name in DIMENSIONS + AUXILIARY:
        full[name] = sections.get(name, skipped("not computed"))
    return QualityReport(
        landscape_id=landscape_id,
        crawl_dates=dict(sorted(crawl_dates.items())),
        config_hash=config_hash,
        inputs=inputs or {},
        sections=full,
        diagnostics=dict(sorted((diagnostics or {}).items())),
    )


# -- formatting ------------------------------------------------------------------

def format_ratio(numerator: int, denominator: int, places: int = 3) -> str:
    """Exact rational rounded half-up to ``places`` decimals."""
    if denominator == 0:
        return "n/a"
    scaled = Fraction(numerator * 10 ** places, denominator)
    q = int(scaled + Fraction(1, 2))  # non-negative, so floor(x + 1/2)
    whole, frac = divmod(q, 10 ** places)
    return f"{whole}.{frac:0{places}d}"


def _ratio(d: dict | None) -> str:
    if not d:
        return "n/a"
    return format_ratio(d["numerator"], d["denominator"])


def _num(x, places=3) -> str:
    return "n/a" if x is None else f"{x:.{places}f}"


def _table(header, rows) -> list[str]:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(str(c) for c in row) + " |" for row in rows]
    return lines


def render_markdown(report: QualityReport) -> str:
    s = report.sections
    out = [f"# Open Data quality report: {report.landscape_id}", ""]
    out.append(f"Schema {report.schema_version}, tool {report.tool.get('name')} {report.tool.get('version')}, "
               f"config `{report.config_hash[:12]}`.")
    if report.crawl_dates:
        out.append(f"Crawl dates: {min(report.crawl_dates.values())} to {max(report.crawl_dates.values())}.")
    out.append("")

    def section(title, name, body):
        out.append(f"## {title}")
        out.append("")
        data = s.get(name)
        if data is None or is_skipped(data):
            out.append(f"_Skipped: {data.get('reason') if data else 'not computed'}._")
        else:
            out.extend(body(data))
        out.append("")

    def key_data(d):
        means = d.get("per_portal_means")
        rows = [["All ODPs", d["datasets"], d["distributions"], d["access_urls"]]]
        if means:
            rows.append([f"Mean per ODP (/{d['catalogs']})"] + [_mean(m) for m in means])
        return _table(["", "#DCAT datasets", "#DCAT distributions", "#DCAT access URLs"], rows)

    def topics(d):
        rows = [[t["topic"], ", ".join(term["term"] for term in t["terms"])] for t in d["topics"]]
        lines = [f"k={d['k']}, iterations={d['iterations']}, seed={d['seed']}, field={d['field']}, "
                 f"perplexity={_num(d.get('perplexity'), 2)}", ""]
        return lines + _table(["Topic", "Terms"], rows)

    def freshness(d):
        rows = []
        for scope, block in d["scopes"].items():
            for ts in ("issued", "modified"):
                q = block[ts]["quartiles"]
                rows.append([scope, ts, len(block[ts]["months"]), block[ts]["missing"]]
                            + ([_num(q[k], 1) for k in ("min", "q1", "median", "q3", "max")] if q else ["n/a"] * 5))
        return _table(["Scope", "Timestamp", "n", "missing", "min", "q1", "median", "q3", "max"], rows)

    def loco(d):
        rows = [[r["name"].replace("loco_level_", "Level "), _ratio(r), f"{r['numerator']}/{r['denominator']}"]
                for r in d["all"]]
        if d.get("api_only"):
            rows += [[r["name"].replace("loco_level_", "Level ") + " (API)", _ratio(r),
                      f"{r['numerator']}/{r['denominator']}"] for r in d["api_only"]]
        return _table(["Level", "Ratio", "Covered"], rows)

    def uniq(d):
        props = ["identifier", "title", "description"]
        cols = [d["per_property"].get(p) for p in props] + [d.get("compound")]
        rows = []
        for stat in ("mean", "std", "max", "min"):
            rows.append([stat.capitalize()] + [_num(c[stat]) if c else "n/a" for c in cols])
        return _table(["", "dct:identifier", "dct:title", "dct:description", "compound"], rows) + [
            "", f"Duplicates removed: {d['duplicates_removed']}."]

    def interop(d):
        return _table(["Open-Ratio", "DCAT-Ratio", "Open-Format-Ratio"],
                      [[_ratio(d["open_ratio"]), _ratio(d["dcat_ratio"]), _ratio(d["open_format_ratio"])]])

    def lic(d):
        return _table(["License Ratio", "Open License Ratio"],
                      [[_ratio(d["license_ratio"]), _ratio(d["open_license_ratio"])]])

    def find(d):
        acc = d.get("accessibility")
        acc_text = _ratio(acc["ratio"]) if acc and not is_skipped(acc) else f"skipped ({acc.get('reason')})"
        lines = _table(["Replica Ratio", "Mean Keyword IC", "Accessibility"],
                       [[_ratio(d["replica"]), _num(d["keyword_ic"].get("mean_normalized")), acc_text]])
        if acc and not is_skipped(acc):
            lines += ["", "HTTP status classes (distinct URLs):", ""]
            lines += _table(["Class", "Count"], [[k, v] for k, v in acc["histogram"].items()])
        return lines

    def compl(d):
        return _table(["Mandatory", "Recommended"], [[_ratio(d["mandatory"]), _ratio(d["recommended"])]])

    section("Key data", "key_data", key_data)
    section("Topics", "topics", topics)
    section("Freshness (months)", "freshness", freshness)
    section("Location coverage", "location_coverage", loco)
    section("Uniqueness", "uniqueness", uniq)
    section("Interoperability", "interoperability", interop)
    section("Legal security and openness", "license", lic)
    section("Findability and accessibility", "findability", find)
    section("DCAT completeness", "completeness", compl)

    fh = s.get("format_histogram")
    if fh and not is_skipped(fh):
        out += ["## Top formats", ""] + _table(["Format", "#Distributions"], list(fh["counts"].items())[:25]) + [""]
    ns = s.get("namespaces")
    if ns and not is_skipped(ns):
        out += ["## Namespaces", ""] + _table(["Namespace", "Occurrences"], list(ns["counts"].items())) + [""]
    if report.diagnostics:
        out += ["## Diagnostics", ""] + _table(["Tally", "Count"], list(report.diagnostics.items())) + [""]
    return "\n".join(out).rstrip() + "\n"


def _mean(m: dict) -> str:
    # per-portal means print as whole numbers
    return str(int(Fraction(m["numerator"], m["denominator"]) + Fraction(1, 2)))


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def plot_tables(report: QualityReport) -> dict:
    """Figure-equivalent CSV tables keyed by file name."""
    s = report.sections
    fresh_rows = []
    fr = s.get("freshness")
    if fr and not is_skipped(fr):
        for scope, block in fr["scopes"].items():
            for ts in ("issued", "modified"):
                fresh_rows += [[scope, ts, m] for m in block[ts]["months"]]
    ic_rows = []
    fi = s.get("findability")
    if fi and not is_skipped(fi):
        for scope, values in fi["keyword_ic"].get("normalized_by_scope", {}).items():
            ic_rows += [[scope, repr(v)] for v in values]
    fmt_rows = []
    fh = s.get("format_histogram")
    if fh and not is_skipped(fh):
        fmt_rows = [[k, v] for k, v in fh["counts"].items()]
    status_rows = []
    if fi and not is_skipped(fi):
        acc = fi.get("accessibility")
        if acc and not is_skipped(acc):
            status_rows = [[k, v] for k, v in acc["histogram"].items()]
    return {
        "freshness.csv": _csv_text(["scope", "timestamp", "months"], fresh_rows),
        "keyword_ic.csv": _csv_text(["scope", "normalized_ic"], ic_rows),
        "formats.csv": _csv_text(["format", "distributions"], fmt_rows),
        "status.csv": _csv_text(["status_class", "urls"], status_rows),
    }


def topic_table(report: QualityReport) -> str | None:
    t = report.sections.get("topics")
    if not t or is_skipped(t):
        return None
    rows = [[topic["topic"], rank, term["term"], term["count"], repr(term["weight"])]
            for topic in t["topics"] for rank, term in enumerate(topic["terms"], 1)]
    return _csv_text(["topic", "rank", "term", "count", "weight"], rows)


def render(report: QualityReport, fmt: str, out_dir) -> list[Path]:
    """Write ``report.json``, ``report.md`` or ``plots/*.csv`` under ``out_dir``."""
    if fmt not in RENDER_FORMATS:
        raise ValueError(f"unknown render format {fmt!r}; choose from {RENDER_FORMATS}")
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        p = root / "report.json"
        p.write_text(report.to_json(), encoding="utf-8")
        return [p]
    if fmt == "markdown":
        p = root / "report.md"
        p.write_text(render_markdown(report), encoding="utf-8")
        return [p]
    plots = root / "plots"
    plots.mkdir(exist_ok=True)
    written = []
    for name, text in plot_tables(report).items():
        p = plots / name
        p.write_text(text, encoding="utf-8")
        written.append(p)
    topics = topic_table(report)
    if topics is not None:
        p = root / "topics.csv"
        p.write_text(topics, encoding="utf-8")
        written.append(p)
    return written
