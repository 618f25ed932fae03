"""Command line entry point: ``odlq crawl | analyze | check-urls | report | topics``."""

from __future__ import annotations

import argparse
import datetime as dt
import logging
import sys
from contextlib import contextmanager
from pathlib import Path

from filelock import FileLock, Timeout

from .accessibility import ProbeCache, ProbeConfig, probe_all, status_histogram, url_accessibility_ratio
from .analysis import DEFAULT_SEED, AnalysisConfig, LDAConfig, analyze, topics_section, write_report
from .ingest import load_rewrite_map, read_registry, run_pipeline, write_registry
from .model import LandscapeRegistry, load_portal_list
from .report import RENDER_FORMATS, QualityReport, is_skipped, render, topic_table

log = logging.getLogger("odlq")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
LOCK_NAME = ".odlq.lock"
PROBE_CACHE = "probe_cache.jsonl"


class UsageError(Exception):
    pass


@contextmanager
def registry_lock(registry_dir: Path, create: bool = False):
    if create:
        registry_dir.mkdir(parents=True, exist_ok=True)
    elif not registry_dir.is_dir():
        raise UsageError(f"--registry: {registry_dir} is not a directory")
    lock = FileLock(str(registry_dir / LOCK_NAME), timeout=0)
    try:
        with lock:
            yield
    except Timeout:
        raise UsageError(f"registry {registry_dir} is locked by another odlq process") from None


def _date(value: str) -> dt.date:
    try:
        return dt.date.fromisoformat(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an ISO date: {value!r}") from None


def _existing_file(value: str | None, flag: str) -> str | None:
    if value is not None and not Path(value).is_file():
        raise UsageError(f"{flag}: no such file {value}")
    return value


def _load_registry(args) -> LandscapeRegistry:
    root = Path(args.registry)
    if not root.is_dir():
        raise UsageError(f"--registry: {root} is not a directory")
    try:
        return read_registry(root, crawl_date=args.crawl_date)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read registry {root}: {exc}") from exc


def _analysis_config(args) -> AnalysisConfig:
    return AnalysisConfig(
        open_format_list_path=_existing_file(args.open_formats, "--open-formats"),
        open_license_list_path=_existing_file(args.open_licenses, "--open-licenses"),
        loco_table_path=_existing_file(args.loco_table, "--loco-table"),
        offline=args.offline,
        seed=args.seed,
        lda=LDAConfig(k=args.k_topics, iterations=args.iterations, field=args.topic_field,
                      stopwords=args.stopwords),
        topics=not args.no_topics,
        probe=_probe_config(args),
        probe_cache_path=str(Path(args.registry) / PROBE_CACHE),
        probe_cache_ttl_days=args.cache_ttl,
    )


def _probe_config(args) -> ProbeConfig:
    per_host = min(args.per_host, args.concurrency)
    return ProbeConfig(concurrency=args.concurrency, per_host_limit=per_host, timeout=args.timeout)


def cmd_crawl(args) -> int:
    if not args.portal_list:
        raise UsageError("crawl needs --portal-list")
    _existing_file(args.portal_list, "--portal-list")
    portals = load_portal_list(args.portal_list)
    if not portals:
        print("portal list is empty; nothing to crawl", file=sys.stderr)
        return EXIT_FAIL
    root = Path(args.registry)
    rewrite = load_rewrite_map(_existing_file(args.rewrite_map, "--rewrite-map")) if args.rewrite_map else {}
    with registry_lock(root, create=True):
        registry = read_registry(root, crawl_date=args.crawl_date) if (root / "catalogs").is_dir() else None
        ids = sorted({p.landscape_id for p in portals if p.landscape_id})
        base = LandscapeRegistry("+".join(ids) or root.name, tuple(portals),
                                 tuple(c for c in (registry.merged_catalogs if registry else ())
                                       if c.source_portal in {p.id for p in portals}))
        run = run_pipeline(base, concurrency=args.concurrency, page_size=args.page_size,
                           max_retries=args.retries, timeout=args.timeout, backoff=args.backoff,
                           crawl_date=args.crawl_date, rewrite_map=rewrite)
        write_registry(run.registry, root)
    for pid in run.succeeded:
        rlog = run.repair_logs[pid]
        print(f"ok    {pid}: removed_lines={rlog.removed_lines} repaired_iris={rlog.repaired_iris} "
              f"skipped_packages={rlog.skipped_packages}")
    for pid, err in sorted(run.failures.items()):
        print(f"FAIL  {pid}: {err}")
    if not run.succeeded:
        print("no portal was harvested successfully", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_analyze(args) -> int:
    config = _analysis_config(args)
    with registry_lock(Path(args.registry)):
        registry = _load_registry(args)
        report = analyze(registry, config)
        out = Path(args.report_dir or Path(args.registry) / "report")
        write_report(report, out)
    print(f"report written to {out}")
    return EXIT_OK


def cmd_check_urls(args) -> int:
    with registry_lock(Path(args.registry)):
        registry = _load_registry(args)
        urls = {d.access_url for r in registry.projection[0] for d in r.distributions if d.access_url}
        cache = ProbeCache(Path(args.registry) / PROBE_CACHE, args.cache_ttl)
        today = dt.date.today()
        hits = {u for u in urls if cache.get(u, today) is not None}
        results = probe_all(urls, _probe_config(args), cache=cache, today=today)
        cache.save()
    fresh = [r for r in results if r.url not in hits]
    hist = status_histogram(results)
    for cls, n in hist.items():
        print(f"{cls:12s} {n}")
    ratio = url_accessibility_ratio(results)
    print(f"working URLs: {ratio.numerator}/{ratio.denominator}")
    if fresh and all(r.outcome == "connection_error" for r in fresh):
        print("network unavailable: every probe failed to connect", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_report(args) -> int:
    out = Path(args.report_dir or Path(args.registry) / "report")
    src = out / "report.json"
    if not src.is_file():
        raise UsageError(f"no report.json in {out}; run analyze first")
    report = QualityReport.from_json(src.read_text(encoding="utf-8"))
    for fmt in args.format or RENDER_FORMATS:
        for p in render(report, fmt, out):
            print(p)
    return EXIT_OK


def cmd_topics(args) -> int:
    config = _analysis_config(args)
    registry = _load_registry(args)
    section = topics_section(registry, config)
    if is_skipped(section):
        print(f"topics skipped: {section['reason']}", file=sys.stderr)
        return EXIT_FAIL
    for topic in section["topics"]:
        print(f"{topic['topic']}: " + ", ".join(t["term"] for t in topic["terms"]))
    if args.report_dir:
        out = Path(args.report_dir)
        out.mkdir(parents=True, exist_ok=True)
        holder = QualityReport("", {}, "", {}, {"topics": section})
        (out / "topics.csv").write_text(topic_table(holder), encoding="utf-8")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--registry", required=True, help="registry directory")
    common.add_argument("--portal-list", help="portal list CSV (crawl)")
    common.add_argument("--offline", action="store_true", help="skip all network probing")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--concurrency", type=int, default=4)
    common.add_argument("--per-host", type=int, default=4, help="per-host probe limit")
    common.add_argument("--timeout", type=float, default=30.0, help="seconds per request")
    common.add_argument("--k-topics", type=int, default=6)
    common.add_argument("--iterations", type=int, default=1000)
    common.add_argument("--topic-field", choices=("title", "description", "keywords"), default="title")
    common.add_argument("--stopwords", default="de", help="stopword list id (de, en, none)")
    common.add_argument("--no-topics", action="store_true")
    common.add_argument("--report-dir")
    common.add_argument("--open-licenses", help="open license IRI list")
    common.add_argument("--open-formats", help="open format token list")
    common.add_argument("--loco-table", help="CSV of level,region_count")
    common.add_argument("--crawl-date", type=_date, help="crawl date to stamp (crawl) or assume for header-less files")
    common.add_argument("--rewrite-map", help="JSON object of IRI prefix rewrites applied after harvest")
    common.add_argument("--page-size", type=int, default=100)
    common.add_argument("--retries", type=int, default=3)
    common.add_argument("--backoff", type=float, default=1.0)
    common.add_argument("--cache-ttl", type=int, default=7, help="probe cache TTL in days")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="odlq", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("crawl", parents=[common], help="harvest portals into the registry").set_defaults(func=cmd_crawl)
    sub.add_parser("analyze", parents=[common], help="compute all metrics").set_defaults(func=cmd_analyze)
    sub.add_parser("check-urls", parents=[common], help="probe access URLs").set_defaults(func=cmd_check_urls)
    rep = sub.add_parser("report", parents=[common], help="re-render an existing report.json")
    rep.add_argument("--format", action="append", choices=RENDER_FORMATS)
    rep.set_defaults(func=cmd_report)
    sub.add_parser("topics", parents=[common], help="fit the topic model only").set_defaults(func=cmd_topics)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"odlq {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
