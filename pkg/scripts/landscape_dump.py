"""Compute the headline numbers on the published German landscape Turtle dump.

Pass the dump file or a directory of ``*.ttl`` files. Accessibility is not
computed here; the live web has moved on since the dump was made.
"""

import argparse
import datetime as dt
import time
from pathlib import Path

from odlq import metrics as M
from odlq.model import (
    LandscapeRegistry,
    PortalDescriptor,
    default_open_formats,
    default_open_licenses,
    read_catalog,
)


def load(path: Path, crawl_date: dt.date) -> LandscapeRegistry:
    files = sorted(path.glob("*.ttl")) + sorted(path.glob("*.nt")) if path.is_dir() else [path]
    reg = LandscapeRegistry("de", (PortalDescriptor("dump", "dump", "", "none"),))
    for f in files:
        print(f"loading {f}")
        reg = reg.with_catalog(read_catalog(f, crawl_date=crawl_date))
    return reg


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("dump")
    ap.add_argument("--crawl-date", type=dt.date.fromisoformat, default=dt.date(2021, 6, 1))
    args = ap.parse_args()

    t0 = time.perf_counter()
    reg = load(Path(args.dump), args.crawl_date)
    kd = M.key_data(reg)
    print(f"datasets={kd.dataset_count} distributions={kd.distribution_count} access_urls={kd.access_url_count}")
    u = M.uniqueness(reg)
    for prop, s in list(u.per_property.items()) + [("compound", u.compound)]:
        if s is not None:
            print(f"uniqueness {prop:12s} mean={s.mean:.3f} std={s.std:.3f} max={s.max:.3f} min={s.min:.3f}")
    ofr = M.interoperability_ratios(reg, default_open_formats())["open_format_ratio"]
    print(f"open format ratio {float(ofr.value):.3f}")
    for name, r in M.license_ratios(reg, default_open_licenses()).items():
        print(f"{name} {float(r.value):.3f}")
    for variant in ("prose", "listing"):
        print(f"replica ratio ({variant}) {float(M.replica_ratio(reg, variant).value):.4f}")
    print(f"mean keyword IC {M.keyword_ic(reg).mean_normalized:.3f}")
    print(f"done in {time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()
