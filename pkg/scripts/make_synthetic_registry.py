"""Write a synthetic registry directory that the CLI can analyze.

    python3 scripts/make_synthetic_registry.py out/reg --seed 3 --datasets 100
    odlq analyze --registry out/reg --offline
"""

import argparse
import json
from pathlib import Path

from odlq.ingest import write_registry
from odlq.synthetic import synthetic_landscape


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("out")
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--datasets", type=int, default=100)
    ap.add_argument("--catalogs", type=int, default=3)
    args = ap.parse_args()

    registry, statuses = synthetic_landscape(args.seed, n_datasets=args.datasets, n_catalogs=args.catalogs)
    out = Path(args.out)
    for p in write_registry(registry, out):
        print(p)
    # planted URL statuses, handy for wiring up a local file server
    (out / "planted_statuses.json").write_text(json.dumps(statuses, indent=1, sort_keys=True) + "\n")
    print(f"{len(registry.projection[0])} projected datasets, {len(statuses)} planted access URLs")


if __name__ == "__main__":
    main()
