"""Message totals versus fleet size for each strategy.

Runs the one-vehicle template for a sweep of fleet sizes and prints totals,
per-vehicle counts and wall time. Totals must grow exactly linearly because
worlds are independent.

    python scripts/scale_experiment.py --sizes 100 1000 10000
"""

import argparse
import json
import sys

from twinmesh.scenario import single_vehicle_template
from twinmesh.sim import scale_run
from twinmesh.strategies import StrategyKind


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--sizes", type=int, nargs="+", default=[100, 200, 400, 800])
    ap.add_argument("--strategies", nargs="+", default=[s.value for s in StrategyKind])
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--json", action="store_true", help="print machine-readable rows")
    args = ap.parse_args()

    template = single_vehicle_template()
    rows = []
    for name in args.strategies:
        for n in args.sizes:
            r = scale_run(template, n, StrategyKind(name), workers=args.workers)
            rows.append({**r.to_dict(), "wall_seconds": round(r.wall_seconds, 3)})
    if args.json:
        print(json.dumps(rows, indent=2))
        return 0
    print(f"{'strategy':<22} {'n':>7} {'messages':>10} {'per vehicle':>12} {'seconds':>8}")
    for r in rows:
        pv = r["per_vehicle_messages"]
        print(f"{r['strategy']:<22} {r['n_vehicles']:>7} {r['total_messages']:>10} {pv['min']:>12} {r['wall_seconds']:>8.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
