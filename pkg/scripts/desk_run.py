"""Desk-scale experiment: synthetic 5-community graph, full-precision vs GNAQ vs ablations.

    python scripts/desk_run.py [workdir]
"""
import sys
import time

from gnaq.experiments import ABLATIONS, desk_pipeline

if __name__ == "__main__":
    workdir = sys.argv[1] if len(sys.argv) > 1 else "desk_run"
    t = time.perf_counter()
    reports = desk_pipeline(workdir, ablations=tuple(ABLATIONS))
    print(f"{'run':<14}{'R@10':>8}{'R@20':>8}{'N@10':>8}{'N@20':>8}")
    for name, r in reports.items():
        print(f"{name:<14}{r['recall']['10']:>8.4f}{r['recall']['20']:>8.4f}"
              f"{r['ndcg']['10']:>8.4f}{r['ndcg']['20']:>8.4f}")
    print(f"elapsed {time.perf_counter() - t:.1f}s; artifacts in {workdir}/")
