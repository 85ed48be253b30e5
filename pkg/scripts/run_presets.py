"""Run every preset (or the ones named) to completion and summarize the outcome.

    python scripts/run_presets.py [NAME ...] [--out DIR] [--images]
"""
import argparse
import time
from pathlib import Path

from pushcrowd.engine import run
from pushcrowd.errors import CflViolation
from pushcrowd.presets import PRESETS, get_preset


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("names", nargs="*", default=list(PRESETS))
    ap.add_argument("--out", default="out")
    ap.add_argument("--images", action="store_true")
    args = ap.parse_args()
    for name in args.names:
        s = get_preset(name)
        t0 = time.perf_counter()
        try:
            res = run(s, Path(args.out) / name, images=args.images)
        except CflViolation as err:
            print(f"{name}: aborted, {err}")
            continue
        st = res.state
        parts = [f"{name}: {st.step} steps in {time.perf_counter() - t0:.0f} s"]
        for n, pop in enumerate(s.populations):
            ref = st.initial_mass[n] + st.injected[n]
            share = {t: round(m / ref, 4) for t, m in sorted(st.exited_by_target[n].items())} if ref else {}
            parts.append(f"pop {pop.id} remaining {st.mass(n):.3e}, exited by target {share}")
        print("; ".join(parts))


if __name__ == "__main__":
    main()
