"""Time the compiled core against the NumPy fallback on the hot kernels.

    python3 benchmarks/bench_core.py [--repeat N] [--json out.json]
"""
import argparse
import json
import sys
import timeit

import numpy as np

from sgflow import _fallback

try:
    from sgflow import _core
except ImportError:
    _core = None


def cases():
    rng = np.random.default_rng(0)
    z = np.linspace(-36, 36, 18433)
    nodes, weights = rng.uniform(0, 8, 256), rng.normal(size=256)
    vals, slopes = rng.normal(size=18433), rng.normal(size=18433)
    zq = rng.uniform(-40, 40, 200_000)
    kappa = rng.normal(size=4096)
    x = np.linspace(-8, 8, 1024)
    cum = np.cumsum(rng.uniform(size=(40, 4097)), axis=1) / 256
    w = rng.uniform(size=(24, 40))
    radii = np.geomspace(1 / 64, 1, 24)
    centers = np.linspace(-6, 6, 769)
    return {
        "trig_sums": lambda m: m.trig_sums(z, nodes, weights, False),
        "hermite_eval": lambda m: m.hermite_eval(vals, slopes, -36.0, 1 / 256, zq, 0),
        "ramp_sum": lambda m: m.ramp_sum(x, -8.0, 1 / 256, kappa, vals, slopes, -36.0, 1 / 256,
                                         0.05, 0),
        "ball_scan_1d": lambda m: m.ball_scan_1d(cum, -8.0, 1 / 256, w, radii, centers, 1.0),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", help="also write the timings here")
    args = ap.parse_args(argv)
    if _core is None:
        print("compiled core not built; only the fallback is available", file=sys.stderr)
    rows = []
    print(f"{'kernel':14s} {'fallback [s]':>13s} {'core [s]':>10s} {'speedup':>8s} {'max diff':>10s}")
    for name, fn in cases().items():
        t_py = min(timeit.repeat(lambda: fn(_fallback), number=1, repeat=args.repeat))
        row = {"kernel": name, "fallback_s": t_py, "core_s": None, "speedup": None, "max_diff": None}
        if _core is not None:
            t_c = min(timeit.repeat(lambda: fn(_core), number=1, repeat=args.repeat))
            diff = float(np.max(np.abs(fn(_core) - fn(_fallback))))
            row.update(core_s=t_c, speedup=t_py / t_c, max_diff=diff)
            print(f"{name:14s} {t_py:13.4f} {t_c:10.4f} {t_py / t_c:8.1f} {diff:10.2e}")
        else:
            print(f"{name:14s} {t_py:13.4f} {'-':>10s}")
        rows.append(row)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
