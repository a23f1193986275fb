"""Compare the compiled kernels against the numpy fallback.

Run with ``python3 benchmarks/bench_kernels.py``.  Each kernel is timed on
the same inputs for both backends and the outputs are checked for agreement.
"""
import argparse
import timeit

import numpy as np

from brouwerkit import _pykernels

try:
    from brouwerkit import _ckernels
except ImportError:  # pragma: no cover
    _ckernels = None


def _inputs(ncurve, npts, seed):
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, 2.0 * np.pi, ncurve, endpoint=False)
    r = 1.0 + 0.2 * np.cos(3.0 * t)
    curve = np.stack([r * np.cos(t), r * np.sin(t)], axis=1)
    pts = rng.uniform(-1.3, 1.3, size=(npts, 2))
    cloud = rng.normal(size=(npts, 3))
    return curve, pts, cloud


def _flat(out):
    parts = out if isinstance(out, tuple) else (out,)
    return np.concatenate([np.ravel(np.asarray(v, dtype=float)) for v in parts])


def bench(ncurve=1024, npts=4096, repeat=5, seed=0):
    curve, pts, cloud = _inputs(ncurve, npts, seed)
    active = np.ones(len(cloud), dtype=bool)
    cases = {
        "winding_numbers": lambda m: m.winding_numbers(curve, pts),
        "polyline_distance": lambda m: m.polyline_distance(curve, pts),
        "farthest_pair": lambda m: m.farthest_pair(cloud, active),
    }
    rows = []
    for name, fn in cases.items():
        t_py = min(timeit.repeat(lambda: fn(_pykernels), number=1, repeat=repeat))
        if _ckernels is None:
            rows.append((name, t_py, float("nan"), float("nan"), True))
            continue
        t_c = min(timeit.repeat(lambda: fn(_ckernels), number=1, repeat=repeat))
        a, b = fn(_pykernels), fn(_ckernels)
        same = np.allclose(_flat(fn(_pykernels)), _flat(fn(_ckernels)), rtol=1e-12, atol=1e-12)
        rows.append((name, t_py, t_c, t_py / t_c, same))
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--ncurve", type=int, default=1024)
    ap.add_argument("--npts", type=int, default=4096)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    print("%-18s %12s %12s %9s %6s" % ("kernel", "numpy [s]", "cython [s]", "speedup", "agree"))
    for name, t_py, t_c, sp, same in bench(args.ncurve, args.npts, args.repeat):
        print("%-18s %12.5f %12.5f %9.1f %6s" % (name, t_py, t_c, sp, same))


if __name__ == "__main__":
    main()
