"""Compare the compiled and numpy per-triangle kernels on stadium meshes.

    python benchmarks/bench_kernels.py --h 0.04 0.02 0.01 --repeat 5
"""

import argparse
import time

import numpy as np

from stadium_lab import kernels
from stadium_lab.geometry import StadiumGeometry
from stadium_lab.mesh import build


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--h", type=float, nargs="+", default=[0.04, 0.02, 0.01])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    backends = ["python"] + (["cython"] if kernels.BACKEND == "cython" else [])
    if len(backends) == 1:
        print("compiled extension not available; timing the numpy kernels only")
    print(f"{'h':>7} {'triangles':>10} {'kernel':>14} " + " ".join(f"{b:>10}" for b in backends) + "   speedup")
    for h in args.h:
        mesh = build(StadiumGeometry(1.0, 1.0), h)
        xy, tri = mesh.vertices, mesh.triangles
        rng = np.random.default_rng(0)
        wq = rng.uniform(size=(len(tri), 3))
        u = rng.standard_normal(len(xy))
        jobs = {
            "p1_forms": lambda b: kernels.p1_forms(xy, tri, backend=b),
            "weighted_mass": lambda b: kernels.weighted_mass(xy, tri, wq, backend=b),
            "p1_gradients": lambda b: kernels.p1_gradients(xy, tri, u, backend=b),
        }
        for name, job in jobs.items():
            t = [best_of(lambda: job(b), args.repeat) for b in backends]
            speed = f"{t[0] / t[1]:8.1f}x" if len(t) == 2 else ""
            print(f"{h:7.3f} {len(tri):10d} {name:>14} " + " ".join(f"{x * 1e3:8.2f}ms" for x in t) + f"   {speed}")


if __name__ == "__main__":
    main()
