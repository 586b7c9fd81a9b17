"""Time the compiled and pure-Python integration kernels on the same workloads.

Usage: python benchmarks/bench_kernels.py [--repeat 3]
"""
import argparse
import time

import numpy as np

from phaselock._backend import get_kernel
from phaselock.fields import TrigPoly, parse_harmonics
from phaselock.flow import TWO_PI, TorusODE, grid, integrate_points


def workloads():
    rsj = TorusODE(TrigPoly.sin(), 1.2, 1.0, TrigPoly.cos())
    v = parse_harmonics(["s1=1", "c2=0.5", "s3=0.2"])
    f = parse_harmonics(["c1=1", "s2=0.3", "c5=0.1"])
    mixed = TorusODE(v, 0.3, 0.8, f)
    return [
        ("rsj, 64 points, 1 period", rsj, grid(64), [TWO_PI]),
        ("rsj, 1024 points, 1 period", rsj, grid(1024), [TWO_PI]),
        ("rsj, 1 point, 256 periods", rsj, [0.0], TWO_PI * np.arange(1, 257)),
        ("3-harmonic, 256 points, with log-derivative", mixed, grid(256), [TWO_PI]),
    ]


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    try:
        kernels = {"cython": get_kernel("cython")}
    except ImportError:
        kernels = {}
        print("compiled kernel not built; timing the Python kernel only")
    kernels["python"] = get_kernel("python")

    print(f"{'workload':46s} " + " ".join(f"{k:>10s}" for k in kernels) + "    speedup  max|dx|")
    for name, ode, x0, stops in workloads():
        with_log = "log" in name
        res = {}
        for kname, kern in kernels.items():
            res[kname] = best_of(lambda: integrate_points(ode, x0, 0.0, stops, 1e-10, with_log,
                                                          kernel=kern), args.repeat)
        cols = " ".join(f"{res[k][0]:9.4f}s" for k in kernels)
        if "cython" in res:
            speed = res["python"][0] / res["cython"][0]
            diff = float(np.max(np.abs(res["python"][1][0] - res["cython"][1][0])))
            print(f"{name:46s} {cols} {speed:9.1f}x  {diff:.1e}")
        else:
            print(f"{name:46s} {cols}")


if __name__ == "__main__":
    main()
