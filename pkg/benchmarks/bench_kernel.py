"""Time the compiled and pure-Python stepping kernels on the same drop.

    python benchmarks/bench_kernel.py [--steps N] [--repeat R]
"""
import argparse
import time

import numpy as np

from amt_lab import REFERENCE_SCENARIO, default_vehicle
from amt_lab.oracle import OracleConfig, _kernel_args
from amt_lab.oracle import _backend


def best_time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=50_000)
    ap.add_argument("--repeat", type=int, default=3)
    a = ap.parse_args(argv)

    p = default_vehicle()
    cfg = OracleConfig.for_closure()
    args = _kernel_args(p, cfg)
    sc = REFERENCE_SCENARIO
    # released at the deployment height, pitched to the landing angle
    init = np.array([0.0, sc.deployment_height, sc.landing_angle, sc.entrance_speed_x, 0.0, 0.0])
    outs = {}

    def run(kernel, name):
        out = np.empty((a.steps, _backend.NCOL))
        kernel(init.copy(), *args, a.steps, out)
        outs[name] = out

    kernels = [("python", _backend.python_integrate)]
    if _backend.compiled_integrate is not None:
        kernels.insert(0, ("cython", _backend.compiled_integrate))
    times = {name: best_time(lambda k=k, n=name: run(k, n), a.repeat) for name, k in kernels}
    for name, t in times.items():
        print(f"{name:7s} {a.steps} steps  {t * 1e3:9.2f} ms  {t / a.steps * 1e9:8.1f} ns/step")
    if len(times) == 2:
        diff = np.max(np.abs(outs["cython"] - outs["python"]))
        print(f"speedup {times['python'] / times['cython']:.1f}x  max abs difference {diff:.1e}")
    else:
        print("compiled kernel not built; only the fallback was timed")


if __name__ == "__main__":
    main()
