#!/usr/bin/env python3
"""Benchmark the compiled integration core against the pure-Python fallback.

Runs the same workloads through both kernels and reports steps/second and
the speedup.  The compiled core is what makes the acceptance suite (tens of
millions of RK4 steps at h = 1e-6) finish in seconds.
"""

import time

import numpy as np

from spdiff.core import DifferentiatorConfig, GainSchedule
from spdiff.integrate import DIVERGENCE_LIMIT
from spdiff import _kernel_py

try:
    from spdiff import _kernel
except ImportError:
    _kernel = None

EMPTY = np.empty(0)


def hybrid_workload(kernel, n_steps):
    cfg = DifferentiatorConfig("hybrid-alt", GainSchedule.fixed(300.0),
                               a10=5.0, a11=0.5, a20=2.0, a21=0.5,
                               alpha1=0.5, alpha2=0.5)
    code, a10, a20, a11, a21, p1, p2 = cfg.kernel_params()
    out = np.empty(n_steps // 100 + 1)
    return kernel.run_sim(code, a10, a20, a11, a21, p1, p2,
                          0, 300.0, 0.0, 0.0,
                          1, 1.0, 1.0, 0.0, 0.0, EMPTY, EMPTY, EMPTY, 0.0, 0,
                          0, 0.0, 1e-6, n_steps, 100,
                          0.0, 0.0, DIVERGENCE_LIMIT,
                          out, out.copy(), out.copy())


def timescale_workload(kernel, n_steps):
    sys_ = DifferentiatorConfig("nonlinear", GainSchedule.fixed(1.0),
                                a11=1.0, a21=1.0, alpha=0.5)
    code, a10, a20, a11, a21, p1, p2 = sys_.kernel_params()
    out = np.empty(n_steps + 1)
    return kernel.run_sim(code, a10, a20, a11, a21, p1, p2,
                          0, 1.0, 0.0, 0.0,
                          0, 0.0, 0.0, 0.0, 0.0, EMPTY, EMPTY, EMPTY, 0.0, 0,
                          0, 0.0, 1e-3, n_steps, 1,
                          1.0, 0.0, DIVERGENCE_LIMIT,
                          out, out.copy(), out.copy())


def stream_workload(kernel, n_samples):
    cfg = DifferentiatorConfig("linear", GainSchedule.fixed(300.0),
                               a10=5.0, a20=2.0)
    code, a10, a20, a11, a21, p1, p2 = cfg.kernel_params()
    ts = np.arange(n_samples) * 1e-4
    vs = np.sin(ts)
    out = np.empty(n_samples)
    kernel.run_stream(code, a10, a20, a11, a21, p1, p2,
                      0, 300.0, 0.0, 0.0, ts, vs, 1e-5, 0,
                      0.0, 0.0, 0.0, 0.0, 0, DIVERGENCE_LIMIT, out)
    return n_samples * 10  # substeps actually taken


WORKLOADS = [
    ("hybrid differentiator, sine input", hybrid_workload, 500_000),
    ("finite-time reference system", timescale_workload, 200_000),
    ("streaming, 10 kHz samples", stream_workload, 20_000),
]


def run(kernel, fn, size):
    start = time.perf_counter()
    fn(kernel, size)
    return time.perf_counter() - start


def main():
    backends = [("python", _kernel_py)]
    if _kernel is not None:
        backends.insert(0, ("compiled", _kernel))
    else:
        print("compiled core not built; benchmarking the fallback alone\n")
    print(f"{'workload':38s} {'backend':9s} {'steps':>10s} {'time':>9s} {'steps/s':>12s}")
    for label, fn, size in WORKLOADS:
        base = None
        for name, kernel in backends:
            steps = size if fn is not stream_workload else size * 10
            elapsed = run(kernel, fn, size)
            rate = steps / elapsed
            line = f"{label:38s} {name:9s} {steps:>10d} {elapsed:>8.3f}s {rate:>12.3g}"
            if name == "compiled":
                base = elapsed
            elif base is not None:
                line += f"   ({elapsed / base:.0f}x slower)"
            print(line)
    print()


if __name__ == "__main__":
    main()
