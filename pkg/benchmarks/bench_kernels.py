#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-numpy fallback.

Run after building the extension (pip install -e . --no-build-isolation):

    python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from speechconf import _kernels_py
from speechconf.dsp import frame_signal

try:
    from speechconf import _kernels_cy
except ImportError:
    _kernels_cy = None


def timed(fn, *args, repeats=5):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    rng = np.random.default_rng(0)
    rate = 16000
    # ten seconds of noisy speech-band audio, standard 25 ms / 10 ms framing
    x = rng.standard_normal(10 * rate)
    frames = frame_signal(x, 400, 160)
    lag_min, lag_max = 16, 291
    print(f"ncc_matrix: {frames.shape[0]} frames x {lag_max - lag_min + 1} lags")

    t_py, ref = timed(_kernels_py.ncc_matrix, frames, lag_min, lag_max)
    print(f"  python  {t_py * 1e3:8.1f} ms")
    if _kernels_cy is not None:
        t_cy, out = timed(_kernels_cy.ncc_matrix, frames, lag_min, lag_max)
        err = float(np.max(np.abs(out - ref)))
        print(f"  cython  {t_cy * 1e3:8.1f} ms   ({t_py / t_cy:.1f}x, max |diff| {err:.2e})")
    else:
        print("  cython  unavailable (extension not built)")

    mag = np.abs(rng.standard_normal((1200, 513)))
    floor = np.percentile(mag, 10, axis=0)
    print(f"spectral_gate_gains: {mag.shape[0]} frames x {mag.shape[1]} bins")
    t_py, ref = timed(_kernels_py.spectral_gate_gains, mag, floor, 2.0, 0.01, 2)
    print(f"  python  {t_py * 1e3:8.1f} ms")
    if _kernels_cy is not None:
        t_cy, out = timed(_kernels_cy.spectral_gate_gains, mag, floor, 2.0, 0.01, 2)
        err = float(np.max(np.abs(out - ref)))
        print(f"  cython  {t_cy * 1e3:8.1f} ms   ({t_py / t_cy:.1f}x, max |diff| {err:.2e})")


if __name__ == "__main__":
    main()
