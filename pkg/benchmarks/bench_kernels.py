"""Compare the compiled kernel backend against the pure-numpy fallback.

Run after installing the package:

    python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from agglomer import kernels
from agglomer.kernels import _reference


def _time(fn, *args, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    rng = np.random.default_rng(7)
    n_regions, n_activities = 400, 120
    lat = rng.uniform(35, 70, n_regions)
    lon = rng.uniform(-10, 40, n_regions)
    M = (rng.random((n_regions, n_activities)) < 0.2).astype(np.float64)
    phi = _reference.proximity_matrix(M)

    print(f"active backend: {kernels.backend_name()}")
    cases = [
        ("haversine_matrix", kernels.haversine_matrix, _reference.haversine_matrix, (lat, lon)),
        ("proximity_matrix", kernels.proximity_matrix, _reference.proximity_matrix, (M,)),
        ("density_matrix", kernels.density_matrix, _reference.density_matrix, (M, phi)),
    ]
    for name, active, ref, args in cases:
        out_a = active(*args)
        out_r = ref(*args)
        assert np.allclose(out_a, out_r, atol=1e-10), name
        t_a = _time(active, *args)
        t_r = _time(ref, *args)
        print(
            f"{name:18s} active {t_a * 1e3:8.3f} ms   python {t_r * 1e3:8.3f} ms   "
            f"speedup x{t_r / t_a:5.2f}"
        )


if __name__ == "__main__":
    main()
