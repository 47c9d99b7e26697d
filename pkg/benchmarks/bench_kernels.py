"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py --steps 1000 --repeat 5
"""
import argparse
import timeit

import numpy as np

from relaxctl import _kernels_py

try:
    from relaxctl import _kernels as _kernels_cy
except ImportError:  # extension not built
    _kernels_cy = None


def cases(steps, n, d, batch, points, seed=0):
    rng = np.random.default_rng(seed)
    coeffs = [np.ascontiguousarray(rng.normal(size=(steps, n, n)) * 0.1) for _ in range(3)]
    h = np.full(steps, 1.0 / steps)
    pt = rng.normal(size=(d, n))
    p = rng.normal(size=(batch, n))
    phi = rng.normal(size=(batch, points, n))
    return {
        "adjoint_sweep": lambda mod: mod.adjoint_sweep(*coeffs, h, pt),
        "hamiltonian_argmax": lambda mod: mod.hamiltonian_argmax(p, phi),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=1000, help="time steps M")
    ap.add_argument("--dim", type=int, default=2, help="state dimension n")
    ap.add_argument("--batch", type=int, default=4, help="adjoint columns d")
    ap.add_argument("--points", type=int, default=4002, help="control grid size")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    work = cases(args.steps, args.dim, args.batch, args.steps + 1, args.points)
    backends = {"python": _kernels_py}
    if _kernels_cy is not None:
        backends["cython"] = _kernels_cy
    print(f"{'kernel':<20}{'backend':<10}{'best [ms]':>12}{'speedup':>10}")
    for name, fn in work.items():
        base = None
        for label, mod in backends.items():
            best = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat)) * 1e3
            base = base or best
            print(f"{name:<20}{label:<10}{best:>12.3f}{base / best:>10.2f}")


if __name__ == "__main__":
    main()
