"""Compare the numpy and numba kernel backends.

Usage::

    python3 benchmarks/bench_kernels.py [--elements 1000] [--degree 3] [--repeat 5]

Times each kernel on the padded quadrature tables of a Voronoi mesh, then
times a full operator assembly in a subprocess per backend
(``POLYFK_NUMBA=0`` and ``POLYFK_NUMBA=1``).
"""
import argparse
import os
import subprocess
import sys
import time

import numpy as np

from polyfk.kernels import numba_impl, numpy_impl


def best_of(fn, repeat):
    fn()  # warm-up (numba compiles here)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def kernel_cases(n_el, degree, rng):
    nloc = (degree + 1) * (degree + 2) // 2
    nq = 6 * (degree + 2) ** 2
    w = rng.uniform(0, 1, (n_el, nq))
    phi = rng.normal(size=(n_el, nq, nloc))
    dphi = rng.normal(size=(n_el, nq, nloc, 2))
    G = rng.normal(size=(n_el, nq, 2, 2))
    D = G @ np.swapaxes(G, -1, -2)
    C = rng.normal(size=(n_el, nloc))
    B = rng.normal(size=(n_el, nloc, nloc))
    x = rng.normal(size=n_el * nloc)
    nf = 3 * n_el
    fq = degree + 2
    face = (
        rng.uniform(0, 1, (nf, fq)),
        rng.normal(size=(nf, fq, nloc)),
        rng.normal(size=(nf, fq, nloc, 2)),
        rng.normal(size=(nf, fq, nloc)),
        rng.normal(size=(nf, fq, nloc, 2)),
        rng.normal(size=(nf, fq, 2)),
        rng.normal(size=(nf, fq, 2)),
        rng.uniform(1, 10, nf),
        rng.uniform(0, 1, nf) < 0.9,
    )
    return {
        "weighted_mass_blocks": (w, phi),
        "stiffness_blocks": (w, dphi, D),
        "face_blocks": face,
        "eval_at_points": (phi, C),
        "block_matvec": (B, x),
        "legendre_table": (rng.uniform(-1, 1, (n_el, nq)), degree),
    }


ASSEMBLY = """
import time
from polyfk import kernels
from polyfk.assembly import PenaltySpec, assemble_operators
from polyfk.dgspace import DgSpace
from polyfk.mesh import generate_voronoi_mesh
from polyfk.physics import ModelParams
m = generate_voronoi_mesh((0, 1, 0, 1), {n}, 10, 0)
P = ModelParams(alpha=1.0)
assemble_operators(DgSpace(m, {p}), P, PenaltySpec())
best = 1e9
for _ in range({r}):
    t0 = time.perf_counter()
    assemble_operators(DgSpace(m, {p}), P, PenaltySpec())
    best = min(best, time.perf_counter() - t0)
print(kernels.backend(), best)
"""


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--elements", type=int, default=1000)
    ap.add_argument("--degree", type=int, default=3)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"kernels on {args.elements} elements, p = {args.degree} (best of {args.repeat})")
    print(f"{'kernel':24s} {'numpy [ms]':>12s} {'numba [ms]':>12s} {'speedup':>8s}")
    for name, inputs in kernel_cases(args.elements, args.degree, rng).items():
        tn = best_of(lambda: getattr(numpy_impl, name)(*inputs), args.repeat)
        tb = best_of(lambda: getattr(numba_impl, name)(*inputs), args.repeat)
        print(f"{name:24s} {1e3 * tn:12.3f} {1e3 * tb:12.3f} {tn / tb:8.2f}")

    print("\nfull operator assembly")
    code = ASSEMBLY.format(n=args.elements, p=args.degree, r=args.repeat)
    for flag in ("0", "1"):
        env = dict(os.environ, POLYFK_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        backend, secs = out.stdout.split()
        print(f"{backend:8s} {1e3 * float(secs):10.1f} ms")


if __name__ == "__main__":
    main()
