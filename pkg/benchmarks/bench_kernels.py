"""Compare the numba and numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat N]

Times the two hot kernels directly on representative sizes, then an
end-to-end ``apply_dn`` in subprocesses with ``STOKESDN_NUMBA`` set to 1 and 0.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from stokesdn import kernels
from stokesdn._backend import HAVE_NUMBA

END_TO_END = """
import time
from stokesdn import PeriodicFunction
from stokesdn.dirichlet_neumann import DNConfig, apply_dn
eta = PeriodicFunction.cos(1, 32, 0.08) + PeriodicFunction.sin(2, 32, 0.02)
psi = PeriodicFunction.cos(1, 32) + PeriodicFunction.sin(3, 32, 0.5)
cfg = DNConfig(K=32)
apply_dn(eta, psi, cfg)
t = time.perf_counter()
for _ in range({n}):
    apply_dn(eta, psi, cfg)
print((time.perf_counter() - t) / {n})
"""


def conv_case(rng, K=32, na=600, nb=600, ra=12, rb=12, deg=3):
    def terms(n, r):
        return (rng.integers(-K, K + 1, size=(n, 1)), rng.integers(0, r, n), rng.integers(0, deg, n),
                rng.normal(size=n) + 1j * rng.normal(size=n))
    rate_map = np.arange(ra * rb).reshape(ra, rb)
    return (*terms(na, ra), *terms(nb, rb), rate_map, K, ra * rb, 2 * deg - 1)


def best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not HAVE_NUMBA:
        sys.exit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(0)
    conv = conv_case(rng)
    C = rng.normal(size=(4000, 6)) + 1j * rng.normal(size=(4000, 6))
    s = rng.uniform(0.5, 5.0, 4000)
    kernels.convolve_terms_numba(*conv)  # compile
    kernels.poly_resolvent_numba(C, s)

    rows = [
        ("convolve_terms (600x600 terms)",
         best(lambda: kernels.convolve_terms_numpy(*conv), args.repeat),
         best(lambda: kernels.convolve_terms_numba(*conv), args.repeat)),
        ("poly_resolvent (4000 rows, deg 5)",
         best(lambda: kernels.poly_resolvent_numpy(C, s), args.repeat),
         best(lambda: kernels.poly_resolvent_numba(C, s), args.repeat)),
    ]
    e2e = {}
    for flag in ("0", "1"):
        env = dict(os.environ, STOKESDN_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", END_TO_END.format(n=args.repeat)], env=env,
                             capture_output=True, text=True, check=True)
        e2e[flag] = float(out.stdout.strip())
    rows.append(("apply_dn K=32 (end to end)", e2e["0"], e2e["1"]))

    print(f"{'case':38s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s}")
    for name, tn, tb in rows:
        print(f"{name:38s} {1e3 * tn:11.3f} {1e3 * tb:11.3f} {tn / tb:8.2f}")


if __name__ == "__main__":
    main()
