"""Calibrate the constant c in the d-dimensional uniform-mixture certificate.

For random pairs of k-mixtures of axis-aligned boxes in 2D, find the smallest c
for which the certificate covers the measured high-band energy, and report the
largest such c over all pairs.  The certificate is treated as covered when the measured ratio is at most
xi + 0.02, the same slack as the verifier.

    python3 demos/calibrate_kmix2d.py [pairs] [seed]
"""

import math
import sys
import time

import numpy as np
from scipy import optimize

from compresslearn.densities import Mixture, SeededRng, UniformBox, distance
from compresslearn.spectral import InsufficientGrid, KMixUniformDClass, lowfreq_ratio, xi_certificate

T, D = 0.5, 2
TOL = 0.02  # same absolute slack as verify_certificate


def random_mixture(gen, k):
    boxes = []
    for _ in range(k):
        lo = gen.uniform(-1.5, 1.5, D)
        boxes.append(UniformBox(lo, lo + gen.uniform(T, 3 * T, D), T))
    if k == 1:
        return boxes[0]
    w = gen.dirichlet(np.ones(k))
    w[-1] = 1.0 - w[:-1].sum()
    return Mixture(w, boxes)


def needed_c(measured, alpha, k, eps, tol=TOL):
    def gap(c):
        return xi_certificate(KMixUniformDClass(T, k, eps, D, c), alpha).xi + tol - measured

    if gap(1e-3) >= 0:
        return 1e-3
    hi = 1.0
    while gap(hi) < 0:
        hi *= 2
    return optimize.brentq(gap, hi / 2 if hi > 1 else 1e-3, hi, xtol=1e-6)


def main(pairs=1000, seed=0):
    worst, skipped, start = [], 0, time.perf_counter()
    cs = []
    for i in range(pairs):
        gen = SeededRng(seed, (i,)).generator()
        k = int(gen.integers(1, 4))
        p, q = random_mixture(gen, k), random_mixture(gen, k)
        alpha = float(np.exp(gen.uniform(math.log(0.5), math.log(30.0))))
        eps = distance(p, q, "L2").value
        try:
            measured = lowfreq_ratio(p, q, alpha)
        except InsufficientGrid:
            skipped += 1
            continue
        c = needed_c(measured, alpha, k, eps)
        cs.append(c)
        worst.append((c, alpha, k, measured))
    cs = np.array(cs)
    worst.sort(reverse=True)
    print(f"pairs measured     {cs.size} (skipped for grid resolution: {skipped})")
    print(f"median needed c    {np.median(cs):.4f}")
    print(f"99th pct needed c  {np.quantile(cs, 0.99):.4f}")
    print(f"max needed c       {cs.max():.4f}")
    print(f"violations at c=2  {int(np.sum(cs > 2.0))}")
    for lo, hi in ((0.5, 1.0), (1.0, 3.0), (3.0, 10.0), (10.0, 30.0)):
        band = [c for c, a, _, _ in worst if lo <= a < hi]
        print(f"alpha in [{lo:4.1f}, {hi:4.1f}): {len(band):4d} pairs, max needed c {max(band, default=0.0):.4f}")
    print("worst pairs (needed c, alpha, k, measured ratio):")
    for c, a, k, m in worst[:5]:
        print(f"  {c:8.4f} {a:8.4f} {k} {m:.4f}")
    print(f"elapsed            {time.perf_counter() - start:.0f} s")


if __name__ == "__main__":
    args = [int(a) for a in sys.argv[1:]]
    main(*args)
