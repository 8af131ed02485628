"""Low-frequency certificates, the L2 error bound and water-filling.

    python3 demos/spectral_tour.py
"""

import math

from compresslearn.densities import GaussianNoise, IsoGaussian
from compresslearn.spectral import (
    GaussianEnvelope,
    GaussianIsoClass,
    SubGaussian,
    fit_c2,
    l2_error_bound,
    lowfreq_ratio,
    tv_from_l2,
    waterfill,
    xi_certificate,
)

fam = GaussianIsoClass(1.0, 1)
p, q = IsoGaussian([0.0], 1.2), IsoGaussian([0.7], 1.0)
print("alpha   certified xi   measured ratio")
for alpha in (2.0, 3.0, 4.0, 6.0):
    cert = xi_certificate(fam, alpha)
    print(f"{alpha:5.1f}   {cert.xi:12.3e}   {lowfreq_ratio(p, q, alpha):14.3e}")

certs = [xi_certificate(fam, a) for a in (2.5, 3.0, 4.0)]
bound = l2_error_bound(0.05, GaussianNoise(0.3), certs)
print(f"\nL2 error bound for noise 0.3 and noisy-TV 0.05, best of three alphas: {bound:.4f}")

env = GaussianEnvelope(1.0, 1.0, 1)
print("\neps       water-filled L1 bound   bound / eps")
for k in range(1, 5):
    eps = 10.0**-k
    res = waterfill(env, eps)
    print(f"{eps:7.0e}   {res.l1_bound:20.4e}   {res.l1_bound / eps:10.4f}")
c2 = fit_c2(1.0, 1.0, 1)
print(f"\nfitted C2 = {c2:.4f}; TV from an L2 error of 0.01: {tv_from_l2(SubGaussian(1.0, 1.0, 1, c2), 0.01):.4f}")
print(f"(log 1/eps)^(1/4) and ^(1/2) at 1e-4: {math.log(1e4) ** 0.25:.4f}, {math.log(1e4) ** 0.5:.4f}")
