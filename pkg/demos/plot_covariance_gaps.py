"""
Covariance kernels and their gaps
=================================

Compare the truncated kernels with the limit log kernel on the circle and
watch the gap between the Fourier and white-noise kernels stay bounded on
the diagonal while it vanishes away from it.
"""

import math

import numpy as np

from gmchaos import CovarianceSpec, GridDomain, Scheme, covariance_at_distance, sup_cov_gap

d = np.linspace(1e-3, 0.5, 9)
limit = covariance_at_distance(CovarianceSpec(Scheme.LIMIT_CIRCLE), d)

n = 256
kernels = {
    "Fourier": CovarianceSpec(Scheme.FOURIER, n),
    "white noise": CovarianceSpec(Scheme.WHITE_NOISE, math.log(n)),
    "Gaussian conv": CovarianceSpec(Scheme.CONVOLUTION, n),
}
print(f"{'d':>7s} {'limit':>9s} " + " ".join(f"{k:>14s}" for k in kernels))
for i, di in enumerate(d):
    row = " ".join(f"{float(covariance_at_distance(s, di)):14.4f}" for s in kernels.values())
    print(f"{di:7.3f} {limit[i]:9.4f} {row}")

###############################################################################
# Gap curves: the full-grid column settles to a constant, the off-diagonal
# columns decay with n.

curve = sup_cov_gap(CovarianceSpec(Scheme.FOURIER, 1), CovarianceSpec(Scheme.WHITE_NOISE, 1.0),
                    GridDomain.circle(4096), [2 ** k for k in range(6, 13)])
print("\n     n   sup_gap  d>0.05   d>0.1   d>0.2")
for row in curve.rows():
    print(f"{row[0]:6d} {row[1]:8.4f} " + " ".join(f"{v:7.4f}" for v in row[2:]))
