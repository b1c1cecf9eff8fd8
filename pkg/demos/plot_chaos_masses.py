"""
Total mass of subcritical and critical chaos
============================================

Sample the chaos measure for three approximation schemes at beta = 0.5,
compare their total-mass laws, then look at the critical case beta = 1
with and without the sqrt(log n) factor.
"""

import math

import numpy as np

from gmchaos import (
    CovarianceSpec,
    GridDomain,
    NormalizationKind,
    NormalizationRule,
    Scheme,
    ks_two_sample,
    normalization_factor,
    replica_streams,
    sample_measure,
)

grid = GridDomain.circle(512)
n = 512
schemes = {
    "Fourier": CovarianceSpec(Scheme.FOURIER, n, 0.5),
    "white noise": CovarianceSpec(Scheme.WHITE_NOISE, math.log(n), 0.5),
    "vaguelet": CovarianceSpec(Scheme.VAGUELET, int(math.log2(n)), 0.5),
}
masses = {k: sample_measure(s, grid, replica_streams(0, 2000, k)).total_mass for k, s in schemes.items()}
for k, m in masses.items():
    q = np.quantile(m, [0.1, 0.5, 0.9])
    print(f"{k:12s} mean {m.mean():.3f}  quantiles {q.round(3)}")
for k in ("white noise", "vaguelet"):
    D, p = ks_two_sample(masses["Fourier"], masses[k])
    print(f"KS Fourier vs {k}: D = {D:.3f}, p = {p:.3f}")

###############################################################################
# Critical chaos: the plain mass drifts to zero, sqrt(log n) holds it steady.

print("\n     n  median(Lebesgue)  median(sqrt log n)")
for n in (64, 256, 1024):
    spec = CovarianceSpec(Scheme.WHITE_NOISE, math.log(n), 1.0)
    m = sample_measure(spec, grid, replica_streams(1, 500, "critical")).total_mass
    f = normalization_factor(NormalizationRule(NormalizationKind.SQRT_LOG_N, n))
    print(f"{n:6d} {np.median(m):17.4f} {np.median(f * m):19.4f}")
