"""Acceptance criteria 1-11, each at its pinned tolerance.

Run with ``pytest tests/test_acceptance.py -v`` (a PASS/FAIL line per
criterion is printed in the terminal summary) or directly with
``python3 tests/test_acceptance.py``.
"""
from __future__ import annotations

import math
import subprocess
import sys
import time

import numpy as np
import pytest

from gmchaos.chaos import build_measure, sample_measure
from gmchaos.experiments import config_from_dict, run_experiment
from gmchaos.kernels import CovarianceSpec, GridDomain, Mollifier, Scheme, conv_cutoff
from gmchaos.rng import replica_streams
from gmchaos.samplers import sample_convolution_field, sample_fourier_field
from gmchaos.stats import empirical_moment, grid_second_moment, ks_two_sample

RESULTS: dict[int, tuple[bool, str]] = {}

DYADIC = [2 ** k for k in range(6, 13)]


def _checks(report) -> dict:
    assert report.error is None, report.error
    return {c.name: c for c in report.checks}


def _run(raw: dict, tmp) -> dict:
    return _checks(run_experiment(config_from_dict(raw), tmp))


def criterion_1(tmp):
    """Empirical vs analytic covariance, 20 probe pairs, 10^5 replicas, m = 128."""
    t0 = time.perf_counter()
    checks = _run({"kind": "CovarianceValidation", "n": 64, "m": 128, "replicas": 100_000,
                   "schemes": ["FourierPartial", "WhiteNoiseCone", "ConvolutionSpectral", "Vaguelet"]}, tmp)
    per = (time.perf_counter() - t0) / len(checks)
    ok = all(c.passed for c in checks.values()) and per < 120
    detail = ", ".join(f"{k.removeprefix('cov_max_dev_')}={c.value:.2f}" for k, c in checks.items())
    return ok, f"max |dev|/se (<= 4): {detail}; {per:.1f}s per scheme"


def criterion_2(tmp):
    """Fourier vs white-noise gap: full grid bounded, delta = 0.1 column halves."""
    checks = _run({"kind": "GapCurves", "schemes": ["FourierPartial", "WhiteNoiseCone"], "m": 4096,
                   "levels": DYADIC}, tmp)
    g, d = checks["sup_gap_growth"], checks["gap_delta_0.1_decrease"]
    rows = g.rows
    return g.passed and d.passed, (f"sup gap {rows[0][1]:.4f} -> {rows[-1][1]:.4f} (max/first {g.value:.3f} <= 1.2); "
                                   f"delta=0.1 drop {d.value:.1%} (>= 50%)")


def criterion_3(tmp):
    """Fourier vs Gaussian convolution gap below 16 pi^2 + tail constant."""
    checks = _run({"kind": "GapCurves", "schemes": ["FourierPartial", "ConvolutionSpectral"],
                   "mollifier": "Gaussian", "m": 4096, "levels": DYADIC}, tmp)
    c = checks["sup_gap_conv_bound"]
    return c.passed, f"max sup gap {c.value:.4f} <= {c.tolerance:.4f}"


def criterion_4(tmp):
    """Mean total mass within 4 standard errors of 1 for every scheme, beta in {0.5, 1}."""
    n, m, reps = 64, 256, 10_000
    specs = [CovarianceSpec(Scheme.FOURIER, n), CovarianceSpec(Scheme.WHITE_NOISE, math.log(n)),
             CovarianceSpec(Scheme.CONVOLUTION, n, mollifier=Mollifier.GAUSSIAN),
             CovarianceSpec(Scheme.CONVOLUTION, n, mollifier=Mollifier.POISSON),
             CovarianceSpec(Scheme.VAGUELET, int(math.log2(n))),
             CovarianceSpec(Scheme.EXACT_CONE, math.log(n))]
    ok, worst, worst_jk = True, 0.0, 0.0
    for beta in (0.5, 1.0):
        for i, spec in enumerate(specs):
            spec = spec.with_beta(beta)
            grid = GridDomain(spec.domain, m)
            mass = sample_measure(spec, grid, replica_streams(4, reps, f"mean/{i}/{beta}")).total_mass
            rep = empirical_moment(mass, 1)
            # exact standard error of the replica mean from the grid second moment
            se = math.sqrt((grid_second_moment(spec, grid) - 1.0) / reps)
            z = abs(rep.estimate - 1.0) / se
            worst, worst_jk = max(worst, z), max(worst_jk, abs(rep.estimate - 1.0) / rep.stderr)
            ok &= z <= 4.0
    return ok, f"max |mean-1|/se = {worst:.2f} (<= 4, exact se); jackknife-se ratio {worst_jk:.2f} for reference"


def criterion_5(tmp):
    """E[mass^2] vs quadrature (Fourier n = 256, beta = 0.5) and the Gamma identity."""
    checks = _run({"kind": "SecondMomentCheck", "scheme": "FourierPartial", "beta": 0.5, "n": 256, "m": 512,
                   "replicas": 10_000}, tmp)
    a, b = checks["second_moment_z"], checks["limit_gamma_identity"]
    return a.passed and b.passed, f"|emp-quad|/se = {a.value:.2f} (<= 4); |limit - 2G(1/2)/G(3/4)^2| = {b.value:.1e}"


def criterion_6(tmp):
    """KS on total mass: Fourier vs white-noise and vs vaguelet, p > 0.01 in >= 8 of 10 seeds."""
    n, m, reps = 1024, 1024, 2000
    grid = GridDomain.circle(m)
    specs = {"F": CovarianceSpec(Scheme.FOURIER, n, 0.5),
             "W": CovarianceSpec(Scheme.WHITE_NOISE, math.log(n), 0.5),
             "V": CovarianceSpec(Scheme.VAGUELET, int(math.log2(n)), 0.5)}
    good = {"W": 0, "V": 0}
    for seed in range(10):
        mass = {k: sample_measure(s, grid, replica_streams(seed, reps, f"ks/{k}")).total_mass for k, s in specs.items()}
        for k in good:
            good[k] += ks_two_sample(mass["F"], mass[k])[1] > 0.01
    return all(v >= 8 for v in good.values()), f"seeds with p > 0.01: WhiteNoise {good['W']}/10, Vaguelet {good['V']}/10"


def criterion_7(tmp):
    """Coupled E|mu_2(1) - mu_3(1)| decreases (up to 2 stderr) over n = 2^6, 2^8, 2^10, 2^12."""
    reps, beta = 2000, 0.5
    means, ses = [], []
    for n in (64, 256, 1024, 4096):
        grid = GridDomain.circle(4 * n)
        eps = 1.0 / n
        streams = replica_streams(7, reps, "coupled")
        f, coeffs = sample_fourier_field(n, grid, streams, modes=conv_cutoff(Mollifier.GAUSSIAN, eps))
        c = sample_convolution_field(coeffs, Mollifier.GAUSSIAN, eps, grid)
        rep = empirical_moment(np.abs(build_measure(f, beta).total_mass - build_measure(c, beta).total_mass), 1)
        means.append(rep.estimate)
        ses.append(rep.stderr)
    ok = all(means[k + 1] <= means[k] + 2 * math.hypot(ses[k], ses[k + 1]) for k in range(3))
    return ok, "E|diff| = " + ", ".join(f"{v:.4f}+-{s:.4f}" for v, s in zip(means, ses))


def criterion_8(tmp):
    """Critical white-noise chaos: SqrtLogN median in a band, Lebesgue median halves."""
    checks = _run({"kind": "CriticalMassTrend", "scheme": "WhiteNoiseCone", "beta": 1.0, "m": 4096,
                   "replicas": 1000, "levels": DYADIC}, tmp)
    band, drop = checks["critical_band_ratio"], checks["lebesgue_median_decrease"]
    rows = band.rows
    return band.passed and drop.passed, (
        f"SqrtLogN medians {rows[0][1]:.3f}..{rows[-1][1]:.3f}, b/a = {band.value:.2f} (<= 5) "
        f"[{'ok' if band.passed else 'FAIL'}]; Lebesgue median {rows[0][2]:.4f} -> {rows[-1][2]:.4f}, "
        f"drop {drop.value:.1%} (>= 50%) [{'ok' if drop.passed else 'FAIL'}]")


def criterion_9(tmp):
    """Partition field: L2 deviation below (e - 1) 4 eps and covariance support within 2 eps."""
    checks = _run({"kind": "ZepsBounds", "m": 256, "replicas": 10_000, "eps": [1 / 8, 1 / 16, 1 / 32]}, tmp)
    l2, sup = checks["zeps_l2_excess_z"], checks["zeps_support_leak"]
    return l2.passed and sup.passed, (f"max (emp - bound)/se = {l2.value:.1f} (<= 4); "
                                      f"max |C| beyond 2 eps = {sup.value:g}")


def criterion_10(tmp):
    """Kahane direction over 20 random dominating pairs x 3 concave functions."""
    checks = _run({"kind": "KahaneDirection", "scheme": "WhiteNoiseCone", "n": 64, "m": 64, "replicas": 4000,
                   "pairs": 20}, tmp)
    d, e = checks["kahane_direction_z"], checks["kahane_equality_z"]
    return d.passed and e.passed, (f"max Delta/se over 60 cells = {d.value:.2f} (<= 2); "
                                   f"equality cells max |Delta|/se = {e.value:.2f}")


def criterion_11(tmp):
    """Reruns in fresh processes give byte-identical CSV bodies."""
    import json
    cfgs = [{"kind": "CrossSchemeKS", "beta": 0.5, "n": 256, "m": 256, "replicas": 500, "seeds": 2},
            {"kind": "CoupledConvergence", "beta": 0.5, "levels": [64, 256], "replicas": 500},
            {"kind": "KahaneDirection", "m": 32, "n": 32, "replicas": 300, "pairs": 3}]
    same = True
    for i, raw in enumerate(cfgs):
        path = tmp / f"cfg{i}.json"
        path.write_text(json.dumps(raw))
        outs = []
        for r in range(2):
            out = tmp / f"run{i}_{r}"
            subprocess.run([sys.executable, "-m", "gmchaos", "run", str(path), "--out", str(out), "--seed", "3"],
                           check=False, capture_output=True)
            outs.append({p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))})
        same &= bool(outs[0]) and outs[0] == outs[1]
    return same, f"{len(cfgs)} experiment kinds rerun in separate processes: CSV bodies identical = {same}"


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 12)}


def _line(i: int, ok: bool, detail: str) -> str:
    return f"criterion {i:2d}: {'PASS' if ok else 'FAIL'}  {CRITERIA[i].__doc__.strip()}  | {detail}"


@pytest.mark.parametrize("i", sorted(CRITERIA))
def test_criterion(i, tmp_path):
    ok, detail = CRITERIA[i](tmp_path)
    RESULTS[i] = (ok, detail)
    print(_line(i, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    import tempfile
    from pathlib import Path

    failed = 0
    for i in sorted(CRITERIA):
        with tempfile.TemporaryDirectory() as d:
            ok, detail = CRITERIA[i](Path(d))
        failed += not ok
        print(_line(i, ok, detail), flush=True)
    sys.exit(1 if failed else 0)
