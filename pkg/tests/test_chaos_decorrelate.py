import math

import numpy as np
import pytest

from gmchaos.chaos import (
    LEBESGUE,
    NormalizationKind,
    NormalizationRule,
    build_measure,
    integrate,
    normalization_factor,
    perturb_measure,
    sample_measure,
)
from gmchaos.decorrelate import (
    build_partition,
    diagonal_strip_mass,
    kahane_gap,
    sample_zeps,
    zeps_cov,
    zeps_matrix,
)
from gmchaos.kernels import CovarianceSpec, GridDomain, Scheme, build_cov_matrix
from gmchaos.rng import RngStream, replica_streams
from gmchaos.samplers import FieldSample, sample_fourier_field
from gmchaos.stats import empirical_moment, ks_two_sample

NK = NormalizationKind


# --- normalization --------------------------------------------------------

def test_normalization_factors():
    assert normalization_factor(LEBESGUE) == 1.0
    assert normalization_factor(NormalizationRule(NK.SQRT_N_LOG2, 4)) == pytest.approx(2 * math.sqrt(math.log(2)))
    n = 300
    assert normalization_factor(NormalizationRule(NK.SQRT_T, math.log(n))) == pytest.approx(
        normalization_factor(NormalizationRule(NK.SQRT_LOG_N, n)))


@pytest.mark.parametrize("rule", [NormalizationRule(NK.SQRT_LOG_N, 1), NormalizationRule(NK.SQRT_LOG_N, 0.5),
                                  NormalizationRule(NK.SQRT_T, 0.0), NormalizationRule(NK.SQRT_T)])
def test_normalization_rejects_invalid(rule):
    with pytest.raises(ValueError):
        normalization_factor(rule)


# --- measures -------------------------------------------------------------

def _zero_field(m=16):
    g = GridDomain.circle(m)
    return FieldSample(g, np.zeros(m), np.zeros(m))


def test_degenerate_field_gives_reference_measure():
    rule = NormalizationRule(NK.SQRT_N_LOG2, 8)
    mu = build_measure(_zero_field(), 0.3, rule)
    assert np.allclose(mu.weights, normalization_factor(rule) / 16)


def test_half_circle_integral_at_beta_zero():
    g = GridDomain.circle(64)
    s, _ = sample_fourier_field(8, g, RngStream(0))
    mu = build_measure(s, 0.0)
    assert integrate(mu, lambda x: (x < 0.5).astype(float)) == pytest.approx(0.5)
    assert integrate(mu, np.ones(64)) == pytest.approx(mu.total_mass)


def test_build_measure_refuses_double_beta():
    g = GridDomain.circle(32)
    s = sample_measure(CovarianceSpec(Scheme.WHITE_NOISE, 2.0, 0.5), g, RngStream(0))
    assert s.beta == 0.5
    from gmchaos.samplers import sample_cholesky_field
    f = sample_cholesky_field(CovarianceSpec(Scheme.WHITE_NOISE, 2.0, 0.5), g, RngStream(0))
    with pytest.raises(ValueError):
        build_measure(f, 1.0)
    assert np.allclose(build_measure(f, 0.5).weights, build_measure(f, None).weights)


def test_build_measure_shape_mismatch():
    g = GridDomain.circle(8)
    with pytest.raises(ValueError):
        build_measure(FieldSample(g, np.zeros(7), np.zeros(8)), 0.5)


def test_weights_positive_finite():
    g = GridDomain.circle(128)
    mu = sample_measure(CovarianceSpec(Scheme.FOURIER, 512, 1.0), g, replica_streams(0, 50))
    assert np.all(mu.weights > 0) and np.all(np.isfinite(mu.weights))


@pytest.mark.parametrize("spec", [
    CovarianceSpec(Scheme.FOURIER, 32, 0.5),
    CovarianceSpec(Scheme.WHITE_NOISE, math.log(32), 0.5),
    CovarianceSpec(Scheme.VAGUELET, 5, 0.5),
    CovarianceSpec(Scheme.EXACT_CONE, math.log(32), 0.5),
], ids=lambda s: s.scheme.value)
def test_mean_one(spec):
    g = GridDomain(spec.domain, 64)
    m = sample_measure(spec, g, replica_streams(21, 4000)).total_mass
    rep = empirical_moment(m, 1)
    assert abs(rep.estimate - 1) <= 4 * rep.stderr


# --- perturbation ---------------------------------------------------------

def test_perturb_identity():
    g = GridDomain.circle(32)
    s, _ = sample_fourier_field(8, g, RngStream(0))
    mu = build_measure(s, 0.7)
    assert np.array_equal(perturb_measure(mu, _zero_field(32), 0.0).weights, mu.weights)


def test_perturb_grid_mismatch():
    g = GridDomain.circle(32)
    s, _ = sample_fourier_field(8, g, RngStream(0))
    with pytest.raises(ValueError):
        perturb_measure(build_measure(s, 0.5), _zero_field(16), 0.0)


def test_perturb_independent_keeps_mean():
    g = GridDomain.circle(64)
    s, _ = sample_fourier_field(32, g, replica_streams(1, 4000, "x"))
    z = sample_zeps(build_partition(0.125, g), replica_streams(1, 4000, "z"))
    rep = empirical_moment(perturb_measure(build_measure(s, 0.5), z, 0.0).total_mass, 1)
    assert abs(rep.estimate - 1) <= 4 * rep.stderr


def test_perturb_removes_constant_mode_pathwise():
    g = GridDomain.circle(64)
    beta = 0.5
    streams = replica_streams(2, 10)
    with_c, coeffs = sample_fourier_field(16, g, streams)
    without, _ = sample_fourier_field(16, g, streams, constant_mode=False)
    c = beta * 2 * math.sqrt(math.log(2))
    z = FieldSample(g, -c * coeffs.G[:, None] * np.ones(64), np.full(64, c * c))
    removed = perturb_measure(build_measure(with_c, beta), z, -c * c)
    assert np.allclose(removed.weights, build_measure(without, beta).weights, rtol=1e-12)
    # and in law against an independent draw
    plain, _ = sample_fourier_field(16, g, replica_streams(3, 2000), constant_mode=False)
    big, cf = sample_fourier_field(16, g, replica_streams(2, 2000))
    z = FieldSample(g, -c * cf.G[:, None] * np.ones(64), np.full(64, c * c))
    _, p = ks_two_sample(perturb_measure(build_measure(big, beta), z, -c * c).total_mass,
                         build_measure(plain, beta).total_mass)
    assert p > 0.001


# --- partition of unity ---------------------------------------------------

def test_partition_quarter_gives_eight_centers():
    p = build_partition(0.25, GridDomain.circle(64))
    assert p.size == 8
    assert np.allclose(np.diff(p.centers), 0.125)


@pytest.mark.parametrize("eps", [1 / 4, 1 / 8, 0.1, 1 / 32])
def test_partition_invariants(eps):
    g = GridDomain.circle(256)
    p = build_partition(eps, g)
    assert np.allclose(p.tents.sum(axis=0), 1.0, atol=1e-12)
    assert np.all(p.tents >= 0)
    d = g.distance(p.centers[:, None], g.points[None, :])
    assert np.all(p.tents[d >= eps] == 0)
    cd = g.distance(p.centers[:, None], p.centers[None, :])
    assert np.all(cd[~np.eye(p.size, dtype=bool)] >= eps / 2 - 1e-12)


def test_partition_too_fine():
    with pytest.raises(ValueError):
        build_partition(1 / 64, GridDomain.circle(64))


@pytest.mark.parametrize("eps", [1 / 8, 1 / 16, 0.07])
def test_zeps_cov_properties(eps):
    g = GridDomain.circle(128)
    p = build_partition(eps, g)
    c = zeps_matrix(p)
    assert np.allclose(np.diag(c), 1.0)
    assert np.all(c >= -1e-15) and np.all(c <= 1 + 1e-12)
    assert np.all(c[g.distance_matrix() >= 2 * eps - 1e-12] == 0)
    assert np.linalg.eigvalsh(c).min() >= -1e-9
    assert zeps_cov(p, 3, 9) == pytest.approx(c[3, 9])


def test_zeps_sample_unit_variance():
    g = GridDomain.circle(64)
    z = sample_zeps(build_partition(0.125, g), replica_streams(4, 10_000))
    emp = (z.values ** 2).mean(axis=0)
    se = np.sqrt(((z.values ** 2 - emp) ** 2).mean(axis=0) / 10_000)
    assert np.all(np.abs(emp - 1) <= 4.5 * se)


def test_strip_mass_linear_in_eps():
    g = GridDomain.circle(1024)
    for eps in (1 / 8, 1 / 16, 1 / 32):
        assert diagonal_strip_mass(g, 2 * eps) == pytest.approx(4 * eps, abs=2 / g.m)


def test_zeps_l2_bound():
    g = GridDomain.circle(128)
    for eps in (1 / 8, 1 / 16):
        z = sample_zeps(build_partition(eps, g), replica_streams(6, 4000))
        dev = (np.exp(z.values - 0.5).mean(axis=1) - 1) ** 2
        assert dev.mean() <= (math.e - 1) * diagonal_strip_mass(g, 2 * eps) + 4 * dev.std() / math.sqrt(4000)


# --- Kahane ---------------------------------------------------------------

def test_kahane_equal_specs_zero():
    g = GridDomain.circle(32)
    spec = CovarianceSpec(Scheme.WHITE_NOISE, 2.0, 0.8)
    d, se = kahane_gap("sqrt", spec, spec, g, 500, RngStream(0))
    assert d == 0.0


def test_kahane_constant_shift_direction():
    g = GridDomain.circle(32)
    base = np.array(build_cov_matrix(CovarianceSpec(Scheme.WHITE_NOISE, 2.0, 0.8), g).entries)
    d, se = kahane_gap("sqrt", base + 0.5, base, g, 2000, RngStream(1))
    assert d <= 2 * se
    assert d < 0


def test_kahane_linear_function_zero_mean_difference():
    g = GridDomain.circle(32)
    base = np.array(build_cov_matrix(CovarianceSpec(Scheme.WHITE_NOISE, 2.0, 0.5), g).entries)
    d, se = kahane_gap("min1", base + 0.3, base, g, 4000, RngStream(2), threshold=1e9)
    assert abs(d) <= 2 * se
