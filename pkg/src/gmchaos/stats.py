"""Estimators and distances used to check the chaos constructions."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate as _integrate
from scipy import stats as _stats
from scipy.special import kolmogorov

from .chaos import ChaosMeasure
from .kernels import (
    CovarianceSpec,
    DomainKind,
    GridDomain,
    Scheme,
    covariance,
    covariance_at_distance,
    kernel_matrix,
    matched_spec,
)
from .rng import RngStream
from .samplers import sample_field

MIN_REPLICAS = 100


def ks_two_sample(xs, ys) -> tuple[float, float]:
    """Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.

    Returns
    -------
    D : float
        ``sup |F_x - F_y|`` over the pooled sample.
    p : float
        Two-sided p-value from the Kolmogorov distribution.
    """
    xs = np.asarray(xs, dtype=float).ravel()
    ys = np.asarray(ys, dtype=float).ravel()
    if xs.size == 0 or ys.size == 0:
        raise ValueError("KS test needs two nonempty samples")
    d = float(_stats.ks_2samp(xs, ys).statistic)
    en = xs.size * ys.size / (xs.size + ys.size)
    return d, float(kolmogorov(math.sqrt(en) * d))


@dataclass(frozen=True)
class MomentReport:
    q: float
    estimate: float
    stderr: float
    replicas: int


def _jackknife_mean_se(y: np.ndarray) -> float:
    n = y.size
    loo = (y.sum() - y) / (n - 1)
    return float(math.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2)))


def empirical_moment(samples, q: float) -> MomentReport:
    """Mean of ``samples**q`` with a jackknife standard error."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < MIN_REPLICAS:
        raise ValueError(f"need at least {MIN_REPLICAS} samples, got {x.size}")
    if q < 0:
        raise ValueError("moment order must be nonnegative")
    if q == 0:
        return MomentReport(0.0, 1.0, 0.0, x.size)
    if np.any(x < 0) and q != int(q):
        raise ValueError("fractional moment of a negative sample")
    y = x ** q
    if np.all(y == y[0]):
        return MomentReport(float(q), float(y[0]), 0.0, x.size)
    return MomentReport(float(q), float(y.mean()), _jackknife_mean_se(y), x.size)


def second_moment_quadrature(beta: float, spec: CovarianceSpec, resolution: int | None = None) -> float:
    """``int int exp(beta^2 C(x, y)) dx dy`` for the unscaled kernel of ``spec``.

    Translation-invariant circle kernels reduce to ``int_0^1 exp(beta^2 C(u)) du``.
    The limit kernel is integrated with the algebraic endpoint weight
    ``u^{-2 beta^2}`` split off; truncated circle kernels are smooth and
    periodic, so the trapezoid rule on ``resolution`` points is spectrally
    accurate.  The vaguelet kernel is averaged over a ``resolution`` grid.
    """
    if beta == 0:
        return 1.0
    b2 = beta ** 2
    s = spec.scheme
    if s is Scheme.LIMIT_CIRCLE:
        if 2.0 * b2 >= 1.0:
            raise ValueError("limit kernel second moment diverges for beta^2 >= 1/2")
        # exp(b2 K(u)) = 2^{4 b2} (2 sin(pi u))^{-2 b2};  pull out u^{-2 b2} near 0
        def g(u):
            ratio = 2.0 * math.sin(math.pi * u) / u if u > 0 else 2.0 * math.pi
            return 2.0 ** (4.0 * b2) * ratio ** (-2.0 * b2)
        val, _ = _integrate.quad(g, 0.0, 0.5, weight="alg", wvar=(-2.0 * b2, 0.0),
                                 epsabs=1e-13, epsrel=1e-12, limit=200)
        return 2.0 * val
    if s is Scheme.EXACT_CONE:
        t = spec.level
        f = lambda u: 2.0 * (1.0 - u) * math.exp(b2 * float(covariance_at_distance(spec, u)))  # noqa: E731
        val, _ = _integrate.quad(f, 0.0, 1.0, points=[math.exp(-t)], epsabs=1e-12, epsrel=1e-11, limit=200)
        return val
    if s is Scheme.VAGUELET:
        m = resolution or max(1024, 4 * 2 ** spec.level)
        k = kernel_matrix(spec, GridDomain.circle(m))
        return float(np.mean(np.exp(b2 * k)))
    n = spec.level
    r = resolution or max(1 << 14, 16 * n)
    u = np.arange(r) / r
    return float(np.mean(np.exp(b2 * covariance_at_distance(spec, np.minimum(u, 1.0 - u)))))


def grid_second_moment(spec: CovarianceSpec, grid: GridDomain) -> float:
    """Exact ``E[(total mass)^2]`` of the Lebesgue-rule chaos of ``spec`` on ``grid``.

    Equals ``mean_ij exp(beta^2 K(x_i, x_j))``; ``sqrt((value - 1) / R)`` is
    then the exact standard error of an ``R``-replica mean of the mass.
    """
    return float(np.mean(np.exp(spec.beta ** 2 * kernel_matrix(spec, grid))))


def kr_distance(a: ChaosMeasure, b: ChaosMeasure) -> float:
    """Kantorovich-Rubinstein distance with potentials anchored at ``x_0``.

    The supremum runs over 1-Lipschitz ``f`` with ``f(x_0) = 0``, which is
    finite for unequal masses.  Moving the mass difference onto ``x_0``
    turns it into an equal-mass transport problem solved exactly: on the
    circle ``W1 = dx * sum |D_i - median(D)|``, on the interval
    ``W1 = dx * sum |D_i|``, with ``D`` the cumulative signed mass.
    """
    if a.grid != b.grid:
        raise ValueError("measures live on different grids")
    wa = np.asarray(a.weights, dtype=float)
    wb = np.asarray(b.weights, dtype=float)
    if wa.ndim != 1 or wb.ndim != 1:
        raise ValueError("kr_distance compares single measures, not replica batches")
    if not (np.all(np.isfinite(wa)) and np.all(np.isfinite(wb))):
        raise ValueError("measures must have finite mass")
    diff = wa - wb
    diff[0] -= diff.sum()
    cum = np.cumsum(diff)
    dx = a.grid.cell_width
    if a.grid.kind is DomainKind.CIRCLE:
        return float(dx * np.sum(np.abs(cum - np.median(cum))))
    return float(dx * np.sum(np.abs(cum[:-1])))


@dataclass
class GapCurve:
    """Covariance gaps per level; ``off_diagonal[delta][i]`` belongs to ``levels[i]``."""

    levels: list
    sup_gap: list
    off_diagonal: dict = field(default_factory=dict)

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise ValueError("gap curve levels must be strictly increasing")

    def rows(self) -> list[list[float]]:
        deltas = sorted(self.off_diagonal)
        return [[n, g] + [self.off_diagonal[d][i] for d in deltas]
                for i, (n, g) in enumerate(zip(self.levels, self.sup_gap))]


def _grid_cov(spec: CovarianceSpec, grid: GridDomain, full: bool):
    if not full:
        d = grid.distance(grid.points, 0.0)
        return covariance_at_distance(spec, d), d
    return kernel_matrix(spec, grid), grid.distance_matrix()


def sup_cov_gap(spec_a: CovarianceSpec, spec_b: CovarianceSpec, grid: GridDomain, levels: Sequence[int],
                level_map: Callable | None = None, deltas=(0.05, 0.1, 0.2)) -> GapCurve:
    """``sup |C_a - C_b|`` on the grid, overall and restricted to ``dist > delta``.

    ``levels`` are Fourier-equivalent ``n``; ``level_map(template, n)`` turns
    them into scheme truncations (default :func:`~gmchaos.kernels.matched_spec`,
    i.e. ``t = log n`` for cone fields, ``log2 n`` for vaguelets).
    """
    level_map = level_map or matched_spec
    full = not (spec_a.translation_invariant and spec_b.translation_invariant)
    sups, off = [], {float(d): [] for d in deltas}
    for n in levels:
        a, b = level_map(spec_a, n), level_map(spec_b, n)
        ca, dist = _grid_cov(a, grid, full)
        cb, _ = _grid_cov(b, grid, full)
        gap = np.abs(ca - cb)
        sups.append(float(gap.max()))
        for d in off:
            mask = dist > d
            off[d].append(float(gap[mask].max()) if mask.any() else 0.0)
    return GapCurve(list(levels), sups, off)


@dataclass(frozen=True)
class CovarianceCheck:
    pairs: np.ndarray
    empirical: np.ndarray
    analytic: np.ndarray
    stderr: np.ndarray
    replicas: int

    @property
    def normalized_deviation(self) -> np.ndarray:
        return np.abs(self.empirical - self.analytic) / self.stderr

    @property
    def max_normalized_deviation(self) -> float:
        return float(self.normalized_deviation.max())


def mc_covariance_check(spec: CovarianceSpec, grid: GridDomain, probe_pairs, replicas: int,
                        rng: RngStream, chunk: int = 5000) -> CovarianceCheck:
    """Compare ``E[X(x_i) X(x_j)]`` from ``replicas`` draws with the analytic kernel.

    ``probe_pairs`` are grid index pairs.  The fields are centred, so the
    estimator is the mean of products with its own standard error.
    """
    if replicas < 1000:
        raise ValueError(f"covariance check needs at least 1000 replicas, got {replicas}")
    pairs = np.asarray(probe_pairs, dtype=int).reshape(-1, 2)
    s1 = np.zeros(len(pairs))
    s2 = np.zeros(len(pairs))
    scale = None
    for lo in range(0, replicas, chunk):
        streams = [RngStream(rng.master_seed, r, rng.purpose)
                   for r in range(rng.replica + lo, rng.replica + min(replicas, lo + chunk))]
        sample = sample_field(spec, grid, streams)
        scale = sample.beta_applied or 1.0
        prod = sample.values[:, pairs[:, 0]] * sample.values[:, pairs[:, 1]]
        s1 += prod.sum(axis=0)
        s2 += (prod ** 2).sum(axis=0)
    mean = s1 / replicas
    var = (s2 - replicas * mean ** 2) / (replicas - 1)
    pts = grid.points
    analytic = scale ** 2 * np.asarray(covariance(spec, pts[pairs[:, 0]], pts[pairs[:, 1]]), dtype=float)
    return CovarianceCheck(pairs, mean, analytic, np.sqrt(var / replicas), replicas)
