"""Closed-form covariance kernels for log-correlated fields on the circle.

All circle kernels are functions of the arc distance on R/Z.  Every
kernel here is returned *without* the inverse temperature; ``beta**2`` is
applied once, in :func:`build_cov_matrix`.
"""
from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field

import numpy as np

LOG2 = math.log(2.0)
# constant mode of the circle field: 2*sqrt(log 2) * G
CONST_VARIANCE = 4.0 * LOG2

_JITTER_START = 1e-12
_JITTER_CAP = 1e-6


class Scheme(str, enum.Enum):
    LIMIT_CIRCLE = "LimitCircle"
    FOURIER = "FourierPartial"
    WHITE_NOISE = "WhiteNoiseCone"
    CONVOLUTION = "ConvolutionSpectral"
    VAGUELET = "Vaguelet"
    EXACT_CONE = "ExactConeInterval"


class Mollifier(str, enum.Enum):
    GAUSSIAN = "Gaussian"
    POISSON = "Poisson"


class DomainKind(str, enum.Enum):
    CIRCLE = "Circle"
    INTERVAL = "Interval"


def circle_distance(x, y):
    """Arc distance ``min_k |x - y + k|`` on R/Z, in [0, 1/2]."""
    r = np.mod(np.subtract(x, y), 1.0)
    return np.minimum(r, 1.0 - r)


@dataclass(frozen=True)
class GridDomain:
    """Equispaced grid ``x_i = i/m`` on the circle or on [0, 1)."""

    kind: DomainKind
    m: int

    def __post_init__(self):
        object.__setattr__(self, "kind", DomainKind(self.kind))
        if int(self.m) != self.m or self.m < 2:
            raise ValueError(f"grid needs m >= 2 points, got {self.m!r}")
        object.__setattr__(self, "m", int(self.m))

    @classmethod
    def circle(cls, m: int) -> "GridDomain":
        return cls(DomainKind.CIRCLE, m)

    @classmethod
    def interval(cls, m: int) -> "GridDomain":
        return cls(DomainKind.INTERVAL, m)

    @property
    def points(self) -> np.ndarray:
        return np.arange(self.m) / self.m

    @property
    def cell_width(self) -> float:
        return 1.0 / self.m

    def distance(self, x, y):
        if self.kind is DomainKind.CIRCLE:
            return circle_distance(x, y)
        return np.abs(np.subtract(x, y))

    def distance_matrix(self) -> np.ndarray:
        p = self.points
        return self.distance(p[:, None], p[None, :])


@dataclass(frozen=True)
class CovarianceSpec:
    """An analytic covariance family.

    ``level`` is in the scheme's native units: the mode / resolution count
    ``n`` for Fourier, convolution and vaguelet schemes, the cone cut-off
    ``t`` for the two white-noise cone schemes.  It is ignored for the
    limit kernel.
    """

    scheme: Scheme
    level: float = 0
    beta: float = 1.0
    mollifier: Mollifier | None = None

    def __post_init__(self):
        scheme = Scheme(self.scheme)
        object.__setattr__(self, "scheme", scheme)
        if not 0.0 < self.beta <= 1.0:
            raise ValueError(f"beta must lie in (0, 1], got {self.beta}")
        if scheme is Scheme.CONVOLUTION:
            moll = Mollifier(self.mollifier or Mollifier.GAUSSIAN)
            object.__setattr__(self, "mollifier", moll)
        elif self.mollifier is not None:
            raise ValueError(f"mollifier only applies to {Scheme.CONVOLUTION.value}")
        if scheme in (Scheme.WHITE_NOISE, Scheme.EXACT_CONE):
            if not self.level > 0:
                raise ValueError(f"{scheme.value} needs a cut-off t > 0, got {self.level}")
        elif scheme in (Scheme.FOURIER, Scheme.CONVOLUTION):
            if int(self.level) != self.level or self.level < 1:
                raise ValueError(f"{scheme.value} needs an integer level n >= 1, got {self.level}")
            object.__setattr__(self, "level", int(self.level))
        elif scheme is Scheme.VAGUELET:
            if int(self.level) != self.level or self.level < 0:
                raise ValueError(f"Vaguelet needs an integer level n >= 0, got {self.level}")
            object.__setattr__(self, "level", int(self.level))

    @classmethod
    def white_noise_for(cls, n: int, beta: float = 1.0) -> "CovarianceSpec":
        """White-noise cone field matched to Fourier level ``n`` (t = log n)."""
        return cls(Scheme.WHITE_NOISE, math.log(n), beta)

    @property
    def domain(self) -> DomainKind:
        return DomainKind.INTERVAL if self.scheme is Scheme.EXACT_CONE else DomainKind.CIRCLE

    @property
    def translation_invariant(self) -> bool:
        return self.scheme is not Scheme.VAGUELET

    def with_beta(self, beta: float) -> "CovarianceSpec":
        return CovarianceSpec(self.scheme, self.level, beta, self.mollifier)

    def diagonal(self) -> float:
        """Unscaled variance ``kernel(x, x)``; finite for truncated schemes."""
        if self.scheme is Scheme.LIMIT_CIRCLE:
            return math.inf
        if self.scheme is Scheme.VAGUELET:
            x = np.arange(8) / 8.0
            v = vaguelet_cov(self.level, x, x)
            return float(v.mean())
        return float(covariance(self, 0.0, 0.0))


# ---------------------------------------------------------------------------
# pointwise kernels


def log_kernel_circle(d):
    """Limit covariance ``4 log 2 + 2 log(1 / (2 sin(pi d)))``.

    Raises
    ------
    ValueError
        If any distance is zero; the limit kernel is infinite on the diagonal.
    """
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0.0):
        raise ValueError("limit kernel is singular at distance 0")
    return CONST_VARIANCE - 2.0 * np.log(2.0 * np.sin(np.pi * d))


def _cosine_series(weights: np.ndarray, ks: np.ndarray, d: np.ndarray, chunk: int = 1 << 20) -> np.ndarray:
    # sum_k weights[k] * cos(2 pi k d), chunked over k to bound memory
    flat = np.ravel(d)
    out = np.zeros(flat.shape)
    step = max(1, chunk // max(flat.size, 1))
    for lo in range(0, ks.size, step):
        kk = ks[lo:lo + step]
        out += np.cos(2.0 * np.pi * np.outer(flat, kk)) @ weights[lo:lo + step]
    return out.reshape(np.shape(d))


def fourier_cov(n: int, d):
    """Covariance of the degree-``n`` Fourier partial sum of the circle field."""
    if n < 1:
        raise ValueError("fourier_cov needs n >= 1")
    ks = np.arange(1, n + 1, dtype=float)
    d = np.asarray(d, dtype=float)
    return CONST_VARIANCE + 2.0 * _cosine_series(1.0 / ks, ks, d)


def whitenoise_branch_point(t: float) -> float:
    return 2.0 / math.pi * math.atan(math.pi / 2.0 * math.exp(-t))


def whitenoise_cov(t: float, d):
    """Covariance ``h_t`` of the periodic hyperbolic white-noise cone field.

    Beyond the branch point ``(2/pi) arctan((pi/2) e^{-t})`` the cones are
    uncut where they meet and ``h_t`` equals the limit kernel.
    """
    if not t > 0:
        raise ValueError(f"white-noise cut-off must be positive, got {t}")
    d = np.asarray(d, dtype=float)
    a = math.pi / 2.0 * math.exp(-t)
    near = d <= whitenoise_branch_point(t)
    out = np.empty(d.shape)
    dn = d[near]
    out[near] = (
        -2.0 * dn * math.exp(t)
        + 2.0 * t
        - 2.0 * np.log(np.cos(np.pi / 2.0 * dn))
        + math.log(math.pi ** 2 * math.exp(-2.0 * t) + 4.0)
        + 2.0 * math.atan(a) / a
        - 2.0 * math.log(math.pi)
    )
    out[~near] = log_kernel_circle(d[~near])
    return out if out.ndim else float(out)


def conv_multiplier(mollifier: Mollifier, eps: float, k):
    """Field-level Fourier multiplier of the mass-one mollifier at scale ``eps``.

    Gaussian ``exp(-x^2/2)/sqrt(2 pi)`` gives ``exp(-2 pi^2 k^2 eps^2)``;
    the Poisson profile ``2 / (pi (1 + 4 pi^2 x^2))`` gives ``exp(-|k| eps)``,
    i.e. ``r^|k|`` for the harmonic extension at radius ``r = exp(-eps)``.
    """
    if not eps > 0:
        raise ValueError("mollifier scale must be positive")
    k = np.asarray(k, dtype=float)
    if Mollifier(mollifier) is Mollifier.GAUSSIAN:
        return np.exp(-2.0 * np.pi ** 2 * k ** 2 * eps ** 2)
    return np.exp(-np.abs(k) * eps)


def conv_cutoff(mollifier: Mollifier, eps: float) -> int:
    """Number of modes after which the squared multiplier is below 1e-16."""
    if Mollifier(mollifier) is Mollifier.GAUSSIAN:
        tail = math.sqrt(math.log(1e16) / (4.0 * math.pi ** 2)) / eps
    else:
        tail = math.log(1e16) / (2.0 * eps)
    return int(max(4 * math.ceil(1.0 / eps), math.ceil(tail)))


def convolution_cov(mollifier: Mollifier, n: int, d, eps: float | None = None, cutoff: int | None = None):
    """Covariance of the mollified field ``phi_eps * X`` with ``eps = 1/n``.

    The Poisson sum is evaluated in closed form
    (``sum q^k cos(k theta) / k = -log|1 - q e^{i theta}|``) unless an explicit
    ``cutoff`` asks for the truncated series.
    """
    if n < 1:
        raise ValueError("convolution_cov needs n >= 1")
    eps = 1.0 / n if eps is None else eps
    mollifier = Mollifier(mollifier)
    d = np.asarray(d, dtype=float)
    if mollifier is Mollifier.POISSON and cutoff is None:
        q = math.exp(-2.0 * eps)
        return CONST_VARIANCE - 2.0 * np.log(np.abs(1.0 - q * np.exp(2j * np.pi * d)))
    kmax = conv_cutoff(mollifier, eps) if cutoff is None else int(cutoff)
    ks = np.arange(1, kmax + 1, dtype=float)
    w = conv_multiplier(mollifier, eps, ks) ** 2 / ks
    return CONST_VARIANCE + 2.0 * _cosine_series(w, ks, d)


def exact_cone_cov_interval(t: float, x, y):
    """Covariance ``2 m_hyp(A_t(x) & A_t(y))`` of the exactly scale-invariant field.

    At height ``s`` the cone slices overlap on ``max(0, min(s, 1) - D)``,
    ``D = |x - y|``, so the hyperbolic area is ``1 - log s0 - D/s0`` with
    ``s0 = max(e^{-t}, D)`` for ``D < 1`` and zero otherwise.
    """
    if not t > 0:
        raise ValueError(f"cone cut-off must be positive, got {t}")
    dist = np.abs(np.subtract(x, y)).astype(float)
    s0 = np.maximum(math.exp(-t), dist)
    area = np.where(dist < 1.0, 1.0 - np.log(np.minimum(s0, 1.0)) - dist / s0, 0.0)
    return 2.0 * area


# ---------------------------------------------------------------------------
# Haar vaguelets


def haar_vaguelet_coeff(j: int, k: int, freq):
    """Fourier coefficient of the periodized Haar vaguelet ``nu_{j,k}``.

    Uses ``psi_hat(f) = int_0^1 psi_{j,k}(x) e^{-2 pi i f x} dx`` and
    ``nu_hat(f) = psi_hat(f) / sqrt(2 pi |f|)``; the zero mode is 0.
    """
    if not 0 <= k < 2 ** j:
        raise ValueError(f"shift k={k} outside 0..{2 ** j - 1}")
    f = np.asarray(freq, dtype=float)
    a = 2.0 ** j
    safe = np.where(f == 0, 1.0, f)
    psi_hat = (
        math.sqrt(a)
        * np.exp(-2j * np.pi * safe * k / a)
        * (1.0 - np.exp(-1j * np.pi * safe / a)) ** 2
        / (2j * np.pi * safe)
    )
    out = psi_hat / np.sqrt(2.0 * np.pi * np.abs(safe))
    return np.where(f == 0, 0.0 + 0.0j, out)


def vaguelet_from_fourier(j: int, k: int, x, cutoff: int):
    """Synthesize ``nu_{j,k}`` from its Fourier coefficients ``|f| <= cutoff``.

    Converges only like ``cutoff**-1/2`` near the cusps of the Haar
    half-integral; used as a cross-check of :func:`periodized_vaguelet`.
    """
    f = np.arange(1, cutoff + 1)
    c = haar_vaguelet_coeff(j, k, f)
    x = np.asarray(x, dtype=float)
    phase = np.exp(2j * np.pi * np.multiply.outer(x, f))
    return 2.0 * np.real(phase @ c)


_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _half_int(v):
    # antiderivative of |v|^{-1/2}
    return 2.0 * np.sign(v) * np.sqrt(np.abs(v))


def _half_int_derivs(v, p):
    # p-th derivative of _half_int for v > 0
    if p == 0:
        return 2.0 * np.sqrt(v)
    coef = 1.0
    for i in range(1, p):
        coef *= -(2 * i - 1) / 2.0
    return coef * v ** (0.5 - p)


def _second_diff(fn, v):
    return fn(v) - 2.0 * fn(v - 0.5) + fn(v - 1.0)


def vaguelet_profile(u):
    """Half-integral of the Haar wavelet on the real line."""
    return _second_diff(_half_int, np.asarray(u, dtype=float)) / _SQRT_2PI


def _tail(c, a, start):
    # Euler-Maclaurin for sum_{i >= start} profile(c + a i); requires c + a*start >> a
    v0 = c + a * start
    integral = -_second_diff(lambda v: 4.0 / 3.0 * v ** 1.5, v0) / a
    total = integral + 0.5 * _second_diff(lambda v: _half_int_derivs(v, 0), v0)
    for p, b in ((1, 1.0 / 12.0), (3, -1.0 / 720.0), (5, 1.0 / 30240.0)):
        total -= b * a ** p * _second_diff(lambda v, p=p: _half_int_derivs(v, p), v0)
    return total / _SQRT_2PI


def periodized_vaguelet(j: int, k: int, x):
    """Real-space values of ``nu_{j,k}(x) = sum_l nu(2^j (x - l) - k)``."""
    a = 2.0 ** j
    r = np.mod(a * np.asarray(x, dtype=float) - k, a)
    return _periodized_reduced(r, a)


def _periodized_reduced(r, a):
    half = max(8, math.ceil(17.0 / a))
    out = np.zeros(np.shape(r))
    for i in range(-half, half + 1):
        out += vaguelet_profile(r + a * i)
    # antisymmetry nu(1 - u) = -nu(u) folds the left tail onto the right one
    out += _tail(r, a, half + 1) - _tail(1.0 - r, a, half + 1)
    return out


def vaguelet_basis(n: int, x) -> np.ndarray:
    """Rows ``nu_{j,k}(x)`` for ``j = 0..n``, ``k = 0..2^j - 1`` in that order."""
    x = np.asarray(x, dtype=float)
    rows = []
    for j in range(n + 1):
        a = 2 ** j
        ks = np.arange(a, dtype=float)[:, None]
        rows.append(_periodized_reduced(np.mod(a * x[None, :] - ks, a), float(a)))
    return np.concatenate(rows, axis=0)


def vaguelet_basis_grid(n: int, m: int) -> np.ndarray:
    """:func:`vaguelet_basis` at the grid points ``i/m``.

    On the grid ``2^j x_i - k`` takes only ``max(m, 2^j)`` distinct values
    modulo ``2^j``, so each level needs one profile evaluation per value.
    """
    i = np.arange(m)
    rows = []
    for j in range(n + 1):
        a = 2 ** j
        size = m * a // math.gcd(m, a)  # lcm: lattice spacing a/size
        table = _periodized_reduced(np.arange(size) * (a / size), float(a))
        ks = np.arange(a)[:, None]
        idx = (i[None, :] * (size // m) - ks * (size // a)) % size
        rows.append(table[idx])
    return np.concatenate(rows, axis=0)


def vaguelet_cov(n: int, x, y):
    """``4 log 2 + 2 pi sum_{j<=n} sum_k nu_{j,k}(x) nu_{j,k}(y)``, elementwise."""
    if n < 0:
        raise ValueError("vaguelet level must be >= 0")
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    bx = vaguelet_basis(n, x.ravel())
    by = vaguelet_basis(n, y.ravel())
    out = CONST_VARIANCE + 2.0 * np.pi * np.einsum("bi,bi->i", bx, by)
    return out.reshape(x.shape)


# ---------------------------------------------------------------------------
# dispatch and matrices


def covariance(spec: CovarianceSpec, x, y):
    """Evaluate the unscaled kernel of ``spec`` at point pairs (broadcasting)."""
    s = spec.scheme
    if s is Scheme.EXACT_CONE:
        return exact_cone_cov_interval(spec.level, x, y)
    if s is Scheme.VAGUELET:
        return vaguelet_cov(spec.level, x, y)
    return covariance_at_distance(spec, circle_distance(x, y))


def covariance_at_distance(spec: CovarianceSpec, d):
    """Unscaled kernel as a function of distance (translation-invariant schemes)."""
    s = spec.scheme
    if s is Scheme.LIMIT_CIRCLE:
        return log_kernel_circle(d)
    if s is Scheme.FOURIER:
        return fourier_cov(spec.level, d)
    if s is Scheme.WHITE_NOISE:
        return whitenoise_cov(spec.level, d)
    if s is Scheme.CONVOLUTION:
        return convolution_cov(spec.mollifier, spec.level, d)
    if s is Scheme.EXACT_CONE:
        return exact_cone_cov_interval(spec.level, 0.0, d)
    raise ValueError(f"{s.value} is not translation invariant")


def kernel_matrix(spec: CovarianceSpec, grid: GridDomain) -> np.ndarray:
    """Unscaled ``m x m`` kernel matrix on the grid."""
    if spec.domain is not grid.kind:
        raise ValueError(f"{spec.scheme.value} lives on the {spec.domain.value} domain, grid is {grid.kind.value}")
    idx = np.arange(grid.m)
    if spec.scheme is Scheme.VAGUELET:
        b = vaguelet_basis_grid(spec.level, grid.m)
        return CONST_VARIANCE + 2.0 * np.pi * (b.T @ b)
    row = covariance_at_distance(spec, grid.distance(grid.points, 0.0))
    if grid.kind is DomainKind.CIRCLE:
        return row[(idx[:, None] - idx[None, :]) % grid.m]
    return row[np.abs(idx[:, None] - idx[None, :])]


@dataclass(frozen=True)
class CovMatrix:
    """Grid covariance with the diagonal jitter that made it factorizable."""

    entries: np.ndarray
    jitter: float
    factor: np.ndarray = field(repr=False)

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.entries).copy()


def factorize(entries: np.ndarray) -> tuple[np.ndarray, float]:
    """Cholesky factor with escalating diagonal jitter.

    Tries no jitter, then ``1e-12 * max_diag``, growing tenfold up to
    ``1e-6 * max_diag``.  Returns ``(L, jitter)``.
    """
    scale = float(np.max(np.diag(entries)))
    jitter = 0.0
    eye = np.eye(entries.shape[0])
    while True:
        try:
            return np.linalg.cholesky(entries + jitter * eye), jitter
        except np.linalg.LinAlgError:
            pass
        jitter = _JITTER_START * scale if jitter == 0.0 else jitter * 10.0
        if jitter > _JITTER_CAP * scale * (1 + 1e-9):
            raise np.linalg.LinAlgError(
                f"covariance not factorizable with jitter up to {_JITTER_CAP:g} x diag"
            )


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


# a 4096-point matrix and its factor take ~270 MB, so keep few
@functools.lru_cache(maxsize=4)
def build_cov_matrix(spec: CovarianceSpec, grid: GridDomain) -> CovMatrix:
    """``beta^2 * kernel`` on the grid, factorized.  Results are cached and read-only."""
    if spec.scheme is Scheme.LIMIT_CIRCLE:
        raise ValueError("limit kernel is infinite on the diagonal; pick a truncated scheme")
    entries = spec.beta ** 2 * kernel_matrix(spec, grid)
    entries = 0.5 * (entries + entries.T)
    factor, jitter = factorize(entries)
    return CovMatrix(_readonly(entries), jitter, _readonly(factor))


def matched_spec(template: CovarianceSpec, n: int) -> CovarianceSpec:
    """``template`` at the truncation matching Fourier degree ``n``.

    Cone schemes cut at ``t = log n``; vaguelets stop at ``j = log2 n`` so
    that all schemes share the near-diagonal variance ``2 log n + O(1)``.
    """
    s = template.scheme
    if s in (Scheme.WHITE_NOISE, Scheme.EXACT_CONE):
        level = math.log(n)
    elif s is Scheme.VAGUELET:
        level = int(round(math.log2(n)))
    else:
        level = n
    return CovarianceSpec(s, level, template.beta, template.mollifier)
