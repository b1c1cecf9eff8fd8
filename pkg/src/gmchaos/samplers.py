"""Reproducible realizations of the approximating Gaussian fields.

Every sampler is a pure function of its inputs and an :class:`~gmchaos.rng.RngStream`
(or a list of them, one per replica).  With a list of ``R`` streams the
returned ``values`` have shape ``(R, m)``; row ``r`` is bit-identical to
sampling with ``streams[r]`` alone.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import (
    CONST_VARIANCE,
    CovarianceSpec,
    DomainKind,
    GridDomain,
    Mollifier,
    Scheme,
    build_cov_matrix,
    conv_cutoff,
    conv_multiplier,
    factorize,
    kernel_matrix,
    vaguelet_basis_grid,
)
from .rng import RngStream, Streams, standard_normals

SQRT_CONST = math.sqrt(CONST_VARIANCE)  # 2 sqrt(log 2)


@dataclass
class FieldSample:
    """One or more realizations of a field on a grid.

    ``variance`` is the analytic ``E[X(x_i)^2]`` of what was sampled.
    ``beta_applied`` is set when ``beta`` already sits inside the values
    (factorization path); spectral samplers leave it ``None`` and the
    chaos layer applies ``beta`` instead.
    """

    grid: GridDomain
    values: np.ndarray
    variance: np.ndarray
    scheme: CovarianceSpec | None = None
    beta_applied: float | None = None
    provenance: dict = field(default_factory=dict)

    @property
    def replicas(self) -> int:
        return 1 if self.values.ndim == 1 else self.values.shape[0]


@dataclass
class SpectralCoefficients:
    """Constant mode ``G`` and cosine / sine amplitudes ``A_k, B_k``, k = 1..N."""

    G: np.ndarray
    A: np.ndarray
    B: np.ndarray

    @property
    def modes(self) -> int:
        return self.A.shape[-1]


def _provenance(streams: Streams, **extra) -> dict:
    if isinstance(streams, RngStream):
        info = {"seed": streams.master_seed, "replicas": [streams.replica], "purpose": streams.purpose}
    else:
        info = {
            "seed": streams[0].master_seed if streams else None,
            "replicas": [s.replica for s in streams],
            "purpose": streams[0].purpose if streams else None,
        }
    info.update(extra)
    return info


def _require_circle(grid: GridDomain):
    if grid.kind is not DomainKind.CIRCLE:
        raise ValueError("spectral and vaguelet fields live on the circle")


def draw_spectral_coefficients(modes: int, rng: Streams) -> SpectralCoefficients:
    """Draw ``G`` then interleaved ``(A_k, B_k)``.

    The layout makes draws prefix-stable: asking for more modes from the
    same stream leaves the first ones unchanged.
    """
    z = standard_normals(rng, 1 + 2 * modes)
    return SpectralCoefficients(z[..., 0], z[..., 1::2], z[..., 2::2])


def _synthesize(coeffs: SpectralCoefficients, weights: np.ndarray, grid: GridDomain, constant: bool) -> np.ndarray:
    # sum_k weights[k-1] (A_k cos 2 pi k x + B_k sin 2 pi k x) on x_i = i/m, folded onto m FFT bins
    m = grid.m
    nk = weights.size
    c = weights * (coeffs.A[..., :nk] - 1j * coeffs.B[..., :nk])
    lead = c.shape[:-1]
    width = -(-(nk + 1) // m) * m
    full = np.zeros(lead + (width,), dtype=complex)
    full[..., 1:nk + 1] = c
    folded = full.reshape(lead + (width // m, m)).sum(axis=-2)
    values = math.sqrt(2.0) * m * np.fft.ifft(folded, axis=-1).real
    if constant:
        values = values + SQRT_CONST * np.asarray(coeffs.G)[..., None]
    return values


def fourier_weights(n: int) -> np.ndarray:
    return 1.0 / np.sqrt(np.arange(1, n + 1, dtype=float))


def sample_fourier_field(n: int, grid: GridDomain, rng: Streams, modes: int | None = None,
                         constant_mode: bool = True) -> tuple[FieldSample, SpectralCoefficients]:
    """Degree-``n`` partial sum of the circle field.

    ``modes >= n`` draws extra coefficients (for coupling with the
    convolution field) without changing this field.  ``constant_mode=False``
    drops the ``2 sqrt(log 2) G`` term.
    """
    if n < 1:
        raise ValueError("Fourier level must be >= 1")
    _require_circle(grid)
    modes = n if modes is None else modes
    if modes < n:
        raise ValueError("cannot draw fewer modes than the field uses")
    coeffs = draw_spectral_coefficients(modes, rng)
    weights = fourier_weights(n)
    values = _synthesize(coeffs, weights, grid, constant_mode)
    var = 2.0 * np.sum(weights ** 2) + (CONST_VARIANCE if constant_mode else 0.0)
    sample = FieldSample(
        grid, values, np.full(grid.m, var), CovarianceSpec(Scheme.FOURIER, n),
        provenance=_provenance(rng, scheme=Scheme.FOURIER.value, level=n, constant_mode=constant_mode),
    )
    return sample, coeffs


def sample_convolution_field(coeffs: SpectralCoefficients, mollifier: Mollifier, eps: float,
                             grid: GridDomain, multipliers: np.ndarray | None = None) -> FieldSample:
    """Mollified field built from the *same* coefficients as a Fourier field.

    Mode ``k`` is damped by ``conv_multiplier(mollifier, eps, k)`` (or by the
    explicit ``multipliers``).  The variance is the exact sum over the
    modes used.
    """
    _require_circle(grid)
    if multipliers is None:
        need = conv_cutoff(mollifier, eps)
        if coeffs.modes < need:
            raise ValueError(f"need {need} modes for eps={eps:g}, coefficients carry {coeffs.modes}")
        multipliers = conv_multiplier(mollifier, eps, np.arange(1, need + 1))
    multipliers = np.asarray(multipliers, dtype=float)
    weights = multipliers * fourier_weights(multipliers.size)
    values = _synthesize(coeffs, weights, grid, True)
    var = CONST_VARIANCE + 2.0 * np.sum(weights ** 2)
    n = round(1.0 / eps)
    spec = None
    if n >= 1 and math.isclose(n * eps, 1.0):
        spec = CovarianceSpec(Scheme.CONVOLUTION, n, mollifier=Mollifier(mollifier))
    return FieldSample(
        grid, values, np.full(grid.m, var), spec,
        provenance={"scheme": Scheme.CONVOLUTION.value, "mollifier": Mollifier(mollifier).value,
                    "eps": eps, "modes": int(multipliers.size)},
    )


def sample_cholesky_field(spec: CovarianceSpec, grid: GridDomain, rng: Streams) -> FieldSample:
    """``L z`` with ``L`` the factor of ``build_cov_matrix(spec, grid)``; beta included."""
    cov = build_cov_matrix(spec, grid)
    z = standard_normals(rng, grid.m)
    values = z @ cov.factor.T
    return FieldSample(
        grid, values, cov.diagonal + cov.jitter, spec, beta_applied=spec.beta,
        provenance=_provenance(rng, scheme=spec.scheme.value, level=spec.level, jitter=cov.jitter),
    )


@functools.lru_cache(maxsize=2)
def _vaguelet_tables(n: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    basis = vaguelet_basis_grid(n, m)
    var = CONST_VARIANCE + 2.0 * np.pi * np.sum(basis ** 2, axis=0)
    basis.flags.writeable = False
    var.flags.writeable = False
    return basis, var


def sample_vaguelet_field(n: int, grid: GridDomain, rng: Streams) -> FieldSample:
    """``2 sqrt(log 2) G + sqrt(2 pi) sum_{j<=n} sum_k A_{j,k} nu_{j,k}`` on the grid."""
    if n < 0:
        raise ValueError("vaguelet level must be >= 0")
    _require_circle(grid)
    basis, var = _vaguelet_tables(n, grid.m)
    z = standard_normals(rng, 1 + basis.shape[0])
    values = SQRT_CONST * z[..., :1] + math.sqrt(2.0 * np.pi) * (z[..., 1:] @ basis)
    return FieldSample(
        grid, values, var.copy(), CovarianceSpec(Scheme.VAGUELET, n),
        provenance=_provenance(rng, scheme=Scheme.VAGUELET.value, level=n),
    )


@functools.lru_cache(maxsize=2)
def _nested_factor(levels: tuple, grid: GridDomain, beta: float):
    blocks = {t: beta ** 2 * kernel_matrix(CovarianceSpec(Scheme.WHITE_NOISE, t), grid) for t in levels}
    joint = np.block([[blocks[min(s, t)] for t in levels] for s in levels])
    joint = 0.5 * (joint + joint.T)
    factor, jitter = factorize(joint)
    factor.flags.writeable = False
    return np.diag(joint) + jitter, factor, jitter


def sample_nested_whitenoise(levels, grid: GridDomain, rng: Streams, beta: float = 1.0) -> list[FieldSample]:
    """Joint draw of white-noise cone fields at increasing cut-offs.

    The slices have cross-covariance ``h_{min(t, s)}``: the cone at ``t`` is
    contained in the cone at ``s > t``, so increments are independent of
    the past.
    """
    levels = tuple(float(t) for t in levels)
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("levels must be strictly increasing")
    if len(levels) == 1:
        return [sample_cholesky_field(CovarianceSpec(Scheme.WHITE_NOISE, levels[0], beta), grid, rng)]
    var, factor, jitter = _nested_factor(levels, grid, beta)
    m = grid.m
    z = standard_normals(rng, len(levels) * m)
    joint = z @ factor.T
    out = []
    for i, t in enumerate(levels):
        out.append(FieldSample(
            grid, joint[..., i * m:(i + 1) * m], var[i * m:(i + 1) * m],
            CovarianceSpec(Scheme.WHITE_NOISE, t, beta), beta_applied=beta,
            provenance=_provenance(rng, scheme="NestedWhiteNoise", level=t, levels=list(levels), jitter=jitter),
        ))
    return out


def sample_field(spec: CovarianceSpec, grid: GridDomain, rng: Streams) -> FieldSample:
    """Sample ``spec`` with its natural method.

    Fourier, convolution and vaguelet fields are synthesized spectrally
    and come back without ``beta``; cone fields are factorized and carry
    ``spec.beta`` (see :attr:`FieldSample.beta_applied`).
    """
    s = spec.scheme
    if s is Scheme.FOURIER:
        return sample_fourier_field(spec.level, grid, rng)[0]
    if s is Scheme.CONVOLUTION:
        eps = 1.0 / spec.level
        coeffs = draw_spectral_coefficients(conv_cutoff(spec.mollifier, eps), rng)
        return sample_convolution_field(coeffs, spec.mollifier, eps, grid)
    if s is Scheme.VAGUELET:
        return sample_vaguelet_field(spec.level, grid, rng)
    if s in (Scheme.WHITE_NOISE, Scheme.EXACT_CONE):
        return sample_cholesky_field(spec, grid, rng)
    raise ValueError(f"cannot sample {s.value}: infinite variance")
