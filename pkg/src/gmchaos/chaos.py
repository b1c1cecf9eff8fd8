"""Discrete chaos measures built from field realizations."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import CovarianceSpec, GridDomain
from .samplers import FieldSample, sample_field


class NormalizationKind(str, enum.Enum):
    LEBESGUE = "Lebesgue"
    SQRT_LOG_N = "SqrtLogN"
    SQRT_N_LOG2 = "SqrtNLog2"
    SQRT_T = "SqrtT"


@dataclass(frozen=True)
class NormalizationRule:
    kind: NormalizationKind = NormalizationKind.LEBESGUE
    parameter: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", NormalizationKind(self.kind))


LEBESGUE = NormalizationRule()


def normalization_factor(rule: NormalizationRule) -> float:
    """Density of the reference measure with respect to ``dx``.

    ``Lebesgue -> 1``, ``SqrtLogN -> sqrt(log n)``, ``SqrtNLog2 -> sqrt(n log 2)``,
    ``SqrtT -> sqrt(t)``.
    """
    kind, p = rule.kind, rule.parameter
    if kind is NormalizationKind.LEBESGUE:
        return 1.0
    if p is None:
        raise ValueError(f"{kind.value} needs a level parameter")
    if kind is NormalizationKind.SQRT_LOG_N:
        if p <= 1:
            raise ValueError("SqrtLogN needs n > 1")
        return math.sqrt(math.log(p))
    if kind is NormalizationKind.SQRT_N_LOG2:
        if p <= 0:
            raise ValueError("SqrtNLog2 needs n > 0")
        return math.sqrt(p * math.log(2.0))
    if p <= 0:
        raise ValueError("SqrtT needs t > 0")
    return math.sqrt(p)


@dataclass
class ChaosMeasure:
    """Cell masses ``weights[..., i]`` of the measure on the cell at ``x_i``."""

    grid: GridDomain
    weights: np.ndarray
    beta: float
    rule: NormalizationRule = LEBESGUE
    provenance: dict = field(default_factory=dict)

    @property
    def total_mass(self) -> np.ndarray:
        return self.weights.sum(axis=-1)


def build_measure(sample: FieldSample, beta: float | None = None,
                  rule: NormalizationRule = LEBESGUE) -> ChaosMeasure:
    """``factor * dx * exp(beta X - beta^2 E[X^2] / 2)`` on left-endpoint cells.

    For factorization-sampled fields ``beta`` is already inside the values;
    pass ``beta=None`` (or the same value) and it is not applied again.
    """
    values = np.asarray(sample.values, dtype=float)
    var = np.asarray(sample.variance, dtype=float)
    if values.shape[-1] != sample.grid.m or var.shape[-1] != sample.grid.m:
        raise ValueError("field values / variance do not match the grid size")
    if sample.beta_applied is not None:
        if beta is not None and not math.isclose(beta, sample.beta_applied):
            raise ValueError(
                f"field already carries beta={sample.beta_applied}; refusing to apply beta={beta} on top"
            )
        beta_eff, scale = sample.beta_applied, 1.0
    else:
        if beta is None:
            raise ValueError("beta is required for fields sampled without it")
        if not 0.0 <= beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {beta}")
        beta_eff, scale = beta, beta
    factor = normalization_factor(rule)
    weights = factor * sample.grid.cell_width * np.exp(scale * values - 0.5 * scale ** 2 * var)
    return ChaosMeasure(sample.grid, weights, beta_eff, rule, dict(sample.provenance))


def integrate(measure: ChaosMeasure, f) -> np.ndarray:
    """``sum_i f(x_i) weights_i``; ``f`` is an array on the grid or a callable."""
    values = f(measure.grid.points) if callable(f) else np.asarray(f, dtype=float)
    return measure.weights @ values


def perturb_measure(measure: ChaosMeasure, z_field: FieldSample, cross_cov) -> ChaosMeasure:
    """Reweight by ``exp(Z - E[Z^2]/2 - E[X Z])``.

    This is the chaos of ``X + Z`` written relative to the chaos of ``X``;
    ``cross_cov[i] = E[X(x_i) Z(x_i)]`` (with ``beta`` folded into ``X``)
    is supplied by the caller.
    """
    if z_field.grid != measure.grid:
        raise ValueError("perturbing field lives on a different grid")
    cross_cov = np.broadcast_to(np.asarray(cross_cov, dtype=float), (measure.grid.m,))
    tilt = np.exp(z_field.values - 0.5 * z_field.variance - cross_cov)
    prov = dict(measure.provenance, perturbed_by=z_field.provenance)
    return ChaosMeasure(measure.grid, measure.weights * tilt, measure.beta, measure.rule, prov)


def sample_measure(spec: CovarianceSpec, grid: GridDomain, rng, rule: NormalizationRule = LEBESGUE) -> ChaosMeasure:
    """Sample ``spec`` and build its chaos, applying ``spec.beta`` exactly once."""
    sample = sample_field(spec, grid, rng)
    beta = None if sample.beta_applied is not None else spec.beta
    return build_measure(sample, beta, rule)
