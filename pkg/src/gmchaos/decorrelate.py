"""Partition-of-unity decorrelating field and a Kahane convexity checker."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .chaos import LEBESGUE, NormalizationRule, build_measure
from .kernels import CovarianceSpec, GridDomain, build_cov_matrix, factorize
from .rng import RngStream, Streams, standard_normals
from .samplers import FieldSample


@dataclass(frozen=True)
class PartitionOfUnity:
    """Tents ``p_i`` on the grid, one row per center, summing to one columnwise."""

    eps: float
    grid: GridDomain
    centers: np.ndarray
    tents: np.ndarray

    @property
    def size(self) -> int:
        return self.centers.size


def build_partition(eps: float, grid: GridDomain) -> PartitionOfUnity:
    """Greedy maximal ``eps/2``-separated centers with renormalized tents.

    Grid points are scanned in index order and kept when at distance at
    least ``eps/2`` from every kept center.  The raw tent
    ``max(0, min(2 (eps - d) / eps, 1))`` equals 1 within ``eps/2`` of its
    center, so maximality keeps the column sums positive.
    """
    if eps < 2.0 / grid.m:
        raise ValueError(f"eps={eps:g} is below the grid resolution 2/m={2.0 / grid.m:g}")
    pts = grid.points
    tol = 1e-12
    centers: list[float] = []
    for x in pts:
        if all(grid.distance(x, c) >= eps / 2 - tol for c in centers):
            centers.append(float(x))
    c = np.array(centers)
    d = grid.distance(c[:, None], pts[None, :])
    raw = np.clip(2.0 * (eps - d) / eps, 0.0, 1.0)
    return PartitionOfUnity(eps, grid, c, raw / raw.sum(axis=0))


def zeps_cov(part: PartitionOfUnity, i, j):
    """``C_eps(x_i, x_j) = sum_k sqrt(p_k(x_i) p_k(x_j))`` for grid indices."""
    root = np.sqrt(part.tents)
    return np.sum(root[:, i] * root[:, j], axis=0)


def zeps_matrix(part: PartitionOfUnity) -> np.ndarray:
    root = np.sqrt(part.tents)
    return root.T @ root


def sample_zeps(part: PartitionOfUnity, rng: Streams) -> FieldSample:
    """``Z_eps(x) = sum_k A_k sqrt(p_k(x))``; unit variance everywhere."""
    a = standard_normals(rng, part.size)
    values = a @ np.sqrt(part.tents)
    return FieldSample(
        part.grid, values, np.ones(part.grid.m), None,
        provenance={"scheme": "PartitionField", "eps": part.eps, "centers": part.size},
    )


def diagonal_strip_mass(grid: GridDomain, width: float) -> float:
    """``(lambda x lambda)({dist < width})`` for the uniform grid measure."""
    d = grid.distance(grid.points, 0.0)
    return float(np.count_nonzero(d < width - 1e-12)) / grid.m


CONCAVE = {
    "sqrt": np.sqrt,
    "log1p": np.log1p,
    "min1": lambda x: np.minimum(1.0, x),
}

Covariance = Union[CovarianceSpec, np.ndarray]


def _factor(cov: Covariance, grid: GridDomain) -> np.ndarray:
    if isinstance(cov, CovarianceSpec):
        return build_cov_matrix(cov, grid).factor
    return factorize(0.5 * (cov + cov.T))[0]


def _variance(cov: Covariance, grid: GridDomain) -> np.ndarray:
    if isinstance(cov, CovarianceSpec):
        c = build_cov_matrix(cov, grid)
        return c.diagonal + c.jitter
    return np.diag(cov).copy()


def kahane_gap(concave_f: str | Callable, spec_a: Covariance, spec_b: Covariance, grid: GridDomain,
               replicas: int, rng: RngStream, rule: NormalizationRule = LEBESGUE,
               threshold: float = 1.0) -> tuple[float, float]:
    """Paired estimate of ``E f(mass_A) - E f(mass_B)`` and its standard error.

    Both fields are driven by the same normals (``X_A = L_A z``,
    ``X_B = L_B z``), which leaves each marginal law intact and makes the
    difference estimate sharp.  If ``cov_A >= cov_B`` pointwise the
    convexity inequality predicts a non-positive value.  Covariances are
    specs (``beta`` included) or explicit matrices.  ``threshold`` rescales
    ``min1`` to ``min(threshold, x)``.
    """
    if callable(concave_f):
        f = concave_f
    elif concave_f == "min1":
        f = lambda x: np.minimum(threshold, x)  # noqa: E731
    else:
        f = CONCAVE[concave_f]
    streams = [RngStream(rng.master_seed, r, rng.purpose) for r in range(rng.replica, rng.replica + replicas)]
    z = standard_normals(streams, grid.m)
    masses = []
    for cov in (spec_a, spec_b):
        field = FieldSample(grid, z @ _factor(cov, grid).T, _variance(cov, grid), None, beta_applied=1.0)
        masses.append(build_measure(field, None, rule).total_mass)
    diff = f(masses[0]) - f(masses[1])
    return float(diff.mean()), float(diff.std(ddof=1) / math.sqrt(replicas))
