"""Config-driven experiments: each run produces named pass/fail checks plus CSV tables."""
from __future__ import annotations

import csv
import enum
import io
import json
import logging
import math
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy import integrate as _integrate
from scipy.special import gamma

from .chaos import LEBESGUE, NormalizationKind, NormalizationRule, build_measure, normalization_factor, perturb_measure
from .decorrelate import CONCAVE, build_partition, kahane_gap, sample_zeps, zeps_matrix
from .kernels import (
    CONST_VARIANCE,
    CovarianceSpec,
    DomainKind,
    GridDomain,
    Mollifier,
    Scheme,
    build_cov_matrix,
    conv_cutoff,
    matched_spec,
)
from .rng import RngStream, replica_streams
from .samplers import FieldSample, sample_convolution_field, sample_field, sample_fourier_field
from .stats import (
    empirical_moment,
    ks_two_sample,
    mc_covariance_check,
    second_moment_quadrature,
    sup_cov_gap,
)

log = logging.getLogger(__name__)


class ExperimentKind(str, enum.Enum):
    COVARIANCE_VALIDATION = "CovarianceValidation"
    GAP_CURVES = "GapCurves"
    CROSS_SCHEME_KS = "CrossSchemeKS"
    COUPLED_CONVERGENCE = "CoupledConvergence"
    CRITICAL_MASS_TREND = "CriticalMassTrend"
    SECOND_MOMENT_CHECK = "SecondMomentCheck"
    ZEPS_BOUNDS = "ZepsBounds"
    KAHANE_DIRECTION = "KahaneDirection"
    PERTURBATION_CHECK = "PerturbationCheck"


DYADIC_LEVELS = [2 ** k for k in range(6, 13)]

# scheme lists used when the config gives none
_DEFAULT_SCHEMES = {
    ExperimentKind.COVARIANCE_VALIDATION: ["FourierPartial"],
    ExperimentKind.GAP_CURVES: ["FourierPartial", "WhiteNoiseCone"],
    ExperimentKind.CROSS_SCHEME_KS: ["FourierPartial", "WhiteNoiseCone", "Vaguelet"],
    ExperimentKind.COUPLED_CONVERGENCE: ["FourierPartial", "ConvolutionSpectral"],
    ExperimentKind.CRITICAL_MASS_TREND: ["WhiteNoiseCone"],
    ExperimentKind.SECOND_MOMENT_CHECK: ["FourierPartial"],
    ExperimentKind.ZEPS_BOUNDS: [],
    ExperimentKind.KAHANE_DIRECTION: ["WhiteNoiseCone"],
    ExperimentKind.PERTURBATION_CHECK: ["FourierPartial"],
}

DESCRIPTIONS = {
    ExperimentKind.COVARIANCE_VALIDATION: "Monte Carlo covariance at probe pairs vs the analytic kernel",
    ExperimentKind.GAP_CURVES: "sup |C_a - C_b| on the grid across levels, overall and off-diagonal",
    ExperimentKind.CROSS_SCHEME_KS: "two-sample KS between chaos integrals of different schemes",
    ExperimentKind.COUPLED_CONVERGENCE: "E|mu_Fourier(1) - mu_conv(1)| with shared coefficients across levels",
    ExperimentKind.CRITICAL_MASS_TREND: "median total mass at beta = 1 under SqrtLogN and Lebesgue rules",
    ExperimentKind.SECOND_MOMENT_CHECK: "empirical E[mass^2] vs quadrature; limit-kernel Gamma identity",
    ExperimentKind.ZEPS_BOUNDS: "L2 deviation bound and compact support of the partition field",
    ExperimentKind.KAHANE_DIRECTION: "sign of E f(mass) differences under covariance domination",
    ExperimentKind.PERTURBATION_CHECK: "identity, mean preservation and constant-mode removal by perturbation",
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    kind: ExperimentKind
    scheme: str | None = None
    schemes: list | None = None
    n: int | None = None
    levels: list | None = None
    beta: float = 1.0
    m: int = 256
    replicas: int = 10_000
    master_seed: int = 0
    output_dir: str = "results"
    tolerances: dict = field(default_factory=dict)
    mollifier: str = "Gaussian"
    seeds: int = 10
    eps: list | None = None
    pairs: int = 20
    deltas: list = field(default_factory=lambda: [0.05, 0.1, 0.2])

    def scheme_list(self) -> list[str]:
        if self.schemes:
            return list(self.schemes)
        if self.scheme:
            return [self.scheme]
        return list(_DEFAULT_SCHEMES[self.kind])

    def level_list(self) -> list[int]:
        if self.levels:
            return [int(v) for v in self.levels]
        if self.n is not None:
            return [int(self.n)]
        return list(DYADIC_LEVELS)

    def level(self, default: int = 64) -> int:
        return int(self.n) if self.n is not None else default

    def tolerance(self, name: str, default: float) -> float:
        return float(self.tolerances.get(name, default))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        return d


def _validate(cfg: ExperimentConfig):
    if cfg.replicas < 100:
        raise ConfigError(f"replicas: must be >= 100, got {cfg.replicas}")
    if cfg.m < 32 or cfg.m > 4096 or cfg.m & (cfg.m - 1):
        raise ConfigError(f"m: must be a power of two between 32 and 4096, got {cfg.m}")
    if not 0.0 < cfg.beta <= 1.0:
        raise ConfigError(f"beta: must lie in (0, 1], got {cfg.beta}")
    for s in cfg.scheme_list():
        try:
            Scheme(s)
        except ValueError:
            raise ConfigError(f"scheme: unknown scheme {s!r}") from None
    try:
        Mollifier(cfg.mollifier)
    except ValueError:
        raise ConfigError(f"mollifier: unknown mollifier {cfg.mollifier!r}") from None
    if any(int(v) < 2 for v in cfg.level_list()):
        raise ConfigError("levels: every level must be >= 2")
    if cfg.seeds < 1 or cfg.pairs < 1:
        raise ConfigError("seeds / pairs: must be >= 1")


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Validate a raw mapping and fill defaults.  Unknown keys are rejected."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(raw) - set(_FIELD_TYPES))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    if "kind" not in raw:
        raise ConfigError("kind: missing (one of " + ", ".join(k.value for k in ExperimentKind) + ")")
    data = dict(raw)
    try:
        data["kind"] = ExperimentKind(raw["kind"])
    except ValueError:
        raise ConfigError(f"kind: unknown experiment kind {raw['kind']!r}") from None
    for key in ("n", "m", "replicas", "master_seed", "seeds", "pairs"):
        if key in data and data[key] is not None:
            v = data[key]
            if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
                raise ConfigError(f"{key}: expected an integer, got {v!r}")
            data[key] = int(v)
    if "beta" in data:
        if isinstance(data["beta"], bool) or not isinstance(data["beta"], (int, float)):
            raise ConfigError(f"beta: expected a number, got {data['beta']!r}")
        data["beta"] = float(data["beta"])
    for key in ("schemes", "levels", "eps", "deltas"):
        if key in data and data[key] is not None and not isinstance(data[key], list):
            raise ConfigError(f"{key}: expected a list")
    if "tolerances" in data and not isinstance(data["tolerances"], dict):
        raise ConfigError("tolerances: expected an object mapping check name to value")
    cfg = ExperimentConfig(**data)
    _validate(cfg)
    return cfg


def parse_config(path) -> ExperimentConfig:
    """Read a JSON experiment config."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from None
    return config_from_dict(raw)


# ---------------------------------------------------------------------------
# checks and reports


@dataclass
class Check:
    """A named scalar compared with a tolerance, plus the table behind it."""

    name: str
    value: float
    tolerance: float
    passed: bool
    columns: list = field(default_factory=list)
    rows: list = field(default_factory=list)

    def record(self) -> dict:
        return {"name": self.name, "value": _jsonable(self.value), "tolerance": self.tolerance, "pass": self.passed}


def _jsonable(v):
    v = float(v)
    return v if math.isfinite(v) else str(v)


def _at_most(name, value, tol, columns, rows) -> Check:
    return Check(name, float(value), float(tol), bool(value <= tol), columns, rows)


def _at_least(name, value, tol, columns, rows) -> Check:
    return Check(name, float(value), float(tol), bool(value >= tol), columns, rows)


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    checks: list
    seed: int
    elapsed_seconds: float
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        out = {
            "config": self.config.to_dict(),
            "checks": [c.record() for c in self.checks],
            "seed": self.seed,
            "elapsed_seconds": self.elapsed_seconds,
            "pass": self.passed,
        }
        if self.error is not None:
            out["error"] = self.error
            out["partial"] = True
        return out


def _template(name: str, beta: float, cfg: ExperimentConfig) -> CovarianceSpec:
    s = Scheme(name)
    moll = Mollifier(cfg.mollifier) if s is Scheme.CONVOLUTION else None
    level = 1.0 if s in (Scheme.WHITE_NOISE, Scheme.EXACT_CONE) else 1
    return CovarianceSpec(s, level, beta, moll)


def _grid_for(spec: CovarianceSpec, m: int) -> GridDomain:
    return GridDomain.interval(m) if spec.domain is DomainKind.INTERVAL else GridDomain.circle(m)


def _label(spec: CovarianceSpec) -> str:
    if spec.scheme is Scheme.CONVOLUTION:
        return f"{spec.scheme.value}-{spec.mollifier.value}"
    return spec.scheme.value


def default_probe_pairs(m: int, count: int = 20) -> np.ndarray:
    """Two diagonal pairs plus pairs ``(i, i + k)`` spread over all separations."""
    seps = np.unique(np.linspace(1, m // 2, count - 2).round().astype(int))
    pairs = [(0, 0), (m // 3, m // 3)] + [(int(s) % m, (int(s) + int(k)) % m) for s, k in zip(range(3, 3 + len(seps)), seps)]
    return np.array(pairs[:count])


# ---------------------------------------------------------------------------
# experiment kinds


def run_covariance_validation(cfg: ExperimentConfig) -> list[Check]:
    checks = []
    tol = cfg.tolerance("cov_max_dev", 4.0)
    for name in cfg.scheme_list():
        spec = matched_spec(_template(name, cfg.beta, cfg), cfg.level())
        grid = _grid_for(spec, cfg.m)
        rep = mc_covariance_check(spec, grid, default_probe_pairs(cfg.m), cfg.replicas,
                                  RngStream(cfg.master_seed, 0, f"cov/{_label(spec)}"))
        rows = [[int(i), int(j), e, a, s, d] for (i, j), e, a, s, d in
                zip(rep.pairs, rep.empirical, rep.analytic, rep.stderr, rep.normalized_deviation)]
        checks.append(_at_most(f"cov_max_dev_{_label(spec)}", rep.max_normalized_deviation, tol,
                               ["i", "j", "empirical", "analytic", "stderr", "normalized_deviation"], rows))
    return checks


def conv_gap_constant() -> float:
    """``16 pi^2 + 2 int_1^inf exp(-4 pi^2 s^2) / s ds``."""
    tail, _ = _integrate.quad(lambda s: math.exp(-4.0 * math.pi ** 2 * s * s) / s, 1.0, np.inf)
    return 16.0 * math.pi ** 2 + 2.0 * tail


def run_gap_curves(cfg: ExperimentConfig) -> list[Check]:
    names = cfg.scheme_list()
    if len(names) != 2:
        raise ConfigError("schemes: GapCurves compares exactly two schemes")
    a, b = (_template(s, 1.0, cfg) for s in names)
    levels = cfg.level_list()
    grid = _grid_for(a, cfg.m)
    curve = sup_cov_gap(a, b, grid, levels, deltas=tuple(cfg.deltas))
    deltas = sorted(curve.off_diagonal)
    columns = ["n", "sup_gap"] + [f"gap_delta_{d:g}" for d in deltas]
    rows = curve.rows()
    checks = [_at_most("sup_gap_growth", max(curve.sup_gap) / curve.sup_gap[0],
                       cfg.tolerance("sup_gap_growth", 1.2), columns, rows)]
    if 0.1 in curve.off_diagonal:
        col = curve.off_diagonal[0.1]
        drop = 1.0 - col[-1] / col[0] if col[0] > 0 else 0.0
        checks.append(_at_least("gap_delta_0.1_decrease", drop, cfg.tolerance("gap_delta_0.1_decrease", 0.5),
                                columns, rows))
    conv = {s.scheme for s in (a, b)} == {Scheme.FOURIER, Scheme.CONVOLUTION}
    if conv and Mollifier.GAUSSIAN in (a.mollifier, b.mollifier):
        checks.append(_at_most("sup_gap_conv_bound", max(curve.sup_gap),
                               cfg.tolerance("sup_gap_conv_bound", conv_gap_constant()), columns, rows))
    return checks


TEST_FUNCTIONS = {
    "one": lambda x: np.ones_like(x),
    "cos": lambda x: np.cos(2.0 * np.pi * x),
    "half": lambda x: (x < 0.5).astype(float),
}


def run_cross_scheme_ks(cfg: ExperimentConfig) -> list[Check]:
    names = cfg.scheme_list()
    if len(names) < 2:
        raise ConfigError("schemes: CrossSchemeKS needs a reference and at least one other scheme")
    n = cfg.level(1024)
    specs = [matched_spec(_template(s, cfg.beta, cfg), n) for s in names]
    grid = GridDomain.circle(cfg.m)
    x = grid.points
    fvals = {k: f(x) for k, f in TEST_FUNCTIONS.items()}
    pvals = {(_label(s), k): [] for s in specs[1:] for k in fvals}
    rows = []
    for seed in range(cfg.seeds):
        integrals = []
        for spec in specs:
            streams = replica_streams(cfg.master_seed, cfg.replicas, f"ks/{_label(spec)}/{seed}")
            mu = build_measure(sample_field(spec, grid, streams), spec.beta)
            integrals.append({k: mu.weights @ v for k, v in fvals.items()})
        for spec, ints in zip(specs[1:], integrals[1:]):
            ps = [ks_two_sample(integrals[0][k], ints[k])[1] for k in fvals]
            for k, p in zip(fvals, ps):
                pvals[(_label(spec), k)].append(p)
            rows.append([seed, _label(specs[0]), _label(spec)] + ps)
    columns = ["seed", "reference", "scheme"] + [f"p_{k}" for k in fvals]
    checks = []
    tol = cfg.tolerance("ks_fraction", 0.8)
    for (label, k), ps in pvals.items():
        frac = float(np.mean(np.array(ps) > 0.01))
        checks.append(_at_least(f"ks_fraction_{label}_{k}", frac, tol, columns, rows))
    return checks


def run_coupled_convergence(cfg: ExperimentConfig) -> list[Check]:
    moll = Mollifier(cfg.mollifier)
    rows, means, ses = [], [], []
    for n in cfg.level_list():
        # the mollified field needs ~n modes resolved; refine the grid beyond the config m when needed
        grid = GridDomain.circle(max(cfg.m, 4 * n))
        eps = 1.0 / n
        streams = replica_streams(cfg.master_seed, cfg.replicas, "coupled")
        fourier, coeffs = sample_fourier_field(n, grid, streams, modes=conv_cutoff(moll, eps))
        conv = sample_convolution_field(coeffs, moll, eps, grid)
        diff = np.abs(build_measure(fourier, cfg.beta).total_mass - build_measure(conv, cfg.beta).total_mass)
        rep = empirical_moment(diff, 1)
        means.append(rep.estimate)
        ses.append(rep.stderr)
        rows.append([n, grid.m, rep.estimate, rep.stderr])
    worst = 0.0
    for k in range(len(means) - 1):
        se = math.hypot(ses[k], ses[k + 1])
        worst = max(worst, (means[k + 1] - means[k]) / se if se > 0 else 0.0)
    return [_at_most("coupled_increase", worst, cfg.tolerance("coupled_increase", 2.0),
                     ["n", "m", "mean_abs_diff", "stderr"], rows)]


def run_critical_mass_trend(cfg: ExperimentConfig) -> list[Check]:
    template = _template(cfg.scheme_list()[0], 1.0, cfg)
    rows, crit, leb = [], [], []
    for n in cfg.level_list():
        spec = matched_spec(template, n)
        grid = _grid_for(spec, cfg.m)
        sample = sample_field(spec, grid, replica_streams(cfg.master_seed, cfg.replicas, "critical"))
        mass = build_measure(sample, spec.beta, LEBESGUE).total_mass
        factor = normalization_factor(NormalizationRule(NormalizationKind.SQRT_LOG_N, n))
        crit.append(float(np.median(factor * mass)))
        leb.append(float(np.median(mass)))
        rows.append([n, crit[-1], leb[-1]])
    columns = ["n", "median_sqrtlogn", "median_lebesgue"]
    return [
        _at_most("critical_band_ratio", max(crit) / min(crit), cfg.tolerance("critical_band_ratio", 5.0),
                 columns, rows),
        _at_least("lebesgue_median_decrease", 1.0 - leb[-1] / leb[0],
                  cfg.tolerance("lebesgue_median_decrease", 0.5), columns, rows),
    ]


def gamma_identity_value() -> float:
    return 2.0 * gamma(0.5) / gamma(0.75) ** 2


def run_second_moment(cfg: ExperimentConfig) -> list[Check]:
    n = cfg.level(256)
    spec = matched_spec(_template(cfg.scheme_list()[0], cfg.beta, cfg), n)
    grid = _grid_for(spec, cfg.m)
    sample = sample_field(spec, grid, replica_streams(cfg.master_seed, cfg.replicas, "second"))
    mass = build_measure(sample, spec.beta).total_mass
    rep = empirical_moment(mass, 2)
    quad = second_moment_quadrature(cfg.beta, spec.with_beta(1.0))
    z = abs(rep.estimate - quad) / rep.stderr
    limit = second_moment_quadrature(0.5, CovarianceSpec(Scheme.LIMIT_CIRCLE))
    exact = gamma_identity_value()
    rows = [["empirical", rep.estimate, rep.stderr], ["quadrature", quad, 0.0],
            ["limit_quadrature", limit, 0.0], ["gamma_identity", exact, 0.0]]
    columns = ["quantity", "value", "stderr"]
    return [
        _at_most("second_moment_z", z, cfg.tolerance("second_moment_z", 4.0), columns, rows),
        _at_most("limit_gamma_identity", abs(limit - exact), cfg.tolerance("limit_gamma_identity", 1e-6),
                 columns, rows),
    ]


def run_zeps_bounds(cfg: ExperimentConfig) -> list[Check]:
    grid = GridDomain.circle(cfg.m)
    eps_list = [float(e) for e in (cfg.eps or [1 / 8, 1 / 16, 1 / 32])]
    rows, l2_worst, support_worst = [], -np.inf, 0.0
    dist = grid.distance_matrix()
    for eps in eps_list:
        part = build_partition(eps, grid)
        z = sample_zeps(part, replica_streams(cfg.master_seed, cfg.replicas, f"zeps/{eps:g}"))
        dev = (np.exp(z.values - 0.5).mean(axis=1) - 1.0) ** 2
        rep = empirical_moment(dev, 1)
        bound = (math.e - 1.0) * 4.0 * eps
        outside = np.abs(zeps_matrix(part)[dist >= 2.0 * eps - 1e-12])
        leak = float(outside.max()) if outside.size else 0.0
        l2_worst = max(l2_worst, (rep.estimate - bound) / rep.stderr)
        support_worst = max(support_worst, leak)
        rows.append([eps, part.size, rep.estimate, rep.stderr, bound, leak])
    columns = ["eps", "centers", "l2_deviation", "stderr", "bound", "max_cov_beyond_2eps"]
    return [
        _at_most("zeps_l2_excess_z", l2_worst, cfg.tolerance("zeps_l2_excess_z", 4.0), columns, rows),
        _at_most("zeps_support_leak", support_worst, cfg.tolerance("zeps_support_leak", 0.0), columns, rows),
    ]


def random_dominating_pair(base: np.ndarray, gen: np.random.Generator) -> np.ndarray:
    """``base + V V^T`` for a random entrywise-nonnegative ``V`` of rank 1 to 4."""
    m = base.shape[0]
    v = gen.uniform(0.0, 1.0, (m, int(gen.integers(1, 5)))) * gen.uniform(0.05, 0.5)
    return base + v @ v.T


def run_kahane_direction(cfg: ExperimentConfig) -> list[Check]:
    template = _template(cfg.scheme_list()[0], 1.0, cfg)
    n = cfg.level(64)
    grid = GridDomain.circle(cfg.m)
    gen = RngStream(cfg.master_seed, 0, "kahane/pairs").generator()
    betas = (0.5, 0.8, 1.0)
    rows, worst_dir, worst_eq = [], -np.inf, 0.0
    for p in range(cfg.pairs):
        base = np.array(build_cov_matrix(matched_spec(template, n).with_beta(betas[p % 3]), grid).entries)
        dom = random_dominating_pair(base, gen)
        for fname in CONCAVE:
            rng = RngStream(cfg.master_seed, 0, f"kahane/{p}/{fname}")
            d, se = kahane_gap(fname, dom, base, grid, cfg.replicas, rng)
            d0, se0 = kahane_gap(fname, base, base, grid, cfg.replicas, rng)
            worst_dir = max(worst_dir, d / se if se > 0 else (np.inf if d > 0 else 0.0))
            worst_eq = max(worst_eq, abs(d0) / se0 if se0 > 0 else (np.inf if d0 != 0 else 0.0))
            rows.append([p, fname, d, se, d0, se0])
    columns = ["pair", "function", "delta_dominating", "stderr", "delta_equal", "stderr_equal"]
    return [
        _at_most("kahane_direction_z", worst_dir, cfg.tolerance("kahane_direction_z", 2.0), columns, rows),
        _at_most("kahane_equality_z", worst_eq, cfg.tolerance("kahane_equality_z", 2.0), columns, rows),
    ]


def run_perturbation(cfg: ExperimentConfig) -> list[Check]:
    n = cfg.level(64)
    beta = cfg.beta
    grid = GridDomain.circle(cfg.m)
    streams = replica_streams(cfg.master_seed, cfg.replicas, "perturb/x")
    sample, coeffs = sample_fourier_field(n, grid, streams)
    mu = build_measure(sample, beta)
    columns = ["quantity", "value", "reference"]

    zero = FieldSample(grid, np.zeros_like(sample.values), np.zeros(grid.m))
    same = perturb_measure(mu, zero, 0.0)
    ident = float(np.max(np.abs(same.weights - mu.weights)))

    z = sample_zeps(build_partition(0.125, grid), replica_streams(cfg.master_seed, cfg.replicas, "perturb/z"))
    mean = empirical_moment(perturb_measure(mu, z, 0.0).total_mass, 1)
    mean_z = abs(mean.estimate - 1.0) / mean.stderr

    # subtract beta times the constant mode; the result is pathwise the chaos without it
    c = beta * math.sqrt(CONST_VARIANCE)
    g = np.asarray(coeffs.G)
    const = FieldSample(grid, -c * g[:, None] * np.ones(grid.m), np.full(grid.m, c * c), None)
    removed = perturb_measure(mu, const, -c * c).total_mass
    fresh, _ = sample_fourier_field(n, grid, replica_streams(cfg.master_seed, cfg.replicas, "perturb/y"),
                                    constant_mode=False)
    plain = build_measure(fresh, beta).total_mass
    _, p = ks_two_sample(removed, plain)
    rows = [["identity_max_abs_change", ident, 0.0], ["independent_mean", mean.estimate, 1.0],
            ["independent_mean_stderr", mean.stderr, 0.0], ["constant_removal_ks_p", p, 0.01]]
    return [
        _at_most("perturb_identity", ident, cfg.tolerance("perturb_identity", 1e-12), columns, rows),
        _at_most("perturb_independent_mean_z", mean_z, cfg.tolerance("perturb_independent_mean_z", 4.0),
                 columns, rows),
        _at_least("perturb_constant_removal_p", p, cfg.tolerance("perturb_constant_removal_p", 0.01),
                  columns, rows),
    ]


RUNNERS = {
    ExperimentKind.COVARIANCE_VALIDATION: run_covariance_validation,
    ExperimentKind.GAP_CURVES: run_gap_curves,
    ExperimentKind.CROSS_SCHEME_KS: run_cross_scheme_ks,
    ExperimentKind.COUPLED_CONVERGENCE: run_coupled_convergence,
    ExperimentKind.CRITICAL_MASS_TREND: run_critical_mass_trend,
    ExperimentKind.SECOND_MOMENT_CHECK: run_second_moment,
    ExperimentKind.ZEPS_BOUNDS: run_zeps_bounds,
    ExperimentKind.KAHANE_DIRECTION: run_kahane_direction,
    ExperimentKind.PERTURBATION_CHECK: run_perturbation,
}


# ---------------------------------------------------------------------------
# output


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def csv_text(columns: list, rows: list) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_outputs(report: ExperimentReport, out_dir) -> Path:
    out = Path(out_dir)
    for c in report.checks:
        _atomic_write(out / f"{c.name}.csv", csv_text(c.columns, c.rows))
    _atomic_write(out / "report.json", json.dumps(report.to_dict(), indent=2) + "\n")
    return out


def run_experiment(cfg: ExperimentConfig, out_dir=None, write: bool = True) -> ExperimentReport:
    """Run ``cfg`` and (optionally) write ``report.json`` and one CSV per check.

    A module error is caught, recorded in the report (flagged ``partial``)
    and makes the run fail.
    """
    start = time.perf_counter()
    log.info("running %s (seed %d)", cfg.kind.value, cfg.master_seed)
    checks, error = [], None
    try:
        checks = RUNNERS[cfg.kind](cfg)
    except Exception as exc:  # noqa: BLE001 - reported, then the run fails
        error = f"{type(exc).__name__}: {exc}"
        log.error("experiment failed: %s", error)
    report = ExperimentReport(cfg, checks, cfg.master_seed, time.perf_counter() - start, error)
    if write:
        write_outputs(report, out_dir or cfg.output_dir)
    return report
