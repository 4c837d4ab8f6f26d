"""Seeded Monte Carlo studies of preliminary vs. Rao-Blackwellized estimators.

Replicates are processed in fixed-size blocks; block ``b`` draws everything
from ``derive_replicate_stream(master_seed, b)``. Per-block summaries are
merged in block order, so a report depends on the configuration (including
``block_size``) and the seed, but never on the number of worker processes.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from statistics import NormalDist

import numpy as np

from .config import StudyConfig, StudyKind
from .designs import DesignKind, DesignSpec, OrderedSample, draw_labels, ordered_log_prob
from .errors import RBSurveyError, SchemaError, StudyError
from .estimators import (
    EstimatorId,
    EstimatorKind,
    evaluate,
    pathak_factor,
    sequence_estimates,
)
from .population import (
    FIXTURES,
    Population,
    draw_probabilities,
    load_fixture,
    load_population,
    population_mean,
    population_total,
)
from .raoblackwell import (
    ConditioningLevel,
    Strategy,
    StrategyMixture,
    _normalize_log_weights,
    rb_var_estimate,
    retrospective_weights,
)

__all__ = [
    "derive_replicate_stream",
    "build_mixture",
    "run_mixture_study",
    "run_retrospective_study",
    "run_study",
    "load_study_population",
    "StudyReport",
    "EstimatorRow",
    "ScatterRow",
    "CheckResult",
    "SweepPoint",
    "load_targets",
    "check_table1",
    "check_table2",
    "run_sample_size_sweep",
    "check_sweep",
    "robustness_config",
    "check_robustness",
    "retrospective_tables",
]

log = logging.getLogger(__name__)

_BLOCK_KEY = 0
_SCATTER_KEY = 1


def derive_replicate_stream(master_seed: int, replicate_index: int) -> np.random.Generator:
    """Independent PCG64 stream for one replicate (or block) index.

    Built from ``SeedSequence(master_seed, spawn_key=(0, replicate_index))``, so
    it is a pure function of its two arguments.
    """
    seq = np.random.SeedSequence(int(master_seed), spawn_key=(_BLOCK_KEY, int(replicate_index)))
    return np.random.Generator(np.random.PCG64(seq))


def _scatter_stream(master_seed: int) -> np.random.Generator:
    seq = np.random.SeedSequence(int(master_seed), spawn_key=(_SCATTER_KEY,))
    return np.random.Generator(np.random.PCG64(seq))


# -- accumulation ---------------------------------------------------------------


@dataclass
class _Moments:
    """Count, mean and centered sum of squares, mergeable in a fixed order."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0
    hits: int = 0
    fallbacks: int = 0
    bias_num: float = 0.0
    bias_den: float = 0.0

    @classmethod
    def of(cls, values, hits=0, fallbacks=0, bias_num=0.0, bias_den=0.0) -> "_Moments":
        values = np.asarray(values, dtype=np.float64)
        if values.size == 0:
            return cls()
        mean = float(values.mean())
        return cls(
            int(values.size),
            mean,
            float(((values - mean) ** 2).sum()),
            int(hits),
            int(fallbacks),
            float(bias_num),
            float(bias_den),
        )

    def merge(self, other: "_Moments") -> "_Moments":
        n = self.count + other.count
        if n == 0:
            return _Moments()
        delta = other.mean - self.mean
        return _Moments(
            n,
            self.mean + delta * other.count / n,
            self.m2 + other.m2 + delta * delta * self.count * other.count / n,
            self.hits + other.hits,
            self.fallbacks + other.fallbacks,
            self.bias_num + other.bias_num,
            self.bias_den + other.bias_den,
        )

    @property
    def variance(self) -> float:
        return self.m2 / (self.count - 1) if self.count > 1 else 0.0


@dataclass
class EstimatorRow:
    """One estimator's summary; statistics are ``None`` when no replicate contributed."""

    name: str
    mean: float | None
    relative_bias: float | None
    variance: float | None
    standardized_variance: float | None
    coverage: float | None
    coverage_se: float | None
    fallback_rate: float | None
    discarded_replicates: int
    replicates_used: int
    response: str = ""


def _row(name, response, m: _Moments, discarded, relative_bias=None, standardized_variance=None) -> EstimatorRow:
    # statistics over zero replicates are reported as None
    if m.count == 0:
        return EstimatorRow(name, None, None, None, None, None, None, None, discarded, 0, response)
    cov = m.hits / m.count
    return EstimatorRow(
        name=name,
        mean=m.mean,
        relative_bias=relative_bias,
        variance=m.variance,
        standardized_variance=standardized_variance,
        coverage=cov,
        coverage_se=math.sqrt(cov * (1 - cov) / m.count),
        fallback_rate=m.fallbacks / m.count,
        discarded_replicates=discarded,
        replicates_used=m.count,
        response=response,
    )


@dataclass
class ScatterRow:
    replicate: int
    design: str
    preliminary: float
    improved: float


def _fmt(value, spec: str) -> str:
    return "" if value is None else format(value, spec)


@dataclass
class StudyReport:
    rows: list[EstimatorRow]
    scatter: list[ScatterRow] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def row(self, name: str, response: str | None = None) -> EstimatorRow:
        for r in self.rows:
            if r.name == name and (response is None or r.response == response):
                return r
        raise KeyError((name, response))

    def to_dict(self) -> dict:
        return {
            "metadata": self.metadata,
            "rows": [vars(r) for r in self.rows],
            "scatter_rows": len(self.scatter),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_table(self) -> str:
        head = ["response", "estimator", "mean", "rel_bias", "variance", "std_var", "coverage", "fallback", "discarded"]
        lines = []
        for r in self.rows:
            lines.append([
                r.response,
                r.name,
                _fmt(r.mean, ".6g"),
                _fmt(r.relative_bias, "+.4f"),
                _fmt(r.variance, ".6g"),
                _fmt(r.standardized_variance, ".3f"),
                _fmt(r.coverage, ".3f"),
                _fmt(r.fallback_rate, ".4f"),
                str(r.discarded_replicates),
            ])
        widths = [max(len(h), *(len(l[i]) for l in lines)) for i, h in enumerate(head)]
        fmt = lambda cells: "  ".join(c.ljust(w) if i < 2 else c.rjust(w) for i, (c, w) in enumerate(zip(cells, widths)))
        meta = self.metadata
        out = [f"# {meta.get('study', '')} study, {meta.get('replicates', '')} replicates, seed {meta.get('master_seed', '')}"]
        out.append(fmt(head))
        out.append("  ".join("-" * w for w in widths))
        out.extend(fmt(l) for l in lines)
        return "\n".join(out) + "\n"

    def scatter_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["replicate", "design", "preliminary", "improved"])
        for s in self.scatter:
            w.writerow([s.replicate, s.design, repr(s.preliminary), repr(s.improved)])
        return buf.getvalue()

    def write(self, out_dir: str | Path, stem: str) -> dict[str, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = {
            "json": out_dir / f"{stem}.json",
            "table": out_dir / f"{stem}.txt",
        }
        paths["json"].write_text(self.to_json() + "\n")
        paths["table"].write_text(self.to_table())
        if self.scatter:
            paths["csv"] = out_dir / f"{stem}_scatter.csv"
            paths["csv"].write_text(self.scatter_csv())
        return paths


# -- population / mixture construction ---------------------------------------------


def load_study_population(config: StudyConfig) -> Population:
    """Fixture by name, or a CSV path read with ``config.schema``."""
    if config.dataset in FIXTURES:
        return load_fixture(config.dataset)
    if not os.path.isfile(config.dataset):
        raise SchemaError(f"dataset {config.dataset!r} is neither a fixture name nor a file")
    if not config.schema:
        raise SchemaError("a CSV dataset path needs a 'schema' table in the config")
    return load_population(config.dataset, config.schema)


def build_mixture(config: StudyConfig, pop: Population, n_draws: int | None = None) -> StrategyMixture:
    n = n_draws or config.n_draws
    strategies = []
    for design_kind, est_kind, prior, name in zip(
        config.strategy_designs, config.strategy_estimators, config.normalized_priors, config.names
    ):
        try:
            kind = DesignKind(design_kind)
            est = EstimatorKind(est_kind)
        except ValueError as exc:
            raise SchemaError(str(exc)) from None
        if kind is DesignKind.PPSWR:
            design = DesignSpec.ppswr(draw_probabilities(pop), n)
        else:
            design = DesignSpec.srswr(pop.N, n)
        strategies.append(Strategy(design, EstimatorId.for_design(est, design), prior, name))
    return StrategyMixture(strategies)


def _z(level: float) -> float:
    return NormalDist().inv_cdf(0.5 + level / 2.0)


def _blocks(config: StudyConfig):
    R, B = config.replicates, config.block_size
    return [(b, b * B, min(B, R - b * B)) for b in range((R + B - 1) // B)]


def _map_blocks(fn, tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def _scatter_ids(config: StudyConfig) -> np.ndarray:
    k = min(config.scatter_sample, config.replicates)
    if k == 0:
        return np.empty(0, dtype=np.int64)
    return np.sort(_scatter_stream(config.master_seed).choice(config.replicates, size=k, replace=False))


# -- mixture study ---------------------------------------------------------------------


def _draw_mixture_block(mixture: StrategyMixture, rng: np.random.Generator, size: int):
    """Strategy choices and per-choice label arrays, in a fixed RNG order."""
    sel = rng.choice(len(mixture), size=size, p=mixture.priors)
    labels = {}
    for k, s in enumerate(mixture):
        count = int(np.count_nonzero(sel == k))
        labels[k] = draw_labels(s.design, rng, count)
    return sel, labels


def _mixture_block_vectorized(mixture, y, sel, labels):
    """Per-replicate preliminary / improved quantities for ordered-sample conditioning."""
    K = len(mixture)
    size = sel.size
    out_pt = np.zeros((size, K))
    out_var = np.zeros((size, K))
    out_logp = np.zeros((size, K))
    for g in range(K):
        rows = np.flatnonzero(sel == g)
        L = labels[g]
        if rows.size == 0:
            continue
        for k, s in enumerate(mixture):
            if s.design.n_draws != L.shape[1]:
                out_logp[rows, k] = -np.inf
                continue
            out_logp[rows, k] = ordered_log_prob(s.design, L)
            pt, var = sequence_estimates(s.estimator, L, y[L - 1])
            out_pt[rows, k] = pt
            out_var[rows, k] = var
    w = _normalize_log_weights(mixture.priors[None, :], out_logp)
    out_pt = np.where(w > 0, out_pt, 0.0)
    out_var = np.where(w > 0, out_var, 0.0)
    improved = (w * out_pt).sum(axis=1)
    a = (w * out_var).sum(axis=1)
    b = (w * (out_pt - improved[:, None]) ** 2).sum(axis=1)
    fallback = a - b < 0
    improved_var = np.where(fallback, np.maximum(a, 0.0), a - b)
    idx = np.arange(size)
    prelim = out_pt[idx, sel]
    prelim_var = out_var[idx, sel]
    return prelim, prelim_var, improved, improved_var, fallback


def _mixture_block_library(mixture, pop, response, level, sel, labels):
    """Same quantities via the sample-level API (any conditioning level)."""
    size = sel.size
    prelim = np.full(size, np.nan)
    prelim_var = np.full(size, np.nan)
    improved = np.full(size, np.nan)
    improved_var = np.full(size, np.nan)
    fallback = np.zeros(size, dtype=bool)
    cursor = {k: 0 for k in labels}
    for i, g in enumerate(sel):
        row = labels[g][cursor[g]]
        cursor[g] += 1
        sample = OrderedSample.from_population(row, pop, response)
        try:
            pv = evaluate(mixture[g].estimator, sample)
            res = rb_var_estimate(mixture, sample, level)
        except RBSurveyError:
            continue
        prelim[i], prelim_var[i] = pv.point, pv.var_hat
        improved[i], improved_var[i], fallback[i] = res.point, res.var_hat, res.var_hat_fallback_used
    return prelim, prelim_var, improved, improved_var, fallback


def _mixture_task(args):
    (mixture, pop, response, level, vectorized, seed, b, start, size, target, z, scatter_ids) = args
    rng = derive_replicate_stream(seed, b)
    sel, labels = _draw_mixture_block(mixture, rng, size)
    if vectorized:
        y = pop.response(response)
        prelim, pvar, imp, ivar, fb = _mixture_block_vectorized(mixture, y, sel, labels)
    else:
        prelim, pvar, imp, ivar, fb = _mixture_block_library(mixture, pop, response, level, sel, labels)
    ok = np.isfinite(prelim) & np.isfinite(pvar) & np.isfinite(imp) & np.isfinite(ivar)
    aborted = int(size - ok.sum())

    def moments(values, var, mask, fallbacks=0):
        v, s2 = values[mask], var[mask]
        hits = int(np.count_nonzero(np.abs(v - target) <= z * np.sqrt(s2)))
        return _Moments.of(v, hits=hits, fallbacks=fallbacks)

    stats = {}
    for k, s in enumerate(mixture):
        stats[s.label] = moments(prelim, pvar, ok & (sel == k))
    stats["preliminary"] = moments(prelim, pvar, ok)
    stats["improved"] = moments(imp, ivar, ok, fallbacks=int(np.count_nonzero(fb & ok)))

    local = scatter_ids[(scatter_ids >= start) & (scatter_ids < start + size)] - start
    scatter = [
        ScatterRow(int(start + i), mixture[int(sel[i])].label, float(prelim[i]), float(imp[i]))
        for i in local
    ]
    return stats, aborted, scatter


def run_mixture_study(
    config: StudyConfig, pop: Population, n_draws: int | None = None, vectorized: bool | None = None
) -> StudyReport:
    """Monte Carlo comparison of per-strategy, preliminary and improved estimators of a total.

    Each replicate selects a strategy by its prior, draws an ordered sample
    under that strategy's design and computes the selected estimator
    (preliminary) and the Rao-Blackwellized estimator (improved), each with
    its variance estimate and a normal-theory interval for the true total.
    Per-strategy rows use the replicates in which that strategy was selected.

    Parameters
    ----------
    n_draws : int, optional
        Overrides ``config.n_draws`` (used by sample-size sweeps).
    vectorized : bool, optional
        Force the block-vectorized path (ordered-sample level only) or the
        per-replicate library path. Both consume the random stream identically.
    """
    if config.study not in (StudyKind.MIXTURE, StudyKind.GENERIC):
        raise SchemaError(f"run_mixture_study cannot run a {config.study.value} config")
    response = config.responses[0]
    mixture = build_mixture(config, pop, n_draws)
    level = ConditioningLevel(config.level)
    can_vectorize = level is ConditioningLevel.ORDERED_SAMPLE and all(
        not s.estimator.depends_only_on_reduced for s in mixture
    )
    if vectorized is None:
        vectorized = can_vectorize
    elif vectorized and not can_vectorize:
        raise SchemaError("the vectorized path only supports ordered-sample conditioning")
    target = population_total(pop, response)
    z = _z(config.confidence_level)
    scatter_ids = _scatter_ids(config)
    tasks = [
        (mixture, pop, response, level, vectorized, config.master_seed, b, start, size, target, z, scatter_ids)
        for b, start, size in _blocks(config)
    ]
    results = _map_blocks(_mixture_task, tasks, config.workers)

    merged: dict[str, _Moments] = {}
    aborted = 0
    scatter: list[ScatterRow] = []
    for stats, ab, sc in results:
        aborted += ab
        scatter.extend(sc)
        for name, m in stats.items():
            merged[name] = merged.get(name, _Moments()).merge(m)
    if aborted > config.max_abort_fraction * config.replicates:
        raise StudyError(f"{aborted} of {config.replicates} replicates aborted")

    ref_name = next(s.label for s, n in zip(mixture, config.names) if n == config.reference)
    ref_var = merged[ref_name].variance
    rows = []
    for name in [s.label for s in mixture] + ["preliminary", "improved"]:
        m = merged[name]
        rows.append(
            _row(
                name,
                response,
                m,
                aborted,
                relative_bias=(m.mean - target) / target if target else None,
                standardized_variance=m.variance / ref_var if ref_var > 0 else None,
            )
        )
    cfg = config.canonical()
    if n_draws is not None:
        cfg["n_draws"] = n_draws
    meta = {
        "study": config.study.value,
        "replicates": config.replicates,
        "master_seed": config.master_seed,
        "target_total": target,
        "aborted_replicates": aborted,
        "rng": "numpy PCG64 via SeedSequence(master_seed, spawn_key=(0, block))",
        "config": cfg,
    }
    return StudyReport(rows, scatter, meta)


# -- retrospective study ----------------------------------------------------------------


def _retro_draws(rng: np.random.Generator, sizes: np.ndarray, prior: np.ndarray, N: int, size: int):
    """True draw counts and a ``(size, max(sizes))`` label array (entries past ``n`` unused)."""
    n_true = rng.choice(sizes, size=size, p=prior)
    labels = rng.integers(1, N + 1, size=(size, int(sizes.max())))
    return n_true, labels


def _occupancy(n_true: np.ndarray, labels: np.ndarray, N: int) -> np.ndarray:
    used = np.arange(labels.shape[1])[None, :] < n_true[:, None]
    occ = np.zeros((labels.shape[0], N), dtype=bool)
    rows = np.broadcast_to(np.arange(labels.shape[0])[:, None], labels.shape)
    occ[rows[used], labels[used] - 1] = True
    return occ


def _retro_task(args):
    (ys, N, sizes, prior, seed, b, size, factor_by_n, improved_factor_by_nu, s2_pop, mu_pop, z) = args
    rng = derive_replicate_stream(seed, b)
    n_true, labels = _retro_draws(rng, sizes, prior, N, size)
    occ = _occupancy(n_true, labels, N)
    nu = occ.sum(axis=1)
    keep = nu >= 2
    discarded = int(size - keep.sum())
    occ, nu, n_true = occ[keep], nu[keep], n_true[keep]
    stats = {}
    for r, y in enumerate(ys):
        m = (occ @ y) / nu
        dev = np.where(occ, y[None, :] - m[:, None], 0.0)
        ss = (dev**2).sum(axis=1) / (nu - 1)
        truth = factor_by_n[n_true] * s2_pop[r]
        est = {
            "naive": factor_by_n[nu] * ss,
            "preliminary": factor_by_n[n_true] * ss,
            "improved": improved_factor_by_nu[nu] * ss,
        }
        for name, v in est.items():
            hits = int(np.count_nonzero(np.abs(m - mu_pop[r]) <= z * np.sqrt(v)))
            stats[(r, name)] = _Moments.of(v, hits=hits, bias_num=float((v - truth).sum()), bias_den=float(truth.sum()))
    return stats, discarded


def retrospective_tables(N: int, posited_sizes, posited_prior, max_nu: int):
    """``pathak_factor`` by draw count and the posterior-averaged factor by ``nu``.

    The improved variance estimate for a sample with ``nu`` distinct units is
    ``improved_factor[nu] * s^2``; see :func:`rbsurvey.raoblackwell.retrospective_var`.
    """
    top = max(max(posited_sizes), max_nu)
    factor_by_n = np.full(top + 1, np.nan)
    for n in range(1, top + 1):
        factor_by_n[n] = pathak_factor(N, n)
    improved = np.full(max_nu + 1, np.nan)
    for nu in range(2, max_nu + 1):
        if nu > max(posited_sizes):
            continue
        w = retrospective_weights(posited_sizes, posited_prior, nu, N)
        improved[nu] = float(np.dot(w, factor_by_n[list(posited_sizes)]))
    return factor_by_n, improved


def run_retrospective_study(config: StudyConfig, pop: Population) -> StudyReport:
    """Variance estimation for the effective sample mean when the draw count is unknown.

    Each replicate draws the true size from the sampling prior, takes an SRSWR
    sample, and keeps only the distinct units. Three estimators of the variance
    of the effective mean are compared: naive (draw count taken as the number
    of distinct units), preliminary (true draw count) and improved (posterior
    average over the posited sizes). Relative bias is measured against the exact
    variance at each replicate's true size; coverage is for the population mean.
    Replicates with a single distinct unit are discarded and counted.
    """
    if config.study is not StudyKind.RETROSPECTIVE:
        raise SchemaError(f"run_retrospective_study cannot run a {config.study.value} config")
    N = pop.N
    if max(config.sampling_sizes) > max(config.posited_sizes):
        raise StudyError("sampling sizes must not exceed the largest posited size")
    sizes = np.array(config.sampling_sizes, dtype=np.int64)
    prior = np.array(config.sampling_prior)
    max_nu = min(N, int(sizes.max()))
    factor_by_n, improved = retrospective_tables(N, config.posited_sizes, config.posited_prior, max_nu)
    ys = [np.asarray(pop.response(r), dtype=np.float64) for r in config.responses]
    s2 = [float(np.var(y, ddof=1)) for y in ys]
    mus = [population_mean(pop, r) for r in config.responses]
    z = _z(config.confidence_level)
    tasks = [
        (ys, N, sizes, prior, config.master_seed, b, size, factor_by_n, improved, s2, mus, z)
        for b, _, size in _blocks(config)
    ]
    results = _map_blocks(_retro_task, tasks, config.workers)
    merged: dict = {}
    discarded = 0
    for stats, d in results:
        discarded += d
        for key, m in stats.items():
            merged[key] = merged.get(key, _Moments()).merge(m)
    rows = []
    for r, response in enumerate(config.responses):
        for name in ("naive", "preliminary", "improved"):
            m = merged.get((r, name), _Moments())
            bias = m.bias_num / m.bias_den if m.bias_den else None
            rows.append(_row(name, response, m, discarded, relative_bias=bias))
    meta = {
        "study": config.study.value,
        "replicates": config.replicates,
        "master_seed": config.master_seed,
        "discarded_replicates": discarded,
        "rng": "numpy PCG64 via SeedSequence(master_seed, spawn_key=(0, block))",
        "config": config.canonical(),
    }
    return StudyReport(rows, [], meta)


def run_study(config: StudyConfig, pop: Population | None = None) -> StudyReport:
    pop = pop if pop is not None else load_study_population(config)
    if config.study is StudyKind.RETROSPECTIVE:
        return run_retrospective_study(config, pop)
    return run_mixture_study(config, pop)


# -- reference targets, sample-size sweep, robustness probe ------------------------------


@dataclass
class CheckResult:
    label: str
    observed: float
    target: float
    tolerance: float
    passed: bool

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag}  {self.label}: observed {self.observed:.6g}, target {self.target:.6g} +/- {self.tolerance:.3g}"


def load_targets() -> dict:
    """Reference tables with tolerances, shipped as package data."""
    from importlib.resources import files

    return json.loads(files("rbsurvey").joinpath("data/targets.json").read_text())


def _within(label, observed, target, tol) -> CheckResult:
    if observed is None:
        return CheckResult(label, float("nan"), float(target), float(tol), False)
    return CheckResult(label, float(observed), float(target), float(tol), bool(abs(observed - target) <= tol))


def check_table1(report: StudyReport, targets: dict | None = None) -> list[CheckResult]:
    table = (targets or load_targets())["table1"]
    out = []
    for name, spec in table["rows"].items():
        row = report.row(name)
        sv, tol = spec["standardized_variance"]
        out.append(_within(f"{name} standardized variance", row.standardized_variance, sv, tol))
        cov, tol = spec["coverage"]
        out.append(_within(f"{name} coverage", row.coverage, cov, tol))
    return out


def check_table2(report: StudyReport, targets: dict | None = None) -> list[CheckResult]:
    table = (targets or load_targets())["table2"]
    rel = table["relative_variance_tolerance"]
    out = []
    for response, spec in table["responses"].items():
        for name in ("naive", "preliminary", "improved"):
            row = report.row(name, response)
            t = spec[name]
            bias, tol = t["relative_bias"]
            out.append(_within(f"{response}/{name} relative bias", row.relative_bias, bias, tol))
            out.append(_within(f"{response}/{name} variance", row.variance, t["variance"], rel * t["variance"]))
            cov, tol = t["coverage"]
            out.append(_within(f"{response}/{name} coverage", row.coverage, cov, tol))
        imp, pre = report.row("improved", response).variance, report.row("preliminary", response).variance
        ok = imp is not None and pre is not None and imp < pre
        out.append(CheckResult(f"{response} improved variance < preliminary", imp or math.nan, pre or math.nan, 0.0, ok))
    return out


@dataclass
class SweepPoint:
    n_draws: int
    strategy_variances: dict[str, float]
    preliminary_variance: float
    improved_variance: float

    @property
    def ratio(self) -> float:
        return self.improved_variance / self.preliminary_variance


def run_sample_size_sweep(config: StudyConfig, pop: Population, sizes) -> list[SweepPoint]:
    """Rerun the mixture study at each draw count in ``sizes`` (same seed each time)."""
    points = []
    for n in sizes:
        report = run_mixture_study(config, pop, n_draws=int(n))
        names = [r.name for r in report.rows if r.name not in ("preliminary", "improved")]
        points.append(
            SweepPoint(
                int(n),
                {k: report.row(k).variance for k in names},
                report.row("preliminary").variance,
                report.row("improved").variance,
            )
        )
    return points


def check_sweep(points: list[SweepPoint], targets: dict | None = None) -> list[CheckResult]:
    spec = (targets or load_targets())["sweep"]
    out = []
    for p in points:
        if p.n_draws <= spec["improved_beats_strategies_up_to"]:
            best = min(p.strategy_variances.values())
            out.append(CheckResult(f"n={p.n_draws} improved variance below every strategy", p.improved_variance, best, 0.0, p.improved_variance < best))
    last = points[-1]
    out.append(_within(f"n={last.n_draws} improved/preliminary variance ratio", last.ratio, 1.0, spec["final_ratio_tolerance"]))
    ratios = [p.ratio for p in points]
    out.append(CheckResult("ratio trends toward 1", ratios[-1], ratios[0], 0.0, ratios[-1] > ratios[0]))
    return out


def robustness_config(config: StudyConfig, true_size: int, multiple: int = 2) -> StudyConfig:
    """Retrospective config with one true size and equal-prior posited sizes ``true_size..multiple*true_size``."""
    return config.with_overrides(
        true_sizes=(int(true_size),),
        true_size_prior="uniform",
        posited_sizes=tuple(range(int(true_size), int(multiple * true_size) + 1)),
        size_prior="uniform",
    )


def check_robustness(report: StudyReport, targets: dict | None = None) -> list[CheckResult]:
    spec = (targets or load_targets())["robustness"]
    out = []
    for response in dict.fromkeys(r.response for r in report.rows):
        pre, imp = report.row("preliminary", response), report.row("improved", response)
        reduction = 1.0 - imp.variance / pre.variance
        drop = pre.coverage - imp.coverage
        out.append(CheckResult(f"{response} variance reduction", reduction, spec["min_variance_reduction"], 0.0, reduction >= spec["min_variance_reduction"]))
        out.append(CheckResult(f"{response} coverage drop", drop, spec["max_coverage_drop"], 0.0, drop <= spec["max_coverage_drop"]))
    return out
