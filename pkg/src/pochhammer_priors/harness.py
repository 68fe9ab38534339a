"""Simulation scenarios, accuracy metrics and the benchmark driver.

Three scenarios are provided: a single sparse document (K = 100, N = 50),
50 documents with totals drawn from {50..150}, and the multi-document case
with structural zeros. Methods are fixed-alpha Dirichlet-multinomial
baselines and PH priors in homogeneous (``-h``) or heterogeneous (``-d``)
form.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from . import __version__
from .dm import Corpus, chain_summaries, homog_mh_sample, mwg_sample
from .numeric import RNG_VERSION, rng_suite
from .pochhammer import PochhammerParams

__all__ = [
    "ScenarioConfig",
    "ScenarioData",
    "MethodSpec",
    "BenchmarkRow",
    "BenchmarkReport",
    "PH_CONFIGS",
    "gen_scenario",
    "abs_metric",
    "cov_metric",
    "parse_method",
    "fit_method",
    "run_benchmark",
]

PH_CONFIGS = {
    1: PochhammerParams(0, 1, 2, 1),
    2: PochhammerParams(0, 1, 5, 1),
    3: PochhammerParams(1, 1, 3, 1),
    4: PochhammerParams(1, 1, 5, 1),
}

_SCENARIO_SETTINGS = {1: (1, 2, 3, 4), 2: (1, 2), 3: (1, 2, 3)}
_Q_BY_SETTING = {1: 10, 2: 30, 3: 50}


@dataclass(frozen=True)
class ScenarioConfig:
    """One simulation setting.

    Scenario 1 is a single document (settings: uniform pi, linear pi,
    alpha = 1/K, alpha_k = k/K). Scenario 2 has ``S`` documents with
    ``alpha = 1/K`` or ``alpha_k = k/K``. Scenario 3 zeroes ``q`` percent of
    ``alpha_k = k/K``; setting 1, 2, 3 mean q = 10, 30, 50 unless ``q`` is
    given.
    """

    scenario: int
    setting: int
    K: int = 100
    S: int | None = None
    N: int = 50
    N_range: tuple[int, int] = (50, 150)
    q: int | None = None
    replicates: int = 20
    seed: int = 2024

    def __post_init__(self):
        if self.scenario not in _SCENARIO_SETTINGS:
            raise ValueError("scenario must be 1, 2 or 3")
        if self.setting not in _SCENARIO_SETTINGS[self.scenario]:
            raise ValueError(f"scenario {self.scenario} has settings {_SCENARIO_SETTINGS[self.scenario]}")
        if self.K < 1 or self.replicates < 1:
            raise ValueError("K and replicates must be positive")
        if self.S is None:
            object.__setattr__(self, "S", 1 if self.scenario == 1 else 50)
        if self.scenario == 3 and self.q is None:
            object.__setattr__(self, "q", _Q_BY_SETTING[self.setting])
        if self.q is not None and not 0 <= self.q <= 100:
            raise ValueError("q is a percentage in [0, 100]")
        lo, hi = self.N_range
        if lo < 0 or hi < lo:
            raise ValueError("N_range must satisfy 0 <= low <= high")

    @property
    def label(self) -> str:
        return f"scenario{self.scenario}-setting{self.setting}"


@dataclass(frozen=True)
class ScenarioData:
    corpus: Corpus
    pi: np.ndarray
    alpha: np.ndarray | None


def gen_scenario(config: ScenarioConfig, replicate: int) -> ScenarioData:
    """Simulate one replicate; deterministic in ``(config.seed, replicate)``."""
    rng = rng_suite(config.seed, config.scenario, config.setting, replicate)
    K, S = config.K, config.S
    k = np.arange(1, K + 1, dtype=float)
    if config.scenario == 1:
        totals = np.full(S, config.N)
    else:
        totals = rng.integers(config.N_range[0], config.N_range[1] + 1, S)
    alpha = None
    if config.scenario == 1 and config.setting in (1, 2):
        base = np.full(K, 1.0 / K) if config.setting == 1 else k / k.sum()
        pi = np.tile(base, (S, 1))
    else:
        if config.scenario == 3:
            alpha = k / K
            n_zero = math.ceil(config.q * K / 100)
            alpha[rng.gen.choice(K, n_zero, replace=False)] = 0.0
        elif config.setting == (3 if config.scenario == 1 else 1):
            alpha = np.full(K, 1.0 / K)
        else:
            alpha = k / K
        pi = rng.dirichlet(alpha, S)
    counts = np.vstack([rng.multinomial(int(totals[s]), pi[s]) for s in range(S)])
    return ScenarioData(Corpus(counts), pi, alpha)


def abs_metric(pi_hat: np.ndarray, pi: np.ndarray) -> float:
    """Mean absolute error over all (document, category) cells."""
    pi_hat, pi = np.asarray(pi_hat, dtype=float), np.asarray(pi, dtype=float)
    if pi_hat.shape != pi.shape:
        raise ValueError("estimate and truth must have the same shape")
    return float(np.mean(np.abs(pi_hat - pi)))


def cov_metric(lower: np.ndarray, upper: np.ndarray, pi: np.ndarray) -> float:
    """Fraction of cells whose true probability lies inside its interval."""
    lower, upper, pi = (np.asarray(x, dtype=float) for x in (lower, upper, pi))
    if not (lower.shape == upper.shape == pi.shape):
        raise ValueError("interval bounds and truth must have the same shape")
    return float(np.mean((lower <= pi) & (pi <= upper)))


@dataclass(frozen=True)
class MethodSpec:
    """A posterior to benchmark.

    ``kind`` is ``"fixed"`` (Dirichlet-multinomial with a fixed alpha),
    ``"homogeneous"`` or ``"heterogeneous"`` (PH prior on a shared or
    per-category alpha).
    """

    name: str
    kind: str
    alpha: float | str | None = None
    prior: PochhammerParams | None = None

    def __post_init__(self):
        if self.kind not in ("fixed", "homogeneous", "heterogeneous"):
            raise ValueError(f"unknown method kind {self.kind!r}")
        if self.kind == "fixed" and self.alpha is None:
            raise ValueError("fixed-alpha methods need alpha")
        if self.kind != "fixed" and self.prior is None:
            raise ValueError("PH methods need a prior")

    def fixed_alpha(self, K: int) -> float:
        return 1.0 / K if self.alpha == "1/K" else float(self.alpha)


def parse_method(name: str) -> MethodSpec:
    """Translate ``dm``, ``jeffreys``, ``objective`` or ``ph<1-4><h|d>`` into a spec."""
    key = name.strip().lower().replace("-", "").replace("_", "")
    if key in ("dm", "uniform"):
        return MethodSpec(name, "fixed", alpha=1.0)
    if key == "jeffreys":
        return MethodSpec(name, "fixed", alpha=0.5)
    if key in ("objective", "dm1k"):
        return MethodSpec(name, "fixed", alpha="1/K")
    if len(key) == 4 and key.startswith("ph") and key[2] in "1234" and key[3] in "hd":
        kind = "homogeneous" if key[3] == "h" else "heterogeneous"
        return MethodSpec(name, kind, prior=PH_CONFIGS[int(key[2])])
    raise ValueError(f"unknown method {name!r}")


def fit_method(
    method: MethodSpec,
    corpus: Corpus,
    iterations: int = 10_000,
    burn_in: int = 2_000,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Posterior means and 95% interval bounds of ``pi`` for every cell."""
    counts = corpus.counts.astype(float)
    if method.kind == "fixed":
        a = method.fixed_alpha(corpus.K)
        shape1 = counts + a
        shape2 = (corpus.row_totals[:, None] + corpus.K * a) - shape1
        mean = shape1 / (shape1 + shape2)
        lo, hi = stats.beta.ppf([[[0.025]], [[0.975]]], shape1[None], shape2[None])
        return mean, lo, hi
    if method.kind == "homogeneous":
        chain = homog_mh_sample(corpus, method.prior, iterations, burn_in=burn_in, seed=seed, adapt=True)
    else:
        chain = mwg_sample(corpus, method.prior, iterations, burn_in=burn_in, seed=seed, adapt=True)
    summary = chain_summaries(chain, corpus, pi_draws="dirichlet", seed=seed)
    return summary.pi_mean, summary.pi_q025, summary.pi_q975


@dataclass
class BenchmarkRow:
    method: str
    scenario: int
    setting: int
    abs_mean: float
    abs_sd: float
    abs_se: float
    cov_mean: float
    cov_sd: float
    cov_se: float
    seconds: float
    replicates: int
    failures: int = 0
    errors: list[str] = field(default_factory=list)


@dataclass
class BenchmarkReport:
    """Aggregated ABS (x100) and COV per method and setting."""

    rows: list[BenchmarkRow]
    config: dict

    CSV_COLUMNS = ("method", "scenario", "setting", "abs_mean", "abs_se", "abs_sd",
                   "cov_mean", "cov_se", "cov_sd", "seconds", "replicates", "failures")

    def row(self, method: str, scenario: int | None = None, setting: int | None = None) -> BenchmarkRow:
        for r in self.rows:
            if r.method == method and scenario in (None, r.scenario) and setting in (None, r.setting):
                return r
        raise KeyError(method)

    def to_csv_rows(self) -> list[list]:
        out = [list(self.CSV_COLUMNS)]
        for r in self.rows:
            out.append([getattr(r, c) for c in self.CSV_COLUMNS])
        return out

    def to_json(self) -> str:
        return json.dumps({"config": self.config, "rows": [asdict(r) for r in self.rows]}, indent=2)


def _one_cell(args):
    method, config, replicate, iterations, burn_in = args
    data = gen_scenario(config, replicate)
    seed = int(np.random.SeedSequence([config.seed, config.scenario, config.setting, replicate, 7]).generate_state(1)[0])
    start = time.perf_counter()
    try:
        mean, lo, hi = fit_method(method, data.corpus, iterations, burn_in, seed)
    except Exception as exc:  # recorded per cell, the benchmark carries on
        return None, None, time.perf_counter() - start, f"{type(exc).__name__}: {exc}"
    return abs_metric(mean, data.pi), cov_metric(lo, hi, data.pi), time.perf_counter() - start, None


def _aggregate(values: list[float]) -> tuple[float, float, float]:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return math.nan, math.nan, math.nan
    sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), sd, sd / math.sqrt(arr.size)


def run_benchmark(
    configs: Sequence[ScenarioConfig],
    methods: Sequence[MethodSpec | str],
    iterations: int = 10_000,
    burn_in: int = 2_000,
    workers: int = 1,
) -> BenchmarkReport:
    """Run every method on every replicate of every setting.

    ABS is reported times 100. ``abs_sd``/``cov_sd`` are standard deviations
    across replicates and ``abs_se``/``cov_se`` the corresponding standard
    errors. A failing cell is recorded in the row and skipped.
    """
    specs = [parse_method(m) if isinstance(m, str) else m for m in methods]
    names = [s.name.strip().lower() for s in specs]
    if len(set(names)) != len(names):
        raise ValueError("duplicate method names")
    if iterations < 1 or not 0 <= burn_in < iterations:
        raise ValueError("need iterations >= 1 and 0 <= burn_in < iterations")
    jobs = [(m, c, r, iterations, burn_in) for c in configs for m in specs for r in range(c.replicates)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_one_cell, jobs))
    else:
        results = [_one_cell(j) for j in jobs]
    rows = []
    pos = 0
    for c in configs:
        for m in specs:
            cell = results[pos:pos + c.replicates]
            pos += c.replicates
            abs_vals = [100 * r[0] for r in cell if r[3] is None]
            cov_vals = [r[1] for r in cell if r[3] is None]
            errors = [r[3] for r in cell if r[3] is not None]
            am, asd, ase = _aggregate(abs_vals)
            cm, csd, cse = _aggregate(cov_vals)
            rows.append(BenchmarkRow(m.name, c.scenario, c.setting, am, asd, ase, cm, csd, cse,
                                     float(sum(r[2] for r in cell)), len(abs_vals), len(errors), errors))
    config = {
        "configs": [asdict(c) for c in configs],
        "methods": [{"name": m.name, "kind": m.kind, "alpha": m.alpha,
                     "prior": m.prior.as_dict() if m.prior else None} for m in specs],
        "iterations": iterations,
        "burn_in": burn_in,
        "rng": RNG_VERSION,
        "version": __version__,
    }
    return BenchmarkReport(rows, config)
