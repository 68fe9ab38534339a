"""Posterior Cramér's V for sparse multiway contingency tables.

Observations are p-tuples of categorical levels. The table is flattened in
row-major order over positions, a heterogeneous Dirichlet-multinomial with a
PH prior is fitted to the cell counts, and every retained draw of the
concentrations gives smoothed cell probabilities ``(n + alpha) / (N + A)``.
Those are marginalized to each pair of positions to get a draw of Cramér's V.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from .dm import Corpus, mwg_sample
from .numeric import rng_suite
from .pochhammer import HALF_HORSESHOE, PochhammerParams

__all__ = [
    "MultiwayTable",
    "CramersVSummary",
    "MCMCConfig",
    "cramers_v",
    "table_posterior_cramers_v",
    "synthetic_table",
]


def cramers_v(joint) -> float:
    """Cramér's V of a two-way probability table.

    ``rho^2 = sum (p_ij - p_i p_j)^2 / (p_i p_j) / (min(r, c) - 1)``.

    Examples
    --------
    >>> round(cramers_v([[0.4, 0.1], [0.1, 0.4]]), 12)
    0.6
    """
    p = np.asarray(joint, dtype=float)
    if p.ndim != 2 or min(p.shape) < 2:
        raise ValueError("need a two-way table with at least two levels per margin")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("entries must be non-negative and sum to 1")
    r, c = p.sum(axis=1), p.sum(axis=0)
    if np.any(r <= 0) or np.any(c <= 0):
        raise ValueError("both marginals must be strictly positive")
    outer = np.outer(r, c)
    chi2 = np.sum((p - outer) ** 2 / outer)
    return float(np.sqrt(min(max(chi2 / (min(p.shape) - 1), 0.0), 1.0)))


def _pair_cramers_v(joint: np.ndarray) -> np.ndarray:
    """Vectorized Cramér's V over a stack of ``(draws, r, c)`` tables."""
    r = joint.sum(axis=2, keepdims=True)
    c = joint.sum(axis=1, keepdims=True)
    outer = r * c
    chi2 = np.sum((joint - outer) ** 2 / outer, axis=(1, 2))
    return np.sqrt(np.clip(chi2 / (min(joint.shape[1:]) - 1), 0.0, 1.0))


@dataclass(frozen=True)
class MultiwayTable:
    """Observations of ``p`` categorical positions.

    Attributes
    ----------
    levels : tuple of int
        Number of levels ``d_j`` of each position.
    observations : ndarray
        ``n x p`` integer level indices.
    alphabets : tuple of tuple of str, optional
        Level labels per position, when built from strings.
    """

    levels: tuple[int, ...]
    observations: np.ndarray
    alphabets: tuple[tuple[str, ...], ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        levels = tuple(int(d) for d in self.levels)
        obs = np.asarray(self.observations, dtype=np.int64)
        if obs.ndim == 1 and obs.size == 0:
            obs = obs.reshape(0, len(levels))
        if obs.ndim != 2 or obs.shape[1] != len(levels):
            raise ValueError("observations must be an n x p matrix matching levels")
        if any(d < 1 for d in levels):
            raise ValueError("every position needs at least one level")
        if obs.size and (np.any(obs < 0) or np.any(obs >= np.asarray(levels))):
            raise ValueError("level index out of range")
        obs.setflags(write=False)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "observations", obs)

    @classmethod
    def from_labels(cls, rows: Sequence[Sequence[str]], alphabets: Sequence[Sequence[str]] | None = None):
        """Build from label tuples; alphabets are inferred (sorted) when absent."""
        rows = [tuple(str(v) for v in r) for r in rows]
        if not rows and alphabets is None:
            raise ValueError("cannot infer alphabets from an empty table")
        p = len(alphabets) if alphabets is not None else len(rows[0])
        if any(len(r) != p for r in rows):
            raise ValueError("all observations need the same number of positions")
        if alphabets is None:
            alphabets = [sorted({r[j] for r in rows}) for j in range(p)]
        alphabets = tuple(tuple(str(a) for a in alpha) for alpha in alphabets)
        index = [{a: i for i, a in enumerate(alpha)} for alpha in alphabets]
        obs = np.empty((len(rows), p), dtype=np.int64)
        for i, r in enumerate(rows):
            for j, v in enumerate(r):
                if v not in index[j]:
                    raise ValueError(f"level {v!r} not in the alphabet of position {j + 1}")
                obs[i, j] = index[j][v]
        return cls(tuple(len(a) for a in alphabets), obs, alphabets)

    @property
    def p(self) -> int:
        return len(self.levels)

    @property
    def n_obs(self) -> int:
        return self.observations.shape[0]

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.levels, dtype=np.int64))

    def cell_index(self) -> np.ndarray:
        """Row-major flat cell index of every observation."""
        if self.n_obs == 0:
            return np.empty(0, dtype=np.int64)
        return np.ravel_multi_index(tuple(self.observations.T), self.levels)

    def sparse_counts(self) -> dict[int, int]:
        """Occupied cells only."""
        idx, cnt = np.unique(self.cell_index(), return_counts=True)
        return {int(i): int(c) for i, c in zip(idx, cnt)}

    def counts(self) -> np.ndarray:
        """Dense flattened cell counts of length ``prod(levels)``."""
        return np.bincount(self.cell_index(), minlength=self.n_cells).astype(np.int64)

    def marginal(self, probs: np.ndarray, positions: Sequence[int]) -> np.ndarray:
        """Marginalize flattened cell probabilities (last axis) onto ``positions``."""
        probs = np.asarray(probs, dtype=float)
        lead = probs.shape[:-1]
        tensor = probs.reshape(lead + self.levels)
        drop = tuple(len(lead) + j for j in range(self.p) if j not in positions)
        out = tensor.sum(axis=drop)
        # kept axes come out in sorted order; output axis i is positions[i]
        rank = np.argsort(np.argsort(positions))
        return np.transpose(out, tuple(range(len(lead))) + tuple(len(lead) + int(r) for r in rank))


@dataclass(frozen=True)
class MCMCConfig:
    iterations: int = 5_000
    burn_in: int = 1_000
    thin: int = 10
    sigma: float = 0.5
    adapt: bool = True
    seed: int = 0


@dataclass(frozen=True)
class CramersVSummary:
    """Posterior summaries of Cramér's V for every pair of positions."""

    p: int
    pairs: tuple[tuple[int, int], ...]
    mean: np.ndarray
    q025: np.ndarray
    q975: np.ndarray

    def matrix(self, which: str = "mean") -> np.ndarray:
        """Symmetric ``p x p`` matrix with a NaN diagonal."""
        vals = {"mean": self.mean, "q025": self.q025, "q975": self.q975}[which]
        out = np.full((self.p, self.p), np.nan)
        for (j, k), v in zip(self.pairs, vals):
            out[j, k] = out[k, j] = v
        return out

    def rows(self) -> list[tuple[int, int, float, float, float]]:
        """``(j, j', mean, q025, q975)`` with 1-based positions."""
        return [(j + 1, k + 1, float(m), float(lo), float(hi))
                for (j, k), m, lo, hi in zip(self.pairs, self.mean, self.q025, self.q975)]


def table_posterior_cramers_v(
    table: MultiwayTable,
    prior: PochhammerParams = HALF_HORSESHOE,
    config: MCMCConfig = MCMCConfig(),
) -> CramersVSummary:
    """Posterior mean and 95% interval of Cramér's V for every position pair.

    Positions with a single level carry no association and are rejected when
    they appear in a pair.
    """
    if table.n_obs == 0:
        raise ValueError("table has no observations")
    pairs = tuple(combinations(range(table.p), 2))
    if not pairs:
        empty = np.empty(0)
        return CramersVSummary(table.p, (), empty, empty, empty)
    if any(table.levels[j] < 2 or table.levels[k] < 2 for j, k in pairs):
        raise ValueError("every position needs at least two levels")
    counts = table.counts()
    chain = mwg_sample(Corpus(counts[None, :]), prior, T=config.iterations, sigma=config.sigma,
                       burn_in=config.burn_in, seed=config.seed, adapt=config.adapt, thin=config.thin)
    draws = chain.draws
    if draws.shape[0] == 0:
        raise ValueError("no retained draws; increase iterations or reduce burn_in")
    probs = (counts[None, :] + draws) / (counts.sum() + draws.sum(axis=1, keepdims=True))
    rho = np.empty((len(pairs), draws.shape[0]))
    for i, (j, k) in enumerate(pairs):
        rho[i] = _pair_cramers_v(table.marginal(probs, (j, k)))
    lo, hi = np.quantile(rho, [0.025, 0.975], axis=1)
    return CramersVSummary(table.p, pairs, rho.mean(axis=1), lo, hi)


def synthetic_table(
    kind: str = "promoter", p: int = 7, d: int = 4, n_obs: int = 53, seed: int = 0
) -> MultiwayTable:
    """Synthetic tables for demos and tests.

    ``"independent"`` draws every position independently, ``"copy"`` makes
    position 2 a copy of position 1, and ``"promoter"`` mimics a short DNA
    alignment: positions are drawn from a Markov chain over the ``d`` letters
    so neighbours are mildly associated.
    """
    rng = rng_suite(seed, 8)
    if p < 1 or d < 1 or n_obs < 0:
        raise ValueError("need p >= 1, d >= 1 and n_obs >= 0")
    if kind == "independent":
        probs = rng.dirichlet(np.full(d, 5.0), p)
        obs = np.column_stack([rng.gen.choice(d, n_obs, p=probs[j]) for j in range(p)])
    elif kind == "copy":
        if p < 2:
            raise ValueError("copy tables need p >= 2")
        obs = rng.integers(0, d, (n_obs, p))
        obs[:, 1] = obs[:, 0]
    elif kind == "promoter":
        trans = rng.dirichlet(np.full(d, 0.7), d)
        obs = np.empty((n_obs, p), dtype=np.int64)
        obs[:, 0] = rng.integers(0, d, n_obs)
        for j in range(1, p):
            cum = np.cumsum(trans[obs[:, j - 1]], axis=1)
            u = rng.uniform(n_obs)[:, None]
            obs[:, j] = np.minimum((u > cum).sum(axis=1), d - 1)
    else:
        raise ValueError(f"unknown synthetic table kind {kind!r}")
    alphabet = tuple("ACGT") if d == 4 else tuple(str(i) for i in range(d))
    return MultiwayTable(tuple([d] * p), obs.reshape(n_obs, p), tuple([alphabet] * p))
