"""Point-wise statistics over ensembles of sampled satisfaction functions.

Every statistic is taken per time step across the members of an ensemble,
so each result is again a :class:`SampledFunction` on the ensemble's grid.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import SampledFunction, SamplingGrid


class EmptyEnsemble(ValueError):
    pass


class ZeroMass(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SatisfactionEnsemble:
    grid: SamplingGrid
    members: tuple[SampledFunction, ...]
    instruction_tag: str = ""

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise EmptyEnsemble("an ensemble needs at least one member")
        for m in members:
            if m.grid != self.grid:
                raise ValueError("all ensemble members must share the ensemble grid")
        object.__setattr__(self, "members", members)

    @classmethod
    def from_matrix(cls, grid: SamplingGrid, values, tag: str = "") -> "SatisfactionEnsemble":
        """Build from a (members x steps) array."""
        values = np.atleast_2d(np.asarray(values, dtype=float))
        return cls(grid, tuple(SampledFunction(grid, row) for row in values), tag)

    def matrix(self) -> np.ndarray:
        return np.vstack([m.values for m in self.members])

    def __len__(self):
        return len(self.members)


def _matrix(e: SatisfactionEnsemble) -> np.ndarray:
    if not len(e):
        raise EmptyEnsemble("empty ensemble")
    return e.matrix()


def pointwise_mean(e: SatisfactionEnsemble) -> SampledFunction:
    vals = _matrix(e)
    # rows are summed in member order so results match a per-step loop bit for bit
    acc = np.zeros(vals.shape[1])
    for row in vals:
        acc = acc + row
    return SampledFunction(e.grid, np.clip(acc / vals.shape[0], 0.0, 1.0))


def _quantile_values(sorted_vals: np.ndarray, q: float) -> np.ndarray:
    h = (sorted_vals.shape[0] - 1) * q
    lo = int(math.floor(h))
    hi = min(lo + 1, sorted_vals.shape[0] - 1)
    frac = h - lo
    low = sorted_vals[lo]
    if frac == 0:
        return low.copy()
    return low + frac * (sorted_vals[hi] - low)


def pointwise_quantile(e: SatisfactionEnsemble, q: float) -> SampledFunction:
    """Per-step quantile, interpolating linearly between order statistics."""
    if not 0 < q < 1:
        raise ValueError(f"quantile level must lie in (0, 1), got {q}")
    vals = np.sort(_matrix(e), axis=0)
    return SampledFunction(e.grid, _quantile_values(vals, q))


def pointwise_median(e: SatisfactionEnsemble) -> SampledFunction:
    return pointwise_quantile(e, 0.5)


def _bin_index(values: np.ndarray, bin_width: float, nbins: int) -> np.ndarray:
    # the nudge keeps 0.15 / 0.05 = 2.9999999999999996 in bin 3
    idx = np.floor(values / bin_width + 1e-9).astype(int)
    return np.clip(idx, 0, nbins - 1)


def pointwise_mode(
    e: SatisfactionEnsemble, bin_width: float = 0.05
) -> tuple[SampledFunction, int]:
    """Centre of the most populated value bin at each step.

    Returns the mode function and the number of steps where two or more
    bins tied for the maximum (the lowest of those bins wins).
    """
    if not 0 < bin_width <= 1:
        raise ValueError("bin_width must lie in (0, 1]")
    vals = _matrix(e)
    nbins = math.ceil(1.0 / bin_width - 1e-9)
    idx = _bin_index(vals, bin_width, nbins)
    counts = np.zeros((nbins, vals.shape[1]), dtype=int)
    for row in idx:
        counts[row, np.arange(vals.shape[1])] += 1
    winner = counts.argmax(axis=0)
    ties = int(np.sum((counts == counts.max(axis=0)).sum(axis=0) > 1))
    centres = np.minimum((winner + 0.5) * bin_width, 1.0)
    return SampledFunction(e.grid, centres), ties


def density_variance(fn: SampledFunction) -> float:
    """Variance of time under the density proportional to ``fn`` (s^2)."""
    v = np.asarray(fn.values, dtype=float)
    mass = v.sum()
    if not mass > 0:
        raise ZeroMass("satisfaction is zero at every step")
    t = fn.grid.times()
    p = v / mass
    mean = float(np.dot(t, p))
    return float(np.dot((t - mean) ** 2, p))


def density_mean(fn: SampledFunction) -> float:
    v = np.asarray(fn.values, dtype=float)
    if not v.sum() > 0:
        raise ZeroMass("satisfaction is zero at every step")
    return float(np.dot(fn.grid.times(), v / v.sum()))


@dataclass(frozen=True, eq=False)
class EnsembleSummary:
    mean: SampledFunction
    median: SampledFunction
    mode: SampledFunction
    quantiles: dict[float, SampledFunction]
    minimum: SampledFunction
    maximum: SampledFunction
    pointwise_variance: np.ndarray
    mode_ties: int = 0
    members: int = 0
    tag: str = ""
    extras: dict = field(default_factory=dict)

    @property
    def median_variance(self) -> float:
        return density_variance(self.median)


def summarize(
    e: SatisfactionEnsemble,
    levels: Sequence[float] = (0.25, 0.75),
    bin_width: float = 0.05,
) -> EnsembleSummary:
    vals = _matrix(e)
    mode, ties = pointwise_mode(e, bin_width)
    return EnsembleSummary(
        mean=pointwise_mean(e),
        median=pointwise_median(e),
        mode=mode,
        quantiles={q: pointwise_quantile(e, q) for q in levels},
        minimum=SampledFunction(e.grid, vals.min(axis=0)),
        maximum=SampledFunction(e.grid, vals.max(axis=0)),
        pointwise_variance=vals.var(axis=0),
        mode_ties=ties,
        members=len(e),
        tag=e.instruction_tag,
    )


def _midranks(values: Sequence[float]) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        for m in range(i, j + 1):
            ranks[order[m]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


EXACT_LIMIT = 12


def mann_whitney_u(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    """U statistic of ``a`` and its two-sided p-value.

    Ties get midranks. Up to ``EXACT_LIMIT`` pooled observations the
    p-value is the exact permutation probability of a U at least as far
    from its mean as the observed one; above that it uses the normal
    approximation with tie-corrected variance and continuity correction.
    """
    a, b = list(a), list(b)
    if not a or not b:
        raise ValueError("both samples need at least one observation")
    na, nb = len(a), len(b)
    n = na + nb
    ranks = _midranks(a + b)
    u = sum(ranks[:na]) - na * (na + 1) / 2
    mu = na * nb / 2

    if n <= EXACT_LIMIT:
        observed = abs(u - mu)
        hits = total = 0
        for group in itertools.combinations(range(n), na):
            total += 1
            uu = sum(ranks[i] for i in group) - na * (na + 1) / 2
            if abs(uu - mu) >= observed - 1e-9:
                hits += 1
        return u, hits / total

    _, counts = np.unique(np.asarray(a + b, dtype=float), return_counts=True)
    tie_term = float(np.sum(counts.astype(float) ** 3 - counts)) / (n * (n - 1))
    var = na * nb / 12 * ((n + 1) - tie_term)
    if var <= 0:
        return u, 1.0
    z = max(abs(u - mu) - 0.5, 0.0) / math.sqrt(var)
    return u, min(1.0, math.erfc(z / math.sqrt(2)))
