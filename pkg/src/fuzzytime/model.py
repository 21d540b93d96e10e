"""Satisfaction functions, sampling grids and skill tuples.

All times are seconds measured from the moment an instruction is issued.
Every satisfaction function maps a start time to a value in [0, 1] and can
be called with a scalar or a numpy array.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Union

import numpy as np

# floor() on u*|J| must not lose a step to representation error (3600 / 4.5)
_GRID_EPS = 1e-9
_TIME_DECIMALS = 9


@dataclass(frozen=True)
class SamplingGrid:
    """Interval [start, end) sampled at ``rate`` samples per second."""

    start: float
    end: float
    rate: float

    def __post_init__(self):
        if self.start < 0:
            raise ValueError(f"grid start must be >= 0, got {self.start}")
        if not self.end > self.start:
            raise ValueError(f"grid end must exceed start ({self.start}, {self.end})")
        if not self.rate > 0:
            raise ValueError(f"sampling rate must be positive, got {self.rate}")
        if self.k < 1:
            raise ValueError("grid has no time steps; raise the rate or widen the interval")

    @classmethod
    def from_period(cls, start: float, end: float, period: float) -> "SamplingGrid":
        return cls(float(start), float(end), 1.0 / float(period))

    @property
    def k(self) -> int:
        return int(math.floor(self.rate * (self.end - self.start) + _GRID_EPS))

    @property
    def step(self) -> float:
        return 1.0 / self.rate

    def time(self, j: int) -> float:
        return round(self.start + j / self.rate, _TIME_DECIMALS)

    def times(self) -> np.ndarray:
        return np.round(self.start + np.arange(self.k) / self.rate, _TIME_DECIMALS)

    def index_at_or_after(self, t: float) -> int:
        """Smallest step index whose time is >= t (may be >= k)."""
        j = math.ceil((t - self.start) * self.rate - _GRID_EPS)
        return max(j, 0)


def _check_time(name, value):
    if not value >= 0:
        raise ValueError(f"{name} must be a non-negative time, got {value}")


class SatisfactionFunction:
    """Base class; subclasses implement ``_eval`` on float arrays."""

    def __call__(self, t):
        arr = np.asarray(t, dtype=float)
        out = np.clip(self._eval(arr), 0.0, 1.0)
        if out.ndim == 0:
            return float(out)
        return out

    def _eval(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class Trapezoid(SatisfactionFunction):
    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        for name in "abcd":
            _check_time(name, getattr(self, name))
        if not self.a <= self.b <= self.c <= self.d:
            raise ValueError(
                f"trapezoid corners must be ordered, got {(self.a, self.b, self.c, self.d)}"
            )

    @property
    def corners(self) -> tuple[float, float, float, float]:
        return (self.a, self.b, self.c, self.d)

    def _eval(self, t):
        a, b, c, d = self.corners
        out = np.zeros_like(t)
        # slopes are computed everywhere and masked; tiny widths may overflow off-mask
        with np.errstate(over="ignore"):
            if b > a:
                rise = (t >= a) & (t < b)
                out = np.where(rise, (t - a) / (b - a), out)
            if d > c:
                fall = (t > c) & (t <= d)
                out = np.where(fall, (d - t) / (d - c), out)
        return np.where((t >= b) & (t <= c), 1.0, out)


@dataclass(frozen=True)
class Bell(SatisfactionFunction):
    """Unit-amplitude Gaussian ``exp(-(t - mu)^2 / (2 sigma^2))``."""

    mu: float
    sigma: float

    def __post_init__(self):
        _check_time("mu", self.mu)
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    def _eval(self, t):
        z = (t - self.mu) / self.sigma
        return np.exp(-0.5 * z * z)


@dataclass(frozen=True, eq=False)
class SampledFunction(SatisfactionFunction):
    """Values on a grid, linearly interpolated, zero outside the sampled span."""

    grid: SamplingGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.shape[0] != self.grid.k:
            raise ValueError(
                f"expected {self.grid.k} values for the grid, got shape {values.shape}"
            )
        if np.any(~np.isfinite(values)) or values.min() < 0.0 or values.max() > 1.0:
            raise ValueError("sampled satisfaction values must lie in [0, 1]")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __eq__(self, other):
        if not isinstance(other, SampledFunction):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.values, other.values)

    __hash__ = None

    def _eval(self, t):
        return np.interp(t, self.grid.times(), self.values, left=0.0, right=0.0)


@dataclass(frozen=True)
class TransformedFunction(SatisfactionFunction):
    """``inner(pivot + (t + shift - pivot) * scale)``.

    A scale in (0, 1) widens the inner function around the pivot, a
    positive shift moves it earlier in time.
    """

    inner: SatisfactionFunction
    scale: float
    shift: float = 0.0
    pivot: float = 0.0

    def __post_init__(self):
        if self.scale == 0 or not math.isfinite(self.scale):
            raise ValueError("time scale must be finite and nonzero")
        if not self.shift >= 0:
            raise ValueError(f"time shift must be >= 0, got {self.shift}")
        _check_time("pivot", self.pivot)

    def _eval(self, t):
        return self.inner._eval(self.pivot + (t + self.shift - self.pivot) * self.scale)


def evaluate(fn: SatisfactionFunction, t):
    """Satisfaction of starting at time ``t`` (scalar or array)."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("satisfaction functions are defined for t >= 0 only")
    return fn(t)


def transform(
    fn: SatisfactionFunction, scale: float, shift: float = 0.0, pivot: float = 0.0
) -> TransformedFunction:
    return TransformedFunction(fn, float(scale), float(shift), float(pivot))


def to_sampled(fn: SatisfactionFunction, grid: SamplingGrid) -> SampledFunction:
    if isinstance(fn, SampledFunction) and fn.grid == grid:
        return fn
    return SampledFunction(grid, np.asarray(fn(grid.times()), dtype=float))


def trapezoid_corners(fn: SatisfactionFunction) -> tuple[float, ...] | None:
    """Corners of the trapezoid equivalent to ``fn``, if there is one.

    Affine time maps keep trapezoids trapezoidal, so transformed trapezoids
    collapse to four corners. Returns None for other shapes. Corners can
    fall below zero when a widened shoulder reaches past t = 0.
    """
    if isinstance(fn, Trapezoid):
        return fn.corners
    if isinstance(fn, TransformedFunction):
        inner = trapezoid_corners(fn.inner)
        if inner is None:
            return None
        mapped = [fn.pivot + (x - fn.pivot) / fn.scale - fn.shift for x in inner]
        return tuple(sorted(mapped))
    return None


Params = Mapping[str, Any]


@dataclass(frozen=True)
class SpecificSkill:
    id: str
    start: float
    duration: float
    params: Params = field(default_factory=dict)
    # keys of ``params`` that came from fuzzy parameters and still need grounding
    unresolved: tuple[str, ...] = ()

    def __post_init__(self):
        _check_time("start", self.start)
        if not self.duration > 0:
            raise ValueError(f"duration must be positive, got {self.duration}")


@dataclass(frozen=True)
class FuzzySkill:
    id: str
    psi: SatisfactionFunction
    duration: float
    fuzzy_params: Params = field(default_factory=dict)
    specific_params: Params = field(default_factory=dict)

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError(f"skill {self.id!r}: duration must be positive")


@dataclass(frozen=True)
class FuzzyTask:
    """Unordered set of fuzzy skills; iteration follows sorted skill ids."""

    skills: tuple[FuzzySkill, ...]

    def __post_init__(self):
        skills = tuple(sorted(self.skills, key=lambda s: s.id))
        if not skills:
            raise ValueError("a fuzzy task needs at least one skill")
        ids = [s.id for s in skills]
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        if dupes:
            raise ValueError(f"duplicate skill ids: {', '.join(dupes)}")
        object.__setattr__(self, "skills", skills)

    def __len__(self):
        return len(self.skills)

    def __iter__(self):
        return iter(self.skills)

    @property
    def ids(self) -> list[str]:
        return [s.id for s in self.skills]

    @property
    def durations(self) -> np.ndarray:
        return np.array([s.duration for s in self.skills], dtype=float)


AnyFunction = Union[Trapezoid, Bell, SampledFunction, TransformedFunction]
