"""Satisfaction-maximising schedules for fuzzy tasks.

A schedule assigns every skill a start time on a shared sampling grid. Its
objective is the product of the skills' satisfaction values, each floored
at ``epsilon`` so a single unsatisfiable skill does not flatten the whole
landscape, and it is zero whenever two executions overlap.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .model import FuzzyTask, SamplingGrid, SpecificSkill

# slack for comparing end and start times that went through float division
TIME_TOL = 1e-9


class NoFeasibleSchedule(RuntimeError):
    pass


class SearchSpaceTooLarge(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    grid: SamplingGrid = field(default_factory=lambda: SamplingGrid(0.0, 3600.0, 1 / 60))
    epsilon: float = 1e-6
    seed: int = 0
    restarts: int = 20
    sa_initial_temp: float = 1.0
    sa_cooling: float = 0.95
    sa_iters_per_temp: int = 50
    sa_min_temp: float = 1e-4
    sa_step_window: int = 5
    sa_swap_prob: float = 0.2
    max_candidates: int = 10**7
    workers: int = 1

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if not 0 < self.sa_cooling < 1:
            raise ValueError("sa_cooling must lie in (0, 1)")
        if not (self.sa_initial_temp > 0 and self.sa_min_temp > 0):
            raise ValueError("annealing temperatures must be positive")
        if not 0 <= self.sa_swap_prob <= 1:
            raise ValueError("sa_swap_prob must lie in [0, 1]")
        if self.sa_iters_per_temp < 1 or self.sa_step_window < 1:
            raise ValueError("sa_iters_per_temp and sa_step_window must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class Schedule:
    starts: tuple[tuple[str, float], ...]
    objective: float
    feasible: bool
    below_threshold: frozenset[str] = frozenset()

    def start_of(self, skill_id: str) -> float:
        return dict(self.starts)[skill_id]

    def to_dict(self) -> dict:
        return {
            "starts": [{"id": i, "start_s": t} for i, t in self.starts],
            "objective": self.objective,
            "feasible": self.feasible,
            "below_threshold": sorted(self.below_threshold),
        }


def check_no_overlap(starts: Sequence[float], durations: Sequence[float]) -> bool:
    """True when no two executions intersect; touching intervals are fine."""
    if len(starts) != len(durations):
        raise ValueError("starts and durations differ in length")
    order = sorted(range(len(starts)), key=lambda i: starts[i])
    for cur, nxt in zip(order, order[1:]):
        if starts[cur] + durations[cur] > starts[nxt] + TIME_TOL:
            return False
    return True


def _start_vector(task: FuzzyTask, starts) -> list[float]:
    if isinstance(starts, Mapping):
        if set(starts) != set(task.ids):
            raise ValueError("start mapping must name every skill exactly once")
        return [float(starts[i]) for i in task.ids]
    starts = [float(t) for t in starts]
    if len(starts) != len(task):
        raise ValueError(f"expected {len(task)} start times, got {len(starts)}")
    return starts


def objective(task: FuzzyTask, starts, epsilon: float = 1e-6) -> float:
    """Floored satisfaction product, or 0 for overlapping executions.

    ``starts`` is a mapping from skill id to start time, or a sequence in
    the task's (sorted id) order.
    """
    times = _start_vector(task, starts)
    if not check_no_overlap(times, list(task.durations)):
        return 0.0
    value = 1.0
    for skill, t in zip(task, times):
        value *= max(skill.psi(t), epsilon)
    return value


def make_schedule(task: FuzzyTask, starts, epsilon: float = 1e-6) -> Schedule:
    times = _start_vector(task, starts)
    below = frozenset(s.id for s, t in zip(task, times) if s.psi(t) < epsilon)
    value = objective(task, times, epsilon)
    feasible = check_no_overlap(times, list(task.durations))
    return Schedule(tuple(zip(task.ids, times)), value, feasible, below)


class _GridProblem:
    """Task with satisfaction values tabulated on the grid (skill x step)."""

    def __init__(self, task: FuzzyTask, cfg: SolverConfig):
        self.task = task
        self.cfg = cfg
        self.grid = cfg.grid
        self.times = cfg.grid.times()
        self.k = len(self.times)
        self.n = len(task)
        self.durations = task.durations
        self.raw = np.vstack([np.asarray(s.psi(self.times), dtype=float) for s in task])
        self.factors = np.maximum(self.raw, cfg.epsilon)
        self.log_factors = np.log(self.factors)
        self._times = self.times.tolist()
        self._durations = self.durations.tolist()
        self._factors = self.factors.tolist()
        self._log_factors = self.log_factors.tolist()
        # minimal index distance between a skill's start and the next start
        self.gaps = np.array(
            [max(1, math.ceil(d * self.grid.rate - TIME_TOL)) for d in self.durations]
        )

    def feasible(self, idx) -> bool:
        return check_no_overlap([self._times[j] for j in idx], self._durations)

    def value(self, idx) -> float:
        if not self.feasible(idx):
            return 0.0
        v = 1.0
        for i, j in enumerate(idx):
            v *= self._factors[i][j]
        return v

    def log_value(self, idx) -> float:
        return sum(self._log_factors[i][j] for i, j in enumerate(idx))

    def schedule(self, idx) -> Schedule:
        return make_schedule(self.task, [self.times[j] for j in idx], self.cfg.epsilon)

    def check_capacity(self):
        # back to back with the longest skill last is the tightest packing
        needed = int(self.gaps.sum() - self.gaps.max())
        if needed > self.k - 1:
            raise NoFeasibleSchedule(
                f"the skills need {needed + 1} grid steps back to back; the grid has {self.k}"
            )

    def greedy(self) -> list[int]:
        """Pack skills in order of their preferred step, pushing right on conflict.

        If the packing runs off the grid, the tail is pulled back left.
        """
        self.check_capacity()
        best = self.raw.argmax(axis=1)
        order = sorted(range(self.n), key=lambda i: (best[i], self.task.ids[i]))
        idx = [0] * self.n
        earliest = self.grid.start
        for i in order:
            j = max(int(best[i]), self.grid.index_at_or_after(earliest))
            idx[i] = j
            earliest = self.grid.time(j) + self.durations[i]
        latest = self.k - 1
        for rank in range(self.n - 1, -1, -1):
            i = order[rank]
            idx[i] = min(idx[i], latest)
            if rank:
                latest = idx[i] - int(self.gaps[order[rank - 1]])
        if idx[order[0]] < 0:
            # this order does not fit; longest skill last always does
            order = sorted(range(self.n), key=lambda i: (self.gaps[i], self.task.ids[i]))
            pos = 0
            for i in order:
                idx[i] = pos
                pos += int(self.gaps[i])
        return idx

    def random_feasible(self, rng: np.random.Generator) -> list[int] | None:
        order = rng.permutation(self.n)
        slack = (self.k - 1) - int(sum(self.gaps[i] for i in order[:-1]))
        if slack < 0:
            return None
        marks = np.sort(rng.integers(0, slack + 1, size=self.n))
        idx = [0] * self.n
        pos = int(marks[0])
        for rank, i in enumerate(order):
            if rank:
                prev = order[rank - 1]
                pos += int(self.gaps[prev]) + int(marks[rank] - marks[rank - 1])
            idx[i] = pos
        return idx


def _exhaustive_chunk(p: _GridProblem, lo: int, hi: int) -> tuple[float, int]:
    flat = np.arange(lo, hi)
    idx = np.unravel_index(flat, (p.k,) * p.n)
    vals = np.ones(hi - lo)
    for i in range(p.n):
        vals = vals * p.factors[i, idx[i]]
    ok = np.ones(hi - lo, dtype=bool)
    for i, j in itertools.combinations(range(p.n), 2):
        ti, tj = p.times[idx[i]], p.times[idx[j]]
        ok &= (ti + p.durations[i] <= tj + TIME_TOL) | (tj + p.durations[j] <= ti + TIME_TOL)
    vals = np.where(ok, vals, 0.0)
    best = int(np.argmax(vals))
    return float(vals[best]), lo + best


def solve_exhaustive(task: FuzzyTask, cfg: SolverConfig, chunk: int = 1 << 18) -> Schedule:
    """Global grid optimum; ties go to the lexicographically smallest start vector."""
    p = _GridProblem(task, cfg)
    total = p.k**p.n
    if total > cfg.max_candidates:
        raise SearchSpaceTooLarge(
            f"{p.k}^{p.n} = {total} candidates exceed the limit of {cfg.max_candidates}"
        )
    bounds = [(lo, min(lo + chunk, total)) for lo in range(0, total, chunk)]
    if cfg.workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(lambda b: _exhaustive_chunk(p, *b), bounds))
    else:
        results = [_exhaustive_chunk(p, *b) for b in bounds]

    best_val, best_flat = 0.0, -1
    for val, flat in results:  # chunk order keeps the earliest maximiser
        if val > best_val:
            best_val, best_flat = val, flat
    if best_flat < 0:
        raise NoFeasibleSchedule("no grid start vector avoids overlapping executions")
    idx = [int(j) for j in np.unravel_index(best_flat, (p.k,) * p.n)]
    return p.schedule(idx)


def _climb(p: _GridProblem, idx: list[int]) -> tuple[list[int], float]:
    cur = p.value(idx)
    while True:
        best_val, best_idx = cur, None
        for i in range(p.n):
            for delta in (-1, 1):
                j = idx[i] + delta
                if not 0 <= j < p.k:
                    continue
                cand = idx.copy()
                cand[i] = j
                val = p.value(cand)
                if val > best_val:
                    best_val, best_idx = val, cand
        if best_idx is None:
            return idx, cur
        idx, cur = best_idx, best_val


def solve_hill_climb(task: FuzzyTask, cfg: SolverConfig) -> Schedule:
    """Best single-step improvements from a greedy start and random restarts."""
    p = _GridProblem(task, cfg)
    rng = np.random.default_rng(cfg.seed)
    starts = [p.greedy()]
    for _ in range(cfg.restarts - 1):
        idx = p.random_feasible(rng)
        if idx is not None:
            starts.append(idx)

    best_idx, best_val = None, -1.0
    for idx in starts:
        idx, val = _climb(p, idx)
        if val > best_val:
            best_idx, best_val = idx, val
    return p.schedule(best_idx)


def _shift_move(p: _GridProblem, idx, rng, window):
    i = int(rng.integers(p.n))
    step = int(rng.integers(1, window + 1))
    if rng.random() < 0.5:
        step = -step
    cand = idx.copy()
    cand[i] = idx[i] + step
    return cand


def _swap_move(p: _GridProblem, idx, rng):
    """Exchange a skill with its successor in time, keeping the pair's end."""
    order = sorted(range(p.n), key=lambda i: (idx[i], i))
    r = int(rng.integers(p.n - 1))
    early, late = order[r], order[r + 1]
    cand = idx.copy()
    cand[late] = idx[early]
    cand[early] = max(
        idx[early] + int(p.gaps[late]),
        idx[late] + int(p.gaps[late]) - int(p.gaps[early]),
    )
    return cand


def solve_sim_anneal(
    task: FuzzyTask, cfg: SolverConfig, trace: list | None = None
) -> Schedule:
    """Simulated annealing from the greedy packing.

    Moves shift one skill by 1..``sa_step_window`` grid steps or, with
    probability ``sa_swap_prob``, exchange two skills adjacent in time (shifts
    alone cannot carry a skill past a longer neighbour). Overlapping or
    off-grid proposals are discarded. Worse states are accepted with probability
    exp(delta_log / T). When ``trace`` is given, the log objective of every
    accepted state is appended to it.
    """
    p = _GridProblem(task, cfg)
    rng = np.random.default_rng(cfg.seed)
    idx = p.greedy()
    cur = p.log_value(idx)
    best_idx, best = idx.copy(), cur
    if trace is not None:
        trace.append(cur)

    temp = cfg.sa_initial_temp
    while temp >= cfg.sa_min_temp:
        for _ in range(cfg.sa_iters_per_temp):
            if p.n > 1 and rng.random() < cfg.sa_swap_prob:
                cand = _swap_move(p, idx, rng)
            else:
                cand = _shift_move(p, idx, rng, cfg.sa_step_window)
            if min(cand) < 0 or max(cand) >= p.k or not p.feasible(cand):
                continue
            new = p.log_value(cand)
            delta = new - cur
            if delta >= 0 or rng.random() < math.exp(delta / temp):
                idx, cur = cand, new
                if trace is not None:
                    trace.append(cur)
                if cur > best:
                    best_idx, best = idx.copy(), cur
        temp *= cfg.sa_cooling
    return p.schedule(best_idx)


SOLVERS = {
    "exhaustive": solve_exhaustive,
    "hc": solve_hill_climb,
    "sa": solve_sim_anneal,
}


def to_specific(task: FuzzyTask, schedule: Schedule) -> list[SpecificSkill]:
    """Ground a feasible schedule into executable skills.

    Fuzzy parameters are copied into the specific parameters as they are
    and listed in ``unresolved``; specific parameters win on key clashes.
    """
    if not schedule.feasible:
        raise ValueError("cannot ground an infeasible schedule")
    starts = dict(schedule.starts)
    out = []
    for skill in task:
        params = {**skill.fuzzy_params, **skill.specific_params}
        unresolved = tuple(sorted(set(skill.fuzzy_params) - set(skill.specific_params)))
        out.append(SpecificSkill(skill.id, starts[skill.id], skill.duration, params, unresolved))
    return out
