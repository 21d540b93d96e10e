"""Acceptance gate: one test per criterion, each at its fixed tolerance.

Run with ``pytest tests/test_acceptance.py``; the terminal summary ends with
one PASS/FAIL line per criterion. Each test also prints its measurements
(visible with ``-s``).
"""

import json
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from fuzzytime.aggregate import (
    SatisfactionEnsemble,
    density_variance,
    mann_whitney_u,
    pointwise_mean,
    pointwise_median,
    pointwise_quantile,
)
from fuzzytime.fit import fit_bell, fit_trapezoid
from fuzzytime.io import ensemble_from_table, read_ensemble_table
from fuzzytime.model import (
    Bell,
    FuzzySkill,
    FuzzyTask,
    SampledFunction,
    SamplingGrid,
    Trapezoid,
    to_sampled,
    trapezoid_corners,
)
from fuzzytime.nlparse import STUDY_INSTRUCTIONS, extract_time_spec, lookup_satisfaction
from fuzzytime.sched import SolverConfig, solve_exhaustive, solve_hill_climb, solve_sim_anneal

from oracles import (
    brute_force_schedule,
    exact_permutation_p,
    naive_mean,
    naive_quantile,
    pairwise_u,
    random_task,
)

DATA = Path(__file__).parent / "data"
STUDY = SamplingGrid.from_period(0, 3600, 4.5)


def report(line):
    print(f"  {line}")


@pytest.mark.acceptance(1, "solver oracle equivalence (exhaustive exact, HC >=0.95x in >=90, SA >=0.99x in >=95, <60 s)")
def test_solver_oracle_equivalence():
    rng = np.random.default_rng(0)
    t0 = time.perf_counter()
    exact = hc_ok = sa_ok = 0
    for trial in range(100):
        task, grid = random_task(rng)
        assert len(task) <= 3 and grid.k <= 30
        cfg = SolverConfig(grid=grid, seed=trial, restarts=20)
        ex = solve_exhaustive(task, cfg)
        best, starts = brute_force_schedule(
            [s.psi.corners for s in task], task.durations.tolist(), grid.times().tolist(), cfg.epsilon
        )
        exact += ex.objective == best and [t for _, t in ex.starts] == starts
        hc_ok += solve_hill_climb(task, cfg).objective >= 0.95 * ex.objective
        sa_ok += solve_sim_anneal(task, cfg).objective >= 0.99 * ex.objective
    elapsed = time.perf_counter() - t0
    report(f"exhaustive == brute force: {exact}/100, HC: {hc_ok}/100, SA: {sa_ok}/100, {elapsed:.1f} s")
    assert exact == 100
    assert hc_ok >= 90
    assert sa_ok >= 95
    assert elapsed < 60


def _overlap_free(starts, durations):
    # every pair, independent of any ordering
    n = len(starts)
    return all(
        starts[i] + durations[i] <= starts[j] + 1e-9 or starts[j] + durations[j] <= starts[i] + 1e-9
        for i in range(n)
        for j in range(i + 1, n)
    )


def _fuzz_task(rng):
    n = int(rng.integers(1, 5))
    k = int(rng.integers(6, 25))
    step = float(rng.choice([1.0, 4.5, 10.0, 60.0]))
    span = step * k
    skills = []
    for i in range(n):
        shape = np.sort(rng.uniform(0, span, 4))
        psi = Trapezoid(*map(float, shape)) if rng.random() < 0.7 else Bell(
            float(rng.uniform(0, span)), float(rng.uniform(step, span))
        )
        # durations off the grid spacing on purpose
        d = float(rng.uniform(0.2, 1.0) * span / (n + 1))
        skills.append(FuzzySkill(f"k{i}", psi, d))
    return FuzzyTask(tuple(skills)), SamplingGrid(0.0, span, 1 / step)


@pytest.mark.acceptance(2, "no-overlap invariant on 10^4 solver outputs (<10 s)")
def test_no_overlap_fuzz():
    rng = np.random.default_rng(1)
    solvers = (solve_exhaustive, solve_hill_climb, solve_sim_anneal)
    t0 = time.perf_counter()
    outputs = violations = 0
    while outputs < 10_000:
        task, grid = _fuzz_task(rng)
        cfg = SolverConfig(
            grid=grid, seed=outputs, restarts=2, sa_iters_per_temp=2, sa_cooling=0.5, sa_min_temp=0.01
        )
        solve = solvers[outputs % 3]
        if solve is solve_exhaustive and grid.k ** len(task) > 20_000:
            solve = solve_hill_climb
        s = solve(task, cfg)
        starts = [t for _, t in s.starts]
        violations += not (s.feasible and _overlap_free(starts, task.durations.tolist()))
        outputs += 1
    elapsed = time.perf_counter() - t0
    report(f"{outputs} outputs, {violations} violations, {elapsed:.1f} s")
    assert violations == 0
    assert elapsed < 10


def _random_trapezoid(rng):
    a = rng.uniform(100, 2200)
    rise, plateau, fall = rng.uniform(30, 400), rng.uniform(0, 600), rng.uniform(30, 400)
    return Trapezoid(a, a + rise, a + rise + plateau, a + rise + plateau + fall)


def _random_bell(rng):
    return Bell(rng.uniform(600, 3000), rng.uniform(60, 400))


def _noisy(fn, rng):
    v = np.asarray(fn(STUDY.times())) + rng.uniform(-0.05, 0.05, STUDY.k)
    return SampledFunction(STUDY, np.clip(v, 0, 1))


@pytest.mark.acceptance(3, "fit recovery (1 grid step / 1 %, RMSE <=1e-4; noisy RMSE <=0.06; cross-model ordering)")
def test_fit_recovery():
    rng = np.random.default_rng(3)
    worst_exact = worst_noisy = 0.0
    ordering_failures = 0
    for _ in range(10):
        trap = _random_trapezoid(rng)
        target = to_sampled(trap, STUDY)
        tf, bf = fit_trapezoid(target), fit_bell(target)
        assert max(abs(np.subtract(tf.function.corners, trap.corners))) <= STUDY.step
        worst_exact = max(worst_exact, tf.error)
        ordering_failures += not tf.error < bf.error

        bell = _random_bell(rng)
        target = to_sampled(bell, STUDY)
        tf, bf = fit_trapezoid(target), fit_bell(target)
        assert abs(bf.params["mu"] - bell.mu) <= 0.01 * bell.mu
        assert abs(bf.params["sigma"] - bell.sigma) <= 0.01 * bell.sigma
        worst_exact = max(worst_exact, bf.error)
        ordering_failures += not bf.error < tf.error

        noisy_trap = _noisy(trap, rng)
        tf, bf = fit_trapezoid(noisy_trap), fit_bell(noisy_trap)
        worst_noisy = max(worst_noisy, tf.error)
        ordering_failures += not tf.error < bf.error

        noisy_bell = _noisy(bell, rng)
        tf, bf = fit_trapezoid(noisy_bell), fit_bell(noisy_bell)
        worst_noisy = max(worst_noisy, bf.error)
        ordering_failures += not bf.error < tf.error
    report(f"worst noiseless RMSE {worst_exact:.2e}, worst noisy RMSE {worst_noisy:.4f}, "
           f"ordering failures {ordering_failures}/40")
    assert worst_exact <= 1e-4
    assert worst_noisy <= 0.06
    assert ordering_failures == 0


@pytest.mark.acceptance(4, "point-wise mean/median/quantiles equal a naive per-step loop on 100 ensembles")
def test_aggregates_match_naive_reference():
    rng = np.random.default_rng(4)
    mismatches = 0
    for trial in range(100):
        members = int(rng.integers(1, 41))
        k = int(rng.integers(1, 200))
        grid = SamplingGrid(0.0, float(k), 1.0)
        matrix = rng.uniform(0, 1, (members, k))
        if trial % 2:
            matrix = np.round(matrix * 20) / 20  # plenty of ties
        e = SatisfactionEnsemble.from_matrix(grid, matrix)
        rows = matrix.tolist()
        q = float(rng.uniform(0.01, 0.99))
        mismatches += pointwise_mean(e).values.tolist() != naive_mean(rows)
        mismatches += pointwise_median(e).values.tolist() != naive_quantile(rows, 0.5)
        for level in (0.25, 0.75, q):
            mismatches += pointwise_quantile(e, level).values.tolist() != naive_quantile(rows, level)
    report(f"{mismatches} mismatching statistics over 100 ensembles")
    assert mismatches == 0


@pytest.mark.acceptance(5, "all 14 study instructions parse to the golden TimeSpec")
def test_study_instructions_golden():
    golden = json.loads((DATA / "study_instructions.json").read_text())
    assert len(golden) == 14
    assert [(g["tag"], g["text"]) for g in golden] == list(STUDY_INSTRUCTIONS)
    wrong = []
    for g in golden:
        spec = extract_time_spec(g["text"])
        corners = trapezoid_corners(lookup_satisfaction(spec))
        if (
            spec.preposition.value != g["preposition"]
            or spec.fuzzy is not g["fuzzy"]
            or spec.t_spec != g["t_spec"]
            or not np.allclose(corners, g["corners"], rtol=0, atol=1e-9)
        ):
            wrong.append(g["tag"])
    report(f"{14 - len(wrong)}/14 match the golden file {wrong or ''}")
    assert not wrong


@pytest.fixture(scope="module")
def synth_table(tmp_path_factory):
    from fuzzytime.cli import main

    path = tmp_path_factory.mktemp("accept") / "study.csv"
    assert main(["synth", "--participants", "32", "--seed", "0", "--out", str(path)]) == 0
    return read_ensemble_table(path)


@pytest.mark.acceptance(6, "variance grows with t_spec for In-tags; robot > person in >=12/14 tags (N=32)")
def test_trend_reproduction(synth_table, capsys):
    in_tags = ["in_now", "in_1min", "in_10min", "in_30min"]
    variances = [density_variance(pointwise_median(ensemble_from_table(synth_table, t))) for t in in_tags]
    wider = 0
    for tag, _ in STUDY_INSTRUCTIONS:
        robot = density_variance(pointwise_median(ensemble_from_table(synth_table, tag, "robot")))
        person = density_variance(pointwise_median(ensemble_from_table(synth_table, tag, "person")))
        wider += robot > person
    report("median variance over t_spec 0/60/600/1800 s: " + ", ".join(f"{v:.0f}" for v in variances))
    report(f"robot variance larger in {wider}/14 tags")
    assert all(b > a for a, b in zip(variances, variances[1:]))
    assert wider >= 12


@pytest.mark.acceptance(7, "Mann-Whitney U agrees with the exact permutation oracle for |a|+|b| <= 12 (p to 1e-12)")
def test_mann_whitney_exact_oracle():
    rng = np.random.default_rng(7)
    worst = 0.0
    checked = 0
    for na in range(1, 12):
        for nb in range(1, 13 - na):
            for _ in range(3):
                # small ordinal scale so ties are common
                a = rng.integers(1, 6, na).tolist()
                b = rng.integers(1, 6, nb).tolist()
                u, p = mann_whitney_u(a, b)
                assert u == pairwise_u(a, b)
                worst = max(worst, abs(p - float(exact_permutation_p(a, b))))
                checked += 1
    report(f"{checked} sample pairs, worst |p - exact| = {worst:.1e}")
    assert worst <= 1e-12


def _run_cli(args, env_threads, cwd):
    env = dict(os.environ, OMP_NUM_THREADS=str(env_threads), OPENBLAS_NUM_THREADS=str(env_threads),
               MKL_NUM_THREADS=str(env_threads), PYTHONHASHSEED=str(env_threads))
    proc = subprocess.run(
        [sys.executable, "-m", "fuzzytime.cli", *args], cwd=cwd, env=env,
        capture_output=True, check=True,
    )
    return proc.stdout


def _snapshot(root):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.mark.acceptance(8, "byte-identical output across runs and thread counts")
def test_determinism(tmp_path):
    task = {
        "skills": [
            {"id": "boil", "instruction": "Boil water in 10 minutes", "duration_s": 300},
            {"id": "wipe", "instruction": "Wipe the table before the next 30 minutes", "duration_s": 600},
            {"id": "pan", "instruction": "Place the pan on the stove in about four minutes", "duration_s": 120},
        ]
    }
    results = []
    for run, threads in ((0, 1), (1, 4), (2, 4)):
        work = tmp_path / f"run{run}"
        work.mkdir()
        (work / "task.json").write_text(json.dumps(task))
        outs = []
        outs.append(_run_cli(["synth", "--participants", "8", "--seed", "5", "--out", "s.csv"], threads, work))
        outs.append(_run_cli(["parse", "in approximately 10 minutes"], threads, work))
        for solver in ("exhaustive", "hc", "sa"):
            outs.append(_run_cli(["schedule", "task.json", "--solver", solver, "--seed", "3",
                                  "--rate", str(1 / 30), "--threads", str(threads)], threads, work))
        outs.append(_run_cli(["aggregate", "s.csv", "--instruction", "in_10min", "--group", "compare",
                              "--svg", "cmp.svg"], threads, work))
        outs.append(_run_cli(["fit", "s.csv", "--instruction", "after_10min", "--seed", "2",
                              "--plot", "fit.svg"], threads, work))
        outs.append(_run_cli(["report", "s.csv", "--out-dir", "rep"], threads, work))
        files = _snapshot(work)
        results.append((outs, files))
    same_runs = results[1] == results[2]
    same_threads = results[0] == results[1]
    report(f"{len(results[0][0])} commands, {len(results[0][1])} files; "
           f"repeat identical: {same_runs}, 1 vs 4 threads identical: {same_threads}")
    assert same_runs
    assert same_threads
