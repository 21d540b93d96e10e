"""Command-line interface.

Every command writes JSON to stdout and diagnostics to stderr. Exit codes:
0 ok, 1 invalid input, 2 nothing found, 3 infeasible task, 4 search space
too large.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import aggregate, fit, io, plotting, sched
from .model import SamplingGrid, trapezoid_corners
from .nlparse import (
    STUDY_INSTRUCTIONS,
    AmbiguousTime,
    LookupConfig,
    NoTemporalModifier,
    Preposition,
    extract_time_spec,
    lookup_satisfaction,
)
from .synth import SynthConfig, write_csv

EXIT_OK, EXIT_INVALID, EXIT_NOT_FOUND, EXIT_INFEASIBLE, EXIT_CAPACITY = range(5)


class CommandError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=2, sort_keys=False) + "\n")


def _lookup(path) -> LookupConfig:
    try:
        return LookupConfig.from_file(path) if path else LookupConfig.from_env()
    except (OSError, ValueError, TypeError) as exc:
        raise CommandError(f"bad lookup config: {exc}", EXIT_INVALID) from exc


def cmd_parse(args) -> dict:
    cfg = _lookup(args.config)
    spec = extract_time_spec(args.text)
    fn = lookup_satisfaction(spec, cfg)
    corners = trapezoid_corners(fn)
    return {
        "preposition": spec.preposition.value,
        "fuzzy": spec.fuzzy,
        "t_spec": spec.t_spec,
        "tokens": list(spec.raw_tokens),
        "satisfaction": io.function_to_dict(fn),
        "corners": list(corners) if corners else None,
    }


def cmd_schedule(args) -> dict:
    doc = io.read_task_document(args.task)
    task, solver_block = io.task_from_document(doc, _lookup(args.config))
    cfg = io.solver_config_from_dict(solver_block)
    grid = cfg.grid
    grid = SamplingGrid(
        grid.start if args.grid_start is None else args.grid_start,
        grid.end if args.grid_end is None else args.grid_end,
        grid.rate if args.rate is None else args.rate,
    )
    overrides = {"grid": grid}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.threads is not None:
        overrides["workers"] = args.threads
    cfg = replace(cfg, **overrides)
    solver = args.solver or solver_block.get("solver", "exhaustive")
    if solver not in sched.SOLVERS:
        raise CommandError(f"unknown solver {solver!r}", EXIT_INVALID)
    result = sched.SOLVERS[solver](task, cfg)
    out = result.to_dict()
    out["solver"] = solver
    out["seed"] = cfg.seed
    return out


def _table(path):
    try:
        return io.read_ensemble_table(path)
    except FileNotFoundError as exc:
        raise CommandError(f"no such file: {path}", EXIT_NOT_FOUND) from exc


def _series(summary: aggregate.EnsembleSummary) -> dict:
    return {
        "mean": summary.mean.values.tolist(),
        "median": summary.median.values.tolist(),
        "mode": summary.mode.values.tolist(),
        "q25": summary.quantiles[0.25].values.tolist(),
        "q75": summary.quantiles[0.75].values.tolist(),
        "min": summary.minimum.values.tolist(),
        "max": summary.maximum.values.tolist(),
    }


def _summary_dict(summary: aggregate.EnsembleSummary, group: str) -> dict:
    grid = summary.median.grid
    return {
        "instruction": summary.tag,
        "group": group,
        "members": summary.members,
        "grid": {"start": grid.start, "end": grid.end, "rate": grid.rate, "k": grid.k},
        "median_density_variance": _variance_or_none(summary.median),
        "mode_ties": summary.mode_ties,
        "series": _series(summary),
    }


def _variance_or_none(fn):
    try:
        return aggregate.density_variance(fn)
    except aggregate.ZeroMass:
        return None


def _summarize(df, tag, group):
    return aggregate.summarize(io.ensemble_from_table(df, tag, None if group == "all" else group))


def cmd_aggregate(args) -> dict:
    df = _table(args.csv)
    if args.group == "compare":
        robot = _summarize(df, args.instruction, "robot")
        person = _summarize(df, args.instruction, "person")
        rv, pv = _variance_or_none(robot.median), _variance_or_none(person.median)
        if args.svg:
            plotting.comparison_figure(robot, person, args.svg)
        return {
            "instruction": args.instruction,
            "robot": _summary_dict(robot, "robot"),
            "person": _summary_dict(person, "person"),
            # negative values mean the robot group varies more
            "variance_difference": None if rv is None or pv is None else pv - rv,
        }
    summary = _summarize(df, args.instruction, args.group)
    if args.svg:
        plotting.distribution_figure(summary, args.svg)
    return _summary_dict(summary, args.group)


TARGETS = {
    "median": lambda s: s.median,
    "mean": lambda s: s.mean,
    "mode": lambda s: s.mode,
}


def _run_fit(target, model: str, seed: int) -> fit.FitResult:
    if model == "best":
        return fit.best_fit(target, seed)
    return fit.FITTERS[model](target, seed)


def cmd_fit(args) -> dict:
    df = _table(args.csv)
    group = None if args.group == "all" else args.group
    summary = aggregate.summarize(io.ensemble_from_table(df, args.instruction, group))
    target = TARGETS[args.target](summary)
    result = _run_fit(target, args.model, args.seed)
    if args.plot:
        plotting.distribution_figure(summary, args.plot, fit=result.function)
    out = {"instruction": args.instruction, "group": args.group, "target": args.target}
    out.update(result.to_dict())
    return out


def cmd_synth(args) -> dict:
    cfg = SynthConfig(participants=args.participants, seed=args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        rows = write_csv(cfg, fh, _lookup(args.config))
    return {
        "out": str(out),
        "participants": cfg.participants,
        "seed": cfg.seed,
        "instructions": len(STUDY_INSTRUCTIONS),
        "samples_per_instruction": cfg.grid.k,
        "rows": rows,
    }


def _participant_variances(df, tag, group):
    ens = io.ensemble_from_table(df, tag, group)
    out = []
    for m in ens.members:
        v = _variance_or_none(m)
        if v is not None:
            out.append(v)
    return out


REPORT_COLUMNS = (
    "instruction_tag",
    "preposition",
    "fuzzy",
    "t_spec",
    "members",
    "median_variance",
    "robot_variance",
    "person_variance",
    "variance_difference",
    "mwu_u",
    "mwu_p",
    "trapezoid_rmse",
    "bell_rmse",
    "best_model",
)


def cmd_report(args) -> dict:
    """Per-instruction summary table plus one figure per instruction."""
    df = _table(args.csv)
    out_dir = Path(args.out_dir)
    fig_dir = out_dir / "figures"
    fig_dir.mkdir(parents=True, exist_ok=True)
    texts = dict(STUDY_INSTRUCTIONS)
    rows = []
    for tag in io.tags_in_table(df):
        summary = _summarize(df, tag, "all")
        groups = set(df.loc[df["instruction_tag"] == tag, "group"])
        rv = pv = diff = u = p = None
        if groups == {"robot", "person"}:
            rv = _variance_or_none(_summarize(df, tag, "robot").median)
            pv = _variance_or_none(_summarize(df, tag, "person").median)
            if rv is not None and pv is not None:
                diff = pv - rv
            a = _participant_variances(df, tag, "robot")
            b = _participant_variances(df, tag, "person")
            if a and b:
                u, p = aggregate.mann_whitney_u(a, b)
        trap = bell = None
        best = ""
        fitted = None
        try:
            trap = fit.fit_trapezoid(summary.median, args.seed)
            bell = fit.fit_bell(summary.median, args.seed)
            fitted = bell if bell.error < trap.error else trap
            best = fitted.model
        except fit.AllZeroTarget:
            pass
        spec = None
        if tag in texts:
            spec = extract_time_spec(texts[tag])
        plotting.distribution_figure(
            summary, fig_dir / f"{tag}.svg", fit=fitted.function if fitted else None
        )
        rows.append(
            {
                "instruction_tag": tag,
                "preposition": spec.preposition.value if spec else "",
                "fuzzy": spec.fuzzy if spec else "",
                "t_spec": spec.t_spec if spec else "",
                "members": summary.members,
                "median_variance": _variance_or_none(summary.median),
                "robot_variance": rv,
                "person_variance": pv,
                "variance_difference": diff,
                "mwu_u": u,
                "mwu_p": p,
                "trapezoid_rmse": trap.error if trap else None,
                "bell_rmse": bell.error if bell else None,
                "best_model": best,
            }
        )

    trend = [r for r in rows if r["preposition"] == Preposition.IN.value and r["fuzzy"] is False]
    trend.sort(key=lambda r: r["t_spec"])
    figures = sorted(str(p.relative_to(out_dir)) for p in fig_dir.glob("*.svg"))
    if len(trend) >= 2:
        series = {"all": [r["median_variance"] for r in trend]}
        if all(r["robot_variance"] is not None for r in trend):
            series["robot"] = [r["robot_variance"] for r in trend]
            series["person"] = [r["person_variance"] for r in trend]
        plotting.variance_trend_figure([r["t_spec"] for r in trend], series,
                                       out_dir / "variance_trend.svg")
        figures.append("variance_trend.svg")

    summary_path = out_dir / "summary.csv"
    with summary_path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: "" if v is None else _fmt(v) for k, v in r.items()})
    return {"summary": str(summary_path), "figures": figures, "instructions": len(rows)}


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fuzzytime", description="Fuzzy start times for robot instructions."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="extract the temporal clause of an instruction")
    p.add_argument("text")
    p.add_argument("--config", help="lookup constants JSON (default: $FS_CONFIG)")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("schedule", help="choose start times for a task document")
    p.add_argument("task", help="task document JSON")
    p.add_argument("--solver", choices=sorted(sched.SOLVERS))
    p.add_argument("--seed", type=int)
    p.add_argument("--grid-start", type=float)
    p.add_argument("--grid-end", type=float)
    p.add_argument("--rate", type=float, help="grid samples per second")
    p.add_argument("--threads", type=int, help="worker threads for exhaustive search")
    p.add_argument("--config", help="lookup constants JSON (default: $FS_CONFIG)")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("aggregate", help="point-wise statistics of one instruction")
    p.add_argument("csv")
    p.add_argument("--instruction", required=True)
    p.add_argument("--group", choices=("all", "robot", "person", "compare"), default="all")
    p.add_argument("--svg", help="write the distribution figure here")
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("fit", help="fit a trapezoid or bell to an aggregate")
    p.add_argument("csv")
    p.add_argument("--instruction", required=True)
    p.add_argument("--group", choices=("all", "robot", "person"), default="all")
    p.add_argument("--target", choices=sorted(TARGETS), default="median")
    p.add_argument("--model", choices=("trapezoid", "bell", "best"), default="best")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--plot", help="write the distribution figure with the fit overlaid")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("synth", help="generate a synthetic study table")
    p.add_argument("--participants", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="lookup constants JSON (default: $FS_CONFIG)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="summary table and figures for every instruction")
    p.add_argument("csv")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _emit(args.func(args))
        return EXIT_OK
    except CommandError as exc:
        code, msg = exc.code, str(exc)
    except (NoTemporalModifier, io.NotFound) as exc:
        code, msg = EXIT_NOT_FOUND, str(exc)
    except sched.NoFeasibleSchedule as exc:
        code, msg = EXIT_INFEASIBLE, str(exc)
    except sched.SearchSpaceTooLarge as exc:
        code, msg = EXIT_CAPACITY, str(exc)
    except FileNotFoundError as exc:
        code, msg = EXIT_NOT_FOUND, str(exc)
    except (AmbiguousTime, io.ValidationError, ValueError, KeyError, TypeError, OSError) as exc:
        code, msg = EXIT_INVALID, str(exc)
    print(f"fuzzytime {args.command}: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
