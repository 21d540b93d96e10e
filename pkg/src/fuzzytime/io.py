"""File formats: task documents (JSON) and ensemble tables (long-form CSV)."""

from __future__ import annotations

import json
from dataclasses import fields, replace
from pathlib import Path

import numpy as np
import pandas as pd

from .aggregate import SatisfactionEnsemble
from .model import (
    Bell,
    FuzzySkill,
    FuzzyTask,
    SampledFunction,
    SamplingGrid,
    SatisfactionFunction,
    TransformedFunction,
    Trapezoid,
)
from .nlparse import LookupConfig, extract_time_spec, lookup_satisfaction
from .sched import SolverConfig
from .synth import CSV_HEADER


class ValidationError(ValueError):
    """Malformed input file."""


class NotFound(LookupError):
    """A requested tag or group has no rows."""


def function_to_dict(fn: SatisfactionFunction) -> dict:
    if isinstance(fn, Trapezoid):
        return {"type": "trapezoid", "a": fn.a, "b": fn.b, "c": fn.c, "d": fn.d}
    if isinstance(fn, Bell):
        return {"type": "bell", "mu": fn.mu, "sigma": fn.sigma}
    if isinstance(fn, SampledFunction):
        g = fn.grid
        return {
            "type": "sampled",
            "start": g.start,
            "end": g.end,
            "rate": g.rate,
            "values": fn.values.tolist(),
        }
    if isinstance(fn, TransformedFunction):
        return {
            "type": "transformed",
            "inner": function_to_dict(fn.inner),
            "m_p": fn.scale,
            "m_n": fn.shift,
            "pivot": fn.pivot,
        }
    raise TypeError(f"cannot serialise {type(fn).__name__}")


def function_from_dict(spec: dict) -> SatisfactionFunction:
    try:
        kind = spec["type"]
        if kind == "trapezoid":
            return Trapezoid(*(float(spec[k]) for k in "abcd"))
        if kind == "bell":
            return Bell(float(spec["mu"]), float(spec["sigma"]))
        if kind == "sampled":
            grid = SamplingGrid(float(spec["start"]), float(spec["end"]), float(spec["rate"]))
            return SampledFunction(grid, np.asarray(spec["values"], dtype=float))
        if kind == "transformed":
            return TransformedFunction(
                function_from_dict(spec["inner"]),
                float(spec["m_p"]),
                float(spec.get("m_n", 0.0)),
                float(spec.get("pivot", 0.0)),
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"bad satisfaction spec {spec!r}: {exc}") from exc
    raise ValidationError(f"unknown satisfaction type {kind!r}")


_SOLVER_KEYS = {f.name for f in fields(SolverConfig)} - {"grid"}


def solver_config_from_dict(data: dict, base: SolverConfig | None = None) -> SolverConfig:
    base = base or SolverConfig()
    unknown = set(data) - _SOLVER_KEYS - {"grid", "solver"}
    if unknown:
        raise ValidationError(f"unknown solver keys: {', '.join(sorted(unknown))}")
    updates = {k: v for k, v in data.items() if k in _SOLVER_KEYS}
    if "grid" in data:
        g = data["grid"]
        updates["grid"] = SamplingGrid(
            float(g.get("start", base.grid.start)),
            float(g.get("end", base.grid.end)),
            float(g.get("rate", base.grid.rate)),
        )
    try:
        return replace(base, **updates)
    except (TypeError, ValueError) as exc:
        raise ValidationError(str(exc)) from exc


def task_from_document(doc: dict, lookup: LookupConfig | None = None) -> tuple[FuzzyTask, dict]:
    """Skills of a task document plus its raw ``solver`` block.

    Skills without an explicit satisfaction function are parsed from their
    instruction text. Parser errors propagate unchanged.
    """
    if not isinstance(doc, dict) or not isinstance(doc.get("skills"), list):
        raise ValidationError("task document needs a 'skills' list")
    skills = []
    for rec in doc["skills"]:
        if "id" not in rec or "duration_s" not in rec:
            raise ValidationError(f"skill record needs 'id' and 'duration_s': {rec!r}")
        if "satisfaction" in rec:
            psi = function_from_dict(rec["satisfaction"])
        elif "instruction" in rec:
            psi = lookup_satisfaction(extract_time_spec(rec["instruction"]), lookup)
        else:
            raise ValidationError(f"skill {rec['id']!r} has neither instruction nor satisfaction")
        try:
            skills.append(
                FuzzySkill(
                    str(rec["id"]),
                    psi,
                    float(rec["duration_s"]),
                    dict(rec.get("fuzzy_params", {})),
                    dict(rec.get("params", {})),
                )
            )
        except ValueError as exc:
            raise ValidationError(str(exc)) from exc
    try:
        task = FuzzyTask(tuple(skills))
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    solver = doc.get("solver", {})
    if not isinstance(solver, dict):
        raise ValidationError("'solver' must be an object")
    return task, solver


def read_task_document(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc


def read_ensemble_table(path) -> pd.DataFrame:
    df = pd.read_csv(path, dtype={"participant_id": str, "instruction_tag": str, "group": str})
    if tuple(df.columns) != CSV_HEADER:
        raise ValidationError(f"expected header {','.join(CSV_HEADER)}, got {','.join(df.columns)}")
    sat = df["satisfaction"].to_numpy(dtype=float)
    if np.any(~np.isfinite(sat)) or sat.min() < 0 or sat.max() > 1:
        raise ValidationError("satisfaction values must lie in [0, 1]")
    bad_groups = set(df["group"]) - {"robot", "person"}
    if bad_groups:
        raise ValidationError(f"unknown groups: {', '.join(sorted(bad_groups))}")
    return df


def infer_grid(times: np.ndarray) -> SamplingGrid:
    """Grid whose step times are exactly ``times`` (uniform spacing)."""
    if times.shape[0] < 2:
        raise ValidationError("need at least two time steps to infer a grid")
    step = (times[-1] - times[0]) / (times.shape[0] - 1)
    grid = SamplingGrid(float(times[0]), float(times[0] + step * times.shape[0]), 1.0 / step)
    if grid.k != times.shape[0] or not np.allclose(grid.times(), times, rtol=0, atol=1e-6):
        raise ValidationError("time column is not a uniform grid")
    return grid


def ensemble_from_table(
    df: pd.DataFrame, tag: str, group: str | None = None
) -> SatisfactionEnsemble:
    rows = df[df["instruction_tag"] == tag]
    if group is not None:
        rows = rows[rows["group"] == group]
    if rows.empty:
        where = f"tag {tag!r}" + (f" and group {group!r}" if group else "")
        raise NotFound(f"no rows for {where}")

    grid = None
    matrix = []
    for pid, part in rows.groupby("participant_id", sort=True):
        times = part["time_s"].to_numpy(dtype=float)
        if np.any(np.diff(times) <= 0):
            part = part.sort_values("time_s")
            times = part["time_s"].to_numpy(dtype=float)
        if grid is None:
            grid = infer_grid(times)
        elif times.shape[0] != grid.k or not np.allclose(times, grid.times(), rtol=0, atol=1e-6):
            raise ValidationError(f"participant {pid} uses a different time grid")
        matrix.append(part["satisfaction"].to_numpy(dtype=float))
    return SatisfactionEnsemble.from_matrix(grid, np.vstack(matrix), tag)


def tags_in_table(df: pd.DataFrame) -> list[str]:
    return list(dict.fromkeys(df["instruction_tag"]))
