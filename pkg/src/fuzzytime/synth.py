"""Synthetic drawn-satisfaction data shaped like the online study.

Each participant "draws" a noisy trapezoid for each of the 14 study
instructions on a 0-60 min canvas with 800 samples (one per 4.5 s).
Participants alternate between the robot and person actor groups; robot
drawings are 15 % wider around t_spec.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .model import SamplingGrid, Trapezoid, trapezoid_corners
from .nlparse import STUDY_INSTRUCTIONS, LookupConfig, extract_time_spec, lookup_satisfaction

STUDY_GRID = SamplingGrid.from_period(0.0, 3600.0, 4.5)
GROUPS = ("robot", "person")
WIDTH_MULTIPLIER = {"robot": 1.15, "person": 1.0}
CSV_HEADER = ("participant_id", "instruction_tag", "group", "time_s", "satisfaction")


@dataclass(frozen=True)
class SynthConfig:
    participants: int = 32
    seed: int = 0
    corner_jitter_frac: float = 0.10
    corner_jitter_floor: float = 15.0
    value_noise: float = 0.05
    grid: SamplingGrid = STUDY_GRID

    def __post_init__(self):
        if self.participants < 1:
            raise ValueError("need at least one participant")


def base_corners(text: str, lookup: LookupConfig | None = None) -> tuple[float, tuple[float, ...]]:
    spec = extract_time_spec(text)
    corners = trapezoid_corners(lookup_satisfaction(spec, lookup))
    return spec.t_spec, tuple(max(0.0, c) for c in corners)


def draw_noise(rng: np.random.Generator, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Standard-normal corner offsets and unit-uniform value noise."""
    return rng.standard_normal(4), rng.uniform(-1.0, 1.0, k)


def draw_curve(
    corners, t_spec: float, group: str, noise, cfg: SynthConfig
) -> np.ndarray:
    """One drawing: the widened base shape plus the given noise draws."""
    z, u = noise
    c = np.asarray(corners, dtype=float)
    c = t_spec + (c - t_spec) * WIDTH_MULTIPLIER[group]
    sigma = max(cfg.corner_jitter_floor, cfg.corner_jitter_frac * t_spec)
    c = np.sort(c + sigma * z)
    c = np.clip(c, cfg.grid.start, cfg.grid.end)
    times = cfg.grid.times()
    values = np.asarray(Trapezoid(*map(float, c))(times))
    noise = cfg.value_noise * u
    # the canvas starts at zero; participants only draw where they are satisfied
    values = np.where(values > 0, values + noise, 0.0)
    return np.clip(values, 0.0, 1.0)


def generate(cfg: SynthConfig, lookup: LookupConfig | None = None):
    """Yield (participant_id, tag, group, values) for every drawing.

    Consecutive robot/person participants form a matched pair that shares
    its noise draws, so the two groups differ only by the width multiplier.
    """
    rng = np.random.default_rng(cfg.seed)
    shapes = [(tag, *base_corners(text, lookup)) for tag, text in STUDY_INSTRUCTIONS]
    width = len(str(cfg.participants))
    noise = []
    for p in range(cfg.participants):
        pid = f"p{p + 1:0{width}d}"
        group = GROUPS[p % 2]
        if p % 2 == 0:
            noise = [draw_noise(rng, cfg.grid.k) for _ in shapes]
        for (tag, t_spec, corners), nz in zip(shapes, noise):
            yield pid, tag, group, draw_curve(corners, t_spec, group, nz, cfg)


def write_csv(cfg: SynthConfig, out, lookup: LookupConfig | None = None) -> int:
    """Write the long-form table to a text stream; returns the row count."""
    times = [f"{t:.3f}" for t in cfg.grid.times()]
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    rows = 0
    for pid, tag, group, values in generate(cfg, lookup):
        writer.writerows(
            (pid, tag, group, t, f"{v:.6f}") for t, v in zip(times, values.tolist())
        )
        rows += len(times)
    return rows


def to_csv_text(cfg: SynthConfig, lookup: LookupConfig | None = None) -> str:
    buf = io.StringIO()
    write_csv(cfg, buf, lookup)
    return buf.getvalue()
