"""Temporal modifiers in instructions and the satisfaction functions they imply.

The parser recognises one temporal clause of the form::

    [<fuzz>] [in | after | before] [<fuzz>] [the next] [<fuzz>]
        (now | soon | <number> <second|minute|hour>[s])

where <fuzz> is one of about, approximately, roughly or around. A bare unit
is allowed after "the next" ("before the next minute").

Numbers are digits or English words from zero to sixty. Each clause becomes
a :class:`TimeSpec`, which :func:`lookup_satisfaction` turns into a
trapezoid (a base shape per preposition, adapted for fuzziness).
"""

from __future__ import annotations

import enum
import json
import os
import re
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .model import SatisfactionFunction, Trapezoid, transform


class NoTemporalModifier(ValueError):
    pass


class AmbiguousTime(ValueError):
    pass


class Preposition(str, enum.Enum):
    IN = "in"
    BEFORE = "before"
    AFTER = "after"


_UNITS = {"second": 1.0, "minute": 60.0, "hour": 3600.0}

_ONES = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
    "ten", "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen",
    "seventeen", "eighteen", "nineteen",
]
_TENS = {"twenty": 20, "thirty": 30, "forty": 40, "fifty": 50, "sixty": 60}


def _number_words() -> dict[str, int]:
    words = {w: i for i, w in enumerate(_ONES)}
    words.update({"a": 1, "an": 1})
    for tens, value in _TENS.items():
        words[tens] = value
        if value < 60:
            for i in range(1, 10):
                words[f"{tens}-{_ONES[i]}"] = value + i
                words[f"{tens} {_ONES[i]}"] = value + i
    return words


NUMBER_WORDS = _number_words()

_FUZZ = r"about|approximately|roughly|around"
# longest alternatives first so "twenty five" wins over "twenty"
_NUM = "|".join(re.escape(w) for w in sorted(NUMBER_WORDS, key=len, reverse=True))
_CLAUSE = re.compile(
    rf"""
    (?:\b(?P<fuzz0>{_FUZZ})\s+(?=(?:in|after|before)\b))?
    (?:\b(?P<prep>in|after|before)\s+)?
    (?:\b(?P<fuzz>{_FUZZ})\s+)?
    (?P<next>\bthe\s+next\s+)?
    (?:\b(?P<fuzz2>{_FUZZ})\s+)?
    (?:
        \b(?P<now>now|soon)\b
      | \b(?P<num>\d+(?:\.\d+)?|{_NUM})\s+(?P<unit>second|minute|hour)s?\b
      | (?(next)\b(?P<bare_unit>second|minute|hour)\b|(?!))
    )
    """,
    re.IGNORECASE | re.VERBOSE,
)


@dataclass(frozen=True)
class TimeSpec:
    preposition: Preposition
    fuzzy: bool
    t_spec: float
    raw_tokens: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.t_spec >= 0:
            raise ValueError(f"t_spec must be >= 0, got {self.t_spec}")


@dataclass(frozen=True)
class LookupConfig:
    """Shape constants for the base trapezoids (seconds where applicable)."""

    plateau_frac: float = 0.10
    shoulder_frac: float = 0.15
    min_plateau: float = 15.0
    min_shoulder: float = 30.0
    fuzzy_widen: float = 0.5
    after_left_slope_window: float = 12.0
    after_plateau_frac: float = 0.25
    horizon: float = 3600.0

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) >= 0:
                raise ValueError(f"{f.name} must be non-negative")
        if not 0 < self.fuzzy_widen < 1:
            raise ValueError("fuzzy_widen must lie in (0, 1)")
        if not self.after_left_slope_window > 0:
            raise ValueError("after_left_slope_window must be positive")

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> "LookupConfig":
        data = json.loads(Path(path).read_text())
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown lookup config keys: {', '.join(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})

    @classmethod
    def from_env(cls, var: str = "FS_CONFIG") -> "LookupConfig":
        path = os.environ.get(var)
        return cls.from_file(path) if path else cls()

    def to_dict(self) -> dict:
        return asdict(self)


def _parse_number(text: str) -> float:
    text = re.sub(r"\s+", " ", text.lower())
    if text in NUMBER_WORDS:
        return float(NUMBER_WORDS[text])
    return float(text)


def extract_time_spec(instruction: str) -> TimeSpec:
    """Find the temporal clause of a single-sentence instruction.

    Raises NoTemporalModifier when there is none and AmbiguousTime when
    there are several; the caller decides how to resolve the latter.
    """
    matches = list(_CLAUSE.finditer(instruction))
    if not matches:
        raise NoTemporalModifier(f"no temporal modifier in {instruction!r}")
    if len(matches) > 1:
        found = ", ".join(repr(m.group(0).strip()) for m in matches)
        raise AmbiguousTime(f"several temporal clauses in {instruction!r}: {found}")

    m = matches[0]
    tokens = tuple(m.group(0).split())
    fuzzy = bool(m.group("fuzz0") or m.group("fuzz") or m.group("fuzz2"))
    prep = Preposition((m.group("prep") or "in").lower())

    if m.group("now"):
        word = m.group("now").lower()
        # "soon" is read as "approximately now"
        return TimeSpec(Preposition.IN, fuzzy or word == "soon", 0.0, tokens)

    if m.group("bare_unit"):
        # "before the next minute"
        seconds = _UNITS[m.group("bare_unit").lower()]
    else:
        seconds = _parse_number(m.group("num")) * _UNITS[m.group("unit").lower()]
    return TimeSpec(prep, fuzzy, seconds, tokens)


def lookup_satisfaction(
    spec: TimeSpec, cfg: LookupConfig | None = None
) -> SatisfactionFunction:
    """Base trapezoid for the preposition, adapted for fuzziness."""
    cfg = cfg or LookupConfig()
    t = spec.t_spec
    if t > cfg.horizon:
        raise ValueError(f"t_spec {t} s lies beyond the horizon {cfg.horizon} s")
    shoulder = max(cfg.min_shoulder, cfg.shoulder_frac * t)

    if spec.preposition is Preposition.IN:
        plateau = max(cfg.min_plateau, cfg.plateau_frac * t)
        b = max(0.0, t - plateau)
        c = t + plateau
        base = Trapezoid(max(0.0, b - shoulder), b, c, c + shoulder)
        if spec.fuzzy:
            return transform(base, cfg.fuzzy_widen, 0.0, t)
        return base

    widen = 1.0 / cfg.fuzzy_widen if spec.fuzzy else 1.0
    if spec.preposition is Preposition.BEFORE:
        return Trapezoid(0.0, 0.0, t, min(cfg.horizon, t + shoulder * widen))

    # AFTER: steep rise into t_spec, slow decay towards the horizon
    left = max(0.0, t - cfg.after_left_slope_window * widen)
    c = t + cfg.after_plateau_frac * (cfg.horizon - t)
    return Trapezoid(left, t, c, cfg.horizon)


# Placeholder combinations of the study protocol: fuzziness only with
# 10 minutes and now ("soon"), "now" only with "in".
STUDY_INSTRUCTIONS: tuple[tuple[str, str], ...] = (
    ("in_now", "The assignment should start now!"),
    ("in_soon", "The assignment should start soon!"),
    ("in_1min", "The assignment should start in one minute!"),
    ("in_10min", "The assignment should start in 10 minutes!"),
    ("in_approx_10min", "The assignment should start in approximately 10 minutes!"),
    ("in_30min", "The assignment should start in 30 minutes!"),
    ("after_1min", "The assignment should start after one minute!"),
    ("after_10min", "The assignment should start after 10 minutes!"),
    ("after_approx_10min", "The assignment should start after approximately 10 minutes!"),
    ("after_30min", "The assignment should start after 30 minutes!"),
    ("before_1min", "The assignment should start before the next minute!"),
    ("before_10min", "The assignment should start before the next 10 minutes!"),
    ("before_approx_10min",
     "The assignment should start before approximately the next ten minutes!"),
    ("before_30min", "The assignment should start before the next 30 minutes!"),
)
