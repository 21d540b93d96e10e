"""Fit trapezoids and bell curves to sampled satisfaction functions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import Bell, SampledFunction, SatisfactionFunction, Trapezoid
from .trust_region import solve_bounded_nlls


class AllZeroTarget(ValueError):
    pass


N_JITTER = 4


@dataclass(frozen=True)
class FitResult:
    model: str
    function: SatisfactionFunction
    error: float
    iterations: int
    converged: bool
    starts_tried: int = 1
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "params": dict(self.params),
            "error": self.error,
            "iterations": self.iterations,
            "converged": self.converged,
        }


def rmse(fn: SatisfactionFunction, target: SampledFunction) -> float:
    diff = np.asarray(fn(target.grid.times())) - target.values
    return float(np.sqrt(np.mean(diff * diff)))


def _check_target(target: SampledFunction):
    if not np.any(target.values > 0):
        raise AllZeroTarget("target satisfaction is zero everywhere")


def trapezoid_model(t: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Values and Jacobian of a trapezoid in (a, rise, plateau, fall) form."""
    a, w1, w2, w3 = x
    b, c = a + w1, a + w1 + w2
    d = c + w3
    val = np.zeros_like(t)
    jac = np.zeros((t.shape[0], 4))

    rise = (t >= a) & (t < b)
    if w1 > 0 and rise.any():
        tr = t[rise]
        val[rise] = (tr - a) / w1
        jac[rise, 0] = -1.0 / w1
        jac[rise, 1] = -(tr - a) / (w1 * w1)

    val[(t >= b) & (t <= c)] = 1.0

    fall = (t > c) & (t <= d)
    if w3 > 0 and fall.any():
        tf = t[fall]
        val[fall] = (d - tf) / w3
        jac[fall, 0:3] = 1.0 / w3
        jac[fall, 3] = (tf - c) / (w3 * w3)
    return val, jac


def bell_model(t: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mu, sigma = x
    z = (t - mu) / sigma
    val = np.exp(-0.5 * z * z)
    jac = np.column_stack([val * z / sigma, val * z * z / sigma])
    return val, jac


def _fit(model, target, starts, bounds):
    t = target.grid.times()
    y = target.values

    def residual(x):
        return model(t, x)[0] - y

    def jac(x):
        return model(t, x)[1]

    results = [solve_bounded_nlls(residual, x0, bounds, jac=jac) for x0 in starts]
    return results


def _snap(x, lb, ub, tol):
    """Move coordinates within ``tol`` of a bound onto it.

    The solver keeps iterates strictly inside the box, so a foot that
    belongs exactly at t = 0 otherwise ends up a hair to its right.
    """
    x = np.where(np.abs(x - lb) <= tol, lb, x)
    return np.where(np.abs(ub - x) <= tol, ub, x)


def _best(results, make, target, lb, ub):
    # lowest error wins; convergence only breaks ties
    tol = 1e-6 * max(1.0, target.grid.end - target.grid.start)
    scored = []
    for i, res in enumerate(results):
        fn = make(res.x)
        err = rmse(fn, target)
        snapped = make(_snap(res.x, lb, ub, tol))
        snapped_err = rmse(snapped, target)
        if snapped_err <= err:
            fn, err = snapped, snapped_err
        scored.append((err, not res.converged, i, fn, res))
    scored.sort(key=lambda s: s[:3])
    return scored[0][3], scored[0][4]


def _trapezoid_starts(target: SampledFunction, rng: np.random.Generator) -> list[np.ndarray]:
    t = target.grid.times()
    y = target.values
    top = y.max()
    high = t[y >= 0.9 * top]
    nonzero = t[y > 0]
    raised = t[y >= 0.1 * top]
    base = [
        np.array([nonzero[0], high[0], high[-1], nonzero[-1]]),
        np.array([raised[0], high[0], high[-1], raised[-1]]),
    ]
    spread = max(target.grid.step, 0.1 * (nonzero[-1] - nonzero[0]))
    for _ in range(N_JITTER):
        base.append(np.sort(base[0] + rng.normal(0.0, spread, 4)))
    return base


def _to_widths(corners, lb, ub):
    c = np.sort(np.asarray(corners, dtype=float))
    x = np.array([c[0], c[1] - c[0], c[2] - c[1], c[3] - c[2]])
    return np.clip(x, lb, ub)


def fit_trapezoid(target: SampledFunction, seed: int = 0) -> FitResult:
    """Least-squares trapezoid, parameterised by left foot and three widths.

    Non-negative widths keep the corners ordered. Starts: plateau from the
    first/last step at >= 90 % of the peak and feet from the first/last
    nonzero step, the same with feet at the 10 % level, and jittered copies.
    """
    _check_target(target)
    g = target.grid
    t = g.times()
    span = float(t[-1] - t[0]) or g.step
    lb = np.array([t[0], 0.0, 0.0, 0.0])
    ub = np.array([t[-1], span, span, span])
    rng = np.random.default_rng(seed)
    starts = [_to_widths(c, lb, ub) for c in _trapezoid_starts(target, rng)]
    results = _fit(trapezoid_model, target, starts, (lb, ub))

    def make(x):
        a = float(x[0])
        b = a + float(x[1])
        c = b + float(x[2])
        return Trapezoid(a, b, c, c + float(x[3]))

    fn, res = _best(results, make, target, lb, ub)
    return FitResult(
        model="trapezoid",
        function=fn,
        error=rmse(fn, target),
        iterations=res.iterations,
        converged=res.converged,
        starts_tried=len(starts),
        params={"a": fn.a, "b": fn.b, "c": fn.c, "d": fn.d},
    )


def fit_bell(target: SampledFunction, seed: int = 0) -> FitResult:
    _check_target(target)
    g = target.grid
    t = g.times()
    y = target.values
    span = float(t[-1] - t[0]) or g.step
    lb = np.array([t[0], g.step])
    ub = np.array([t[-1], max(span, g.step)])
    half = t[y >= 0.5 * y.max()]
    x0 = np.clip([t[int(np.argmax(y))], 0.5 * (half[-1] - half[0])], lb, ub)
    rng = np.random.default_rng(seed)
    starts = [x0]
    for _ in range(N_JITTER):
        jitter = x0 + rng.normal(0.0, 1.0, 2) * np.array([x0[1], 0.25 * x0[1]])
        starts.append(np.clip(jitter, lb, ub))
    results = _fit(bell_model, target, starts, (lb, ub))
    fn, res = _best(results, lambda x: Bell(float(x[0]), float(x[1])), target, lb, ub)
    return FitResult(
        model="bell",
        function=fn,
        error=rmse(fn, target),
        iterations=res.iterations,
        converged=res.converged,
        starts_tried=len(starts),
        params={"mu": fn.mu, "sigma": fn.sigma},
    )


FITTERS = {"trapezoid": fit_trapezoid, "bell": fit_bell}


def best_fit(target: SampledFunction, seed: int = 0) -> FitResult:
    """The lower-error model; trapezoids win ties."""
    trap = fit_trapezoid(target, seed)
    bell = fit_bell(target, seed)
    return bell if bell.error < trap.error else trap
