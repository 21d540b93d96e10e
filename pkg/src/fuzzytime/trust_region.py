"""Bounded nonlinear least squares with a reflective trust-region method.

Minimises ``0.5 * ||r(x)||^2`` subject to ``lb <= x <= ub``. Iterates stay
strictly inside the box. Each iteration rescales the variables by their
distance to the bound the gradient points at (Coleman-Li scaling), solves
the trust-region subproblem for a damped Gauss-Newton step, and picks the
best of three feasible candidates: the step truncated just short of the
first bound it hits, the step reflected off that bound, and a bounded
steepest-descent step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


class NonFiniteResidual(ValueError):
    pass


@dataclass(frozen=True)
class NLLSResult:
    x: np.ndarray
    cost: float
    residual: np.ndarray
    iterations: int
    converged: bool
    grad_norm: float
    status: str


def _scaling(x, g, lb, ub):
    v = np.ones_like(x)
    dv = np.zeros_like(x)
    up = (g < 0) & np.isfinite(ub)
    v[up] = ub[up] - x[up]
    dv[up] = -1.0
    down = (g > 0) & np.isfinite(lb)
    v[down] = x[down] - lb[down]
    dv[down] = 1.0
    return v, dv


def _strictly_inside(x, lb, ub, rstep=1e-10):
    x = np.array(x, dtype=float)
    lo = lb + rstep * np.maximum(1.0, np.abs(lb))
    hi = ub - rstep * np.maximum(1.0, np.abs(ub))
    fix = lo > hi  # degenerate box narrower than the nudge
    lo[fix] = hi[fix] = 0.5 * (lb[fix] + ub[fix])
    return np.clip(x, lo, hi)


def _fraction_to_bound(x, p, lb, ub):
    """Largest t with x + t p inside the box, and which coordinates stop it."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t_hi = np.where(p > 0, (ub - x) / p, np.inf)
        t_lo = np.where(p < 0, (lb - x) / p, np.inf)
    steps = np.minimum(t_hi, t_lo)
    t = float(np.min(steps))
    return t, steps == t


def _tr_subproblem(J, r, delta):
    """argmin ||J p + r|| over ||p|| <= delta via SVD and the LM parameter."""
    U, s, Vt = np.linalg.svd(J, full_matrices=False)
    ur = U.T @ r
    cutoff = s.max(initial=0.0) * max(J.shape) * np.finfo(float).eps
    inv = np.where(s > cutoff, 1.0 / np.where(s > cutoff, s, 1.0), 0.0)
    p = -Vt.T @ (inv * ur)
    if np.linalg.norm(p) <= delta:
        return p

    def step(lam):
        return -Vt.T @ (s / (s * s + lam) * ur)

    lo, hi = 0.0, np.linalg.norm(s * ur) / delta
    if hi == 0.0:
        return np.zeros_like(p)
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if np.linalg.norm(step(mid)) > delta:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * hi:
            break
    return step(hi)


def _model(J_h, diag_h, g_h, s_h):
    Js = J_h @ s_h
    return 0.5 * (Js @ Js + s_h @ (diag_h * s_h)) + g_h @ s_h


def _ray_minimiser(J_h, diag_h, g_h, s0, direction, t_max):
    """Minimise the quadratic model along s0 + t*direction for t in [0, t_max]."""
    Jd = J_h @ direction
    a = Jd @ Jd + direction @ (diag_h * direction)
    b = (J_h @ s0) @ Jd + s0 @ (diag_h * direction) + g_h @ direction
    if a > 0:
        t = min(max(-b / a, 0.0), t_max)
    else:
        t = t_max if b < 0 else 0.0
    return t


def _dist_to_sphere(s0, direction, delta):
    """Positive t with ||s0 + t d|| = delta."""
    a = direction @ direction
    if a == 0:
        return 0.0
    b = 2 * s0 @ direction
    c = s0 @ s0 - delta * delta
    disc = max(b * b - 4 * a * c, 0.0)
    return max((-b + math.sqrt(disc)) / (2 * a), 0.0)


def _select_step(x, J_h, diag_h, g_h, p_h, d, delta, lb, ub, theta):
    p = d * p_h
    t_bound, hits = _fraction_to_bound(x, p, lb, ub)
    if t_bound > 1:
        return p, p_h, -_model(J_h, diag_h, g_h, p_h)

    candidates = []
    # truncated just short of the boundary
    short_h = theta * t_bound * p_h
    candidates.append(short_h)

    # reflected off the boundary
    first_h = t_bound * p_h
    refl_h = p_h.copy()
    refl_h[hits] *= -1
    x_hit = x + d * first_h
    t_refl_bound, _ = _fraction_to_bound(x_hit, d * refl_h, lb, ub)
    t_refl = min(_dist_to_sphere(first_h, refl_h, delta), theta * t_refl_bound)
    if t_refl > 0:
        t = _ray_minimiser(J_h, diag_h, g_h, first_h, refl_h, t_refl)
        # never land exactly on the bound we just reflected from
        t = max(t, (1 - theta) * t_refl)
        candidates.append(first_h + t * refl_h)

    # bounded steepest descent
    if np.any(g_h):
        dir_h = -g_h
        t_cap = min(delta / np.linalg.norm(dir_h), theta * _fraction_to_bound(x, d * dir_h, lb, ub)[0])
        t = _ray_minimiser(J_h, diag_h, g_h, np.zeros_like(g_h), dir_h, t_cap)
        candidates.append(t * dir_h)

    values = [_model(J_h, diag_h, g_h, c) for c in candidates]
    best = int(np.argmin(values))
    s_h = candidates[best]
    return d * s_h, s_h, -values[best]


def finite_difference_jacobian(fun, x, r0, lb, ub, h):
    """Central differences, one-sided where a bound is within reach."""
    m, n = r0.shape[0], x.shape[0]
    J = np.empty((m, n))
    for i in range(n):
        hi = h[i]
        up, down = x.copy(), x.copy()
        if x[i] + hi <= ub[i] and x[i] - hi >= lb[i]:
            up[i] += hi
            down[i] -= hi
            J[:, i] = (fun(up) - fun(down)) / (2 * hi)
        elif x[i] + hi <= ub[i]:
            up[i] += hi
            J[:, i] = (fun(up) - r0) / hi
        else:
            down[i] -= hi
            J[:, i] = (r0 - fun(down)) / hi
    return J


def solve_bounded_nlls(
    residual: Callable[[np.ndarray], np.ndarray],
    x0: Sequence[float],
    bounds: tuple[Sequence[float], Sequence[float]],
    jac: Callable[[np.ndarray], np.ndarray] | None = None,
    diff_step: Sequence[float] | float | None = None,
    gtol: float = 1e-8,
    xtol: float = 1e-10,
    max_iter: int = 200,
) -> NLLSResult:
    """Minimise 0.5 ||residual(x)||^2 inside the box ``bounds``.

    ``jac`` returns the residual Jacobian; without it central finite
    differences with absolute step ``diff_step`` (default 1e-6 * max(1, |x|))
    are used. Stops when the scaled gradient's infinity norm drops to
    ``gtol``, when a step is shorter than ``xtol * (1 + ||x||)``, or after
    ``max_iter`` iterations (reported as not converged).
    """
    lb = np.broadcast_to(np.asarray(bounds[0], dtype=float), np.shape(x0)).copy()
    ub = np.broadcast_to(np.asarray(bounds[1], dtype=float), np.shape(x0)).copy()
    x = np.asarray(x0, dtype=float)
    if np.any(lb > ub):
        raise ValueError("lower bounds exceed upper bounds")
    if np.any(x < lb) or np.any(x > ub):
        raise ValueError("initial point lies outside the bounds")
    x = _strictly_inside(x, lb, ub)

    def fun(z):
        return np.asarray(residual(z), dtype=float)

    r = fun(x)
    if not np.all(np.isfinite(r)):
        raise NonFiniteResidual("residual is not finite at the initial point")

    if jac is None:
        if diff_step is None:
            h_of = lambda z: 1e-6 * np.maximum(1.0, np.abs(z))  # noqa: E731
        else:
            fixed = np.broadcast_to(np.asarray(diff_step, dtype=float), x.shape)
            h_of = lambda z: fixed  # noqa: E731
        jacobian = lambda z, rz: finite_difference_jacobian(fun, z, rz, lb, ub, h_of(z))  # noqa: E731
    else:
        jacobian = lambda z, rz: np.asarray(jac(z), dtype=float)  # noqa: E731

    cost = 0.5 * float(r @ r)
    J = jacobian(x, r)
    g = J.T @ r
    v, dv = _scaling(x, g, lb, ub)
    # a start near the origin must not shrink the first radius to nothing
    delta = max(float(np.linalg.norm(x / np.sqrt(v))), 1.0)
    status = "max_iter"
    converged = False
    g_norm = float(np.linalg.norm(g * v, np.inf))

    iteration = 0
    for iteration in range(1, max_iter + 1):
        v, dv = _scaling(x, g, lb, ub)
        g_norm = float(np.linalg.norm(g * v, np.inf))
        if g_norm <= gtol:
            status, converged = "gtol", True
            break

        d = np.sqrt(v)
        diag_h = g * dv
        J_h = J * d
        g_h = d * g
        J_aug = np.vstack([J_h, np.diag(np.sqrt(diag_h))])
        r_aug = np.concatenate([r, np.zeros_like(x)])
        theta = max(0.995, 1 - g_norm)

        accepted = False
        while True:
            p_h = _tr_subproblem(J_aug, r_aug, delta)
            step, step_h, predicted = _select_step(x, J_h, diag_h, g_h, p_h, d, delta, lb, ub, theta)
            x_new = _strictly_inside(x + step, lb, ub, rstep=0.0)
            step = x_new - x
            step_norm = float(np.linalg.norm(step))
            small = xtol * (1.0 + float(np.linalg.norm(x)))
            if step_norm <= small:
                status, converged = "xtol", True
                break
            r_new = fun(x_new)
            step_h_norm = float(np.linalg.norm(step_h))
            if not np.all(np.isfinite(r_new)):
                delta = 0.25 * step_h_norm
                continue
            cost_new = 0.5 * float(r_new @ r_new)
            actual = cost - cost_new
            ratio = actual / predicted if predicted > 0 else (1.0 if actual > 0 else -1.0)
            if ratio < 0.25:
                delta = 0.25 * step_h_norm
            elif ratio > 0.75 and step_h_norm > 0.95 * delta:
                delta *= 2.0
            if actual > 0:
                accepted = True
                break

        if not accepted:
            break
        x, r, cost = x_new, r_new, cost_new
        J = jacobian(x, r)
        g = J.T @ r
        if step_norm <= xtol * (1.0 + float(np.linalg.norm(x))):
            status, converged = "xtol", True
            break
    else:
        iteration = max_iter

    return NLLSResult(
        x=x,
        cost=cost,
        residual=r,
        iterations=iteration,
        converged=converged,
        grad_norm=g_norm,
        status=status,
    )
