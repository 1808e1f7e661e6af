"""Separation-oracle minimisation of ``f(x) = ||x - y||^2 / (2 eta)`` over the body.

A central-cut ellipsoid method. The returned point is always a centre that the
separation oracle declared feasible, and the optimality gap is certified a
posteriori by the best of three lower bounds on ``min f over the body``:

* objective cuts: ``f(c) - ||grad f(c)|| sqrt(g' P g)`` for a feasible centre ``c``;
* feasibility cuts: the body lies in the halfspace ``<g, x - c> <= 0``, so ``min f over the body``
  is at least the squared distance from ``y`` to that halfspace over ``2 eta``;
* volume decay: after ``t`` steps the gap is at most
  ``B (R0 / r) exp(-t / (2 d (d + 1)))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bodies import ConvexBody, SEPARATION
from .errors import BudgetExceeded, CapabilityError

RESYMMETRIZE_EVERY = 50


@dataclass
class EllipsoidState:
    """Ellipsoid ``{x : (x - center)' P^{-1} (x - center) <= 1}``."""

    center: np.ndarray
    shape: np.ndarray

    @classmethod
    def ball(cls, d: int, radius: float, center=None):
        c = np.zeros(d) if center is None else np.asarray(center, dtype=float).copy()
        return cls(c, radius**2 * np.eye(d))

    def contains(self, x) -> np.ndarray:
        diff = np.atleast_2d(np.asarray(x, dtype=float)) - self.center
        sol = np.linalg.solve(self.shape, diff.T).T
        return np.einsum("ij,ij->i", diff, sol) <= 1.0 + 1e-12

    def log_volume_factor(self) -> float:
        """``log sqrt(det P)``; the volume up to the unit-ball constant."""
        sign, logdet = np.linalg.slogdet(self.shape)
        return 0.5 * logdet if sign > 0 else -math.inf


def ellipsoid_step(state: EllipsoidState, cut_normal) -> EllipsoidState:
    """Minimum-volume ellipsoid containing ``state ∩ {x : <cut_normal, x - center> <= 0}``."""
    g = np.asarray(cut_normal, dtype=float)
    d = g.shape[0]
    if d < 2:
        raise ValueError("the ellipsoid update needs d >= 2")
    P = state.shape
    Pg = P @ g
    gPg = float(g @ Pg)
    if not gPg > 0.0:
        raise np.linalg.LinAlgError("g'Pg <= 0: ellipsoid lost positive definiteness")
    b = Pg / math.sqrt(gPg)
    center = state.center - b / (d + 1)
    shape = (d * d / (d * d - 1.0)) * (P - (2.0 / (d + 1)) * np.outer(b, b))
    return EllipsoidState(center, shape)


@dataclass
class CuttingPlaneResult:
    xhat: np.ndarray
    certified_gap: float
    separation_calls: int
    total_iterations: int
    objective: float
    lower_bound: float
    gap_history: list = field(default_factory=list, repr=False)


def iteration_cap(d: int, decay_scale: float, gap_target: float) -> int:
    k = 2 * d * (d + 1)
    return math.ceil(k * math.log(max(decay_scale * d / gap_target, math.e))) + 2 * k


def minimize_quadratic(
    body: ConvexBody,
    y,
    eta: float,
    gap_target: float | None = None,
    rng=None,
    max_iterations: int | None = None,
    record_history: bool = False,
) -> CuttingPlaneResult:
    """Return ``xhat`` in the body with ``f(xhat) - min f over the body <= gap_target`` (default ``1/d``).

    ``rng`` is accepted for interface symmetry; the method is deterministic.
    When ``y`` is already in the body the first oracle call certifies ``xhat = y``.
    """
    if not body.has(SEPARATION):
        raise CapabilityError(f"{body.kind} body has no separation oracle")
    if eta <= 0:
        raise ValueError("eta must be positive")
    y = np.asarray(y, dtype=float)
    d = body.dimension
    if gap_target is None:
        gap_target = 1.0 / d
    if gap_target <= 0:
        raise ValueError("gap_target must be positive")
    history = []

    g = body.separate(y)
    calls = 1
    if g is None:
        if record_history:
            history.append(0.0)
        return CuttingPlaneResult(y.copy(), 0.0, calls, 0, 0.0, 0.0, history)

    two_eta = 2.0 * eta
    ynorm = float(np.linalg.norm(y))
    R0 = ynorm + body.circumradius
    objective_range = R0**2 / two_eta
    decay_scale = objective_range * R0 / body.inradius
    rate = 1.0 / (2.0 * d * (d + 1))
    cap = iteration_cap(d, decay_scale, gap_target) if max_iterations is None else int(max_iterations)

    if d == 1:
        return _minimize_interval(body, y, eta, gap_target, cap, history if record_history else None)

    center = np.zeros(d)
    P = R0**2 * np.eye(d)
    dd = d * d / (d * d - 1.0)
    shrink = 2.0 / (d + 1)
    f_best = math.inf
    x_best = None
    lower = 0.0
    gap = math.inf

    for t in range(1, cap + 1):
        g = body.separate(center)
        calls += 1
        if g is None:
            diff = center - y
            fc = float(diff @ diff) / two_eta
            if fc < f_best:
                f_best, x_best = fc, center.copy()
            gnorm = math.sqrt(float(diff @ diff)) / eta
            g = diff / (gnorm * eta)
            Pg = P @ g
            gPg = float(g @ Pg)
            if gPg > 0.0:
                lower = max(lower, fc - gnorm * math.sqrt(gPg))
        else:
            Pg = P @ g
            gPg = float(g @ Pg)
            s = float(g @ (y - center))
            if s > 0.0:
                lower = max(lower, s * s / two_eta)
        if not gPg > 0.0:
            raise BudgetExceeded("ellipsoid lost positive definiteness: body is numerically degenerate")

        b = Pg / math.sqrt(gPg)
        center = center - b / (d + 1)
        P = dd * (P - shrink * np.outer(b, b))
        if t % RESYMMETRIZE_EVERY == 0:
            P = 0.5 * (P + P.T)

        if x_best is not None:
            gap = min(gap, f_best - lower, decay_scale * math.exp(-t * rate))
        if record_history:
            history.append(gap)
        if gap <= gap_target:
            return CuttingPlaneResult(x_best, max(gap, 0.0), calls, t, f_best, lower, history)

    raise BudgetExceeded(f"no {gap_target:g}-certificate after {cap} ellipsoid steps (gap {gap:g})")


def _minimize_interval(body, y, eta, gap_target, cap, history):
    """Bisection on the line; the 1-D analogue of the central cut."""
    R0 = abs(float(y[0])) + body.circumradius
    lo, hi = -R0, R0
    two_eta = 2.0 * eta
    f_best, x_best, lower, gap = math.inf, None, 0.0, math.inf
    calls = 1
    for t in range(1, cap + 1):
        c = np.array([0.5 * (lo + hi)])
        g = body.separate(c)
        calls += 1
        if g is None:
            fc = float((c[0] - y[0]) ** 2) / two_eta
            if fc < f_best:
                f_best, x_best = fc, c
            # minimiser lies on the side of y
            if y[0] > c[0]:
                lower = max(lower, fc - abs(c[0] - y[0]) / eta * (hi - c[0]))
                lo = c[0]
            else:
                lower = max(lower, fc - abs(c[0] - y[0]) / eta * (c[0] - lo))
                hi = c[0]
        else:
            s = float(g[0] * (y[0] - c[0]))
            if s > 0.0:
                lower = max(lower, s * s / two_eta)
            if g[0] > 0:
                hi = c[0]
            else:
                lo = c[0]
        if x_best is not None:
            gap = min(gap, f_best - lower)
        if history is not None:
            history.append(gap)
        if gap <= gap_target:
            return CuttingPlaneResult(x_best, max(gap, 0.0), calls, t, f_best, lower, history or [])
    raise BudgetExceeded(f"no {gap_target:g}-certificate after {cap} bisection steps")
