"""Statistical checks for sampler output: goodness of fit, binned divergence, bound audits."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy import stats

from .bodies import Ball, Box, ConvexBody
from .errors import InsufficientChains

MIN_KS_SAMPLES = 1000


@dataclass
class GofResult:
    statistic: float
    p_value: float
    sample_size: int
    test_name: str
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.p_value >= 1e-3


@dataclass
class BoundAudit:
    claim: str
    bound_value: float
    observed_value: float
    passed: bool
    skipped: bool = False
    reason: str = ""


def ks_test(samples, cdf: Callable) -> GofResult:
    """One-sample Kolmogorov-Smirnov test with the asymptotic Kolmogorov p-value."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise ValueError("ks_test needs at least one sample")
    if n < MIN_KS_SAMPLES:
        warnings.warn(f"ks_test with n={n} < {MIN_KS_SAMPLES}: asymptotic p-value is approximate", stacklevel=2)
    F = np.clip(np.asarray(cdf(x), dtype=float), 0.0, 1.0)
    i = np.arange(1, n + 1)
    D = float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))
    p = float(stats.kstwobign.sf(math.sqrt(n) * D))
    return GofResult(D, min(max(p, 0.0), 1.0), n, "kolmogorov-smirnov")


def uniform_cdf(lo: float, hi: float) -> Callable:
    return lambda t: np.clip((np.asarray(t) - lo) / (hi - lo), 0.0, 1.0)


@dataclass
class MarginalCatalogue:
    """Exact one-dimensional laws of a uniform point in a ball or box.

    ``statistics[name]`` maps an ``(n, d)`` array to ``n`` scalars whose exact
    CDF is ``cdfs[name]``.
    """

    statistics: dict
    cdfs: dict
    second_moment: float


def analytic_marginals(body: ConvexBody) -> MarginalCatalogue:
    if isinstance(body, Ball):
        d, R = body.dimension, body.radius
        return MarginalCatalogue(
            statistics={"radial": lambda X: (np.linalg.norm(np.atleast_2d(X), axis=1) / R) ** d},
            cdfs={"radial": uniform_cdf(0.0, 1.0)},
            second_moment=d * R * R / (d + 2),
        )
    if isinstance(body, Box):
        statistics, cdfs = {}, {}
        for i, (lo, hi) in enumerate(zip(body.lo, body.hi)):
            statistics[f"x{i}"] = lambda X, i=i: np.atleast_2d(X)[:, i]
            cdfs[f"x{i}"] = uniform_cdf(lo, hi)
        m2 = float(np.sum((body.lo**2 + body.lo * body.hi + body.hi**2) / 3.0))
        return MarginalCatalogue(statistics, cdfs, m2)
    raise TypeError(f"no analytic marginals for {body.kind} bodies")


def marginal_ks_tests(samples, body: ConvexBody) -> list:
    cat = analytic_marginals(body)
    out = []
    for name, stat in cat.statistics.items():
        res = ks_test(stat(samples), cat.cdfs[name])
        res.test_name = f"ks[{name}]"
        out.append(res)
    return out


def _grid_edges(body: ConvexBody, cells: int):
    if isinstance(body, Box):
        return [np.linspace(lo, hi, cells + 1) for lo, hi in zip(body.lo, body.hi)]
    R = body.circumradius
    return [np.linspace(-R, R, cells + 1) for _ in range(body.dimension)]


def _cell_index(points, edges, cells):
    idx = np.zeros(points.shape[0], dtype=np.int64)
    for j, e in enumerate(edges):
        k = np.clip(np.searchsorted(e, points[:, j], side="right") - 1, 0, cells - 1)
        idx = idx * cells + k
    return idx


def cell_probabilities(body: ConvexBody, cells_per_axis: int, rng=None, mc_points: int = 100_000) -> np.ndarray:
    """Probability of each grid cell under the uniform law on the body.

    Boxes are gridded over themselves (equal cells). Other bodies are gridded
    over ``[-R, R]^d`` and cell volumes are estimated by Monte Carlo.
    """
    ncell = cells_per_axis**body.dimension
    if isinstance(body, Box):
        return np.full(ncell, 1.0 / ncell)
    rng = np.random.default_rng(0) if rng is None else rng
    R = body.circumradius
    pts = rng.uniform(-R, R, size=(mc_points, body.dimension))
    pts = pts[np.asarray(body.contains(pts))]
    counts = np.bincount(_cell_index(pts, _grid_edges(body, cells_per_axis), cells_per_axis), minlength=ncell)
    return counts / counts.sum()


def _merge_empty(observed, probs):
    """Fold cells with zero probability into their nearest non-empty neighbour (by flat index)."""
    keep = np.flatnonzero(probs > 0)
    if keep.size == probs.size:
        return observed, probs
    obs = observed[keep].astype(float)
    for i in np.flatnonzero(probs == 0):
        if observed[i]:
            j = int(np.argmin(np.abs(keep - i)))
            obs[j] += observed[i]
    return obs, probs[keep]


def grid_chi2_uniformity(samples, body: ConvexBody, cells_per_axis: int = 10, rng=None) -> GofResult:
    """Pearson chi-square of grid-cell counts against cell volumes of the body."""
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    probs = cell_probabilities(body, cells_per_axis, rng)
    edges = _grid_edges(body, cells_per_axis)
    observed = np.bincount(_cell_index(X, edges, cells_per_axis), minlength=probs.size)
    obs, p = _merge_empty(observed, probs)
    n = X.shape[0]
    expected = n * p
    stat = float(np.sum((obs - expected) ** 2 / expected))
    dof = p.size - 1
    return GofResult(stat, float(stats.chi2.sf(stat, dof)), n, "grid-chi2-uniformity", {"cells": int(p.size)})


def grid_chi2_two_sample(a, b, lo, hi, cells_per_axis: int = 10) -> GofResult:
    """Chi-square homogeneity test of two point clouds binned on a common grid."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (a.shape[1],))
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (a.shape[1],))
    edges = [np.linspace(l, h, cells_per_axis + 1) for l, h in zip(lo, hi)]
    ncell = cells_per_axis ** a.shape[1]
    ca = np.bincount(_cell_index(a, edges, cells_per_axis), minlength=ncell)
    cb = np.bincount(_cell_index(b, edges, cells_per_axis), minlength=ncell)
    used = (ca + cb) > 0
    table = np.vstack([ca[used], cb[used]])
    stat, p, dof, _ = stats.chi2_contingency(table, correction=False)
    return GofResult(float(stat), float(p), int(a.shape[0] + b.shape[0]), "grid-chi2-two-sample", {"dof": int(dof)})


def chi2_divergence_estimate(samples, probs, edges, cells) -> float:
    """Plug-in ``sum (phat - q)^2 / q`` over cells with ``q > 0``."""
    X = np.atleast_2d(samples)
    counts = np.bincount(_cell_index(X, edges, cells), minlength=probs.size)
    phat = counts / X.shape[0]
    mask = probs > 0
    return float(np.sum((phat[mask] - probs[mask]) ** 2 / probs[mask]))


def divergence_trend(iterates, body: ConvexBody, cells_per_axis: int = 10, min_chains: int = 500, rng=None) -> list:
    """Histogram chi-square estimate of ``chi^2(law of x_k || uniform)`` for every k.

    ``iterates`` has shape ``(chains, k + 1, d)``. Under exact uniformity the
    estimator has mean ``(cells - 1) / chains``, its bias floor.
    """
    it = np.asarray(iterates, dtype=float)
    if it.ndim != 3:
        raise ValueError("iterates must have shape (chains, steps, d)")
    if it.shape[0] < max(2, min_chains):
        raise InsufficientChains(f"need at least {max(2, min_chains)} independent chains, got {it.shape[0]}")
    probs = cell_probabilities(body, cells_per_axis, rng)
    edges = _grid_edges(body, cells_per_axis)
    return [chi2_divergence_estimate(it[:, k], probs, edges, cells_per_axis) for k in range(it.shape[1])]


def divergence_bias_floor(body: ConvexBody, cells_per_axis: int, chains: int) -> float:
    return (cells_per_axis**body.dimension - 1) / chains


def projection_rejection_bound(warmness: float) -> float:
    return warmness * (math.sqrt(2.0 * math.pi * math.e) + 1.0)


def separation_rejection_bound(warmness: float, d: int) -> float:
    return math.sqrt(2.0 * math.pi) * warmness * math.exp(13.0 / 4.0 + 20.0 / d) + warmness * math.exp(9.0 / 4.0 + 12.0 / d)


def audit_rejection_bounds(report, config, d: int) -> list:
    """Compare mean observed rejections with the bound for the configured backend.

    Skipped when the warmness is unknown, when ``eta != 1/d^2``, or for the
    membership-only backend, which has no such bound.
    """
    backend = config.rgo_backend
    warm = config.warmness
    observed = float(np.mean(report.rejections)) if len(report.rejections) else 0.0
    if backend == "projection":
        claim, bound = "projection mean rejections <= warmness * (sqrt(2 pi e) + 1)", projection_rejection_bound(warm or 1.0)
    elif backend == "separation":
        claim = "separation mean rejections <= sqrt(2 pi) warmness e^(13/4 + 20/d) + warmness e^(9/4 + 12/d)"
        bound = separation_rejection_bound(warm or 1.0, d)
    else:
        return [BoundAudit("inandout rejections", math.nan, observed, False, True, "no bound for the membership baseline")]
    if warm is None:
        return [BoundAudit(claim, math.nan, observed, False, True, "warmness unknown")]
    if not math.isclose(config.eta, 1.0 / (d * d), rel_tol=1e-12):
        return [BoundAudit(claim, bound, observed, False, True, "bound assumes eta = 1/d^2")]
    return [BoundAudit(claim, bound, observed, observed <= bound)]


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, (np.floating, np.integer)):
        return _jsonable(obj.item())
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def diagnostics_report(tests=(), audits=(), trend=()) -> dict:
    return _jsonable(
        {
            "tests": [asdict(t) for t in tests],
            "audits": [asdict(a) for a in audits],
            "trend": list(trend),
        }
    )


def write_report(path, tests=(), audits=(), trend=()):
    with open(path, "w") as fh:
        json.dump(diagnostics_report(tests, audits, trend), fh, indent=2)
