"""Acceptance gate: one test per criterion, each at its stated tolerance.

Statistical criteria follow a fixed-seed policy: a failure is re-run once with
the documented second seed, and two failures fail the criterion. Every test
records a one-line verdict that is printed in the terminal summary.
"""

import math
import time
import warnings

import numpy as np
import pytest
from scipy import integrate

from convex_sampler import Ball, Box, Polytope, SamplerConfig, minimize_quadratic, run_chain, run_chains
from convex_sampler.diagnostics import (
    analytic_marginals,
    divergence_bias_floor,
    divergence_trend,
    grid_chi2_two_sample,
    ks_test,
    projection_rejection_bound,
    separation_rejection_bound,
)
from convex_sampler.rgo import (
    potentials,
    radial_envelope_log,
    radial_log_density,
    radial_mode,
    rgo_inandout,
    rgo_projection,
    rgo_separation_many,
    sample_proposal_nu_batch,
    sample_radial,
)
from convex_sampler.sampler import chain_rng, run_walk

pytestmark = pytest.mark.slow

SEEDS = (20240601, 977)  # primary seed, documented re-run seed


def with_rerun(check):
    """Run ``check(seed)`` and retry once on failure with the second seed."""
    ok, detail = check(SEEDS[0])
    if ok:
        return ok, detail
    ok, detail = check(SEEDS[1])
    return ok, f"{detail} (after re-run with seed {SEEDS[1]})"


def polytope5():
    rng = np.random.default_rng(5)
    extra = rng.standard_normal((10, 5))
    extra /= np.linalg.norm(extra, axis=1, keepdims=True)
    A = np.vstack([np.eye(5), -np.eye(5), extra])
    b = np.concatenate([np.full(10, 2.0), np.full(10, 1.5)])
    return Polytope(A, b, circumradius=2 * math.sqrt(5))


class CountingBall(Ball):
    def __init__(self, *a):
        super().__init__(*a)
        self.proj_calls = 0

    def _project(self, y):
        self.proj_calls += 1
        return super()._project(y)


def test_01_feasibility(record_criterion):
    t0 = time.perf_counter()
    runs = [
        ("ball d=10", Ball(10, 1.0), SamplerConfig(iterations=100_000, seed=SEEDS[0])),
        ("box d=10", Box.cube(10), SamplerConfig(iterations=100_000, seed=SEEDS[0])),
        (
            "polytope d=5",
            polytope5(),
            SamplerConfig(iterations=100_000, seed=SEEDS[0], rgo_backend="separation", warm_start="unitball"),
        ),
    ]
    parts, ok = [], True
    for name, body, cfg in runs:
        rep = run_chain(body, cfg)
        inside = np.asarray(body.contains(rep.samples[1:]))
        ok &= bool(inside.all())
        parts.append(f"{name} {inside.mean():.0%} of {inside.size}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed <= 120
    record_criterion(1, "feasibility of every iterate", ok, f"{'; '.join(parts)}; {elapsed:.0f}s (limit 120s)")
    assert ok


def test_02_projection_rejection_bound(record_criterion):
    bound = projection_rejection_bound(1.0)

    def check(seed):
        t0 = time.perf_counter()
        rep = run_chain(Ball(10, 1.0), SamplerConfig(eta=0.01, iterations=10_000, seed=seed))
        el = time.perf_counter() - t0
        return rep.mean_rejections <= bound and el <= 30, f"mean {rep.mean_rejections:.3f} <= {bound:.4f}; {el:.1f}s (limit 30s)"

    ok, detail = with_rerun(check)
    record_criterion(2, "projection rejection bound, ball d=10, warmness 1", ok, detail)
    assert ok


def test_03_separation_rejection_bound(record_criterion):
    bound = separation_rejection_bound(1.0, 10)

    def check(seed):
        t0 = time.perf_counter()
        cfg = SamplerConfig(eta=0.01, iterations=10_000, seed=seed, rgo_backend="separation")
        rep = run_chain(Ball(10, 1.0), cfg)
        el = time.perf_counter() - t0
        calls = rep.separation_calls.mean()
        return rep.mean_rejections <= bound and el <= 300, (
            f"mean {rep.mean_rejections:.2f} <= {bound:.2f}; {calls:.1f} separation calls/RGO; {el:.1f}s (limit 300s)"
        )

    ok, detail = with_rerun(check)
    record_criterion(3, "separation rejection bound, ball d=10, warmness 1", ok, detail)
    assert ok


def test_04_one_projection_per_call(record_criterion):
    body = CountingBall(10, 1.0)
    rep = run_chain(body, SamplerConfig(eta=0.01, iterations=10_000, seed=SEEDS[0]))
    ok = body.proj_calls == 10_000 and bool(np.all(rep.projection_calls == 1))
    record_criterion(
        4,
        "one projection query per RGO call",
        ok,
        f"{body.proj_calls} oracle hits, telemetry {int(rep.projection_calls.sum())} over 10000 calls",
    )
    assert ok


def test_05_cutting_plane_accuracy(record_criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEEDS[0])
    worst, ok = 0.0, True
    for d in (5, 10):
        eta = 1 / d**2
        tol = math.sqrt(2 / d**3) + 1e-8
        for body in (Ball(d, 1.0), Box.cube(d)):
            for i in range(100):
                if i % 2:
                    # forward step from a uniform point
                    y = body.exact_uniform(rng) + math.sqrt(eta) * rng.standard_normal(d)
                else:
                    w = rng.standard_normal(d)
                    y = w / np.linalg.norm(w) * rng.uniform(1.0, 3.0) * body.circumradius
                res = minimize_quadratic(body, y, eta)
                err = float(np.linalg.norm(res.xhat - body.project(y)))
                worst = max(worst, err / tol)
                ok &= err <= tol and bool(body.contains(res.xhat))
    elapsed = time.perf_counter() - t0
    ok &= elapsed <= 120
    record_criterion(
        5, "cutting-plane accuracy", ok, f"max ||xhat - proj|| / tolerance = {worst:.3f}; {elapsed:.1f}s (limit 120s)"
    )
    assert ok


def test_06_well_definedness(record_criterion):
    rng = np.random.default_rng(SEEDS[0])
    slack = 1e-9
    worst_proj = worst_sep = -math.inf
    worst_order = -math.inf
    tuples = feasible = 0
    for body in (Ball(5, 1.0), Box.cube(5)):
        d = 5
        eta = 1 / d**2
        for _ in range(200):
            x0 = body.exact_uniform(rng)
            y = x0 + math.sqrt(eta) * rng.standard_normal(d) * rng.choice([1.0, 3.0])
            p = body.project(y)
            xhat = minimize_quadratic(body, y, eta).xhat
            # projection path proposals
            Xp = p + math.sqrt(eta) * rng.standard_normal((250, d))
            inside = np.asarray(body.contains(Xp))
            lr = -((Xp - p) @ (p - y)) / eta
            if inside.any():
                worst_proj = max(worst_proj, float(lr[inside].max()))
            # separation path proposals
            Xs, _, _ = sample_proposal_nu_batch(xhat, d, eta, 250, rng)
            pb = potentials(Xs, y, xhat, p, eta, d, body)
            if pb.feasible.any():
                worst_sep = max(worst_sep, float((pb.p2 - pb.theta)[pb.feasible].max()))
            # ordering on random tuples: half near xhat, half over the bounding cube
            R = body.circumradius + 1
            X = np.vstack([sample_proposal_nu_batch(xhat, d, eta, 2500, rng)[0], rng.uniform(-R, R, (2500, d))])
            pb = potentials(X, y, xhat, p, eta, d, body)
            f = pb.feasible
            gaps = [pb.p1[f] - pb.theta[f], pb.p2 - pb.p1, pb.p3 - pb.p2]
            worst_order = max(worst_order, max(float(g.max()) for g in gaps if g.size))
            tuples += X.shape[0]
            feasible += int(f.sum())
    ok = worst_proj <= slack and worst_sep <= slack and worst_order <= slack and tuples >= 1_000_000
    record_criterion(
        6,
        "well-defined acceptance tests and potential ordering",
        ok,
        f"max log-ratio projection {worst_proj:.3g}, separation {worst_sep:.3g} over 1e5 proposals each; "
        f"max ordering violation {worst_order:.3g} over {tuples} tuples ({feasible} feasible)",
    )
    assert ok


def test_07_rgo_equivalence(record_criterion):
    body = Box.cube(2)
    y = np.array([1.3, 0.2])
    eta = 0.04
    n = 100_000

    def check(seed):
        t0 = time.perf_counter()
        rng = chain_rng(seed, 7)
        proj = np.array([rgo_projection(body, y, eta, rng).sample for _ in range(n)])
        sep, _ = rgo_separation_many(body, y, eta, n, rng)
        acc = []
        while len(acc) < n:
            x, _ = rgo_inandout(body, y, eta, 13, rng)
            if x is not None:
                acc.append(x)
        io = np.array(acc)
        pairs = {
            "proj/sep": grid_chi2_two_sample(proj, sep, -1, 1, 10).p_value,
            "proj/inout": grid_chi2_two_sample(proj, io, -1, 1, 10).p_value,
            "sep/inout": grid_chi2_two_sample(sep, io, -1, 1, 10).p_value,
        }
        el = time.perf_counter() - t0
        ok = min(pairs.values()) >= 1e-3 and el <= 300
        ok &= all(bool(np.all(body.contains(s))) for s in (proj, sep, io))
        return ok, ", ".join(f"{k} p={v:.3g}" for k, v in pairs.items()) + f"; {el:.0f}s (limit 300s)"

    ok, detail = with_rerun(check)
    record_criterion(7, "RGO backends agree in law", ok, detail)
    assert ok


def test_08_radial_sampler(record_criterion):
    d, eta = 10, 0.01
    b = math.sqrt(2 * eta / d)
    m = radial_mode(d, eta)
    top = float(radial_log_density(m, d, eta))

    def dens(r):
        return math.exp((d - 1) * math.log(r) - (r - b) ** 2 / (2 * eta) - top) if r > 0 else 0.0

    Z = integrate.quad(dens, 0, np.inf, epsabs=1e-13, epsrel=1e-12)[0]
    grid = np.linspace(0, m + 12 * math.sqrt(eta), 2001)
    cdf = np.concatenate([[0.0], np.cumsum([integrate.quad(dens, lo, hi)[0] for lo, hi in zip(grid[:-1], grid[1:])])]) / Z

    r_env = np.linspace(0, m + 10 * math.sqrt(eta), 10_000)
    env_ok = bool(np.all(np.exp(radial_log_density(r_env, d, eta)) <= np.exp(radial_envelope_log(r_env, d, eta)) * (1 + 1e-12)))

    def check(seed):
        rng = np.random.default_rng(seed)
        r = np.sort([sample_radial(d, eta, rng)[0] for _ in range(100_000)])
        F = np.interp(r, grid, cdf)
        i = np.arange(1, r.size + 1)
        dist = max(np.max(i / r.size - F), np.max(F - (i - 1) / r.size))
        return dist <= 0.01 and env_ok, f"sup |F_n - F| = {dist:.4f} <= 0.01; envelope dominates on 1e4 grid: {env_ok}"

    ok, detail = with_rerun(check)
    record_criterion(8, "radial sampler exactness", ok, detail)
    assert ok


def test_09_end_to_end_uniformity(record_criterion):
    box = Box.cube(5)
    ball = Ball(5, 2.0)

    def check(seed):
        t0 = time.perf_counter()
        cfg = SamplerConfig(eta=1 / 25, iterations=2000, seed=seed, warm_start="unitball")
        fb = np.array([r.samples[-1] for r in run_chains(box, cfg, 500)])
        fl = np.array([r.samples[-1] for r in run_chains(ball, cfg, 500)])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            p_box = [ks_test(fb[:, i], lambda t: np.clip((t + 1) / 2, 0, 1)).p_value for i in range(5)]
            cat = analytic_marginals(ball)
            p_ball = ks_test(cat.statistics["radial"](fl), cat.cdfs["radial"]).p_value
        p_box_adj = min(1.0, 5 * min(p_box))
        el = time.perf_counter() - t0
        ok = p_box_adj >= 1e-3 and p_ball >= 1e-3 and el <= 600
        return ok, f"box min Bonferroni p={p_box_adj:.3g}, ball radial p={p_ball:.3g}; {el:.0f}s (limit 600s)"

    ok, detail = with_rerun(check)
    record_criterion(9, "end-to-end uniformity from a unit-ball start", ok, detail)
    assert ok


def test_10_stationary_moments(record_criterion):
    chains = 40

    def check(seed):
        parts, ok = [], True
        for body, target in ((Ball(3, 1.0), 0.6), (Box.cube(3), 1.0)):
            runs = {
                "asf": lambda c: run_chain(
                    body, SamplerConfig(warm_start="point", iterations=2000, seed=seed), chain_index=c
                ).samples,
                "ball": lambda c: run_walk(body, "ball", 4000, np.zeros(3), chain_rng(seed + 1, c)),
                "hitandrun": lambda c: run_walk(body, "hitandrun", 1000, np.zeros(3), chain_rng(seed + 2, c)),
            }
            for name, run in runs.items():
                means = []
                for c in range(chains):
                    X = run(c)
                    X = X[X.shape[0] // 5 :]  # burn-in
                    means.append(np.mean(np.sum(X**2, axis=1)))
                mu = float(np.mean(means))
                se = float(np.std(means, ddof=1) / math.sqrt(chains))
                z = (mu - target) / se
                ok &= abs(z) <= 3
                parts.append(f"{body.kind}/{name} {mu:.4f} (z={z:+.2f})")
        return ok, "; ".join(parts)

    ok, detail = with_rerun(check)
    record_criterion(10, "stationary second moments", ok, detail)
    assert ok


def test_11_divergence_trend(record_criterion):
    box = Box.cube(2)
    windows = [(0, 1), (1, 2), (2, 3), (3, 5), (5, 501)]
    floor = divergence_bias_floor(box, 10, 1000)

    def check(seed):
        cfg = SamplerConfig(warm_start="point", start_point=np.array([1.0, 1.0]), iterations=500, seed=seed)
        it = np.array([r.samples for r in run_chains(box, cfg, 1000)])
        trend = np.array(divergence_trend(it, box, 10))
        avg = [float(trend[a:b].mean()) for a, b in windows]
        decreasing = all(x > y for x, y in zip(avg, avg[1:]))
        at_floor = abs(avg[-1] - floor) <= 0.25 * floor
        return decreasing and at_floor, (
            "window means " + " > ".join(f"{a:.4g}" for a in avg) + f"; floor {floor:.3f}"
        )

    ok, detail = with_rerun(check)
    record_criterion(11, "divergence trend from a corner start", ok, detail)
    assert ok
