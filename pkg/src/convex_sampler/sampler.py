"""Proximal sampler (alternating Gaussian / restricted-Gaussian steps) and baseline walks."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .bodies import EXACT_UNIFORM, MEMBERSHIP, PROJECTION, SEPARATION, ConvexBody, GeometrySummary, validate_geometry
from .errors import CapabilityError, InAndOutFailure, InvalidConfig
from .rgo import (
    DEFAULT_REJECTION_CAP,
    RgoOutcome,
    default_inandout_cap,
    rgo_inandout,
    rgo_projection,
    rgo_separation,
)

log = logging.getLogger(__name__)

BACKENDS = ("projection", "separation", "inandout")
WARM_STARTS = ("exact", "unitball", "point")


def default_eta(d: int) -> float:
    if d < 1:
        raise ValueError("d must be positive")
    return 1.0 / (d * d)


@dataclass
class SamplerConfig:
    """Run configuration.

    ``warmness`` is the known bound on the start density ratio; it is set to 1
    automatically for exact-uniform starts and left ``None`` when unknown.
    """

    eta: float | None = None
    iterations: int | None = None
    warm_start: str = "exact"
    start_point: np.ndarray | None = None
    warmness: float | None = None
    epsilon: float = 0.1
    renyi_order: float = 2.0
    divergence: str = "chi2"
    rgo_backend: str = "projection"
    seed: int = 0
    schedule_constant: float = 1.0
    rejection_cap: int = DEFAULT_REJECTION_CAP
    inandout_cap: int | None = None
    inandout_policy: str = "halt"

    def resolved(self, body: ConvexBody) -> "SamplerConfig":
        """Fill defaults that depend on the body and validate every field."""
        d = body.dimension
        cfg = replace(self)
        if cfg.eta is None:
            cfg.eta = default_eta(d)
        if not cfg.eta > 0:
            raise InvalidConfig("eta must be positive")
        if cfg.warm_start not in WARM_STARTS:
            raise InvalidConfig(f"warm_start must be one of {WARM_STARTS}")
        if cfg.rgo_backend not in BACKENDS:
            raise InvalidConfig(f"rgo_backend must be one of {BACKENDS}")
        if cfg.divergence not in ("renyi", "chi2"):
            raise InvalidConfig("divergence must be 'renyi' or 'chi2'")
        if cfg.inandout_policy not in ("halt", "restart"):
            raise InvalidConfig("inandout_policy must be 'halt' or 'restart'")
        if cfg.renyi_order < 1:
            raise InvalidConfig("renyi_order must be >= 1")
        if cfg.warm_start == "exact":
            if not body.has(EXACT_UNIFORM):
                raise CapabilityError(f"{body.kind} body has no exact-uniform sampler; use warm_start='unitball'")
            cfg.warmness = 1.0
        if cfg.warmness is not None and cfg.warmness < 1:
            raise InvalidConfig("warmness must be >= 1")
        needed = {"projection": PROJECTION, "separation": SEPARATION, "inandout": MEMBERSHIP}[cfg.rgo_backend]
        if not body.has(needed):
            raise CapabilityError(f"{body.kind} body has no {needed} oracle for the {cfg.rgo_backend} backend")
        if cfg.inandout_cap is None:
            cfg.inandout_cap = default_inandout_cap(d)
        if cfg.iterations is None:
            if cfg.warm_start == "point":
                raise InvalidConfig("a point-mass start is not warm; pass iterations explicitly")
            cfg.iterations = default_iterations(validate_geometry(body), cfg)
        if cfg.iterations < 0:
            raise InvalidConfig("iterations must be non-negative")
        return cfg


def default_iterations(geometry: GeometrySummary, config: SamplerConfig) -> int:
    """Iteration schedule ``c d^2 C q log(2 log warmness / eps)`` (Renyi) or ``c d^2 C log(2 (warmness^2+1) / eps)`` (chi^2).

    ``C`` is the LSI surrogate ``(2R)^2`` or the PI surrogate ``(2R)^2 log d``.
    When the warmness is unknown the volume-ratio bound ``R^d`` (valid for a start uniform on
    the unit ball) is used.
    """
    d = geometry.d
    warm = config.warmness if config.warmness is not None else geometry.circumradius**d
    eps = config.epsilon
    c = config.schedule_constant
    if eps <= 0:
        raise InvalidConfig("epsilon must be positive")
    if config.divergence == "renyi":
        if warm <= 1:
            raise InvalidConfig("the Renyi schedule needs warmness > 1 (its log must be positive)")
        k = c * d * d * geometry.lsi_heuristic * config.renyi_order * math.log(2.0 * math.log(warm) / eps)
    else:
        k = c * d * d * geometry.pi_heuristic * math.log(2.0 * (warm * warm + 1.0) / eps)
    return max(1, math.ceil(k))


@dataclass
class ChainState:
    x: np.ndarray
    y: np.ndarray | None = None
    iteration: int = 0
    outcome: RgoOutcome | None = None
    restarts: int = 0


def asf_step(state: ChainState, body: ConvexBody, config: SamplerConfig, rng: np.random.Generator) -> ChainState:
    """One forward Gaussian step followed by one restricted-Gaussian step."""
    eta = config.eta
    sd = math.sqrt(eta)
    d = body.dimension
    restarts = 0
    while True:
        y = state.x + sd * rng.standard_normal(d)
        if config.rgo_backend == "projection":
            out = rgo_projection(body, y, eta, rng, config.rejection_cap)
        elif config.rgo_backend == "separation":
            out = rgo_separation(body, y, eta, rng, config.rejection_cap)
        else:
            x, attempts = rgo_inandout(body, y, eta, config.inandout_cap, rng)
            if x is None:
                if config.inandout_policy == "halt":
                    raise InAndOutFailure(
                        f"no point of the body in {config.inandout_cap} Gaussian draws", iteration=state.iteration + 1
                    )
                restarts += 1
                if restarts > config.rejection_cap:
                    raise InAndOutFailure("restart budget exhausted", iteration=state.iteration + 1)
                continue
            out = RgoOutcome(x, attempts - 1, membership_calls=attempts)
        return ChainState(out.sample, y, state.iteration + 1, out, restarts)


@dataclass
class SamplerReport:
    """Iterates ``samples[0..k]`` (row 0 is the warm start) and per-step telemetry."""

    samples: np.ndarray
    rejections: np.ndarray
    projection_calls: np.ndarray
    separation_calls: np.ndarray
    membership_calls: np.ndarray
    radial_envelope_rejections: np.ndarray
    restarts: np.ndarray
    wall_clock: float
    config: SamplerConfig | None = None
    chain_index: int = 0
    warmness: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return int(self.rejections.shape[0])

    @property
    def mean_rejections(self) -> float:
        return float(self.rejections.mean()) if self.iterations else 0.0

    @property
    def max_rejections(self) -> int:
        return int(self.rejections.max()) if self.iterations else 0

    def oracle_totals(self) -> dict:
        return {
            "projection": int(self.projection_calls.sum()),
            "separation": int(self.separation_calls.sum()),
            "membership": int(self.membership_calls.sum()),
        }

    def summary(self) -> dict:
        return {
            "chain": self.chain_index,
            "iterations": self.iterations,
            "mean_rejections": self.mean_rejections,
            "max_rejections": self.max_rejections,
            "oracle_calls": self.oracle_totals(),
            "radial_envelope_rejections": int(self.radial_envelope_rejections.sum()),
            "inandout_restarts": int(self.restarts.sum()),
            "warmness": "unknown (>=1)" if self.warmness is None else self.warmness,
            "wall_clock_seconds": self.wall_clock,
        }


def chain_rng(seed: int, chain_index: int = 0) -> np.random.Generator:
    """Independent reproducible stream for ``(seed, chain_index)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(int(chain_index),))))


def warm_start_point(body: ConvexBody, config: SamplerConfig, rng: np.random.Generator) -> np.ndarray:
    if config.warm_start == "exact":
        return body.exact_uniform(rng)
    if config.warm_start == "unitball":
        # B(0,1) ⊆ the body under the inradius certificate
        w = rng.standard_normal(body.dimension)
        return w / np.linalg.norm(w) * rng.random() ** (1.0 / body.dimension)
    x = np.zeros(body.dimension) if config.start_point is None else np.asarray(config.start_point, dtype=float)
    if not body.contains(x):
        raise InvalidConfig("start point is not in the body")
    return x.copy()


def run_chain(body: ConvexBody, config: SamplerConfig, chain_index: int = 0) -> SamplerReport:
    """Run ``config.iterations`` proximal-sampler steps; deterministic in ``(seed, chain_index)``."""
    validate_geometry(body)
    cfg = config.resolved(body)
    rng = chain_rng(cfg.seed, chain_index)
    k = cfg.iterations
    d = body.dimension
    samples = np.empty((k + 1, d))
    tel = np.zeros((6, k), dtype=np.int64)
    t0 = time.perf_counter()
    state = ChainState(warm_start_point(body, cfg, rng))
    samples[0] = state.x
    for i in range(k):
        state = asf_step(state, body, cfg, rng)
        samples[i + 1] = state.x
        o = state.outcome
        tel[:, i] = (
            o.rejections,
            o.projection_calls,
            o.separation_calls,
            o.membership_calls,
            o.radial_envelope_rejections,
            state.restarts,
        )
    elapsed = time.perf_counter() - t0
    log.debug("chain %d: %d steps in %.3fs", chain_index, k, elapsed)
    return SamplerReport(samples, *tel, wall_clock=elapsed, config=cfg, chain_index=chain_index, warmness=cfg.warmness)


def run_chains(body: ConvexBody, config: SamplerConfig, chains: int, workers: int | None = None) -> list:
    """Independent chains, optionally on a thread pool; results are ordered by chain index."""
    if workers is None or workers <= 1 or chains <= 1:
        return [run_chain(body, config, i) for i in range(chains)]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda i: run_chain(body, config, i), range(chains)))


def final_iterates(body: ConvexBody, config: SamplerConfig, chains: int) -> np.ndarray:
    return np.array([run_chain(body, config, i).samples[-1] for i in range(chains)])


# baseline walks (membership oracle only)


def ball_walk_step(body: ConvexBody, x, delta: float, rng: np.random.Generator):
    """Propose uniformly from ``B(x, delta)``; move if the proposal is in the body."""
    d = body.dimension
    w = rng.standard_normal(d)
    y = x + delta * rng.random() ** (1.0 / d) * w / np.linalg.norm(w)
    return y if body.contains(y) else x


def chord(body: ConvexBody, x, direction, tol: float | None = None, max_iter: int = 200):
    """Endpoints ``(t_minus, t_plus)`` of ``{t : x + t direction ∈ the body}`` by bracketing and bisection."""
    if not body.contains(x):
        raise ValueError("chord start point is not in the body")
    R = body.circumradius
    tol = 1e-10 * R if tol is None else tol

    def endpoint(sign):
        inside, step = 0.0, R
        n = 0
        while body.contains(x + sign * step * direction):
            inside = step
            step *= 2.0
            n += 1
            if n > max_iter:
                raise ValueError("could not bracket the chord: unbounded body?")
        outside = step
        while outside - inside > tol:
            n += 1
            if n > max_iter:
                raise ValueError("chord bisection did not converge")
            mid = 0.5 * (inside + outside)
            if body.contains(x + sign * mid * direction):
                inside = mid
            else:
                outside = mid
        return inside

    return -endpoint(-1.0), endpoint(1.0)


def hit_and_run_step(body: ConvexBody, x, rng: np.random.Generator):
    """Uniform direction, then a uniform point on the chord through ``x``."""
    w = rng.standard_normal(body.dimension)
    theta = w / np.linalg.norm(w)
    lo, hi = chord(body, x, theta)
    return x + (lo + (hi - lo) * rng.random()) * theta


def run_walk(body: ConvexBody, walk: str, steps: int, x0, rng: np.random.Generator, delta: float | None = None):
    """Run ``ball`` or ``hitandrun`` for ``steps`` steps; returns iterates with ``x0`` in row 0."""
    d = body.dimension
    if delta is None:
        delta = 1.0 / math.sqrt(d)
    out = np.empty((steps + 1, d))
    x = np.asarray(x0, dtype=float)
    out[0] = x
    for i in range(steps):
        x = ball_walk_step(body, x, delta, rng) if walk == "ball" else hit_and_run_step(body, x, rng)
        out[i + 1] = x
    return out
