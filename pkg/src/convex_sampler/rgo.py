"""Restricted Gaussian oracles: exact samplers for ``N(y, eta I)`` conditioned on the body.

Three backends share the same contract and return an :class:`RgoOutcome`:

* :func:`rgo_projection` proposes from ``N(proj_K(y), eta I)`` and needs one
  projection per call;
* :func:`rgo_separation` proposes from a radial law around a near-minimiser
  ``xhat`` found by the ellipsoid method;
* :func:`rgo_inandout` redraws ``N(y, eta I)`` until it lands in the body (membership only,
  may fail).

Acceptance tests are evaluated in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bodies import ConvexBody, MEMBERSHIP, PROJECTION
from .cutting_plane import CuttingPlaneResult, minimize_quadratic
from .errors import CapabilityError, RejectionBudgetExceeded

DEFAULT_REJECTION_CAP = 10**6


@dataclass
class RgoOutcome:
    sample: np.ndarray
    rejections: int = 0
    projection_calls: int = 0
    separation_calls: int = 0
    membership_calls: int = 0
    radial_envelope_rejections: int = 0
    cutting_plane: CuttingPlaneResult | None = None


@dataclass
class PotentialBundle:
    """Potentials evaluated at one or many ``x``.

    ``theta`` holds the finite quadratic ``||x - y||^2 / (2 eta)``; the value of
    the regularised map is ``+inf`` wherever ``feasible`` is False.
    """

    theta: np.ndarray
    feasible: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    p3: np.ndarray


def potentials(x, y, xhat, proj, eta: float, d: int, body: ConvexBody | None = None) -> PotentialBundle:
    """Evaluate the four potentials used by the acceptance tests.

    ``x`` may carry leading batch axes. Without ``body`` every ``x`` is treated
    as feasible.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xhat = np.asarray(xhat, dtype=float)
    proj = np.asarray(proj, dtype=float)
    two_eta = 2.0 * eta
    b = math.sqrt(2.0 * eta / d)

    dx_proj = np.linalg.norm(x - proj, axis=-1)
    dx_hat = np.linalg.norm(x - xhat, axis=-1)
    d_proj_y = float(np.linalg.norm(proj - y))
    d_hat_y = float(np.linalg.norm(xhat - y))

    theta = np.sum((x - y) ** 2, axis=-1) / two_eta
    p1 = (dx_proj**2 + d_proj_y**2) / two_eta
    p2 = (dx_hat**2 + d_hat_y**2 - 2.0 * b * (dx_hat + d_hat_y) - 12.0 * eta / d) / two_eta
    p3 = ((dx_hat - b) ** 2 + (d_proj_y - 2.0 * b) ** 2 - 32.0 * eta / d) / two_eta
    feasible = np.ones(theta.shape, dtype=bool) if body is None else np.asarray(body.contains(x))
    return PotentialBundle(theta, feasible, p1, p2, p3)


def rgo_projection(
    body: ConvexBody,
    y,
    eta: float,
    rng: np.random.Generator,
    max_rejections: int = DEFAULT_REJECTION_CAP,
) -> RgoOutcome:
    """Rejection sampler with Gaussian proposal centred at ``proj_K(y)``.

    Accept ``X`` iff ``log U <= -<X - p, p - y> / eta`` and ``X`` is in the body.
    """
    if not body.has(PROJECTION):
        raise CapabilityError(f"{body.kind} body has no projection oracle")
    y = np.asarray(y, dtype=float)
    p = body.project(y)
    shift = p - y
    sd = math.sqrt(eta)
    d = body.dimension
    membership = 0
    for n in range(max_rejections + 1):
        x = p + sd * rng.standard_normal(d)
        log_ratio = -float((x - p) @ shift) / eta
        if math.log(rng.random()) <= log_ratio:
            membership += 1
            if body.contains(x):
                return RgoOutcome(x, n, projection_calls=1, membership_calls=membership)
    raise RejectionBudgetExceeded(f"projection RGO rejected {max_rejections + 1} proposals")


def radial_mode(d: int, eta: float) -> float:
    """Mode of ``p(r) ∝ r^(d-1) exp(-(r - b)^2 / (2 eta))`` with ``b = sqrt(2 eta / d)``."""
    b = math.sqrt(2.0 * eta / d)
    return 0.5 * (b + math.sqrt(b * b + 4.0 * eta * (d - 1)))


def radial_log_density(r, d: int, eta: float):
    """Unnormalised log density of the radial law; ``-inf`` for ``r <= 0`` (``r = 0`` allowed when d = 1)."""
    r = np.asarray(r, dtype=float)
    b = math.sqrt(2.0 * eta / d)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -((r - b) ** 2) / (2.0 * eta)
        if d > 1:
            out = out + (d - 1) * np.log(r)
    return np.where(r > 0, out, -np.inf)


def radial_envelope_log(r, d: int, eta: float):
    """Gaussian log-envelope touching the radial log density at its mode."""
    m = radial_mode(d, eta)
    return float(radial_log_density(m, d, eta)) - (np.asarray(r, dtype=float) - m) ** 2 / (2.0 * eta)


def sample_radial(
    d: int,
    eta: float,
    rng: np.random.Generator,
    max_rejections: int = DEFAULT_REJECTION_CAP,
) -> tuple[float, int]:
    """Exact draw from the radial law by mode-centred Gaussian-envelope rejection.

    The log density has second derivative ``-(d-1)/r^2 - 1/eta <= -1/eta``, so a
    Gaussian with variance ``eta`` at the mode dominates it. Returns
    ``(r, envelope_rejections)``.
    """
    m = radial_mode(d, eta)
    sd = math.sqrt(eta)
    b = math.sqrt(2.0 * eta / d)
    log_top = (d - 1) * math.log(m) - (m - b) ** 2 / (2.0 * eta) if d > 1 else 0.0
    for n in range(max_rejections + 1):
        r = m + sd * rng.standard_normal()
        if r <= 0.0:
            continue
        log_p = (d - 1) * math.log(r) - (r - b) ** 2 / (2.0 * eta) if d > 1 else -((r - b) ** 2) / (2.0 * eta)
        log_env = log_top - (r - m) ** 2 / (2.0 * eta)
        if math.log(rng.random()) <= log_p - log_env:
            return r, n
    raise RejectionBudgetExceeded(f"radial sampler rejected {max_rejections + 1} proposals")


def sample_radial_batch(d: int, eta: float, size: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`sample_radial`.

    Returns ``(r, envelope_rejections)`` where entry ``j`` counts the envelope
    draws rejected between accepted draws ``j - 1`` and ``j``, exactly as the
    sequential sampler would report them.
    """
    m = radial_mode(d, eta)
    sd = math.sqrt(eta)
    log_top = float(radial_log_density(m, d, eta))
    out = np.empty(size)
    env = np.empty(size, dtype=np.int64)
    filled = 0
    carry = 0
    while filled < size:
        need = size - filled
        r = m + sd * rng.standard_normal(2 * need + 16)
        u = rng.random(r.shape[0])
        with np.errstate(invalid="ignore", divide="ignore"):
            log_acc = radial_log_density(r, d, eta) - (log_top - (r - m) ** 2 / (2.0 * eta))
            idx = np.flatnonzero(np.log(u) <= log_acc)[:need]
        if idx.size:
            gaps = np.diff(idx, prepend=-1) - 1
            gaps[0] += carry
            out[filled : filled + idx.size] = r[idx]
            env[filled : filled + idx.size] = gaps
            filled += idx.size
            carry = r.shape[0] - idx[-1] - 1 if filled < size else 0
        else:
            carry += r.shape[0]
    return out, env


def sample_proposal_nu(xhat, d: int, eta: float, rng: np.random.Generator) -> tuple[np.ndarray, int]:
    """Draw ``X = xhat + r theta`` with density ∝ ``exp(-(||x-xhat||^2 - 2 b ||x-xhat||) / (2 eta))``.

    Returns ``(X, envelope_rejections)``.
    """
    w = rng.standard_normal(d)
    theta = w / np.linalg.norm(w)
    r, env = sample_radial(d, eta, rng)
    return np.asarray(xhat, dtype=float) + r * theta, env


def sample_proposal_nu_batch(xhat, d: int, eta: float, size: int, rng: np.random.Generator):
    """``size`` independent draws from the radial proposal; returns ``(X, r, envelope_rejections)``."""
    w = rng.standard_normal((size, d))
    w /= np.linalg.norm(w, axis=1, keepdims=True)
    r, env = sample_radial_batch(d, eta, size, rng)
    return np.asarray(xhat, dtype=float) + r[:, None] * w, r, env


def rgo_separation(
    body: ConvexBody,
    y,
    eta: float,
    rng: np.random.Generator,
    max_rejections: int = DEFAULT_REJECTION_CAP,
    gap_target: float | None = None,
    batch: int = 16,
) -> RgoOutcome:
    """Rejection sampler built on a separation oracle.

    One cutting-plane solve gives ``xhat``; proposals come from the radial law
    around ``xhat`` and ``X`` is accepted iff
    ``log U <= P2(X) - ||X - y||^2 / (2 eta)`` and ``X`` is in the body.

    Proposals are drawn in growing batches; the first accepted one is returned
    and telemetry counts only the proposals a one-at-a-time loop would have
    examined.
    """
    y = np.asarray(y, dtype=float)
    d = body.dimension
    cp = minimize_quadratic(body, y, eta, gap_target=gap_target)
    xhat = cp.xhat
    b = math.sqrt(2.0 * eta / d)
    two_eta = 2.0 * eta
    d_hat_y = float(np.linalg.norm(xhat - y))
    # P2 minus its ||X - xhat||-dependent part
    p2_const = d_hat_y**2 - 2.0 * b * d_hat_y - 12.0 * eta / d
    seen = envelope = membership = 0
    size = max(1, int(batch))
    while seen <= max_rejections:
        size = min(size, max_rejections + 1 - seen)
        x, r, env = sample_proposal_nu_batch(xhat, d, eta, size, rng)
        diff = x - y
        log_ratio = (r * r - 2.0 * b * r + p2_const - np.einsum("ij,ij->i", diff, diff)) / two_eta
        passed = np.log(rng.random(size)) <= log_ratio
        cand = np.flatnonzero(passed)
        inside = np.asarray(body.contains(x[cand])) if cand.size else np.zeros(0, dtype=bool)
        hits = cand[inside]
        if hits.size:
            i = int(hits[0])
            return RgoOutcome(
                x[i].copy(),
                seen + i,
                separation_calls=cp.separation_calls,
                membership_calls=membership + int(np.count_nonzero(passed[: i + 1])),
                radial_envelope_rejections=envelope + int(env[: i + 1].sum()),
                cutting_plane=cp,
            )
        seen += size
        membership += cand.size
        envelope += int(env.sum())
        size *= 2
    raise RejectionBudgetExceeded(f"separation RGO rejected {max_rejections + 1} proposals")


def rgo_separation_many(
    body: ConvexBody,
    y,
    eta: float,
    size: int,
    rng: np.random.Generator,
    gap_target: float | None = None,
    chunk: int = 1 << 16,
) -> tuple[np.ndarray, np.ndarray]:
    """``size`` independent draws from ``N(y, eta I)|_K`` for one fixed ``y``.

    Equivalent in law to ``size`` calls of :func:`rgo_separation`, since the
    ellipsoid solve is deterministic in ``y``; the solve runs once and proposals
    are streamed in chunks. Returns ``(samples, rejections)``.
    """
    y = np.asarray(y, dtype=float)
    d = body.dimension
    xhat = minimize_quadratic(body, y, eta, gap_target=gap_target).xhat
    b = math.sqrt(2.0 * eta / d)
    d_hat_y = float(np.linalg.norm(xhat - y))
    p2_const = d_hat_y**2 - 2.0 * b * d_hat_y - 12.0 * eta / d
    out = np.empty((size, d))
    rej = np.empty(size, dtype=np.int64)
    filled = carry = 0
    while filled < size:
        x, r, _ = sample_proposal_nu_batch(xhat, d, eta, chunk, rng)
        diff = x - y
        log_ratio = (r * r - 2.0 * b * r + p2_const - np.einsum("ij,ij->i", diff, diff)) / (2.0 * eta)
        cand = np.flatnonzero(np.log(rng.random(chunk)) <= log_ratio)
        hits = cand[np.asarray(body.contains(x[cand]), dtype=bool)] if cand.size else cand
        hits = hits[: size - filled]
        if hits.size:
            gaps = np.diff(hits, prepend=-1) - 1
            gaps[0] += carry
            out[filled : filled + hits.size] = x[hits]
            rej[filled : filled + hits.size] = gaps
            filled += hits.size
            carry = chunk - hits[-1] - 1
        else:
            carry += chunk
    return out, rej


def rgo_inandout(body: ConvexBody, y, eta: float, cap: int, rng: np.random.Generator):
    """Membership-only baseline.

    Draws up to ``cap`` points from ``N(y, eta I)`` and returns
    ``(first point in the body or None, attempts used)``.
    """
    if not body.has(MEMBERSHIP):
        raise CapabilityError(f"{body.kind} body has no membership oracle")
    cap = int(cap)
    if cap <= 0:
        return None, 0
    y = np.asarray(y, dtype=float)
    xs = y + math.sqrt(eta) * rng.standard_normal((cap, body.dimension))
    inside = np.asarray(body.contains(xs))
    hits = np.flatnonzero(inside)
    if hits.size == 0:
        return None, cap
    i = int(hits[0])
    return xs[i].copy(), i + 1


def default_inandout_cap(d: int) -> int:
    return math.ceil(d * d * math.log(d)) + 10 if d > 1 else 10
