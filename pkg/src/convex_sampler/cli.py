"""Command-line front end.

Exit codes: 0 success, 1 runtime error or failed audit, 2 usage error,
3 body fails the unit-ball containment check, 4 a solver or rejection budget
was exhausted. Samples go to ``--out`` (or stdout); logs go to stderr, with
verbosity taken from ``CONVEX_SAMPLER_LOG``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from . import diagnostics
from .bodies import ConvexBody, load_body, validate_geometry
from .errors import A1Violation, BudgetExceeded, ConvexSamplerError, RejectionBudgetExceeded
from .sampler import SamplerConfig, chain_rng, run_chains, run_walk, warm_start_point

log = logging.getLogger("convex_sampler")

MODES = ("sample", "diagnose", "audit", "baseline-compare")
WARM_FLAGS = {"exact": "exact", "unitball": "unitball", "point": "point"}


@dataclass
class RunManifest:
    body_path: Path
    body: ConvexBody
    config: SamplerConfig
    chains: int = 1
    out: Path | None = None
    summary: Path | None = None
    report: Path | None = None
    mode: str = "sample"
    workers: int = 1
    extra: dict = field(default_factory=dict)


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be a positive number: {text!r}")
    return v


def _count(minimum):
    def parse(text):
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
        if v < minimum:
            raise argparse.ArgumentTypeError(f"must be >= {minimum}: {text!r}")
        return v

    return parse


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="convex-sampler", description="Uniform sampling from convex bodies.")
    p.add_argument("--body", required=True, help="body description (JSON)")
    p.add_argument("--rgo", choices=("projection", "separation", "inandout"), default="projection")
    p.add_argument("--eta", type=_positive_float, help="step size (default 1/d^2)")
    p.add_argument("--iters", type=_count(0), help="iterations per chain (default from the schedule)")
    p.add_argument("--chains", type=_count(1), default=1)
    p.add_argument("--seed", type=_count(0), default=0)
    p.add_argument("--warm", choices=tuple(WARM_FLAGS), default=None, help="warm start (default exact when available)")
    p.add_argument("--start", type=float, nargs="+", help="start point for --warm point")
    p.add_argument("--out", type=Path, help="output path (JSONL samples, or CSV for baseline-compare)")
    p.add_argument("--summary", type=Path, help="telemetry summary JSON (default <out>.summary.json)")
    p.add_argument("--report", type=Path, help="diagnostics/audit JSON (default <out>.diagnostics.json)")
    p.add_argument("--mode", choices=MODES, default="sample")
    p.add_argument("--rejection-cap", type=_count(1), default=10**6)
    p.add_argument("--inandout-cap", type=_count(0))
    p.add_argument("--inandout-policy", choices=("halt", "restart"), default="halt")
    p.add_argument("--epsilon", type=_positive_float, default=0.1)
    p.add_argument("--divergence", choices=("chi2", "renyi"), default="chi2")
    p.add_argument("--renyi-order", type=float, default=2.0)
    p.add_argument("--workers", type=_count(1), default=1, help="threads for running chains")
    return p


def parse_args(argv=None) -> RunManifest:
    parser = build_parser()
    args = parser.parse_args(argv)
    path = Path(args.body)
    if not path.is_file():
        parser.error(f"body file not found: {path}")
    try:
        body = load_body(path)
    except (ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
        parser.error(f"invalid body file {path}: {exc}")
    warm = args.warm or ("exact" if body.has("exact-uniform") else "unitball")
    start = None
    if args.start is not None:
        if len(args.start) != body.dimension:
            parser.error(f"--start needs {body.dimension} coordinates")
        start = np.array(args.start)
    config = SamplerConfig(
        eta=args.eta,
        iterations=args.iters,
        warm_start=warm,
        start_point=start,
        epsilon=args.epsilon,
        renyi_order=args.renyi_order,
        divergence=args.divergence,
        rgo_backend=args.rgo,
        seed=args.seed,
        rejection_cap=args.rejection_cap,
        inandout_cap=args.inandout_cap,
        inandout_policy=args.inandout_policy,
    )
    validate_geometry(body)
    try:
        config = config.resolved(body)
    except (ConvexSamplerError, ValueError) as exc:
        parser.error(str(exc))
    summary = args.summary
    report = args.report
    if args.out is not None:
        summary = summary or args.out.with_name(args.out.name + ".summary.json")
        report = report or args.out.with_name(args.out.name + ".diagnostics.json")
    return RunManifest(path, body, config, args.chains, args.out, summary, report, args.mode, args.workers)


def _records(reports):
    for rep in reports:
        for k in range(1, rep.samples.shape[0]):
            yield {
                "chain": rep.chain_index,
                "iter": k,
                "x": rep.samples[k].tolist(),
                "rejections": int(rep.rejections[k - 1]),
                "proj_calls": int(rep.projection_calls[k - 1]),
                "sep_calls": int(rep.separation_calls[k - 1]),
                "mem_calls": int(rep.membership_calls[k - 1]),
            }


def _write_samples(manifest, reports):
    fh = open(manifest.out, "w") if manifest.out is not None else sys.stdout
    try:
        for rec in _records(reports):
            fh.write(json.dumps(rec) + "\n")
    finally:
        if manifest.out is not None:
            fh.close()


def _summary(manifest, reports):
    rej = np.concatenate([r.rejections for r in reports]) if reports else np.zeros(0)
    return {
        "body": manifest.body.to_dict()["type"],
        "d": manifest.body.dimension,
        "rgo": manifest.config.rgo_backend,
        "eta": manifest.config.eta,
        "iterations": manifest.config.iterations,
        "chains": [r.summary() for r in reports],
        "mean_rejections": float(rej.mean()) if rej.size else 0.0,
        "max_rejections": int(rej.max()) if rej.size else 0,
    }


def _write_json(path, obj):
    if path is None:
        log.info("%s", json.dumps(obj))
        return
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)


def _pooled_audit_report(reports):
    return SimpleNamespace(rejections=np.concatenate([r.rejections for r in reports]))


def _diagnose(manifest, reports):
    body = manifest.body
    tests, trend = [], []
    # second half of every chain, pooled; iterates within a chain are correlated,
    # so these p-values are indicative only
    pooled = np.concatenate([r.samples[1 + r.samples.shape[0] // 2 :] for r in reports])
    try:
        tests += diagnostics.marginal_ks_tests(pooled, body)
    except TypeError:
        log.info("no analytic marginals for %s bodies; KS tests skipped", body.kind)
    if body.dimension <= 3:
        tests.append(diagnostics.grid_chi2_uniformity(pooled, body, 10 if body.dimension <= 2 else 5))
    if len(reports) >= 500:
        trend = diagnostics.divergence_trend(np.array([r.samples for r in reports]), body, 10 if body.dimension <= 2 else 4)
    audits = diagnostics.audit_rejection_bounds(_pooled_audit_report(reports), manifest.config, body.dimension)
    return tests, audits, trend


class CountingBody:
    """Membership-counting proxy around a body."""

    def __init__(self, body):
        self._body = body
        self.calls = 0

    def contains(self, x):
        x = np.asarray(x)
        self.calls += 1 if x.ndim == 1 else x.shape[0]
        return self._body.contains(x)

    def __getattr__(self, name):
        return getattr(self._body, name)


def _baseline_compare(manifest, reports):
    body = manifest.body
    steps = manifest.config.iterations
    try:
        target = diagnostics.analytic_marginals(body).second_moment
    except TypeError:
        target = math.nan
    rows = []

    def moment_error(X):
        return abs(float(np.mean(np.sum(X[1:] ** 2, axis=1))) - target) if X.shape[0] > 1 else math.nan

    asf = np.concatenate([r.samples for r in reports])
    calls = sum(sum(r.oracle_totals().values()) for r in reports)
    rows.append(("asf-" + manifest.config.rgo_backend, steps * len(reports), calls, moment_error(asf)))
    for walk in ("ball", "hitandrun"):
        counted = CountingBody(body)
        runs = []
        for c in range(manifest.chains):
            rng = chain_rng(manifest.config.seed + 1, c)
            x0 = warm_start_point(body, manifest.config, rng)
            runs.append(run_walk(counted, walk, steps, x0, rng))
        rows.append((walk, steps * manifest.chains, counted.calls, moment_error(np.concatenate(runs))))
    fh = open(manifest.out, "w", newline="") if manifest.out is not None else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(["walk", "steps", "oracle_calls", "moment_error"])
        for row in rows:
            w.writerow(row)
    finally:
        if manifest.out is not None:
            fh.close()


def run(manifest: RunManifest) -> int:
    reports = run_chains(manifest.body, manifest.config, manifest.chains, manifest.workers)
    if manifest.mode == "baseline-compare":
        _baseline_compare(manifest, reports)
        return 0
    if manifest.mode in ("sample", "diagnose"):
        _write_samples(manifest, reports)
        _write_json(manifest.summary, _summary(manifest, reports))
    if manifest.mode == "diagnose":
        tests, audits, trend = _diagnose(manifest, reports)
        _write_json(manifest.report, diagnostics.diagnostics_report(tests, audits, trend))
        return 0
    if manifest.mode == "audit":
        audits = diagnostics.audit_rejection_bounds(_pooled_audit_report(reports), manifest.config, manifest.body.dimension)
        payload = diagnostics.diagnostics_report(audits=audits)
        print(json.dumps(payload))
        if manifest.report is not None:
            _write_json(manifest.report, payload)
        return 0 if all(a.passed or a.skipped for a in audits) else 1
    return 0


def _configure_logging():
    level = os.environ.get("CONVEX_SAMPLER_LOG", "warn").lower()
    levels = {"debug": logging.DEBUG, "info": logging.INFO, "warn": logging.WARNING, "warning": logging.WARNING}
    logging.basicConfig(stream=sys.stderr, level=levels.get(level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _configure_logging()
    try:
        manifest = parse_args(argv)
        return run(manifest)
    except SystemExit as exc:
        return int(exc.code or 0)
    except A1Violation as exc:
        log.error("%s", exc)
        return 3
    except (BudgetExceeded, RejectionBudgetExceeded) as exc:
        log.error("%s", exc)
        return 4
    except (ConvexSamplerError, OSError, ValueError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
