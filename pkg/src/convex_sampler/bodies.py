"""Convex bodies exposed through membership, projection and separation oracles.

Every body is origin-centred in the sense that ``inradius`` certifies
the body contains ``B(0, inradius)`` and ``circumradius`` certifies it lies inside ``B(0, circumradius)``.
Oracles accept a single point of shape ``(d,)``; ``contains`` also accepts a
batch of shape ``(n, d)`` and returns a boolean array.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .errors import A1Violation, CapabilityError

MEMBERSHIP = "membership"
PROJECTION = "projection"
SEPARATION = "separation"
EXACT_UNIFORM = "exact-uniform"


class ConvexBody:
    """Base class. Subclasses implement the ``_oracle`` hooks they support."""

    kind = "body"
    capabilities: frozenset = frozenset()

    def __init__(self, dimension: int, inradius: float, circumradius: float):
        if int(dimension) < 1:
            raise ValueError(f"dimension must be positive, got {dimension}")
        if circumradius < inradius:
            raise ValueError("circumradius must be at least the inradius")
        self.dimension = int(dimension)
        self.inradius = float(inradius)
        self.circumradius = float(circumradius)

    @property
    def d(self) -> int:
        return self.dimension

    def has(self, capability: str) -> bool:
        return capability in self.capabilities

    def _require(self, capability: str):
        if capability not in self.capabilities:
            raise CapabilityError(f"{self.kind} body has no {capability} oracle")

    def _check_point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.dimension,):
            raise ValueError(f"expected points of dimension {self.dimension}, got shape {x.shape}")
        return x

    def contains(self, x):
        """Membership oracle; vectorised over leading axes."""
        x = self._check_point(x)
        out = self._contains(x)
        return bool(out) if x.ndim == 1 else out

    def project(self, y) -> np.ndarray:
        """Euclidean projection onto the body. Returns a copy of ``y`` when ``y`` is in the body."""
        self._require(PROJECTION)
        y = self._check_point(y)
        if y.ndim != 1:
            raise ValueError("project takes a single point")
        return self._project(y)

    def separate(self, x):
        """Separation oracle.

        Returns ``None`` when ``x`` is in the body, otherwise a unit vector ``g`` with
        ``<g, x - z> >= 0`` for every ``z`` in the body.
        """
        self._require(SEPARATION)
        x = self._check_point(x)
        if x.ndim != 1:
            raise ValueError("separate takes a single point")
        if self._contains(x):
            return None
        return self._separate(x)

    def exact_uniform(self, rng: np.random.Generator, size=None) -> np.ndarray:
        """Exact uniform draw(s) from the body, shape ``(d,)`` or ``(size, d)``."""
        self._require(EXACT_UNIFORM)
        return self._exact_uniform(rng, size)

    def minwidth(self):
        """Minimal width over unit directions, or ``None`` when not known analytically."""
        return None

    def to_dict(self) -> dict:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(d={self.dimension}, inradius={self.inradius:g}, R={self.circumradius:g})"


def _uniform_ball(rng, d, radius, size):
    n = 1 if size is None else int(size)
    w = rng.standard_normal((n, d))
    w /= np.linalg.norm(w, axis=1, keepdims=True)
    r = radius * rng.random(n) ** (1.0 / d)
    out = w * r[:, None]
    return out[0] if size is None else out


class Ball(ConvexBody):
    kind = "ball"
    capabilities = frozenset({MEMBERSHIP, PROJECTION, SEPARATION, EXACT_UNIFORM})

    def __init__(self, d: int, radius: float = 1.0):
        if radius <= 0:
            raise ValueError("radius must be positive")
        super().__init__(d, radius, radius)
        self.radius = float(radius)

    def _contains(self, x):
        return np.einsum("...i,...i->...", x, x) <= self.radius**2

    def _project(self, y):
        n = math.sqrt(float(y @ y))
        if n <= self.radius:
            return y.copy()
        scale = self.radius / n
        x = y * scale
        # rounding can leave x a hair outside; step the scale down until it is a member
        while not self._contains(x):
            scale = np.nextafter(scale, 0.0)
            x = y * scale
        return x

    def _separate(self, x):
        return x / np.linalg.norm(x)

    def _exact_uniform(self, rng, size):
        return _uniform_ball(rng, self.dimension, self.radius, size)

    def minwidth(self):
        return 2.0 * self.radius

    def to_dict(self):
        return {"type": "ball", "d": self.dimension, "radius": self.radius}


class Box(ConvexBody):
    """Axis-aligned box ``[lo_1, hi_1] x ... x [lo_d, hi_d]``."""

    kind = "box"
    capabilities = frozenset({MEMBERSHIP, PROJECTION, SEPARATION, EXACT_UNIFORM})

    def __init__(self, bounds):
        bounds = np.asarray(bounds, dtype=float)
        if bounds.ndim != 2 or bounds.shape[1] != 2:
            raise ValueError("bounds must have shape (d, 2)")
        lo, hi = bounds[:, 0].copy(), bounds[:, 1].copy()
        if np.any(hi <= lo):
            raise ValueError("every interval needs lo < hi")
        # negative inradius means the origin is outside; validation rejects it
        inradius = float(min(np.min(-lo), np.min(hi)))
        circumradius = float(np.linalg.norm(np.maximum(np.abs(lo), np.abs(hi))))
        super().__init__(len(lo), inradius, circumradius)
        self.lo, self.hi = lo, hi

    @classmethod
    def cube(cls, d: int, half_width: float = 1.0):
        return cls([[-half_width, half_width]] * d)

    def _contains(self, x):
        return np.all((x >= self.lo) & (x <= self.hi), axis=-1)

    def _project(self, y):
        return np.clip(y, self.lo, self.hi)

    def _separate(self, x):
        over = x - self.hi
        under = self.lo - x
        i_over, i_under = int(np.argmax(over)), int(np.argmax(under))
        g = np.zeros(self.dimension)
        if over[i_over] >= under[i_under]:
            g[i_over] = 1.0
        else:
            g[i_under] = -1.0
        return g

    def _exact_uniform(self, rng, size):
        shape = (self.dimension,) if size is None else (int(size), self.dimension)
        return self.lo + (self.hi - self.lo) * rng.random(shape)

    def minwidth(self):
        return float(np.min(self.hi - self.lo))

    def to_dict(self):
        return {"type": "box", "d": self.dimension, "bounds": np.column_stack([self.lo, self.hi]).tolist()}


class Polytope(ConvexBody):
    """Halfspace polytope ``{x : A x <= b}`` with membership and separation only.

    The inradius is certified as ``min_i b_i / ||a_i||``. The circumradius is
    taken from the caller; an overestimate is safe.
    """

    kind = "polytope"
    capabilities = frozenset({MEMBERSHIP, SEPARATION})

    def __init__(self, A, b, circumradius: float):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.asarray(b, dtype=float).reshape(-1)
        if A.shape[0] != b.shape[0]:
            raise ValueError("A and b disagree on the number of rows")
        norms = np.linalg.norm(A, axis=1)
        if np.any(norms == 0):
            raise ValueError("A has a zero row")
        inradius = float(np.min(b / norms))
        super().__init__(A.shape[1], inradius, float(circumradius))
        self.A, self.b = A, b
        self._row_norms = norms

    def _contains(self, x):
        return np.all(x @ self.A.T <= self.b, axis=-1)

    def _separate(self, x):
        i = int(np.argmax(self.A @ x - self.b))
        return self.A[i] / self._row_norms[i]

    def to_dict(self):
        return {
            "type": "polytope",
            "d": self.dimension,
            "A": self.A.tolist(),
            "b": self.b.tolist(),
            "circumradius": self.circumradius,
        }


class Ellipsoid(ConvexBody):
    """Origin-centred axis-aligned ellipsoid ``sum (x_i / a_i)^2 <= 1``."""

    kind = "ellipsoid"
    capabilities = frozenset({MEMBERSHIP, PROJECTION, SEPARATION})

    def __init__(self, semi_axes):
        a = np.asarray(semi_axes, dtype=float).reshape(-1)
        if np.any(a <= 0):
            raise ValueError("semi-axes must be positive")
        super().__init__(len(a), float(a.min()), float(a.max()))
        self.semi_axes = a
        self._a2 = a * a

    def _contains(self, x):
        return np.einsum("...i,i->...", x * x, 1.0 / self._a2) <= 1.0

    def _project(self, y):
        if self._contains(y):
            return y.copy()
        ay = self.semi_axes * y
        a2 = self._a2

        # x(t) = a^2 y / (a^2 + t); find t >= 0 with x(t) on the boundary
        def phi(t):
            return float(np.sum((ay / (a2 + t)) ** 2)) - 1.0

        t = brentq(phi, 0.0, float(np.linalg.norm(ay)), xtol=1e-15, rtol=4 * np.finfo(float).eps)
        x = a2 * y / (a2 + t)
        while not self._contains(x):
            t = np.nextafter(t, np.inf)
            x = a2 * y / (a2 + t)
        return x

    def _separate(self, x):
        g = x / self._a2
        return g / np.linalg.norm(g)

    def minwidth(self):
        return 2.0 * float(self.semi_axes.min())

    def to_dict(self):
        return {"type": "ellipsoid", "d": self.dimension, "semi_axes": self.semi_axes.tolist()}


@dataclass(frozen=True)
class GeometrySummary:
    d: int
    inradius: float
    circumradius: float
    diameter_bound: float
    lsi_heuristic: float
    pi_heuristic: float
    minwidth: float | None
    gamma: float | None

    def to_dict(self):
        return dict(self.__dict__)


def validate_geometry(body: ConvexBody) -> GeometrySummary:
    """Check that the body contains ``B(0,1)`` and summarise the geometry used for step-size heuristics.

    ``lsi_heuristic`` is ``D^2`` and ``pi_heuristic`` is ``D^2 log d`` with the
    diameter bound ``D = 2R``; both are surrogates with unknown constants.
    """
    if body.inradius < 1.0:
        raise A1Violation(f"certified inradius {body.inradius:g} < 1: B(0,1) is not certified inside the body")
    R = body.circumradius
    D = 2.0 * R
    width = body.minwidth()
    return GeometrySummary(
        d=body.dimension,
        inradius=body.inradius,
        circumradius=R,
        diameter_bound=D,
        lsi_heuristic=D * D,
        pi_heuristic=D * D * math.log(body.dimension),
        minwidth=width,
        gamma=None if width is None else R / width,
    )


def body_from_dict(desc: dict) -> ConvexBody:
    kind = desc.get("type")
    d = desc.get("d")
    if kind == "ball":
        body = Ball(int(d), float(desc.get("radius", 1.0)))
    elif kind == "box":
        body = Box(desc["bounds"])
    elif kind == "polytope":
        if "circumradius" not in desc:
            raise ValueError("polytope bodies need a circumradius")
        body = Polytope(desc["A"], desc["b"], float(desc["circumradius"]))
    elif kind == "ellipsoid":
        body = Ellipsoid(desc["semi_axes"])
    else:
        raise ValueError(f"unknown body type {kind!r}")
    if d is not None and int(d) != body.dimension:
        raise ValueError(f"declared d={d} but body has dimension {body.dimension}")
    return body


def load_body(path) -> ConvexBody:
    with open(Path(path)) as fh:
        return body_from_dict(json.load(fh))


def save_body(body: ConvexBody, path):
    with open(Path(path), "w") as fh:
        json.dump(body.to_dict(), fh)
