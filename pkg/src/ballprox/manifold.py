"""Hadamard-manifold geometry kernel.

Two model spaces are provided: flat Euclidean space and hyperbolic space in
the hyperboloid (Minkowski) model.  Points and tangent vectors are thin
wrappers around numpy arrays; every operation is a pure function of its
inputs, exposed as a method on a :class:`ManifoldHandle`.

Hyperboloid conventions: a point is an ambient vector ``x`` of length
``dim + 1`` on the upper sheet, i.e. ``<x, x>_L = -1`` with ``x[0] > 0``,
where ``<u, v>_L = -u[0] v[0] + sum(u[1:] * v[1:])`` is the Minkowski form.
Tangent vectors at ``x`` are Minkowski-orthogonal to ``x``, and the
restriction of the Minkowski form to a tangent space is positive definite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EUCLIDEAN = "euclidean"
HYPERBOLOID = "hyperboloid"

# Absolute tolerance for the hyperboloid model constraints.  Hyperboloid
# coordinates grow like cosh(d), so constraint residuals scale like
# eps * cosh(d)^2: the model is reliable for moderate distances (d <~ 7).
MODEL_TOL = 1e-10

# Below this distance log_map returns the zero tangent (avoids 0/0 in the
# unit-direction computation).
COINCIDENT_TOL = 1e-12

# cosh overflows near 710; refuse tangents long before that.
_MAX_TANGENT_NORM = 350.0


@dataclass(frozen=True, slots=True)
class Point:
    """A manifold point; ``coords`` has length dim (Euclidean) or dim + 1
    (hyperboloid ambient coordinates)."""

    coords: np.ndarray


@dataclass(frozen=True, slots=True)
class Tangent:
    """A tangent vector ``vec`` attached to the point ``base``."""

    base: Point
    vec: np.ndarray


def _minkowski(u: np.ndarray, v: np.ndarray) -> float:
    return float(u[1:] @ v[1:] - u[0] * v[0])


def _acosh1p(h: float) -> float:
    """arccosh(1 + h) for h >= 0, accurate down to h = 0."""
    return math.log1p(h + math.sqrt(h * (h + 2.0)))


@dataclass(frozen=True)
class ManifoldHandle:
    """Handle for one model geometry.

    ``kind`` is ``"euclidean"`` or ``"hyperboloid"``; ``dim`` is the
    intrinsic dimension (>= 1).  All operations reject points or tangents
    that do not belong to this handle.
    """

    kind: str
    dim: int

    def __post_init__(self) -> None:
        if self.kind not in (EUCLIDEAN, HYPERBOLOID):
            raise ValueError(f"unknown manifold kind: {self.kind!r}")
        if self.dim < 1:
            raise ValueError("manifold dimension must be >= 1")

    # -- constructors ------------------------------------------------------

    @classmethod
    def euclidean(cls, dim: int) -> "ManifoldHandle":
        return cls(EUCLIDEAN, dim)

    @classmethod
    def hyperboloid(cls, dim: int) -> "ManifoldHandle":
        return cls(HYPERBOLOID, dim)

    @property
    def ambient_dim(self) -> int:
        return self.dim if self.kind == EUCLIDEAN else self.dim + 1

    # -- validation --------------------------------------------------------

    def point(self, coords) -> Point:
        """Validate raw coordinates and wrap them as a Point."""
        c = np.asarray(coords, dtype=float)
        if c.shape != (self.ambient_dim,):
            raise ValueError(
                f"expected coordinate vector of length {self.ambient_dim}, "
                f"got shape {c.shape}"
            )
        if not np.all(np.isfinite(c)):
            raise ValueError("point coordinates must be finite")
        p = Point(c.copy())
        if self.kind == HYPERBOLOID:
            self._check_point(p)
        return p

    def tangent(self, base: Point, vec) -> Tangent:
        """Validate a raw vector as a tangent at ``base``."""
        self._check_point(base)
        v = np.asarray(vec, dtype=float)
        if v.shape != (self.ambient_dim,):
            raise ValueError(
                f"expected tangent vector of length {self.ambient_dim}, "
                f"got shape {v.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("tangent coordinates must be finite")
        t = Tangent(base, v.copy())
        if self.kind == HYPERBOLOID:
            self._check_tangent_constraint(t)
        return t

    def zero_tangent(self, base: Point) -> Tangent:
        self._check_point(base)
        return Tangent(base, np.zeros(self.ambient_dim))

    def _check_point(self, p: Point) -> None:
        c = p.coords
        if c.shape != (self.ambient_dim,):
            raise ValueError(
                f"point has ambient length {c.shape}, expected "
                f"({self.ambient_dim},) for {self.kind} dim {self.dim}"
            )
        if self.kind == HYPERBOLOID:
            if c[0] <= 0.0:
                raise ValueError("hyperboloid point must be on the upper sheet")
            residual = _minkowski(c, c) + 1.0
            if abs(residual) > MODEL_TOL:
                raise ValueError(
                    f"hyperboloid constraint violated: <x,x>_L + 1 = {residual:.3e}"
                )

    def _check_tangent_constraint(self, t: Tangent) -> None:
        if abs(_minkowski(t.base.coords, t.vec)) > MODEL_TOL:
            raise ValueError("tangent is not Minkowski-orthogonal to its base")

    def _check_based(self, t: Tangent, p: Point) -> None:
        if t.base is not p and not np.array_equal(t.base.coords, p.coords):
            raise ValueError("tangent is based at a different point")

    # -- core operations ---------------------------------------------------

    def distance(self, p: Point, q: Point) -> float:
        """Geodesic distance, equal to ``norm(log_map(p, q))``."""
        self._check_point(p)
        self._check_point(q)
        if self.kind == EUCLIDEAN:
            return float(np.linalg.norm(p.coords - q.coords))
        diff = p.coords - q.coords
        # -<p,q>_L = 1 + <p-q, p-q>_L / 2, exact on the model surface; this
        # form avoids the cancellation of arccosh near 1.
        h = 0.5 * _minkowski(diff, diff)
        if h <= 0.0:
            return 0.0
        return _acosh1p(h)

    def inner(self, u: Tangent, v: Tangent) -> float:
        """Riemannian metric on the common tangent space of u and v."""
        self._check_based(v, u.base)
        if self.kind == EUCLIDEAN:
            return float(u.vec @ v.vec)
        return _minkowski(u.vec, v.vec)

    def norm(self, u: Tangent) -> float:
        if self.kind == EUCLIDEAN:
            return float(np.linalg.norm(u.vec))
        return math.sqrt(max(_minkowski(u.vec, u.vec), 0.0))

    def exp_map(self, p: Point, v: Tangent) -> Point:
        """Endpoint of the geodesic leaving p with velocity v."""
        self._check_point(p)
        self._check_based(v, p)
        if self.kind == EUCLIDEAN:
            return Point(p.coords + v.vec)
        n = self.norm(v)
        if n == 0.0:
            return p
        if n > _MAX_TANGENT_NORM:
            raise ValueError(f"tangent norm {n:.3e} exceeds the supported range")
        x = math.cosh(n) * p.coords + (math.sinh(n) / n) * v.vec
        # Renormalize onto the model surface to suppress drift.
        x = x / math.sqrt(max(-_minkowski(x, x), np.finfo(float).tiny))
        return Point(x)

    def log_map(self, p: Point, q: Point) -> Tangent:
        """Inverse of exp_map: the velocity at p of the geodesic to q."""
        self._check_point(p)
        self._check_point(q)
        if self.kind == EUCLIDEAN:
            return Tangent(p, q.coords - p.coords)
        diff = p.coords - q.coords
        h = 0.5 * _minkowski(diff, diff)
        if h <= 0.0:
            return Tangent(p, np.zeros(self.ambient_dim))
        d = _acosh1p(h)
        if d < COINCIDENT_TOL:
            return Tangent(p, np.zeros(self.ambient_dim))
        # u = q - beta p with beta = -<p,q>_L = 1 + h is tangent at p and has
        # Minkowski norm sinh(d) = sqrt(h (h + 2)).
        u = (q.coords - p.coords) - h * p.coords
        # Project out the residual base component to keep orthogonality exact.
        u = u + _minkowski(u, p.coords) * p.coords
        nu = math.sqrt(h * (h + 2.0))
        return Tangent(p, (d / nu) * u)

    def geodesic_point(self, p: Point, q: Point, s: float) -> Point:
        """Point a fraction ``s`` of the way along the geodesic from p to q."""
        if not 0.0 <= s <= 1.0:
            raise ValueError(f"interpolation parameter must be in [0, 1], got {s}")
        if s == 0.0:
            self._check_point(p)
            self._check_point(q)
            return p
        if s == 1.0:
            self._check_point(p)
            self._check_point(q)
            return q
        v = self.log_map(p, q)
        return self.exp_map(p, Tangent(p, s * v.vec))

    def project_to_ball(self, center: Point, radius: float, q: Point) -> Point:
        """Metric projection of q onto the closed ball around ``center``.

        Interior points are returned unchanged; exterior points are pulled
        back along the geodesic from the center, landing on the sphere of
        the given radius.
        """
        if radius <= 0.0:
            raise ValueError("ball radius must be positive")
        d = self.distance(center, q)
        if d <= radius:
            return q
        v = self.log_map(center, q)
        return self.exp_map(center, Tangent(center, (radius / d) * v.vec))
