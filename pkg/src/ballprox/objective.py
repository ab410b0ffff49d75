"""Objective oracles and benchmark problem generators.

A :class:`ProblemInstance` bundles value and Riemannian-gradient oracles with
optional metadata (known optimum, minimizer, smoothness constant).  Shipped
generators: seeded strongly convex quadratics on Euclidean space and weighted
geodesic-mean problems on any supported geometry.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .manifold import EUCLIDEAN, HYPERBOLOID, ManifoldHandle, Point, Tangent


@dataclass(frozen=True)
class QuadraticSpec:
    """Dense symmetric positive definite quadratic ``f(x) = x' A x / 2``.

    ``matrix`` is assembled as ``U diag(eigenvalues) U'`` where ``U`` is the
    seeded orthogonal factor stored in ``basis``.
    """

    matrix: np.ndarray
    eigenvalues: np.ndarray
    basis: np.ndarray
    seed: int

    def __post_init__(self) -> None:
        a = self.matrix
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("quadratic matrix must be square")
        if np.max(np.abs(a - a.T)) > 1e-12:
            raise ValueError("quadratic matrix must be symmetric within 1e-12")
        if np.min(self.eigenvalues) <= 0.0:
            raise ValueError("quadratic eigenvalues must be positive")

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class ProblemInstance:
    """Objective oracle with optional solution metadata.

    Oracles are pure functions; an instance is immutable and safe to share.
    When the minimizer ``p_star`` is supplied its gradient must vanish (norm
    <= 1e-8), and ``f_star`` must match the value there within 1e-10.
    """

    manifold: ManifoldHandle
    value_oracle: Callable[[Point], float]
    gradient_oracle: Callable[[Point], Tangent]
    label: str
    f_star: Optional[float] = None
    p_star: Optional[Point] = None
    lipschitz_L: Optional[float] = None
    quadratic: Optional[QuadraticSpec] = None
    descriptor: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.p_star is not None:
            g = self.gradient_oracle(self.p_star)
            if self.manifold.norm(g) > 1e-8:
                raise ValueError("gradient does not vanish at the declared minimizer")
            if self.f_star is not None:
                v = self.value_oracle(self.p_star)
                if abs(v - self.f_star) > 1e-10:
                    raise ValueError("declared optimal value disagrees with the oracle")


def quadratic_problem(spec: QuadraticSpec, label: str = "") -> ProblemInstance:
    """Wrap an explicit quadratic as a problem instance on Euclidean space."""
    n = spec.n
    m = ManifoldHandle.euclidean(n)
    a = spec.matrix

    def value(p: Point) -> float:
        return 0.5 * float(p.coords @ (a @ p.coords))

    def gradient(p: Point) -> Tangent:
        return Tangent(p, a @ p.coords)

    eigs = spec.eigenvalues
    return ProblemInstance(
        manifold=m,
        value_oracle=value,
        gradient_oracle=gradient,
        label=label or f"quadratic-n{n}-seed{spec.seed}",
        f_star=0.0,
        p_star=Point(np.zeros(n)),
        lipschitz_L=float(np.max(eigs)),
        quadratic=spec,
        descriptor={
            "kind": "quadratic",
            "dim": n,
            "eig_lo": float(np.min(eigs)),
            "eig_hi": float(np.max(eigs)),
            "seed": spec.seed,
        },
    )


def make_quadratic(n: int, eig_lo: float, eig_hi: float, seed: int) -> ProblemInstance:
    """Seeded benchmark quadratic with eigenvalues equally spaced in
    ``[eig_lo, eig_hi]`` and a random orthogonal eigenbasis.

    The basis comes from the QR factorization of a seeded standard-normal
    matrix with the sign of the R diagonal fixed, which makes the instance
    deterministic per seed.
    """
    if n < 1:
        raise ValueError("dimension must be >= 1")
    if eig_lo <= 0.0:
        raise ValueError("eigenvalue range must be positive")
    if eig_lo > eig_hi:
        raise ValueError("eigenvalue range is empty")
    eigs = np.linspace(eig_lo, eig_hi, n)
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, n))
    q, r = np.linalg.qr(g)
    q = q * np.sign(np.diag(r))
    a = (q * eigs) @ q.T
    a = 0.5 * (a + a.T)
    spec = QuadraticSpec(matrix=a, eigenvalues=eigs, basis=q, seed=seed)
    return quadratic_problem(spec)


def make_frechet_mean(
    m: ManifoldHandle,
    anchors: Sequence[Point],
    weights: Sequence[float],
) -> ProblemInstance:
    """Weighted geodesic mean: ``f(p) = sum_i w_i d^2(p, a_i) / 2``.

    The gradient is ``-sum_i w_i log_p(a_i)``.  With exactly two anchors of
    equal weight the minimizer is the geodesic midpoint and is recorded.
    """
    if len(anchors) != len(weights):
        raise ValueError("anchors and weights must have the same length")
    if len(anchors) == 0:
        raise ValueError("at least one anchor is required")
    w = np.asarray(weights, dtype=float)
    if np.any(w <= 0.0):
        raise ValueError("weights must be positive")
    if abs(float(w.sum()) - 1.0) > 1e-9:
        raise ValueError("weights must sum to 1")
    for a in anchors:
        m._check_point(a)
    anchors = list(anchors)

    def value(p: Point) -> float:
        return 0.5 * sum(wi * m.distance(p, ai) ** 2 for wi, ai in zip(w, anchors))

    def gradient(p: Point) -> Tangent:
        vec = np.zeros(m.ambient_dim)
        for wi, ai in zip(w, anchors):
            vec -= wi * m.log_map(p, ai).vec
        return Tangent(p, vec)

    p_star = None
    f_star = None
    if len(anchors) == 2 and abs(w[0] - 0.5) <= 1e-12 and abs(w[1] - 0.5) <= 1e-12:
        p_star = m.geodesic_point(anchors[0], anchors[1], 0.5)
        f_star = value(p_star)

    return ProblemInstance(
        manifold=m,
        value_oracle=value,
        gradient_oracle=gradient,
        label=f"frechet-{m.kind}-dim{m.dim}-k{len(anchors)}",
        f_star=f_star,
        p_star=p_star,
        quadratic=None,
        descriptor={
            "kind": "frechet",
            "manifold": m.kind,
            "dim": m.dim,
            "anchors": [a.coords.tolist() for a in anchors],
            "weights": w.tolist(),
        },
    )


def initial_point(problem: ProblemInstance, seed: int) -> Point:
    """Deterministic starting point: coordinates i.i.d. uniform in [-3, 3].

    On the hyperboloid the uniform draw fills the spatial coordinates of a
    tangent vector at the apex, which is then mapped onto the surface.
    """
    m = problem.manifold
    rng = np.random.default_rng(seed)
    u = rng.uniform(-3.0, 3.0, m.dim)
    if m.kind == EUCLIDEAN:
        return Point(u)
    apex = np.zeros(m.dim + 1)
    apex[0] = 1.0
    base = Point(apex)
    vec = np.concatenate(([0.0], u))
    return m.exp_map(base, Tangent(base, vec))
