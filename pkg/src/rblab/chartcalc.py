"""Pointwise Riemannian geometry of a metric given on a coordinate chart.

Everything is computed from jets of the metric components, so Christoffel
symbols, curvature and covariant derivatives are exact up to rounding.  The
work horse is :class:`LocalGeometry`, which evaluates a whole batch of points
at once; the module-level functions are thin per-operation wrappers that
return :class:`PointTensor` values.

Index conventions (all arrays carry the batch axis first):

* ``gamma[a, b, c]``      = Gamma^a_{bc}
* ``riemann[a, b, c, d]`` = R^a_{bcd}, with R(d_c, d_d) d_b = R^a_{bcd} d_a and
  R(X, Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z
* ``ricci[b, d]``         = R^a_{bad}
* a (1,1) tensor ``T[a, b]`` = T^a_b, acting as T(d_b) = T^a_b d_a
* ``cov11(T)[c, a, b]``   = (nabla_c T)^a_b, so (nabla T)(X, Y) = X^c Y^b (nabla_c T)^a_b d_a
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from . import jets as jm
from .errors import DegeneracyError, DomainError
from .jets import Jet

__all__ = [
    "Interval",
    "ChartMetric",
    "PointTensor",
    "LocalGeometry",
    "metric_at",
    "christoffel",
    "riemann",
    "ricci",
    "scalar_curvature",
    "ricci_operator",
    "grad_scalar",
    "hessian_scalar",
    "laplacian_scalar",
    "lie_derivative_metric",
    "divergence_vf",
    "covariant_derivative_11tensor",
    "contracted_bianchi_residual",
    "orthonormal_frame",
    "euclidean",
]

ScalarField = Callable[..., object]
VectorField = Callable[..., Sequence[object]]


@dataclass(frozen=True)
class Interval:
    lo: float = -np.inf
    hi: float = np.inf
    periodic: bool = False

    def contains(self, x: np.ndarray) -> np.ndarray:
        if self.periodic:
            return np.isfinite(x)
        return (x >= self.lo) & (x <= self.hi)


@dataclass
class ChartMetric:
    """A smooth symmetric-matrix-valued map on a coordinate box.

    ``components(x, t)`` receives a tuple of coordinates (floats, arrays or
    jets) and the time parameter, and returns an ``dim x dim`` nested
    sequence; entries may be plain constants.  Write it with the functions in
    :mod:`rblab.jets` so it works on both numbers and jets.
    """

    dim: int
    components: Callable[..., Sequence[Sequence[object]]]
    domain: tuple[Interval, ...] | None = None
    name: str = ""
    coords: tuple[str, ...] = ()

    def __post_init__(self):
        if self.domain is None:
            self.domain = tuple(Interval() for _ in range(self.dim))
        if len(self.domain) != self.dim:
            raise ValueError("domain must have one interval per coordinate")

    def check_points(self, points: np.ndarray) -> None:
        if points.shape[-1] != self.dim:
            raise DomainError(f"{self.name or 'metric'} expects {self.dim} coordinates, got {points.shape[-1]}")
        for k, iv in enumerate(self.domain):
            ok = iv.contains(points[..., k])
            if not np.all(ok):
                bad = points[np.argmin(ok)] if points.ndim > 1 else points
                raise DomainError(
                    f"point {list(np.atleast_1d(bad))} outside the domain of {self.name or 'metric'} "
                    f"(coordinate {k} must lie in [{iv.lo}, {iv.hi}])"
                )

    def matrix(self, points, t: float = 0.0) -> np.ndarray:
        """Plain float evaluation of g_ij at a batch of points (no checks)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        x = tuple(points[:, k] for k in range(self.dim))
        rows = self.components(x, t)
        out = np.empty((points.shape[0], self.dim, self.dim))
        for i in range(self.dim):
            for j in range(self.dim):
                out[:, i, j] = np.broadcast_to(np.asarray(rows[i][j], dtype=float), points.shape[:1])
        return out


@dataclass
class PointTensor:
    """Components of a tensor at one point (or a batch of points, leading axis)."""

    components: np.ndarray
    signature: tuple[int, int]
    point: np.ndarray = field(repr=False)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.components, dtype=dtype)

    def __getitem__(self, key):
        return self.components[key]

    @property
    def shape(self):
        return np.shape(self.components)


def euclidean(dim: int = 2) -> ChartMetric:
    eye = np.eye(dim)
    return ChartMetric(dim, lambda x, t: eye.tolist(), name=f"euclidean-{dim}")


# ---------------------------------------------------------------------------
# batched evaluation
# ---------------------------------------------------------------------------

def _check_positive(g0: np.ndarray, points: np.ndarray) -> None:
    n = g0.shape[-1]
    for k in range(1, n + 1):
        minors = np.linalg.det(g0[:, :k, :k])
        bad = ~(minors > 0)
        if np.any(bad):
            i = int(np.argmax(bad))
            raise DegeneracyError(k, points[i], float(minors[i]))


class LocalGeometry:
    """Jets of every curvature quantity at a batch of chart points.

    ``order`` is the number of metric derivatives carried.  Christoffel
    symbols need 1, curvature 2, derivatives of curvature 3; an extra order
    is needed for every further derivative of a derived quantity (e.g. the
    Laplacian of a trace-derived soliton function needs 4).
    """

    def __init__(self, metric: ChartMetric, points, t: float = 0.0, order: int = 3, check: bool = True):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if check:
            metric.check_points(pts)
        self.metric = metric
        self.points = pts
        self.t = t
        self.order = order
        self.n = metric.dim
        self.N = pts.shape[0]
        self.x = jm.variables(pts, order)
        self.space = self.x[0].space
        if check:
            _check_positive(self.g.value, pts)

    # -- field evaluation ---------------------------------------------------
    def scalar(self, f: ScalarField) -> Jet:
        return jm.as_jet(f(self.x, self.t), self.space, (self.N,))

    def vector(self, xi: VectorField) -> Jet:
        comps = xi(self.x, self.t)
        return jm.stack([jm.as_jet(c, self.space, (self.N,)) for c in comps], axis=-1)

    def operator(self, T) -> Jet:
        rows = T(self.x, self.t)
        return jm.stack(
            [jm.stack([jm.as_jet(c, self.space, (self.N,)) for c in row], axis=-1) for row in rows], axis=-2
        )

    # -- metric -------------------------------------------------------------
    @cached_property
    def g(self) -> Jet:
        rows = self.metric.components(self.x, self.t)
        return jm.stack(
            [jm.stack([jm.as_jet(c, self.space, (self.N,)) for c in row], axis=-1) for row in rows], axis=-2
        )

    @cached_property
    def ginv(self) -> Jet:
        return jm.jinv(self.g)

    @cached_property
    def dg(self) -> Jet:
        # dg[c, a, b] = d_c g_ab
        return jm.stack([self.g.d(c) for c in range(self.n)], axis=-3)

    @cached_property
    def gamma(self) -> Jet:
        dg = self.dg
        # lowered[d, b, c] = d_b g_dc + d_c g_db - d_d g_bc
        lowered = dg.transpose(1, 0, 2) + dg.transpose(1, 2, 0) - dg
        return jm.jeinsum("ad,dbc->abc", self.ginv * 0.5, lowered)

    @cached_property
    def dgamma(self) -> Jet:
        # dgamma[e, a, b, c] = d_e Gamma^a_bc
        return jm.stack([self.gamma.d(e) for e in range(self.n)], axis=-4)

    @cached_property
    def riemann(self) -> Jet:
        G, dG = self.gamma, self.dgamma
        # d_c Gamma^a_db - d_d Gamma^a_cb
        deriv = dG.transpose(1, 3, 0, 2) - dG.transpose(1, 3, 2, 0)
        quad = jm.jeinsum("ace,edb->abcd", G, G) - jm.jeinsum("ade,ecb->abcd", G, G)
        return deriv + quad

    @cached_property
    def riemann_lowered(self) -> Jet:
        return jm.jeinsum("ae,ebcd->abcd", self.g, self.riemann)

    @cached_property
    def ricci(self) -> Jet:
        return jm.jeinsum("abad->bd", self.riemann)

    @cached_property
    def scalar_curvature(self) -> Jet:
        return jm.jeinsum("ab,ab->", self.ginv, self.ricci)

    @cached_property
    def ricci_operator(self) -> Jet:
        return jm.jeinsum("ac,cb->ab", self.ginv, self.ricci)

    @cached_property
    def nabla_ricci_operator(self) -> Jet:
        return self.cov11(self.ricci_operator)

    # -- scalar fields --------------------------------------------------------
    def d(self, f: Jet) -> Jet:
        """Coordinate differential: ``df[..., a] = d_a f``."""
        return jm.stack([f.d(a) for a in range(self.n)], axis=-1)

    def grad(self, f: Jet) -> Jet:
        return jm.jeinsum("ab,b->a", self.ginv, self.d(f))

    def hess(self, f: Jet) -> Jet:
        df = self.d(f)
        ddf = jm.stack([df.d(a) for a in range(self.n)], axis=-2)
        return ddf - jm.jeinsum("cab,c->ab", self.gamma, df)

    def lap(self, f: Jet) -> Jet:
        return jm.jeinsum("ab,ab->", self.ginv, self.hess(f))

    # -- vector fields ------------------------------------------------------
    def dvec(self, v: Jet) -> Jet:
        """``dv[b, a] = d_b v^a``."""
        return jm.stack([v.d(b) for b in range(self.n)], axis=-2)

    def nabla(self, v: Jet) -> Jet:
        """``nv[b, a] = (nabla_b v)^a``."""
        return self.dvec(v) + jm.jeinsum("abe,e->ba", self.gamma, v)

    def lie_metric(self, v: Jet) -> Jet:
        dv = self.dvec(v)
        return (
            jm.jeinsum("k,kij->ij", v, self.dg)
            + jm.jeinsum("kj,ik->ij", self.g, dv)
            + jm.jeinsum("ik,jk->ij", self.g, dv)
        )

    def div(self, v: Jet) -> Jet:
        return jm.jeinsum("aa->", self.nabla(v))

    def lower(self, v: Jet) -> Jet:
        return jm.jeinsum("ab,b->a", self.g, v)

    def phi(self, v: Jet) -> Jet:
        """Skew operator with g(phi X, Y) = (1/2) d(eta)(X, Y), eta the dual 1-form of ``v``."""
        eta = self.lower(v)
        deta = self.d_covector(eta)  # deta[a, b] = d_a eta_b
        half = (deta - deta.transpose(1, 0)) * 0.5  # g(phi d_a, d_b)
        return jm.jeinsum("cb,ab->ca", self.ginv, half)

    def d_covector(self, w: Jet) -> Jet:
        return jm.stack([w.d(a) for a in range(self.n)], axis=-2)

    # -- (1,1) tensors ---------------------------------------------------------
    def cov11(self, T: Jet) -> Jet:
        dT = jm.stack([T.d(c) for c in range(self.n)], axis=-3)
        G = self.gamma
        return dT + jm.jeinsum("ace,eb->cab", G, T) - jm.jeinsum("ecb,ae->cab", G, T)

    def div11(self, T: Jet) -> Jet:
        """``sum_i (nabla_{e_i} T) e_i`` as a vector."""
        return jm.jeinsum("cb,cab->a", self.ginv, self.cov11(T))

    # -- norms on plain values -------------------------------------------------
    @cached_property
    def g0(self) -> np.ndarray:
        return self.g.value

    @cached_property
    def ginv0(self) -> np.ndarray:
        return np.linalg.inv(self.g0)

    def norm_vector(self, v: np.ndarray) -> np.ndarray:
        return np.sqrt(np.maximum(np.einsum("...ab,...a,...b->...", self.g0, v, v), 0.0))

    def norm_covariant2(self, E: np.ndarray) -> np.ndarray:
        gi = self.ginv0
        return np.sqrt(np.maximum(np.einsum("...ac,...bd,...ab,...cd->...", gi, gi, E, E), 0.0))

    def norm_operator(self, T: np.ndarray) -> np.ndarray:
        return np.sqrt(np.maximum(np.einsum("...ac,...bd,...ab,...cd->...", self.g0, self.ginv0, T, T), 0.0))

    def inner(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        return np.einsum("...ab,...a,...b->...", self.g0, u, v)


def orthonormal_frame(g: np.ndarray) -> np.ndarray:
    """Gram-Schmidt on the coordinate basis.

    Returns ``E`` with ``E[..., :, i]`` the coordinate components of ``e_i``.
    """
    g = np.asarray(g, dtype=float)
    n = g.shape[-1]
    E = np.zeros_like(g)
    for i in range(n):
        v = np.zeros(g.shape[:-1])
        v[..., i] = 1.0
        for j in range(i):
            e = E[..., :, j]
            v = v - np.einsum("...ab,...a,...b->...", g, v, e)[..., None] * e
        norm = np.sqrt(np.einsum("...ab,...a,...b->...", g, v, v))
        E[..., :, i] = v / norm[..., None]
    return E


# ---------------------------------------------------------------------------
# per-operation wrappers
# ---------------------------------------------------------------------------

def _prepare(m: ChartMetric, p, t: float, order: int):
    pts = np.asarray(p, dtype=float)
    single = pts.ndim == 1
    return LocalGeometry(m, np.atleast_2d(pts), t, order), single, pts


def _wrap(values: np.ndarray, single: bool, signature, pts) -> PointTensor:
    return PointTensor(values[0] if single else values, signature, pts)


def _scalar(values: np.ndarray, single: bool):
    return float(values[0]) if single else values


def metric_at(m: ChartMetric, p, t: float = 0.0) -> np.ndarray:
    geo, single, _ = _prepare(m, p, t, 0)
    return geo.g0[0] if single else geo.g0


def christoffel(m: ChartMetric, p, t: float = 0.0) -> PointTensor:
    geo, single, pts = _prepare(m, p, t, 1)
    return _wrap(geo.gamma.value, single, (1, 2), pts)


def riemann(m: ChartMetric, p, t: float = 0.0) -> PointTensor:
    geo, single, pts = _prepare(m, p, t, 2)
    return _wrap(geo.riemann.value, single, (1, 3), pts)


def ricci(m: ChartMetric, p, t: float = 0.0) -> PointTensor:
    geo, single, pts = _prepare(m, p, t, 2)
    return _wrap(geo.ricci.value, single, (0, 2), pts)


def scalar_curvature(m: ChartMetric, p, t: float = 0.0):
    geo, single, _ = _prepare(m, p, t, 2)
    return _scalar(geo.scalar_curvature.value, single)


def ricci_operator(m: ChartMetric, p, t: float = 0.0) -> PointTensor:
    geo, single, pts = _prepare(m, p, t, 2)
    return _wrap(geo.ricci_operator.value, single, (1, 1), pts)


def grad_scalar(m: ChartMetric, f: ScalarField, p, t: float = 0.0) -> PointTensor:
    geo, single, pts = _prepare(m, p, t, 1)
    return _wrap(geo.grad(geo.scalar(f)).value, single, (1, 0), pts)


def hessian_scalar(m: ChartMetric, f: ScalarField, p, t: float = 0.0) -> PointTensor:
    geo, single, pts = _prepare(m, p, t, 2)
    return _wrap(geo.hess(geo.scalar(f)).value, single, (0, 2), pts)


def laplacian_scalar(m: ChartMetric, f: ScalarField, p, t: float = 0.0):
    geo, single, _ = _prepare(m, p, t, 2)
    return _scalar(geo.lap(geo.scalar(f)).value, single)


def lie_derivative_metric(m: ChartMetric, xi: VectorField, p, t: float = 0.0) -> PointTensor:
    geo, single, pts = _prepare(m, p, t, 1)
    return _wrap(geo.lie_metric(geo.vector(xi)).value, single, (0, 2), pts)


def divergence_vf(m: ChartMetric, xi: VectorField, p, t: float = 0.0):
    geo, single, _ = _prepare(m, p, t, 1)
    return _scalar(geo.div(geo.vector(xi)).value, single)


def covariant_derivative_11tensor(m: ChartMetric, T, p, t: float = 0.0) -> PointTensor:
    """``(nabla_c T)^a_b`` for a (1,1) field ``T(x, t) -> rows``.

    Pass ``T="ricci"`` for the Ricci operator of ``m`` itself.
    """
    if isinstance(T, str):
        if T != "ricci":
            raise ValueError(f"unknown built-in operator {T!r}")
        geo, single, pts = _prepare(m, p, t, 3)
        return _wrap(geo.nabla_ricci_operator.value, single, (1, 2), pts)
    geo, single, pts = _prepare(m, p, t, 1)
    return _wrap(geo.cov11(geo.operator(T)).value, single, (1, 2), pts)


def contracted_bianchi_residual(m: ChartMetric, p, t: float = 0.0):
    """``|| (1/2) grad S - sum_i (nabla Q)(e_i, e_i) ||_g``."""
    geo, single, _ = _prepare(m, p, t, 3)
    return _scalar(bianchi_defect(geo), single)


def bianchi_defect(geo: LocalGeometry) -> np.ndarray:
    half_grad = geo.grad(geo.scalar_curvature).value * 0.5
    divq = geo.div11(geo.ricci_operator).value
    return geo.norm_vector(half_grad - divq)
