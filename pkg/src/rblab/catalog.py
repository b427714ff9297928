"""Closed-form soliton constructions and test inputs, each as a ``SolitonData``.

Field callables take ``(x, t)`` with ``x`` a tuple of coordinates (floats,
arrays or jets) so the same code serves plain evaluation and the jet engine.
"""
from __future__ import annotations

import inspect
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate as _quad

from . import jets as jm
from .chartcalc import ChartMetric, Interval
from .errors import DomainError, ParameterError
from .jets import Jet
from .soliton import SOLVE, SolitonData

__all__ = [
    "sn_cn",
    "hamilton_cigar",
    "cigar_almost_rb",
    "cigar_christoffel_closed_form",
    "cigar_lambda_closed_form",
    "warped_product_2d",
    "WarpedData",
    "SphereConstruction",
    "round_sphere_soliton",
    "sphere_chart",
    "perturbed_sphere_metric",
    "perturbed_sphere",
    "smooth_perturbed_sphere_metric",
    "sphere_field",
    "flat_torus",
    "torus_field",
    "einstein_trivial",
    "EXAMPLES",
    "build_example",
    "example_parameters",
]

POLE_OFFSET = 1e-3


# ---------------------------------------------------------------------------
# sn_k / cn_k
# ---------------------------------------------------------------------------

def _sn_cn(k: float, t):
    if k == 0:
        if isinstance(t, Jet):
            return t * 1.0, jm.as_jet(1.0, t.space, t.shape)
        return t + 0.0, np.ones_like(t)
    w = math.sqrt(abs(k))
    if k < 0:
        return jm.sinh(t * w) * (1.0 / w), jm.cosh(t * w)
    return jm.sin(t * w) * (1.0 / w), jm.cos(t * w)


def sn_cn(k: float, t):
    """Solutions of y'' + k y = 0 with (y, y')(0) = (0, 1), and their derivative.

    Accepts floats, arrays or jets; floats come back as floats.
    """
    if isinstance(t, Jet):
        return _sn_cn(float(k), t)
    arr = np.asarray(t, dtype=float)
    sn, cn = _sn_cn(float(k), arr)
    if arr.ndim == 0:
        return float(sn), float(cn)
    return sn, cn


# ---------------------------------------------------------------------------
# cigar family
# ---------------------------------------------------------------------------

def _plane() -> tuple[Interval, ...]:
    return (Interval(), Interval())


def hamilton_cigar() -> SolitonData:
    """Steady gradient Ricci soliton (dx^2 + dy^2) / (1 + x^2 + y^2)."""
    def metric(x, t):
        w = 1.0 / (1.0 + x[0] * x[0] + x[1] * x[1])
        return [[w, 0.0], [0.0, w]]

    return SolitonData(
        metric=ChartMetric(2, metric, _plane(), name="hamilton-cigar", coords=("x", "y")),
        xi=lambda x, t: (x[0] * -2.0, x[1] * -2.0),
        rho=0.0,
        lam=SOLVE,
        potential_f=lambda x, t: -jm.log(1.0 + x[0] * x[0] + x[1] * x[1]),
        lam_reference=lambda x, t: 0.0 * x[0],
        name="hamilton-cigar",
        sample_box=((-3.0, 3.0), (-3.0, 3.0)),
        params={"kind": "plane"},
    )


def _cigar_scale(rho: float, t: float) -> tuple[float, float]:
    return math.exp(4.0 * (1.0 - rho) * t), math.sqrt(1.0 - rho)


def cigar_lambda_closed_form(rho: float, t: float) -> Callable:
    """Closed-form soliton function 2A((1 - s) D - 2 rho) / D for the time-dependent cigar."""
    A, s = _cigar_scale(rho, t)

    def lam(x, tt):
        D = A + x[0] * x[0] + x[1] * x[1]
        return (D * (1.0 - s) - 2.0 * rho) * (2.0 * A) / D

    return lam


def cigar_christoffel_closed_form(rho: float, t: float, points) -> np.ndarray:
    """Gamma[a, b, c] of the time-dependent cigar from the explicit rational formulas."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    A, _ = _cigar_scale(rho, t)
    x, y = p[:, 0], p[:, 1]
    D = A + x * x + y * y
    G = np.zeros((len(p), 2, 2, 2))
    G[:, 0, 0, 0] = G[:, 1, 0, 1] = G[:, 1, 1, 0] = -x / D
    G[:, 1, 1, 1] = G[:, 0, 0, 1] = G[:, 0, 1, 0] = -y / D
    G[:, 0, 1, 1] = x / D
    G[:, 1, 0, 0] = y / D
    return G


def cigar_almost_rb(rho: float = 0.0, t: float = 0.0) -> SolitonData:
    """Time-dependent cigar metric (dx^2 + dy^2) / (e^{4(1-rho)t} + x^2 + y^2)."""
    rho = float(rho)
    t = float(t)
    if not rho <= 1.0:
        raise ParameterError(f"cigar-rb needs rho <= 1 so that sqrt(1 - rho) is real, got {rho}")
    A, s = _cigar_scale(rho, t)

    def metric(x, tt):
        a = math.exp(4.0 * (1.0 - rho) * tt)
        w = 1.0 / (a + x[0] * x[0] + x[1] * x[1])
        return [[w, 0.0], [0.0, w]]

    def potential(x, tt):
        a = math.exp(4.0 * (1.0 - rho) * tt)
        return jm.log(a + x[0] * x[0] + x[1] * x[1]) * -s

    return SolitonData(
        metric=ChartMetric(2, metric, _plane(), name="cigar-rb", coords=("x", "y")),
        xi=lambda x, tt: (x[0] * (-2.0 * s), x[1] * (-2.0 * s)),
        rho=rho,
        lam=SOLVE,
        potential_f=potential,
        lam_reference=cigar_lambda_closed_form(rho, t),
        t=t,
        name="cigar-rb",
        sample_box=((-3.0, 3.0), (-3.0, 3.0)),
        params={"kind": "plane", "rho": rho, "t": t},
    )


# ---------------------------------------------------------------------------
# warped product I x_h S^1
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WarpedData:
    c: float
    h0: float
    h1: float
    a: float
    b: float
    interval: tuple[float, float]

    def h(self, t):
        sn, cn = _sn_cn(-self.c, t)
        return sn * self.h1 + cn * self.h0

    def dh(self, t):
        sn, cn = _sn_cn(-self.c, t)
        return cn * self.h1 + sn * (self.c * self.h0)

    def h_derivative(self, m: int, t: np.ndarray) -> np.ndarray:
        # h'' = c h, so even derivatives are c^j h and odd ones c^j h'
        j, odd = divmod(m, 2)
        base = self.dh(t) if odd else self.h(t)
        return (self.c ** j) * np.asarray(base, dtype=float)

    def integral_h(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        flat = t.ravel()
        uniq, inv = np.unique(flat, return_inverse=True)
        vals = np.array(
            [_quad.quad(lambda s: float(self.h(s)), 0.0, float(u), epsabs=1e-13, epsrel=1e-13)[0] for u in uniq]
        )
        return vals[inv].reshape(t.shape)

    def f(self, t):
        """a * int_0^t h + b, with jet derivatives a * h^(m-1) supplied analytically."""
        if not isinstance(t, Jet):
            return self.a * self.integral_h(t) + self.b
        t0 = t.value
        derivs = [self.a * self.integral_h(t0) + self.b]
        derivs += [self.a * self.h_derivative(m - 1, t0) for m in range(1, t.valid + 1)]
        return jm.compose(t, derivs)

    def lam(self, t, rho: float):
        return self.dh(t) * self.a + self.c * (2.0 * rho - 1.0)


def warped_product_2d(
    c: float = 1.0,
    h0: float = 0.0,
    h1: float = 1.0,
    a: float = 1.0,
    b: float = 0.0,
    rho: float = 0.0,
    interval: tuple[float, float] = (0.2, 2.0),
) -> SolitonData:
    """Gradient almost RB-soliton on I x_h S^1 with metric dt^2 + h(t)^2 dtheta^2."""
    lo, hi = map(float, interval)
    if not lo < hi:
        raise ParameterError(f"empty interval [{lo}, {hi}]")
    w = WarpedData(float(c), float(h0), float(h1), float(a), float(b), (lo, hi))
    probe = np.linspace(lo, hi, 4001)
    hv = np.asarray(w.h(probe), dtype=float)
    if np.any(hv <= 0.0):
        bad = probe[np.argmax(hv <= 0.0)]
        raise DomainError(f"warping function h is not positive on [{lo}, {hi}] (h({bad:.6g}) = {w.h(bad):.6g})")

    def metric(x, t):
        hh = w.h(x[0])
        return [[1.0, 0.0], [0.0, hh * hh]]

    domain = (Interval(lo, hi), Interval(0.0, 2.0 * math.pi, periodic=True))
    return SolitonData(
        metric=ChartMetric(2, metric, domain, name="warped", coords=("t", "theta")),
        xi=lambda x, t: (w.h(x[0]) * w.a, 0.0),
        rho=float(rho),
        lam=SOLVE,
        potential_f=lambda x, t: w.f(x[0]),
        lam_reference=lambda x, t: w.lam(x[0], float(rho)),
        name="warped",
        sample_box=((lo, hi), (0.0, 2.0 * math.pi)),
        params={"kind": "warped", "warped": w, "rho": float(rho)},
    )


# ---------------------------------------------------------------------------
# round spheres
# ---------------------------------------------------------------------------

def _embedding_factors(n: int):
    """Unit-sphere embedding as products of sin/cos of the chart angles.

    Coordinates are (theta_0, ..., theta_{n-2}, phi); factor ("s", j) means
    sin of coordinate j, ("c", j) its cosine.  Component 0 and 1 carry phi.
    """
    phi = n - 1
    lead = [("s", j) for j in range(n - 1)]
    comps = [lead + [("c", phi)], lead + [("s", phi)]]
    for k in range(n - 2, -1, -1):
        comps.append([("s", j) for j in range(k)] + [("c", k)])
    return comps


def _eval_factors(factors, x, deriv: int | None = None):
    out = 1.0
    hit = deriv is None
    for kind, j in factors:
        if j == deriv:
            hit = True
            term = jm.cos(x[j]) if kind == "s" else -jm.sin(x[j])
        else:
            term = jm.sin(x[j]) if kind == "s" else jm.cos(x[j])
        out = out * term
    return out if hit else 0.0


def _unit_metric_diag(n: int, x):
    diag = [1.0]
    acc = 1.0
    for j in range(n - 1):
        s = jm.sin(x[j])
        acc = acc * s * s
        diag.append(acc)
    return diag


def sphere_chart(c: float = 1.0, n: int = 2, conformal: Callable | None = None, name: str = "sphere") -> ChartMetric:
    """Polar chart on S^n(c) (radius 1/sqrt(c)), optionally times a conformal factor."""
    if not c > 0:
        raise ParameterError(f"sphere curvature must be positive, got {c}")
    if n < 2:
        raise ParameterError("sphere dimension must be at least 2")
    r2 = 1.0 / c

    def metric(x, t):
        diag = _unit_metric_diag(n, x)
        scale = r2 if conformal is None else conformal(x, t) * r2
        rows = [[0.0] * n for _ in range(n)]
        for a in range(n):
            rows[a][a] = diag[a] * scale
        return rows

    dom = tuple(Interval(POLE_OFFSET, math.pi - POLE_OFFSET) for _ in range(n - 1))
    dom += (Interval(0.0, 2.0 * math.pi, periodic=True),)
    coords = tuple(f"theta{j}" for j in range(n - 1)) + ("phi",)
    if n == 2:
        coords = ("theta", "phi")
    return ChartMetric(n, metric, dom, name=name, coords=coords)


@dataclass(frozen=True)
class SphereConstruction:
    """Tangential projection of a constant ambient vector Z onto S^n(c)."""

    c: float
    Z: tuple[float, ...]

    @property
    def n(self) -> int:
        return len(self.Z) - 1

    def unit_normal(self, x):
        return [_eval_factors(f, x) for f in _embedding_factors(self.n)]

    def mu(self, x, t=0.0):
        """<Z, N> with N the outward unit normal."""
        out = 0.0
        for z, comp in zip(self.Z, self.unit_normal(x)):
            if z:
                out = comp * z + out
        return out

    def xi(self, x, t=0.0):
        n = self.n
        diag = _unit_metric_diag(n, x)
        rc = math.sqrt(self.c)
        comps = _embedding_factors(n)
        out = []
        for a in range(n):
            proj = 0.0
            for z, f in zip(self.Z, comps):
                if z:
                    proj = _eval_factors(f, x, deriv=a) * z + proj
            out.append(proj * rc / diag[a])
        return tuple(out)

    def potential(self, x, t=0.0):
        return self.mu(x) * (1.0 / math.sqrt(self.c))

    def lam_closed_form(self, rho: float) -> Callable:
        n, c = self.n, self.c

        def lam(x, t):
            return self.mu(x) * -math.sqrt(c) + (n - 1) * (c - rho)

        return lam

    def lam_trace(self, rho: float) -> Callable:
        n, c = self.n, self.c

        def lam(x, t):
            return self.mu(x) * -math.sqrt(c) + (n - 1) * c - rho * n * (n - 1) * c

        return lam


def _parse_vector(Z) -> tuple[float, ...]:
    if isinstance(Z, str):
        Z = [float(v) for v in Z.split(",")]
    return tuple(float(v) for v in Z)


def round_sphere_soliton(c: float = 1.0, Z: Sequence[float] = (0.0, 0.0, 1.0), rho: float = 0.0) -> SolitonData:
    """Gradient almost RB-soliton on S^n(c), n = len(Z) - 1, with xi the projection of Z."""
    c = float(c)
    Z = _parse_vector(Z)
    if not c > 0:
        raise ParameterError(f"sphere curvature must be positive, got {c}")
    if len(Z) < 3:
        raise ParameterError("Z needs at least 3 components (sphere dimension >= 2)")
    if not any(Z):
        raise ParameterError("Z must be nonzero")
    sc = SphereConstruction(c, Z)
    n = sc.n
    edge = math.pi / 40
    box = tuple((edge, math.pi - edge) for _ in range(n - 1)) + ((0.0, 2.0 * math.pi),)
    return SolitonData(
        metric=sphere_chart(c, n),
        xi=sc.xi,
        rho=float(rho),
        lam=SOLVE,
        potential_f=sc.potential,
        lam_reference=sc.lam_closed_form(float(rho)),
        name="sphere",
        sample_box=box,
        compact=True,
        params={"kind": "sphere", "c": c, "Z": Z, "rho": float(rho), "construction": sc},
    )


def perturbed_sphere_metric(eps: float = 0.1) -> ChartMetric:
    """(1 + eps cos(theta) cos(phi)) times the unit round metric."""
    if not abs(eps) < 1:
        raise ParameterError("perturbation amplitude must satisfy |eps| < 1")
    return sphere_chart(1.0, 2, conformal=lambda x, t: jm.cos(x[0]) * jm.cos(x[1]) * eps + 1.0, name="perturbed-sphere")


def perturbed_sphere(eps: float = 0.1) -> SolitonData:
    """Non-Einstein compact metric with xi = 0, used for curvature sweeps."""
    return SolitonData(
        metric=perturbed_sphere_metric(eps),
        xi=lambda x, t: (0.0, 0.0),
        rho=0.0,
        name="perturbed-sphere",
        sample_box=((math.pi / 40, math.pi - math.pi / 40), (0.0, 2.0 * math.pi)),
        compact=True,
        params={"kind": "sphere", "c": 1.0, "eps": float(eps)},
    )


def smooth_perturbed_sphere_metric(eps: float = 0.1) -> ChartMetric:
    """(1 + eps X1 X3) times the unit round metric; X the embedding, so smooth at the poles."""
    if not abs(eps) < 1:
        raise ParameterError("perturbation amplitude must satisfy |eps| < 1")
    return sphere_chart(
        1.0, 2, conformal=lambda x, t: jm.sin(x[0]) * jm.cos(x[0]) * jm.cos(x[1]) * eps + 1.0,
        name="smooth-perturbed-sphere",
    )


def _ambient_field(X):
    # smooth, non-Killing, non-gradient ambient field restricted to the sphere
    return (X[1] + 0.3 * X[2] * X[2], X[0] * X[2] - 0.5, X[0] * X[1] + 0.2 * X[0])


def sphere_field(eps: float = 0.1) -> SolitonData:
    """Generic smooth vector field and function on a smoothly perturbed sphere (not a soliton)."""
    comps = _embedding_factors(2)

    def xi(x, t):
        X = [_eval_factors(f, x) for f in comps]
        V = _ambient_field(X)
        s = jm.sin(x[0])
        out = []
        for a in range(2):
            proj = 0.0
            for v, f in zip(V, comps):
                d = _eval_factors(f, x, deriv=a)
                if not (isinstance(d, float) and d == 0.0):
                    proj = d * v + proj
            out.append(proj if a == 0 else proj / (s * s))
        return tuple(out)

    def lam(x, t):
        X = [_eval_factors(f, x) for f in comps]
        return X[0] * X[1] + X[2] * X[2] * X[2] * 0.5 + X[0] * 0.3

    return SolitonData(
        metric=smooth_perturbed_sphere_metric(eps),
        xi=xi,
        rho=0.0,
        lam=lam,
        name="sphere-field",
        sample_box=((math.pi / 40, math.pi - math.pi / 40), (0.0, 2.0 * math.pi)),
        compact=True,
        params={"kind": "sphere", "c": 1.0, "eps": float(eps)},
    )


# ---------------------------------------------------------------------------
# tori
# ---------------------------------------------------------------------------

def flat_torus(Lx: float = 2.0 * math.pi, Ly: float = 2.0 * math.pi) -> ChartMetric:
    Lx, Ly = float(Lx), float(Ly)
    if not (Lx > 0 and Ly > 0):
        raise ParameterError(f"torus periods must be positive, got ({Lx}, {Ly})")
    eye = [[1.0, 0.0], [0.0, 1.0]]
    dom = (Interval(0.0, Lx, periodic=True), Interval(0.0, Ly, periodic=True))
    return ChartMetric(2, lambda x, t: eye, dom, name="flat-torus", coords=("x", "y"))


def torus_field(amplitude: float = 0.2) -> SolitonData:
    """Conformally perturbed (2 pi)^2 torus with generic xi and lambda (not a soliton)."""
    amp = float(amplitude)
    dom = (Interval(0.0, 2 * math.pi, periodic=True), Interval(0.0, 2 * math.pi, periodic=True))

    def metric(x, t):
        w = jm.exp(jm.sin(x[0]) * jm.cos(x[1]) * amp)
        return [[w, 0.0], [0.0, w]]

    return SolitonData(
        metric=ChartMetric(2, metric, dom, name="torus-field", coords=("x", "y")),
        xi=lambda x, t: (jm.sin(x[0]), jm.cos(x[1])),
        rho=0.0,
        lam=lambda x, t: jm.sin(x[0]) * jm.cos(x[1]),
        name="torus-field",
        sample_box=((0.0, 2 * math.pi), (0.0, 2 * math.pi)),
        compact=True,
        params={"kind": "torus", "Lx": 2 * math.pi, "Ly": 2 * math.pi},
    )


def einstein_trivial(c: float = 1.0, rho: float = 0.0) -> SolitonData:
    """Round S^2(c) with xi = 0 and the constant soliton function c - 2 rho c."""
    c, rho = float(c), float(rho)
    return SolitonData(
        metric=sphere_chart(c, 2),
        xi=lambda x, t: (0.0, 0.0),
        rho=rho,
        lam=lambda x, t: 0.0 * x[0] + c * (1.0 - 2.0 * rho),
        potential_f=lambda x, t: 0.0 * x[0],
        name="einstein",
        sample_box=((math.pi / 40, math.pi - math.pi / 40), (0.0, 2.0 * math.pi)),
        compact=True,
        params={"kind": "sphere", "c": c, "rho": rho},
    )


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

EXAMPLES: dict[str, Callable[..., SolitonData]] = {
    "hamilton-cigar": hamilton_cigar,
    "cigar-rb": cigar_almost_rb,
    "warped": warped_product_2d,
    "sphere": round_sphere_soliton,
    "einstein": einstein_trivial,
    "perturbed-sphere": perturbed_sphere,
    "sphere-field": sphere_field,
    "torus-field": torus_field,
}


def example_parameters(name: str) -> tuple[str, ...]:
    if name not in EXAMPLES:
        raise KeyError(name)
    sig = inspect.signature(EXAMPLES[name])
    return tuple(p for p in sig.parameters if p != "interval")


def build_example(name: str, **params) -> SolitonData:
    """Construct a catalog entry by name, rejecting parameters it does not take."""
    if name not in EXAMPLES:
        raise KeyError(f"unknown example {name!r}; choose from {', '.join(EXAMPLES)}")
    allowed = example_parameters(name)
    extra = sorted(set(params) - set(allowed))
    if extra:
        raise ParameterError(
            f"example {name!r} does not take {', '.join(extra)}"
            + (f" (accepted: {', '.join(allowed)})" if allowed else " (it has no parameters)")
        )
    return EXAMPLES[name](**params)
