"""Almost Ricci-Bourguignon solitons: data, residuals, structural identities.

A tuple (g, xi, lambda, rho) is an almost RB-soliton when

    Ric + (1/2) L_xi g = (lambda + rho S) g.

Throughout, ``sigma = lambda + rho S``.  With ``lam=SOLVE`` the soliton
function is taken from the trace of that equation,

    lambda = (1/n) tr_g(Ric + (1/2) L_xi g) - rho S,

which makes the residual tensor trace-free by construction.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Literal, Sequence

import numpy as np

from . import jets as jm
from ._batch import chunk_size, map_points
from .chartcalc import ChartMetric, LocalGeometry, PointTensor
from .errors import ConfigurationError
from .io import dumps_json

__all__ = [
    "SOLVE",
    "SolitonData",
    "SolitonFields",
    "SolitonReport",
    "CtrbsResidual",
    "lambda_from_trace",
    "soliton_residual",
    "classify",
    "default_eps",
    "phi_operator",
    "cdopf_residual",
    "rorbs_residual",
    "ctrbs_residual",
    "div_identity_residual",
    "obata_residual",
    "poisson_residual",
    "DEFAULT_TOLERANCES",
]


class _Solve:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self) -> str:
        return "SOLVE"


SOLVE = _Solve()

DEFAULT_TOLERANCES = {
    "soliton": 1e-8,
    "cdopf": 1e-8,
    "rorbs": 1e-8,
    "div": 1e-8,
    "ctrbs": 1e-8,
    "potential": 1e-8,
    "phi": 1e-10,
}


@dataclass
class SolitonData:
    """A candidate almost RB-soliton on a chart.

    ``lam_reference`` holds a closed-form soliton function quoted alongside
    a construction; it is reported next to the trace-derived one, never
    substituted for it unless passed as ``lam``.
    """

    metric: ChartMetric
    xi: Callable
    rho: float
    lam: Callable | _Solve = SOLVE
    potential_f: Callable | None = None
    lam_reference: Callable | None = None
    t: float = 0.0
    name: str = ""
    sample_box: tuple[tuple[float, float], ...] | None = None
    compact: bool = False
    grid: Callable | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not np.isfinite(self.rho):
            raise ConfigurationError("rho must be finite")

    @property
    def n(self) -> int:
        return self.metric.dim

    def with_lambda(self, lam) -> "SolitonData":
        return replace(self, lam=lam)

    def _counts(self, per_axis) -> tuple[int, ...]:
        counts = (per_axis,) * self.n if np.isscalar(per_axis) else tuple(per_axis)
        if len(counts) != self.n or any(int(c) != c or c < 1 for c in counts):
            raise ConfigurationError(f"sample grid needs {self.n} positive counts, got {per_axis!r}")
        return tuple(int(c) for c in counts)

    def sample_points(self, per_axis: int | Sequence[int] = 20) -> np.ndarray:
        """Uniform tensor grid over the sample box (periodic axes skip the endpoint)."""
        counts = self._counts(per_axis)
        axes = []
        for k, iv in enumerate(self.metric.domain):
            lo, hi = self.sample_box[k] if self.sample_box else (iv.lo, iv.hi)
            if not (np.isfinite(lo) and np.isfinite(hi)):
                raise ConfigurationError(f"{self.name}: no finite sample range for coordinate {k}")
            axes.append(np.linspace(lo, hi, counts[k], endpoint=not iv.periodic))
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def sample_description(self, per_axis: int | Sequence[int] = 20) -> str:
        box = self.sample_box or tuple((iv.lo, iv.hi) for iv in self.metric.domain)
        dims = "x".join(str(c) for c in self._counts(per_axis))
        ranges = ", ".join(f"[{lo:.6g}, {hi:.6g}]" for lo, hi in box)
        return f"{dims} uniform grid on {ranges}"


class SolitonFields:
    """Jets of the soliton quantities over a batch of points."""

    def __init__(self, d: SolitonData, points, order: int = 3, lam=None):
        self.d = d
        self.geo = LocalGeometry(d.metric, points, d.t, order)
        self._lam = d.lam if lam is None else lam

    @property
    def n(self) -> int:
        return self.d.n

    @cached_property
    def xi(self):
        return self.geo.vector(self.d.xi)

    @cached_property
    def lie(self):
        return self.geo.lie_metric(self.xi)

    @cached_property
    def lam(self):
        geo = self.geo
        if self._lam is SOLVE:
            trace = jm.jeinsum("ab,ab->", geo.ginv, geo.ricci + self.lie * 0.5)
            return trace * (1.0 / self.n) - geo.scalar_curvature * self.d.rho
        if self._lam is None:
            raise ConfigurationError("soliton function is unresolved")
        return geo.scalar(self._lam)

    @cached_property
    def sigma(self):
        return self.lam + self.geo.scalar_curvature * self.d.rho

    @cached_property
    def residual_tensor(self):
        return self.geo.ricci + self.lie * 0.5 - self.geo.g * self.sigma[..., None, None]

    @cached_property
    def phi(self):
        return self.geo.phi(self.xi)

    @cached_property
    def nabla_xi(self):
        return self.geo.nabla(self.xi)

    # -- pointwise identity values (plain arrays) ---------------------------
    def soliton_norm(self) -> np.ndarray:
        return self.geo.norm_covariant2(self.residual_tensor.value)

    def trace_of_residual(self) -> np.ndarray:
        return np.einsum("...ab,...ab->...", self.geo.ginv0, self.residual_tensor.value)

    def cdopf(self) -> np.ndarray:
        geo = self.geo
        n = self.n
        nab = self.nabla_xi.value  # [b, a]
        sig = self.sigma.value
        Q = geo.ricci_operator.value
        Phi = self.phi.value
        out = np.zeros(geo.N)
        for b in range(n):
            scale = 1.0 / np.sqrt(geo.g0[:, b, b])
            rhs = -Q[:, :, b] + Phi[:, :, b]
            rhs[:, b] += sig
            diff = (nab[:, b, :] - rhs) * scale[:, None]
            out = np.maximum(out, geo.norm_vector(diff))
        return out

    def rorbs_vectors(self):
        geo = self.geo
        lhs = np.einsum("...ab,...b->...a", geo.ricci_operator.value, self.xi.value)
        rhs = (
            -(self.n - 1) * geo.grad(self.sigma).value
            + 0.5 * geo.grad(geo.scalar_curvature).value
            - geo.div11(self.phi).value
        )
        return lhs, rhs

    def rorbs(self) -> np.ndarray:
        lhs, rhs = self.rorbs_vectors()
        return self.geo.norm_vector(lhs - rhs)

    def div_identity(self) -> np.ndarray:
        geo = self.geo
        rhs = self.n * self.sigma.value - geo.scalar_curvature.value
        return np.abs(geo.div(self.xi).value - rhs)

    @cached_property
    def _ctrbs_parts(self):
        geo = self.geo
        return (
            geo.riemann.value,
            self.xi.value,
            geo.d(self.sigma).value,
            geo.nabla_ricci_operator.value,
            geo.cov11(self.phi).value,
        )

    def ctrbs(self, X: np.ndarray, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Residual norms of the curvature identity for both phi-sign patterns."""
        R, xi, dsig, DQ, DP = self._ctrbs_parts
        X = np.broadcast_to(X, xi.shape)
        Y = np.broadcast_to(Y, xi.shape)
        lhs = np.einsum("...abcd,...b,...c,...d->...a", R, xi, X, Y)
        Xs = np.einsum("...c,...c->...", dsig, X)
        Ys = np.einsum("...c,...c->...", dsig, Y)

        def ev(D, A, B):
            return np.einsum("...cab,...c,...b->...a", D, A, B)

        common = Xs[..., None] * Y - Ys[..., None] * X - ev(DQ, X, Y) + ev(DQ, Y, X)
        symmetric = common - ev(DP, X, Y) - ev(DP, Y, X)
        skew = common + ev(DP, X, Y) - ev(DP, Y, X)
        return self.geo.norm_vector(lhs - symmetric), self.geo.norm_vector(lhs - skew)

    def ctrbs_sup_over_directions(self) -> tuple[np.ndarray, np.ndarray]:
        geo = self.geo
        n = self.n
        pr = np.zeros(geo.N)
        al = np.zeros(geo.N)
        for i, j in itertools.permutations(range(n), 2):
            X = np.zeros((geo.N, n))
            Y = np.zeros((geo.N, n))
            X[:, i] = 1.0 / np.sqrt(geo.g0[:, i, i])
            Y[:, j] = 1.0 / np.sqrt(geo.g0[:, j, j])
            a, b = self.ctrbs(X, Y)
            pr = np.maximum(pr, a)
            al = np.maximum(al, b)
        return pr, al

    def potential_mismatch(self) -> np.ndarray | None:
        if self.d.potential_f is None:
            return None
        geo = self.geo
        gf = geo.grad(geo.scalar(self.d.potential_f)).value
        return geo.norm_vector(self.xi.value - gf)

    def phi_norm(self) -> np.ndarray:
        return self.geo.norm_operator(self.phi.value)


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------

def default_eps(lam: np.ndarray) -> float:
    return 1e-9 * (1.0 + float(np.max(np.abs(lam))))


def classify(lambda_values, eps: float | None = None) -> str:
    """shrinking (lambda > 0), expanding (lambda < 0), steady, or indefinite."""
    lam = np.asarray(lambda_values, dtype=float).ravel()
    if lam.size == 0:
        raise ValueError("empty sample")
    if eps is None:
        eps = default_eps(lam)
    if np.max(np.abs(lam)) <= eps:
        return "steady"
    if np.min(lam) > eps:
        return "shrinking"
    if np.max(lam) < -eps:
        return "expanding"
    return "indefinite"


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass
class SolitonReport:
    residual_sup: float
    lambda_min: float
    lambda_max: float
    classification: str
    identities: dict
    points: dict
    lambda_mode: str = "solve"
    trace_free: bool = True
    ctrbs_variant: str | None = None
    reference: dict | None = None
    tolerances: dict = field(default_factory=dict)
    example: str = ""
    rho: float = 0.0

    @property
    def failures(self) -> list[str]:
        return [k for k, tol in self.tolerances.items() if k in self.identities and not self.identities[k] < tol]

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        out = {
            "example": self.example,
            "rho": self.rho,
            "residual_sup": self.residual_sup,
            "lambda_min": self.lambda_min,
            "lambda_max": self.lambda_max,
            "classification": self.classification,
            "lambda_mode": self.lambda_mode,
            "trace_free": self.trace_free,
            "identities": dict(self.identities),
            "ctrbs_variant": self.ctrbs_variant,
            "points": dict(self.points),
            "tolerances": dict(self.tolerances),
            "pass": self.passed,
        }
        if self.reference is not None:
            out["reference_lambda"] = dict(self.reference)
        return out

    def to_json(self) -> str:
        return dumps_json(self.to_dict())


def _evaluate(d: SolitonData, pts: np.ndarray, lam) -> dict:
    f = SolitonFields(d, pts, order=3, lam=lam)
    pr, al = f.ctrbs_sup_over_directions()
    out = {
        "soliton": f.soliton_norm(),
        "trace": np.abs(f.trace_of_residual()),
        "lambda": f.lam.value,
        "cdopf": f.cdopf(),
        "rorbs": f.rorbs(),
        "div": f.div_identity(),
        "ctrbs_symmetric": pr,
        "ctrbs_skew": al,
        "phi": f.phi_norm(),
    }
    pm = f.potential_mismatch()
    if pm is not None:
        out["potential"] = pm
    return out


def soliton_residual(
    d: SolitonData,
    points=None,
    *,
    per_axis: int | Sequence[int] = 20,
    tolerances: dict | None = None,
    description: str | None = None,
) -> SolitonReport:
    """Evaluate the soliton equation and every pointwise identity over a sample.

    The soliton function used is ``d.lam`` (default: trace-derived).  When the
    data carries a closed-form ``lam_reference`` its values, classification,
    residual and largest discrepancy from the resolved function are reported
    in a separate block.
    """
    if d.lam is None:
        raise ConfigurationError("soliton function is unresolved; pass a field or SOLVE")
    if points is None:
        pts = d.sample_points(per_axis)
        description = description or d.sample_description(per_axis)
    else:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        description = description or f"{len(pts)} supplied points"

    space = jm.jet_space(d.n, 3)
    chunk = chunk_size(d.n, len(space.left))
    vals = map_points(lambda b: _evaluate(d, b, d.lam), pts, chunk)

    lam = vals["lambda"]
    pr, al = vals["ctrbs_symmetric"].max(), vals["ctrbs_skew"].max()
    variant = "symmetric" if pr <= al else "skew"
    identities = {
        "soliton": float(vals["soliton"].max()),
        "cdopf": float(vals["cdopf"].max()),
        "rorbs": float(vals["rorbs"].max()),
        "div": float(vals["div"].max()),
        "ctrbs": float(min(pr, al)),
        "ctrbs_symmetric": float(pr),
        "ctrbs_skew": float(al),
        "trace": float(vals["trace"].max()),
    }
    tol = dict(DEFAULT_TOLERANCES if tolerances is None else tolerances)
    if "potential" in vals:
        identities["potential"] = float(vals["potential"].max())
        identities["phi"] = float(vals["phi"].max())
    else:
        identities["phi_norm_max"] = float(vals["phi"].max())
        tol.pop("phi", None)
    tol = {k: v for k, v in tol.items() if k in identities}

    reference = None
    if d.lam_reference is not None:
        ref_vals = map_points(
            lambda b: (lambda f: {"lambda": f.lam.value, "soliton": f.soliton_norm()})(
                SolitonFields(d, b, order=2, lam=d.lam_reference)
            ),
            pts,
            chunk,
        )
        rl = ref_vals["lambda"]
        reference = {
            "lambda_min": float(rl.min()),
            "lambda_max": float(rl.max()),
            "classification": classify(rl),
            "residual_sup": float(ref_vals["soliton"].max()),
            "max_discrepancy": float(np.max(np.abs(rl - lam))),
        }

    return SolitonReport(
        residual_sup=identities["soliton"],
        lambda_min=float(lam.min()),
        lambda_max=float(lam.max()),
        classification=classify(lam),
        identities=identities,
        points={"count": int(len(pts)), "description": description},
        lambda_mode="solve" if d.lam is SOLVE else "given",
        trace_free=d.lam is SOLVE,
        ctrbs_variant=variant,
        reference=reference,
        tolerances=tol,
        example=d.name,
        rho=float(d.rho),
    )


# ---------------------------------------------------------------------------
# per-point operations
# ---------------------------------------------------------------------------

def _fields(d: SolitonData, p, t, order: int, lam=None):
    pts = np.asarray(p, dtype=float)
    single = pts.ndim == 1
    if t is not None and t != d.t:
        d = replace(d, t=t)
    return SolitonFields(d, np.atleast_2d(pts), order, lam), single


def _out(v: np.ndarray, single: bool):
    return float(v[0]) if single else v


def lambda_from_trace(d: SolitonData, p, t: float | None = None):
    f, single = _fields(d, p, t, 2, lam=SOLVE)
    return _out(f.lam.value, single)


def phi_operator(d: SolitonData, p, t: float | None = None) -> PointTensor:
    f, single = _fields(d, p, t, 1)
    v = f.phi.value
    return PointTensor(v[0] if single else v, (1, 1), np.asarray(p, dtype=float))


def cdopf_residual(d: SolitonData, p, t: float | None = None):
    """sup over unit coordinate directions X of |nabla_X xi - (sigma X - QX + phi X)|."""
    f, single = _fields(d, p, t, 2)
    return _out(f.cdopf(), single)


def rorbs_residual(d: SolitonData, p, t: float | None = None):
    """|Q(xi) + (n-1) grad sigma - (1/2) grad S + div phi|."""
    f, single = _fields(d, p, t, 3)
    return _out(f.rorbs(), single)


@dataclass(frozen=True)
class CtrbsResidual:
    symmetric: float | np.ndarray
    skew: float | np.ndarray

    def best(self):
        return np.minimum(self.symmetric, self.skew)

    def passing_variant(self, tol: float) -> str | None:
        if np.all(np.asarray(self.symmetric) < tol):
            return "symmetric"
        if np.all(np.asarray(self.skew) < tol):
            return "skew"
        return None


def ctrbs_residual(d: SolitonData, X, Y, p, t: float | None = None) -> CtrbsResidual:
    """Curvature identity R(X, Y)xi for both phi-sign patterns.

    symmetric: ... - (nabla phi)(X, Y) - (nabla phi)(Y, X)
    skew:      ... + (nabla phi)(X, Y) - (nabla phi)(Y, X)
    """
    f, single = _fields(d, p, t, 3)
    a, b = f.ctrbs(np.asarray(X, dtype=float), np.asarray(Y, dtype=float))
    return CtrbsResidual(_out(a, single), _out(b, single))


def div_identity_residual(d: SolitonData, p, t: float | None = None):
    f, single = _fields(d, p, t, 2)
    return _out(f.div_identity(), single)


def obata_residual(
    m: ChartMetric,
    lam_bar: Callable,
    variant: Literal["unit", "scaled"] = "unit",
    p=None,
    t: float = 0.0,
):
    """unit:   |Hess u + u g|
    scaled: |(n-1) Hess u + (S/n) u g|
    """
    pts = np.asarray(p, dtype=float)
    single = pts.ndim == 1
    geo = LocalGeometry(m, np.atleast_2d(pts), t, 2)
    u = geo.scalar(lam_bar)
    H = geo.hess(u).value
    uv = u.value[:, None, None]
    if variant == "unit":
        E = H + uv * geo.g0
    elif variant == "scaled":
        n = m.dim
        S = geo.scalar_curvature.value[:, None, None]
        E = (n - 1) * H + (S / n) * uv * geo.g0
    else:
        raise ValueError(f"variant must be 'unit' or 'scaled', got {variant!r}")
    return _out(geo.norm_covariant2(E), single)


def poisson_residual(d: SolitonData, sigma: Callable, p, t: float | None = None):
    """|Lap(sigma_field) - (S - n(lambda + rho S))|."""
    f, single = _fields(d, p, t, 2)
    geo = f.geo
    lap = geo.lap(geo.scalar(sigma)).value
    rhs = geo.scalar_curvature.value - f.n * f.sigma.value
    return _out(np.abs(lap - rhs), single)
