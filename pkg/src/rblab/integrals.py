"""Quadrature on compact charts and integral-identity residuals.

Sphere grids use midpoint latitudes ``theta_i = (i + 1/2) pi / N`` (no node
on a pole) and uniform longitudes.  The default latitude weights are Fejer's
first rule, which integrates ``F(cos theta) sin theta`` spectrally; the plain
midpoint rule (second order) is kept as ``rule="midpoint"``.  Torus grids use
the periodic trapezoid rule.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import jets as jm
from ._batch import chunk_size, map_points
from .chartcalc import ChartMetric, LocalGeometry, bianchi_defect
from .errors import ConfigurationError, ParameterError, PreconditionError
from .soliton import SOLVE, SolitonData, SolitonFields

__all__ = [
    "QuadratureGrid",
    "fejer_weights",
    "sphere_grid",
    "torus_grid",
    "grid_for",
    "integrate",
    "integrate_values",
    "yano_residual",
    "bochner_residual",
    "IdentityResult",
    "LEMMAS",
    "lemma_residual",
    "bianchi_sweep",
    "lemma_tolerance",
    "CSV_HEADER",
]

MIN_RESOLUTION = 8
SOLITON_PRECONDITION = 1e-6
CSV_HEADER = ("id", "lhs", "rhs", "residual", "grid", "tolerance", "pass")


@dataclass
class QuadratureGrid:
    """Nodes and weights; ``weights`` already include the volume density."""

    metric: ChartMetric
    nodes: np.ndarray
    weights: np.ndarray
    description: str
    kind: str = ""
    shape: tuple[int, int] = (0, 0)

    def __post_init__(self):
        if not np.all(self.weights > 0):
            raise ValueError("quadrature weights must be positive")

    @property
    def size(self) -> int:
        return len(self.nodes)


def fejer_weights(N: int) -> np.ndarray:
    """Weights for int_0^pi F(cos theta) sin theta d theta at theta_i = (i + 1/2) pi / N."""
    theta = (np.arange(N) + 0.5) * np.pi / N
    k = np.arange(1, N // 2 + 1)
    s = np.cos(2.0 * np.outer(theta, k)) / (4.0 * k * k - 1.0)
    return (2.0 / N) * (1.0 - 2.0 * s.sum(axis=1))


def _check_res(*res: int) -> None:
    for r in res:
        if int(r) != r or r < MIN_RESOLUTION:
            raise ParameterError(f"grid resolution must be an integer >= {MIN_RESOLUTION}, got {r}")


def sphere_grid(
    c: float = 1.0,
    n_theta: int = 128,
    n_phi: int = 256,
    metric: ChartMetric | None = None,
    rule: str = "fejer",
    t: float = 0.0,
) -> QuadratureGrid:
    """Latitude-longitude grid on S^2(c), or on a metric given in the same polar chart."""
    from .catalog import sphere_chart

    _check_res(n_theta, n_phi)
    if not c > 0:
        raise ParameterError(f"sphere curvature must be positive, got {c}")
    m = metric if metric is not None else sphere_chart(c, 2)
    if m.dim != 2:
        raise ParameterError("sphere quadrature is implemented for the 2-sphere")
    theta = (np.arange(n_theta) + 0.5) * np.pi / n_theta
    phi = np.arange(n_phi) * (2.0 * np.pi / n_phi)
    if rule == "fejer":
        wt = fejer_weights(n_theta) / np.sin(theta)
    elif rule == "midpoint":
        wt = np.full(n_theta, np.pi / n_theta)
    else:
        raise ValueError(f"unknown latitude rule {rule!r}")
    T, P = np.meshgrid(theta, phi, indexing="ij")
    nodes = np.stack([T.ravel(), P.ravel()], axis=-1)
    density = np.sqrt(np.linalg.det(m.matrix(nodes, t)))
    weights = (wt[:, None] * np.full(n_phi, 2.0 * np.pi / n_phi)[None, :]).ravel() * density
    return QuadratureGrid(m, nodes, weights, f"sphere {n_theta}x{n_phi} ({rule})", "sphere", (n_theta, n_phi))


def torus_grid(
    Lx: float = 2.0 * math.pi,
    Ly: float = 2.0 * math.pi,
    nx: int = 64,
    ny: int = 64,
    metric: ChartMetric | None = None,
    t: float = 0.0,
) -> QuadratureGrid:
    from .catalog import flat_torus

    _check_res(nx, ny)
    m = metric if metric is not None else flat_torus(Lx, Ly)
    x = np.arange(nx) * (Lx / nx)
    y = np.arange(ny) * (Ly / ny)
    X, Y = np.meshgrid(x, y, indexing="ij")
    nodes = np.stack([X.ravel(), Y.ravel()], axis=-1)
    density = np.sqrt(np.linalg.det(m.matrix(nodes, t)))
    weights = np.full(nx * ny, Lx * Ly / (nx * ny)) * density
    return QuadratureGrid(m, nodes, weights, f"torus {nx}x{ny}", "torus", (nx, ny))


def grid_for(d: SolitonData, resolution: tuple[int, int] | None = None) -> QuadratureGrid:
    """Default quadrature grid for a compact catalog entry."""
    kind = d.params.get("kind")
    if not d.compact:
        raise PreconditionError(f"example {d.name!r} is not compact; integral identities need a closed manifold")
    if kind == "sphere":
        nt, npp = resolution or (128, 256)
        return sphere_grid(d.params.get("c", 1.0), nt, npp, metric=d.metric, t=d.t)
    if kind == "torus":
        nx, ny = resolution or (64, 64)
        return torus_grid(d.params["Lx"], d.params["Ly"], nx, ny, metric=d.metric, t=d.t)
    raise PreconditionError(f"no quadrature grid for example {d.name!r}")


def integrate_values(grid: QuadratureGrid, values: np.ndarray) -> float:
    # np.sum on a contiguous 1-D array uses a fixed pairwise association
    return float(np.sum(np.ascontiguousarray(grid.weights * values)))


def integrate(grid: QuadratureGrid, f: Callable, t: float = 0.0) -> float:
    x = tuple(grid.nodes[:, k] for k in range(grid.nodes.shape[1]))
    vals = np.broadcast_to(np.asarray(f(x, t), dtype=float), (grid.size,))
    if not np.all(np.isfinite(vals)):
        bad = grid.nodes[np.argmax(~np.isfinite(vals))]
        raise FloatingPointError(f"integrand is not finite at node {list(bad)}")
    return integrate_values(grid, vals)


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------

@dataclass
class IdentityResult:
    """Both sides of an integral identity, with the termwise integrals.

    ``terms`` maps a term name to its integral and ``l1`` to the integral of
    its absolute value; the pass tolerance scales with the largest of those.
    """

    id: str
    lhs: float
    rhs: float
    terms: dict = field(default_factory=dict)
    l1: dict = field(default_factory=dict)
    grid: str = ""
    base_tolerance: float = 1e-4
    refused: str | None = None

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)

    @property
    def tolerance(self) -> float:
        return lemma_tolerance(self.l1, self.base_tolerance)

    @property
    def passed(self) -> bool:
        return self.refused is None and self.residual < self.tolerance

    def __iter__(self):
        # unpacks as (lhs, rhs, residual)
        return iter((self.lhs, self.rhs, self.residual))

    def row(self) -> tuple:
        if self.refused is not None:
            return (self.id, None, None, None, self.grid, self.tolerance, "refused")
        return (self.id, self.lhs, self.rhs, self.residual, self.grid, self.tolerance, self.passed)


def lemma_tolerance(l1: dict, base: float = 1e-4) -> float:
    return base * (1.0 + max(l1.values(), default=0.0))


def _default_base(grid: QuadratureGrid) -> float:
    return 1e-8 if grid.kind == "torus" else 1e-4


def _collect(grid: QuadratureGrid, fn: Callable[[np.ndarray], dict], order: int) -> dict:
    n = grid.nodes.shape[1]
    chunk = chunk_size(n, len(jm.jet_space(n, order).left))
    return map_points(fn, grid.nodes, chunk)


def _result(idn: str, grid: QuadratureGrid, lhs_terms: dict, rhs_terms: dict, base) -> IdentityResult:
    terms, l1 = {}, {}
    lhs = rhs = 0.0
    for side, bucket in ((0, lhs_terms), (1, rhs_terms)):
        for name, vals in bucket.items():
            I = integrate_values(grid, vals)
            terms[name] = I
            l1[name] = integrate_values(grid, np.abs(vals))
            if side == 0:
                lhs += I
            else:
                rhs += I
    return IdentityResult(idn, lhs, rhs, terms, l1, grid.description, base if base is not None else _default_base(grid))


# ---------------------------------------------------------------------------
# Yano / Bochner
# ---------------------------------------------------------------------------

def yano_residual(grid: QuadratureGrid, m: ChartMetric, xi: Callable, t: float = 0.0, base=None) -> IdentityResult:
    """int Ric(xi, xi) + (1/2)|L_xi g|^2 - |nabla xi|^2 - (div xi)^2, which vanishes on closed manifolds."""

    def fn(nodes):
        geo = LocalGeometry(m, nodes, t, 2)
        v = geo.vector(xi)
        x0 = v.value
        ric = np.einsum("...ab,...a,...b->...", geo.ricci.value, x0, x0)
        L = geo.lie_metric(v).value
        nab = geo.nabla(v).value  # [b, a]
        gi = geo.ginv0
        lie2 = np.einsum("...ac,...bd,...ab,...cd->...", gi, gi, L, L)
        nab2 = np.einsum("...ab,...cd,...ca,...db->...", geo.g0, gi, nab, nab)
        div = np.einsum("...aa->...", nab)
        return {"ric": ric, "lie": 0.5 * lie2, "nabla": -nab2, "div": -div * div}

    vals = _collect(grid, fn, 2)
    return _result("yano", grid, {"Ric(xi,xi)": vals["ric"], "1/2|L_xi g|^2": vals["lie"],
                                  "-|nabla xi|^2": vals["nabla"], "-(div xi)^2": vals["div"]}, {}, base)


def bochner_residual(grid: QuadratureGrid, m: ChartMetric, lam, t: float = 0.0, base=None,
                     d: SolitonData | None = None) -> IdentityResult:
    """int Ric(grad l, grad l) + |Hess l|^2 - (Lap l)^2, which vanishes on closed manifolds.

    ``lam`` is a scalar field, or ``SOLVE`` together with ``d`` for the
    trace-derived soliton function.
    """
    if lam is SOLVE and d is None:
        raise ConfigurationError("the trace-derived soliton function needs the soliton data d")
    order = 4 if lam is SOLVE else 2

    def fn(nodes):
        if lam is SOLVE:
            f = SolitonFields(d, nodes, order)
            geo, L = f.geo, f.lam
        else:
            geo = LocalGeometry(m, nodes, t, order)
            L = geo.scalar(lam)
        gl = geo.grad(L).value
        H = geo.hess(L).value
        gi = geo.ginv0
        ric = np.einsum("...ab,...a,...b->...", geo.ricci.value, gl, gl)
        h2 = np.einsum("...ac,...bd,...ab,...cd->...", gi, gi, H, H)
        lap = np.einsum("...ab,...ab->...", gi, H)
        return {"ric": ric, "hess": h2, "lap": -lap * lap}

    vals = _collect(grid, fn, order)
    return _result("bochner", grid, {"Ric(grad l,grad l)": vals["ric"], "|Hess l|^2": vals["hess"],
                                     "-(Lap l)^2": vals["lap"]}, {}, base)


# ---------------------------------------------------------------------------
# soliton lemmas
# ---------------------------------------------------------------------------

LEMMAS = ("L2.1", "L2.2", "L2.3a", "L2.3b", "L2.4", "L2.5")


def _norms(geo: LocalGeometry):
    Q = geo.ricci_operator.value
    return np.einsum("...ab,...ba->...", Q, Q)  # |Q|^2 = tr(Q^2) for g-self-adjoint Q


def _lemma_terms(idn: str, d: SolitonData, nodes: np.ndarray) -> dict:
    n = d.n
    order = 4 if idn == "L2.4" else 3
    f = SolitonFields(d, nodes, order)
    geo = f.geo
    S = geo.scalar_curvature.value
    sig = f.sigma.value
    xi = f.xi.value

    if idn == "L2.1":
        return {"(l+rho S)S": sig * S, "-|Q|^2": -_norms(geo), "-1/2 S(n(l+rho S)-S)": -0.5 * S * (n * sig - S)}
    if idn == "L2.2":
        tf = _norms(geo) - S * S / n  # |Ric - (S/n) g|^2
        dS = geo.d(geo.scalar_curvature).value
        return {"lhs:|Ric-(S/n)g|^2": tf, "rhs:(n-2)/(2n) g(grad S,xi)": (n - 2) / (2.0 * n) * np.einsum("...a,...a->...", dS, xi)}
    if idn in ("L2.3a", "L2.3b"):
        pot = geo.scalar(d.potential_f)
        H = geo.hess(pot).value
        gi = geo.ginv0
        lapf = np.einsum("...ab,...ab->...", gi, H)
        E = H - (lapf / n)[:, None, None] * geo.g0
        lhs = np.einsum("...ac,...bd,...ab,...cd->...", gi, gi, E, E)
        gf = geo.grad(pot).value
        if idn == "L2.3b":
            dS = geo.d(geo.scalar_curvature).value
            return {"lhs:|Hess f-(Lap f/n)g|^2": lhs,
                    "rhs:(n-2)/(2n) g(grad S,grad f)": (n - 2) / (2.0 * n) * np.einsum("...a,...a->...", dS, gf)}
        coef = (n - 2) / (n * (1.0 - 2.0 * d.rho * (n - 1)))
        quarter = (n - 2) / (4.0 * n * (1.0 - 2.0 * d.rho * (n - 1)))
        ric = np.einsum("...ab,...a,...b->...", geo.ricci.value, gf, gf)
        dl = geo.d(f.lam).value
        cross = (n - 1) * np.einsum("...a,...a->...", dl, gf)
        return {"lhs:|Hess f-(Lap f/n)g|^2": lhs, "rhs:c Ric(grad f,grad f)": coef * ric,
                "rhs:c (n-1) g(grad l,grad f)": coef * cross,
                "info:quarter-coefficient rhs": quarter * (ric + cross)}
    if idn == "L2.4":
        lam = f.lam
        dl = geo.d(lam).value
        gl = geo.grad(lam).value
        lap = geo.lap(lam).value
        return {"Ric(grad l,xi)": np.einsum("...ab,...a,...b->...", geo.ricci.value, gl, xi),
                "(n-1)|grad l|^2": (n - 1) * np.einsum("...a,...a->...", dl, gl),
                "1/2 S Lap l": 0.5 * S * lap,
                "-(n-1) rho S Lap l": -(n - 1) * d.rho * S * lap}
    if idn == "L2.5":
        phi2 = geo.norm_operator(f.phi.value) ** 2
        dsig = geo.d(f.sigma).value
        dS = geo.d(geo.scalar_curvature).value
        return {"Ric(xi,xi)": np.einsum("...ab,...a,...b->...", geo.ricci.value, xi, xi),
                "-|phi|^2": -phi2,
                "xi((n-1)(l+rho S)-S/2)": np.einsum("...a,...a->...", (n - 1) * dsig - 0.5 * dS, xi)}
    raise ValueError(f"unknown lemma {idn!r}; choose from {', '.join(LEMMAS)}")


def _check_preconditions(idn: str, d: SolitonData, grid: QuadratureGrid) -> str | None:
    if not d.compact:
        return f"{idn} needs a compact manifold; example {d.name!r} is not compact"
    n = d.n
    if idn in ("L2.3a", "L2.3b") and d.potential_f is None:
        return f"{idn} needs a gradient soliton (xi = grad f) but no potential function is given"
    if idn == "L2.3a" and abs(1.0 - 2.0 * d.rho * (n - 1)) < 1e-12:
        return f"L2.3a is undefined at rho = 1/(2(n-1)) = {1.0 / (2 * (n - 1)):.6g}"

    def fn(nodes):
        f = SolitonFields(d, nodes, 2)
        out = {"res": f.soliton_norm()}
        if d.potential_f is not None:
            out["pot"] = f.potential_mismatch()
        return out

    vals = _collect(grid, fn, 2)
    res = float(vals["res"].max())
    if not res < SOLITON_PRECONDITION:
        return (f"{idn} holds only for solitons; soliton residual on the grid is {res:.3e} "
                f">= {SOLITON_PRECONDITION:.0e}")
    if idn in ("L2.3a", "L2.3b") and not float(vals["pot"].max()) < SOLITON_PRECONDITION:
        return f"{idn} needs xi = grad f; mismatch {float(vals['pot'].max()):.3e}"
    return None


def lemma_residual(idn: str, d: SolitonData, grid: QuadratureGrid | None = None, base: float | None = None,
                   check: bool = True) -> IdentityResult:
    """Evaluate an integral lemma by quadrature.

    Preconditions are enforced: a violated one raises ``PreconditionError``
    whose message carries the failing measurement.
    """
    if idn not in LEMMAS:
        raise ValueError(f"unknown lemma {idn!r}; choose from {', '.join(LEMMAS)}")
    if not d.compact:
        raise PreconditionError(f"{idn} needs a compact manifold; example {d.name!r} is not compact")
    grid = grid if grid is not None else grid_for(d)
    if check:
        why = _check_preconditions(idn, d, grid)
        if why:
            raise PreconditionError(why)
    order = 4 if idn == "L2.4" else 3
    vals = _collect(grid, lambda nodes: _lemma_terms(idn, d, nodes), order)
    lhs_terms = {k[4:]: v for k, v in vals.items() if k.startswith("lhs:")}
    rhs_terms = {k[4:]: v for k, v in vals.items() if k.startswith("rhs:")}
    info = {k[5:]: v for k, v in vals.items() if k.startswith("info:")}
    plain = {k: v for k, v in vals.items() if ":" not in k}
    if plain:
        lhs_terms = plain
    res = _result(idn, grid, lhs_terms, rhs_terms, base if base is not None else 1e-4)
    for k, v in info.items():
        res.terms[k] = integrate_values(grid, v)
    return res


def bianchi_sweep(grid: QuadratureGrid, m: ChartMetric | None = None, t: float = 0.0) -> float:
    """max over nodes of |(1/2) grad S - div Q|_g."""
    m = m if m is not None else grid.metric
    vals = _collect(grid, lambda nodes: {"r": bianchi_defect(LocalGeometry(m, nodes, t, 3))}, 3)
    return float(vals["r"].max())
