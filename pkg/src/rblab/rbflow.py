"""Ricci-Bourguignon flow of surfaces in conformal gauge.

For g = e^{2u}(dx^2 + dy^2) in dimension two, Ric = (S/2) g with
S = -2 e^{-2u} Lap0(u), so dg/dt = -2(Ric - rho S g) reduces to

    du/dt = (1 - 2 rho) e^{-2u} Lap0(u),

Lap0 being the flat Laplacian.  The equation is parabolic for rho < 1/2,
stationary for rho = 1/2 and backward-parabolic beyond.  For rho = 0 the
shrinking-scale cigar u = -(1/2) log(e^{4t} + x^2 + y^2) solves it exactly.

Time stepping is classical RK4 with the explicit stability bound
dt <= h^2 / (4 (1 - 2 rho) max e^{-2u}).  The stencil kernel runs through
:mod:`rblab._accel` (numba when available); the exponential stays in numpy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Literal

import numpy as np

from . import _accel
from . import jets as jm
from .errors import BlowUpError, CFLError, ParameterError
from .io import dumps_csv

__all__ = [
    "FlowState",
    "Trajectory",
    "rhs",
    "cfl_bound",
    "scalar_curvature",
    "step",
    "run",
    "exact_cigar_u",
    "cigar_state",
    "torus_perturb_state",
    "flat_state",
    "flow_residual_of_example1",
    "TRAJECTORY_HEADER",
]

TRAJECTORY_HEADER = ("time", "max_abs_S", "area", "sup_err")
INNER_FRACTION = 0.8


def exact_cigar_u(t: float) -> Callable:
    """Conformal factor of the rho = 0 cigar solution at time ``t``."""
    A = math.exp(4.0 * t)

    def u(x, y):
        return -0.5 * np.log(A + np.asarray(x) ** 2 + np.asarray(y) ** 2)

    return u


def _cigar_reference(x, y, t):
    return exact_cigar_u(t)(x, y)


@dataclass
class FlowState:
    """Conformal factor on a uniform grid with spacing ``h``.

    Node (i, j) sits at ``origin + (i h, j h)``.  With ``boundary="dirichlet"``
    the outer ring is pinned, either to ``reference(x, y, t)`` or, when no
    reference is given, to its initial values.
    """

    u: np.ndarray
    h: float
    rho: float
    time: float = 0.0
    boundary: Literal["periodic", "dirichlet"] = "periodic"
    origin: tuple[float, float] = (0.0, 0.0)
    reference: Callable | None = None

    def __post_init__(self):
        self.u = np.ascontiguousarray(self.u, dtype=float)
        if self.u.ndim != 2 or min(self.u.shape) < 3:
            raise ParameterError("u must be a 2-D array with at least 3 nodes per side")
        if not self.h > 0:
            raise ParameterError(f"grid spacing must be positive, got {self.h}")
        if self.boundary not in ("periodic", "dirichlet"):
            raise ParameterError(f"boundary must be 'periodic' or 'dirichlet', got {self.boundary!r}")
        if not np.all(np.isfinite(self.u)):
            raise ParameterError("u must be finite")

    @property
    def periodic(self) -> bool:
        return self.boundary == "periodic"

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        nx, ny = self.u.shape
        x = self.origin[0] + self.h * np.arange(nx)
        y = self.origin[1] + self.h * np.arange(ny)
        return np.meshgrid(x, y, indexing="ij")

    def inner_mask(self, fraction: float = INNER_FRACTION) -> np.ndarray:
        """Nodes inside the centred box of the given linear fraction."""
        if self.periodic:
            return np.ones(self.u.shape, dtype=bool)
        X, Y = self.coordinates()
        nx, ny = self.u.shape
        cx = self.origin[0] + 0.5 * self.h * (nx - 1)
        cy = self.origin[1] + 0.5 * self.h * (ny - 1)
        hx = 0.5 * fraction * self.h * (nx - 1)
        hy = 0.5 * fraction * self.h * (ny - 1)
        eps = 1e-12 * self.h
        return (np.abs(X - cx) <= hx + eps) & (np.abs(Y - cy) <= hy + eps)

    def copy(self) -> "FlowState":
        return replace(self, u=self.u.copy())


def _check_rho(rho: float) -> float:
    if not rho <= 0.5:
        raise ParameterError(f"rho = {rho} > 1/2 makes the flow backward-parabolic; refused")
    return 1.0 - 2.0 * rho


def _conformal_laplacian(u: np.ndarray, h: float, periodic: bool) -> np.ndarray:
    """e^{-2u} Lap0(u); zero on the outer ring of a non-periodic grid."""
    return _accel.scaled_laplacian(u, np.exp(-2.0 * u), 1.0, 1.0 / (h * h), periodic)


def rhs(state: FlowState) -> np.ndarray:
    """du/dt on the grid (the pinned ring of a Dirichlet grid gets 0)."""
    coef = _check_rho(state.rho)
    if coef == 0.0:
        return np.zeros_like(state.u)
    return _accel.scaled_laplacian(state.u, np.exp(-2.0 * state.u), coef, 1.0 / (state.h ** 2), state.periodic)


def scalar_curvature(state: FlowState) -> np.ndarray:
    """S = -2 e^{-2u} Lap0(u); on Dirichlet grids only interior nodes are meaningful."""
    return -2.0 * _conformal_laplacian(state.u, state.h, state.periodic)


def _interior(a: np.ndarray, periodic: bool) -> np.ndarray:
    return a if periodic else a[1:-1, 1:-1]


def _bound(u: np.ndarray, h: float, coef: float, periodic: bool, time: float, step_no: int) -> float:
    with np.errstate(over="ignore"):
        emax = float(np.max(np.exp(-2.0 * _interior(u, periodic))))
    if not math.isfinite(emax):
        raise BlowUpError(time, step_no, f"e^(-2u) overflowed at t={time:.6g} (step {step_no})")
    return math.inf if emax == 0.0 else h * h / (4.0 * coef * emax)


def cfl_bound(state: FlowState) -> float:
    """Explicit stability limit h^2 / (4 (1 - 2 rho) max e^{-2u}) (infinite at rho = 1/2)."""
    coef = _check_rho(state.rho)
    if coef == 0.0:
        return math.inf
    return _bound(state.u, state.h, coef, state.periodic, state.time, 0)


_RING = (np.s_[0, :], np.s_[-1, :], np.s_[1:-1, 0], np.s_[1:-1, -1])


def _ring_coordinates(state: FlowState):
    X, Y = state.coordinates()
    return [X[sl] for sl in _RING], [Y[sl] for sl in _RING]


class _Pinner:
    def __init__(self, state: FlowState):
        self.state = state
        if not state.periodic and state.reference is not None:
            xs, ys = _ring_coordinates(state)
            self.xs, self.ys = xs, ys
        self.frozen = None if state.periodic else [state.u[sl].copy() for sl in _RING]

    def __call__(self, u: np.ndarray, t: float) -> None:
        s = self.state
        if s.periodic:
            return
        for k, sl in enumerate(_RING):
            if s.reference is not None:
                u[sl] = s.reference(self.xs[k], self.ys[k], t)
            else:
                u[sl] = self.frozen[k]


def _rk4(state: FlowState, dt: float, coef: float, pin: _Pinner, k1: np.ndarray | None = None) -> np.ndarray:
    u, t, h, per = state.u, state.time, state.h, state.periodic
    inv_h2 = 1.0 / (h * h)

    def f(v):
        return _accel.scaled_laplacian(v, np.exp(-2.0 * v), coef, inv_h2, per)

    if k1 is None:
        k1 = f(u)
    v = u + (0.5 * dt) * k1
    pin(v, t + 0.5 * dt)
    k2 = f(v)
    v = u + (0.5 * dt) * k2
    pin(v, t + 0.5 * dt)
    k3 = f(v)
    v = u + dt * k3
    pin(v, t + dt)
    k4 = f(v)
    out = u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    pin(out, t + dt)
    return out


def step(state: FlowState, dt: float) -> FlowState:
    """One RK4 step; refuses steps above the stability bound."""
    coef = _check_rho(state.rho)
    if not dt > 0:
        raise ParameterError(f"time step must be positive, got {dt}")
    if coef == 0.0:
        return replace(state, u=state.u.copy(), time=state.time + dt)
    bound = cfl_bound(state)
    if dt > bound * (1.0 + 1e-12):
        raise CFLError(dt, bound)
    new = _rk4(state, dt, coef, _Pinner(state))
    if not np.all(np.isfinite(new)):
        raise BlowUpError(state.time + dt, 1)
    return replace(state, u=new, time=state.time + dt)


@dataclass
class Trajectory:
    time: list = field(default_factory=list)
    max_abs_S: list = field(default_factory=list)
    area: list = field(default_factory=list)
    sup_err: list = field(default_factory=list)
    final: FlowState | None = None
    steps: int = 0

    def record(self, t, s, a, e):
        self.time.append(t)
        self.max_abs_S.append(s)
        self.area.append(a)
        self.sup_err.append(e)

    def rows(self):
        return zip(self.time, self.max_abs_S, self.area, self.sup_err)

    def to_csv(self) -> str:
        return dumps_csv(TRAJECTORY_HEADER, self.rows())

    def as_arrays(self) -> dict:
        return {k: np.asarray(getattr(self, k), dtype=float) for k in TRAJECTORY_HEADER}


def _monitors(state: FlowState, Eu: np.ndarray, mask, ref_grid) -> tuple[float, float, float | None]:
    per = state.periodic
    S = _interior(-2.0 * Eu, per)
    max_s = float(np.max(np.abs(S))) if S.size else 0.0
    with np.errstate(over="ignore"):
        area = float(np.sum(np.exp(2.0 * state.u)) * state.h ** 2)
    err = None
    if state.reference is not None:
        X, Y = ref_grid
        err = float(np.max(np.abs(state.u[mask] - state.reference(X, Y, state.time))))
    return max_s, area, err


def run(
    initial: FlowState,
    T: float,
    dt_policy: float | str | Callable[[FlowState], float] = "auto",
    safety: float = 0.9,
    record_every: int = 1,
) -> Trajectory:
    """Integrate to time ``initial.time + T``.

    ``dt_policy`` is a fixed step, ``"auto"`` (``safety`` times the current
    stability bound) or a callable of the state.  The last step is shortened
    to land on the final time.  Monitors are recorded at the start, every
    ``record_every`` accepted steps, and at the end.
    """
    if not (math.isfinite(T) and T >= 0):
        raise ParameterError(f"final time must be finite and nonnegative, got {T}")
    coef = _check_rho(initial.rho)
    state = initial.copy()
    t_end = initial.time + T
    per = state.periodic
    inv_h2 = 1.0 / (state.h ** 2)
    mask = state.inner_mask()
    X, Y = state.coordinates()
    ref_grid = (X[mask], Y[mask])
    pin = _Pinner(state)
    traj = Trajectory()

    def conf_lap(u):
        with np.errstate(over="ignore", invalid="ignore"):
            return _accel.scaled_laplacian(u, np.exp(-2.0 * u), 1.0, inv_h2, per)

    Eu = conf_lap(state.u)
    traj.record(state.time, *_monitors(state, Eu, mask, ref_grid))
    n = 0
    while state.time < t_end and t_end - state.time > 1e-14 * max(1.0, t_end):
        if coef == 0.0:
            dt = t_end - state.time if not isinstance(dt_policy, (int, float)) else min(float(dt_policy), t_end - state.time)
            state = replace(state, time=state.time + dt)
        else:
            bound = _bound(state.u, state.h, coef, per, state.time, n)
            if dt_policy == "auto":
                dt = safety * bound
            elif callable(dt_policy):
                dt = float(dt_policy(state))
            else:
                dt = float(dt_policy)
                if dt > bound * (1.0 + 1e-12):
                    raise CFLError(dt, bound)
            dt = min(dt, t_end - state.time)
            new = _rk4(state, dt, coef, pin, k1=coef * Eu)
            if not np.all(np.isfinite(new)):
                raise BlowUpError(state.time + dt, n + 1)
            state = replace(state, u=new, time=state.time + dt)
            Eu = conf_lap(state.u)
        n += 1
        done = not (t_end - state.time > 1e-14 * max(1.0, t_end))
        if n % record_every == 0 or done:
            traj.record(state.time, *_monitors(state, Eu, mask, ref_grid))
    traj.final = state
    traj.steps = n
    return traj


# ---------------------------------------------------------------------------
# initial data
# ---------------------------------------------------------------------------

def cigar_state(h: float = 1.0 / 32, rho: float = 0.0, half_width: float = 4.0, t0: float = 0.0) -> FlowState:
    """Cigar profile on [-L, L]^2 with Dirichlet data.

    For rho = 0 the boundary follows the exact solution and ``sup_err`` is
    measured against it; otherwise the boundary is frozen at the initial
    profile and no reference is attached.
    """
    _check_rho(rho)
    n = int(round(2.0 * half_width / h))
    if abs(n * h - 2.0 * half_width) > 1e-9 * half_width:
        raise ParameterError(f"h = {h} does not divide the box width {2 * half_width}")
    x = -half_width + h * np.arange(n + 1)
    X, Y = np.meshgrid(x, x, indexing="ij")
    u0 = _cigar_reference(X, Y, t0)
    return FlowState(u0, h, rho, t0, "dirichlet", (-half_width, -half_width),
                     _cigar_reference if rho == 0 else None)


def torus_perturb_state(n: int = 64, rho: float = 0.0, amplitude: float = 0.1) -> FlowState:
    """u = amplitude sin x sin y on the (2 pi)^2 torus."""
    _check_rho(rho)
    h = 2.0 * math.pi / n
    x = h * np.arange(n)
    X, Y = np.meshgrid(x, x, indexing="ij")
    return FlowState(amplitude * np.sin(X) * np.sin(Y), h, rho, 0.0, "periodic")


def flat_state(n: int = 32, rho: float = 0.0, value: float = 0.0) -> FlowState:
    _check_rho(rho)
    h = 2.0 * math.pi / n
    return FlowState(np.full((n, n), float(value)), h, rho, 0.0, "periodic")


# ---------------------------------------------------------------------------
# how far the time-dependent cigar is from an exact solution
# ---------------------------------------------------------------------------

def flow_residual_of_example1(
    rho: float,
    t: float,
    box: tuple[float, float] = (-3.0, 3.0),
    n: int = 21,
    return_field: bool = False,
):
    """sup |du/dt - (1 - 2 rho) e^{-2u} Lap0(u)| for u = -(1/2) log(e^{4(1-rho)t} + x^2 + y^2).

    Both derivatives come from jets in (x, y, t); nothing is differentiated by hand.
    """
    if not rho <= 1.0:
        raise ParameterError(f"rho must be <= 1, got {rho}")
    g = np.linspace(box[0], box[1], n)
    X, Y = np.meshgrid(g, g, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel(), np.full(X.size, float(t))], axis=-1)
    x, y, tt = jm.variables(pts, 2)
    u = jm.log(jm.exp(tt * (4.0 * (1.0 - rho))) + x * x + y * y) * -0.5
    u_t = u.partial((0, 0, 1))
    lap0 = u.partial((2, 0, 0)) + u.partial((0, 2, 0))
    res = np.abs(u_t - (1.0 - 2.0 * rho) * np.exp(-2.0 * u.value) * lap0)
    if return_field:
        return float(res.max()), res.reshape(X.shape)
    return float(res.max())
