"""Truncated multivariate Taylor (jet) arithmetic.

A :class:`Jet` stores, for every entry of an array of shape ``shape``, the
Taylor coefficients ``c_alpha = (d^alpha f)(p) / alpha!`` of a scalar function
of ``nvars`` chart coordinates, for all multi-indices of total degree up to
the order of its :class:`JetSpace`.  Arithmetic and the elementary functions
in this module propagate those coefficients exactly (Leibniz and Faa di
Bruno), so derivatives come out to machine precision.

Each jet also tracks ``valid``: the highest degree whose coefficients are
meaningful.  Differentiation lowers it by one; products take the minimum.

The elementary functions (:func:`exp`, :func:`log`, ...) dispatch on type, so
the same field definition can be evaluated on plain floats/arrays (as the
finite-difference oracles in the tests do) or on jets.
"""
from __future__ import annotations

import functools
import math
from itertools import combinations_with_replacement
from typing import Iterable, Sequence

import numpy as np

from . import _accel

__all__ = [
    "JetSpace",
    "jet_space",
    "Jet",
    "variables",
    "constant",
    "as_jet",
    "jeinsum",
    "jinv",
    "stack",
    "exp",
    "log",
    "sqrt",
    "sin",
    "cos",
    "sinh",
    "cosh",
    "power",
]


def _multi_indices(nvars: int, degree: int) -> list[tuple[int, ...]]:
    out = []
    for combo in combinations_with_replacement(range(nvars), degree):
        alpha = [0] * nvars
        for v in combo:
            alpha[v] += 1
        out.append(tuple(alpha))
    return sorted(out, reverse=True)


class JetSpace:
    """Index tables for jets in ``nvars`` variables truncated at ``order``."""

    def __init__(self, nvars: int, order: int):
        if nvars < 1 or order < 0:
            raise ValueError("need nvars >= 1 and order >= 0")
        self.nvars = nvars
        self.order = order
        self.multi = [a for d in range(order + 1) for a in _multi_indices(nvars, d)]
        self.size = len(self.multi)
        self.index = {a: i for i, a in enumerate(self.multi)}
        self.degree = np.array([sum(a) for a in self.multi])
        self.factorial = np.array([math.prod(math.factorial(k) for k in a) for a in self.multi], dtype=float)
        self.unit = [self.index[tuple(int(i == v) for i in range(nvars))] for v in range(nvars)] if order else []

        left, right, target = [], [], []
        for i, a in enumerate(self.multi):
            for j, b in enumerate(self.multi):
                s = tuple(x + y for x, y in zip(a, b))
                if sum(s) <= order:
                    left.append(i)
                    right.append(j)
                    target.append(self.index[s])
        self.left = np.array(left, dtype=np.int64)
        self.right = np.array(right, dtype=np.int64)
        self.target = np.array(target, dtype=np.int64)
        self.scatter = np.zeros((len(target), self.size))
        self.scatter[np.arange(len(target)), self.target] = 1.0

        # d/dx_v: coefficient of beta in the derivative is (beta_v + 1) c_{beta + e_v}
        self.deriv = []
        for v in range(nvars):
            dst, src, fac = [], [], []
            for i, b in enumerate(self.multi):
                if sum(b) < order:
                    up = list(b)
                    up[v] += 1
                    dst.append(i)
                    src.append(self.index[tuple(up)])
                    fac.append(b[v] + 1.0)
            self.deriv.append((np.array(dst, dtype=np.int64), np.array(src, dtype=np.int64), np.array(fac)))

        self.above = [self.degree > k for k in range(order + 1)]

    def __repr__(self) -> str:
        return f"JetSpace(nvars={self.nvars}, order={self.order})"


@functools.lru_cache(maxsize=None)
def jet_space(nvars: int, order: int) -> JetSpace:
    return JetSpace(nvars, order)


class Jet:
    """An array of truncated Taylor expansions sharing one :class:`JetSpace`."""

    __array_ufunc__ = None
    __slots__ = ("coef", "space", "valid")

    def __init__(self, coef: np.ndarray, space: JetSpace, valid: int | None = None):
        coef = np.asarray(coef, dtype=float)
        if coef.shape[-1] != space.size:
            raise ValueError(f"last axis must have length {space.size}, got {coef.shape[-1]}")
        self.coef = coef
        self.space = space
        self.valid = space.order if valid is None else int(valid)
        if self.valid < 0:
            raise ValueError("derivative order exhausted: jet has no valid coefficients left")

    # -- inspection -----------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.coef.shape[:-1]

    @property
    def ndim(self) -> int:
        return self.coef.ndim - 1

    @property
    def value(self) -> np.ndarray:
        return self.coef[..., 0]

    def partial(self, alpha: Sequence[int]) -> np.ndarray:
        """Mixed partial derivative ``d^alpha`` at the base point."""
        alpha = tuple(alpha)
        if sum(alpha) > self.valid:
            raise ValueError(f"partial of degree {sum(alpha)} exceeds valid order {self.valid}")
        i = self.space.index[alpha]
        return self.coef[..., i] * self.space.factorial[i]

    def gradient(self) -> np.ndarray:
        return np.stack([self.coef[..., u] for u in self.space.unit], axis=-1)

    def __repr__(self) -> str:
        return f"Jet(shape={self.shape}, space={self.space!r}, valid={self.valid})"

    # -- structural -------------------------------------------------------
    def __getitem__(self, key) -> "Jet":
        if not isinstance(key, tuple):
            key = (key,)
        return Jet(self.coef[key + (slice(None),)], self.space, self.valid)

    def __len__(self) -> int:
        return self.coef.shape[0]

    def sum(self, axis=None) -> "Jet":
        if axis is None:
            axis = tuple(range(self.ndim))
        elif isinstance(axis, int):
            axis = (axis % self.ndim,)
        else:
            axis = tuple(a % self.ndim for a in axis)
        return Jet(self.coef.sum(axis=axis), self.space, self.valid)

    def transpose(self, *axes: int) -> "Jet":
        """Permute the trailing ``len(axes)`` array axes (leading batch axes stay put)."""
        r = len(axes)
        lead = self.ndim - r
        perm = list(range(lead)) + [lead + a for a in axes] + [self.ndim]
        return Jet(self.coef.transpose(perm), self.space, self.valid)

    def reshape(self, *shape) -> "Jet":
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return Jet(self.coef.reshape(tuple(shape) + (self.space.size,)), self.space, self.valid)

    def constant_part(self) -> np.ndarray:
        return self.coef[..., 0].copy()

    def nilpotent(self) -> "Jet":
        c = self.coef.copy()
        c[..., 0] = 0.0
        return Jet(c, self.space, self.valid)

    # -- calculus ---------------------------------------------------------
    def d(self, var: int) -> "Jet":
        """Partial derivative with respect to chart coordinate ``var``."""
        dst, src, fac = self.space.deriv[var]
        out = np.zeros_like(self.coef)
        out[..., dst] = self.coef[..., src] * fac
        return Jet(out, self.space, self.valid - 1)._truncate()

    def grad(self) -> "Jet":
        """Stack of coordinate partials on a new trailing axis."""
        return stack([self.d(v) for v in range(self.space.nvars)], axis=-1)

    def _truncate(self) -> "Jet":
        if self.valid < self.space.order:
            self.coef[..., self.space.above[self.valid]] = 0.0
        return self

    # -- arithmetic -------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Jet):
            if other.space is not self.space:
                raise ValueError("jets live in different spaces")
            return other
        return np.asarray(other, dtype=float)

    def __add__(self, other):
        other = self._coerce(other)
        if isinstance(other, Jet):
            return Jet(self.coef + other.coef, self.space, min(self.valid, other.valid))._truncate()
        shape = np.broadcast_shapes(self.shape, other.shape)
        c = np.array(np.broadcast_to(self.coef, shape + (self.space.size,)))
        c[..., 0] += other
        return Jet(c, self.space, self.valid)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.coef, self.space, self.valid)

    def __pos__(self):
        return self

    def __sub__(self, other):
        return self + (-other if isinstance(other, Jet) else -np.asarray(other, dtype=float))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if isinstance(other, Jet):
            return _product(self, other)
        return Jet(self.coef * other[..., None], self.space, self.valid)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if isinstance(other, Jet):
            return _product(self, reciprocal(other))
        return Jet(self.coef / other[..., None], self.space, self.valid)

    def __rtruediv__(self, other):
        return reciprocal(self) * other

    def __pow__(self, p):
        return power(self, p)


def _product(a: Jet, b: Jet) -> Jet:
    space = a.space
    shape = np.broadcast_shapes(a.shape, b.shape)
    C = space.size
    a2 = np.ascontiguousarray(np.broadcast_to(a.coef, shape + (C,))).reshape(-1, C)
    b2 = np.ascontiguousarray(np.broadcast_to(b.coef, shape + (C,))).reshape(-1, C)
    out = _accel.jet_mul(a2, b2, space.left, space.right, space.target, space.scatter)
    return Jet(out.reshape(shape + (C,)), space, min(a.valid, b.valid))._truncate()


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def variables(points, order: int) -> tuple[Jet, ...]:
    """Coordinate jets ``x_v = p_v + dx_v`` seeded at each row of ``points``."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = points.shape[-1]
    space = jet_space(n, order)
    out = []
    for v in range(n):
        c = np.zeros(points.shape[:-1] + (space.size,))
        c[..., 0] = points[..., v]
        if order:
            c[..., space.unit[v]] = 1.0
        out.append(Jet(c, space))
    return tuple(out)


def constant(value, space: JetSpace, shape=()) -> Jet:
    value = np.broadcast_to(np.asarray(value, dtype=float), shape)
    c = np.zeros(value.shape + (space.size,))
    c[..., 0] = value
    return Jet(c, space)


def as_jet(value, space: JetSpace, shape=()) -> Jet:
    """Promote a constant (or pass through a jet) and broadcast to ``shape``."""
    if isinstance(value, Jet):
        if value.shape == tuple(shape):
            return value
        return Jet(np.broadcast_to(value.coef, tuple(shape) + (space.size,)), value.space, value.valid)
    return constant(value, space, shape)


def stack(jets: Iterable[Jet], axis: int = 0) -> Jet:
    jets = list(jets)
    space = jets[0].space
    nd = jets[0].ndim
    ax = axis if axis >= 0 else nd + 1 + axis
    coef = np.stack([j.coef for j in jets], axis=ax)
    return Jet(coef, space, min(j.valid for j in jets))


# ---------------------------------------------------------------------------
# composition with univariate functions
# ---------------------------------------------------------------------------

def compose(x: Jet, derivs: Sequence[np.ndarray]) -> Jet:
    """``f(x)`` given ``derivs[m] = f^(m)(x0)`` for ``m = 0..x.valid``."""
    v = x.valid
    if len(derivs) < v + 1:
        raise ValueError(f"need {v + 1} derivatives, got {len(derivs)}")
    h = x.nilpotent()
    out = constant(np.asarray(derivs[v]) / math.factorial(v), x.space, x.shape)
    out.valid = v
    for m in range(v - 1, -1, -1):
        out = out * h + np.asarray(derivs[m]) / math.factorial(m)
    return out


def reciprocal(x: Jet) -> Jet:
    x0 = x.value
    return compose(x, [(-1.0) ** m * math.factorial(m) / x0 ** (m + 1) for m in range(x.valid + 1)])


def power(x, p):
    if not isinstance(x, Jet):
        return np.power(x, p)
    if float(p).is_integer() and p >= 0:
        p = int(p)
        out = constant(1.0, x.space, x.shape)
        base = x
        while p:
            if p & 1:
                out = out * base
            p >>= 1
            if p:
                base = base * base
        return out
    x0 = x.value
    derivs = []
    c = 1.0
    for m in range(x.valid + 1):
        derivs.append(c * x0 ** (p - m))
        c *= p - m
    return compose(x, derivs)


def _cyclic(x: Jet, seq) -> Jet:
    vals = [f(x.value) for f in seq]
    return compose(x, [vals[m % len(vals)] for m in range(x.valid + 1)])


def exp(x):
    if not isinstance(x, Jet):
        return np.exp(x)
    e = np.exp(x.value)
    return compose(x, [e] * (x.valid + 1))


def log(x):
    if not isinstance(x, Jet):
        return np.log(x)
    x0 = x.value
    derivs = [np.log(x0)] + [(-1.0) ** (m - 1) * math.factorial(m - 1) / x0 ** m for m in range(1, x.valid + 1)]
    return compose(x, derivs)


def sqrt(x):
    if not isinstance(x, Jet):
        return np.sqrt(x)
    return power(x, 0.5)


def sin(x):
    if not isinstance(x, Jet):
        return np.sin(x)
    return _cyclic(x, (np.sin, np.cos, lambda t: -np.sin(t), lambda t: -np.cos(t)))


def cos(x):
    if not isinstance(x, Jet):
        return np.cos(x)
    return _cyclic(x, (np.cos, lambda t: -np.sin(t), lambda t: -np.cos(t), np.sin))


def sinh(x):
    if not isinstance(x, Jet):
        return np.sinh(x)
    return _cyclic(x, (np.sinh, np.cosh))


def cosh(x):
    if not isinstance(x, Jet):
        return np.cosh(x)
    return _cyclic(x, (np.cosh, np.sinh))


# ---------------------------------------------------------------------------
# tensor contractions
# ---------------------------------------------------------------------------

def _spare_letter(used: str) -> str:
    for ch in "zyxwvutsrqponmlkjihgfedcba":
        if ch not in used:
            return ch
    raise ValueError("too many indices")


def jeinsum(subscripts: str, *operands) -> Jet:
    """Einstein summation over the trailing tensor axes of jets.

    Subscripts name only tensor axes; leading batch axes are implicit and
    broadcast.  Jet-jet pairs are multiplied as truncated series; plain
    arrays act as constants.
    """
    lhs, out_spec = subscripts.replace(" ", "").split("->")
    specs = lhs.split(",")
    if len(specs) != len(operands):
        raise ValueError("subscripts and operands disagree")
    acc, acc_spec = operands[0], specs[0]
    if len(operands) == 1:
        return _linear(acc, acc_spec, out_spec)
    for k in range(1, len(operands)):
        # letters still needed by the output or by operands further right
        needed = out_spec + "".join(specs[k + 1:])
        keep = "".join(dict.fromkeys(c for c in acc_spec + specs[k] if c in needed))
        acc = _pair(acc, acc_spec, operands[k], specs[k], keep)
        acc_spec = keep
    return _linear(acc, acc_spec, out_spec)


def _linear(a, spec: str, out_spec: str):
    if spec == out_spec:
        return a
    z = _spare_letter(spec + out_spec)
    if isinstance(a, Jet):
        return Jet(np.einsum(f"...{spec}{z}->...{out_spec}{z}", a.coef), a.space, a.valid)
    return np.einsum(f"...{spec}->...{out_spec}", a)


def _align(coef: np.ndarray, spec: str, letters: str, sizes: dict, has_coef: bool) -> np.ndarray:
    r = len(spec)
    tail = 1 if has_coef else 0
    lead = coef.ndim - r - tail
    order = sorted(range(r), key=lambda i: letters.index(spec[i]))
    perm = list(range(lead)) + [lead + i for i in order] + ([coef.ndim - 1] if tail else [])
    coef = coef.transpose(perm)
    present = {spec[i] for i in range(r)}
    shape = list(coef.shape[:lead]) + [sizes[c] if c in present else 1 for c in letters] + list(coef.shape[coef.ndim - tail:])
    return coef.reshape(shape)


def _pair(a, sa: str, b, sb: str, keep: str):
    letters = "".join(dict.fromkeys(sa + sb))
    sizes = {}
    for x, s in ((a, sa), (b, sb)):
        shp = x.shape if isinstance(x, Jet) else np.shape(x)
        for i, c in enumerate(s):
            sizes[c] = shp[len(shp) - len(s) + i]
    if isinstance(a, Jet) and isinstance(b, Jet):
        A = Jet(_align(a.coef, sa, letters, sizes, True), a.space, a.valid)
        B = Jet(_align(b.coef, sb, letters, sizes, True), b.space, b.valid)
        prod = A * B
    elif isinstance(a, Jet) or isinstance(b, Jet):
        j, js, k, ks = (a, sa, b, sb) if isinstance(a, Jet) else (b, sb, a, sa)
        J = _align(j.coef, js, letters, sizes, True)
        K = _align(np.asarray(k, dtype=float), ks, letters, sizes, False)
        prod = Jet(J * K[..., None], j.space, j.valid)
    else:
        prod = _align(np.asarray(a, float), sa, letters, sizes, False) * _align(np.asarray(b, float), sb, letters, sizes, False)
    return _linear(prod, letters, keep)


def jinv(g: Jet) -> Jet:
    """Inverse of a field of square matrices (trailing two axes), exact to the jet order.

    Uses ``(G0 + E)^-1 = sum_m (-G0^-1 E)^m G0^-1``, which terminates because
    ``E`` has no constant term.
    """
    g0inv = np.linalg.inv(g.value)
    e = g.nilpotent()
    step = jeinsum("ab,bc->ac", -g0inv, e)
    term = constant(g0inv, g.space, g0inv.shape)
    term.valid = g.valid
    out = term
    for _ in range(g.valid):
        term = jeinsum("ab,bc->ac", step, term)
        out = out + term
    return out
