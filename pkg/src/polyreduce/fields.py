"""Charts, points, and smooth fields with the derivative contract.

Every field maps points of an n-dimensional chart to m reals and exposes a
Jacobian.  Analytic fields are written as Python functions over scalars and
are differentiated with :class:`~polyreduce.ad.Dual`; derived fields build
their Jacobian with jets; plain numeric callables fall back to central
differences.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

from .ad import Dual, Jet

EPS = np.finfo(float).eps
FD_STEP = EPS ** (1.0 / 3.0)


@dataclass(frozen=True)
class ChartBox:
    names: tuple[str, ...]
    bounds: tuple[tuple[float, float], ...]
    # Darboux roles per coordinate: ("base", a), ("field", i) or ("momentum", i, a)
    roles: tuple[tuple, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "bounds", tuple((float(a), float(b)) for a, b in self.bounds))
        if len(self.names) < 1:
            raise ValueError("chart needs at least one coordinate")
        if len(set(self.names)) != len(self.names):
            raise ValueError(f"duplicate coordinate names in {self.names}")
        if len(self.bounds) != len(self.names):
            raise ValueError("bounds and names differ in length")
        for name, (a, b) in zip(self.names, self.bounds):
            if not a <= b:
                raise ValueError(f"empty interval for {name}: [{a}, {b}]")
        if self.roles is not None:
            object.__setattr__(self, "roles", tuple(tuple(r) for r in self.roles))
            if len(self.roles) != len(self.names):
                raise ValueError("roles and names differ in length")

    @property
    def dim(self) -> int:
        return len(self.names)

    @property
    def lower(self) -> np.ndarray:
        return np.array([a for a, _ in self.bounds])

    @property
    def upper(self) -> np.ndarray:
        return np.array([b for _, b in self.bounds])

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def contains(self, x, slack: float = 1e-12) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - slack) and np.all(x <= self.upper + slack))

    def point(self, coords) -> Point:
        return Point(np.asarray(coords, dtype=float), self)

    def with_names(self, names) -> ChartBox:
        return ChartBox(tuple(names), self.bounds, self.roles)

    def prepend(self, names, bounds) -> ChartBox:
        roles = None
        return ChartBox(tuple(names) + self.names, tuple(bounds) + self.bounds, roles)

    @property
    def is_darboux(self) -> bool:
        return self.roles is not None

    def darboux_layout(self):
        """(k, base[a], field[i], momentum[i][a]) index tables for a Darboux chart."""
        if self.roles is None:
            raise ValueError("chart is not tagged with Darboux roles")
        base = {r[1]: j for j, r in enumerate(self.roles) if r[0] == "base"}
        fields_ = {r[1]: j for j, r in enumerate(self.roles) if r[0] == "field"}
        mom = {(r[1], r[2]): j for j, r in enumerate(self.roles) if r[0] == "momentum"}
        k, nf = len(base), len(fields_)
        if sorted(base) != list(range(k)) or sorted(fields_) != list(range(nf)):
            raise ValueError("Darboux roles must number base and field slots from 0")
        if set(mom) != {(i, a) for i in range(nf) for a in range(k)}:
            raise ValueError("Darboux chart needs a momentum p_i^a for every field i and slot a")
        return (k, [base[a] for a in range(k)], [fields_[i] for i in range(nf)],
                [[mom[i, a] for a in range(k)] for i in range(nf)])


@dataclass(frozen=True)
class Point:
    coords: np.ndarray
    chart: ChartBox

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        if c.shape != (self.chart.dim,):
            raise ValueError(f"point has {c.shape} coordinates, chart has dim {self.chart.dim}")
        object.__setattr__(self, "coords", c)


def as_coords(x) -> np.ndarray:
    if isinstance(x, Point):
        return x.coords
    return np.asarray(x, dtype=float)


def halton_points(chart: ChartBox | Sequence, count: int, seed: int = 0) -> np.ndarray:
    """Scrambled Halton points in a box; deterministic for a given seed."""
    bounds = chart.bounds if isinstance(chart, ChartBox) else tuple(chart)
    lo = np.array([a for a, _ in bounds], dtype=float)
    hi = np.array([b for _, b in bounds], dtype=float)
    if count < 1:
        raise ValueError("sample count must be positive")
    if len(bounds) == 0:
        return np.zeros((count, 0))
    u = qmc.Halton(d=len(bounds), scramble=True, seed=seed).random(count)
    return lo + u * (hi - lo)


# ---------------------------------------------------------------------------
# fields


class SmoothField:
    """Map from n chart coordinates to m reals with value and Jacobian access.

    Subclasses implement ``_eval`` and ``_jacobian`` for a single point; the
    public methods accept a point ``(n,)`` or a batch ``(N, n)``.
    """

    n_in: int
    n_out: int

    def __call__(self, x) -> np.ndarray:
        x = as_coords(x)
        if x.ndim == 2:
            return np.array([self._eval(xi) for xi in x]).reshape(len(x), self.n_out)
        return self._eval(x)

    def jacobian(self, x) -> np.ndarray:
        x = as_coords(x)
        if x.ndim == 2:
            return np.array([self._jacobian(xi) for xi in x]).reshape(len(x), self.n_out, self.n_in)
        return self._jacobian(x)

    def hessian(self, x) -> np.ndarray:
        """Second derivatives ``H[i, j, l] = ∂_l ∂_j f_i``.

        Default: central differences of the Jacobian.  Analytic fields
        override with exact values.
        """
        x = as_coords(x)
        n = self.n_in
        H = np.empty((self.n_out, n, n))
        for l in range(n):
            h = FD_STEP * max(1.0, abs(x[l]))
            e = np.zeros(n)
            e[l] = h
            H[:, :, l] = (self._jacobian(x + e) - self._jacobian(x - e)) / (2 * h)
        return H

    def jet(self, x, order: int = 1) -> Jet:
        x = as_coords(x)
        if order == 0:
            return Jet(self._eval(x))
        return Jet(self._eval(x), self._jacobian(x))

    def djet(self, x, order: int = 1) -> Jet:
        """Jet of the Jacobian: value ∂f, derivative ∂²f."""
        x = as_coords(x)
        if order == 0:
            return Jet(self._jacobian(x))
        return Jet(self._jacobian(x), self.hessian(x))

    # default single-point implementations
    def _eval(self, x) -> np.ndarray:
        raise NotImplementedError

    def _jacobian(self, x) -> np.ndarray:
        return fd_jacobian(self._eval, x, self.n_out)

    def select(self, indices) -> SmoothField:
        idx = np.asarray(indices, dtype=int)
        return SelectedField(self, idx)

    @property
    def is_constant(self) -> bool:
        return False


def fd_jacobian(f: Callable, x: np.ndarray, m: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    J = np.empty((m, x.size))
    for j in range(x.size):
        h = FD_STEP * max(1.0, abs(x[j]))
        e = np.zeros_like(x)
        e[j] = h
        J[:, j] = (np.asarray(f(x + e)) - np.asarray(f(x - e))).reshape(m) / (2 * h)
    return J


class AnalyticField(SmoothField):
    """Field given by a function over scalars that accepts :class:`Dual` inputs.

    ``fn`` receives a list of n scalars (floats, arrays or duals) and returns a
    sequence of m scalars.  Evaluation is batched; derivatives are exact.
    """

    def __init__(self, fn: Callable, n_in: int, n_out: int, label: str = ""):
        self.fn = fn
        self.n_in = n_in
        self.n_out = n_out
        self.label = label

    def _outputs(self, args):
        out = self.fn(args)
        if len(out) != self.n_out:
            raise ValueError(f"{self.label or 'field'} returned {len(out)} outputs, expected {self.n_out}")
        return out

    def __call__(self, x):
        x = as_coords(x)
        out = self._outputs([x[..., i] for i in range(self.n_in)])
        batch = x.shape[:-1]
        return np.stack([np.broadcast_to(np.asarray(o, dtype=float), batch) for o in out], axis=-1)

    _eval = __call__

    def _derivs(self, x, second: bool):
        x = as_coords(x)
        batch = x.shape[:-1]
        n = self.n_in
        out = self._outputs(Dual.seed(x, second_order=second))
        grads, hesses = [], []
        for o in out:
            if isinstance(o, Dual):
                grads.append(np.broadcast_to(o.g, batch + (n,)))
                if second:
                    hesses.append(np.broadcast_to(o.h, batch + (n, n)))
            else:
                grads.append(np.zeros(batch + (n,)))
                if second:
                    hesses.append(np.zeros(batch + (n, n)))
        J = np.stack(grads, axis=-2)
        H = np.stack(hesses, axis=-3) if second else None
        return J, H

    def jacobian(self, x):
        return self._derivs(x, False)[0]

    _jacobian = jacobian

    def hessian(self, x):
        return self._derivs(x, True)[1]

    def compose(self, inner: AnalyticField) -> AnalyticField:
        """self ∘ inner, still analytic."""
        if inner.n_out != self.n_in:
            raise ValueError(f"cannot compose: inner gives {inner.n_out}, outer takes {self.n_in}")
        outer_fn, inner_fn = self.fn, inner.fn
        return AnalyticField(lambda x: outer_fn(list(inner_fn(x))), inner.n_in, self.n_out,
                             label=f"{self.label}∘{inner.label}")

    def select(self, indices):
        idx = [int(i) for i in indices]
        fn = self.fn
        return AnalyticField(lambda x: [fn(x)[i] for i in idx], self.n_in, len(idx), self.label)


class ConstantField(SmoothField):
    def __init__(self, values, n_in: int):
        self.values = np.array(values, dtype=float).reshape(-1)
        self.values.setflags(write=False)
        self.n_in = n_in
        self.n_out = self.values.size

    def __call__(self, x):
        x = as_coords(x)
        return np.broadcast_to(self.values, x.shape[:-1] + (self.n_out,)).copy()

    _eval = __call__

    def jacobian(self, x):
        x = as_coords(x)
        return np.zeros(x.shape[:-1] + (self.n_out, self.n_in))

    _jacobian = jacobian

    def hessian(self, x):
        x = as_coords(x)
        return np.zeros(x.shape[:-1] + (self.n_out, self.n_in, self.n_in))

    def select(self, indices):
        return ConstantField(self.values[np.asarray(indices, dtype=int)], self.n_in)

    @property
    def is_constant(self) -> bool:
        return True


class NumericField(SmoothField):
    """Black-box callable; Jacobian by central differences."""

    def __init__(self, fn: Callable, n_in: int, n_out: int):
        self.fn = fn
        self.n_in = n_in
        self.n_out = n_out

    def _eval(self, x):
        return np.asarray(self.fn(x), dtype=float).reshape(self.n_out)


class DerivedField(SmoothField):
    """Field defined by a jet function ``jet_fn(x, order) -> Jet``.

    Order 0 asks for the value only; order 1 also asks for the Jacobian.
    Hessians fall back to differencing the Jacobian.
    """

    def __init__(self, jet_fn: Callable, n_in: int, n_out: int, label: str = ""):
        self.jet_fn = jet_fn
        self.n_in = n_in
        self.n_out = n_out
        self.label = label

    def _eval(self, x):
        return self.jet_fn(x, 0).val.reshape(self.n_out)

    def _jacobian(self, x):
        j = self.jet_fn(x, 1)
        if j.jac is None:
            return fd_jacobian(self._eval, x, self.n_out)
        return j.jac.reshape(self.n_out, self.n_in)

    def jet(self, x, order: int = 1) -> Jet:
        x = as_coords(x)
        j = self.jet_fn(x, order)
        if order and j.jac is None:
            return Jet(j.val.reshape(self.n_out), self._jacobian(x))
        return j.reshape(self.n_out)


class SelectedField(SmoothField):
    def __init__(self, base: SmoothField, idx: np.ndarray):
        self.base = base
        self.idx = idx
        self.n_in = base.n_in
        self.n_out = len(idx)

    def _eval(self, x):
        return self.base._eval(x)[self.idx]

    def _jacobian(self, x):
        return self.base._jacobian(x)[self.idx]

    def hessian(self, x):
        return self.base.hessian(as_coords(x))[self.idx]

    @property
    def is_constant(self) -> bool:
        return self.base.is_constant


class StackedField(SmoothField):
    """Concatenation of several fields on the same chart."""

    def __init__(self, parts: Sequence[SmoothField]):
        self.parts = list(parts)
        n = {p.n_in for p in self.parts}
        if len(n) != 1:
            raise ValueError("stacked fields must share the input dimension")
        self.n_in = n.pop()
        self.n_out = sum(p.n_out for p in self.parts)

    def _eval(self, x):
        return np.concatenate([p(x) for p in self.parts])

    def _jacobian(self, x):
        return np.concatenate([p.jacobian(x) for p in self.parts], axis=0)

    def hessian(self, x):
        return np.concatenate([p.hessian(as_coords(x)) for p in self.parts], axis=0)

    def __call__(self, x):
        x = as_coords(x)
        if x.ndim == 2 and all(isinstance(p, (AnalyticField, ConstantField)) for p in self.parts):
            return np.concatenate([p(x) for p in self.parts], axis=-1)
        return super().__call__(x)

    @property
    def is_constant(self) -> bool:
        return all(p.is_constant for p in self.parts)


def analytic(n_in: int, n_out: int = 1, label: str = ""):
    """Decorator turning ``fn(x) -> sequence`` into an :class:`AnalyticField`."""
    def wrap(fn):
        return AnalyticField(fn, n_in, n_out, label or fn.__name__)
    return wrap


def coordinate_map(n_in: int, exprs: Callable, n_out: int, label: str = "") -> AnalyticField:
    return AnalyticField(exprs, n_in, n_out, label)


def identity_map(n: int) -> AnalyticField:
    return AnalyticField(lambda x: list(x), n, n, "id")


def projection_map(n: int, keep: Sequence[int]) -> AnalyticField:
    keep = [int(i) for i in keep]
    return AnalyticField(lambda x: [x[i] for i in keep], n, len(keep), "pr")


def check_jacobian_contract(f: SmoothField, chart: ChartBox, count: int = 20, seed: int = 0,
                            rtol: float = 1e-5) -> float:
    """Largest relative disagreement between ``f.jacobian`` and central differences.

    The scale is max(1, |J|∞) per point; the contract holds when the result
    is at most ``rtol``.
    """
    worst = 0.0
    for x in halton_points(chart, count, seed):
        J = np.asarray(f.jacobian(x))
        Jfd = fd_jacobian(lambda y: f(y), x, f.n_out)
        scale = max(1.0, float(np.max(np.abs(J))) if J.size else 1.0)
        err = float(np.max(np.abs(J - Jfd))) / scale if J.size else 0.0
        worst = max(worst, err)
    return worst
