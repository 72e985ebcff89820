"""ℝ^k-valued differential forms on a chart, and vector fields.

A p-form with values in ℝ^k is stored as k blocks of coefficients, one per
strictly increasing multi-index in lexicographic order (the order produced
by ``itertools.combinations``).  All operations return new forms whose
coefficient fields compute exact Jacobians from their inputs' Jacobians
(and Hessians, for d and the Lie bracket).
"""
from __future__ import annotations

from functools import lru_cache
from itertools import combinations, permutations
from math import comb
from typing import Mapping, Sequence

import numpy as np

from .ad import Jet, jeinsum, jmul
from .fields import (AnalyticField, ChartBox, ConstantField, DerivedField, SmoothField,
                     StackedField, as_coords, halton_points)

MAX_DEGREE = 3


@lru_cache(maxsize=None)
def multi_indices(n: int, p: int) -> tuple[tuple[int, ...], ...]:
    return tuple(combinations(range(n), p))


@lru_cache(maxsize=None)
def _position(n: int, p: int) -> dict:
    return {I: r for r, I in enumerate(multi_indices(n, p))}


def _perm_sign(seq) -> int:
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


@lru_cache(maxsize=None)
def wedge_tensor(n: int, p: int, q: int) -> np.ndarray:
    """T[I, J, K]: (a∧b)_I = Σ T[I,J,K] a_J b_K over strict multi-indices."""
    out = multi_indices(n, p + q)
    T = np.zeros((len(out), comb(n, p), comb(n, q)))
    pj, pk = _position(n, p), _position(n, q)
    for r, I in enumerate(out):
        for J in combinations(I, p):
            K = tuple(i for i in I if i not in J)
            T[r, pj[J], pk[K]] = _perm_sign(J + K)
    return T


@lru_cache(maxsize=None)
def interior_tensor(n: int, p: int) -> np.ndarray:
    """T[I, j, J]: (ι_X ω)_I = Σ T[I,j,J] X^j ω_J with deg ω = p."""
    out = multi_indices(n, p - 1)
    T = np.zeros((len(out), n, comb(n, p)))
    pos = _position(n, p)
    for r, I in enumerate(out):
        for j in range(n):
            if j in I:
                continue
            seq = (j,) + I
            T[r, j, pos[tuple(sorted(seq))]] = _perm_sign(seq)
    return T


@lru_cache(maxsize=None)
def d_tensor(n: int, p: int) -> np.ndarray:
    """D[I, J, l]: (dω)_I = Σ D[I,J,l] ∂_l ω_J (alternating-sum formula)."""
    out = multi_indices(n, p + 1)
    D = np.zeros((len(out), comb(n, p), n))
    pos = _position(n, p)
    for r, I in enumerate(out):
        for s, i in enumerate(I):
            rest = I[:s] + I[s + 1:]
            D[r, pos[rest], i] += (-1) ** s
    return D


@lru_cache(maxsize=None)
def full_tensor_map(n: int, p: int) -> np.ndarray:
    """E with shape (n,)*p + (m,) expanding strict coefficients to the full antisymmetric tensor."""
    E = np.zeros((n,) * p + (comb(n, p),))
    for r, I in enumerate(multi_indices(n, p)):
        for perm in permutations(range(p)):
            idx = tuple(I[i] for i in perm)
            E[idx + (r,)] = _perm_sign(perm)
    return E


# ---------------------------------------------------------------------------
# forms


class VForm:
    """ℝ^k-valued p-form with strict multi-index coefficient storage."""

    def __init__(self, chart: ChartBox, degree: int, k: int, coeffs: SmoothField):
        if not 0 <= degree <= MAX_DEGREE:
            raise ValueError(f"degree {degree} outside 0..{MAX_DEGREE}")
        if k < 1:
            raise ValueError("value dimension must be at least 1")
        n = chart.dim
        if coeffs.n_in != n:
            raise ValueError(f"coefficient field takes {coeffs.n_in} inputs, chart has dim {n}")
        if coeffs.n_out != k * comb(n, degree):
            raise ValueError(f"coefficient array length {coeffs.n_out} != k·C(n,p) = {k * comb(n, degree)}")
        self.chart = chart
        self.degree = degree
        self.k = k
        self.coeffs = coeffs

    @property
    def n(self) -> int:
        return self.chart.dim

    @property
    def m(self) -> int:
        return comb(self.n, self.degree)

    @property
    def is_constant(self) -> bool:
        return self.coeffs.is_constant

    def __repr__(self):
        return f"VForm(deg={self.degree}, k={self.k}, chart={self.chart.names})"

    # -- evaluation
    def at(self, x) -> np.ndarray:
        x = as_coords(x)
        return np.asarray(self.coeffs(x)).reshape(x.shape[:-1] + (self.k, self.m))

    def jet(self, x, order: int = 1) -> Jet:
        return self.coeffs.jet(as_coords(x), order).reshape(self.k, self.m)

    def djet(self, x, order: int = 1) -> Jet:
        return self.coeffs.djet(as_coords(x), order).reshape(self.k, self.m, self.n)

    def full(self, x) -> np.ndarray:
        """Antisymmetric component tensor, shape (k,) + (n,)*p."""
        return np.einsum("...r,ar->a...", full_tensor_map(self.n, self.degree), self.at(x))

    def full_jet(self, x, order: int = 1) -> Jet:
        E = full_tensor_map(self.n, self.degree)
        letters = "bcd"[: self.degree]
        return jeinsum(f"{letters}r,ar->a{letters}", E, self.jet(x, order))

    def coefficient(self, x, alpha: int, names: Sequence[str]) -> float:
        """Coefficient of d(names[0])∧… in slot alpha, with permutation sign."""
        idx = [self.chart.index(nm) for nm in names]
        if len(set(idx)) < len(idx):
            return 0.0
        sign = _perm_sign(idx)
        return sign * float(self.at(x)[alpha, _position(self.n, self.degree)[tuple(sorted(idx))]])

    def component(self, alpha: int) -> VForm:
        m = self.m
        return VForm(self.chart, self.degree, 1, self.coeffs.select(range(alpha * m, (alpha + 1) * m)))

    # -- algebra
    def __add__(self, other: VForm) -> VForm:
        _same_shape(self, other)
        if self.is_constant and other.is_constant:
            c = self.chart.center
            return VForm.constant(self.chart, self.degree, self.at(c) + other.at(c))
        a, b = self, other
        return _derived(self.chart, self.degree, self.k,
                        lambda x, o: a.jet(x, o) + b.jet(x, o))

    def __neg__(self) -> VForm:
        return self.scale(-1.0)

    def __sub__(self, other: VForm) -> VForm:
        return self + (-other)

    def scale(self, c: float) -> VForm:
        if self.is_constant:
            return VForm.constant(self.chart, self.degree, c * self.at(self.chart.center))
        a = self
        return _derived(self.chart, self.degree, self.k, lambda x, o: a.jet(x, o).scale(c))

    # -- constructors
    @classmethod
    def constant(cls, chart: ChartBox, degree: int, values) -> VForm:
        values = np.atleast_2d(np.asarray(values, dtype=float))
        return cls(chart, degree, values.shape[0], ConstantField(values.reshape(-1), chart.dim))

    @classmethod
    def zero(cls, chart: ChartBox, degree: int, k: int = 1) -> VForm:
        return cls.constant(chart, degree, np.zeros((k, comb(chart.dim, degree))))

    @classmethod
    def from_terms(cls, chart: ChartBox, degree: int,
                   slots: Sequence[Mapping[tuple[str, ...], float | SmoothField]]) -> VForm:
        """Build from per-slot dictionaries ``{("q", "p"): coefficient, ...}``.

        Coefficients are numbers or scalar fields on the chart; index tuples
        may be in any order (the permutation sign is applied).
        """
        n, k = chart.dim, len(slots)
        pos = _position(n, degree)
        m = comb(n, degree)
        const = np.zeros((k, m))
        fields: dict[tuple[int, int], list[tuple[int, SmoothField]]] = {}
        for a, slot in enumerate(slots):
            for names, c in slot.items():
                if isinstance(names, str):
                    names = (names,) if degree == 1 else tuple(names.split("^"))
                idx = [chart.index(nm) for nm in names]
                if len(idx) != degree:
                    raise ValueError(f"term {names} does not have degree {degree}")
                if len(set(idx)) < degree:
                    continue
                sign = _perm_sign(idx)
                r = pos[tuple(sorted(idx))]
                if isinstance(c, SmoothField):
                    fields.setdefault((a, r), []).append((sign, c))
                else:
                    const[a, r] += sign * float(c)
        if not fields:
            return cls.constant(chart, degree, const)
        entries = []
        for a in range(k):
            for r in range(m):
                terms = fields.get((a, r), [])
                entries.append((const[a, r], terms))
        if all(all(isinstance(f, AnalyticField) for _, f in terms) for _, terms in entries):
            def fn(x, entries=entries):
                out = []
                for c0, terms in entries:
                    v = c0
                    for sign, f in terms:
                        v = v + sign * f.fn(x)[0]
                    out.append(v)
                return out
            return cls(chart, degree, k, AnalyticField(fn, n, k * m, "form"))
        def jet_fn(x, order, entries=entries):
            val = np.array([c0 for c0, _ in entries])
            jac = np.zeros((len(entries), n)) if order else None
            for r, (_, terms) in enumerate(entries):
                for sign, f in terms:
                    val[r] += sign * f(x)[0]
                    if order:
                        jac[r] += sign * f.jacobian(x)[0]
            return Jet(val, jac)
        return cls(chart, degree, k, DerivedField(jet_fn, n, k * m, "form"))

    @classmethod
    def stack(cls, parts: Sequence[VForm]) -> VForm:
        """ℝ^k-valued form from k scalar forms of equal degree."""
        first = parts[0]
        for p in parts[1:]:
            if p.degree != first.degree or p.n != first.n:
                raise ValueError("stacked forms must share degree and chart")
        return cls(first.chart, first.degree, sum(p.k for p in parts),
                   StackedField([p.coeffs for p in parts]))

    @classmethod
    def function(cls, chart: ChartBox, f: SmoothField) -> VForm:
        return cls(chart, 0, f.n_out, f)


def _same_shape(a: VForm, b: VForm):
    if a.n != b.n or a.chart.names != b.chart.names:
        raise ValueError("forms live on different charts")
    if a.degree != b.degree or a.k != b.k:
        raise ValueError("forms differ in degree or value dimension")


def _derived(chart: ChartBox, degree: int, k: int, jet_fn) -> VForm:
    n = chart.dim
    size = k * comb(n, degree)

    def flat(x, order):
        return jet_fn(x, order).reshape(size)

    return VForm(chart, degree, k, DerivedField(flat, n, size))


def freeze(form: VForm, samples: int = 16, seed: int = 0, tol: float = 1e-12) -> VForm:
    """Replace coefficients by constants when they are constant at sampled points."""
    if form.is_constant:
        return form
    pts = halton_points(form.chart, samples, seed)
    vals = np.array([form.at(x) for x in pts])
    if np.max(np.abs(vals - vals[0])) <= tol * max(1.0, np.max(np.abs(vals))):
        return VForm.constant(form.chart, form.degree, vals[0])
    return form


def _check_chart(a, b):
    if a.chart.dim != b.chart.dim:
        raise ValueError(f"chart mismatch: dims {a.chart.dim} and {b.chart.dim}")


# ---------------------------------------------------------------------------
# vector fields


class VectorFieldRep:
    def __init__(self, chart: ChartBox, components: SmoothField):
        if components.n_in != chart.dim or components.n_out != chart.dim:
            raise ValueError("vector field arity must match the chart dimension")
        self.chart = chart
        self.components = components

    def at(self, x) -> np.ndarray:
        return self.components(as_coords(x))

    def jet(self, x, order: int = 1) -> Jet:
        return self.components.jet(as_coords(x), order)

    def djet(self, x, order: int = 1) -> Jet:
        return self.components.djet(as_coords(x), order)

    @classmethod
    def constant(cls, chart: ChartBox, values) -> VectorFieldRep:
        return cls(chart, ConstantField(values, chart.dim))

    @classmethod
    def coordinate(cls, chart: ChartBox, name: str) -> VectorFieldRep:
        v = np.zeros(chart.dim)
        v[chart.index(name)] = 1.0
        return cls.constant(chart, v)


class KVectorFieldRep:
    """X = (X_1, …, X_k), components laid out as [α][i]."""

    def __init__(self, chart: ChartBox, k: int, components: SmoothField):
        if components.n_in != chart.dim or components.n_out != k * chart.dim:
            raise ValueError("k-vector field arity must be (n, k·n)")
        self.chart = chart
        self.k = k
        self.components = components

    def at(self, x) -> np.ndarray:
        x = as_coords(x)
        return self.components(x).reshape(x.shape[:-1] + (self.k, self.chart.dim))

    def jet(self, x, order: int = 1) -> Jet:
        return self.components.jet(as_coords(x), order).reshape(self.k, self.chart.dim)

    def component(self, alpha: int) -> VectorFieldRep:
        n = self.chart.dim
        return VectorFieldRep(self.chart, self.components.select(range(alpha * n, (alpha + 1) * n)))

    @classmethod
    def from_fields(cls, fields: Sequence[VectorFieldRep]) -> KVectorFieldRep:
        chart = fields[0].chart
        return cls(chart, len(fields), StackedField([f.components for f in fields]))


# ---------------------------------------------------------------------------
# operations


def barwedge(a: VForm, b: VForm) -> VForm:
    """Componentwise wedge Σ_α (a^α ∧ b^α) ⊗ e_α."""
    _check_chart(a, b)
    if a.k != b.k:
        raise ValueError(f"value dimension mismatch: {a.k} vs {b.k}")
    p, q = a.degree, b.degree
    if p + q > MAX_DEGREE:
        raise ValueError(f"degree overflow: {p} + {q} > {MAX_DEGREE}")
    T = wedge_tensor(a.n, p, q)
    if a.is_constant and b.is_constant:
        c = a.chart.center
        return VForm.constant(a.chart, p + q, np.einsum("IJK,aJ,aK->aI", T, a.at(c), b.at(c)))
    return _derived(a.chart, p + q, a.k,
                    lambda x, o: jeinsum("IJK,aJ,aK->aI", T, a.jet(x, o), b.jet(x, o)))


def wedge(a: VForm, b: VForm) -> VForm:
    if a.k != 1 or b.k != 1:
        raise ValueError("wedge takes scalar-valued forms; use barwedge for ℝ^k values")
    return barwedge(a, b)


def interior_product(X: VectorFieldRep, w: VForm) -> VForm:
    if w.degree < 1:
        raise ValueError("interior product of a 0-form is undefined")
    _check_chart(X, w)
    T = interior_tensor(w.n, w.degree)
    return _derived(w.chart, w.degree - 1, w.k,
                    lambda x, o: jeinsum("IjJ,j,aJ->aI", T, X.jet(x, o), w.jet(x, o)))


def contract_kvector(X: KVectorFieldRep, w: VForm) -> VForm:
    """ι_X w = Σ_α ι_{X_α} w^α, a scalar-valued form."""
    if X.k != w.k:
        raise ValueError(f"k mismatch: k-vector has {X.k}, form has {w.k}")
    if w.degree < 1:
        raise ValueError("interior product of a 0-form is undefined")
    _check_chart(X, w)
    T = interior_tensor(w.n, w.degree)
    return _derived(w.chart, w.degree - 1, 1,
                    lambda x, o: jeinsum("IjJ,aj,aJ->I", T, X.jet(x, o), w.jet(x, o)).reshape(1, -1))


def exterior_derivative(w: VForm) -> VForm:
    if w.degree >= MAX_DEGREE:
        raise ValueError(f"d of a degree-{w.degree} form exceeds the degree cap")
    if w.is_constant:
        return VForm.zero(w.chart, w.degree + 1, w.k)
    D = d_tensor(w.n, w.degree)
    return _derived(w.chart, w.degree + 1, w.k,
                    lambda x, o: jeinsum("IJl,aJl->aI", D, w.djet(x, o)))


def lie_derivative(X: VectorFieldRep, w: VForm) -> VForm:
    """Cartan formula ℒ_X = d∘ι_X + ι_X∘d."""
    if w.degree > 2:
        raise ValueError("Lie derivative supported up to degree 2")
    if w.degree == 0:
        return interior_product(X, exterior_derivative(w))
    return exterior_derivative(interior_product(X, w)) + interior_product(X, exterior_derivative(w))


def lie_bracket(X: VectorFieldRep, Y: VectorFieldRep) -> VectorFieldRep:
    """[X, Y]^i = X^j ∂_j Y^i − Y^j ∂_j X^i."""
    _check_chart(X, Y)
    n = X.chart.dim

    def jet_fn(x, o):
        return (jeinsum("ij,j->i", Y.djet(x, o), X.jet(x, o))
                - jeinsum("ij,j->i", X.djet(x, o), Y.jet(x, o)))

    return VectorFieldRep(X.chart, DerivedField(jet_fn, n, n, "bracket"))


def _minors_jet(A: Jet, p: int, N: int, n: int) -> Jet:
    """p×p minors det A[J, I] for strict J ⊂ range(N), I ⊂ range(n)."""
    Js = np.array(multi_indices(N, p), dtype=int).reshape(-1, p)
    Is = np.array(multi_indices(n, p), dtype=int).reshape(-1, p)
    total = None
    for perm in permutations(range(p)):
        sign = _perm_sign(perm)
        term = None
        for r in range(p):
            rows = Js[:, r][:, None]
            cols = Is[:, perm[r]][None, :]
            factor = Jet(A.val[rows, cols], None if A.jac is None else A.jac[rows, cols, :])
            term = factor if term is None else jmul(term, factor)
        term = term.scale(sign)
        total = term if total is None else total + term
    return total


def pullback(phi: SmoothField, w: VForm, source: ChartBox) -> VForm:
    """φ*w for a map φ from ``source`` into the chart of w."""
    if phi.n_out != w.n:
        raise ValueError(f"map lands in dim {phi.n_out}, form lives in dim {w.n}")
    if phi.n_in != source.dim:
        raise ValueError("map input dimension differs from the source chart")
    p, n, N = w.degree, source.dim, w.n
    if p == 0 and isinstance(phi, AnalyticField) and isinstance(w.coeffs, AnalyticField):
        return VForm(source, 0, w.k, w.coeffs.compose(phi))
    if p == 0 and w.is_constant:
        return VForm.constant(source, 0, w.at(w.chart.center))

    def jet_fn(x, o):
        y = phi(x)
        W = w.jet(y, o)
        if o:
            W = Jet(W.val, W.jac @ phi.jacobian(x))
        if p == 0:
            return W
        A = phi.djet(x, o)
        M = _minors_jet(A, p, N, n)
        return jeinsum("aJ,JI->aI", W, M)

    return _derived(source, p, w.k, jet_fn)
