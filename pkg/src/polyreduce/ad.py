"""Forward-mode automatic differentiation.

Two layers live here.

``Dual`` is a batched second-order dual number (value, gradient, Hessian)
used to differentiate analytic coordinate expressions.  The value may be a
float or an array of any batch shape; gradients carry one trailing axis and
Hessians two.  Passing ``hess=None`` runs in first-order mode.

``Jet`` pairs an array value with its Jacobian with respect to the chart
point.  Library operations (contractions, linear solves) push jets through
the product rule so derived fields get exact Jacobians whenever their inputs
have them.
"""
from __future__ import annotations

import string

import numpy as np


def _bv(v):
    # batch value with room for one trailing axis
    return np.asarray(v)[..., None]


def _bvv(v):
    return np.asarray(v)[..., None, None]


def _outer(a, b):
    return a[..., :, None] * b[..., None, :]


class Dual:
    __slots__ = ("v", "g", "h")
    __array_ufunc__ = None

    def __init__(self, v, g, h=None):
        self.v = v
        self.g = g
        self.h = h

    @classmethod
    def seed(cls, values, second_order: bool = False) -> list[Dual]:
        """Independent variables for a point (shape (n,)) or batch (shape (..., n))."""
        values = np.asarray(values, dtype=float)
        n = values.shape[-1]
        batch = values.shape[:-1]
        eye = np.eye(n)
        out = []
        for i in range(n):
            g = np.broadcast_to(eye[i], batch + (n,))
            h = np.zeros(batch + (n, n)) if second_order else None
            out.append(cls(values[..., i], g, h))
        return out

    def _lift(self, c) -> Dual:
        return Dual(c, np.zeros_like(self.g), None if self.h is None else np.zeros_like(self.h))

    def __add__(self, o):
        if not isinstance(o, Dual):
            return Dual(self.v + o, self.g, self.h)
        h = None if self.h is None or o.h is None else self.h + o.h
        return Dual(self.v + o.v, self.g + o.g, h)

    __radd__ = __add__

    def __neg__(self):
        return Dual(-self.v, -self.g, None if self.h is None else -self.h)

    def __sub__(self, o):
        return self + (-o)

    def __rsub__(self, o):
        return (-self) + o

    def __mul__(self, o):
        if not isinstance(o, Dual):
            return Dual(self.v * o, self.g * _bv(o), None if self.h is None else self.h * _bvv(o))
        g = _bv(self.v) * o.g + _bv(o.v) * self.g
        h = None
        if self.h is not None and o.h is not None:
            h = (_bvv(self.v) * o.h + _bvv(o.v) * self.h
                 + _outer(self.g, o.g) + _outer(o.g, self.g))
        return Dual(self.v * o.v, g, h)

    __rmul__ = __mul__

    def _unary(self, f0, f1, f2) -> Dual:
        g = _bv(f1) * self.g
        h = None
        if self.h is not None:
            h = _bvv(f1) * self.h + _bvv(f2) * _outer(self.g, self.g)
        return Dual(f0, g, h)

    def reciprocal(self) -> Dual:
        v = self.v
        return self._unary(1.0 / v, -1.0 / v**2, 2.0 / v**3)

    def __truediv__(self, o):
        if not isinstance(o, Dual):
            return self * (1.0 / o)
        return self * o.reciprocal()

    def __rtruediv__(self, o):
        return self.reciprocal() * o

    def __pow__(self, e):
        if isinstance(e, Dual):
            return exp(e * log(self))
        v = self.v
        if e == 0:
            return self._lift(np.ones_like(np.asarray(v, dtype=float)))
        if e == 1:
            return self
        return self._unary(v**e, e * v ** (e - 1), e * (e - 1) * v ** (e - 2))

    def __rpow__(self, base):
        return exp(self * np.log(base))

    def __repr__(self):
        return f"Dual({self.v!r}, grad={self.g!r})"


def sin(x):
    if isinstance(x, Dual):
        s, c = np.sin(x.v), np.cos(x.v)
        return x._unary(s, c, -s)
    return np.sin(x)


def cos(x):
    if isinstance(x, Dual):
        s, c = np.sin(x.v), np.cos(x.v)
        return x._unary(c, -s, -c)
    return np.cos(x)


def exp(x):
    if isinstance(x, Dual):
        e = np.exp(x.v)
        return x._unary(e, e, e)
    return np.exp(x)


def log(x):
    if isinstance(x, Dual):
        return x._unary(np.log(x.v), 1.0 / x.v, -1.0 / x.v**2)
    return np.log(x)


def sqrt(x):
    if isinstance(x, Dual):
        s = np.sqrt(x.v)
        return x._unary(s, 0.5 / s, -0.25 / (s * x.v))
    return np.sqrt(x)


def recip(x):
    if isinstance(x, Dual):
        return x.reciprocal()
    return 1.0 / x


# ---------------------------------------------------------------------------
# value + Jacobian jets


class Jet:
    """Array value with optional Jacobian (``val.shape + (n,)``)."""

    __slots__ = ("val", "jac")

    def __init__(self, val, jac=None):
        self.val = np.asarray(val, dtype=float)
        self.jac = None if jac is None else np.asarray(jac, dtype=float)

    def reshape(self, *shape) -> Jet:
        val = self.val.reshape(*shape)
        jac = None if self.jac is None else self.jac.reshape(val.shape + (self.jac.shape[-1],))
        return Jet(val, jac)

    def __getitem__(self, idx) -> Jet:
        val = self.val[idx]
        if self.jac is None:
            return Jet(val)
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Jet(val, self.jac[idx + (Ellipsis,)] if Ellipsis not in idx else self.jac[idx])

    def __add__(self, o) -> Jet:
        if isinstance(o, Jet):
            jac = None if self.jac is None or o.jac is None else self.jac + o.jac
            return Jet(self.val + o.val, jac)
        return Jet(self.val + o, self.jac)

    __radd__ = __add__

    def __neg__(self) -> Jet:
        return Jet(-self.val, None if self.jac is None else -self.jac)

    def __sub__(self, o) -> Jet:
        return self + (-o)

    def __rsub__(self, o) -> Jet:
        return (-self) + o

    def scale(self, c: float) -> Jet:
        return Jet(self.val * c, None if self.jac is None else self.jac * c)

    @property
    def tracked(self) -> bool:
        return self.jac is not None


def _free_letter(spec: str) -> str:
    for ch in string.ascii_letters[::-1]:
        if ch not in spec:
            return ch
    raise ValueError("no free einsum index")


def jeinsum(spec: str, *ops) -> Jet:
    """``np.einsum`` over jets and constant arrays, applying the product rule.

    The result carries a Jacobian when every jet operand does.
    """
    lhs, out = spec.split("->")
    subs = lhs.split(",")
    vals = [o.val if isinstance(o, Jet) else np.asarray(o) for o in ops]
    val = np.einsum(spec, *vals, optimize=True)
    jets = [i for i, o in enumerate(ops) if isinstance(o, Jet)]
    if not jets or any(ops[i].jac is None for i in jets):
        return Jet(val)
    z = _free_letter(spec)
    jac = None
    for i in jets:
        s = list(subs)
        s[i] = s[i] + z
        args = list(vals)
        args[i] = ops[i].jac
        term = np.einsum(",".join(s) + "->" + out + z, *args, optimize=True)
        jac = term if jac is None else jac + term
    return Jet(val, jac)


def jmul(a, b) -> Jet:
    """Elementwise product with broadcasting of values (not of the Jacobian axis)."""
    av = a.val if isinstance(a, Jet) else np.asarray(a, dtype=float)
    bv = b.val if isinstance(b, Jet) else np.asarray(b, dtype=float)
    val = av * bv
    ja = a.jac if isinstance(a, Jet) else None
    jb = b.jac if isinstance(b, Jet) else None
    if (isinstance(a, Jet) and ja is None) or (isinstance(b, Jet) and jb is None):
        return Jet(val)
    if ja is None and jb is None:
        return Jet(val)
    jac = 0.0
    if ja is not None:
        jac = jac + ja * bv[..., None]
    if jb is not None:
        jac = jac + jb * av[..., None]
    return Jet(val, np.broadcast_to(jac, val.shape + (jac.shape[-1],)).copy())


def jsolve(A: Jet, b) -> Jet:
    """x = A⁻¹ b for a square nonsingular A; b may be a vector or matrix."""
    bv = b.val if isinstance(b, Jet) else np.asarray(b, dtype=float)
    x = np.linalg.solve(A.val, bv)
    if A.jac is None or (isinstance(b, Jet) and b.jac is None):
        return Jet(x)
    n = A.jac.shape[-1]
    if bv.ndim == 1:
        rhs = -np.einsum("ijz,j->iz", A.jac, x)
    else:
        rhs = -np.einsum("ijz,jk->ikz", A.jac, x)
    if isinstance(b, Jet):
        rhs = rhs + b.jac
    dx = np.linalg.solve(A.val, rhs.reshape(A.val.shape[0], -1))
    return Jet(x, dx.reshape(x.shape + (n,)))


def jlstsq_consistent(M: Jet, rhs) -> Jet:
    """Solution of a consistent system M x = rhs with M of full column rank.

    Differentiating M x = rhs gives M dx = d rhs − dM x, which is again
    consistent, so the least-squares solve is exact for the derivative too.
    """
    rv = rhs.val if isinstance(rhs, Jet) else np.asarray(rhs, dtype=float)
    x = np.linalg.lstsq(M.val, rv, rcond=None)[0]
    if M.jac is None or (isinstance(rhs, Jet) and rhs.jac is None):
        return Jet(x)
    n = M.jac.shape[-1]
    if rv.ndim == 1:
        r = -np.einsum("ijz,j->iz", M.jac, x)
    else:
        r = -np.einsum("ijz,jk->ikz", M.jac, x)
    if isinstance(rhs, Jet):
        r = r + rhs.jac
    dx = np.linalg.lstsq(M.val, r.reshape(M.val.shape[0], -1), rcond=None)[0]
    return Jet(x, dx.reshape(x.shape + (n,)))


def jpinv_solve(A: Jet, r: Jet, rcond: float = 1e-10) -> Jet:
    """Minimal-norm solution y = A⁺ r of a consistent, constant-rank system.

    Uses the Golub–Pereyra derivative of the pseudoinverse; the term carrying
    (I − A A⁺) r vanishes because the system is consistent.
    """
    P = np.linalg.pinv(A.val, rcond=rcond)
    y = P @ r.val
    if A.jac is None or r.jac is None:
        return Jet(y)
    dy = P @ (r.jac - np.einsum("ijz,j->iz", A.jac, y))
    proj = np.eye(A.val.shape[1]) - P @ A.val
    dy = dy + proj @ np.einsum("jiz,j->iz", A.jac, P.T @ y)
    return Jet(y, dy)
