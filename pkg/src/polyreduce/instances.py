"""Catalog of worked examples, each wired as a ReductionInstance.

Catalogued: coupled-strings, product-cosymplectic, membrane-polar and the
k = 1 sandbox cosymplectic-darboux.  Auxiliary builders (not listed by the
CLI) provide the ℝ⁴ counterexample, a translation action with a nonzero
cocycle and a non-abelian affine-line action.
"""
from __future__ import annotations

from math import pi
from typing import Callable

import numpy as np

from .expr import compile_expr, derivative_expr, substitute
from .fields import AnalyticField, ChartBox, ConstantField
from .forms import VectorFieldRep, VForm
from .reduction import (ActionModel, LevelChart, MomentumMapModel, QuotientChart, ReductionInstance,
                        SpacetimeData, abelian_group, affine_line_group)
from .structures import CosymplecticStructure, KPolycosymplecticStructure

FIELD_BOX = (-5.0, 5.0)


def _translation_action(chart: ChartBox, slots: list[list[str]], group=None) -> ActionModel:
    """ℝ^m acting by g_j-translation of every coordinate in slots[j]."""
    m = len(slots)
    group = group or abelian_group(m)
    idx = [[chart.index(nm) for nm in s] for s in slots]
    n = chart.dim

    def phi(g):
        shift = np.zeros(n)
        for j, cols in enumerate(idx):
            shift[cols] += g[j]
        return AnalyticField(lambda x, shift=shift: [x[i] + shift[i] for i in range(n)], n, n, "Φ_g")

    gens = []
    for cols in idx:
        v = np.zeros(n)
        v[cols] = 1.0
        gens.append(VectorFieldRep.constant(chart, v))
    return ActionModel(group, chart, phi, tuple(gens))


def _field(fn: Callable, n_in: int, n_out: int, label: str) -> AnalyticField:
    return AnalyticField(fn, n_in, n_out, label)


# ---------------------------------------------------------------------------
# coupled strings


COUPLINGS = {"zero": "0", "q-sin-x": "q*sin(x)", "q2x": "q**2*x", "qF": "q*cos(x) + t*x"}


def strings_chart() -> ChartBox:
    names = ("t", "x", "q1", "q2", "p1t", "p1x", "p2t", "p2x")
    bounds = ((0.0, 2.0), (0.0, 2 * pi)) + (FIELD_BOX,) * 6
    roles = (("base", 0), ("base", 1), ("field", 0), ("field", 1),
             ("momentum", 0, 0), ("momentum", 0, 1), ("momentum", 1, 0), ("momentum", 1, 1))
    return ChartBox(names, bounds, roles)


def strings_structure(chart: ChartBox | None = None) -> KPolycosymplecticStructure:
    ch = chart or strings_chart()
    tau = VForm.from_terms(ch, 1, [{("t",): 1.0}, {("x",): 1.0}])
    omega = VForm.from_terms(ch, 2, [{("q1", "p1t"): 1.0, ("q2", "p2t"): 1.0},
                                     {("q1", "p1x"): 1.0, ("q2", "p2x"): 1.0}])
    return KPolycosymplecticStructure(ch, 2, tau, omega)


def coupling_field(coupling: str) -> AnalyticField:
    """C(t, x, q) from a preset name or an expression in t, x, q."""
    text = COUPLINGS.get(coupling, coupling)
    fn = compile_expr(text, ("t", "x", "q"))
    return AnalyticField(lambda x: [fn(x)], 3, 1, f"C={text}")


def coupled_strings(coupling: str = "q-sin-x") -> ReductionInstance:
    """Two strings coupled through C(t, x, q¹ − q²), symmetric under q¹, q² ↦ q¹ + λ, q² + λ."""
    ch = strings_chart()
    s = strings_structure(ch)
    C = coupling_field(coupling)
    Cf = C.fn
    ctext = COUPLINGS.get(coupling, coupling)
    Cq = derivative_expr(ctext, "q", ("t", "x", "q"))

    def hfn(v):
        t, x, q1, q2, p1t, p1x, p2t, p2x = v
        return [0.5 * (p1t * p1t + p2t * p2t - p1x * p1x - p2x * p2x) + Cf([t, x, q1 - q2])[0]]

    h = _field(hfn, 8, 1, "h_strings")
    action = _translation_action(ch, [["q1", "q2"]])
    J = _field(lambda v: [v[4] + v[6], v[5] + v[7]], 8, 2, "J_strings")

    def split(v):
        # momentum split [α][β][i] of the gauge with all free coefficients zero
        t, x, q1, q2 = v[:4]
        dq = Cq([t, x, q1 - q2])
        return [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -dq, dq]

    def level(mu):
        m1, m2 = mu[0, 0], mu[1, 0]
        lch = ChartBox(("t", "x", "q1", "q2", "p1t", "p1x"), ch.bounds[:6])
        emb = _field(lambda y: list(y) + [m1 - y[4], m2 - y[5]], 6, 8, "λ_μ")
        return LevelChart(lch, emb)

    def quotients(mu):
        m1, m2 = mu[0, 0], mu[1, 0]
        t_x = ((0.0, 2.0), (0.0, 2 * pi))
        # difference chart: q = q¹ − q², p^α = p¹_α − p²_α
        dch = ChartBox(("t", "x", "q", "pt", "px"), t_x + ((-10.0, 10.0),) * 3)
        dproj = _field(lambda y: [y[0], y[1], y[2] - y[3], 2 * y[4] - m1, 2 * y[5] - m2], 6, 5, "π_diff")
        dsec = (_field(lambda z: [z[0], z[1], z[2], 0.0 * z[2], 0.5 * (m1 + z[3]), 0.5 * (m2 + z[4])], 5, 6, "s"),
                _field(lambda z: [z[0], z[1], 0.5 * z[2], -0.5 * z[2], 0.5 * (m1 + z[3]), 0.5 * (m2 + z[4])],
                       5, 6, "s'"))
        diff_expected = {
            "tau": VForm.from_terms(dch, 1, [{("t",): 1.0}, {("x",): 1.0}]),
            "omega": VForm.from_terms(dch, 2, [{("q", "pt"): 0.5}, {("q", "px"): 0.5}]),
            "h": _field(lambda z: [0.25 * (z[3] * z[3] - z[4] * z[4] + m1 * m1 - m2 * m2)
                                   + Cf([z[0], z[1], z[2]])[0]], 5, 1, "h_mu"),
            "h_text": f"0.25*(pt**2 - px**2 + ({float(m1)!r})**2 - ({float(m2)!r})**2) + ({ctext})",
        }
        # first-string chart: q = q¹ − q², P_α = p¹_α
        fch = ChartBox(("t", "x", "q", "Pt", "Px"), t_x + ((-10.0, 10.0),) + (FIELD_BOX,) * 2,
                       (("base", 0), ("base", 1), ("field", 0), ("momentum", 0, 0), ("momentum", 0, 1)))
        fproj = _field(lambda y: [y[0], y[1], y[2] - y[3], y[4], y[5]], 6, 5, "π_first")
        fsec = (_field(lambda z: [z[0], z[1], z[2], 0.0 * z[2], z[3], z[4]], 5, 6, "s"),
                _field(lambda z: [z[0], z[1], 0.5 * z[2], -0.5 * z[2], z[3], z[4]], 5, 6, "s'"))
        first_expected = {
            "tau": VForm.from_terms(fch, 1, [{("t",): 1.0}, {("x",): 1.0}]),
            "omega": VForm.from_terms(fch, 2, [{("q", "Pt"): 1.0}, {("q", "Px"): 1.0}]),
            "h": _field(lambda z: [0.5 * (z[3] * z[3] + (m1 - z[3]) ** 2 - z[4] * z[4] - (m2 - z[4]) ** 2)
                                   + Cf([z[0], z[1], z[2]])[0]], 5, 1, "h_mu"),
            "h_text": f"0.5*(Pt**2 + ({float(m1)!r} - Pt)**2 - Px**2 - ({float(m2)!r} - Px)**2) + ({ctext})",
        }
        return {
            "difference": QuotientChart(dch, dproj, dsec, diff_expected,
                                        "q = q1 - q2, pt = p1t - p2t, px = p1x - p2x"),
            "first-string": QuotientChart(fch, fproj, fsec, first_expected,
                                          "q = q1 - q2, Pt = p1t, Px = p1x"),
        }

    return ReductionInstance(
        name="coupled-strings", structure=s, action=action,
        momentum=MomentumMapModel(2, 1, J), hamiltonian=h,
        level_chart=level, quotient_charts=quotients, default_quotient="difference",
        gauge_split=_field(split, 8, 8, "supplied_split"), default_mu=(1.0, 0.5),
        summary="two coupled vibrating strings, k=2, dim 8, translation of q1+q2",
        extras={"coupling": C, "coupling_q": Cq, "coupling_text": ctext},
    )


def printed_expected_strings(mu) -> dict[str, Callable]:
    """Reduced strings data exactly as printed.

    The printed omega_mu is written in the first string's momenta (chart
    "first-string", coordinates Pt = p1t, Px = p1x); h_mu is written in the
    difference momenta (chart "difference").  The printed h_mu carries
    +(p^x)^2 where the reduction gives -(p^x)^2; see the README.
    """
    m1, m2 = float(mu[0]), float(mu[1])
    return {
        "omega_chart": "first-string",
        "omega_terms": [{("q", "Pt"): 1.0}, {("q", "Px"): 1.0}],
        "h_chart": "difference",
        "h": lambda z, C: 0.25 * (z[3] ** 2 + z[4] ** 2 + m1 ** 2 - m2 ** 2) + C,
    }


# ---------------------------------------------------------------------------
# product of two cosymplectic manifolds


def product_cosymplectic(potential: str = "0.5*q**2 + t*q") -> ReductionInstance:
    """(ℝ×T*ℝ²)×(ℝ×T*ℝ²) with componentwise cosymplectic pieces; ℝ² translates q11 and q21."""
    names = ("t1", "q11", "q12", "p11", "p12", "t2", "q21", "q22", "p21", "p22")
    bounds = ((0.0, 2.0),) + (FIELD_BOX,) * 4 + ((0.0, 2.0),) + (FIELD_BOX,) * 4
    ch = ChartBox(names, bounds)
    tau = VForm.from_terms(ch, 1, [{("t1",): 1.0}, {("t2",): 1.0}])
    omega = VForm.from_terms(ch, 2, [{("q11", "p11"): 1.0, ("q12", "p12"): 1.0},
                                     {("q21", "p21"): 1.0, ("q22", "p22"): 1.0}])
    s = KPolycosymplecticStructure(ch, 2, tau, omega)
    V = compile_expr(potential, ("t", "q"))

    def hfn(v):
        t1, q11, q12, p11, p12, t2, q21, q22, p21, p22 = v
        return [0.5 * (p11 * p11 + p12 * p12) + V([t1, q12]) + 0.5 * (p21 * p21 + p22 * p22) + V([t2, q22])]

    h = _field(hfn, 10, 1, "h_product")
    action = _translation_action(ch, [["q11"], ["q21"]])
    J = _field(lambda v: [v[3], 0.0, 0.0, v[8]], 10, 4, "J_product")

    def check_mu(mu):
        if abs(mu[0, 1]) > 1e-12 or abs(mu[1, 0]) > 1e-12:
            raise ValueError("level set is empty unless μ12 = μ21 = 0")

    def level(mu):
        check_mu(mu)
        a, b = mu[0, 0], mu[1, 1]
        keep = ("t1", "q11", "q12", "p12", "t2", "q21", "q22", "p22")
        lch = ChartBox(keep, tuple(ch.bounds[ch.index(k)] for k in keep))
        emb = _field(lambda y: [y[0], y[1], y[2], a + 0.0 * y[0], y[3], y[4], y[5], y[6], b + 0.0 * y[0], y[7]],
                     8, 10, "λ_μ")
        return LevelChart(lch, emb)

    def quotients(mu):
        check_mu(mu)
        a, b = mu[0, 0], mu[1, 1]
        red = ChartBox(("t1", "q12", "p12", "t2", "q22", "p22"),
                       ((0.0, 2.0), FIELD_BOX, FIELD_BOX, (0.0, 2.0), FIELD_BOX, FIELD_BOX))
        proj = _field(lambda y: [y[0], y[2], y[3], y[4], y[6], y[7]], 8, 6, "π")
        secs = tuple(_field(lambda z, c=c: [z[0], c + 0.0 * z[0], z[1], z[2], z[3], -c + 0.0 * z[0], z[4], z[5]],
                            6, 8, f"s{c}") for c in (0.0, 1.5))
        expected = {
            "tau": VForm.from_terms(red, 1, [{("t1",): 1.0}, {("t2",): 1.0}]),
            "omega": VForm.from_terms(red, 2, [{("q12", "p12"): 1.0}, {("q22", "p22"): 1.0}]),
            "h": _field(lambda z: [0.5 * (a * a + z[2] * z[2]) + V([z[0], z[1]])
                                   + 0.5 * (b * b + z[5] * z[5]) + V([z[3], z[4]])], 6, 1, "h_mu"),
            "h_text": (f"0.5*(({float(a)!r})**2 + p12**2) + ({substitute(potential, {'t': 't1', 'q': 'q12'})})"
                       f" + 0.5*(({float(b)!r})**2 + p22**2) + ({substitute(potential, {'t': 't2', 'q': 'q22'})})"),
        }
        return {"drop-translated": QuotientChart(red, proj, secs, expected, "forget q11, q21")}

    return ReductionInstance(
        name="product-cosymplectic", structure=s, action=action,
        momentum=MomentumMapModel(2, 2, J), hamiltonian=h,
        level_chart=level, quotient_charts=quotients, default_mu=(1.0, 0.0, 0.0, -0.5),
        summary="product of two cosymplectic manifolds, k=2, dim 10, componentwise momentum map",
    )


# ---------------------------------------------------------------------------
# vibrating membrane in polar coordinates


def membrane_chart() -> ChartBox:
    names = ("t", "r", "th", "zeta", "pt", "pr", "pth")
    bounds = ((0.0, 2.0), (0.5, 3.0), (0.0, 2 * pi)) + (FIELD_BOX,) * 4
    roles = (("base", 0), ("base", 1), ("base", 2), ("field", 0),
             ("momentum", 0, 0), ("momentum", 0, 1), ("momentum", 0, 2))
    return ChartBox(names, bounds, roles)


def membrane_polar(force: str = "1", c: float = 1.0) -> ReductionInstance:
    """Forced membrane, h̃ = (1/2r)(pt² − pr²/c² − r²pθ²/c²) − rζf(r); (t, θ) translations."""
    if c == 0:
        raise ValueError("wave speed must be nonzero")
    ch = membrane_chart()
    tau = VForm.from_terms(ch, 1, [{("t",): 1.0}, {("r",): 1.0}, {("th",): 1.0}])
    omega = VForm.from_terms(ch, 2, [{("zeta", "pt"): 1.0}, {("zeta", "pr"): 1.0}, {("zeta", "pth"): 1.0}])
    s = KPolycosymplecticStructure(ch, 3, tau, omega)
    f = compile_expr(force, ("r",))
    c2 = float(c) ** 2

    def hfn(v):
        t, r, th, z, pt, pr, pth = v
        return [(pt * pt - pr * pr / c2 - r * r * pth * pth / c2) / (2 * r) - r * z * f([r])]

    h = _field(hfn, 7, 1, "h_membrane")
    action = _translation_action(ch, [["t"], ["th"]])
    # X_r carries the whole trace r f(r) in its p^r slot
    split = _field(lambda v: [0.0] * 3 + [0.0, v[1] * f([v[1]]), 0.0] + [0.0] * 3, 7, 9, "supplied_split")

    def section(lam):
        lt, lth = float(lam[0]), float(lam[1])
        return _field(lambda z: [0.0 * z[0], z[0], 0.0 * z[0], z[1], lt + 0.0 * z[0], z[2], lth + 0.0 * z[0]],
                      3, 7, "S_λ")

    red = ChartBox(("r", "zeta", "pr"), ((0.5, 3.0), FIELD_BOX, FIELD_BOX),
                   (("base", 0), ("field", 0), ("momentum", 0, 0)))
    st = SpacetimeData(ell=1, basis_change=np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]),
                       keep=(1, 3, 5), reduced_chart=red, section=section)
    return ReductionInstance(
        name="membrane-polar", structure=s, action=action, momentum=None, hamiltonian=h,
        gauge_split=split,
        summary="forced vibrating membrane in polar coordinates, k=3, dim 7, (t, theta) translations",
        extras={"spacetime": st, "force": f, "force_text": force, "c": float(c)},
    )


def membrane_reduced_h_text(force: str, c: float, lam) -> str:
    """Reduced membrane Hamiltonian on (r, zeta, pr) with p^t, p^θ frozen at λ."""
    lt, lth = map(float, lam)
    c2 = float(c) ** 2
    f = substitute(force, {})
    return f"(({lt!r})**2 - pr**2/({c2!r}) - r**2*({lth!r})**2/({c2!r}))/(2*r) - r*zeta*({f})"


# ---------------------------------------------------------------------------
# sandboxes and auxiliaries


def darboux_chart() -> ChartBox:
    return ChartBox(("t", "q", "p"), ((0.0, 2.0), FIELD_BOX, FIELD_BOX),
                    (("base", 0), ("field", 0), ("momentum", 0, 0)))


def cosymplectic_darboux(hamiltonian: str = "0.5*p**2 + 0.5*q**2 + t*q") -> ReductionInstance:
    """ℝ × T*ℝ with τ = dt, ω = dq∧dp and the trivial group."""
    ch = darboux_chart()
    s = CosymplecticStructure(ch, VForm.from_terms(ch, 1, [{("t",): 1.0}]),
                              VForm.from_terms(ch, 2, [{("q", "p"): 1.0}]))
    hf = compile_expr(hamiltonian, ch.names)
    h = _field(lambda v: [hf(v)], 3, 1, "h")
    group = abelian_group(0)
    action = ActionModel(group, ch, lambda g: AnalyticField(lambda x: list(x), 3, 3, "id"), ())
    mom = MomentumMapModel(1, 0, ConstantField(np.zeros(0), 3))
    ident = _field(lambda y: list(y), 3, 3, "id")
    return ReductionInstance(
        name="cosymplectic-darboux", structure=s, action=action, momentum=mom, hamiltonian=h,
        level_chart=lambda mu: LevelChart(ch, ident),
        quotient_charts=lambda mu: {"identity": QuotientChart(ch, ident, (ident,), {
            "tau": s.tau, "omega": s.omega, "h": h, "h_text": hamiltonian}, "trivial group")},
        default_mu=(),
        summary="k=1 sandbox: Darboux cosymplectic chart, trivial group",
    )


def translation_cocycle() -> ReductionInstance:
    """ℝ² acting on ℝ×T*ℝ by (q, p) ↦ (q + a, p + b) with J = (p, −q); σ(a, b) = (b, −a)."""
    ch = darboux_chart()
    s = CosymplecticStructure(ch, VForm.from_terms(ch, 1, [{("t",): 1.0}]),
                              VForm.from_terms(ch, 2, [{("q", "p"): 1.0}]))
    action = _translation_action(ch, [["q"], ["p"]])
    J = _field(lambda v: [v[2], -v[1]], 3, 2, "J")
    h = _field(lambda v: [v[0] * v[0]], 3, 1, "h(t)")

    def level(mu):
        a, b = mu[0]
        return LevelChart(ChartBox(("t",), ((0.0, 2.0),)),
                          _field(lambda y: [y[0], -b + 0.0 * y[0], a + 0.0 * y[0]], 1, 3, "λ_μ"))

    def quotients(mu):
        line = ChartBox(("t",), ((0.0, 2.0),))
        ident = _field(lambda y: [y[0]], 1, 1, "id")
        return {"time": QuotientChart(line, ident, (ident,), None, "level set is a time line")}

    return ReductionInstance(
        name="translation-cocycle", structure=s, action=action, momentum=MomentumMapModel(1, 2, J),
        hamiltonian=h, level_chart=level, quotient_charts=quotients, isotropy=(),
        default_mu=(0.5, -1.0),
        summary="non-equivariant translation action with cocycle (b, -a)",
    )


def affine_line(shift=(0.0, 0.0)) -> ReductionInstance:
    """Aff(1) acting by q ↦ e^a q + b, p ↦ e^{−a} p with J = (qp, p) + shift."""
    ch = darboux_chart()
    s = CosymplecticStructure(ch, VForm.from_terms(ch, 1, [{("t",): 1.0}]),
                              VForm.from_terms(ch, 2, [{("q", "p"): 1.0}]))
    group = affine_line_group()
    c0, c1 = map(float, shift)

    def phi(g):
        ea, b = float(np.exp(g[0])), float(g[1])
        return AnalyticField(lambda x: [x[0], ea * x[1] + b, x[2] / ea], 3, 3, "Φ_g")

    gens = (VectorFieldRep(ch, _field(lambda x: [0.0 * x[0], x[1], -x[2]], 3, 3, "ξ1")),
            VectorFieldRep.constant(ch, [0.0, 1.0, 0.0]))
    J = _field(lambda v: [v[1] * v[2] + c0, v[2] + c1], 3, 2, "J")
    return ReductionInstance(
        name="affine-line", structure=s, action=ActionModel(group, ch, phi, gens),
        momentum=MomentumMapModel(1, 2, J), hamiltonian=_field(lambda v: [0.5 * v[2] * v[2]], 3, 1, "h"),
        summary="non-abelian affine-line action; a constant shift of J gives a coboundary cocycle",
    )


def counterexample_r4() -> KPolycosymplecticStructure:
    """ℝ⁴ with τ¹ = dy, τ² = dx, ω¹ = dx∧dw, ω² = dy∧dv: the joint kernel of ω is trivial."""
    ch = ChartBox(("x", "y", "w", "v"), ((-1.0, 1.0),) * 4)
    tau = VForm.from_terms(ch, 1, [{("y",): 1.0}, {("x",): 1.0}])
    omega = VForm.from_terms(ch, 2, [{("x", "w"): 1.0}, {("y", "v"): 1.0}])
    return KPolycosymplecticStructure(ch, 2, tau, omega)


def scaling_action(chart: ChartBox, name: str) -> ActionModel:
    """ℝ acting by x_name ↦ e^λ x_name (does not preserve canonical forms)."""
    i, n = chart.index(name), chart.dim

    def phi(g):
        e = float(np.exp(g[0]))
        return AnalyticField(lambda x: [x[j] * e if j == i else x[j] for j in range(n)], n, n, "scale")

    gen = VectorFieldRep(chart, _field(lambda x: [x[j] if j == i else 0.0 * x[j] for j in range(n)], n, n, "ξ"))
    return ActionModel(abelian_group(1), chart, phi, (gen,))


CATALOG = {
    "coupled-strings": coupled_strings,
    "cosymplectic-darboux": cosymplectic_darboux,
    "membrane-polar": membrane_polar,
    "product-cosymplectic": product_cosymplectic,
}

AUXILIARY = {
    "translation-cocycle": translation_cocycle,
    "affine-line": affine_line,
}


def get_instance(name: str, **kwargs) -> ReductionInstance:
    builder = CATALOG.get(name) or AUXILIARY.get(name)
    if builder is None:
        raise KeyError(f"unknown instance {name!r}; known: {', '.join(sorted(CATALOG))}")
    return builder(**kwargs)


def list_instances() -> list[tuple[str, str]]:
    return [(name, CATALOG[name]().summary) for name in sorted(CATALOG)]
