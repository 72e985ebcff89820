"""Lie group actions, momentum maps, cocycles and Marsden-Weinstein style reduction.

Quotients are never built abstractly: every instance ships a level-set
parametrization λ_μ and one or more quotient charts, each a projection π_μ
from the level chart to the reduced chart plus sections s_μ with π_μ∘s_μ = id.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .fields import (AnalyticField, ChartBox, ConstantField, NumericField, SmoothField, as_coords,
                     halton_points)
from .forms import (KVectorFieldRep, VectorFieldRep, VForm, freeze, interior_product, lie_bracket,
                    lie_derivative, pullback)
from .linalg import nullspace, rank, span, subspace_equal, subspace_intersection, subspace_sum
from .report import VerificationReport
from .structures import (FibredExtension, KPolycosymplecticStructure, omega_matrices, reeb_family,
                         tau_matrix, verify_structure)
from .dynamics import defining_residuals, rk4_fixed


# ---------------------------------------------------------------------------
# groups


@dataclass(frozen=True)
class LieGroupModel:
    """Group on ℝ^m parameters.  ``Ad(g)`` returns the m×m matrix of Ad_g."""

    dim: int
    multiply: Callable
    inverse: Callable
    exp: Callable
    Ad: Callable
    bracket: Callable
    identity: np.ndarray
    name: str = ""
    sample_scale: float = 1.0

    def Ad_star(self, g, mu) -> np.ndarray:
        """Ad*_{g⁻¹} μ, i.e. ⟨Ad*_{g⁻¹}μ, ξ⟩ = ⟨μ, Ad_{g⁻¹} ξ⟩; μ may be (k, m)."""
        A = self.Ad(self.inverse(np.asarray(g, dtype=float)))
        return np.asarray(mu, dtype=float) @ A

    def samples(self, count: int, seed: int = 0) -> np.ndarray:
        if self.dim == 0:
            return np.zeros((count, 0))
        s = self.sample_scale
        return halton_points([(-s, s)] * self.dim, count, seed + 7919)

    def check(self, count: int = 50, seed: int = 0) -> VerificationReport:
        rep = VerificationReport(f"group {self.name}")
        g = self.samples(3 * count, seed).reshape(3, count, self.dim)
        assoc = hom = 0.0
        for a, b, c in zip(*g):
            m = self.multiply
            assoc = max(assoc, float(np.max(np.abs(m(m(a, b), c) - m(a, m(b, c))), initial=0.0)))
            hom = max(hom, float(np.max(np.abs(self.Ad(m(a, b)) - self.Ad(a) @ self.Ad(b)), initial=0.0)))
        rep.residual("associativity", assoc, 1e-10)
        rep.residual("ad_homomorphism", hom, 1e-10)
        return rep


def abelian_group(m: int, sample_scale: float = 1.0) -> LieGroupModel:
    """ℝ^m under addition (Ad = identity, exp = identity)."""
    return LieGroupModel(
        dim=m,
        multiply=lambda g, h: np.asarray(g, dtype=float) + np.asarray(h, dtype=float),
        inverse=lambda g: -np.asarray(g, dtype=float),
        exp=lambda xi: np.asarray(xi, dtype=float),
        Ad=lambda g: np.eye(m),
        bracket=lambda a, b: np.zeros(m),
        identity=np.zeros(m),
        name=f"R^{m}",
        sample_scale=sample_scale,
    )


def affine_line_group() -> LieGroupModel:
    """Affine group of the line, (a, b)·(a', b') = (a + a', e^a b' + b)."""

    def mul(g, h):
        return np.array([g[0] + h[0], np.exp(g[0]) * h[1] + g[1]])

    def inv(g):
        return np.array([-g[0], -np.exp(-g[0]) * g[1]])

    def exp(xi):
        a, b = float(xi[0]), float(xi[1])
        return np.array([a, b * (np.expm1(a) / a if abs(a) > 1e-12 else 1.0 + a / 2)])

    return LieGroupModel(
        dim=2, multiply=mul, inverse=inv, exp=exp,
        Ad=lambda g: np.array([[1.0, 0.0], [-g[1], np.exp(g[0])]]),
        bracket=lambda x, y: np.array([0.0, x[0] * y[1] - y[0] * x[1]]),
        identity=np.zeros(2), name="Aff(1)")


# ---------------------------------------------------------------------------
# actions and momentum maps


@dataclass(frozen=True)
class ActionModel:
    """Φ: G × M → M.  ``phi(g)`` returns the map Φ_g as a field chart → chart."""

    group: LieGroupModel
    chart: ChartBox
    phi: Callable[[np.ndarray], SmoothField]
    generators: tuple[VectorFieldRep, ...]

    def apply(self, g, x) -> np.ndarray:
        return np.asarray(self.phi(np.asarray(g, dtype=float))(as_coords(x)))

    def generator_matrix(self, x) -> np.ndarray:
        """Fundamental fields at x as columns, shape (n, m)."""
        x = as_coords(x)
        if not self.generators:
            return np.zeros((self.chart.dim, 0))
        return np.stack([X.at(x) for X in self.generators], axis=1)

    def check(self, samples: int = 20, seed: int = 0, step: float = 1e-5) -> VerificationReport:
        rep = VerificationReport("action")
        pts = halton_points(self.chart, samples, seed)
        e = self.group.identity
        ident = max(float(np.max(np.abs(self.apply(e, x) - x))) for x in pts)
        rep.residual("identity", ident, 1e-12)
        worst = 0.0
        for j in range(self.group.dim):
            xi = np.zeros(self.group.dim)
            xi[j] = 1.0
            gp, gm = self.group.exp(step * xi), self.group.exp(-step * xi)
            for x in pts:
                fd = (self.apply(gp, x) - self.apply(gm, x)) / (2 * step)
                worst = max(worst, float(np.max(np.abs(fd - self.generators[j].at(x)))))
        rep.residual("generators_vs_flow", worst, 1e-4)
        return rep


@dataclass(frozen=True)
class MomentumMapModel:
    """𝐉 with values in (𝔤*)^k, layout [α][j]."""

    k: int
    m: int
    J: SmoothField

    def value(self, x) -> np.ndarray:
        return np.asarray(self.J(as_coords(x))).reshape(self.k, self.m)

    def jacobian(self, x) -> np.ndarray:
        return np.asarray(self.J.jacobian(as_coords(x))).reshape(self.k, self.m, self.J.n_in)


@dataclass(frozen=True)
class LevelChart:
    chart: ChartBox
    embed: SmoothField          # level chart → M, image in J⁻¹(μ)


@dataclass(frozen=True)
class QuotientChart:
    chart: ChartBox
    projection: SmoothField     # level chart → reduced chart
    sections: tuple[SmoothField, ...]
    expected: dict | None = None  # {"tau": VForm, "omega": VForm, "h": SmoothField}
    note: str = ""


@dataclass(frozen=True)
class ReductionInstance:
    name: str
    structure: KPolycosymplecticStructure
    action: ActionModel
    momentum: MomentumMapModel | None
    hamiltonian: SmoothField
    level_chart: Callable[[np.ndarray], LevelChart] | None = None
    quotient_charts: Callable[[np.ndarray], dict[str, QuotientChart]] | None = None
    default_quotient: str = ""
    isotropy: tuple[int, ...] | None = None   # generator indices of G^Δ_μ; None means all
    gauge_split: SmoothField | None = None     # instance-supplied momentum split for the dynamics
    default_mu: tuple[float, ...] = ()
    summary: str = ""
    extras: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.structure.k

    @property
    def chart(self) -> ChartBox:
        return self.structure.chart

    def mu_array(self, mu) -> np.ndarray:
        if self.momentum is None:
            raise ValueError(f"instance {self.name} has no momentum map")
        mu = np.asarray(mu if mu is not None and len(mu) else self.default_mu, dtype=float)
        want = self.momentum.k * self.momentum.m
        if mu.size != want:
            raise ValueError(f"μ has {mu.size} components, instance {self.name} expects {want}")
        return mu.reshape(self.momentum.k, self.momentum.m)

    def level(self, mu) -> LevelChart:
        if self.level_chart is None:
            raise ValueError(f"instance {self.name} has no level chart")
        return self.level_chart(self.mu_array(mu))

    def quotient(self, mu, name: str | None = None) -> QuotientChart:
        if self.quotient_charts is None:
            raise ValueError(f"instance {self.name} has no quotient chart")
        charts = self.quotient_charts(self.mu_array(mu))
        key = name or self.default_quotient or next(iter(charts))
        if key not in charts:
            raise ValueError(f"unknown quotient chart {key!r}; have {sorted(charts)}")
        return charts[key]


def _pullback_gap(phi: SmoothField, w: VForm, pts) -> float:
    pb = pullback(phi, w, w.chart)
    return max(float(np.max(np.abs(pb.at(x) - w.at(x)))) for x in pts)


def verify_action_invariance(a: ActionModel, s: KPolycosymplecticStructure, group_samples: int = 10,
                             point_samples: int = 20, seed: int = 0) -> VerificationReport:
    """Φ_g*𝛚 = 𝛚 and Φ_g*𝛕 = 𝛕 at sampled (g, x); ℒ_{ξ_M}𝛚 = ℒ_{ξ_M}𝛕 = 0 at samples."""
    rep = VerificationReport("action_invariance")
    pts = halton_points(s.chart, point_samples, seed)
    gw = gt = 0.0
    for g in a.group.samples(group_samples, seed):
        phi = a.phi(g)
        gw = max(gw, _pullback_gap(phi, s.omega, pts))
        gt = max(gt, _pullback_gap(phi, s.tau, pts))
    rep.residual("pullback_omega", gw, 1e-9)
    rep.residual("pullback_tau", gt, 1e-9)
    lw = lt = 0.0
    for X in a.generators:
        Lw, Lt = lie_derivative(X, s.omega), lie_derivative(X, s.tau)
        for x in pts:
            lw = max(lw, float(np.max(np.abs(Lw.at(x)))))
            lt = max(lt, float(np.max(np.abs(Lt.at(x)))))
    rep.residual("lie_omega", lw, 1e-9)
    rep.residual("lie_tau", lt, 1e-9)
    return rep


def verify_momentum_map(inst: ReductionInstance, samples: int = 50, seed: int = 0,
                        tol: float = 1e-9) -> VerificationReport:
    """ι_{ξ_M}ω^α = d J^α_ξ, ι_{ξ_M}τ^α = 0 and R_β J^α_ξ = 0 over basis ξ and samples."""
    rep = VerificationReport("momentum_map")
    if inst.momentum is None:
        rep.add("not_applicable", 0.0, True, "instance supplies no momentum map")
        return rep
    s, mm = inst.structure, inst.momentum
    d_res = t_res = r_res = 0.0
    for x in halton_points(s.chart, samples, seed):
        W, T, R = omega_matrices(s, x), tau_matrix(s, x), reeb_family(s, x)
        G = inst.action.generator_matrix(x)
        dJ = mm.jacobian(x)                       # (k, m, n)
        for j in range(mm.m):
            for a in range(s.k):
                d_res = max(d_res, float(np.max(np.abs(W[a] @ G[:, j] - dJ[a, j]))))
            t_res = max(t_res, float(np.max(np.abs(T @ G[:, j]))))
            r_res = max(r_res, float(np.max(np.abs(dJ[:, j, :] @ R.T))))
    rep.residual("contraction_equals_dJ", d_res, tol)
    rep.residual("tau_annihilates_generators", t_res, tol)
    rep.residual("reeb_invariance", r_res, tol)
    return rep


# ---------------------------------------------------------------------------
# cocycles and the affine action


@dataclass(frozen=True)
class CocycleValue:
    sigma: np.ndarray     # (k, m)
    deviation: float      # spread across sample points


def cocycle(inst: ReductionInstance, g, samples: int = 20, seed: int = 0,
            tol: float = 1e-10) -> CocycleValue:
    """σ(g) = 𝐉∘Φ_g − Ad^{*k}_{g⁻¹}𝐉, certified constant on the samples."""
    mm, grp = inst.momentum, inst.action.group
    if mm is None:
        raise ValueError(f"instance {inst.name} has no momentum map")
    g = np.asarray(g, dtype=float)
    vals = []
    for x in halton_points(inst.chart, samples, seed):
        vals.append(mm.value(inst.action.apply(g, x)) - grp.Ad_star(g, mm.value(x)))
    vals = np.array(vals)
    dev = float(np.max(np.abs(vals - vals[0]), initial=0.0))
    scale = max(1.0, float(np.max(np.abs(vals), initial=0.0)))
    if dev > tol * scale:
        raise ValueError(f"cocycle is not constant (spread {dev:.3e}); action or momentum map invalid")
    return CocycleValue(vals[0], dev)


@dataclass(frozen=True)
class AffineAction:
    """Δ_g μ = Ad^{*k}_{g⁻¹} μ + σ(g)."""

    inst: ReductionInstance
    samples: int = 20
    seed: int = 0

    def sigma(self, g) -> np.ndarray:
        return cocycle(self.inst, g, self.samples, self.seed).sigma

    def apply(self, g, mu) -> np.ndarray:
        mu = np.asarray(mu, dtype=float).reshape(self.inst.momentum.k, self.inst.momentum.m)
        return self.inst.action.group.Ad_star(g, mu) + self.sigma(g)

    def check(self, pairs: int = 200, seed: int = 0) -> VerificationReport:
        """Cocycle identity, Δ_e = id, Δ_{gh} = Δ_g Δ_h, and 𝐉∘Φ_g = Δ_g∘𝐉."""
        inst, grp = self.inst, self.inst.action.group
        mm = inst.momentum
        rep = VerificationReport("affine_action")
        gs = grp.samples(2 * pairs, seed).reshape(2, pairs, grp.dim)
        mus = halton_points([(-2.0, 2.0)] * (mm.k * mm.m), pairs, seed + 1) if mm.k * mm.m else \
            np.zeros((pairs, 0))
        cyc = comp = 0.0
        sig_cache = {}

        def sig(g):
            key = tuple(np.round(g, 15))
            if key not in sig_cache:
                sig_cache[key] = self.sigma(g)
            return sig_cache[key]

        for g1, g2, mu in zip(gs[0], gs[1], mus):
            g12 = grp.multiply(g1, g2)
            lhs = sig(g12)
            rhs = sig(g1) + grp.Ad_star(g1, sig(g2))
            cyc = max(cyc, float(np.max(np.abs(lhs - rhs), initial=0.0)))
            a = self.apply(g12, mu)
            b = self.apply(g1, self.apply(g2, mu))
            comp = max(comp, float(np.max(np.abs(a - b), initial=0.0)))
        ident = float(np.max(np.abs(self.sigma(grp.identity)), initial=0.0))
        rep.residual("cocycle_identity", cyc, 1e-10)
        rep.residual("identity_acts_trivially", ident, 1e-10)
        rep.residual("composition", comp, 1e-10)
        eq = 0.0
        pts = halton_points(inst.chart, min(pairs, 100), seed + 2)
        for g, x in zip(gs[0][: len(pts)], pts):
            eq = max(eq, float(np.max(np.abs(mm.value(inst.action.apply(g, x)) - self.apply(g, mm.value(x))),
                                      initial=0.0)))
        rep.residual("equivariance", eq, 1e-10)
        return rep


def affine_action(inst: ReductionInstance, samples: int = 20, seed: int = 0) -> AffineAction:
    if inst.momentum is None:
        raise ValueError(f"instance {inst.name} has no momentum map")
    return AffineAction(inst, samples, seed)


# ---------------------------------------------------------------------------
# reduction hypotheses


def _kernel_pair(s, x, a) -> np.ndarray:
    W, T = omega_matrices(s, x), tau_matrix(s, x)
    return nullspace(np.vstack([W[a], T[a:a + 1]]))


def check_reduction_conditions(inst: ReductionInstance, mu=None, samples: int = 20,
                               seed: int = 0) -> VerificationReport:
    """Pointwise subspace identities behind the polycosymplectic reduction theorem.

    At level-set points x:
      T(G^Δ_μ x) = ∩_α (ker ω^α ∩ ker τ^α + T(G^{Δα}_{μα} x)) ∩ T J⁻¹(μ)
      ker T J_α = ker ω^α ∩ ker τ^α + T J⁻¹(μ) + T(G^{Δα}_{μα} x)   for each α
    plus weak regularity: rank T𝐉 constant and ker T𝐉 = T J⁻¹(μ).
    """
    rep = VerificationReport("reduction_conditions")
    if inst.momentum is None:
        rep.add("not_applicable", 0.0, True, "no momentum map")
        return rep
    s, mm = inst.structure, inst.momentum
    lev = inst.level(mu)
    mu_arr = inst.mu_array(mu)
    iso = range(inst.action.group.dim) if inst.isotropy is None else inst.isotropy
    level_gap = eq1_bad = eq2_bad = reg_bad = 0
    jgap = 0.0
    ranks = set()
    first = {}
    for i, y in enumerate(halton_points(lev.chart, samples, seed)):
        x = np.asarray(lev.embed(y)).reshape(-1)
        jgap = max(jgap, float(np.max(np.abs(mm.value(x) - mu_arr), initial=0.0)))
        TL = span(np.asarray(lev.embed.jacobian(y)).reshape(s.chart.dim, -1))
        G = inst.action.generator_matrix(x)
        Gi = span(G[:, list(iso)]) if len(iso) else np.zeros((s.chart.dim, 0))
        dJ = mm.jacobian(x).reshape(mm.k * mm.m, s.chart.dim)
        ranks.add(rank(dJ))
        ok, da, db, ds = subspace_equal(nullspace(dJ), TL)
        if not ok:
            reg_bad += 1
            first.setdefault("weak_regularity", f"ker TJ dim {da}, level tangent dim {db}, sum {ds} (sample {i})")
        inter = TL
        for a in range(s.k):
            inter = subspace_intersection(inter, subspace_sum(_kernel_pair(s, x, a), Gi))
        ok, da, db, ds = subspace_equal(Gi, inter)
        if not ok:
            eq1_bad += 1
            first.setdefault("orbit_identity", f"orbit dim {da}, intersection dim {db}, sum {ds} (sample {i})")
        for a in range(s.k):
            lhs = nullspace(dJ[a * mm.m:(a + 1) * mm.m]) if mm.m else np.eye(s.chart.dim)
            rhs = subspace_sum(_kernel_pair(s, x, a), TL, Gi)
            ok, da, db, ds = subspace_equal(lhs, rhs)
            if not ok:
                eq2_bad += 1
                first.setdefault("kernel_identity",
                                 f"ker TJ_{a + 1} dim {da}, sum dim {db}, joint {ds} (sample {i})")
    rep.residual("level_set", jgap, 1e-10, "max |J∘λ − μ|")
    rep.add("weak_regularity", reg_bad, reg_bad == 0 and len(ranks) == 1,
            first.get("weak_regularity", f"rank TJ = {sorted(ranks)} on every sample"))
    rep.add("orbit_identity", eq1_bad, eq1_bad == 0, first.get("orbit_identity", "holds at every sample"))
    rep.add("kernel_identity", eq2_bad, eq2_bad == 0, first.get("kernel_identity", "holds at every sample"))
    return rep


# ---------------------------------------------------------------------------
# reduce


@dataclass
class ReductionResult:
    chart: ChartBox
    tau: VForm
    omega: VForm
    h: SmoothField
    report: VerificationReport

    @property
    def structure(self) -> KPolycosymplecticStructure:
        return KPolycosymplecticStructure(self.chart, self.tau.k, self.tau, self.omega)


def _compose(outer: SmoothField, inner: SmoothField) -> SmoothField:
    if isinstance(outer, AnalyticField) and isinstance(inner, AnalyticField):
        return outer.compose(inner)
    return NumericField(lambda x: outer(inner(x)), inner.n_in, outer.n_out)


def _reduced_data(inst, lev, qc, section):
    emb = _compose(lev.embed, section)
    tau = freeze(pullback(emb, inst.structure.tau, qc.chart))
    omega = freeze(pullback(emb, inst.structure.omega, qc.chart))
    h = _compose(inst.hamiltonian, emb)
    return tau, omega, h


def reduce(inst: ReductionInstance, mu=None, chart: str | None = None, samples: int = 100,
           seed: int = 0, tol: float = 1e-9) -> ReductionResult:
    """Reduced (𝛕_μ, 𝛚_μ, h_μ) by pulling back along the first section, then certified."""
    lev = inst.level(mu)
    qc = inst.quotient(mu, chart)
    tau, omega, h = _reduced_data(inst, lev, qc, qc.sections[0])
    rep = VerificationReport("reduce")
    ys = halton_points(lev.chart, samples, seed)
    # defining identities π*𝛕_μ = j*𝛕, π*𝛚_μ = j*𝛚 on the level chart
    for name, red, full in (("pullback_tau", tau, inst.structure.tau), ("pullback_omega", omega, inst.structure.omega)):
        a = pullback(qc.projection, red, lev.chart)
        b = pullback(lev.embed, full, lev.chart)
        gap = max(float(np.max(np.abs(a.at(y) - b.at(y)))) for y in ys)
        rep.residual(name, gap, tol)
    # section identity and h_μ∘π = h∘λ
    zs = halton_points(qc.chart, samples, seed + 1)
    sec = max(float(np.max(np.abs(np.asarray(qc.projection(qc.sections[0](z))) - z))) for z in zs)
    rep.residual("section_identity", sec, 1e-12)
    hv = np.asarray(inst.hamiltonian(np.asarray(lev.embed(ys)))).reshape(-1)
    hr = np.asarray(h(np.asarray(qc.projection(ys)))).reshape(-1)
    rep.residual("hamiltonian_descends", float(np.max(np.abs(hv - hr))), tol)
    orbit = 0.0
    for g in inst.action.group.samples(5, seed):
        xs = np.asarray(lev.embed(ys[:20]))
        moved = np.array([inst.action.apply(g, x) for x in xs])
        hm = np.asarray(inst.hamiltonian(moved)).reshape(-1)
        orbit = max(orbit, float(np.max(np.abs(hm - hv[:20]))))
    rep.residual("hamiltonian_orbit_invariance", orbit, 1e-10 * max(1.0, float(np.max(np.abs(hv)))))
    # independence of the section
    for j, other in enumerate(qc.sections[1:], start=2):
        t2, w2, h2 = _reduced_data(inst, lev, qc, other)
        gap = 0.0
        for z in zs:
            gap = max(gap, float(np.max(np.abs(t2.at(z) - tau.at(z)))),
                      float(np.max(np.abs(w2.at(z) - omega.at(z)))),
                      float(np.max(np.abs(np.asarray(h2(z)) - np.asarray(h(z))))))
        rep.residual(f"section_independence_{j}", gap, tol)
    red = KPolycosymplecticStructure(qc.chart, inst.k, tau, omega)
    rep.extend(verify_structure(red, samples=min(samples, 50), tol=tol, seed=seed), "reduced_structure")
    return ReductionResult(qc.chart, tau, omega, h, rep)


def compare_reduced(result: ReductionResult, expected: dict, samples: int = 100, seed: int = 0,
                    tol: float = 1e-9) -> VerificationReport:
    """Coefficientwise comparison of reduce() output with expected (τ, ω, h)."""
    rep = VerificationReport("expected_reduced")
    zs = halton_points(result.chart, samples, seed)
    for key, got in (("tau", result.tau), ("omega", result.omega)):
        if key in expected:
            want = expected[key]
            gap = max(float(np.max(np.abs(got.at(z) - want.at(z)))) for z in zs)
            rep.residual(key, gap, tol)
    if "h" in expected:
        a = np.asarray(result.h(zs)).reshape(-1)
        b = np.asarray(expected["h"](zs)).reshape(-1)
        rep.residual("h", float(np.max(np.abs(a - b))), tol)
    return rep


# ---------------------------------------------------------------------------
# reduced dynamics


@dataclass
class ReducedDynamics:
    field: KVectorFieldRep
    report: VerificationReport


def _level_velocity(lev: LevelChart, X: KVectorFieldRep, alpha: int, y) -> tuple[np.ndarray, float]:
    """w with Dλ(y) w = X_α(λ(y)); also the tangency defect."""
    D = np.asarray(lev.embed.jacobian(y)).reshape(-1, lev.chart.dim)
    v = X.at(np.asarray(lev.embed(y)).reshape(-1))[alpha]
    w, *_ = np.linalg.lstsq(D, v, rcond=None)
    return w, float(np.max(np.abs(D @ w - v)))


def _pushforward(lev, qc, X, section, z) -> np.ndarray:
    y = np.asarray(section(z)).reshape(-1)
    P = np.asarray(qc.projection.jacobian(y)).reshape(qc.chart.dim, -1)
    return np.stack([P @ _level_velocity(lev, X, a, y)[0] for a in range(X.k)])


def reduce_dynamics(inst: ReductionInstance, mu, X: KVectorFieldRep, chart: str | None = None,
                    samples: int = 20, seed: int = 0, flow_time: float = 0.01,
                    tol: float = 1e-9, reduced: ReductionResult | None = None) -> ReducedDynamics:
    """Push X forward along π_μ and certify it against flows and the reduced equations."""
    lev = inst.level(mu)
    qc = inst.quotient(mu, chart)
    rep = VerificationReport("reduce_dynamics")
    ys = halton_points(lev.chart, samples, seed)
    tang = 0.0
    for y in ys:
        for a in range(X.k):
            tang = max(tang, _level_velocity(lev, X, a, y)[1])
    rep.residual("tangent_to_level_set", tang, tol)
    inv = 0.0
    for xi in inst.action.generators:
        for a in range(X.k):
            br = lie_bracket(xi, X.component(a))
            for y in ys[:10]:
                inv = max(inv, float(np.max(np.abs(br.at(np.asarray(lev.embed(y)).reshape(-1))))))
    rep.residual("orbit_invariance", inv, 1e-8)
    k, n_red = X.k, qc.chart.dim

    def comps(z):
        return _pushforward(lev, qc, X, qc.sections[0], np.asarray(z, dtype=float)).reshape(-1)

    Y = KVectorFieldRep(qc.chart, k, NumericField(comps, n_red, k * n_red))
    zs = halton_points(qc.chart, samples, seed + 1)
    proj = 0.0
    for other in qc.sections[1:]:
        for z in zs:
            proj = max(proj, float(np.max(np.abs(_pushforward(lev, qc, X, other, z) - Y.at(z)))))
    rep.residual("section_independence", proj, 1e-8)
    # flows: lift, integrate on the level chart, project; against the reduced flow
    grid = np.linspace(0.0, flow_time, 11)
    flow = 0.0
    for z in zs[:5]:
        y0 = np.asarray(qc.sections[0](z)).reshape(-1)
        for a in range(k):
            ys_path = rk4_fixed(lambda s, y: _level_velocity(lev, X, a, y)[0], y0, grid)
            zs_path = rk4_fixed(lambda s, w: Y.at(w)[a], np.asarray(z, dtype=float), grid)
            flow = max(flow, float(np.max(np.abs(np.asarray(qc.projection(ys_path[-1])).reshape(-1) - zs_path[-1]))))
    rep.residual("flow_commutation", flow, 1e-6)
    if reduced is not None:
        from .dynamics import HamiltonianSystem
        sysr = HamiltonianSystem(reduced.structure, reduced.h)
        worst = 0.0
        for z in zs:
            r1, r2 = defining_residuals(sysr, Y.at(z), z)
            worst = max(worst, r1, r2)
        rep.residual("reduced_hamilton_equations", worst, tol)
    return ReducedDynamics(Y, rep)


# ---------------------------------------------------------------------------
# fibred extension of actions, momentum maps and Hamiltonians


@dataclass(frozen=True)
class ExtendedSymmetry:
    action: ActionModel
    momentum: MomentumMapModel | None


def extend_action_momentum(inst: ReductionInstance, fibred: FibredExtension) -> ExtendedSymmetry:
    """Φ̃(g, 𝐮, x) = (𝐮, Φ(g, x)) and 𝐉̃(𝐮, x) = 𝐉(x) on ℝ^k × M."""
    k, n = fibred.k, inst.chart.dim
    ext = fibred.extended_chart
    pr = fibred.projection

    def phi(g):
        inner = inst.action.phi(g)
        if isinstance(inner, AnalyticField):
            f = inner.fn
            return AnalyticField(lambda y: list(y[:k]) + list(f(list(y[k:]))), n + k, n + k, "Φ̃")
        return NumericField(lambda y: np.concatenate([y[:k], np.asarray(inner(y[k:])).reshape(-1)]), n + k, n + k)

    gens = []
    for X in inst.action.generators:
        comp = X.components
        if isinstance(comp, AnalyticField):
            f = comp.fn
            gens.append(VectorFieldRep(ext, AnalyticField(lambda y, f=f: [0.0] * k + list(f(list(y[k:]))),
                                                          n + k, n + k)))
        else:
            gens.append(VectorFieldRep(ext, NumericField(
                lambda y, c=comp: np.concatenate([np.zeros(k), np.asarray(c(y[k:])).reshape(-1)]), n + k, n + k)))
    action = ActionModel(inst.action.group, ext, phi, tuple(gens))
    mom = None
    if inst.momentum is not None:
        mom = MomentumMapModel(inst.momentum.k, inst.momentum.m, _compose(inst.momentum.J, pr))
    return ExtendedSymmetry(action, mom)


def verify_extended_momentum(fibred: FibredExtension, sym: ExtendedSymmetry, samples: int = 50,
                             seed: int = 0) -> float:
    """max |ι_{ξ̃}ω̃^α − d J̃^α_ξ| over samples (polysymplectic momentum-map residual)."""
    if sym.momentum is None:
        return 0.0
    k = fibred.k
    worst = 0.0
    for y in halton_points(fibred.extended_chart, samples, seed):
        W = np.transpose(fibred.omega_tilde.full(y), (0, 2, 1))
        G = sym.action.generator_matrix(y)
        dJ = sym.momentum.jacobian(y)
        for j in range(sym.momentum.m):
            for a in range(k):
                worst = max(worst, float(np.max(np.abs(W[a] @ G[:, j] - dJ[a, j]))))
    return worst


def extended_level_chart(inst: ReductionInstance, fibred: FibredExtension, mu) -> LevelChart:
    """J̃⁻¹(μ) parametrized as ℝ^k × (level chart)."""
    lev = inst.level(mu)
    k = fibred.k
    names = fibred.extended_chart.names[:k] + lev.chart.names
    bounds = fibred.extended_chart.bounds[:k] + lev.chart.bounds
    ch = ChartBox(names, bounds)
    emb = lev.embed
    if isinstance(emb, AnalyticField):
        f = emb.fn
        e = AnalyticField(lambda y: list(y[:k]) + list(f(list(y[k:]))), ch.dim, k + inst.chart.dim)
    else:
        e = NumericField(lambda y: np.concatenate([y[:k], np.asarray(emb(y[k:])).reshape(-1)]),
                         ch.dim, k + inst.chart.dim)
    return LevelChart(ch, e)


def regular_value_agreement(inst: ReductionInstance, fibred: FibredExtension, sym: ExtendedSymmetry,
                            mu, samples: int = 20, seed: int = 0) -> tuple[bool, bool]:
    """Weak-regularity verdicts for 𝐉 and 𝐉̃ at μ (they should coincide)."""

    def verdict(level: LevelChart, mm: MomentumMapModel) -> bool:
        ranks, ok = set(), True
        for y in halton_points(level.chart, samples, seed):
            x = np.asarray(level.embed(y)).reshape(-1)
            dJ = mm.jacobian(x).reshape(mm.k * mm.m, len(x))
            ranks.add(rank(dJ))
            TL = np.asarray(level.embed.jacobian(y)).reshape(len(x), -1)
            ok &= subspace_equal(nullspace(dJ), TL)[0]
        return ok and len(ranks) == 1

    return verdict(inst.level(mu), inst.momentum), verdict(extended_level_chart(inst, fibred, mu), sym.momentum)


@dataclass(frozen=True)
class ExtendedHamiltonian:
    h: SmoothField
    X: KVectorFieldRep


def extended_hamiltonian(inst: ReductionInstance, fibred: FibredExtension,
                         X: KVectorFieldRep) -> ExtendedHamiltonian:
    """h̃(𝐮, x) = h(x) − Σ u^α and X̃_α = X_α + (R_α h) ∂/∂u^α."""
    k, n = fibred.k, inst.chart.dim
    s = inst.structure
    h = inst.hamiltonian
    if isinstance(h, AnalyticField):
        f = h.fn
        ht = AnalyticField(lambda y: [f(list(y[k:]))[0] - sum(y[:k])], n + k, 1, "h̃")
    else:
        ht = NumericField(lambda y: np.asarray(h(y[k:])).reshape(-1)[0] - np.sum(y[:k]), n + k, 1)

    def comps(y):
        x = y[k:]
        Xv = X.at(x)
        R = reeb_family(s, x)
        dh = np.asarray(h.jacobian(x)).reshape(-1)
        out = np.zeros((k, n + k))
        out[:, k:] = Xv
        for a in range(k):
            out[a, a] = R[a] @ dh
        return out.reshape(-1)

    return ExtendedHamiltonian(ht, KVectorFieldRep(fibred.extended_chart, k, NumericField(comps, n + k, k * (n + k))))


def extended_hamiltonian_residual(fibred: FibredExtension, eh: ExtendedHamiltonian, samples: int = 50,
                                  seed: int = 0) -> float:
    """max |Σ_α ι_{X̃_α} ω̃^α − dh̃| over samples."""
    worst = 0.0
    for y in halton_points(fibred.extended_chart, samples, seed):
        W = np.transpose(fibred.omega_tilde.full(y), (0, 2, 1))
        Xv = eh.X.at(y)
        lhs = sum(W[a] @ Xv[a] for a in range(fibred.k))
        worst = max(worst, float(np.max(np.abs(lhs - np.asarray(eh.h.jacobian(y)).reshape(-1)))))
    return worst


def fibred_poisson_residual(fibred: FibredExtension, f: SmoothField, g: SmoothField, samples: int = 30,
                            seed: int = 0) -> float:
    """k = 1: |{f∘pr, g∘pr}_ω̃ − {f, g}∘pr| with ω̃ symplectic on ℝ × M."""
    from .structures import poisson_bracket
    if fibred.k != 1:
        raise ValueError("the Poisson-morphism check applies to k = 1")
    k = 1
    pb = poisson_bracket(fibred.base, f, g)
    worst = 0.0
    for y in halton_points(fibred.extended_chart, samples, seed):
        W = np.transpose(fibred.omega_tilde.full(y), (0, 2, 1))[0]   # W v = ι_v ω̃
        x = y[k:]
        dF = np.concatenate([[0.0], np.asarray(f.jacobian(x)).reshape(-1)])
        dG = np.concatenate([[0.0], np.asarray(g.jacobian(x)).reshape(-1)])
        XF, XG = np.linalg.solve(W, dF), np.linalg.solve(W, dG)
        lhs = XG @ W @ XF        # ω̃(X_F, X_G) = (ι_{X_F} ω̃)(X_G)
        worst = max(worst, abs(float(lhs) - float(np.asarray(pb(x)).reshape(-1)[0])))
    return worst


# ---------------------------------------------------------------------------
# k-cosymplectic to ℓ-cosymplectic reduction of base variables


@dataclass(frozen=True)
class SpacetimeData:
    """Instance data for reducing base coordinates.

    ``basis_change`` is ĉ (k×k, rows are the new τ̂^β = ĉ^β_α τ^α) ordered so
    the first ℓ combinations vanish on the fundamental fields.  ``keep``
    indexes the coordinates of M_ℓ inside M, ``section(λ)`` maps M_ℓ into M
    with the suppressed momenta frozen at λ, and ``reduced_chart`` names M_ℓ.
    """

    ell: int
    basis_change: np.ndarray
    keep: tuple[int, ...]
    reduced_chart: ChartBox
    section: Callable[[np.ndarray], SmoothField]
    group_ell: Callable[[np.ndarray], SmoothField] | None = None


@dataclass
class SpacetimeResult:
    chart: ChartBox
    tau: VForm
    omega: VForm
    h: SmoothField
    field: KVectorFieldRep
    report: VerificationReport

    @property
    def structure(self) -> KPolycosymplecticStructure:
        return KPolycosymplecticStructure(self.chart, self.tau.k, self.tau, self.omega)


def _combine(form: VForm, c: np.ndarray) -> VForm:
    c = np.asarray(c, dtype=float)

    def flat(x, o):
        from .ad import jeinsum
        J = form.jet(x, o)
        return jeinsum("ba,aI->bI", c, J).reshape(-1)

    from .fields import DerivedField
    if form.is_constant:
        return VForm.constant(form.chart, form.degree, c @ form.at(form.chart.center))
    return VForm(form.chart, form.degree, c.shape[0], DerivedField(flat, form.n, c.shape[0] * form.m))


def spacetime_reduce(inst: ReductionInstance, data: SpacetimeData, lam, X: KVectorFieldRep,
                     samples: int = 50, seed: int = 0, tol: float = 1e-9) -> SpacetimeResult:
    """ℓ-cosymplectic structure on M_ℓ, reduced Hamiltonian and projected ℓ-vector field.

    Checks: τ̄ vanishes on the fundamental fields; π*𝛕_ℓ = 𝛕̄ and π*𝛚_ℓ = 𝛚̄;
    h has no dependence on suppressed base coordinates; the hypothesis
    Σ_{α>ℓ} [X̂_α]^α_i = 0; π∘Φ_g = Φ_{ℓ,g}∘π; and the projected field solves
    the reduced Hamilton equations.
    """
    s = inst.structure
    k, n, ell = s.k, s.chart.dim, data.ell
    c = np.asarray(data.basis_change, dtype=float)
    if c.shape != (k, k) or abs(np.linalg.det(c)) < 1e-12:
        raise ValueError("basis change must be an invertible k×k matrix")
    lam = np.asarray(lam, dtype=float)
    rep = VerificationReport("spacetime_reduce")
    tau_hat, omega_hat = _combine(s.tau, c), _combine(s.omega, c)
    tau_bar, omega_bar = _combine(s.tau, c[:ell]), _combine(s.omega, c[:ell])
    pts = halton_points(s.chart, samples, seed)
    van = 0.0
    for x in pts:
        G = inst.action.generator_matrix(x)
        van = max(van, float(np.max(np.abs(tau_bar.at(x) @ G), initial=0.0)))
    rep.residual("tau_bar_vanishes_on_generators", van, tol)
    sec = data.section(lam)
    red = data.reduced_chart
    tau_l = freeze(pullback(sec, tau_bar, red))
    omega_l = freeze(pullback(sec, omega_bar, red))
    proj = AnalyticField(lambda x, keep=data.keep: [x[i] for i in keep], n, len(data.keep), "π")
    # defining identities on the submanifold S_λ = image of the section
    zs = halton_points(red, samples, seed + 1)
    gt = gw = 0.0
    pt_, pw_ = pullback(proj, tau_l, s.chart), pullback(proj, omega_l, s.chart)
    for z in zs:
        x = np.asarray(sec(z)).reshape(-1)
        gt = max(gt, float(np.max(np.abs(pt_.at(x) - tau_bar.at(x)))))
        gw = max(gw, float(np.max(np.abs(pw_.at(x) - omega_bar.at(x)))))
    rep.residual("pullback_tau", gt, tol)
    rep.residual("pullback_omega", gw, tol)
    h_l = _compose(inst.hamiltonian, sec)
    # h must not depend on suppressed base coordinates
    kk, base, flds, mom = s.chart.darboux_layout()
    suppressed = [j for j in base if j not in data.keep]
    dep = 0.0
    for x in pts:
        dh = np.asarray(inst.hamiltonian.jacobian(x)).reshape(-1)
        dep = max(dep, float(np.max(np.abs(dh[suppressed]), initial=0.0)))
    rep.residual("h_independent_of_suppressed_base", dep, tol)
    # hypothesis on the new-basis momentum components
    d = np.linalg.inv(c)
    hyp = 0.0
    for z in zs:
        x = np.asarray(sec(z)).reshape(-1)
        Xv = X.at(x)
        Xhat = d.T @ Xv                    # X̂_α = Σ_δ d^δ_α X_δ
        for i in range(len(flds)):
            total = 0.0
            for a in range(ell, k):
                # momentum p̂^a_i = ĉ^a_γ p^γ_i evaluated on X̂_a
                total += sum(c[a, g] * Xhat[a, mom[i][g]] for g in range(k))
            hyp = max(hyp, abs(total))
    rep.residual("suppressed_momentum_hypothesis", hyp, tol)
    # equivariance of the projection
    eqv = 0.0
    for g in inst.action.group.samples(10, seed):
        phil = data.group_ell(g) if data.group_ell is not None else None
        for x in pts[:20]:
            lhs = np.asarray(proj(inst.action.apply(g, x))).reshape(-1)
            rhs = np.asarray(proj(x)).reshape(-1)
            if phil is not None:
                rhs = np.asarray(phil(rhs)).reshape(-1)
            eqv = max(eqv, float(np.max(np.abs(lhs - rhs))))
    rep.residual("projection_equivariance", eqv, tol)

    # projected ℓ-vector field: π_* X̂_β for β < ℓ along S_λ
    def comps(z):
        x = np.asarray(sec(np.asarray(z, dtype=float))).reshape(-1)
        Xhat = d.T @ X.at(x)
        return Xhat[:ell][:, list(data.keep)].reshape(-1)

    m = red.dim
    Y = KVectorFieldRep(red, ell, NumericField(comps, m, ell * m))
    red_struct = KPolycosymplecticStructure(red, ell, tau_l, omega_l)
    rep.extend(verify_structure(red_struct, samples=min(samples, 50), tol=tol, seed=seed), "reduced_structure")
    from .dynamics import HamiltonianSystem
    sysr = HamiltonianSystem(red_struct, h_l)
    worst = 0.0
    for z in zs:
        r1, r2 = defining_residuals(sysr, Y.at(z), z)
        worst = max(worst, r1, r2)
    rep.residual("reduced_hamilton_equations", worst, tol)
    return SpacetimeResult(red, tau_l, omega_l, h_l, Y, rep)
