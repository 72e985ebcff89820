"""Acceptance suite: one criterion per test group, verdict lines in the pytest summary.

Run ``pytest tests/test_acceptance.py -v``; the terminal summary ends with a
``criterion N: PASS|FAIL`` line for each of the eight criteria.
"""
import math
import time

import numpy as np
import pytest

from polyreduce import cli
from polyreduce.dynamics import (GaugeChoice, HamiltonianSystem, divergence_residual, hamiltonian_kvector_field,
                                 hdw_residuals, lift_radial_section, solve_hdw_strings, solve_reduced_membrane_ode)
from polyreduce.fields import AnalyticField, ChartBox, check_jacobian_contract, halton_points
from polyreduce.forms import VForm, exterior_derivative, lie_bracket, pullback
from polyreduce.instances import (CATALOG, counterexample_r4, get_instance, printed_expected_strings)
from polyreduce.reduction import (affine_action, cocycle, compare_reduced, extend_action_momentum,
                                  extended_hamiltonian, extended_hamiltonian_residual, fibred_poisson_residual,
                                  reduce, spacetime_reduce)
from polyreduce.structures import (extend_to_fibred, fibred_reeb_residual, hamiltonian_field, poisson_bracket,
                                   reeb_certificate, reeb_family, verify_structure)
from polyreduce import ad


def _report_values(text: str) -> dict[str, float]:
    out = {}
    for line in text.splitlines():
        if ".value = " in line:
            key, val = line.split(".value = ")
            out[key] = float(val)
    return out


# ---------------------------------------------------------------------------
# 1. structure suite


def test_criterion_1_structures(criterion):
    log = criterion(1)
    t0 = time.perf_counter()
    for name in ("cosymplectic-darboux", "coupled-strings", "membrane-polar", "product-cosymplectic"):
        rep = verify_structure(get_instance(name).structure, samples=200)
        worst = max(c.value for c in rep.checks if c.name.endswith("_closed"))
        log.check(f"{name} passes", rep.passed, str(rep.first_failure()))
        log.check(f"{name} closedness", worst <= 1e-9, f"{worst:.2e}")
    rep = verify_structure(counterexample_r4(), samples=200)
    bad = rep.first_failure()
    log.check("R4 counterexample rejected", bad is not None and bad.name == "ker_omega_rank"
              and "is 0, expected 2" in bad.detail, bad.detail if bad else "passed unexpectedly")
    elapsed = time.perf_counter() - t0
    log.check("runtime <= 5 s", elapsed <= 5.0, f"{elapsed:.2f} s")
    log.assert_all()


# ---------------------------------------------------------------------------
# 2. Reeb suite


def test_criterion_2_reeb(criterion):
    log = criterion(2)
    cases = {"cosymplectic-darboux": [[1, 0, 0]],
             "coupled-strings": [[1, 0] + [0] * 6, [0, 1] + [0] * 6],
             "membrane-polar": [[1, 0, 0, 0, 0, 0, 0], [0, 1, 0, 0, 0, 0, 0], [0, 0, 1, 0, 0, 0, 0]]}
    for name, want in cases.items():
        s = get_instance(name).structure
        gap, full_rank = 0.0, True
        for x in halton_points(s.chart, 200, 3):
            gap = max(gap, float(np.max(np.abs(reeb_family(s, x) - np.array(want, dtype=float)))))
            res, ok = reeb_certificate(s, x)
            full_rank &= ok and res <= 1e-12
        log.check(f"{name} Reeb family", gap <= 1e-12, f"{gap:.2e}")
        log.check(f"{name} unique (full column rank)", full_rank)
    log.assert_all()


# ---------------------------------------------------------------------------
# 3. algebra suite


def test_criterion_3_algebra(criterion):
    log = criterion(3)
    T = get_instance("translation-cocycle")
    for a, b in ((0.3, -0.2), (1.5, 2.0), (-0.7, 0.0)):
        sig = cocycle(T, [a, b]).sigma
        # sigma is a difference of momentum values, so only subtraction rounding remains
        gap = float(np.max(np.abs(sig - np.array([[b, -a]]))))
        log.check(f"sigma({a}, {b}) = (b, -a)", sig.shape == (1, 2) and gap <= 4 * np.finfo(float).eps,
                  f"{sig} gap {gap:.1e}")
    for name, inst in (("translation", T), ("affine-line", get_instance("affine-line", shift=(0.4, -1.0)))):
        rep = affine_action(inst).check(pairs=200, seed=1)
        log.check(f"{name}: cocycle identity, Delta axioms, equivariance", rep.passed,
                  str(rep.first_failure()))
    s = get_instance("cosymplectic-darboux").structure
    rng = np.random.default_rng(7)
    worst_jac = worst_anti = 0.0
    pts = halton_points(s.chart, 200, 5)
    for trial in range(4):
        c = rng.normal(size=(3, 4))
        f = AnalyticField(lambda v, c=c[0]: [c[0] * v[1] ** 2 * v[2] + c[1] * ad.sin(v[0] * v[1]) + c[2] * v[2] ** 3
                                             + c[3] * v[0] * v[2]], 3, 1)
        g = AnalyticField(lambda v, c=c[1]: [c[0] * v[1] * v[2] ** 2 + c[1] * ad.cos(v[2]) + c[2] * v[0] * v[1] ** 3
                                             + c[3] * v[1]], 3, 1)
        h = AnalyticField(lambda v, c=c[2]: [c[0] * v[1] ** 3 + c[1] * v[0] * v[2] + c[2] * ad.exp(0.3 * v[1])
                                             + c[3] * v[2] ** 2], 3, 1)
        pb = lambda a, b: poisson_bracket(s, a, b)
        jac = [pb(f, pb(g, h)), pb(g, pb(h, f)), pb(h, pb(f, g))]
        Xfg = hamiltonian_field(s, pb(f, g))
        br = lie_bracket(hamiltonian_field(s, f), hamiltonian_field(s, g))
        for x in pts[trial * 50:(trial + 1) * 50]:
            worst_jac = max(worst_jac, abs(sum(float(np.asarray(t(x)).reshape(-1)[0]) for t in jac)))
            worst_anti = max(worst_anti, float(np.max(np.abs(Xfg.at(x) + br.at(x)))))
    log.check("Jacobi identity (200 samples)", worst_jac <= 1e-8, f"{worst_jac:.2e}")
    log.check("X_{f,g} = -[X_f, X_g] (200 samples)", worst_anti <= 1e-8, f"{worst_anti:.2e}")
    log.assert_all()


# ---------------------------------------------------------------------------
# 4. reduction suite


@pytest.fixture(scope="module")
def strings_reduction():
    inst = get_instance("coupled-strings")
    return inst, reduce(inst, (1.0, 0.5), samples=100)


def test_criterion_4_reduction_certificates(criterion, strings_reduction):
    log = criterion(4)
    inst, res = strings_reduction
    rep = res.report
    log.check("pi* tau_mu = j* tau (100 level samples)", rep["pullback_tau"].value <= 1e-9,
              f"{rep['pullback_tau'].value:.2e}")
    log.check("pi* omega_mu = j* omega (100 level samples)", rep["pullback_omega"].value <= 1e-9,
              f"{rep['pullback_omega'].value:.2e}")
    gaps = [c.value for c in rep.checks if c.name.startswith("section_independence")]
    log.check("section independence <= 1e-9", gaps and max(gaps) <= 1e-9, f"{max(gaps):.2e}")
    red = [c for c in rep.checks if c.name.startswith("reduced_structure.")]
    log.check("reduced structure verifies", red and all(c.passed for c in red))
    exp = compare_reduced(res, inst.quotient((1.0, 0.5)).expected)
    log.check("derived reduced data reproduced", exp.passed, str(exp.first_failure()))
    log.assert_all()


def test_criterion_4_printed_reduced_data(criterion, strings_reduction):
    """Literal comparison with the printed strings formulas.

    tau_mu and omega_mu match (omega_mu in the chart of the first string's
    momenta, where it is printed).  h_mu is expected to fail: the printed
    formula carries +(p^x)^2, while substituting p_1 = (mu + p)/2 and
    p_2 = (mu - p)/2 into h gives -(p^x)^2.  The printed reduced equation
    dq/dx = -p^x agrees with the derived sign, not the printed one.
    """
    log = criterion(4)
    inst, res = strings_reduction
    mu = (1.0, 0.5)
    printed = printed_expected_strings(mu)
    first = reduce(inst, mu, chart=printed["omega_chart"], samples=100)
    zs = halton_points(res.chart, 100, 11)
    zf = halton_points(first.chart, 100, 12)
    tau_want = VForm.from_terms(res.chart, 1, [{("t",): 1.0}, {("x",): 1.0}])
    omega_want = VForm.from_terms(first.chart, 2, printed["omega_terms"])
    C = inst.extras["coupling"]
    tg = max(float(np.max(np.abs(res.tau.at(z) - tau_want.at(z)))) for z in zs)
    wg = max(float(np.max(np.abs(first.omega.at(z) - omega_want.at(z)))) for z in zf)
    hg = max(abs(float(np.asarray(res.h(z)).reshape(-1)[0])
                 - printed["h"](z, float(np.asarray(C(z[:3])).reshape(-1)[0]))) for z in zs)
    log.check("printed tau_mu", tg <= 1e-9, f"{tg:.2e}")
    log.check("printed omega_mu (q, p1 chart)", wg <= 1e-9, f"{wg:.2e}")
    log.check("printed h_mu", hg <= 1e-9, f"gap {hg:.2e}: printed +(p^x)^2, derived -(p^x)^2")
    log.assert_all()


# ---------------------------------------------------------------------------
# 5. dynamics suite


def test_criterion_5_dynamics(criterion, tmp_path):
    log = criterion(5)
    t0 = time.perf_counter()
    zero = get_instance("coupled-strings", coupling="zero")
    errs = []
    for n in (101, 201, 401):
        g = solve_hdw_strings(zero.extras["coupling"], n, n, lambda x: np.array([np.sin(x), 0 * x]),
                              lambda x: np.array([-np.cos(x), 0 * x]), zero.chart)
        T, X = np.meshgrid(g.axes[0], g.axes[1], indexing="ij")
        errs.append(float(np.max(np.abs(g.values["q1"] - np.sin(X - T)))))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    log.check("order vs sin(x - t) in 2.0 +/- 0.5", all(1.5 <= o <= 2.5 for o in orders),
              ", ".join(f"{o:.3f}" for o in orders))
    inst = get_instance("coupled-strings")
    divs = []
    for n in (101, 201, 401):
        g = solve_hdw_strings(inst.extras["coupling"], n, n, lambda x: np.array([np.sin(x), np.cos(2 * x)]),
                              lambda x: np.array([0 * x, 0.5 * np.sin(x)]), inst.chart)
        divs.append(divergence_residual(g, inst.momentum.J, 2, 1))
    dorders = [math.log2(divs[i] / divs[i + 1]) for i in range(2)]
    log.check("divergence law residual O(h^2)", all(1.5 <= o <= 2.5 for o in dorders),
              ", ".join(f"{d:.2e}" for d in divs))
    code = cli.main(["compare", "--instance", "coupled-strings", "--grid", "201x201", "--out", str(tmp_path)])
    vals = _report_values((tmp_path / "compare_report.txt").read_text())
    gap, ratio = vals["gap_linf_401x401"], vals["refinement_ratio"]
    log.check("compare exits 0", code == 0, f"exit {code}")
    log.check("L_inf gap at 401^2 <= 5e-3", gap <= 5e-3, f"{gap:.2e}")
    log.check("gap shrinks ~4x on refinement", 3.0 <= ratio <= 5.0, f"{ratio:.3f}")
    elapsed = time.perf_counter() - t0
    log.check("runtime <= 60 s", elapsed <= 60.0, f"{elapsed:.1f} s")
    log.assert_all()


# ---------------------------------------------------------------------------
# 6. fibred extension suite


def test_criterion_6_fibred(criterion):
    log = criterion(6)
    for name in ("coupled-strings", "membrane-polar", "cosymplectic-darboux"):
        inst = get_instance(name)
        F = extend_to_fibred(inst.structure)
        rep = verify_structure(F.structure, samples=100)
        log.check(f"{name}: omega~ k-polysymplectic", rep.passed, str(rep.first_failure()))
        r = fibred_reeb_residual(F)
        log.check(f"{name}: i_R~ omega~ = -delta du", r <= 1e-14, f"{r:.2e}")
        sys_ = HamiltonianSystem(inst.structure, inst.hamiltonian)
        eh = extended_hamiltonian(inst, F, hamiltonian_kvector_field(sys_))
        er = extended_hamiltonian_residual(F, eh, samples=30)
        log.check(f"{name}: i_X omega~ = dh~", er <= 1e-10, f"{er:.2e}")
    S = get_instance("coupled-strings")
    sym = extend_action_momentum(S, extend_to_fibred(S.structure))
    log.check("extended momentum map present", sym.momentum is not None)
    D = get_instance("cosymplectic-darboux")
    F1 = extend_to_fibred(D.structure)
    f = AnalyticField(lambda v: [v[1] ** 2 * v[2] + v[0] * v[2]], 3, 1)
    g = AnalyticField(lambda v: [v[2] ** 3 - v[0] * v[1]], 3, 1)
    pr = fibred_poisson_residual(F1, f, g)
    log.check("k = 1: projection is a Poisson morphism", pr <= 1e-9, f"{pr:.2e}")
    log.assert_all()


# ---------------------------------------------------------------------------
# 7. spacetime reduction suite


def test_criterion_7_spacetime(criterion):
    log = criterion(7)
    M = get_instance("membrane-polar")
    sysM = HamiltonianSystem(M.structure, M.hamiltonian, GaugeChoice("instance_supplied", M.gauge_split))
    X = hamiltonian_kvector_field(sysM)
    st = spacetime_reduce(M, M.extras["spacetime"], (0.0, 0.0), X)
    z = np.array([1.3, 0.2, -0.4])
    log.check("tau_l = dr", np.allclose(st.tau.at(z), [[1.0, 0.0, 0.0]], atol=1e-12), str(st.tau.at(z)))
    om = st.omega.at(z)   # order (r,zeta), (r,pr), (zeta,pr)
    log.check("omega_l = dzeta^dpr", np.allclose(om, [[0.0, 0.0, 1.0]], atol=1e-12), str(om))
    log.check("spacetime certificates", st.report.passed, str(st.report.first_failure()))
    eq = st.report["projection_equivariance"].value
    log.check("pi o Phi_g = Phi_l,g o pi", eq <= 1e-12, f"{eq:.2e}")
    sol = solve_reduced_membrane_ode(lambda r: 1.0, 1.0, (1.0, 2.0), -0.25, 0.5, steps=1000)
    z2 = sol.at(2.0)[0]
    log.check("zeta(2) = -1 +/- 1e-8", abs(z2 + 1.0) <= 1e-8, f"{z2:.12g}")
    # a non-polynomial force exposes the discretisation order of the lifted residual
    f = lambda r: math.exp(r)
    Mf = get_instance("membrane-polar", force="exp(r)")
    sysF = HamiltonianSystem(Mf.structure, Mf.hamiltonian, GaugeChoice("instance_supplied", Mf.gauge_split))
    res = []
    for steps in (50, 100, 200):
        s = solve_reduced_membrane_ode(f, 1.0, (1.0, 2.0), -0.25, 0.5, steps=steps)
        res.append(hdw_residuals(lift_radial_section(s, Mf.chart, (0.0, 0.0)), sysF, tol=1.0).max())
    ords = [math.log2(res[i] / res[i + 1]) for i in range(2)]
    log.check("lifted section residual at second order", all(1.5 <= o <= 2.5 for o in ords),
              ", ".join(f"{r:.2e}" for r in res))
    log.assert_all()


# ---------------------------------------------------------------------------
# 8. contract suite


def _shipped_fields():
    """(label, field, chart) for every field the catalog and pipelines hand out."""
    out = []
    names = sorted(CATALOG) + ["translation-cocycle", "affine-line"]
    for name in names:
        inst = get_instance(name)
        ch = inst.chart
        out.append((f"{name}.h", inst.hamiltonian, ch))
        out.append((f"{name}.tau", inst.structure.tau.coeffs, ch))
        out.append((f"{name}.omega", inst.structure.omega.coeffs, ch))
        if inst.momentum is not None:
            out.append((f"{name}.J", inst.momentum.J, ch))
        if inst.gauge_split is not None:
            out.append((f"{name}.gauge", inst.gauge_split, ch))
        for j, xi in enumerate(inst.action.generators):
            out.append((f"{name}.xi{j}", xi.components, ch))
        for g in inst.action.group.samples(2, 1):
            out.append((f"{name}.phi_g", inst.action.phi(g), ch))
        if inst.level_chart is not None:
            lev = inst.level(None)
            out.append((f"{name}.level_embed", lev.embed, lev.chart))
            for qname, qc in inst.quotient_charts(inst.mu_array(None)).items():
                out.append((f"{name}.{qname}.projection", qc.projection, lev.chart))
                for i, s in enumerate(qc.sections):
                    out.append((f"{name}.{qname}.section{i}", s, qc.chart))
                if qc.expected and "h" in qc.expected:
                    out.append((f"{name}.{qname}.h_mu", qc.expected["h"], qc.chart))
        if "spacetime" in inst.extras:
            st = inst.extras["spacetime"]
            out.append((f"{name}.S_lambda", st.section((0.3, -0.7)), st.reduced_chart))
        if "coupling" in inst.extras:
            cch = ChartBox(("t", "x", "q"), ((0.0, 2.0), (0.0, 6.0), (-3.0, 3.0)))
            out.append((f"{name}.C", inst.extras["coupling"], cch))
    S = get_instance("coupled-strings")
    X = hamiltonian_kvector_field(HamiltonianSystem(S.structure, S.hamiltonian))
    out.append(("strings.X_minimal", X.components, S.chart))
    return out


def test_criterion_8_contracts(criterion):
    log = criterion(8)
    bad = []
    fields = _shipped_fields()
    for label, f, ch in fields:
        err = check_jacobian_contract(f, ch, count=10)
        if err > 1e-5:
            bad.append(f"{label} {err:.1e}")
    log.check(f"Jacobian contract ({len(fields)} fields)", not bad, ", ".join(bad))
    ch = ChartBox(("x", "y", "z", "w"), ((-1.0, 1.0),) * 4)
    a = AnalyticField(lambda v: [ad.sin(v[0] * v[1]) * v[2] ** 3, ad.exp(v[0]) * v[3], v[2] * v[0] ** 2,
                                 v[1] * v[3]], 4, 4)
    w1 = VForm(ch, 1, 1, a)
    b = AnalyticField(lambda v: [v[0] * v[1] * v[2], ad.cos(v[3]), v[0] ** 2, v[1] - v[2], v[3] * v[0],
                                 ad.sin(v[1])], 4, 6)
    w2 = VForm(ch, 2, 1, b)
    ddw = exterior_derivative(exterior_derivative(w1))   # degree 3 is the cap
    dd = max(float(np.max(np.abs(ddw.at(x)))) for x in halton_points(ch, 20, 2))
    log.check("d o d = 0", dd <= 1e-8, f"{dd:.2e}")
    phi = AnalyticField(lambda v: [v[0] * v[1], ad.sin(v[1]), v[2] + v[0] ** 2, v[3] * v[2]], 4, 4)
    nat = 0.0
    for w in (w1, w2):
        lhs, rhs = exterior_derivative(pullback(phi, w, ch)), pullback(phi, exterior_derivative(w), ch)
        for x in halton_points(ch, 20, 4):
            nat = max(nat, float(np.max(np.abs(lhs.at(x) - rhs.at(x)))))
    log.check("d(phi* w) = phi*(dw)", nat <= 1e-8, f"{nat:.2e}")
    log.assert_all()


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
