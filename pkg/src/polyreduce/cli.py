"""Command-line front end: verify, solve, reduce, compare, list.

Exit codes: 0 when every check passes, 1 when a check or comparison fails,
2 for usage and configuration errors.  Reports are flat ``key = value`` text
and contain no timings, so equal inputs give byte-identical files.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .config import ConfigError, export_structure, load_config, parse_grid, parse_mu
from .dynamics import (CFLError, GaugeChoice, HamiltonianSystem, SectionGrid, hamiltonian_kvector_field,
                       hdw_residuals, lift_radial_section, solve_hdw_strings, solve_hdw_strings_reduced,
                       solve_membrane_polar_poisson, solve_reduced_membrane_ode)
from .instances import get_instance, list_instances, membrane_reduced_h_text
from .reduction import (ReductionInstance, check_reduction_conditions, compare_reduced, reduce, reduce_dynamics,
                        spacetime_reduce, verify_action_invariance, verify_momentum_map)
from .report import VerificationReport
from .structures import verify_structure
from . import svg


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    instance: ReductionInstance | None = None
    structure: object = None
    source: str = ""
    mu: tuple[float, ...] | None = None
    grid: tuple[int, int] | None = None
    tol: float | None = None
    samples: int = 100
    seed: int = 0
    gauge: str | None = None
    out: str | None = None
    svg: bool = False
    files: dict = field(default_factory=dict)

    def write(self, name: str, text: str):
        if self.out is None:
            return
        os.makedirs(self.out, exist_ok=True)
        path = os.path.join(self.out, name)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        self.files[name] = path


# ---------------------------------------------------------------------------
# argument handling


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polyreduce", description="k-polycosymplectic reduction toolkit")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("list", help="list catalogued instances")
    for name, text in (("verify", "check structure, action, momentum map and reduction conditions"),
                       ("solve", "solve the field equations of an instance on a grid"),
                       ("reduce", "reduce an instance and export the reduced data"),
                       ("compare", "compare full and reduced dynamics under grid refinement")):
        sp = sub.add_parser(name, help=text)
        src = sp.add_mutually_exclusive_group()
        src.add_argument("--instance", help="catalog instance name")
        src.add_argument("--config", help="INI config file")
        sp.add_argument("--mu", help="momentum value (or frozen momenta for spacetime routes), comma list")
        sp.add_argument("--grid", help="grid size NxM, both at least 8")
        sp.add_argument("--tol", type=float, help="tolerance for pass/fail")
        sp.add_argument("--samples", type=int, help="number of sample points")
        sp.add_argument("--seed", type=int, help="seed for sample points")
        sp.add_argument("--gauge", choices=("minimal", "paper"), help="minimal: pseudoinverse solution; paper: the instance-supplied momentum split")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--svg", action="store_true", help="also write SVG plots (needs --out)")
    return p


def _resolve(args) -> RunConfig:
    run: dict = {}
    if args.config:
        loaded = load_config(args.config)
        inst, structure, run, source = loaded.instance, loaded.structure, loaded.run, loaded.source
    elif args.instance:
        try:
            inst = get_instance(args.instance)
        except KeyError as e:
            raise UsageError(str(e).strip("'\"")) from None
        structure, source = inst.structure, args.instance
    else:
        raise UsageError("give --instance NAME or --config FILE")

    def pick(flag, key, conv):
        if flag is not None:
            return flag
        if key in run:
            try:
                return conv(run[key])
            except ValueError:
                raise UsageError(f"[run] {key} = {run[key]!r} is invalid") from None
        return None

    rc = RunConfig(args.command, inst, structure, source)
    rc.mu = parse_mu(args.mu if args.mu is not None else run.get("mu"))
    grid = args.grid if args.grid is not None else run.get("grid")
    rc.grid = parse_grid(grid) if grid is not None else None
    rc.tol = pick(args.tol, "tol", float)
    samples = pick(args.samples, "samples", int)
    rc.samples = 100 if samples is None else samples
    seed = pick(args.seed, "seed", int)
    rc.seed = 0 if seed is None else seed
    rc.gauge = pick(args.gauge, "gauge", str)
    rc.out = pick(args.out, "out", str)
    rc.svg = bool(args.svg)
    if rc.samples < 1:
        raise UsageError(f"--samples must be at least 1, got {rc.samples}")
    if rc.tol is not None and not (rc.tol > 0 and math.isfinite(rc.tol)):
        raise UsageError(f"--tol must be positive, got {rc.tol}")
    if rc.gauge not in (None, "minimal", "paper"):
        raise UsageError(f"gauge must be minimal or paper, got {rc.gauge!r}")
    if rc.svg and rc.out is None:
        raise UsageError("--svg needs --out")
    if inst is not None and inst.momentum is not None and rc.mu is not None:
        try:
            inst.mu_array(rc.mu)
            if inst.level_chart is not None:
                inst.level(rc.mu)
        except ValueError as e:
            raise UsageError(str(e)) from None
    return rc


def _system(rc: RunConfig) -> HamiltonianSystem:
    inst = rc.instance
    mode = rc.gauge or ("paper" if inst.gauge_split is not None else "minimal")
    if mode == "paper":
        if inst.gauge_split is None:
            raise UsageError(f"instance {inst.name} supplies no momentum split; use --gauge minimal")
        return HamiltonianSystem(inst.structure, inst.hamiltonian, GaugeChoice("instance_supplied", inst.gauge_split))
    return HamiltonianSystem(inst.structure, inst.hamiltonian)


def _gauge_name(rc: RunConfig) -> str:
    inst = rc.instance
    return rc.gauge or ("paper" if inst is not None and inst.gauge_split is not None else "minimal")


def _finish(rc: RunConfig, rep: VerificationReport, name: str, header: list[str] = ()) -> int:
    text = "".join(f"# {h}\n" for h in header) + rep.to_text()
    rc.write(name, text)
    sys.stdout.write(text)
    if rep.passed:
        print("PASS")
        return 0
    bad = rep.first_failure()
    detail = f" ({bad.detail})" if bad.detail else ""
    print(f"FAIL: first failed check {bad.name} = {bad.value:.6e}{detail}")
    return 1


def _header(rc: RunConfig) -> list[str]:
    h = [f"command = {rc.command}", f"source = {rc.source}", f"samples = {rc.samples}", f"seed = {rc.seed}"]
    if rc.mu is not None:
        h.append("mu = " + ",".join(f"{v:g}" for v in rc.mu))
    return h


# ---------------------------------------------------------------------------
# commands


def cmd_list(_rc=None) -> int:
    for name, summary in list_instances():
        print(f"{name}\t{summary}")
    return 0


def cmd_verify(rc: RunConfig) -> int:
    tol = rc.tol or 1e-9
    rep = VerificationReport("verify")
    rep.extend(verify_structure(rc.structure, samples=rc.samples, tol=tol, seed=rc.seed), "structure")
    inst = rc.instance
    if inst is not None and rep.passed:
        rep.extend(inst.action.check(samples=min(rc.samples, 20), seed=rc.seed), "action_model")
        rep.extend(verify_action_invariance(inst.action, inst.structure, point_samples=min(rc.samples, 50),
                                            seed=rc.seed), "action")
        rep.extend(verify_momentum_map(inst, samples=rc.samples, seed=rc.seed, tol=tol), "momentum")
        if inst.momentum is not None and inst.level_chart is not None:
            rep.extend(check_reduction_conditions(inst, rc.mu, samples=min(rc.samples, 50), seed=rc.seed),
                       "conditions")
        elif inst.momentum is not None:
            rep.add("conditions.not_applicable", 0.0, True, "no level chart supplied")
    return _finish(rc, rep, "verify_report.txt", _header(rc))


# -- solve


def _strings_initial(inst: ReductionInstance):
    """Preset data: a traveling wave when uncoupled, a smooth standing mixture otherwise."""
    if inst.extras["coupling_text"].strip() == "0":
        return ("traveling-wave", lambda x: np.array([np.sin(x), 0 * x]),
                lambda x: np.array([-np.cos(x), 0 * x]))
    return ("mixed", lambda x: np.array([np.sin(x), np.cos(2 * x)]),
            lambda x: np.array([0 * x, 0.5 * np.sin(x)]))


def _scaled_tol(rc: RunConfig, h: float) -> tuple[float, str]:
    if rc.tol is not None:
        return rc.tol, "user"
    return 10.0 * h * h, "10*h^2"


def _solve_strings(rc: RunConfig) -> int:
    inst = rc.instance
    nt, nx = rc.grid or (201, 201)
    preset, q0, v0 = _strings_initial(inst)
    try:
        g = solve_hdw_strings(inst.extras["coupling"], nt, nx, q0, v0, inst.chart)
    except CFLError as e:
        print(f"FAIL: {e}")
        return 1
    h = max(g.steps())
    tol, how = _scaled_tol(rc, h)
    rep = VerificationReport("solve")
    res = hdw_residuals(g, _system(rc), tol=tol)
    rep.extend(res.report, "hdw")
    if preset == "traveling-wave":
        T, X = np.meshgrid(g.axes[0], g.axes[1], indexing="ij")
        err = float(np.max(np.abs(g.values["q1"] - np.sin(X - T))))
        rep.residual("linf_error_vs_dalembert", err, tol)
    header = _header(rc) + [f"grid = {nt}x{nx}", f"preset = {preset}", f"coupling = {inst.extras['coupling_text']}",
                            f"tolerance = {tol:.3e} ({how})"]
    if rc.out is not None:
        rc.write("solution.csv", g.to_csv(comments=[f"preset = {preset}"]))
        if rc.svg:
            rc.write("q1.svg", svg.heatmap(g.values["q1"], g.axes[0], g.axes[1], "q1(t, x)", "t", "x"))
    return _finish(rc, rep, "solve_report.txt", header)


def membrane_closed_form(f0: float, c: float, r: float) -> float:
    """ζ(r) for constant force f0 from ζ(1) = −1/4, p^r(1) = 1/2."""
    c2 = c * c
    A = (f0 - 1.0) / (2 * c2)
    B = -0.25 + f0 / (4 * c2)
    return -f0 * r * r / (4 * c2) + A * math.log(r) + B


def _membrane_ode(rc: RunConfig, nodes: int):
    inst = rc.instance
    f = inst.extras["force"]
    return solve_reduced_membrane_ode(lambda r: float(f([r])), inst.extras["c"], (1.0, 2.0), -0.25, 0.5,
                                      steps=nodes - 1)


def _constant_force(inst) -> float | None:
    try:
        return float(inst.extras["force_text"])
    except ValueError:
        return None


def _solve_membrane(rc: RunConfig) -> int:
    inst = rc.instance
    nr, nth = rc.grid or (1001, 9)
    sol = _membrane_ode(rc, nr)
    tol = rc.tol or 1e-8
    rep = VerificationReport("solve")
    z2 = sol.at(2.0)[0]
    rep.add("zeta_at_2", z2, True, "reduced radial ODE from zeta(1) = -1/4, pr(1) = 1/2")
    f0 = _constant_force(inst)
    if f0 is not None:
        rep.residual("zeta_at_2_vs_closed_form", abs(z2 - membrane_closed_form(f0, inst.extras["c"], 2.0)), tol)
    h = float(sol.r[1] - sol.r[0])
    rtol, how = (rc.tol, "user") if rc.tol is not None else (max(10.0 * h * h, 1e-8), "10*h^2")
    rep.residual("radial_pde_residual", sol.pde_residual, rtol)
    lam = rc.mu or (0.0, 0.0)
    if len(lam) != 2:
        raise UsageError("membrane --mu gives the frozen momenta (pt, pth): two numbers")
    lifted = lift_radial_section(sol, inst.chart, lam, th_nodes=nth)
    rep.extend(hdw_residuals(lifted, _system(rc), tol=rtol).report, "lifted_hdw")
    header = _header(rc) + [f"grid = {nr}x{nth}", f"force = {inst.extras['force_text']}", f"c = {inst.extras['c']:g}",
                            f"tolerance = {rtol:.3e} ({how})"]
    print(f"zeta(2) = {z2:.12g}")
    if rc.out is not None:
        radial = SectionGrid(_radial_chart(), ("r",), [sol.r], {"r": sol.r, "zeta": sol.zeta, "pr": sol.pr},
                             (False,), {"scheme": "RK4", "force": inst.extras["force_text"]})
        rc.write("solution.csv", radial.to_csv())
        if rc.svg:
            rc.write("zeta.svg", svg.lineplot([("zeta", sol.r, sol.zeta), ("pr", sol.r, sol.pr)],
                                              "reduced membrane", "r", "value"))
    return _finish(rc, rep, "solve_report.txt", header)


def _radial_chart():
    from .fields import ChartBox
    return ChartBox(("r", "zeta", "pr"), ((1.0, 2.0), (-5.0, 5.0), (-5.0, 5.0)),
                    (("base", 0), ("field", 0), ("momentum", 0, 0)))


def _route(rc: RunConfig) -> str:
    inst = rc.instance
    if inst is None:
        raise UsageError("this command needs an instance, not a bare structure")
    if "coupling" in inst.extras:
        return "strings"
    if "spacetime" in inst.extras:
        return "membrane"
    return "other"


def cmd_solve(rc: RunConfig) -> int:
    route = _route(rc)
    if route == "strings":
        return _solve_strings(rc)
    if route == "membrane":
        return _solve_membrane(rc)
    raise UsageError(f"instance {rc.instance.name} has no solver route (strings and membrane only)")


# -- reduce


def cmd_reduce(rc: RunConfig) -> int:
    inst = rc.instance
    if inst is None:
        raise UsageError("reduce needs an instance with symmetry data")
    tol = rc.tol or 1e-9
    header = _header(rc) + [f"gauge = {_gauge_name(rc)}"]
    if "spacetime" in inst.extras:
        data = inst.extras["spacetime"]
        lam = rc.mu or (0.0, 0.0)
        if len(lam) != data.basis_change.shape[0] - data.ell:
            raise UsageError(f"--mu gives {data.basis_change.shape[0] - data.ell} frozen momenta for this route")
        X = hamiltonian_kvector_field(_system(rc))
        res = spacetime_reduce(inst, data, lam, X, samples=min(rc.samples, 50), seed=rc.seed, tol=tol)
        h_text = membrane_reduced_h_text(inst.extras["force_text"], inst.extras["c"], lam)
        rc.write("reduced.ini", export_structure(res.structure, h_text, "reduced data (spacetime route)"))
        sys.stdout.write(export_structure(res.structure, h_text))
        return _finish(rc, res.report, "reduce_report.txt", header)
    if inst.level_chart is None or inst.quotient_charts is None:
        raise UsageError(f"instance {inst.name} supplies no level or quotient chart")
    rep = VerificationReport("reduce")
    res = reduce(inst, rc.mu, samples=rc.samples, seed=rc.seed, tol=tol)
    rep.extend(res.report)
    qc = inst.quotient(rc.mu)
    if qc.expected:
        rep.extend(compare_reduced(res, qc.expected, samples=rc.samples, seed=rc.seed, tol=tol), "expected")
    X = hamiltonian_kvector_field(_system(rc))
    dyn = reduce_dynamics(inst, rc.mu, X, samples=min(rc.samples, 20), seed=rc.seed, tol=max(tol, 1e-8),
                          reduced=res)
    rep.extend(dyn.report, "dynamics")
    h_text = (qc.expected or {}).get("h_text")
    note = f"reduced data, quotient chart: {qc.note}" if qc.note else "reduced data"
    text = export_structure(res.structure, h_text, note)
    rc.write("reduced.ini", text)
    sys.stdout.write(text)
    return _finish(rc, rep, "reduce_report.txt", header)


# -- compare


def _gap(a: dict, b: dict, pairs) -> tuple[float, float]:
    diffs = np.stack([a[k] - b[j] for k, j in pairs])
    return float(np.max(np.abs(diffs))), float(np.sqrt(np.mean(diffs ** 2)))


def _compare_strings(rc: RunConfig) -> int:
    inst = rc.instance
    nt, nx = rc.grid or (201, 201)
    preset, q0, v0 = _strings_initial(inst)
    res = reduce(inst, rc.mu, samples=min(rc.samples, 50), seed=rc.seed)
    if not res.report.passed:
        return _finish(rc, res.report, "compare_report.txt", _header(rc))
    C = inst.extras["coupling"]
    tol = rc.tol or 5e-3
    rep = VerificationReport("compare")
    rows, gaps, fine = [], [], None
    for n_t, n_x in ((nt, nx), (2 * nt - 1, 2 * nx - 1)):
        try:
            full = solve_hdw_strings(C, n_t, n_x, q0, v0, inst.chart)
            red = solve_hdw_strings_reduced(C, n_t, n_x, lambda x: q0(x)[0] - q0(x)[1],
                                            lambda x: v0(x)[0] - v0(x)[1], res.chart)
        except CFLError as e:
            print(f"FAIL: {e}")
            return 1
        v = full.values
        proj = {"q": v["q1"] - v["q2"], "pt": v["p1t"] - v["p2t"], "px": v["p1x"] - v["p2x"]}
        linf, l2 = _gap(proj, red.values, (("q", "q"), ("pt", "pt"), ("px", "px")))
        gaps.append(linf)
        rows.append(f"{n_t}x{n_x}")
        rep.add(f"gap_linf_{n_t}x{n_x}", linf, True, f"l2 {l2:.3e}")
        if preset == "traveling-wave":
            T, X = np.meshgrid(full.axes[0], full.axes[1], indexing="ij")
            e_full = float(np.max(np.abs(v["q1"] - np.sin(X - T))))
            e_red = float(np.max(np.abs(red.values["q"] - np.sin(X - T))))
            rep.add(f"dalembert_error_full_{n_t}x{n_x}", e_full, True)
            rep.add(f"dalembert_error_reduced_{n_t}x{n_x}", e_red, True)
            rep.residual(f"gap_within_twice_solver_error_{n_t}x{n_x}",
                         float(np.max(np.abs(proj["q"] - red.values["q"]))), 2 * max(e_full, e_red))
        fine = (full, red, proj)
    ratio = gaps[0] / gaps[1] if gaps[1] > 0 else math.inf
    order = math.log2(ratio) if 0 < ratio < math.inf else math.nan
    rep.add("refinement_ratio", ratio, True, f"observed order {order:.3f}")
    rep.residual("gap_linf_finest", gaps[1], tol)
    if rc.out is not None:
        full, red, proj = fine
        rc.write("reduced_solution.csv", red.to_csv())
        if rc.svg:
            rc.write("gap_q.svg", svg.heatmap(np.abs(proj["q"] - red.values["q"]), red.axes[0], red.axes[1],
                                              "|q gap| full vs reduced", "t", "x"))
    header = _header(rc) + [f"grids = {', '.join(rows)}", f"preset = {preset}",
                            f"coupling = {inst.extras['coupling_text']}", f"tolerance = {tol:.3e}"]
    return _finish(rc, rep, "compare_report.txt", header)


def _compare_membrane(rc: RunConfig) -> int:
    """Reduced radial ODE against the full static membrane solved on the annulus."""
    inst = rc.instance
    nr, nth = rc.grid or (41, 32)
    c = inst.extras["c"]
    f = inst.extras["force"]
    lam = rc.mu or (0.0, 0.0)
    if any(abs(v) > 0 for v in lam):
        raise UsageError("the membrane comparison needs zero frozen momenta; the lifted section is not a solution otherwise")
    h_fine = 1.0 / (2 * nr - 2)
    tol = rc.tol or 10.0 * h_fine * h_fine
    rep = VerificationReport("compare")
    gaps = []
    for n in (nr, 2 * nr - 1):
        sol = _membrane_ode(rc, n)
        r, th, Z = solve_membrane_polar_poisson(lambda s: float(f([s])), c, (1.0, 2.0), sol.zeta[0],
                                                sol.zeta[-1], n, nth)
        gap = float(np.max(np.abs(Z - sol.zeta[:, None])))
        gaps.append(gap)
        rep.add(f"gap_linf_{n}x{nth}", gap, True)
        if n == nr:
            rep.extend(_static_lift_residual(inst, rc, r, th, Z, c), f"full_hdw_{n}x{nth}")
    ratio = gaps[0] / gaps[1] if gaps[1] > 1e-13 else math.nan
    detail = f"observed order {math.log2(ratio):.3f}" if ratio == ratio and ratio > 0 else "gap at rounding level"
    rep.add("refinement_ratio", 0.0 if ratio != ratio else ratio, True, detail)
    rep.residual("gap_linf_finest", gaps[1], tol)
    header = _header(rc) + [f"grid = {nr}x{nth}", f"force = {inst.extras['force_text']}", f"tolerance = {tol:.3e}"]
    return _finish(rc, rep, "compare_report.txt", header)


def _static_lift_residual(inst, rc, r, th, Z, c) -> VerificationReport:
    # momenta from the static field: pr = -r c² ζ_r, pθ = -c² ζ_θ / r, pt = 0
    from .dynamics import grid_derivative
    thc = np.concatenate([th, [2 * np.pi]])
    Zc = np.concatenate([Z, Z[:, :1]], axis=1)
    t = np.linspace(0.0, 1.0, 5)
    T, R, TH = np.meshgrid(t, r, thc, indexing="ij")
    zr = grid_derivative(Zc, r, 0, False)
    zth = grid_derivative(Zc, thc, 1, True)
    rr = r[:, None]
    shape = T.shape
    vals = {"t": T, "r": R, "th": TH, "zeta": np.broadcast_to(Zc, shape).copy(), "pt": np.zeros(shape),
            "pr": np.broadcast_to(-rr * c * c * zr, shape).copy(),
            "pth": np.broadcast_to(-c * c * zth / rr, shape).copy()}
    g = SectionGrid(inst.chart, ("t", "r", "th"), [t, r, thc], vals, (False, False, True))
    h = float(r[1] - r[0])
    return hdw_residuals(g, _system(rc), tol=max(10.0 * h * h, 1e-8)).report


def cmd_compare(rc: RunConfig) -> int:
    route = _route(rc)
    if route == "strings":
        return _compare_strings(rc)
    if route == "membrane":
        return _compare_membrane(rc)
    raise UsageError(f"instance {rc.instance.name} has no comparison route (strings and membrane only)")


COMMANDS = {"verify": cmd_verify, "solve": cmd_solve, "reduce": cmd_reduce, "compare": cmd_compare}


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if args.command == "list":
        return cmd_list()
    try:
        rc = _resolve(args)
        return COMMANDS[args.command](rc)
    except (UsageError, ConfigError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
