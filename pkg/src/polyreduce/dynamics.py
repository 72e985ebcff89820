"""Hamiltonian k-vector fields, integrability, and HDW solvers on grids."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .ad import Jet, jeinsum, jpinv_solve
from .fields import (AnalyticField, ChartBox, DerivedField, SmoothField, as_coords,
                     halton_points)
from .forms import KVectorFieldRep, lie_bracket
from .report import VerificationReport
from .structures import (KPolycosymplecticStructure, _omega_jet, omega_matrices, reeb_family,
                         reeb_jet, tau_matrix)


class CFLError(ValueError):
    pass


@dataclass(frozen=True)
class GaugeChoice:
    """How to pick one member of the family of Hamiltonian k-vector fields.

    ``minimal_norm`` takes the pseudoinverse solution.  ``instance_supplied``
    starts from ``free_coefficients`` and projects onto the solution set with
    the smallest correction; on a Darboux chart the coefficients may be given
    as the momentum split (X_α)^{p_i^β} with layout [α][β][i], otherwise as a
    full reference k-vector field with layout [α][j].
    """

    mode: str = "minimal_norm"
    free_coefficients: SmoothField | None = None

    def __post_init__(self):
        if self.mode not in ("minimal_norm", "instance_supplied"):
            raise ValueError(f"unknown gauge mode {self.mode!r}")
        if self.mode == "instance_supplied" and self.free_coefficients is None:
            raise ValueError("instance_supplied gauge needs free coefficients")


@dataclass(frozen=True)
class HamiltonianSystem:
    structure: KPolycosymplecticStructure
    h: SmoothField
    gauge: GaugeChoice = GaugeChoice()

    def __post_init__(self):
        if self.h.n_in != self.structure.chart.dim or self.h.n_out != 1:
            raise ValueError("h must be a scalar field on the structure's chart")

    @property
    def chart(self) -> ChartBox:
        return self.structure.chart

    @property
    def k(self) -> int:
        return self.structure.k

    def with_gauge(self, gauge: GaugeChoice) -> HamiltonianSystem:
        return HamiltonianSystem(self.structure, self.h, gauge)


# ---------------------------------------------------------------------------
# the defining linear system


def _system_jet(sys: HamiltonianSystem, x, o):
    """A X = b with X flattened as [α][j]: n ω-rows then k² τ-rows."""
    s = sys.structure
    n, k = s.chart.dim, s.k
    W = _omega_jet(s, x, o)                      # (k, n, n): W[a] v = ι_v ω^a
    T = s.tau.jet(x, o)                          # (k, n)
    A1 = jeinsum("aij->iaj", W).reshape(n, k * n)
    eye = np.eye(k)
    A2 = jeinsum("ab,cj->cabj", eye, T).reshape(k * k, k * n)  # row (β, α'), col (α, j)
    dh = sys.h.djet(x, o).reshape(n)
    R = reeb_jet(s, x, o)                        # (k, n)
    Rh = jeinsum("ai,i->a", R, dh)
    b1 = dh - jeinsum("a,ai->i", Rh, T)
    b2 = eye.reshape(-1)
    A = _vstack(A1, A2)
    b = _vstack(b1, Jet(b2, None if b1.jac is None else np.zeros((k * k, n))))
    return A, b


def _vstack(a: Jet, b: Jet) -> Jet:
    val = np.concatenate([a.val, b.val], axis=0)
    jac = None if a.jac is None or b.jac is None else np.concatenate([a.jac, b.jac], axis=0)
    return Jet(val, jac)


def _reference_jet(sys: HamiltonianSystem, x, o) -> Jet:
    s = sys.structure
    n, k = s.chart.dim, s.k
    fc = sys.gauge.free_coefficients
    ref = fc.jet(x, o)
    if fc.n_out == k * n:
        return ref
    kk, base, fields_, mom = s.chart.darboux_layout()
    nf = len(fields_)
    if fc.n_out != k * k * nf:
        raise ValueError("free coefficients have neither the momentum-split nor the full layout")
    P = np.zeros((k * n, k * k * nf))
    for a in range(k):
        for b in range(k):
            for i in range(nf):
                P[a * n + mom[i][b], (a * k + b) * nf + i] = 1.0
    return jeinsum("rc,c->r", P, ref)


def kvector_jet(sys: HamiltonianSystem, x, o: int = 1) -> Jet:
    x = as_coords(x)
    A, b = _system_jet(sys, x, o)
    if sys.gauge.mode == "minimal_norm":
        return jpinv_solve(A, b)
    X0 = _reference_jet(sys, x, o)
    r = b - jeinsum("rc,c->r", A, X0)
    return X0 + jpinv_solve(A, r)


def solve_hamiltonian_kvector(sys: HamiltonianSystem, x, tol: float = 1e-10) -> np.ndarray:
    """Components (k, n) of the gauge-selected Hamiltonian k-vector field at x."""
    x = as_coords(x)
    X = kvector_jet(sys, x, 0).val
    A, b = _system_jet(sys, x, 0)
    res = float(np.max(np.abs(A.val @ X - b.val)))
    scale = max(1.0, float(np.max(np.abs(b.val))))
    if res > tol * scale:
        raise ValueError(f"defining system inconsistent at x (residual {res:.3e})")
    return X.reshape(sys.k, sys.chart.dim)


def hamiltonian_kvector_field(sys: HamiltonianSystem) -> KVectorFieldRep:
    n, k = sys.chart.dim, sys.k
    return KVectorFieldRep(sys.chart, k, DerivedField(lambda x, o: kvector_jet(sys, x, o), n, k * n, "X^h"))


def defining_residuals(sys: HamiltonianSystem, X: np.ndarray, x) -> tuple[float, float]:
    """(ω-equation residual, τ-equation residual) for components X (k, n) at x."""
    x = as_coords(x)
    s = sys.structure
    X = np.asarray(X).reshape(s.k, s.chart.dim)
    W = omega_matrices(s, x)
    T = tau_matrix(s, x)
    dh = sys.h.jacobian(x).reshape(-1)
    R = reeb_family(s, x)
    lhs = np.einsum("aij,aj->i", W, X)
    rhs = dh - (R @ dh) @ T
    return float(np.max(np.abs(lhs - rhs))), float(np.max(np.abs(T @ X.T - np.eye(s.k))))


# ---------------------------------------------------------------------------
# Darboux family


@dataclass(frozen=True)
class DarbouxFamily:
    """Hamiltonian k-vector fields in Darboux coordinates.

    Fixed: (X_α)^{t^β} = δ, (X_α)^{q^i} = ∂h/∂p_i^α.  Free: the momentum
    components (X_α)^{p_i^β}, subject to one trace constraint per field i,
    Σ_α (X_α)^{p_i^α} = −∂h/∂q^i.
    """

    sys: HamiltonianSystem
    base: tuple[int, ...]
    fields: tuple[int, ...]
    momenta: tuple[tuple[int, ...], ...]

    @property
    def k(self) -> int:
        return len(self.base)

    def fixed_components(self, x) -> dict[tuple[int, int], float]:
        x = as_coords(x)
        dh = self.sys.h.jacobian(x).reshape(-1)
        out = {}
        for a in range(self.k):
            for b in range(self.k):
                out[(a, self.base[b])] = 1.0 if a == b else 0.0
            for i, q in enumerate(self.fields):
                out[(a, q)] = float(dh[self.momenta[i][a]])
        return out

    def free_slots(self) -> list[tuple[int, int]]:
        return [(a, self.momenta[i][b]) for a in range(self.k) for b in range(self.k)
                for i in range(len(self.fields))]

    def trace_targets(self, x) -> np.ndarray:
        dh = self.sys.h.jacobian(as_coords(x)).reshape(-1)
        return np.array([-dh[q] for q in self.fields])

    def member(self, x, split) -> np.ndarray:
        """Assemble X from a momentum split [α][β][i]; raises if the trace fails."""
        k, nf, n = self.k, len(self.fields), self.sys.chart.dim
        split = np.asarray(split, dtype=float).reshape(k, k, nf)
        X = np.zeros((k, n))
        for (a, j), v in self.fixed_components(x).items():
            X[a, j] = v
        for a in range(k):
            for b in range(k):
                for i in range(nf):
                    X[a, self.momenta[i][b]] = split[a, b, i]
        traces = np.array([sum(split[a, a, i] for a in range(k)) for i in range(nf)])
        if np.max(np.abs(traces - self.trace_targets(x)), initial=0.0) > 1e-10:
            raise ValueError("momentum split violates the trace constraint")
        return X

    def minimal_norm(self, x) -> np.ndarray:
        """Equal split of −∂h/∂q^i over the diagonal slots, zero elsewhere."""
        k, nf = self.k, len(self.fields)
        split = np.zeros((k, k, nf))
        for i, target in enumerate(self.trace_targets(x)):
            for a in range(k):
                split[a, a, i] = target / k
        return self.member(x, split)

    def contains(self, X, x, tol: float = 1e-10) -> bool:
        X = np.asarray(X).reshape(self.k, self.sys.chart.dim)
        for (a, j), v in self.fixed_components(x).items():
            if abs(X[a, j] - v) > tol:
                return False
        tr = np.array([sum(X[a, self.momenta[i][a]] for a in range(self.k)) for i in range(len(self.fields))])
        return bool(np.max(np.abs(tr - self.trace_targets(x)), initial=0.0) <= tol)


def darboux_family(sys: HamiltonianSystem) -> DarbouxFamily:
    k, base, fields_, mom = sys.chart.darboux_layout()
    if k != sys.k:
        raise ValueError("Darboux roles disagree with the structure's k")
    return DarbouxFamily(sys, tuple(base), tuple(fields_), tuple(tuple(m) for m in mom))


def check_gauge(sys: HamiltonianSystem, samples: int = 50, seed: int = 0) -> float:
    """Trace-constraint defect of an instance-supplied momentum split."""
    fc = sys.gauge.free_coefficients
    if fc is None:
        return 0.0
    fam = darboux_family(sys)
    k, nf = fam.k, len(fam.fields)
    worst = 0.0
    for x in halton_points(sys.chart, samples, seed):
        if fc.n_out == k * k * nf:
            split = fc(x).reshape(k, k, nf)
            tr = np.array([split[:, :, i].trace() for i in range(nf)])
        else:
            X = fc(x).reshape(k, -1)
            tr = np.array([sum(X[a, fam.momenta[i][a]] for a in range(k)) for i in range(nf)])
        worst = max(worst, float(np.max(np.abs(tr - fam.trace_targets(x)), initial=0.0)))
    return worst


# ---------------------------------------------------------------------------
# integrability


def check_integrability(X: KVectorFieldRep, samples=100, seed: int = 0) -> float:
    """max over samples and pairs α<β of ‖[X_α, X_β]‖∞."""
    pts = samples if isinstance(samples, np.ndarray) else halton_points(X.chart, samples, seed)
    comps = [X.component(a) for a in range(X.k)]
    worst = 0.0
    for a in range(X.k):
        for b in range(a + 1, X.k):
            br = lie_bracket(comps[a], comps[b])
            for x in pts:
                worst = max(worst, float(np.max(np.abs(br.at(x)))))
    return worst


# ---------------------------------------------------------------------------
# section grids


@dataclass
class SectionGrid:
    """Values of a map ψ: (s¹..s^k) ↦ chart on a rectangular grid.

    Periodic axes store the closing node (equal to the first) for output,
    and differencing treats it as a duplicate.
    """

    chart: ChartBox
    param_names: tuple[str, ...]
    axes: list[np.ndarray]
    values: dict[str, np.ndarray]
    periodic: tuple[bool, ...]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 1 <= len(self.axes) <= 3:
            raise ValueError("grids support 1 to 3 parameters")
        shape = tuple(len(a) for a in self.axes)
        for a in self.axes:
            if len(a) > 1 and np.any(np.diff(a) <= 0):
                raise ValueError("grid spacing must be positive")
        for nm in self.chart.names:
            if nm not in self.values:
                raise ValueError(f"missing grid values for {nm}")
            if self.values[nm].shape != shape:
                raise ValueError(f"values for {nm} have shape {self.values[nm].shape}, grid is {shape}")

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.axes)

    def steps(self) -> list[float]:
        return [float(a[1] - a[0]) for a in self.axes]

    def points(self) -> np.ndarray:
        """Chart coordinates at every node, shape (N, n) in C order."""
        return np.stack([self.values[nm].reshape(-1) for nm in self.chart.names], axis=-1)

    def derivative(self, arr: np.ndarray, axis: int) -> np.ndarray:
        return grid_derivative(arr, self.axes[axis], axis, self.periodic[axis])

    def column_order(self) -> list[str]:
        names = list(self.chart.names)
        if self.chart.roles is None:
            base = [nm for nm in self.param_names if nm in names]
            return base + [nm for nm in names if nm not in base]
        base = [nm for nm, r in zip(names, self.chart.roles) if r[0] == "base"]
        flds = [nm for nm, r in zip(names, self.chart.roles) if r[0] == "field"]
        moms = [nm for nm, r in zip(names, self.chart.roles) if r[0] == "momentum"]
        return base + flds + moms

    def to_csv(self, stream=None, comments: Sequence[str] = ()) -> str:
        """Header of coordinate names, one row per node, ``#`` metadata/report lines."""
        out = io.StringIO()
        for key in sorted(self.meta):
            out.write(f"# {key} = {self.meta[key]}\n")
        cols = self.column_order()
        writer = csv.writer(out, lineterminator="\n")
        params = [nm for nm in self.param_names if nm not in cols]
        writer.writerow(params + cols)
        grids = np.meshgrid(*self.axes, indexing="ij")
        data = [g.reshape(-1) for g in grids[: len(params)]] + [self.values[c].reshape(-1) for c in cols]
        for row in zip(*data):
            writer.writerow([f"{v:.12g}" for v in row])
        for line in comments:
            for piece in str(line).splitlines():
                out.write(f"# {piece}\n")
        text = out.getvalue()
        if stream is not None:
            stream.write(text)
        return text


def grid_derivative(arr: np.ndarray, axis_values: np.ndarray, axis: int, periodic: bool) -> np.ndarray:
    """Second-order centered differences; one-sided second-order at open ends."""
    arr = np.moveaxis(np.asarray(arr, dtype=float), axis, 0)
    h = float(axis_values[1] - axis_values[0])
    out = np.empty_like(arr)
    if periodic:
        # quasi-periodic: f(s + L) = f(s) + jump, so the x coordinate itself differentiates to 1
        jump = arr[-1] - arr[0]
        core = arr[:-1]
        d = (np.roll(core, -1, axis=0) - np.roll(core, 1, axis=0)) / (2 * h)
        d[-1] += jump / (2 * h)
        d[0] += jump / (2 * h)
        out[:-1] = d
        out[-1] = d[0]
    else:
        out[1:-1] = (arr[2:] - arr[:-2]) / (2 * h)
        out[0] = (-3 * arr[0] + 4 * arr[1] - arr[2]) / (2 * h)
        out[-1] = (3 * arr[-1] - 4 * arr[-2] + arr[-3]) / (2 * h)
    return np.moveaxis(out, 0, axis)


def _batch_eval_form(form, pts):
    if form.is_constant:
        return np.broadcast_to(form.at(pts[0]), (len(pts),) + form.at(pts[0]).shape)
    return form.at(pts)


@dataclass
class HDWResiduals:
    report: VerificationReport
    equations: dict[str, tuple[float, float]]

    @property
    def passed(self) -> bool:
        return self.report.passed

    def max(self, names=None) -> float:
        keys = names if names is not None else self.equations.keys()
        return max(self.equations[k][0] for k in keys)


def _interior_slices(section: SectionGrid, interior: int):
    return tuple(slice(None) if per or not interior else slice(interior, d - interior)
                 for d, per in zip(section.shape, section.periodic))


def hdw_residuals(section: SectionGrid, sys: HamiltonianSystem, tol: float = 1e-3,
                  interior: int = 2) -> HDWResiduals:
    """Residuals of the HDW system at every node.

    Momenta recovered by one-sided differences make the outermost layers at
    open boundaries first-order accurate only, so the pass/fail decision and
    the reported max use nodes at least ``interior`` layers away from open
    boundaries; the full-grid max is kept in each check's detail.

    With ψ_α = ∂ψ/∂s^α the equations are τ^β(ψ_α) = δ^β_α and
    Σ_α ι_{ψ_α} ω^α = dh − (R_α h) τ^α; in Darboux coordinates the
    dp-rows are ∂q/∂s^α = ∂h/∂p and the dq-rows the divergence laws.
    """
    s = sys.structure
    k, n = s.k, s.chart.dim
    if len(section.axes) != k:
        raise ValueError(f"grid has {len(section.axes)} parameters, structure has k = {k}")
    pts = section.points()
    N = len(pts)
    shape = section.shape
    # tangent vectors ψ_α at each node: (N, k, n)
    tangents = np.zeros((N, k, n))
    for a in range(k):
        for j, nm in enumerate(s.chart.names):
            tangents[:, a, j] = section.derivative(section.values[nm], a).reshape(-1)
    tau = _batch_eval_form(s.tau, pts)                    # (N, k, n)
    om = np.transpose(_batch_eval_form(s.omega, pts).reshape(N, k, -1), (0, 1, 2))
    from .forms import full_tensor_map
    E = full_tensor_map(n, 2)
    Wfull = np.einsum("ijr,Nar->Naij", E, om)             # ω^a(e_i, e_j)
    if s.tau.is_constant and s.omega.is_constant:
        R = np.broadcast_to(reeb_family(s, pts[0]), (N, k, n))
    else:
        R = np.array([reeb_family(s, x) for x in pts])
    dh = np.asarray(sys.h.jacobian(pts)).reshape(N, n) if isinstance(sys.h, AnalyticField) else \
        np.array([sys.h.jacobian(x).reshape(n) for x in pts])
    Rh = np.einsum("Nai,Ni->Na", R, dh)
    rhs = dh - np.einsum("Na,Nai->Ni", Rh, tau)
    lhs = np.einsum("Naj,Naji->Ni", tangents, Wfull)      # (ι_v ω)_i = v^j ω(e_j, e_i)
    res_omega = (lhs - rhs).reshape(shape + (n,))
    res_tau = (np.einsum("Nbj,Naj->Nab", tau, tangents) - np.eye(k)).reshape(shape + (k, k))
    sl = _interior_slices(section, interior)
    rep = VerificationReport("hdw_residuals")
    eqs, full = {}, {}
    rows = [(f"d{nm}", res_omega[..., i]) for i, nm in enumerate(s.chart.names)]
    rows += [(f"tau{b + 1}(ds{a + 1})", res_tau[..., a, b]) for a in range(k) for b in range(k)]
    for name, r in rows:
        ri = r[sl]
        eqs[name] = (float(np.max(np.abs(ri))), float(np.sqrt(np.mean(ri**2))))
        full[name] = float(np.max(np.abs(r)))
    for name, (mx, l2) in eqs.items():
        rep.add(name, mx, mx <= tol, f"l2 {l2:.3e}, full-grid max {full[name]:.3e}, tol {tol:.1e}")
    return HDWResiduals(rep, eqs)


def divergence_residual(section: SectionGrid, J: SmoothField, k: int, m: int, interior: int = 2) -> float:
    """max over nodes and ξ_j of |Σ_α ∂_{s^α} J^α_j| (discrete conservation law)."""
    pts = section.points()
    vals = np.asarray(J(pts)).reshape(section.shape + (k, m))
    total = np.zeros(section.shape + (m,))
    for a in range(k):
        total += section.derivative(vals[..., a, :], a)
    return float(np.max(np.abs(total[_interior_slices(section, interior)])))


# ---------------------------------------------------------------------------
# strings: leapfrog for the full system, method of lines for the reduced one


def _periodic_lap(q, dx):
    return (np.roll(q, -1, axis=-1) - 2 * q + np.roll(q, 1, axis=-1)) / dx**2


def _periodic_dx(q, dx):
    return (np.roll(q, -1, axis=-1) - np.roll(q, 1, axis=-1)) / (2 * dx)


def _time_derivative(Q, dt):
    out = np.empty_like(Q)
    out[1:-1] = (Q[2:] - Q[:-2]) / (2 * dt)
    out[0] = (-3 * Q[0] + 4 * Q[1] - Q[2]) / (2 * dt)
    out[-1] = (3 * Q[-1] - 4 * Q[-2] + Q[-3]) / (2 * dt)
    return out


def _dC(C: SmoothField, t, x, q):
    """∂C/∂q on a row of nodes, C a field of (t, x, q)."""
    pts = np.stack([np.full_like(x, t), x, q], axis=-1)
    J = C.jacobian(pts) if isinstance(C, AnalyticField) else np.array([C.jacobian(p) for p in pts])
    return np.asarray(J)[..., 0, 2]


def strings_grid(nt: int, nx: int, t_final: float = 2.0, length: float = 2 * np.pi):
    if nt < 8 or nx < 8:
        raise ValueError("grid sizes must be at least 8")
    t = np.linspace(0.0, t_final, nt)
    x = np.linspace(0.0, length, nx)
    return t, x


def solve_hdw_strings(C: SmoothField, nt: int, nx: int, q0: Callable, v0: Callable,
                      chart: ChartBox, t_final: float = 2.0, length: float = 2 * np.pi,
                      boundary: str = "periodic") -> SectionGrid:
    """Leapfrog for ∂²_t q^i − ∂²_x q^i = ∓∂C/∂q, C = C(t, x, q¹ − q²).

    ``q0(x)`` and ``v0(x)`` return arrays of shape (2, len(x)).  Momenta are
    recovered by centered differences: p_i^t = ∂_t q^i, p_i^x = −∂_x q^i.
    """
    if boundary != "periodic":
        raise ValueError(f"boundary condition {boundary!r} unsupported for the strings solver")
    t, x = strings_grid(nt, nx, t_final, length)
    dt, dx = t[1] - t[0], x[1] - x[0]
    if dt > dx * (1 + 1e-12):
        raise CFLError(f"CFL violated: dt = {dt:.4g} > dx = {dx:.4g}")
    xs = x[:-1]
    Q = np.empty((nt, 2, nx - 1))
    Q[0] = np.asarray(q0(xs), dtype=float)
    v = np.asarray(v0(xs), dtype=float)
    sign = np.array([-1.0, 1.0])[:, None]

    def accel(tn, q):
        f = _dC(C, tn, xs, q[0] - q[1])
        return _periodic_lap(q, dx) + sign * f

    Q[1] = Q[0] + dt * v + 0.5 * dt**2 * accel(t[0], Q[0])
    for j in range(1, nt - 1):
        Q[j + 1] = 2 * Q[j] - Q[j - 1] + dt**2 * accel(t[j], Q[j])
    Pt = _time_derivative(Q, dt)
    Px = -_periodic_dx(Q, dx)
    close = lambda A: np.concatenate([A, A[..., :1]], axis=-1)
    Q, Pt, Px = close(Q), close(Pt), close(Px)
    T, X = np.meshgrid(t, x, indexing="ij")
    names = chart.names
    vals = {names[0]: T, names[1]: X, names[2]: Q[:, 0], names[3]: Q[:, 1],
            names[4]: Pt[:, 0], names[5]: Px[:, 0], names[6]: Pt[:, 1], names[7]: Px[:, 1]}
    meta = {"scheme": "leapfrog", "dt": f"{dt:.12g}", "dx": f"{dx:.12g}", "boundary": "periodic x"}
    return SectionGrid(chart, (names[0], names[1]), [t, x], vals, (False, True), meta)


def solve_hdw_strings_reduced(C: SmoothField, nt: int, nx: int, q0: Callable, pt0: Callable,
                              chart: ChartBox, t_final: float = 2.0,
                              length: float = 2 * np.pi) -> SectionGrid:
    """Reduced strings system ∂_t q = p^t, ∂_x q = −p^x, ∂_t p^t + ∂_x p^x = −2∂C/∂q.

    Method of lines: 3-point second differences in x, classical RK4 in t on
    the state (q, p^t).  Chart coordinates are (t, x, q, p^t, p^x).
    """
    t, x = strings_grid(nt, nx, t_final, length)
    dt, dx = t[1] - t[0], x[1] - x[0]
    if dt > dx * (1 + 1e-12):
        raise CFLError(f"CFL violated: dt = {dt:.4g} > dx = {dx:.4g}")
    xs = x[:-1]

    def rhs(tn, y):
        q, p = y
        return np.array([p, _periodic_lap(q, dx) - 2.0 * _dC(C, tn, xs, q)])

    Y = np.empty((nt, 2, nx - 1))
    Y[0] = [np.asarray(q0(xs), dtype=float), np.asarray(pt0(xs), dtype=float)]
    for j in range(nt - 1):
        y, tn = Y[j], t[j]
        k1 = rhs(tn, y)
        k2 = rhs(tn + dt / 2, y + dt / 2 * k1)
        k3 = rhs(tn + dt / 2, y + dt / 2 * k2)
        k4 = rhs(tn + dt, y + dt * k3)
        Y[j + 1] = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    Px = -_periodic_dx(Y[:, 0], dx)
    close = lambda A: np.concatenate([A, A[..., :1]], axis=-1)
    T, X = np.meshgrid(t, x, indexing="ij")
    names = chart.names
    vals = {names[0]: T, names[1]: X, names[2]: close(Y[:, 0]), names[3]: close(Y[:, 1]),
            names[4]: close(Px)}
    meta = {"scheme": "method of lines, RK4", "dt": f"{dt:.12g}", "dx": f"{dx:.12g}",
            "boundary": "periodic x"}
    return SectionGrid(chart, (names[0], names[1]), [t, x], vals, (False, True), meta)


# ---------------------------------------------------------------------------
# membrane radial ODE


@dataclass(frozen=True)
class RadialSolution:
    r: np.ndarray
    zeta: np.ndarray
    pr: np.ndarray
    pde_residual: float

    def at(self, r: float) -> tuple[float, float]:
        i = int(np.argmin(np.abs(self.r - r)))
        if abs(self.r[i] - r) > 1e-9 * max(1.0, abs(r)):
            raise ValueError(f"r = {r} is not a grid node")
        return float(self.zeta[i]), float(self.pr[i])


def _second_derivative(y, h):
    out = np.empty_like(y)
    out[1:-1] = (y[2:] - 2 * y[1:-1] + y[:-2]) / h**2
    out[0] = (2 * y[0] - 5 * y[1] + 4 * y[2] - y[3]) / h**2
    out[-1] = (2 * y[-1] - 5 * y[-2] + 4 * y[-3] - y[-4]) / h**2
    return out


def rk4_fixed(rhs: Callable, y0, grid: np.ndarray) -> np.ndarray:
    Y = np.empty((len(grid),) + np.shape(y0))
    Y[0] = y0
    for j in range(len(grid) - 1):
        h, s, y = grid[j + 1] - grid[j], grid[j], Y[j]
        k1 = rhs(s, y)
        k2 = rhs(s + h / 2, y + h / 2 * k1)
        k3 = rhs(s + h / 2, y + h / 2 * k2)
        k4 = rhs(s + h, y + h * k3)
        Y[j + 1] = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return Y


def solve_reduced_membrane_ode(f: SmoothField | Callable, c: float, r_range: tuple[float, float],
                               zeta0: float, pr0: float, steps: int = 1000,
                               r_grid: np.ndarray | None = None) -> RadialSolution:
    """∂p^r/∂r = r f(r), ∂ζ/∂r = −p^r/(r c²) from r_range[0] with RK4.

    The returned residual is max |c²(ζ'' + ζ'/r) + f| with ζ', ζ'' taken by
    finite differences of the computed ζ (an independent check of the ODE).
    """
    r0, r1 = map(float, r_range)
    grid = np.linspace(r0, r1, steps + 1) if r_grid is None else np.asarray(r_grid, dtype=float)
    if np.min(grid) <= 0.0 <= np.max(grid) or np.any(grid == 0.0):
        raise ValueError("radial range must not contain r = 0")
    if c == 0:
        raise ValueError("wave speed c must be nonzero")
    fr = (lambda r: float(np.asarray(f(np.array([r]))).reshape(-1)[0])) if isinstance(f, SmoothField) else f

    def rhs(r, y):
        return np.array([-y[1] / (r * c**2), r * fr(r)])

    Y = rk4_fixed(rhs, np.array([zeta0, pr0], dtype=float), grid)
    zeta, pr = Y[:, 0], Y[:, 1]
    h = grid[1] - grid[0]
    dz = grid_derivative(zeta, grid, 0, False)
    d2z = _second_derivative(zeta, h)
    fv = np.array([fr(r) for r in grid])
    res = c**2 * (d2z + dz / grid) + fv
    return RadialSolution(grid, zeta, pr, float(np.max(np.abs(res[1:-1]))) if len(grid) > 2 else 0.0)


def solve_membrane_polar_poisson(f: Callable, c: float, r_range: tuple[float, float],
                                 zeta_inner: float, zeta_outer: float, nr: int = 101,
                                 nth: int = 64) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Static membrane c²(ζ_rr + ζ_r/r + ζ_θθ/r²) = −f(r) on an annulus.

    Dirichlet data on both circles, periodic in θ, second-order differences.
    Returns (r, θ, ζ[r, θ]); θ excludes the closing node.
    """
    from scipy.sparse import lil_matrix
    from scipy.sparse.linalg import spsolve

    r0, r1 = map(float, r_range)
    if r0 <= 0.0:
        raise ValueError("annulus must stay away from r = 0")
    r = np.linspace(r0, r1, nr)
    th = np.linspace(0.0, 2 * np.pi, nth, endpoint=False)
    dr, dth = r[1] - r[0], th[1] - th[0]
    ni = nr - 2
    N = ni * nth
    A = lil_matrix((N, N))
    b = np.zeros(N)
    idx = lambda i, j: (i - 1) * nth + (j % nth)
    for i in range(1, nr - 1):
        ri = r[i]
        cm = c**2 * (1 / dr**2 - 1 / (2 * ri * dr))
        cp = c**2 * (1 / dr**2 + 1 / (2 * ri * dr))
        ct = c**2 / (ri * dth) ** 2
        fi = f(ri)
        for j in range(nth):
            row = idx(i, j)
            A[row, row] = -2 * c**2 / dr**2 - 2 * ct
            A[row, idx(i, j + 1)] += ct
            A[row, idx(i, j - 1)] += ct
            b[row] = -fi
            if i - 1 == 0:
                b[row] -= cm * zeta_inner
            else:
                A[row, idx(i - 1, j)] = cm
            if i + 1 == nr - 1:
                b[row] -= cp * zeta_outer
            else:
                A[row, idx(i + 1, j)] = cp
    sol = spsolve(A.tocsr(), b).reshape(ni, nth)
    Z = np.empty((nr, nth))
    Z[0], Z[-1], Z[1:-1] = zeta_inner, zeta_outer, sol
    return r, th, Z


def lift_radial_section(sol: RadialSolution, chart: ChartBox, lam, t_nodes: int = 9,
                        th_nodes: int = 9, t_range=(0.0, 1.0)) -> SectionGrid:
    """Radial solution spread over (t, r, θ) with p^t = λ_t and p^θ = λ_θ held constant."""
    t = np.linspace(*t_range, t_nodes)
    th = np.linspace(0.0, 2 * np.pi, th_nodes)
    T, Rg, TH = np.meshgrid(t, sol.r, th, indexing="ij")
    shape = T.shape
    lt, lth = map(float, lam)
    names = chart.names
    vals = {names[0]: T, names[1]: Rg, names[2]: TH,
            names[3]: np.broadcast_to(sol.zeta[None, :, None], shape).copy(),
            names[4]: np.full(shape, lt),
            names[5]: np.broadcast_to(sol.pr[None, :, None], shape).copy(),
            names[6]: np.full(shape, lth)}
    return SectionGrid(chart, (names[0], names[1], names[2]), [t, sol.r, th], vals, (False, False, True),
                       {"scheme": "radial RK4 lifted", "lambda": f"{lt:g},{lth:g}"})
