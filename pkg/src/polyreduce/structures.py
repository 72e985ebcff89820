"""Cosymplectic, k-polycosymplectic and k-polysymplectic structures.

Conventions at a point x of an n-dimensional chart:

* ``Ω^α`` is the matrix with ``Ω^α v = ι_v ω^α`` (so ``Ω^α[i, j] = ω^α(e_j, e_i)``);
* ``τ`` is the k × n matrix of the one-forms τ^α;
* the flat map of a cosymplectic structure is ``v ↦ ι_v ω + (ι_v τ) τ`` with
  matrix ``Ω + τ τᵀ``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ad import Jet, jeinsum, jlstsq_consistent, jsolve
from .fields import (AnalyticField, ChartBox, DerivedField, SmoothField, as_coords,
                     halton_points, projection_map)
from .forms import (KVectorFieldRep, VectorFieldRep, VForm, barwedge, exterior_derivative,
                    freeze, interior_product, pullback)
from .linalg import EPS_RANK, nullspace, rank
from .report import VerificationReport


class StructureError(ValueError):
    """The structure is degenerate at the requested point."""


@dataclass(frozen=True)
class KPolycosymplecticStructure:
    chart: ChartBox
    k: int
    tau: VForm
    omega: VForm

    kind = "k-polycosymplectic"

    def __post_init__(self):
        if self.tau.degree != 1 or self.omega.degree != 2:
            raise ValueError("tau must be a 1-form and omega a 2-form")
        if self.tau.k != self.k or self.omega.k != self.k:
            raise ValueError("tau and omega must both take values in ℝ^k")
        if self.tau.n != self.chart.dim or self.omega.n != self.chart.dim:
            raise ValueError("forms do not live on the structure's chart")


class CosymplecticStructure(KPolycosymplecticStructure):
    kind = "cosymplectic"

    def __init__(self, chart: ChartBox, tau: VForm, omega: VForm):
        super().__init__(chart, 1, tau, omega)


@dataclass(frozen=True)
class KPolysymplecticStructure:
    chart: ChartBox
    k: int
    omega: VForm

    kind = "k-polysymplectic"

    def __post_init__(self):
        if self.omega.degree != 2 or self.omega.k != self.k:
            raise ValueError("omega must be an ℝ^k-valued 2-form")


# ---------------------------------------------------------------------------
# pointwise matrices


def omega_matrices(s, x) -> np.ndarray:
    """Ω^α with Ω^α v = ι_v ω^α, shape (k, n, n)."""
    return np.transpose(s.omega.full(as_coords(x)), (0, 2, 1))


def tau_matrix(s, x) -> np.ndarray:
    return s.tau.at(as_coords(x))


def _omega_jet(s, x, o) -> Jet:
    return jeinsum("aji->aij", s.omega.full_jet(x, o))


def _stacked(s, x) -> np.ndarray:
    """Rows of ι_v ω^α for all α followed by rows of τ^α(v)."""
    n = s.chart.dim
    return np.vstack([omega_matrices(s, x).reshape(s.k * n, n), tau_matrix(s, x)])


def _stacked_jet(s, x, o) -> Jet:
    n = s.chart.dim
    W = _omega_jet(s, x, o).reshape(s.k * n, n)
    T = s.tau.jet(x, o)
    val = np.vstack([W.val, T.val])
    jac = None if W.jac is None or T.jac is None else np.concatenate([W.jac, T.jac], axis=0)
    return Jet(val, jac)


# ---------------------------------------------------------------------------
# verification


def verify_structure(s, samples: int = 100, tol: float = 1e-9, seed: int = 0) -> VerificationReport:
    """Closedness residuals and kernel-rank conditions at Halton samples."""
    if samples < 1:
        raise ValueError("samples must be at least 1")
    rep = VerificationReport(f"verify_structure {s.kind}")
    pts = halton_points(s.chart, samples, seed)
    n, k = s.chart.dim, s.k
    forms = [("d_omega", s.omega)] if s.kind == "k-polysymplectic" else [("d_tau", s.tau), ("d_omega", s.omega)]
    for name, form in forms:
        d = exterior_derivative(form)
        worst = 0.0 if d.is_constant and not np.any(d.at(pts[0])) else max(
            float(np.max(np.abs(d.at(x)))) for x in pts)
        rep.residual(f"{name}_closed", worst, tol)

    def rank_check(name, found_fn, expected, what):
        bad = None
        for i, x in enumerate(pts):
            found = found_fn(x)
            if found != expected:
                bad = (i, found)
                break
        if bad is None:
            rep.add(name, 0.0, True, f"{what} = {expected} at all {samples} samples")
        else:
            rep.add(name, abs(bad[1] - expected), False,
                    f"{what} is {bad[1]}, expected {expected} (sample {bad[0]})")

    W = lambda x: omega_matrices(s, x).reshape(k * n, n)
    if s.kind == "k-polysymplectic":
        rank_check("ker_omega_trivial", lambda x: n - rank(W(x)), 0, "dim ∩ker ω^α")
        return rep
    if s.kind == "cosymplectic" and n % 2 == 0:
        rep.add("odd_dimension", 1.0, False, f"chart dimension {n} is even")
    rank_check("ker_omega_rank", lambda x: n - rank(W(x)), k, "rank ∩ker ω^α")
    rank_check("ker_omega_tau_trivial", lambda x: n - rank(_stacked(s, x)), 0, "dim ker ω ∩ ker τ")
    if s.kind == "cosymplectic":
        rank_check("flat_invertible", lambda x: rank(flat(s, x)), n, "rank of flat map")
    return rep


# ---------------------------------------------------------------------------
# Reeb fields


def reeb_cosymplectic(s: CosymplecticStructure, x) -> np.ndarray:
    """Unique R with ι_R τ = 1, ι_R ω = 0 via the stacked system."""
    x = as_coords(x)
    M = _stacked(s, x)
    n = s.chart.dim
    if rank(M) < n:
        raise StructureError("stacked Reeb system is rank deficient")
    rhs = np.zeros(M.shape[0])
    rhs[-1] = 1.0
    R = np.linalg.lstsq(M, rhs, rcond=None)[0]
    if np.max(np.abs(M @ R - rhs)) > 1e-10 * max(1.0, np.max(np.abs(M))):
        raise StructureError("Reeb system is inconsistent")
    return R


def reeb_family(s: KPolycosymplecticStructure, x) -> np.ndarray:
    """R_1..R_k as rows (k, n): nullspace basis of the stacked Ω, then the dual-basis solve."""
    x = as_coords(x)
    n, k = s.chart.dim, s.k
    N = nullspace(omega_matrices(s, x).reshape(k * n, n))
    if N.shape[1] != k:
        raise StructureError(f"∩ ker ω^α has rank {N.shape[1]}, expected {k}")
    T = tau_matrix(s, x) @ N
    if rank(T) < k:
        raise StructureError("τ restricted to ker ω is singular")
    return np.linalg.solve(T.T, N.T)  # rows of (N T^{-1})ᵀ


def reeb_certificate(s: KPolycosymplecticStructure, x) -> tuple[float, bool]:
    """Defining-system residual of the Reeb family and full-column-rank flag."""
    x = as_coords(x)
    R = reeb_family(s, x)
    M = _stacked(s, x)
    n, k = s.chart.dim, s.k
    rhs = np.zeros((M.shape[0], k))
    rhs[k * n:] = np.eye(k)
    return float(np.max(np.abs(M @ R.T - rhs))), rank(M) == n


def reeb_jet(s, x, o: int = 1) -> Jet:
    """Jet of the (k, n) Reeb family; Jacobian by implicit differentiation."""
    x = as_coords(x)
    R = reeb_family(s, x)
    if not o:
        return Jet(R)
    M = _stacked_jet(s, x, o)
    n, k = s.chart.dim, s.k
    rhs = np.zeros((M.val.shape[0], k))
    rhs[k * n:] = np.eye(k)
    sol = jlstsq_consistent(M, rhs)
    return Jet(R, np.transpose(sol.jac, (1, 0, 2)))


def reeb_fields(s) -> KVectorFieldRep:
    n, k = s.chart.dim, s.k
    return KVectorFieldRep(s.chart, k, DerivedField(lambda x, o: reeb_jet(s, x, o).reshape(k * n), n, k * n, "reeb"))


# ---------------------------------------------------------------------------
# cosymplectic calculus


def _require_cosymplectic(s):
    if s.k != 1:
        raise ValueError("operation defined for cosymplectic structures (k = 1)")


def flat(s, x) -> np.ndarray:
    _require_cosymplectic(s)
    t = tau_matrix(s, x)[0]
    return omega_matrices(s, x)[0] + np.outer(t, t)


def flat_inverse(s, x) -> np.ndarray:
    F = flat(s, x)
    if rank(F) < F.shape[0]:
        raise StructureError("flat map is singular")
    return np.linalg.inv(F)


def _flat_jet(s, x, o) -> Jet:
    t = s.tau.jet(x, o)[0]
    return _omega_jet(s, x, o)[0] + jeinsum("i,j->ij", t, t)


def _scalar_djet(f: SmoothField, x, o) -> Jet:
    if f.n_out != 1:
        raise ValueError("expected a scalar field")
    return f.djet(x, o).reshape(-1)


def _field(s, jet_fn, label) -> VectorFieldRep:
    n = s.chart.dim

    def safe(x, o):
        F = _flat_jet(s, x, o)
        if rank(F.val) < n:
            raise StructureError("flat map is singular")
        return jet_fn(x, o, F)

    return VectorFieldRep(s.chart, DerivedField(safe, n, n, label))


def gradient_field(s, f: SmoothField) -> VectorFieldRep:
    _require_cosymplectic(s)
    return _field(s, lambda x, o, F: jsolve(F, _scalar_djet(f, x, o)), "grad")


def _ham_rhs(s, f, x, o) -> Jet:
    df = _scalar_djet(f, x, o)
    R = reeb_jet(s, x, o)[0]
    t = s.tau.jet(x, o)[0]
    Rf = jeinsum("i,i->", R, df)
    return df - jeinsum(",i->i", Rf, t)


def hamiltonian_field(s, f: SmoothField) -> VectorFieldRep:
    _require_cosymplectic(s)
    return _field(s, lambda x, o, F: jsolve(F, _ham_rhs(s, f, x, o)), "ham")


def evolution_field(s, f: SmoothField) -> VectorFieldRep:
    _require_cosymplectic(s)
    return _field(s, lambda x, o, F: jsolve(F, _ham_rhs(s, f, x, o)) + reeb_jet(s, x, o)[0], "evo")


def poisson_bracket(s, f: SmoothField, g: SmoothField) -> SmoothField:
    """{f, g} = ω(X_f, X_g)."""
    _require_cosymplectic(s)
    Xf, Xg = hamiltonian_field(s, f), hamiltonian_field(s, g)
    n = s.chart.dim

    def jet_fn(x, o):
        W = s.omega.full_jet(x, o)[0]
        return jeinsum("ij,i,j->", W, Xf.jet(x, o), Xg.jet(x, o)).reshape(1)

    return DerivedField(jet_fn, n, 1, "poisson")


# ---------------------------------------------------------------------------
# fibred extension


@dataclass(frozen=True)
class FibredExtension:
    base: KPolycosymplecticStructure
    extended_chart: ChartBox
    omega_tilde: VForm
    projection: AnalyticField

    @property
    def k(self) -> int:
        return self.base.k

    @property
    def structure(self) -> KPolysymplecticStructure:
        return KPolysymplecticStructure(self.extended_chart, self.k, self.omega_tilde)

    def lift(self, X: np.ndarray, u=None) -> np.ndarray:
        """Tangent vector(s) on M as vectors on ℝ^k × M with zero u-components."""
        X = np.atleast_2d(X)
        return np.hstack([np.zeros((X.shape[0], self.k)), X])

    def reeb(self, y) -> np.ndarray:
        """Polysymplectic Reeb fields R̃_α at a point of ℝ^k × M, rows (k, n+k)."""
        y = as_coords(y)
        return self.lift(reeb_family(self.base, y[self.k:]))

    def du(self) -> VForm:
        k = self.k
        names = self.extended_chart.names
        return VForm.from_terms(self.extended_chart, 1, [{(names[a],): 1.0} for a in range(k)])


def extend_to_fibred(s: KPolycosymplecticStructure, u_bounds=(-1.0, 1.0)) -> FibredExtension:
    """ω̃ = pr*ω + du ∧̄ pr*τ on ℝ^k × M, u-coordinates prepended."""
    k, n = s.k, s.chart.dim
    unames = [f"u{a + 1}" for a in range(k)]
    while set(unames) & set(s.chart.names):
        unames = ["_" + u for u in unames]
    ext = ChartBox(tuple(unames) + s.chart.names, (tuple(u_bounds),) * k + s.chart.bounds)
    pr = projection_map(n + k, range(k, n + k))
    pr_omega = freeze(pullback(pr, s.omega, ext))
    pr_tau = freeze(pullback(pr, s.tau, ext))
    du = VForm.from_terms(ext, 1, [{(unames[a],): 1.0} for a in range(k)])
    return FibredExtension(s, ext, pr_omega + barwedge(du, pr_tau), pr)


def fibred_reeb_residual(F: FibredExtension, samples: int = 50, seed: int = 0) -> float:
    """max |ι_{R̃_α} ω̃^β + δ^β_α du^α| and |R̃_α u^β| over samples (coefficients)."""
    k = F.k
    worst = 0.0
    for y in halton_points(F.extended_chart, samples, seed):
        Rt = F.reeb(y)
        W = np.transpose(F.omega_tilde.full(y), (0, 2, 1))  # W[b] v = ι_v ω̃^b
        for a in range(k):
            for b in range(k):
                contraction = W[b] @ Rt[a]
                if a == b:
                    contraction[a] += 1.0
                worst = max(worst, float(np.max(np.abs(contraction))))
            worst = max(worst, float(np.max(np.abs(Rt[a][:k]))))
    return worst
