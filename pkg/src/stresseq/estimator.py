"""Error estimation from the equilibrated stress reconstruction.

Element-wise estimator triple:
  eta_A = compliance-norm of the stress correction,
  eta_B = (2 mu)^(1/2) |div u_h - inv_lambda p_h|,
  eta_C = (2 mu)^(-1/2) |antisymmetric part of the correction|,
combined into a guaranteed upper bound for the squared energy-norm error

  error^2 <= 2 S_A + c_B(lambda) S_B + 4 C_K^2 S_C,

with S_X the global sums of squares and c_B a rational coefficient in
lambda that is monotone increasing in lambda; its incompressible-limit
value therefore gives a lambda-independent bound.  A classical residual
estimator and data-oscillation terms support efficiency studies, and
energy errors are evaluated against analytic solutions or nested
finer-mesh proxies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .elasticity import (
    FieldPair,
    LoadData,
    Material,
    element_jacobians,
    fields_on_tables,
)
from .equilibration import side_traces
from .errors import InvalidConstants
from .mesh import DIRICHLET, INTERIOR, NEUMANN, Mesh
from .problems import ExactSolution
from .spaces import (
    BrokenField,
    Discretization,
    eval_volume_poly,
    lagrange_grads,
    lagrange_values,
    legendre01,
    project_side,
    project_volume,
    segment_rule,
    triangle_rule,
)

_DIM = 2
_CHUNK = 4096


@dataclass(frozen=True)
class BoundConstants:
    """Global constants entering the guaranteed bound.

    ``korn`` is the Korn-type constant (at least 2 by theory); ``dev_div``
    the deviatoric-divergence constant (positive).  ``provenance`` records
    whether values were user-supplied or the conservative defaults for
    near-regular patches.  Optional per-patch override arrays exist as a
    hook; the globally-weighted bound is what is implemented.
    """

    korn: float
    dev_div: float
    provenance: str = "user-supplied"
    korn_per_patch: np.ndarray | None = None
    dev_div_per_patch: np.ndarray | None = None

    def __post_init__(self):
        if not (self.korn >= 2.0):
            raise InvalidConstants(f"Korn constant {self.korn} is below 2")
        if not (self.dev_div > 0.0):
            raise InvalidConstants(
                f"dev-div constant {self.dev_div} is not positive"
            )


def conservative_constants() -> BoundConstants:
    """Defaults for near-regular patches.

    Per-patch Korn values are at most sqrt(8) on such meshes; the matching
    deviatoric-divergence value is 2 (C_Kz^2 - 1)^(1/2) = 2 sqrt(7).  Both
    are scaled by (d + 1) = 3 to cover overlapping patch sums.
    """
    return BoundConstants(
        korn=3.0 * np.sqrt(8.0),
        dev_div=6.0 * np.sqrt(7.0),
        provenance="default-regular-patch",
    )


# -- pointwise tensor algebra ---------------------------------------------------


def apply_A(tau: np.ndarray, material: Material) -> np.ndarray:
    """Compliance action: (1/2mu) (tau - tr(tau)/(2 mu/lambda + d) I).

    Operates on value arrays of shape (..., 2, 2); the incompressible
    limit divides the trace term by d exactly.
    """
    mu, t = material.mu, material.inv_lambda
    tr = tau[..., 0, 0] + tau[..., 1, 1]
    out = tau / (2.0 * mu)
    coef = 1.0 / ((2.0 * mu * t + _DIM) * 2.0 * mu)
    out[..., 0, 0] -= coef * tr
    out[..., 1, 1] -= coef * tr
    return out


def deviatoric(tau: np.ndarray) -> np.ndarray:
    """Trace-free part tau - (tr tau / d) I."""
    tr = (tau[..., 0, 0] + tau[..., 1, 1]) / _DIM
    out = tau.copy()
    out[..., 0, 0] -= tr
    out[..., 1, 1] -= tr
    return out


def antisymmetric_norm_sq(tau: np.ndarray) -> np.ndarray:
    """|as tau|^2 = (tau_12 - tau_21)^2 / 2 pointwise."""
    return 0.5 * (tau[..., 0, 1] - tau[..., 1, 0]) ** 2


# -- estimator components ----------------------------------------------------------


def eta_components(
    disc: Discretization,
    sigma_delta: BrokenField,
    fields: FieldPair,
    material: Material,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-element (eta_A, eta_B, eta_C); quadrature-exact integrands."""
    mesh = disc.mesh
    mu, t = material.mu, material.inv_lambda
    eta_a = np.empty(mesh.n_triangles)
    eta_b = np.empty(mesh.n_triangles)
    eta_c = np.empty(mesh.n_triangles)
    trace_coef = 1.0 / (2.0 * mu * t + _DIM)
    for tb in disc.stress_chunks(_CHUNK):
        vals = sigma_delta.values(tb)                       # (ne, nq, 2, 2)
        frob = np.einsum("eqrc,eqrc->eq", vals, vals)
        tr = vals[..., 0, 0] + vals[..., 1, 1]
        a_sq = (frob - trace_coef * tr**2) / (2.0 * mu)
        eta_a[tb.elems] = np.sqrt(
            np.maximum(np.einsum("eq,eq->e", tb.vol_w, a_sq), 0.0)
        )
        data = fields_on_tables(fields, tb)
        divu = data["grad_u"][..., 0, 0] + data["grad_u"][..., 1, 1]
        b_val = divu - t * data["p"]
        eta_b[tb.elems] = np.sqrt(
            2.0 * mu * np.einsum("eq,eq->e", tb.vol_w, b_val**2)
        )
        c_sq = antisymmetric_norm_sq(vals) / (2.0 * mu)
        eta_c[tb.elems] = np.sqrt(np.einsum("eq,eq->e", tb.vol_w, c_sq))
    return eta_a, eta_b, eta_c


def _b_coefficient(material: Material, constants: BoundConstants) -> float:
    """Coefficient of the Sum eta_B^2 term; monotone increasing in lambda."""
    mu, t = material.mu, material.inv_lambda
    den = 2.0 * mu * t + _DIM
    return 2.0 * (2.0 * mu * t + _DIM + constants.dev_div**2) / den**2


def guaranteed_bound(
    eta_a: np.ndarray,
    eta_b: np.ndarray,
    eta_c: np.ndarray,
    material: Material,
    constants: BoundConstants,
    lambda_free: bool = False,
) -> float:
    """Guaranteed upper bound for the squared energy-norm error.

    With ``lambda_free=True`` the eta_B coefficient is evaluated at the
    incompressible limit, its supremum over lambda, making the bound valid
    independently of lambda.
    """
    s_a = float(np.sum(np.square(eta_a)))
    s_b = float(np.sum(np.square(eta_b)))
    s_c = float(np.sum(np.square(eta_c)))
    mat_b = Material(mu=material.mu, inv_lambda=0.0) if lambda_free else material
    return (
        2.0 * s_a
        + _b_coefficient(mat_b, constants) * s_b
        + 4.0 * constants.korn**2 * s_c
    )


# -- residual estimator -------------------------------------------------------------


def residual_estimator(
    disc: Discretization,
    fields: FieldPair,
    sigma_h: BrokenField,
    load: LoadData,
    material: Material,
) -> np.ndarray:
    """Classical residual indicator per element.

    eta_R^2 = h_T^2 |proj f + div sigma_h|_T^2
            + sum over non-displacement sides of h_S |jump*|_S^2
            + |div u_h - inv_lambda p_h|_T^2,
    with the plain normal jump on interior sides and the traction defect
    sigma_h . n - proj g on traction sides.
    """
    mesh, k = disc.mesh, disc.k
    t = material.inv_lambda
    vol_sq = np.empty(mesh.n_triangles)
    b_sq = np.empty(mesh.n_triangles)
    for tb in disc.stress_chunks(_CHUNK):
        fv = load.volume_at(tb.vol_x)
        proj_f = project_volume(tb, fv, k)
        resid = sigma_h.div_values(tb) + eval_volume_poly(tb, proj_f, k)
        vol_sq[tb.elems] = np.einsum("eq,eqr->e", tb.vol_w, resid**2)
        data = fields_on_tables(fields, tb)
        divu = data["grad_u"][..., 0, 0] + data["grad_u"][..., 1, 1]
        b_sq[tb.elems] = np.einsum(
            "eq,eq->e", tb.vol_w, (divu - t * data["p"]) ** 2
        )

    tq, tw = segment_rule(2 * k + 5)
    tminus, tplus = side_traces(disc, sigma_h)
    side_sq = np.zeros(mesh.n_sides)
    interior = mesh.side_label == INTERIOR
    jump = tminus[interior] - tplus[interior]
    side_sq[interior] = mesh.side_length[interior] * np.einsum(
        "q,sqr->s", tw, jump**2
    )
    nsides = mesh.boundary_sides(NEUMANN)
    if nsides.size:
        a = mesh.vertices[mesh.sides[nsides, 0]]
        b = mesh.vertices[mesh.sides[nsides, 1]]
        xq = a[:, None, :] + tq[None, :, None] * (b - a)[:, None, :]
        coeff = project_side(mesh, nsides, load.traction_at(xq), k)
        pg = np.einsum("scm,qm->sqc", coeff, legendre01(k + 1, tq))
        defect = tminus[nsides] - pg
        side_sq[nsides] = mesh.side_length[nsides] * np.einsum(
            "q,sqr->s", tw, defect**2
        )

    eta_sq = mesh.h**2 * vol_sq + b_sq
    h_s = mesh.side_length
    for j in range(3):
        s = mesh.tri_sides[:, j]
        use = mesh.side_label[s] != DIRICHLET
        eta_sq += np.where(use, h_s[s] * side_sq[s], 0.0)
    return np.sqrt(eta_sq)


def data_oscillation(
    disc: Discretization, load: LoadData
) -> tuple[np.ndarray, np.ndarray]:
    """h-weighted data approximation defects.

    Returns (per-element h_T |f - proj f|_T, per-traction-side
    h_S^(1/2) |g - proj g|_S); both vanish for piecewise-polynomial data
    of degree <= k (up to the quadrature used throughout).
    """
    mesh, k = disc.mesh, disc.k
    osc_f = np.empty(mesh.n_triangles)
    for tb in disc.stress_chunks(_CHUNK):
        fv = load.volume_at(tb.vol_x)
        proj_f = project_volume(tb, fv, k)
        defect = fv - eval_volume_poly(tb, proj_f, k)
        osc_f[tb.elems] = mesh.h[tb.elems] * np.sqrt(
            np.einsum("eq,eqr->e", tb.vol_w, defect**2)
        )
    nsides = mesh.boundary_sides(NEUMANN)
    osc_g = np.zeros(len(nsides))
    if nsides.size:
        tq, tw = segment_rule(2 * k + 5)
        a = mesh.vertices[mesh.sides[nsides, 0]]
        b = mesh.vertices[mesh.sides[nsides, 1]]
        xq = a[:, None, :] + tq[None, :, None] * (b - a)[:, None, :]
        gv = load.traction_at(xq)
        coeff = project_side(mesh, nsides, gv, k)
        pg = np.einsum("scm,qm->sqc", coeff, legendre01(k + 1, tq))
        lens = mesh.side_length[nsides]
        osc_g = np.sqrt(lens) * np.sqrt(
            lens * np.einsum("q,sqc->s", tw, (gv - pg) ** 2)
        )
    return osc_f, osc_g


# -- energy errors -------------------------------------------------------------------


def energy_error(
    fields: FieldPair, exact: ExactSolution, material: Material
) -> float:
    """Energy-norm distance to an analytic solution.

    Uses a quadrature rule four degrees beyond the exactness needed for
    the discrete part, so the non-polynomial reference is integrated far
    below the discretization error on any practical mesh.
    """
    disc = fields.disc
    mesh, k = disc.mesh, disc.k
    m = k + 1
    mu, t = material.mu, material.inv_lambda
    rq, rw = triangle_rule(2 * k + 8)
    grads_ref = lagrange_grads(m, rq)
    vals_p = lagrange_values(k, rq)
    dm_u, dm_p = disc.displacement, disc.pressure
    total = 0.0
    for lo in range(0, mesh.n_triangles, _CHUNK):
        elems = np.arange(lo, min(lo + _CHUNK, mesh.n_triangles))
        jac, jinv = element_jacobians(mesh, elems)
        p0 = mesh.vertices[mesh.triangles[elems, 0]]
        xq = p0[:, None, :] + np.einsum("qr,edr->eqd", rq, jac)
        wq = 2.0 * mesh.areas[elems][:, None] * rw[None, :]

        ue = fields.u[(dm_u.element_dofs[elems][:, :, None] * 2 + np.arange(2))]
        grads = np.einsum("qir,erd->eqid", grads_ref, jinv)
        grad_uh = np.einsum("eic,eqid->eqcd", ue, grads)
        ph = np.einsum("ei,qi->eq", fields.p[dm_p.element_dofs[elems]], vals_p)

        dg = exact.displacement_gradient(xq) - grad_uh
        eps = 0.5 * (dg + np.swapaxes(dg, -1, -2))
        dp = exact.pressure(xq) - ph
        total += float(
            np.einsum("eq,eq->", wq, 2.0 * mu * np.einsum("eqrc,eqrc->eq", eps, eps))
        )
        total += float(np.einsum("eq,eq->", wq, t * dp**2))
    return float(np.sqrt(total))


def proxy_energy_error(
    fields: FieldPair,
    reference: FieldPair,
    material: Material,
    ancestor: np.ndarray,
) -> float:
    """Energy-norm distance to a solution on a nested finer mesh.

    ``ancestor[j]`` maps fine element j to the element of the coarse mesh
    containing it.  Integration runs over the fine mesh, where both fields
    are polynomial, so the quadrature is exact.
    """
    cdisc, fdisc = fields.disc, reference.disc
    cmesh, fmesh = cdisc.mesh, fdisc.mesh
    k = cdisc.k
    m = k + 1
    mu, t = material.mu, material.inv_lambda
    rq, rw = triangle_rule(2 * k + 4)
    grads_ref = lagrange_grads(m, rq)
    vals_p = lagrange_values(k, rq)
    nq = len(rw)
    cdm_u, cdm_p = cdisc.displacement, cdisc.pressure
    fdm_u, fdm_p = fdisc.displacement, fdisc.pressure
    total = 0.0
    for lo in range(0, fmesh.n_triangles, 1024):
        elems = np.arange(lo, min(lo + 1024, fmesh.n_triangles))
        ne = len(elems)
        jac, jinv = element_jacobians(fmesh, elems)
        p0 = fmesh.vertices[fmesh.triangles[elems, 0]]
        xq = p0[:, None, :] + np.einsum("qr,edr->eqd", rq, jac)
        wq = 2.0 * fmesh.areas[elems][:, None] * rw[None, :]

        ue = reference.u[(fdm_u.element_dofs[elems][:, :, None] * 2 + np.arange(2))]
        grads = np.einsum("qir,erd->eqid", grads_ref, jinv)
        grad_fine = np.einsum("eic,eqid->eqcd", ue, grads)
        p_fine = np.einsum("ei,qi->eq", reference.p[fdm_p.element_dofs[elems]], vals_p)

        # coarse fields at the same physical points
        ce = ancestor[elems]
        cjac, cjinv = element_jacobians(cmesh, ce)
        cp0 = cmesh.vertices[cmesh.triangles[ce, 0]]
        ref_c = np.einsum("erd,eqd->eqr", cjinv, xq - cp0[:, None, :])
        flat = ref_c.reshape(-1, 2)
        lg_u = lagrange_grads(m, flat).reshape(ne, nq, -1, 2)
        lv_p = lagrange_values(k, flat).reshape(ne, nq, -1)
        cue = fields.u[(cdm_u.element_dofs[ce][:, :, None] * 2 + np.arange(2))]
        cgrads = np.einsum("eqir,erd->eqid", lg_u, cjinv)
        grad_coarse = np.einsum("eic,eqid->eqcd", cue, cgrads)
        p_coarse = np.einsum("eqi,ei->eq", lv_p, fields.p[cdm_p.element_dofs[ce]])

        dg = grad_fine - grad_coarse
        eps = 0.5 * (dg + np.swapaxes(dg, -1, -2))
        dp = p_fine - p_coarse
        total += float(
            np.einsum("eq,eq->", wq, 2.0 * mu * np.einsum("eqrc,eqrc->eq", eps, eps))
        )
        total += float(np.einsum("eq,eq->", wq, t * dp**2))
    return float(np.sqrt(total))


def compose_ancestry(meshes) -> np.ndarray:
    """Map each element of the last mesh to its ancestor in the first.

    ``meshes`` is the refinement chain; every mesh after the first must
    carry the parent array produced by refinement.
    """
    anc = np.arange(meshes[-1].n_triangles)
    for m in reversed(meshes[1:]):
        if m.parent is None:
            raise ValueError("mesh chain lacks refinement lineage")
        anc = m.parent[anc]
    return anc


# -- efficiency ratio ------------------------------------------------------------------


def neighborhood_ratio(
    mesh: Mesh,
    eta_a: np.ndarray,
    eta_b: np.ndarray,
    eta_c: np.ndarray,
    eta_r: np.ndarray,
) -> float:
    """max over elements of (eta_A^2+eta_B^2+eta_C^2) / sum of eta_R^2 over
    the vertex-neighborhood of the element; the efficiency constant."""
    offsets, ids = mesh.vertex_triangles()
    num = eta_a**2 + eta_b**2 + eta_c**2
    r_sq = eta_r**2
    worst = 0.0
    for e in range(mesh.n_triangles):
        nbrs = np.unique(
            np.concatenate(
                [ids[offsets[v] : offsets[v + 1]] for v in mesh.triangles[e]]
            )
        )
        den = float(np.sum(r_sq[nbrs]))
        if den > 0.0:
            worst = max(worst, num[e] / den)
    return worst


# -- report -------------------------------------------------------------------------


@dataclass
class EstimatorReport:
    """Per-element estimator data plus the global bound for one solve."""

    eta_A: np.ndarray
    eta_B: np.ndarray
    eta_C: np.ndarray
    eta_R: np.ndarray
    material: Material
    constants: BoundConstants
    energy_error: float | None = None

    @property
    def eta_T(self) -> np.ndarray:
        return np.sqrt(self.eta_A**2 + self.eta_B**2 + self.eta_C**2)

    @property
    def eta_A_total(self) -> float:
        return float(np.sqrt(np.sum(self.eta_A**2)))

    @property
    def eta_B_total(self) -> float:
        return float(np.sqrt(np.sum(self.eta_B**2)))

    @property
    def eta_C_total(self) -> float:
        return float(np.sqrt(np.sum(self.eta_C**2)))

    @property
    def eta_total(self) -> float:
        return float(
            np.sqrt(np.sum(self.eta_A**2 + self.eta_B**2 + self.eta_C**2))
        )

    @property
    def bound(self) -> float:
        return guaranteed_bound(
            self.eta_A, self.eta_B, self.eta_C, self.material, self.constants
        )

    @property
    def bound_conservative(self) -> float:
        return guaranteed_bound(
            self.eta_A,
            self.eta_B,
            self.eta_C,
            self.material,
            conservative_constants(),
        )

    @property
    def bound_lambda_free(self) -> float:
        return guaranteed_bound(
            self.eta_A,
            self.eta_B,
            self.eta_C,
            self.material,
            self.constants,
            lambda_free=True,
        )

    @property
    def effectivity(self) -> float | None:
        if self.energy_error is None or self.energy_error == 0.0:
            return None
        return float(np.sqrt(self.bound)) / self.energy_error

    @property
    def eta_A_effectivity(self) -> float | None:
        if self.energy_error is None or self.energy_error == 0.0:
            return None
        return self.eta_A_total / self.energy_error


def estimate(
    disc: Discretization,
    fields: FieldPair,
    sigma_h: BrokenField,
    sigma_delta: BrokenField,
    load: LoadData,
    material: Material,
    constants: BoundConstants,
) -> EstimatorReport:
    """Full estimator report for one solved mesh."""
    eta_a, eta_b, eta_c = eta_components(disc, sigma_delta, fields, material)
    eta_r = residual_estimator(disc, fields, sigma_h, load, material)
    return EstimatorReport(
        eta_A=eta_a,
        eta_B=eta_b,
        eta_C=eta_c,
        eta_R=eta_r,
        material=material,
        constants=constants,
    )
