"""Taylor-Hood saddle-point solver for (nearly) incompressible elasticity.

Discrete problem: find (u_h, p_h) in continuous P_{k+1}^2 x P_k with
u_h = 0 on the displacement boundary such that

    2 mu (eps(u_h), eps(v)) + (p_h, div v) = (f, v) + <g, v>_{traction}
    (div u_h, q) - inv_lambda (p_h, q)     = 0

for all test functions v, q.  ``inv_lambda = 0`` encodes the
incompressible limit exactly.  All integrals use the shared quadrature
rules of :mod:`.spaces` (volume exactness 2k+4, side exactness 2k+5), so
downstream residual identities hold to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SingularSystem
from .mesh import DIRICHLET, NEUMANN, Mesh
from .spaces import (
    BrokenField,
    Discretization,
    StressTables,
    lagrange_grads,
    lagrange_values,
    rt_dim,
    segment_rule,
    triangle_rule,
)

_CHUNK = 4096


@dataclass(frozen=True)
class Material:
    """Isotropic material with shear modulus mu and compliance 1/lambda.

    ``inv_lambda`` stores the reciprocal of the first Lame parameter; the
    incompressible limit lambda = infinity is the exact value 0.
    """

    mu: float = 1.0
    inv_lambda: float = 0.0

    def __post_init__(self):
        if not (self.mu > 0.0):
            raise ValueError("mu must be positive")
        if self.inv_lambda < 0.0:
            raise ValueError("inv_lambda must be nonnegative")

    @property
    def lam(self) -> float:
        return np.inf if self.inv_lambda == 0.0 else 1.0 / self.inv_lambda


@dataclass
class LoadData:
    """Problem data: volume load f and traction g on the traction boundary.

    Both are callables mapping points of shape (..., 2) to values of the
    same shape; ``traction`` may be None when the traction boundary is
    empty or load-free.
    """

    volume: Callable[[np.ndarray], np.ndarray] | None = None
    traction: Callable[[np.ndarray], np.ndarray] | None = None

    def volume_at(self, x: np.ndarray) -> np.ndarray:
        if self.volume is None:
            return np.zeros_like(x)
        return np.asarray(self.volume(x), dtype=np.float64)

    def traction_at(self, x: np.ndarray) -> np.ndarray:
        if self.traction is None:
            return np.zeros_like(x)
        return np.asarray(self.traction(x), dtype=np.float64)


@dataclass
class FieldPair:
    """Discrete displacement-pressure pair on one mesh.

    ``u`` holds interleaved (x, y) components per scalar displacement dof;
    ``p`` holds the pressure dofs.  Dirichlet displacement dofs are zero.
    """

    disc: Discretization
    u: np.ndarray
    p: np.ndarray

    @property
    def mesh(self) -> Mesh:
        return self.disc.mesh

    @property
    def k(self) -> int:
        return self.disc.k


@dataclass
class LinearSystem:
    """Assembled saddle-point system with boundary bookkeeping."""

    disc: Discretization
    material: Material
    matrix: sp.csr_matrix
    rhs: np.ndarray
    free: np.ndarray          # boolean mask over all dofs
    n_u: int
    pressure_mass: sp.csr_matrix
    pinned_pressure: bool


# -- element geometry helpers --------------------------------------------------


def element_jacobians(mesh: Mesh, elems) -> tuple[np.ndarray, np.ndarray]:
    """Affine map Jacobians and inverses for the given elements.

    Returns (jac, inv) with jac[e] = [d x / d ref]; inv maps physical
    gradients: grad_phys = grad_ref @ inv.
    """
    pts = mesh.vertices[mesh.triangles[elems]]
    e1 = pts[:, 1] - pts[:, 0]
    e2 = pts[:, 2] - pts[:, 0]
    jac = np.stack([e1, e2], axis=-1)  # columns are edge vectors
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    inv = np.empty_like(jac)
    inv[:, 0, 0] = e2[:, 1]
    inv[:, 0, 1] = -e2[:, 0]
    inv[:, 1, 0] = -e1[:, 1]
    inv[:, 1, 1] = e1[:, 0]
    inv /= det[:, None, None]
    return jac, inv


def _side_reference_points(j: int, flip: bool, t: np.ndarray) -> np.ndarray:
    """Reference coordinates of side quadrature points on local side j.

    The global side parameter runs from the side's lower to higher vertex
    id; `flip` says the local edge (vertex j+1 -> vertex j+2) runs the
    other way.
    """
    corners = np.array([(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)])
    a = corners[(j + 1) % 3]
    b = corners[(j + 2) % 3]
    tau = 1.0 - t if flip else t
    return a[None, :] + tau[:, None] * (b - a)[None, :]


def side_flip_mask(mesh: Mesh, elems) -> np.ndarray:
    """flip[e, j]: local side j of element e runs against its global param."""
    tri = mesh.triangles[elems]
    va = tri[:, [1, 2, 0]]
    vb = tri[:, [2, 0, 1]]
    return va > vb


# -- assembly -------------------------------------------------------------------


def assemble_system(
    disc: Discretization, material: Material, load: LoadData
) -> LinearSystem:
    """Assemble the saddle-point matrix and right-hand side.

    Block layout: displacement dofs first (interleaved components), then
    pressure dofs.  Dirichlet dofs are kept in the matrix but flagged in
    ``free``; elimination happens in :func:`solve` (homogeneous data, so
    no right-hand-side correction is needed).
    """
    mesh, k = disc.mesh, disc.k
    m = k + 1
    dm_u = disc.displacement
    dm_p = disc.pressure
    n_u = dm_u.n_dofs
    n_p = dm_p.n_scalar
    n = n_u + n_p
    t = material.inv_lambda
    mu = material.mu

    rq, rw = triangle_rule(2 * k + 4)
    grads_ref = lagrange_grads(m, rq)     # (nq, nlu, 2)
    vals_u = lagrange_values(m, rq)       # (nq, nlu)
    vals_p = lagrange_values(k, rq)       # (nq, nlp)
    nlu = vals_u.shape[1]
    nlp = vals_p.shape[1]

    rows_a, cols_a, data_a = [], [], []
    rows_b, cols_b, data_b = [], [], []
    rows_m, cols_m, data_m = [], [], []
    rhs = np.zeros(n)

    for lo in range(0, mesh.n_triangles, _CHUNK):
        elems = np.arange(lo, min(lo + _CHUNK, mesh.n_triangles))
        jac, jinv = element_jacobians(mesh, elems)
        grads = np.einsum("qir,erd->eqid", grads_ref, jinv)
        wq = 2.0 * mesh.areas[elems][:, None] * rw[None, :]

        gg = np.einsum("eq,eqid,eqjd->eij", wq, grads, grads)
        cross = np.einsum("eq,eqid,eqjc->eicjd", wq, grads, grads)
        ae = mu * cross
        for c in range(2):
            ae[:, :, c, :, c] += mu * gg
        ae = ae.reshape(len(elems), 2 * nlu, 2 * nlu)

        bte = np.einsum("eq,qj,eqic->eicj", wq, vals_p, grads)
        bte = bte.reshape(len(elems), 2 * nlu, nlp)

        me = np.einsum("eq,qi,qj->eij", wq, vals_p, vals_p)

        udofs = (
            dm_u.element_dofs[elems][:, :, None] * 2 + np.arange(2)
        ).reshape(len(elems), 2 * nlu)
        pdofs = dm_p.element_dofs[elems]

        rows_a.append(np.repeat(udofs, 2 * nlu, axis=1).ravel())
        cols_a.append(np.tile(udofs, (1, 2 * nlu)).ravel())
        data_a.append(ae.ravel())
        rows_b.append(np.repeat(udofs, nlp, axis=1).ravel())
        cols_b.append(np.tile(pdofs, (1, 2 * nlu)).ravel())
        data_b.append(bte.ravel())
        rows_m.append(np.repeat(pdofs, nlp, axis=1).ravel())
        cols_m.append(np.tile(pdofs, (1, nlp)).ravel())
        data_m.append(me.ravel())

        # volume load
        p0 = mesh.vertices[mesh.triangles[elems, 0]]
        xq = p0[:, None, :] + np.einsum("qr,erd->eqd", rq, jac.swapaxes(1, 2))
        fv = load.volume_at(xq)
        fe = np.einsum("eq,eqc,qi->eic", wq, fv, vals_u)
        np.add.at(rhs, udofs, fe.reshape(len(elems), -1))

    a_mat = sp.coo_matrix(
        (np.concatenate(data_a), (np.concatenate(rows_a), np.concatenate(cols_a))),
        shape=(n, n),
    )
    bt_upper = sp.coo_matrix(
        (
            np.concatenate(data_b),
            (np.concatenate(rows_b), np.concatenate(cols_b) + n_u),
        ),
        shape=(n, n),
    )
    mass = sp.coo_matrix(
        (np.concatenate(data_m), (np.concatenate(rows_m), np.concatenate(cols_m))),
        shape=(n_p, n_p),
    ).tocsr()

    matrix = a_mat + bt_upper + bt_upper.T
    if t != 0.0:
        scaled = mass * (-t)
        pad = sp.coo_matrix(scaled)
        matrix = matrix + sp.coo_matrix(
            (pad.data, (pad.row + n_u, pad.col + n_u)), shape=(n, n)
        )
    matrix = matrix.tocsr()

    # traction contributions on the Neumann boundary
    nsides = mesh.boundary_sides(NEUMANN)
    if nsides.size and load.traction is not None:
        tq, tw = segment_rule(2 * k + 5)
        owner = mesh.side_tri[nsides, 0]
        jloc = np.argmax(mesh.tri_sides[owner] == nsides[:, None], axis=1)
        flip = side_flip_mask(mesh, owner)[np.arange(len(owner)), jloc]
        a = mesh.vertices[mesh.sides[nsides, 0]]
        b = mesh.vertices[mesh.sides[nsides, 1]]
        xq = a[:, None, :] + tq[None, :, None] * (b - a)[:, None, :]
        gv = load.traction_at(xq)
        lens = mesh.side_length[nsides]
        for j in range(3):
            for fl in (False, True):
                pick = (jloc == j) & (flip == fl)
                if not pick.any():
                    continue
                ref = _side_reference_points(j, fl, tq)
                bv = lagrange_values(m, ref)  # (nqs, nlu)
                contrib = np.einsum(
                    "s,q,sqc,qi->sic", lens[pick], tw, gv[pick], bv
                )
                udofs = (
                    dm_u.element_dofs[owner[pick]][:, :, None] * 2
                    + np.arange(2)
                ).reshape(pick.sum(), -1)
                np.add.at(rhs, udofs, contrib.reshape(pick.sum(), -1))

    # boundary conditions
    free = np.ones(n, dtype=bool)
    ddofs = dm_u.side_scalar_dofs(mesh.boundary_sides(DIRICHLET))
    free[ddofs * 2] = False
    free[ddofs * 2 + 1] = False
    pinned = False
    if nsides.size == 0 and t == 0.0:
        free[n_u] = False  # pin one pressure dof; shift to zero mean later
        pinned = True

    return LinearSystem(
        disc=disc,
        material=material,
        matrix=matrix,
        rhs=rhs,
        free=free,
        n_u=n_u,
        pressure_mass=mass,
        pinned_pressure=pinned,
    )


def solve(system: LinearSystem) -> FieldPair:
    """Solve the assembled system by sparse LU with one refinement step.

    Raises SingularSystem when factorization fails or the relative
    residual stays above 1e-10.
    """
    free = system.free
    k_ff = system.matrix[free][:, free].tocsc()
    b = system.rhs[free]
    x = np.zeros(system.matrix.shape[0])
    if b.size:
        try:
            lu = spla.splu(k_ff)
            xf = lu.solve(b)
            xf += lu.solve(b - k_ff @ xf)
        except RuntimeError as exc:
            raise SingularSystem(f"saddle-point factorization failed: {exc}")
        scale = max(float(np.linalg.norm(b)), 1e-300)
        rel = float(np.linalg.norm(b - k_ff @ xf)) / scale
        if not np.isfinite(rel) or rel > 1e-10:
            raise SingularSystem(
                f"saddle-point solve residual {rel:.3e} exceeds 1e-10"
            )
        x[free] = xf

    n_u = system.n_u
    u = x[:n_u]
    p = x[n_u:]
    if system.pinned_pressure:
        area = float(np.sum(system.disc.mesh.areas))
        ones = np.asarray(system.pressure_mass.sum(axis=0)).ravel()
        mean = float(ones @ p) / area
        p = p - mean
    return FieldPair(disc=system.disc, u=u, p=p)


# -- field evaluation -----------------------------------------------------------


def fields_on_tables(fields: FieldPair, tables: StressTables):
    """Evaluate u-gradient and pressure at a table's quadrature points.

    Returns dict with grad_u (ne, nq, 2, 2) [grad_u[..., r, c] = d u_r / d x_c],
    p (ne, nq), grad_u_side (ne, 3, nqs, 2, 2), p_side (ne, 3, nqs).
    """
    disc = fields.disc
    mesh, k = disc.mesh, disc.k
    m = k + 1
    elems = tables.elems
    dm_u = disc.displacement
    dm_p = disc.pressure
    _, jinv = element_jacobians(mesh, elems)

    ue = fields.u[(dm_u.element_dofs[elems][:, :, None] * 2 + np.arange(2))]
    pe = fields.p[dm_p.element_dofs[elems]]

    g_ref = lagrange_grads(m, tables.vol_ref)
    grads = np.einsum("qir,erd->eqid", g_ref, jinv)
    grad_u = np.einsum("eic,eqid->eqcd", ue, grads)
    p_vol = np.einsum("ei,qi->eq", pe, lagrange_values(k, tables.vol_ref))

    flips = side_flip_mask(mesh, elems)
    nqs = len(tables.side_t)
    grad_u_side = np.empty((len(elems), 3, nqs, 2, 2))
    p_side = np.empty((len(elems), 3, nqs))
    for j in range(3):
        for fl in (False, True):
            pick = flips[:, j] == fl
            if not pick.any():
                continue
            ref = _side_reference_points(j, fl, tables.side_t)
            gs = np.einsum("qir,erd->eqid", lagrange_grads(m, ref), jinv[pick])
            grad_u_side[pick, j] = np.einsum("eic,eqid->eqcd", ue[pick], gs)
            p_side[pick, j] = np.einsum(
                "ei,qi->eq", pe[pick], lagrange_values(k, ref)
            )
    return {
        "grad_u": grad_u,
        "p": p_vol,
        "grad_u_side": grad_u_side,
        "p_side": p_side,
    }


def _stress_from(grad_u: np.ndarray, p: np.ndarray, mu: float) -> np.ndarray:
    """sigma = 2 mu eps(u) + p I from gradient and pressure values."""
    eps = 0.5 * (grad_u + np.swapaxes(grad_u, -1, -2))
    sig = 2.0 * mu * eps
    sig[..., 0, 0] += p
    sig[..., 1, 1] += p
    return sig


def direct_stress(fields: FieldPair, material: Material) -> BrokenField:
    """Represent sigma_h = 2 mu eps(u_h) + p_h I in the broken stress space.

    The representation is exact: each tensor row of sigma_h is a degree-k
    polynomial, hence lies in the elementwise Raviart-Thomas space.
    """
    disc = fields.disc
    nt = disc.mesh.n_triangles
    dofs = np.empty((nt, 2, rt_dim(disc.k)))
    for tables in disc.stress_chunks(_CHUNK):
        data = fields_on_tables(fields, tables)
        vol = _stress_from(data["grad_u"], data["p"], material.mu)
        side = _stress_from(data["grad_u_side"], data["p_side"], material.mu)
        dofs[tables.elems] = tables.dofs_from_values(vol, side)
    return BrokenField(disc.mesh, disc.k, dofs)
