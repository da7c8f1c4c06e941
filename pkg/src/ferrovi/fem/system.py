"""Mixed finite elements for the incremental problem on triangle meshes (plane strain).

Unknowns: continuous P1 displacements, BDM1 dielectric displacement,
elementwise-constant remanent polarization. Gauss's law is imposed per
element through one linear constraint row (the discrete potential is its
multiplier), so div D_h vanishes exactly on every element.

The solver works in nondimensional coordinates: displacements are scaled
by sqrt(E0 P0 / E_Y) times the mean element size, D moments and P by P0,
and energies by E0 P0 times the mean element area.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .. import constitutive
from ..constitutive import Law, MaterialParams, SATURATION_MARGIN
from ..errors import SaturationReached
from .bdm import BDM1
from .mesh import Mesh

# Dunavant's 6-point rule, exact for polynomials of degree 4
_A1, _W1 = 0.445948490915965, 0.223381589678011
_A2, _W2 = 0.091576213509771, 0.109951743655322
QUAD_BARY = np.array([
    [_A1, _A1, 1 - 2 * _A1], [_A1, 1 - 2 * _A1, _A1], [1 - 2 * _A1, _A1, _A1],
    [_A2, _A2, 1 - 2 * _A2], [_A2, 1 - 2 * _A2, _A2], [1 - 2 * _A2, _A2, _A2],
])
QUAD_WEIGHTS = np.array([_W1] * 3 + [_W2] * 3)

NLOC = 14  # 6 displacement + 6 BDM1 + 2 polarization coefficients per element


@dataclass
class DofMap:
    """Full coefficient layout [u (2 nv), D (2 nedge), P (2 ne)] and its free subset."""

    n_u: int
    n_d: int
    n_p: int
    free: np.ndarray  # full indices of the free coefficients, ascending
    index: np.ndarray  # full -> free index, -1 for eliminated entries

    @property
    def n_full(self) -> int:
        return self.n_u + self.n_d + self.n_p

    @property
    def size(self) -> int:
        return self.free.size

    def u_full(self, vertex, comp):
        return 2 * np.asarray(vertex) + comp

    def d_full(self, edge, moment):
        return self.n_u + 2 * np.asarray(edge) + moment

    def p_full(self, element, comp):
        return self.n_u + self.n_d + 2 * np.asarray(element) + comp

    def block_sizes(self) -> dict[str, int]:
        f = self.free
        return {
            "u": int(np.sum(f < self.n_u)),
            "D": int(np.sum((f >= self.n_u) & (f < self.n_u + self.n_d))),
            "P": int(np.sum(f >= self.n_u + self.n_d)),
        }


def build_dofmap(mesh: Mesh) -> DofMap:
    n_u, n_d, n_p = 2 * mesh.n_vertices, 2 * mesh.n_edges, 2 * mesh.n_elements
    fixed = np.zeros(n_u + n_d + n_p, dtype=bool)
    for tag, comps in (("fix", (0, 1)), ("fix_x", (0,)), ("fix_y", (1,))):
        verts = np.unique(mesh.edges[mesh.edges_with(tag)])
        for c in comps:
            fixed[2 * verts + c] = True
    ins = mesh.edges_with("ins")
    for moment in (0, 1):
        fixed[n_u + 2 * ins + moment] = True
    free = np.flatnonzero(~fixed)
    index = np.full(fixed.size, -1, dtype=np.int64)
    index[free] = np.arange(free.size)
    return DofMap(n_u, n_d, n_p, free, index)


def _vector_keys(data: dict) -> dict:
    out = dict(data)
    for name in ("traction", "body_force"):
        parts = [out.pop(f"{name}_{c}", None) for c in "xy"]
        if any(p is not None for p in parts):
            base = np.asarray(out.get(name, np.zeros(2)), dtype=float)
            out[name] = base + np.array([0.0 if p is None else float(p) for p in parts])
    return out


class FeSystem:
    """Incremental problem on a triangle mesh; implements the solver's problem protocol."""

    dim = 2

    def __init__(self, mesh: Mesh, params: MaterialParams):
        self.mesh = mesh
        self.params = params
        self.dofs = build_dofmap(mesh)
        ne = mesh.n_elements
        coords = mesh.vertices[mesh.elements]  # (ne, 3, 2)
        self.areas = mesh.areas
        self.mean_area = float(np.mean(self.areas))
        self.h_ref = float(np.sqrt(2.0 * self.mean_area))
        edge_xy = mesh.vertices[mesh.edges[mesh.element_edges]]  # (ne, 3, 2, 2)
        self.basis = BDM1(coords, edge_xy)
        self.quad_points = np.einsum("qa,eac->eqc", QUAD_BARY, coords)
        self.quad_weights = QUAD_WEIGHTS[None, :] * self.areas[:, None]
        self.centroids = coords.mean(axis=1)

        # P1 shape gradients
        x, y = coords[..., 0], coords[..., 1]
        two_a = 2.0 * self.areas
        grads = np.stack([
            np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1),
            np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1),
        ], axis=-1) / two_a[:, None, None]  # (ne, 3, 2)
        self.shape_grads = grads
        bu = np.zeros((ne, 3, 6))
        bu[:, 0, 0::2] = grads[:, :, 0]
        bu[:, 1, 1::2] = grads[:, :, 1]
        bu[:, 2, 0::2] = grads[:, :, 1]
        bu[:, 2, 1::2] = grads[:, :, 0]
        self.strain_op = bu

        phi_q = self.basis.values(self.quad_points)  # (ne, nq, 6, 2)
        nq = QUAD_WEIGHTS.size
        jac = np.zeros((ne, nq, 7, NLOC))
        jac[:, :, 0:3, 0:6] = bu[:, None]
        jac[:, :, 3:5, 6:12] = np.swapaxes(phi_q, -1, -2)
        jac[:, :, 5, 12] = 1.0
        jac[:, :, 6, 13] = 1.0
        self.jac = jac
        self.phi_centroid = self.basis.values(self.centroids[:, None, :])[:, 0]  # (ne, 6, 2)

        d = self.dofs
        elems = mesh.elements
        loc = np.empty((ne, NLOC), dtype=np.int64)
        loc[:, 0:6:2] = d.u_full(elems, 0)
        loc[:, 1:6:2] = d.u_full(elems, 1)
        loc[:, 6:12:2] = d.d_full(mesh.element_edges, 0)
        loc[:, 7:12:2] = d.d_full(mesh.element_edges, 1)
        loc[:, 12] = d.p_full(np.arange(ne), 0)
        loc[:, 13] = d.p_full(np.arange(ne), 1)
        self.local_full = loc
        self.local_free = d.index[loc]

        self.energy_scale = params.E0 * params.P0 * self.mean_area
        strain_scale = np.sqrt(params.E0 * params.P0 / params.E_Y)
        scale_full = np.empty(d.n_full)
        scale_full[: d.n_u] = strain_scale * self.h_ref
        scale_full[d.n_u:] = params.P0
        self.scale_full = scale_full
        self.scale = scale_full[d.free]

        # Gauss-law rows: (B_phys D)_T = ∫_T div D = Σ_k s_k |e_k| c0_k
        rows = np.repeat(np.arange(ne), 3)
        cols = d.d_full(mesh.element_edges, 0).ravel()
        vals = (mesh.edge_signs * mesh.edge_lengths[mesh.element_edges]).ravel()
        self.gauss_full = sp.csr_matrix((vals, (rows, cols)), shape=(ne, d.n_full))
        self.row_scale = 1.0 / (params.P0 * np.sqrt(2.0 * self.areas))
        keep = d.index[cols] >= 0
        B = sp.csr_matrix(
            (vals[keep] * self.row_scale[rows[keep]] * scale_full[cols[keep]], (rows[keep], d.index[cols[keep]])),
            shape=(ne, d.size),
        )
        self._constraints = B

    # --- coordinates ---------------------------------------------------------

    @property
    def size(self) -> int:
        return self.dofs.size

    def zero(self) -> np.ndarray:
        return np.zeros(self.size)

    def full_vector(self, x) -> np.ndarray:
        """Physical full coefficient vector (eliminated entries zero)."""
        w = np.zeros(self.dofs.n_full)
        w[self.dofs.free] = np.asarray(x, dtype=float) * self.scale
        return w

    def to_physical(self, x) -> np.ndarray:
        return np.asarray(x) * self.scale

    def from_physical(self, w) -> np.ndarray:
        return np.asarray(w) / self.scale

    def polarization(self, x) -> np.ndarray:
        w = self.full_vector(x)
        return w[self.local_full[:, 12:14]]

    def displacement(self, x) -> np.ndarray:
        return self.full_vector(x)[: self.dofs.n_u].reshape(-1, 2)

    def _local(self, x) -> np.ndarray:
        return self.full_vector(x)[self.local_full]

    def quadrature_states(self, x) -> np.ndarray:
        """Point unknowns (S, D, P) at every quadrature point, (ne, nq, 7)."""
        return np.einsum("eqij,ej->eqi", self.jac, self._local(x))

    def _check(self, P):
        if self.params.model.law is not Law.SATURATING:
            return
        u = np.linalg.norm(P, axis=-1) / self.params.P0
        bad = np.flatnonzero(u >= 1.0 - SATURATION_MARGIN)
        if bad.size:
            raise SaturationReached(element=int(bad[0]))

    def _point_terms(self, x, x_prev, order):
        y = self.quadrature_states(x)
        self._check(y[:, 0, 5:7])
        ne, nq = y.shape[:2]
        out = constitutive.energy_derivatives(y.reshape(ne * nq, 7), self.params, 2, order=order)
        dP = self.polarization(x) - self.polarization(x_prev)
        diss = constitutive.regularized_dissipation(dP, self.params)
        return (ne, nq), out, diss

    # --- problem protocol ----------------------------------------------------

    def energy(self, x, x_prev, load) -> float:
        (ne, nq), (psi, _), (dval, _, _) = self._point_terms(x, x_prev, 1)
        total = np.sum(psi.reshape(ne, nq) * self.quad_weights) + np.sum(dval * self.areas)
        return float(total / self.energy_scale - np.dot(load, x))

    def _gradient_local(self, x, x_prev):
        (ne, nq), (_, grad), (_, dgrad, _) = self._point_terms(x, x_prev, 1)
        g = np.einsum("eqij,eqi->ej", self.jac, grad.reshape(ne, nq, 7) * self.quad_weights[..., None])
        g[:, 12:14] += dgrad * self.areas[:, None]
        return g

    def residual(self, x, x_prev, load) -> np.ndarray:
        g_full = np.zeros(self.dofs.n_full)
        np.add.at(g_full, self.local_full, self._gradient_local(x, x_prev))
        return g_full[self.dofs.free] * self.scale / self.energy_scale - load

    def element_matrices(self, x, x_prev) -> np.ndarray:
        (ne, nq), (_, _, hess), (_, _, dhess) = self._point_terms(x, x_prev, 2)
        hw = hess.reshape(ne, nq, 7, 7) * self.quad_weights[..., None, None]
        k = np.einsum("eqai,eqab,eqbj->eij", self.jac, hw, self.jac, optimize=True)
        k[:, 12:14, 12:14] += dhess * self.areas[:, None, None]
        return k

    def hessian(self, x, x_prev, load) -> sp.csr_matrix:
        k = self.element_matrices(x, x_prev)
        sl = self.scale_full[self.local_full]
        k = k * sl[:, :, None] * sl[:, None, :] / self.energy_scale
        idx = self.local_free
        rows = np.broadcast_to(idx[:, :, None], k.shape)
        cols = np.broadcast_to(idx[:, None, :], k.shape)
        keep = (rows >= 0) & (cols >= 0)
        n = self.size
        return sp.csr_matrix((k[keep], (rows[keep], cols[keep])), shape=(n, n))

    def constraints(self) -> sp.csr_matrix:
        return self._constraints

    def polarization_indices(self) -> np.ndarray:
        return np.flatnonzero(self.dofs.free >= self.dofs.n_u + self.dofs.n_d)

    def saturation_guard(self, x) -> bool:
        if self.params.model.law is not Law.SATURATING:
            return True
        p = np.linalg.norm(self.polarization(x), axis=-1)
        return bool(np.all(p < self.params.P0 * (1.0 - SATURATION_MARGIN)))

    def physical_load(self, data: dict) -> np.ndarray:
        """Full physical load vector from schedule data.

        Keys: ``potential`` (electrode potential on ``el`` edges, V),
        ``traction`` (2-vector on ``trac`` edges, N/m²), ``body_force``
        (2-vector, N/m³). Components may also be given separately as
        ``traction_x``, ``traction_y``, ``body_force_x``, ``body_force_y``.
        """
        mesh, d = self.mesh, self.dofs
        ell = np.zeros(d.n_full)
        data = _vector_keys(data)
        if "traction" in data:
            t = np.asarray(data["traction"], dtype=float)
            edges = mesh.edges_with("trac")
            share = 0.5 * mesh.edge_lengths[edges]
            for end in (0, 1):
                verts = mesh.edges[edges, end]
                for c in (0, 1):
                    np.add.at(ell, d.u_full(verts, c), share * t[c])
        if "body_force" in data:
            f = np.asarray(data["body_force"], dtype=float)
            for c in (0, 1):
                np.add.at(ell, d.u_full(mesh.elements, c).ravel(), np.repeat(self.areas / 3.0 * f[c], 3))
        if "potential" in data:
            phi0 = float(data["potential"])
            edges = mesh.edges_with("el")
            ell[d.d_full(edges, 0)] += -phi0 * mesh.edge_outward_sign[edges] * mesh.edge_lengths[edges]
        return ell

    def load_vector(self, data: dict) -> np.ndarray:
        ell = self.physical_load(data)
        return ell[self.dofs.free] * self.scale / self.energy_scale

    # --- diagnostics and output -----------------------------------------------

    def potential(self, multiplier) -> np.ndarray:
        """Elementwise potential (V) from the constraint multiplier of a converged step."""
        return -self.energy_scale * self.row_scale * np.asarray(multiplier)

    def gauss_integrals(self, x) -> np.ndarray:
        """∫_T div D for every element."""
        return self.gauss_full @ self.full_vector(x)

    def gauss_law_residuals(self, x) -> np.ndarray:
        """|∫_T div D| / (‖D‖_∞ |T|^(1/2)) per element."""
        w = self.full_vector(x)
        dmax = np.max(np.abs(np.einsum("eic,ei->ec", self.phi_centroid, w[self.local_full[:, 6:12]])))
        dmax = max(dmax, np.max(np.abs(w[self.dofs.n_u:self.dofs.n_u + self.dofs.n_d]), initial=0.0), 1e-300)
        return np.abs(self.gauss_integrals(x)) / (dmax * np.sqrt(self.areas))

    def postprocess(self, x, multiplier=None) -> dict[str, np.ndarray]:
        """Element fields at centroids; E and T come from the constitutive law."""
        wl = self._local(x)
        S = np.einsum("eij,ej->ei", self.strain_op, wl[:, 0:6])
        D = np.einsum("eic,ei->ec", self.phi_centroid, wl[:, 6:12])
        P = wl[:, 12:14]
        y = np.concatenate([S, D, P], axis=1)
        self._check(P)
        psi, grad = constitutive.energy_derivatives(y, self.params, 2, order=1)
        Si = constitutive.remanent_strain(np.concatenate([P, np.zeros((len(P), 1))], axis=1), self.params)
        fields = {
            "u": self.displacement(x),
            "S": S,
            "D": D,
            "P": P,
            "absP": np.linalg.norm(P, axis=1),
            "T": grad[:, 0:3],
            "T_xx": grad[:, 0],
            "E": grad[:, 3:5],
            "Ehat": -grad[:, 5:7],
            "Si": Si[:, [0, 1, 5]],
            "divD": np.einsum("ei,ei->e", self.basis.divergence(), wl[:, 6:12]),
            "psi": psi,
        }
        if multiplier is not None:
            fields["phi"] = self.potential(multiplier)
        return fields


def inf_sup_constant(mesh: Mesh) -> float:
    """Discrete inf-sup constant of (BDM1, P0) in the H(div) x L2 norms.

    β² is the smallest eigenvalue of M_q^{-1/2} B M_D^{-1} Bᵀ M_q^{-1/2}, with
    M_D the H(div) Gram matrix of the free BDM1 coefficients and M_q the
    P0 mass matrix. Dense; meant for small meshes.
    """
    dofs = build_dofmap(mesh)
    coords = mesh.vertices[mesh.elements]
    basis = BDM1(coords, mesh.vertices[mesh.edges[mesh.element_edges]])
    qp = np.einsum("qa,eac->eqc", QUAD_BARY, coords)
    qw = QUAD_WEIGHTS[None, :] * mesh.areas[:, None]
    phi = basis.values(qp)
    div = basis.divergence()
    mloc = np.einsum("eq,eqic,eqjc->eij", qw, phi, phi) + mesh.areas[:, None, None] * div[:, :, None] * div[:, None, :]
    glob = np.empty((mesh.n_elements, 6), dtype=np.int64)
    glob[:, 0::2] = 2 * mesh.element_edges
    glob[:, 1::2] = 2 * mesh.element_edges + 1
    nd = 2 * mesh.n_edges
    M = np.zeros((nd, nd))
    np.add.at(M, (glob[:, :, None], glob[:, None, :]), mloc)
    bl = mesh.areas[:, None] * div  # ∫_T div φ_i
    B = np.zeros((mesh.n_elements, nd))
    np.add.at(B, (np.repeat(np.arange(mesh.n_elements), 6), glob.ravel()), bl.ravel())
    free_d = dofs.free[(dofs.free >= dofs.n_u) & (dofs.free < dofs.n_u + dofs.n_d)] - dofs.n_u
    M = M[np.ix_(free_d, free_d)]
    B = B[:, free_d]
    mq = 1.0 / np.sqrt(mesh.areas)
    S = (mq[:, None] * B) @ np.linalg.solve(M, (mq[:, None] * B).T)
    return float(np.sqrt(max(np.linalg.eigvalsh(S)[0], 0.0)))
