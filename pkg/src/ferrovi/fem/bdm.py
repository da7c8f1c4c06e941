"""Lowest-order Brezzi-Douglas-Marini (BDM1) shape functions on triangles.

The six degrees of freedom of an element are the first two Legendre
moments of the normal trace on each edge, taken with respect to the
global edge normal and the global edge parameter (lower to higher vertex
index):

    c0 = mean of D·n over the edge,
    c1 = 3 ∫_0^1 (D·n)(t) (2t - 1) dt.

Both functionals depend only on the trace, so neighbouring elements share
them and the normal component is continuous by construction. The basis is
the dual basis of these functionals in the space P1², built directly in
physical coordinates (no Piola map is needed for an affine dual basis).
"""

from __future__ import annotations

import numpy as np

_GAUSS_T = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])


def _monomials(xi):
    """Values of the six P1² monomials at local coordinates ``xi`` (..., 2) -> (..., 6, 2)."""
    one = np.ones(xi.shape[:-1])
    zero = np.zeros(xi.shape[:-1])
    cols = [
        (one, zero), (xi[..., 0], zero), (xi[..., 1], zero),
        (zero, one), (zero, xi[..., 0]), (zero, xi[..., 1]),
    ]
    return np.stack([np.stack(c, axis=-1) for c in cols], axis=-2)


class BDM1:
    """Dual basis for a batch of triangles.

    ``coords`` has shape (ne, 3, 2) with counter-clockwise vertices;
    ``edge_vertices`` (ne, 3, 2) gives, for local edge k, its two global
    endpoints in global orientation order (lower index first).
    """

    def __init__(self, coords, edge_vertices):
        coords = np.asarray(coords, dtype=float)
        self.center = coords.mean(axis=1)
        a = coords[:, 1] - coords[:, 0]
        b = coords[:, 2] - coords[:, 0]
        area = 0.5 * np.abs(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])
        if np.any(area <= 0.0):
            raise ValueError("degenerate element")
        self.h = np.sqrt(2.0 * area)
        ev = np.asarray(edge_vertices, dtype=float)  # (ne, 3, 2 endpoints, 2 coords)
        tangent = ev[:, :, 1] - ev[:, :, 0]
        normal = np.stack([tangent[..., 1], -tangent[..., 0]], axis=-1)
        normal /= np.linalg.norm(normal, axis=-1, keepdims=True)
        ne = coords.shape[0]
        dof = np.zeros((ne, 6, 6))
        for k in range(3):
            for t in _GAUSS_T:
                x = ev[:, k, 0] + t * tangent[:, k]
                mono = _monomials(self._local(x))  # (ne, 6, 2)
                vn = np.einsum("emc,ec->em", mono, normal[:, k])
                dof[:, 2 * k, :] += 0.5 * vn
                dof[:, 2 * k + 1, :] += 1.5 * (2.0 * t - 1.0) * vn
        # column i of coef holds the monomial coefficients of basis function i
        try:
            self.coef = np.linalg.inv(dof)
        except np.linalg.LinAlgError as exc:
            raise ValueError("degenerate element") from exc

    def _local(self, x):
        return (x - self.center[(slice(None),) + (None,) * (x.ndim - 2)]) / self.h[(slice(None),) + (None,) * (x.ndim - 1)]

    def values(self, x):
        """Basis values at physical points ``x`` (ne, nq, 2) -> (ne, nq, 6, 2)."""
        mono = _monomials(self._local(np.asarray(x, dtype=float)))  # (ne, nq, 6, 2)
        return np.einsum("eqmc,emi->eqic", mono, self.coef)

    def divergence(self):
        """Constant divergence of each basis function, (ne, 6)."""
        return (self.coef[:, 1, :] + self.coef[:, 5, :]) / self.h[:, None]


def bdm1_basis(coords, edge_vertices=None) -> BDM1:
    """Basis of a single triangle or a batch.

    Without ``edge_vertices`` the local edge k (opposite vertex k) is
    oriented from vertex k+1 to vertex k+2.
    """
    coords = np.asarray(coords, dtype=float)
    single = coords.ndim == 2
    if single:
        coords = coords[None]
    if edge_vertices is None:
        edge_vertices = np.stack([coords[:, [1, 2]], coords[:, [2, 0]], coords[:, [0, 1]]], axis=1)
    elif single:
        edge_vertices = np.asarray(edge_vertices)[None]
    return BDM1(coords, edge_vertices)


def edge_moments(field, a, b, npts: int = 6):
    """(c0, c1) of a vector field on the segment a -> b using Gauss-Legendre quadrature."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    t = b - a
    n = np.array([t[1], -t[0]]) / np.linalg.norm(t)
    s, w = np.polynomial.legendre.leggauss(npts)
    s = 0.5 * (s + 1.0)
    w = 0.5 * w
    vals = np.array([np.dot(field(a + si * t), n) for si in s])
    return float(np.sum(w * vals)), float(3.0 * np.sum(w * vals * (2.0 * s - 1.0)))
