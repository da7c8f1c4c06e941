"""Small dense tensor algebra for material-point quantities.

Symmetric second-order tensors are stored in Voigt form. Strain-like
tensors carry engineering shear (factor 2 on the off-diagonal entries),
stress-like tensors do not, so that ``a : b`` is the plain dot product of
``voigt_pack(a, "strain")`` and ``voigt_pack(b, "stress")``.

Ordering is (xx, yy, zz, yz, xz, xy) in 3-D and (xx, yy, xy) in 2-D.
"""

from __future__ import annotations

import numpy as np

VOIGT_PAIRS = {
    2: ((0, 0), (1, 1), (0, 1)),
    3: ((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)),
}
VOIGT_SIZE = {2: 3, 3: 6}

# 2-D plane strain quantities live in these slots of their 3-D counterparts
PLANE_STRAIN_VOIGT = np.array([0, 1, 5])
PLANE_VECTOR = np.array([0, 1])


def voigt_size(dim: int) -> int:
    try:
        return VOIGT_SIZE[dim]
    except KeyError:
        raise ValueError(f"dimension must be 2 or 3, got {dim}") from None


def _shear_weight(dim: int, kind: str) -> np.ndarray:
    n = voigt_size(dim)
    w = np.ones(n)
    if kind == "strain":
        w[dim:] = 2.0
    elif kind != "stress":
        raise ValueError(f"kind must be 'strain' or 'stress', got {kind!r}")
    return w


def voigt_pack(t, kind: str = "strain") -> np.ndarray:
    """Pack symmetric ``(..., d, d)`` tensors into Voigt vectors ``(..., n)``."""
    t = np.asarray(t, dtype=float)
    dim = t.shape[-1]
    if t.ndim < 2 or t.shape[-2] != dim:
        raise ValueError(f"expected (..., d, d) tensor, got shape {t.shape}")
    pairs = VOIGT_PAIRS.get(dim)
    if pairs is None:
        raise ValueError(f"dimension must be 2 or 3, got {dim}")
    v = np.stack([0.5 * (t[..., i, j] + t[..., j, i]) for i, j in pairs], axis=-1)
    return v * _shear_weight(dim, kind)


def voigt_unpack(v, kind: str = "strain") -> np.ndarray:
    """Inverse of :func:`voigt_pack`."""
    v = np.asarray(v, dtype=float)
    n = v.shape[-1]
    dim = {3: 2, 6: 3}.get(n)
    if dim is None:
        raise ValueError(f"Voigt vectors have length 3 or 6, got {n}")
    v = v / _shear_weight(dim, kind)
    t = np.zeros(v.shape[:-1] + (dim, dim))
    for k, (i, j) in enumerate(VOIGT_PAIRS[dim]):
        t[..., i, j] = v[..., k]
        t[..., j, i] = v[..., k]
    return t


def double_contraction(a, b) -> np.ndarray:
    return np.einsum("...ij,...ij->...", np.asarray(a, float), np.asarray(b, float))


def outer_voigt(p, q=None) -> np.ndarray:
    """Engineering Voigt vector of sym(p ⊗ q) for 3-vectors; ``q`` defaults to ``p``.

    Dotting the result with a stress Voigt vector gives ``p · σ · q``.
    """
    p = np.asarray(p, dtype=float)
    q = p if q is None else np.asarray(q, dtype=float)
    return np.stack(
        [
            p[..., 0] * q[..., 0],
            p[..., 1] * q[..., 1],
            p[..., 2] * q[..., 2],
            p[..., 1] * q[..., 2] + p[..., 2] * q[..., 1],
            p[..., 0] * q[..., 2] + p[..., 2] * q[..., 0],
            p[..., 0] * q[..., 1] + p[..., 1] * q[..., 0],
        ],
        axis=-1,
    )


def stress_dot_vector(s, p) -> np.ndarray:
    """Tensor-vector product ``σ · p`` with σ given as a 3-D stress Voigt vector."""
    s = np.asarray(s, dtype=float)
    p = np.asarray(p, dtype=float)
    return np.stack(
        [
            s[..., 0] * p[..., 0] + s[..., 5] * p[..., 1] + s[..., 4] * p[..., 2],
            s[..., 5] * p[..., 0] + s[..., 1] * p[..., 1] + s[..., 3] * p[..., 2],
            s[..., 4] * p[..., 0] + s[..., 3] * p[..., 1] + s[..., 2] * p[..., 2],
        ],
        axis=-1,
    )


def isotropic_stiffness(young: float, poisson: float) -> np.ndarray:
    """6x6 Voigt stiffness acting on engineering strains."""
    lam = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson))
    mu = young / (2.0 * (1.0 + poisson))
    c = np.zeros((6, 6))
    c[:3, :3] = lam
    c[:3, :3] += 2.0 * mu * np.eye(3)
    c[3:, 3:] = mu * np.eye(3)
    return c


def plane_strain_stiffness(c3: np.ndarray) -> np.ndarray:
    return c3[np.ix_(PLANE_STRAIN_VOIGT, PLANE_STRAIN_VOIGT)]


def transversely_isotropic_piezo(d31: float, d33: float, axis: int = 2) -> np.ndarray:
    """3x6 piezoelectric ``d`` matrix for poling along a coordinate axis, d15 omitted."""
    d = np.zeros((3, 6))
    d[axis, :3] = d31
    d[axis, axis] = d33
    return d


def convert_material_tensors(c_e, d, eps_s):
    """Convert (c^E, d, ε^S) to the energy-form tensors (c^D, h, β).

    With ``e = d c^E``: ``β = (ε^S)^-1``, ``h = β e`` and
    ``c^D = c^E + eᵀ β e``.
    """
    c_e = np.asarray(c_e, dtype=float)
    d = np.asarray(d, dtype=float)
    eps_s = np.asarray(eps_s, dtype=float)
    try:
        beta = np.linalg.inv(eps_s)
    except np.linalg.LinAlgError as exc:
        raise ValueError("permittivity tensor is singular") from exc
    if not np.all(np.isfinite(beta)):
        raise ValueError("permittivity tensor is singular")
    e = d @ c_e
    h = beta @ e
    c_d = c_e + e.T @ beta @ e
    return c_d, h, beta


def compound_matrix(c_d, h, beta) -> np.ndarray:
    """Symmetric block matrix of the reversible energy in (strain, D - P)."""
    c_d = np.asarray(c_d, dtype=float)
    h = np.asarray(h, dtype=float)
    beta = np.asarray(beta, dtype=float)
    return np.block([[c_d, -h.T], [-h, beta]])


def spd_min_eigenvalue(a, rtol: float = 1e-12) -> float:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    scale = max(np.abs(a).max(), np.finfo(float).tiny)
    if np.abs(a - a.T).max() > rtol * scale:
        raise ValueError("matrix is not symmetric")
    return float(np.linalg.eigvalsh(0.5 * (a + a.T))[0])
