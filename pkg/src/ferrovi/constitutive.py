"""Pointwise energy densities of the ferroelectric model and their derivatives.

The free energy density is

    ψ(S, D, P) = ½ (S - Sⁱ):cᴰ:(S - Sⁱ) - (S - Sⁱ):hᵀ·(D - P) + ½ (D - P)·β·(D - P) + ψⁱ(P)

with β = I/ε, c^E isotropic, a transversely isotropic piezoelectric tensor
d(P) aligned with P, and the derived tensors e = d c^E, h = β e and
c^D = c^E + eᵀ β e. Completing the square gives the equivalent form

    ψʳ = ½ r:c^E:r + |D - P - d(P):c^E:r|² / (2ε),   r = S - Sⁱ(P),

which is what is evaluated here. Since d(P) = P ⊗ w(P) in Voigt notation,
the piezoelectric contribution ``d(P):σ`` is always parallel to P.

Everything is evaluated in 3-D. 2-D plane strain (S_zz = S_xz = S_yz = 0,
D_z = P_z = 0) is handled by embedding the in-plane components and
restricting the derivatives.

Arrays carry a leading batch axis; all functions accept single points too.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import algebra
from .errors import SaturationReached, ValidationError

IV = np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])

SATURATION_MARGIN = 1e-6


class Law(str, enum.Enum):
    QUADRATIC = "quadratic"
    SATURATING = "saturating"


@dataclass(frozen=True)
class ModelKind:
    law: Law = Law.SATURATING
    remanent_strain: bool = True

    def __post_init__(self):
        object.__setattr__(self, "law", Law(self.law))


@dataclass(frozen=True)
class MaterialParams:
    """Material constants in SI units.

    E0 coercive field [V/m], P0 saturation polarization [C/m²], S0 saturation
    strain, m saturation exponent, eps permittivity [C/(V m)], E_Y Young's
    modulus [Pa], nu Poisson ratio, d31/d33 piezoelectric constants [m/V],
    H0 hardening modulus [V m/C], reg_eps dissipation smoothing length [C/m²].
    """

    E0: float
    P0: float
    S0: float
    m: float
    eps: float
    E_Y: float
    nu: float
    d31: float
    d33: float
    H0: float
    reg_eps: float
    model: ModelKind = field(default_factory=ModelKind)

    def __post_init__(self):
        for name in ("E0", "P0", "H0", "eps", "E_Y", "reg_eps"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ValidationError(name, "must be positive")
        for name in ("S0", "d31", "d33"):
            if not np.isfinite(getattr(self, name)):
                raise ValidationError(name, "must be finite")
        if self.S0 < 0:
            raise ValidationError("S0", "must be non-negative")
        if not self.m > 1:
            raise ValidationError("m", "must exceed 1")
        if not 0 <= self.nu < 0.5:
            raise ValidationError("nu", "must lie in [0, 0.5)")

    @property
    def stiffness(self) -> np.ndarray:
        return algebra.isotropic_stiffness(self.E_Y, self.nu)

    def with_(self, **changes) -> "MaterialParams":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "model"}
        out["law"] = self.model.law.value
        out["remanent_strain"] = self.model.remanent_strain
        return out


def patch_test_params(law: Law | str = Law.SATURATING, remanent_strain: bool = True, **overrides) -> MaterialParams:
    """Constants of the 2 mm cube patch test."""
    base = dict(
        E0=1e6, P0=0.3, S0=0.002, m=2.0, eps=1.2e-8, E_Y=3e10, nu=0.3,
        d31=-2.1e-10, d33=4.2e-10, H0=1e6 / 3.0, reg_eps=0.3e-6,
        model=ModelKind(Law(law), remanent_strain),
    )
    base.update(overrides)
    return MaterialParams(**base)


def cantilever_params(law: Law | str = Law.SATURATING, remanent_strain: bool = True, **overrides) -> MaterialParams:
    """Constants of the bending cantilever."""
    base = dict(
        E0=1e6, P0=0.3, S0=0.002, m=1.1, eps=1.5e-8, E_Y=1e6, nu=0.3,
        d31=-2.74e-10, d33=5.93e-10, H0=1e6, reg_eps=0.3e-4,
        model=ModelKind(Law(law), remanent_strain),
    )
    base.update(overrides)
    return MaterialParams(**base)


# --- state containers -------------------------------------------------------


@dataclass(frozen=True)
class PointState:
    """Compound unknown at one material point (or a batch of points).

    ``S`` is an engineering-strain Voigt vector (length 6 in 3-D, 3 in 2-D
    plane strain), ``D``/``P``/``P_prev`` are vectors of length 3 or 2.
    """

    S: np.ndarray
    D: np.ndarray
    P: np.ndarray
    P_prev: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return np.shape(self.D)[-1]

    @classmethod
    def zero(cls, dim: int = 3) -> "PointState":
        n = algebra.voigt_size(dim)
        return cls(np.zeros(n), np.zeros(dim), np.zeros(dim), np.zeros(dim))

    def vector(self) -> np.ndarray:
        return np.concatenate([np.atleast_1d(self.S), np.atleast_1d(self.D), np.atleast_1d(self.P)], axis=-1)

    @classmethod
    def from_vector(cls, x, dim: int, P_prev=None) -> "PointState":
        x = np.asarray(x, dtype=float)
        n = algebra.voigt_size(dim)
        return cls(x[..., :n], x[..., n:n + dim], x[..., n + dim:n + 2 * dim], P_prev)


@dataclass(frozen=True)
class PointResponse:
    T: np.ndarray
    E: np.ndarray
    Ehat: np.ndarray
    psi: np.ndarray


@dataclass(frozen=True)
class Tangent:
    """Hessian of ψ with respect to the stacked (S, D, P) vector."""

    matrix: np.ndarray
    dim: int

    def _slices(self):
        n = algebra.voigt_size(self.dim)
        return {"S": slice(0, n), "D": slice(n, n + self.dim), "P": slice(n + self.dim, n + 2 * self.dim)}

    def block(self, a: str, b: str) -> np.ndarray:
        s = self._slices()
        return self.matrix[..., s[a], s[b]]


# --- 2-D / 3-D embedding ----------------------------------------------------


def _embed_vector(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape[-1] == 3:
        return v
    if v.shape[-1] != 2:
        raise ValueError(f"vectors must have 2 or 3 components, got {v.shape[-1]}")
    out = np.zeros(v.shape[:-1] + (3,))
    out[..., :2] = v
    return out


def _embed_strain(s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if s.shape[-1] == 6:
        return s
    if s.shape[-1] != 3:
        raise ValueError(f"strain Voigt vectors must have 3 or 6 entries, got {s.shape[-1]}")
    out = np.zeros(s.shape[:-1] + (6,))
    out[..., algebra.PLANE_STRAIN_VOIGT] = s
    return out


def _free_indices(dim: int) -> np.ndarray:
    """Positions of the free unknowns inside the stacked 3-D vector (S6, D3, P3)."""
    if dim == 3:
        return np.arange(12)
    return np.concatenate([algebra.PLANE_STRAIN_VOIGT, 6 + algebra.PLANE_VECTOR, 9 + algebra.PLANE_VECTOR])


# --- kinematic remanent strain and piezoelectric tensor ---------------------


def remanent_strain(P, params: MaterialParams) -> np.ndarray:
    """Sⁱ(P) = S0/(2 P0²) (3 P⊗P - |P|² I) as a 3-D engineering Voigt vector."""
    P = _embed_vector(P)
    if not params.model.remanent_strain:
        return np.zeros(P.shape[:-1] + (6,))
    s = np.sum(P * P, axis=-1)
    k = params.S0 / (2.0 * params.P0**2)
    return k * (3.0 * algebra.outer_voigt(P) - s[..., None] * IV)


def _w_vector(P, params: MaterialParams):
    """Row vector w(P) with d(P) = P ⊗ w(P) in 3x6 Voigt form.

    At P = 0 the direction-dependent part is dropped (its contribution
    carries an extra power of |P|).
    """
    s = np.sum(P * P, axis=-1)
    nz = s > 0.0
    s_safe = np.where(nz, s, 1.0)
    a = (params.d33 - params.d31) * nz
    m = algebra.outer_voigt(P)
    w = ((a / s_safe)[..., None] * m + params.d31 * IV) / params.P0
    return w, m, s, s_safe, a


def piezo_tensor(P, params: MaterialParams) -> np.ndarray:
    """Piezoelectric d(P) as a 3x6 matrix (rows: field direction, columns: strain Voigt slots)."""
    P = _embed_vector(P)
    w, *_ = _w_vector(P, params)
    return P[..., :, None] * w[..., None, :]


# --- irreversible energy ----------------------------------------------------


def _check_saturation(u, params: MaterialParams):
    if params.model.law is Law.SATURATING and np.any(u >= 1.0 - SATURATION_MARGIN):
        raise SaturationReached()


def _saturating_force(u, params: MaterialParams):
    """Magnitude f(|P|) of the saturating hardening force and f'(|P|); u = |P|/P0."""
    m = params.m
    lo = np.expm1((1.0 - m) * np.log1p(-u))
    hi = np.expm1((1.0 - m) * np.log1p(u))
    f = params.H0 * params.P0 / (2.0 * (m - 1.0)) * (lo - hi)
    fprime = 0.5 * params.H0 * ((1.0 - u) ** (-m) + (1.0 + u) ** (-m))
    return f, fprime


def _phi_pow(x, k):
    # (x**k - 1)/k with the k -> 0 limit log(x)
    if abs(k) < 1e-12:
        return np.log(x)
    return np.expm1(k * np.log(x)) / k


def psi_irreversible(P, params: MaterialParams) -> np.ndarray:
    P = _embed_vector(P)
    s = np.sum(P * P, axis=-1)
    if params.model.law is Law.QUADRATIC:
        return params.H0 * s
    u = np.sqrt(s) / params.P0
    _check_saturation(u, params)
    k = 2.0 - params.m
    pref = params.H0 * params.P0**2 / (2.0 * (params.m - 1.0))
    return pref * (-_phi_pow(1.0 - u, k) - _phi_pow(1.0 + u, k))


def dpsi_irr(P, params: MaterialParams) -> np.ndarray:
    """Gradient of ψⁱ with respect to P (same shape as ``P``)."""
    P = np.asarray(P, dtype=float)
    if params.model.law is Law.QUADRATIC:
        return 2.0 * params.H0 * P
    p = np.linalg.norm(P, axis=-1)
    u = p / params.P0
    _check_saturation(u, params)
    f, _ = _saturating_force(u, params)
    scale = np.where(p > 0, f / np.where(p > 0, p, 1.0), params.H0)
    return scale[..., None] * P


def d2psi_irr(P, params: MaterialParams) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    dim = P.shape[-1]
    eye = np.eye(dim)
    if params.model.law is Law.QUADRATIC:
        return np.broadcast_to(2.0 * params.H0 * eye, P.shape[:-1] + (dim, dim)).copy()
    p = np.linalg.norm(P, axis=-1)
    u = p / params.P0
    _check_saturation(u, params)
    f, fprime = _saturating_force(u, params)
    nz = p > 0
    p_safe = np.where(nz, p, 1.0)
    f_over_p = np.where(nz, f / p_safe, params.H0)
    n = P / p_safe[..., None]
    nn = n[..., :, None] * n[..., None, :]
    radial = np.where(nz, fprime, params.H0)
    # at the origin n = 0, so the result is H0 I
    return radial[..., None, None] * nn + f_over_p[..., None, None] * (eye - nn)


# --- dissipation ------------------------------------------------------------


def dissipation_density(dP, params: MaterialParams) -> np.ndarray:
    """Unregularized dissipation E0 |ΔP|."""
    return params.E0 * np.linalg.norm(np.asarray(dP, dtype=float), axis=-1)


def regularized_norm(x, eps: float):
    """|x|_ε with its gradient and Hessian."""
    x = np.asarray(x, dtype=float)
    dim = x.shape[-1]
    r = np.linalg.norm(x, axis=-1)
    outer = r >= eps
    r_safe = np.where(outer, r, 1.0)
    value = np.where(outer, r - 0.5 * eps, r * r / (2.0 * eps))
    grad = np.where(outer[..., None], x / r_safe[..., None], x / eps)
    n = x / r_safe[..., None]
    eye = np.eye(dim)
    hess_outer = (eye - n[..., :, None] * n[..., None, :]) / r_safe[..., None, None]
    hess = np.where(outer[..., None, None], hess_outer, eye / eps)
    return value, grad, hess


def regularized_dissipation(dP, params: MaterialParams):
    """E0 |ΔP|_ε: value, gradient and Hessian."""
    value, grad, hess = regularized_norm(dP, params.reg_eps)
    return params.E0 * value, params.E0 * grad, params.E0 * hess


def switching_value(Ehat, params: MaterialParams) -> np.ndarray:
    return np.linalg.norm(np.asarray(Ehat, dtype=float), axis=-1) / params.E0 - 1.0


# --- reversible energy and derivatives --------------------------------------


class _Terms:
    """Intermediate quantities of the energy at a batch of 3-D points."""

    def __init__(self, S, D, P, params: MaterialParams):
        self.params = params
        self.C = params.stiffness
        self.P = P
        self.ks = params.S0 / (2.0 * params.P0**2) if params.model.remanent_strain else 0.0
        self.w, self.m, self.s, self.s_safe, self.a = _w_vector(P, params)
        self.Si = self.ks * (3.0 * self.m - self.s[..., None] * IV)
        self.r = S - self.Si
        self.sig = self.r @ self.C
        self.mu = np.sum(self.m * self.sig, axis=-1)
        self.wsig = np.sum(self.w * self.sig, axis=-1)
        self.v = P * self.wsig[..., None]
        self.E = (D - P - self.v) / params.eps
        self.pE = np.sum(P * self.E, axis=-1)
        self.wC = self.w @ self.C
        self.T = self.sig - self.pE[..., None] * self.wC
        self.sigP = algebra.stress_dot_vector(self.sig, P)
        self.gradg = self.a[..., None] * (
            2.0 * self.sigP / self.s_safe[..., None] - 2.0 * (self.mu / self.s_safe**2)[..., None] * P
        )
        self.TP = algebra.stress_dot_vector(self.T, P)
        self.trT = np.sum(self.T[..., :3], axis=-1)

    def psi_reversible(self):
        return 0.5 * np.sum(self.r * self.sig, axis=-1) + 0.5 * self.params.eps * np.sum(self.E * self.E, axis=-1)

    def grad_P_reversible(self):
        P0 = self.params.P0
        return (
            -self.E
            - self.E * self.wsig[..., None]
            - self.pE[..., None] * self.gradg / P0
            - self.ks * (6.0 * self.TP - 2.0 * self.trT[..., None] * self.P)
        )

    def linearize(self, dS, dD, dP):
        """Directional derivative of the reversible gradient (T, E, ∂ψʳ/∂P)."""
        prm = self.params
        P, s_safe, a = self.P, self.s_safe, self.a
        ds = 2.0 * np.sum(P * dP, axis=-1)
        dm = 2.0 * algebra.outer_voigt(P, dP)
        dSi = self.ks * (3.0 * dm - ds[..., None] * IV)
        dsig = (dS - dSi) @ self.C
        dmu = np.sum(dm * self.sig, axis=-1) + np.sum(self.m * dsig, axis=-1)
        dw = (a / prm.P0)[..., None] * (dm / s_safe[..., None] - self.m * (ds / s_safe**2)[..., None])
        dwsig = np.sum(dw * self.sig, axis=-1) + np.sum(self.w * dsig, axis=-1)
        dv = dP * self.wsig[..., None] + P * dwsig[..., None]
        dE = (dD - dP - dv) / prm.eps
        dpE = np.sum(dP * self.E, axis=-1) + np.sum(P * dE, axis=-1)
        dT = dsig - dpE[..., None] * self.wC - self.pE[..., None] * (dw @ self.C)
        dgradg = a[..., None] * (
            2.0 * algebra.stress_dot_vector(self.sig, dP) / s_safe[..., None]
            + 2.0 * algebra.stress_dot_vector(dsig, P) / s_safe[..., None]
            - 2.0 * self.sigP * (ds / s_safe**2)[..., None]
            - 2.0 * (dmu[..., None] * P + self.mu[..., None] * dP) / (s_safe**2)[..., None]
            + 4.0 * (self.mu * ds / s_safe**3)[..., None] * P
        )
        dTP = algebra.stress_dot_vector(dT, P) + algebra.stress_dot_vector(self.T, dP)
        dtrT = np.sum(dT[..., :3], axis=-1)
        dGP = (
            -dE
            - dE * self.wsig[..., None]
            - self.E * dwsig[..., None]
            - dpE[..., None] * self.gradg / prm.P0
            - self.pE[..., None] * dgradg / prm.P0
            - self.ks * (6.0 * dTP - 2.0 * dtrT[..., None] * P - 2.0 * self.trT[..., None] * dP)
        )
        return dT, dE, dGP


def _split3(x):
    return x[..., :6], x[..., 6:9], x[..., 9:12]


def energy_derivatives(x, params: MaterialParams, dim: int = 3, order: int = 2):
    """Energy density ψ = ψʳ + ψⁱ and its derivatives at stacked points ``x = (S, D, P)``.

    Returns ``(psi, grad)`` for ``order=1`` and ``(psi, grad, hess)`` for
    ``order=2``; the derivatives refer to the free unknowns of ``dim``.
    """
    x = np.asarray(x, dtype=float)
    idx = _free_indices(dim)
    x3 = np.zeros(x.shape[:-1] + (12,))
    x3[..., idx] = x
    S, D, P = _split3(x3)
    P_free = P[..., :dim]
    u = np.linalg.norm(P, axis=-1) / params.P0
    _check_saturation(u, params)
    t = _Terms(S, D, P, params)
    psi = t.psi_reversible() + psi_irreversible(P, params)
    grad3 = np.concatenate([t.T, t.E, t.grad_P_reversible() + dpsi_irr(P, params)], axis=-1)
    grad = grad3[..., idx]
    if order == 1:
        return psi, grad
    n = idx.size
    hess = np.empty(x.shape[:-1] + (n, n))
    Hi = d2psi_irr(P_free, params)
    for col, k in enumerate(idx):
        e = np.zeros(12)
        e[k] = 1.0
        dS, dD, dP = _split3(np.broadcast_to(e, x3.shape))
        dT, dE, dGP = t.linearize(dS, dD, dP)
        hess[..., :, col] = np.concatenate([dT, dE, dGP], axis=-1)[..., idx]
    hess[..., n - dim:, n - dim:] += Hi
    return psi, grad, hess


def psi_reversible(state: PointState, params: MaterialParams) -> np.ndarray:
    S, D, P = _embed_strain(state.S), _embed_vector(state.D), _embed_vector(state.P)
    return _Terms(S, D, P, params).psi_reversible()


def psi_total(state: PointState, params: MaterialParams) -> np.ndarray:
    return psi_reversible(state, params) + psi_irreversible(state.P, params)


def response(state: PointState, params: MaterialParams) -> PointResponse:
    """Stress T = ∂ψ/∂S, field E = ∂ψ/∂D, driving force Ê = -∂ψ/∂P and ψ."""
    dim = state.dim
    psi, grad = energy_derivatives(state.vector(), params, dim, order=1)
    n = algebra.voigt_size(dim)
    return PointResponse(T=grad[..., :n], E=grad[..., n:n + dim], Ehat=-grad[..., n + dim:], psi=psi)


def tangent(state: PointState, params: MaterialParams) -> Tangent:
    dim = state.dim
    _, _, hess = energy_derivatives(state.vector(), params, dim, order=2)
    return Tangent(hess, dim)


def reversible_compound(P, params: MaterialParams, dim: int = 3) -> np.ndarray:
    """Compound (strain, D - P) matrix of the reversible energy at remanent polarization P."""
    P = _embed_vector(P)
    c_e = params.stiffness
    c_d, h, beta = algebra.convert_material_tensors(c_e, piezo_tensor(P, params), params.eps * np.eye(3))
    mat = algebra.compound_matrix(c_d, h, beta)
    if dim == 2:
        keep = np.concatenate([algebra.PLANE_STRAIN_VOIGT, 6 + algebra.PLANE_VECTOR])
        mat = mat[np.ix_(keep, keep)]
    return mat
