import numpy as np
import pytest

from ferrovi import algebra


def test_identity_packs_to_unit_normals():
    np.testing.assert_array_equal(algebra.voigt_pack(np.eye(3)), [1, 1, 1, 0, 0, 0])


@pytest.mark.parametrize("dim", [2, 3])
@pytest.mark.parametrize("kind", ["strain", "stress"])
def test_pack_unpack_round_trip(rng, dim, kind):
    v = rng.normal(size=(5, algebra.voigt_size(dim)))
    np.testing.assert_allclose(algebra.voigt_pack(algebra.voigt_unpack(v, kind), kind), v, rtol=0, atol=1e-15)


def test_double_contraction_of_diagonals():
    assert algebra.double_contraction(np.diag([1.0, 2, 3]), np.diag([4.0, 5, 6])) == pytest.approx(32.0)


@pytest.mark.parametrize("dim", [2, 3])
def test_strain_stress_pairing_preserves_inner_product(rng, dim):
    a = rng.normal(size=(dim, dim))
    b = rng.normal(size=(dim, dim))
    a, b = a + a.T, b + b.T
    lhs = algebra.voigt_pack(a, "strain") @ algebra.voigt_pack(b, "stress")
    assert lhs == pytest.approx(algebra.double_contraction(a, b), rel=1e-13)


def test_bad_sizes_rejected():
    with pytest.raises(ValueError):
        algebra.voigt_unpack(np.zeros(4))
    with pytest.raises(ValueError):
        algebra.voigt_pack(np.zeros((4, 4)))
    with pytest.raises(ValueError):
        algebra.voigt_size(1)


def test_outer_voigt_pairs_with_stress():
    p, q = np.array([1.0, -2.0, 0.5]), np.array([0.3, 0.7, -1.1])
    sigma = np.array([[1.0, 0.2, -0.4], [0.2, 3.0, 0.6], [-0.4, 0.6, -2.0]])
    s = algebra.voigt_pack(sigma, "stress")
    assert algebra.outer_voigt(p, q) @ s == pytest.approx(p @ sigma @ q)
    np.testing.assert_allclose(algebra.stress_dot_vector(s, p), sigma @ p)


def test_uncoupled_conversion():
    c_e = algebra.isotropic_stiffness(3e10, 0.3)
    eps_s = 1.2e-8 * np.eye(3)
    c_d, h, beta = algebra.convert_material_tensors(c_e, np.zeros((3, 6)), eps_s)
    np.testing.assert_array_equal(h, 0.0)
    np.testing.assert_allclose(c_d, c_e)
    np.testing.assert_allclose(beta, np.eye(3) / 1.2e-8, rtol=1e-15)


def test_singular_permittivity_rejected():
    with pytest.raises(ValueError):
        algebra.convert_material_tensors(np.eye(6), np.zeros((3, 6)), np.zeros((3, 3)))


def test_energy_form_matches_field_form(rng):
    c_e = algebra.isotropic_stiffness(3e10, 0.3)
    d = algebra.transversely_isotropic_piezo(-2.1e-10, 4.2e-10)
    eps_s = 1.2e-8 * np.eye(3)
    c_d, h, beta = algebra.convert_material_tensors(c_e, d, eps_s)
    e = d @ c_e
    for _ in range(20):
        S = rng.normal(size=6) * 1e-3
        E = rng.normal(size=3) * 1e6
        # field form: T = cE S - eᵀ E, D = e S + εS E
        T_ref = c_e @ S - e.T @ E
        D = e @ S + eps_s @ E
        T = c_d @ S - h.T @ D
        E_back = -h @ S + beta @ D
        assert np.linalg.norm(T - T_ref) <= 1e-12 * np.linalg.norm(T_ref)
        assert np.linalg.norm(E_back - E) <= 1e-12 * np.linalg.norm(E)


def test_compound_matrix_is_symmetric_positive():
    c_e = algebra.isotropic_stiffness(3e10, 0.3)
    d = algebra.transversely_isotropic_piezo(-2.1e-10, 4.2e-10)
    c_d, h, beta = algebra.convert_material_tensors(c_e, d, 1.2e-8 * np.eye(3))
    k = algebra.compound_matrix(c_d, h, beta)
    assert k.shape == (9, 9)
    assert algebra.spd_min_eigenvalue(k, rtol=1e-10) > 0


def test_spd_min_eigenvalue_examples():
    assert algebra.spd_min_eigenvalue(np.eye(9)) == pytest.approx(1.0)
    assert algebra.spd_min_eigenvalue(np.diag([2.0, 5.0])) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        algebra.spd_min_eigenvalue(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        algebra.spd_min_eigenvalue(np.ones(3))


def test_plane_strain_stiffness_slots():
    c3 = algebra.isotropic_stiffness(1.0, 0.25)
    c2 = algebra.plane_strain_stiffness(c3)
    assert c2.shape == (3, 3)
    assert c2[2, 2] == pytest.approx(c3[5, 5])
    assert c2[0, 1] == pytest.approx(c3[0, 1])
