import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from projgauge.group_core import (
    ClassCoordinates,
    DegenerateOctetError,
    GroupElement,
    GroupKind,
    GroupKindMismatch,
    RepLabel,
    character,
    character_of,
    class_coordinates,
    conjugate_by,
    dimension,
    directional_derivative,
    exp_algebra,
    gell_mann,
    haar_sample,
    identity,
    inverse,
    laplacian_apply,
    laplacian_eigenvalue,
    lie_algebra_basis,
    multiply,
    representations,
    su3_from_octet,
    torus_element,
    unitarity_defect,
)

MATRIX_KINDS = [GroupKind.SU2, GroupKind.SU3]
seeds = st.integers(min_value=0, max_value=2**32 - 1)


def _dist_to_identity(g):
    if g.kind is GroupKind.U1:
        return float(np.max(np.abs(np.angle(np.exp(2j * np.pi * g.data)))))
    return float(np.max(np.abs(g.data - np.eye(g.kind.matrix_size))))


# ---------------------------------------------------------------------------
# arithmetic


@pytest.mark.parametrize("kind", list(GroupKind))
def test_identity_is_neutral(kind, rng):
    g = haar_sample(kind, rng)
    e = identity(kind)
    assert np.allclose(multiply(e, g).data, g.data, atol=1e-15)
    assert np.allclose(multiply(g, e).data, g.data, atol=1e-15)


def test_u1_multiply_adds_mod_one():
    g = multiply(GroupElement("u1", 0.3), GroupElement("u1", 0.9))
    assert g.data == pytest.approx(0.2, abs=1e-15)


def test_u1_inverse():
    assert inverse(GroupElement("u1", 0.25)).data == pytest.approx(0.75)
    assert inverse(identity("u1")).data == 0.0


@pytest.mark.parametrize("kind", list(GroupKind))
def test_inverse_cancels(kind, rng):
    g = haar_sample(kind, rng, 200)
    assert _dist_to_identity(multiply(g, inverse(g))) <= 1e-12
    assert _dist_to_identity(inverse(identity(kind))) == 0.0


def test_kind_mismatch_rejected(rng):
    with pytest.raises(GroupKindMismatch):
        multiply(haar_sample("su2", rng), haar_sample("su3", rng))


def test_bad_payload_shape_rejected():
    with pytest.raises(ValueError):
        GroupElement("su3", np.eye(2))


@pytest.mark.parametrize("kind", MATRIX_KINDS)
def test_haar_samples_are_special_unitary(kind, rng):
    g = haar_sample(kind, rng, 1000)
    assert np.max(unitarity_defect(g)) <= 1e-12


# ---------------------------------------------------------------------------
# Haar measure moments (Schur orthogonality)


N_HAAR = 100_000


def test_haar_u1_first_moment(rng):
    g = haar_sample("u1", rng, N_HAAR)
    assert abs(np.mean(np.exp(2j * np.pi * g.data))) <= 4 / math.sqrt(N_HAAR)


def test_haar_su2_trace_mean(rng):
    g = haar_sample("su2", rng, N_HAAR)
    tr = np.trace(g.data, axis1=-2, axis2=-1)
    assert abs(np.mean(tr)) <= 4 * math.sqrt(2) / math.sqrt(N_HAAR)


def test_haar_su3_trace_second_moment(rng):
    g = haar_sample("su3", rng, N_HAAR)
    sq = np.abs(np.trace(g.data, axis1=-2, axis2=-1)) ** 2
    err = np.std(sq) / math.sqrt(N_HAAR)
    assert abs(np.mean(sq) - 1.0) <= 5 * err


@pytest.mark.parametrize("kind", list(GroupKind))
def test_character_orthogonality_monte_carlo(kind, rng):
    n = N_HAAR
    reps = representations(kind, 6, max_u1=2)
    g = haar_sample(kind, rng, n)
    chis = np.stack([character_of(r, g) for r in reps])
    gram = chis @ np.conj(chis).T / n
    assert np.max(np.abs(gram - np.eye(len(reps)))) <= 5 / math.sqrt(n)


# ---------------------------------------------------------------------------
# class coordinates


def test_su2_class_coordinates_examples():
    assert class_coordinates(identity("su2")).values == 0.0
    x = class_coordinates(GroupElement("su2", np.diag([1j, -1j]))).values
    assert x == pytest.approx(0.5, abs=1e-15)


def test_su3_identity_class_coordinates():
    assert np.allclose(class_coordinates(identity("su3")).values, [0.0, 0.0], atol=1e-15)


@pytest.mark.parametrize("kind", MATRIX_KINDS)
def test_torus_element_round_trip(kind, rng):
    c = class_coordinates(haar_sample(kind, rng, 100))
    back = class_coordinates(torus_element(c))
    assert np.allclose(back.values, c.values, atol=1e-10)


@pytest.mark.parametrize("kind", list(GroupKind))
def test_class_coordinates_conjugation_invariant_bulk(kind, rng):
    g = haar_sample(kind, rng, 1000)
    h = haar_sample(kind, rng, 1000)
    a = class_coordinates(g).values
    b = class_coordinates(conjugate_by(h, g)).values
    if kind is GroupKind.U1:
        diff = np.abs(np.angle(np.exp(2j * np.pi * (a - b))))
    else:
        diff = np.abs(a - b)
    assert np.max(diff) <= 1e-10


@settings(max_examples=50, deadline=None)
@given(seed=seeds)
def test_su3_conjugation_invariance_property(seed):
    rng = np.random.default_rng(seed)
    g, h = haar_sample("su3", rng), haar_sample("su3", rng)
    assert np.allclose(class_coordinates(conjugate_by(h, g)).values, class_coordinates(g).values, atol=1e-10)


# ---------------------------------------------------------------------------
# characters, dimensions, eigenvalues


def test_character_examples():
    su2 = lambda x: ClassCoordinates("su2", x)
    assert character(RepLabel.su2(0.5), su2(0.0)) == pytest.approx(2.0)
    assert character(RepLabel.su2(1), su2(0.5)) == pytest.approx(-1.0, abs=1e-14)
    assert character(RepLabel.su3(2, 1), class_coordinates(identity("su3"))) == pytest.approx(3.0)


def test_su2_character_limits_at_walls():
    for twice in range(8):
        rep = RepLabel("su2", (twice,))
        at_one = character(rep, ClassCoordinates("su2", 1.0))
        assert at_one == pytest.approx((twice + 1) * (-1) ** twice, abs=1e-12)
        near = character(rep, ClassCoordinates("su2", 1e-9))
        assert np.isfinite(near) and near == pytest.approx(twice + 1, rel=1e-10)


def test_characters_match_trace_identities(rng):
    # chi_fund = Tr g, chi_1 = |Tr g|^2 - 1 (SU2), adjoint = |Tr g|^2 - 1 (SU3)
    g2 = haar_sample("su2", rng, 500)
    t2 = np.trace(g2.data, axis1=-2, axis2=-1)
    assert np.allclose(character_of(RepLabel.su2(0.5), g2), t2, atol=1e-12)
    assert np.allclose(character_of(RepLabel.su2(1), g2), np.abs(t2) ** 2 - 1, atol=1e-12)
    g3 = haar_sample("su3", rng, 500)
    t3 = np.trace(g3.data, axis1=-2, axis2=-1)
    assert np.allclose(character_of(RepLabel.su3(2, 1), g3), t3, atol=1e-12)
    assert np.allclose(character_of(RepLabel.su3(1, 2), g3), np.conj(t3), atol=1e-12)
    assert np.allclose(character_of(RepLabel.su3(2, 2), g3), np.abs(t3) ** 2 - 1, atol=1e-12)


def test_su3_character_finite_at_degenerate_phases():
    # two equal eigenphases: no 0/0 anywhere
    c = ClassCoordinates("su3", np.array([[0.7, 0.7], [0.0, 0.0], [2 * np.pi / 3, 2 * np.pi / 3]]))
    for rep in representations("su3", 15):
        vals = character(rep, c)
        assert np.all(np.isfinite(vals))
        assert vals[1] == pytest.approx(dimension(rep))


def test_dimensions():
    assert dimension(RepLabel.su2(0.5)) == 2
    assert dimension(RepLabel.su3(1, 1)) == 1
    assert dimension(RepLabel.su3(2, 2)) == 8
    assert dimension(RepLabel.su3(3, 1)) == 6


def test_laplacian_eigenvalues():
    assert laplacian_eigenvalue(RepLabel.su2(0.5)) == pytest.approx(3 / 8)
    assert laplacian_eigenvalue(RepLabel.su3(2, 1)) == pytest.approx(4 / 3)
    assert laplacian_eigenvalue(RepLabel.su3(1, 1)) == 0.0
    assert laplacian_eigenvalue(RepLabel.u1(2)) == pytest.approx(16 * math.pi**2)


def test_rep_label_validation():
    with pytest.raises(ValueError):
        RepLabel.su2(0.25)
    with pytest.raises(ValueError):
        RepLabel.su3(0, 1)
    assert RepLabel.trivial("su3") == RepLabel.su3(1, 1)


def test_representations_respect_dimension_bound():
    reps = representations("su3", 10)
    assert {r.value for r in reps} == {(1, 1), (2, 1), (1, 2), (3, 1), (1, 3), (2, 2), (4, 1), (1, 4)}
    assert all(dimension(r) <= 10 for r in representations("su2", 10))


# ---------------------------------------------------------------------------
# Lie algebra and Laplacian


@pytest.mark.parametrize("kind", list(GroupKind))
def test_lie_basis_is_orthonormal(kind):
    assert np.allclose(lie_algebra_basis(kind).gram(), np.eye(kind.algebra_dim), atol=1e-14)


@pytest.mark.parametrize("kind", MATRIX_KINDS)
def test_exp_algebra_matches_expm(kind, rng):
    basis = lie_algebra_basis(kind)
    for _ in range(5):
        coeffs = rng.standard_normal(kind.algebra_dim)
        x = np.einsum("a,aij->ij", coeffs, basis.generators)
        assert np.allclose(exp_algebra(kind, coeffs).data, scipy.linalg.expm(x), atol=1e-12)


def test_directional_derivative_constant_and_even():
    one = lambda g: np.ones(g.batch_shape)
    g = identity("su2")
    assert directional_derivative(one, 0, g) == 0.0
    cos = lambda g: np.cos(2 * np.pi * g.data)
    assert abs(directional_derivative(cos, 0, identity("u1"))) <= 1e-12


def test_su2_directional_derivative_analytic(rng):
    # d/dt Tr(exp(t xi_a) g) at t = 0 is Tr(xi_a g)
    basis = lie_algebra_basis("su2").generators
    g = haar_sample("su2", rng)
    f = lambda h: np.real(np.trace(h.data, axis1=-2, axis2=-1))
    for a in range(3):
        analytic = np.real(np.trace(basis[a] @ g.data))
        assert directional_derivative(f, a, g, h=1e-4) == pytest.approx(analytic, abs=1e-6)


def test_laplacian_of_constant_is_zero(rng):
    one = lambda g: np.ones(g.batch_shape)
    for kind in GroupKind:
        assert laplacian_apply(one, haar_sample(kind, rng)) == 0.0


def test_laplacian_su2_fundamental(rng):
    rep = RepLabel.su2(0.5)
    for g in haar_sample("su2", rng, 20):
        chi = character_of(rep, g)
        got = laplacian_apply(lambda h: character_of(rep, h), g, h=1e-3)
        assert abs(got + 3 / 8 * chi) <= 1e-3 * max(abs(chi), 1e-2) + 1e-6


def test_laplacian_su3_fundamental_at_identity():
    rep = RepLabel.su3(2, 1)
    got = laplacian_apply(lambda h: character_of(rep, h), identity("su3"), h=1e-3)
    assert got == pytest.approx(-4 / 3 * 3, rel=1e-3)


def test_laplacian_rejects_bad_step():
    with pytest.raises(ValueError):
        laplacian_apply(lambda g: 1.0, identity("u1"), h=0.0)


# ---------------------------------------------------------------------------
# octet parametrization


def _octet_with_i2(rng, lo=0.1, hi=4.0):
    a = rng.standard_normal(8)
    return a / np.linalg.norm(a) * math.sqrt(rng.uniform(lo, hi))


def test_octet_unitarity_bulk(rng):
    lam = gell_mann()
    worst_u, worst_det, worst_expm = 0.0, 0.0, 0.0
    for _ in range(1000):
        a = _octet_with_i2(rng)
        u = su3_from_octet(a).data
        worst_u = max(worst_u, np.max(np.abs(u.conj().T @ u - np.eye(3))))
        worst_det = max(worst_det, abs(np.linalg.det(u) - 1))
        ref = scipy.linalg.expm(1j * np.einsum("k,kij->ij", a, lam))
        worst_expm = max(worst_expm, np.max(np.abs(u - ref)))
    assert worst_u <= 1e-10 and worst_det <= 1e-10
    assert worst_expm <= 1e-9


def test_octet_linearization():
    lam3 = gell_mann()[2]
    for eps in (1e-2, 1e-3):
        a = np.zeros(8)
        a[2] = eps
        err = np.max(np.abs(su3_from_octet(a).data - (np.eye(3) + 1j * eps * lam3)))
        assert err <= eps**2


def test_octet_degenerate_rejected():
    # a along lambda_8 has a doubly degenerate spectrum
    a = np.zeros(8)
    a[7] = 0.5
    with pytest.raises(DegenerateOctetError, match="phi_"):
        su3_from_octet(a)


@settings(max_examples=50, deadline=None)
@given(seed=seeds)
def test_octet_output_is_group_element(seed):
    rng = np.random.default_rng(seed)
    u = su3_from_octet(_octet_with_i2(rng))
    assert unitarity_defect(u) <= 1e-10
