import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from projgauge.group_core import ClassCoordinates, GroupKind, RepLabel, class_coordinates, dimension, haar_sample
from projgauge.heat_kernel import (
    KernelParams,
    SeriesTruncationError,
    calibration_constant,
    class_angle_law,
    class_density,
    gaussian_limit,
    heat_kernel,
    k1_series,
    k1_theta,
    k2_series,
    k2_series_precise,
    k2_theta,
    k3,
    k3_literal_exponent,
    k3_series,
    kernel_normalization,
    kernel_series,
    log_heat_kernel,
    su2_class_cdf,
    su3_weyl_s,
)

# (4 pi beta)^-1/2 sum_{|n| <= 4} exp(-(0.5 + n)^2 / (4 beta)) at beta = 0.1
K1_HALF_BETA_0_1 = 0.9614076714629987


def _image_sum(theta, beta, n=4):
    k = np.arange(-n, n + 1)
    return float(np.sum(np.exp(-((theta + k) ** 2) / (4 * beta))) / math.sqrt(4 * math.pi * beta))


def _su3_identity_sum(beta, cutoff=60):
    total = 0.0
    for p in range(1, cutoff):
        for q in range(1, cutoff):
            d = p * q * (p + q) / 2
            c = (p * p + q * q + p * q) / 3 - 1
            total += d * d * math.exp(-c * beta)
    return total


# ---------------------------------------------------------------------------
# U1


def test_k1_series_at_identity_beta_one():
    assert k1_series(0.0, 1.0) == pytest.approx(1 + 2 * math.exp(-4 * math.pi**2), abs=1e-12)


def test_k1_both_forms_match_independent_image_sum():
    assert _image_sum(0.5, 0.1) == pytest.approx(K1_HALF_BETA_0_1, abs=1e-15)
    assert k1_series(0.5, 0.1) == pytest.approx(K1_HALF_BETA_0_1, abs=1e-12)
    assert k1_theta(0.5, 0.1) == pytest.approx(K1_HALF_BETA_0_1, abs=1e-12)


def test_k1_flat_at_large_beta():
    theta = np.linspace(0, 1, 21, endpoint=False)
    assert np.max(np.abs(k1_theta(theta, 5.0) - 1)) <= 1e-10


def test_k1_concentrated_at_small_beta():
    assert k1_theta(0.0, 0.001) == pytest.approx((4 * math.pi * 0.001) ** -0.5, rel=1e-15)
    assert k1_theta(0.0, 0.001) == pytest.approx(8.9206, abs=1e-4)


def test_k1_series_integrates_to_one():
    theta = np.arange(512) / 512
    for beta in (0.01, 0.1, 1.0):
        assert np.mean(k1_series(theta, beta)) == pytest.approx(1.0, abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(theta=st.floats(0, 1, exclude_max=True), beta=st.floats(0.05, 2.0))
def test_k1_dual_forms_agree(theta, beta):
    assert k1_series(theta, beta) == pytest.approx(k1_theta(theta, beta), abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(theta=st.floats(0, 1, exclude_max=True), beta=st.floats(1e-3, 5.0))
def test_u1_log_kernel_matches_log_of_kernel(theta, beta):
    assert log_heat_kernel("u1", theta, beta) == pytest.approx(math.log(heat_kernel("u1", theta, beta)), abs=1e-10)


def test_domain_errors():
    with pytest.raises(ValueError):
        k1_series(0.1, 0.0)
    with pytest.raises(ValueError):
        k2_theta(0.1, -1.0)
    with pytest.raises(ValueError):
        KernelParams(float("nan"))


def test_series_truncation_error():
    with pytest.raises(SeriesTruncationError):
        k3_series(0.1, 0.2, KernelParams(1e-4, max_terms=100))


# ---------------------------------------------------------------------------
# SU2


def _su2_identity_sum(beta):
    j = np.arange(1, 80)
    return float(np.sum(j * j * np.exp(-(j * j - 1) * beta / 8)))


def test_k2_trivial_rep_dominates_at_large_beta():
    # at beta = 10 the lam = 1/2 term still contributes 4 e^{-15/4} ~ 0.094
    assert k2_series(0.0, 10.0) == pytest.approx(_su2_identity_sum(10.0), rel=1e-12)
    assert k2_series(0.0, 40.0) == pytest.approx(1.0, abs=1e-4)


def test_k2_forms_agree_at_example_point():
    assert k2_series(0.3, 0.2) == pytest.approx(k2_theta(0.3, 0.2) / calibration_constant("su2"), rel=1e-10)


def test_k2_ratio_constant_over_grid():
    x = np.round(np.arange(0.1, 0.95, 0.1), 12)
    ratios = np.concatenate([k2_series_precise(x, b) / k2_theta(x, b) for b in (0.05, 0.1, 0.2, 0.5, 1.0)])
    assert np.std(ratios) / np.mean(ratios) <= 1e-8
    assert calibration_constant("su2") == pytest.approx(1.0, abs=1e-6)


def test_k2_leading_image_dominates_at_small_beta():
    beta, x = 0.005, 0.02
    term = lambda n: abs(x + 2 * n) * math.exp(-2 * math.pi**2 * (x + 2 * n) ** 2 / beta)
    assert term(0) > 1e10 * max(term(1), term(-1))


def test_k2_theta_finite_at_identity():
    near = k2_theta(1e-12, 0.1)
    at = k2_theta(0.0, 0.1)
    assert np.isfinite(at) and at == pytest.approx(near, rel=1e-9)


def test_k2_series_endpoints():
    # ratio -> (2 lam + 1) at x = 0 and (2 lam + 1)(-1)^(2 lam) at x = 1
    beta = 0.7
    j = np.arange(1, 60)
    w = j * np.exp(-(j**2 - 1) * beta / 8)
    assert k2_series(0.0, beta) == pytest.approx(np.sum(w * j), rel=1e-12)
    assert k2_series(1.0, beta) == pytest.approx(np.sum(w * j * (-1.0) ** (j - 1)), rel=1e-10, abs=1e-14)


def test_su2_class_measure_matches_haar_histogram(rng):
    x = class_coordinates(haar_sample("su2", rng, 100_000)).values
    edges = np.linspace(0, 1, 11)
    counts, _ = np.histogram(x, edges)
    expected = np.diff(su2_class_cdf(edges)) * x.size
    assert np.max(np.abs(counts - expected) / np.sqrt(expected)) <= 5


# ---------------------------------------------------------------------------
# SU3


def test_k3_series_identity_sum():
    beta = 1.0
    got = k3_series(0.0, 0.0, beta)
    assert got == pytest.approx(_su3_identity_sum(beta), rel=1e-12)
    leading = 1 + 2 * 9 * math.exp(-4 * beta / 3)
    assert got > leading


def test_k3_flat_at_large_beta(rng):
    t = rng.uniform(-math.pi, math.pi, (50, 2))
    assert np.max(np.abs(k3_series(t[:, 0], t[:, 1], 20.0) - 1)) <= 1e-8


def test_k3_ratio_constant_over_interior_grid():
    t1, t2 = np.meshgrid(np.linspace(0.5, 2.1, 5), np.linspace(-1.9, -0.3, 5), indexing="ij")
    ratios = np.concatenate([(k3(t1, t2, b) / k3_series(t1, t2, b)).ravel() for b in (0.3, 0.6)])
    assert np.std(ratios) / np.mean(ratios) <= 1e-6
    assert calibration_constant("su3") == pytest.approx(1.0, abs=1e-6)


@settings(max_examples=50, deadline=None)
@given(t1=st.floats(-3.0, 3.0), t2=st.floats(-3.0, 3.0), beta=st.sampled_from([0.05, 0.2, 0.4, 1.0]))
def test_k3_weyl_symmetry(t1, t2, beta):
    a, b = k3(t1, t2, beta), k3(t2, t1, beta)
    assert a == pytest.approx(b, rel=1e-10, abs=1e-12)
    # third eigenphase permutation
    c = k3(t1, -t1 - t2, beta)
    assert a == pytest.approx(c, rel=1e-8, abs=1e-12)


def test_k3_small_beta_gaussian_shape():
    beta = 0.01
    t1 = np.array([0.03, -0.01, 0.05, 0.0, 0.02])
    t2 = np.array([-0.02, 0.04, 0.01, 0.001, 0.02])
    coords = np.stack([t1, t2], axis=-1)
    rel = np.abs(k3(t1, t2, beta) / gaussian_limit("su3", coords, beta) - 1)
    assert np.max(rel) <= 1e-3


def test_k3_literal_exponent_is_not_the_kernel():
    # exponent Q / (2 beta) disagrees with the series by a non-constant factor
    t1, t2 = np.array([0.5, 1.3]), np.array([-0.4, -1.1])
    ratio = k3_literal_exponent(t1, t2, 0.3) / k3_series(t1, t2, 0.3)
    assert abs(ratio[0] / ratio[1] - 1) > 1e-2


def test_k3_at_walls_matches_series():
    beta = 0.6
    pts = np.array([[0.7, 0.7], [1.0, -2.0], [0.0, 0.0], [2 * math.pi / 3, 2 * math.pi / 3], [0.4, -0.2]])
    assert np.max(np.abs(su3_weyl_s(pts[:4, 0], pts[:4, 1]))) < 1e-8
    got = k3(pts[:, 0], pts[:, 1], beta)
    ref = k3_series(pts[:, 0], pts[:, 1], beta)
    assert np.allclose(got, ref, rtol=1e-7)


def test_k3_walls_positive_at_small_beta():
    t = np.linspace(-math.pi, math.pi, 41)
    vals = k3(t, t, 0.05)
    assert np.all(vals > 0)
    assert np.all(np.isfinite(log_heat_kernel("su3", np.stack([t, t], axis=-1), 0.05)))


def test_su3_haar_average_of_series(rng):
    n = 100_000
    c = class_coordinates(haar_sample("su3", rng, n)).values
    vals = k3_series(c[:, 0], c[:, 1], 0.5)
    assert abs(np.mean(vals) - 1) <= 5 / math.sqrt(n)


# ---------------------------------------------------------------------------
# dispatch, limits, normalization


def test_branch_agreement_at_crossover():
    assert heat_kernel("u1", 0.2, 0.4, beta_cross=1.0) == pytest.approx(heat_kernel("u1", 0.2, 0.4, beta_cross=0.1),
                                                                        abs=1e-10)
    a = heat_kernel("su2", 0.5, 0.5, beta_cross=1.0)
    b = heat_kernel("su2", 0.5, 0.5, beta_cross=0.1)
    assert a == pytest.approx(b, rel=1e-8)


def test_identity_values_at_beta_ten():
    assert heat_kernel("u1", 0.0, 10.0) == pytest.approx(1.0, abs=1e-12)
    assert heat_kernel("su2", 0.0, 10.0) == pytest.approx(_su2_identity_sum(10.0), rel=1e-12)
    assert heat_kernel("su3", np.array([0.0, 0.0]), 10.0) == pytest.approx(_su3_identity_sum(10.0), rel=1e-12)
    assert heat_kernel("su3", np.array([0.0, 0.0]), 10.0) == pytest.approx(1.0, abs=1e-4)


@pytest.mark.parametrize("kind", ["u1", "su2"])
def test_gaussian_limit_near_identity(kind):
    beta = 0.01
    pts = np.linspace(0, 0.1, 21) if kind == "su2" else np.mod(np.linspace(-0.1, 0.1, 21), 1.0)
    exact = heat_kernel(kind, pts, beta)
    assert np.max(np.abs(exact - gaussian_limit(kind, pts, beta)) / exact) <= 1e-6


@pytest.mark.parametrize("kind", ["u1", "su2"])
def test_gaussian_limit_maximal_at_identity(kind):
    pts = np.linspace(0, 1, 201)
    vals = gaussian_limit(kind, pts, 0.02)
    assert np.argmax(vals) == 0


@pytest.mark.parametrize("kind", ["u1", "su2", "su3"])
def test_kernel_positive_on_grids(kind):
    if kind == "su3":
        t = np.linspace(-math.pi, math.pi, 33)
        a, b = np.meshgrid(t, t)
        pts = np.stack([a.ravel(), b.ravel()], axis=-1)
        betas = (0.05, 0.3, 1.0)
    else:
        pts = np.linspace(0, 1, 201)
        betas = (0.001, 0.01, 0.1, 0.5, 2.0)
    for beta in betas:
        logs = log_heat_kernel(kind, pts, beta)
        assert np.all(np.isfinite(logs))
        # where the value is representable in double precision it must be positive
        vals = heat_kernel(kind, pts, beta)
        assert np.all(vals[logs > -700] > 0)


@pytest.mark.parametrize("kind", ["u1", "su2"])
@pytest.mark.parametrize("beta", [0.01, 0.1, 0.5, 2.0])
def test_normalization_quadrature(kind, beta):
    assert kernel_normalization(kind, beta) == pytest.approx(1.0, abs=1e-8)


def test_su3_normalization_quadrature():
    assert kernel_normalization("su3", 0.6) == pytest.approx(1.0, abs=1e-8)


def test_su3_class_density_integrates_to_one():
    n = 256
    ang = -math.pi + 2 * math.pi * np.arange(n) / n
    a, b = np.meshgrid(ang, ang)
    w = class_density("su3", np.stack([a, b], axis=-1)) * (2 * math.pi / n) ** 2
    assert np.sum(w) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("kind,point", [("u1", 0.0), ("su2", 0.0), ("su3", [0.0, 0.0])])
def test_identity_value_nonincreasing_in_beta(kind, point):
    betas = np.geomspace(0.01, 5, 20)
    vals = [float(heat_kernel(kind, np.array(point), b)) for b in betas]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("kind", ["u1", "su2", "su3"])
def test_semigroup_in_coefficient_space(kind):
    beta = 0.3
    once = kernel_series(kind, beta)
    twice = once.convolve(once)
    direct = kernel_series(kind, 2 * beta)
    for rep, value in direct.coefficients.items():
        assert twice.coefficients[rep] == pytest.approx(value, rel=1e-14)
        assert value == pytest.approx(dimension(rep) * math.exp(-2 * beta * _c(rep)), rel=1e-14)


def _c(rep: RepLabel) -> float:
    if rep.kind is GroupKind.U1:
        return (2 * math.pi * rep.value[0]) ** 2
    if rep.kind is GroupKind.SU2:
        lam = rep.value[0] / 2
        return lam * (lam + 1) / 2
    p, q = rep.value
    return (p * p + q * q + p * q) / 3 - 1


def test_series_evaluation_matches_kernel():
    c = ClassCoordinates("su2", np.linspace(0, 1, 11))
    assert np.allclose(kernel_series("su2", 0.7).evaluate(c).real, heat_kernel("su2", c, 0.7), rtol=1e-12)


def test_class_angle_law_cdf_monotone_and_normalized(rng):
    law = class_angle_law("su2", 0.3)
    assert law.cdf_values[0] == 0.0 and law.cdf_values[-1] == pytest.approx(1.0)
    assert np.all(np.diff(law.cdf_values) >= 0)
    s = law.sample(rng, 1000)
    assert np.all((s >= 0) & (s <= 1))
