import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from projgauge.group_core import ClassCoordinates, GroupElement, GroupKind, RepLabel, class_coordinates, haar_sample, \
    identity, inverse, multiply, representations
from projgauge.heat_kernel import CharacterSeries, heat_kernel, kernel_series
from projgauge.hida_calculus import (
    MonteCarloEstimate,
    PointMasses,
    ProductDistribution,
    SeriesDistribution,
    TestFunction,
    combine,
    constant_one,
    e_x,
    kernel_pairing,
    metric_d,
    norm_t,
    p1,
    s_transform,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def random_function(kind, rng, labels=5, scale=1.0):
    reps = representations(kind, 10)
    pick = rng.choice(len(reps), size=min(labels, len(reps)), replace=False)
    return TestFunction(kind, {reps[i]: scale * complex(*rng.standard_normal(2)) for i in pick})


# ---------------------------------------------------------------------------
# norms and metric


def test_norm_at_t_one_is_l2(rng):
    f = random_function("su3", rng)
    l2 = math.sqrt(sum(abs(v) ** 2 for v in f.coefficients.values()))
    assert norm_t(f, 1) == pytest.approx(l2, rel=1e-15)


def test_norm_single_coefficient():
    c = 0.7 - 0.2j
    f = TestFunction("su2", {RepLabel.su2(0.5): c})
    assert norm_t(f, 2) == pytest.approx(abs(c) * math.exp(3 / 32), rel=1e-15)


def test_norm_rejects_small_index():
    with pytest.raises(ValueError):
        norm_t(TestFunction("u1", {}), 0.5)


def test_zero_function_norm():
    assert norm_t(TestFunction("su3", {}), 7) == 0.0


def test_norm_overflow_reports_infinity():
    f = TestFunction("u1", {RepLabel.u1(20): 1.0})
    assert norm_t(f, 40) == math.inf
    assert metric_d(f, TestFunction("u1", {})) < 1


@settings(max_examples=50, deadline=None)
@given(seed=seeds, kind=st.sampled_from(list(GroupKind)))
def test_norm_nondecreasing_in_t(seed, kind):
    f = random_function(kind, np.random.default_rng(seed))
    ts = [1, 1.2, 2, 3.5, 8, 40]
    norms = [norm_t(f, t) for t in ts]
    assert all(b >= a for a, b in zip(norms, norms[1:]))


@settings(max_examples=50, deadline=None)
@given(seed=seeds, kind=st.sampled_from(list(GroupKind)), t=st.floats(1, 20), a=st.complex_numbers(max_magnitude=10))
def test_norm_homogeneous_and_subadditive(seed, kind, t, a):
    rng = np.random.default_rng(seed)
    f, g = random_function(kind, rng), random_function(kind, rng)
    assert norm_t(f.scale(a), t) == pytest.approx(abs(a) * norm_t(f, t), rel=1e-12, abs=1e-300)
    assert norm_t(f + g, t) <= norm_t(f, t) + norm_t(g, t) + 1e-12 * (norm_t(f, t) + norm_t(g, t))


@settings(max_examples=50, deadline=None)
@given(seed=seeds, kind=st.sampled_from(list(GroupKind)))
def test_metric_axioms(seed, kind):
    rng = np.random.default_rng(seed)
    f, g, h = (random_function(kind, rng, scale=0.1) for _ in range(3))
    assert metric_d(f, f) == 0.0
    assert 0 < metric_d(f, g) < 1
    assert metric_d(f, g) == pytest.approx(metric_d(g, f), rel=1e-14)
    assert metric_d(f, h) <= metric_d(f, g) + metric_d(g, h) + 1e-15


# ---------------------------------------------------------------------------
# test functions and e_x


def test_test_function_evaluation_divides_by_p1():
    c = ClassCoordinates("u1", np.linspace(0, 0.9, 10))
    f = TestFunction("u1", {RepLabel.u1(1): 2.0})
    expected = 2 * np.exp(2j * np.pi * c.values) / heat_kernel("u1", c, 1.0)
    assert np.allclose(f.evaluate(c), expected, rtol=1e-14)


def test_constant_one_evaluates_to_one():
    for kind in GroupKind:
        c = ClassCoordinates(kind, np.zeros((5, 2)) + 0.3 if kind is GroupKind.SU3 else np.linspace(0, 0.9, 5))
        assert np.allclose(constant_one(kind).evaluate(c), 1.0, atol=1e-12)


def test_e_x_at_identity_is_one(rng):
    for kind in GroupKind:
        y = haar_sample(kind, rng, 20)
        x = identity(kind, (20,))
        assert np.all(e_x(x, y) == 1.0)


def test_e_x_u1_example():
    x = y = GroupElement("u1", 0.3)
    assert e_x(x, y) == pytest.approx(heat_kernel("u1", 0.0, 1.0) / heat_kernel("u1", 0.3, 1.0), rel=1e-15)


def test_e_x_haar_average_u1():
    n = 1024
    y = GroupElement("u1", np.arange(n) / n)
    x = GroupElement("u1", np.full(n, 0.37))
    vals = e_x(x, y) * p1(class_coordinates(y))
    assert np.mean(vals) == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------------------
# point masses and the S-transform


def test_s_transform_of_identity_mass(rng):
    for kind in GroupKind:
        delta = PointMasses(identity(kind, (1,)), [1.0])
        x = haar_sample(kind, rng)
        expected = p1(class_coordinates(inverse(x))) / p1(class_coordinates(identity(kind)))
        assert s_transform(delta, x) == pytest.approx(complex(expected), rel=1e-12)
        assert s_transform(delta, identity(kind)) == pytest.approx(1.0, rel=1e-15)


def test_point_mass_pairing_with_constant_one(rng):
    w = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    phi = PointMasses(haar_sample("su2", rng, 4), w)
    assert phi.pair(constant_one("su2")) == pytest.approx(np.sum(w), rel=1e-10)
    assert phi.total_mass() == pytest.approx(np.sum(w))


@settings(max_examples=30, deadline=None)
@given(seed=seeds, kind=st.sampled_from(list(GroupKind)), a=st.complex_numbers(max_magnitude=5),
       b=st.complex_numbers(max_magnitude=5))
def test_s_transform_linear(seed, kind, a, b):
    rng = np.random.default_rng(seed)
    phi1 = PointMasses(haar_sample(kind, rng, 3), rng.standard_normal(3))
    phi2 = PointMasses(haar_sample(kind, rng, 2), rng.standard_normal(2))
    x = haar_sample(kind, rng)
    lhs = s_transform(combine(phi1, phi2, a, b), x)
    rhs = a * s_transform(phi1, x) + b * s_transform(phi2, x)
    assert abs(lhs - rhs) <= 1e-10 * (1 + abs(rhs))


def test_s_transform_separates_distinct_point_masses():
    phi1 = PointMasses(GroupElement("u1", [0.1, 0.4, 0.8]), [1.0, 2.0, -1.0])
    phi2 = PointMasses(GroupElement("u1", [0.1, 0.45, 0.8]), [1.0, 2.5, -1.0])
    grid = np.arange(32) / 32
    diff = [abs(s_transform(phi1, GroupElement("u1", x)) - s_transform(phi2, GroupElement("u1", x))) for x in grid]
    assert max(diff) > 0


def test_u1_p1_is_flat_in_double_precision():
    # p1 - 1 is at most 2 e^{-4 pi^2} ~ 7e-18, below machine epsilon, so e_x == 1 on U1
    y = GroupElement("u1", np.arange(32) / 32)
    assert np.all(e_x(GroupElement("u1", np.full(32, 0.3)), y) == 1.0)


def test_s_transform_separates_equal_mass_point_masses_su2(rng):
    pts = haar_sample("su2", rng, 3)
    moved = GroupElement("su2", pts.data.copy())
    moved.data[1] = haar_sample("su2", rng).data
    w = [1.0, 2.0, -1.0]
    xs = haar_sample("su2", rng, 32)
    diff = [abs(s_transform(PointMasses(pts, w), x) - s_transform(PointMasses(moved, w), x)) for x in xs]
    assert max(diff) > 1e-3


def test_s_transform_series_u1_against_direct_trapezoid():
    beta, x = 0.3, 0.21
    phi = SeriesDistribution(kernel_series("u1", beta))
    n = 4096
    y = np.arange(n) / n
    direct = np.mean(heat_kernel("u1", y, beta) * heat_kernel("u1", np.mod(y - x, 1), 1.0) / heat_kernel("u1", y, 1.0))
    assert s_transform(phi, GroupElement("u1", x)) == pytest.approx(direct, rel=1e-10)


def test_s_transform_series_su2_against_monte_carlo(rng):
    phi = SeriesDistribution(kernel_series("su2", 0.5))
    x = haar_sample("su2", rng)
    got = s_transform(phi, x)
    n = 200_000
    y = haar_sample("su2", rng, n)
    vals = heat_kernel("su2", class_coordinates(y), 0.5) * e_x(GroupElement("su2", np.broadcast_to(x.data, (n, 2, 2))), y)
    assert abs(got - np.mean(vals)) <= 5 * np.std(vals) / math.sqrt(n)


def test_s_transform_series_su3_is_monte_carlo(rng):
    phi = SeriesDistribution(CharacterSeries("su3", {RepLabel.trivial("su3"): 1.0}))
    est = s_transform(phi, identity("su3"), rng=rng, samples=20_000)
    assert isinstance(est, MonteCarloEstimate)
    # e_e(y) = 1 identically
    assert est.value == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        s_transform(phi, identity("su3"))


# ---------------------------------------------------------------------------
# heat kernel as a distribution


@pytest.mark.parametrize("kind", ["u1", "su2"])
def test_kernel_pairing_reproduces_coefficients(kind):
    for beta in (0.1, 1.0):
        for rep in representations(kind, 6, max_u1=3):
            expected = kernel_series(kind, beta).coefficients.get(rep, 0.0)
            assert kernel_pairing(kind, rep, beta) == pytest.approx(expected, abs=1e-8)


def test_series_distribution_pairs_by_orthogonality():
    series = CharacterSeries("su2", {RepLabel.su2(0): 1.0, RepLabel.su2(1): 0.5})
    f = TestFunction("su2", {RepLabel.su2(1): 1.0})
    # pair(density, chi/p1) = int density chi / p1 dmu; check against direct quadrature of same integrand
    got = SeriesDistribution(series).pair(f)
    x = np.linspace(0, 1, 20001)
    c = ClassCoordinates("su2", x)
    integrand = (series.evaluate(c) * f.evaluate(c)).real * 2 * np.sin(np.pi * x) ** 2
    assert got == pytest.approx(np.trapezoid(integrand, x), rel=1e-7)


# ---------------------------------------------------------------------------
# product distributions


def test_product_restriction_preserves_mass(rng):
    factors = {e: PointMasses(haar_sample("u1", rng, 2), rng.uniform(0.5, 1.5, 2)) for e in range(4)}
    prod = ProductDistribution(factors)
    sub = prod.restrict([0, 2])
    assert sub.total_mass() == pytest.approx(prod.total_mass(), rel=1e-14)
    tests = {0: constant_one("u1")}
    assert sub.pair(tests) == pytest.approx(prod.pair(tests), rel=1e-12)


def test_kind_mismatch_in_test_function():
    with pytest.raises(ValueError):
        TestFunction("u1", {RepLabel.su2(1): 1.0})
    with pytest.raises(ValueError):
        e_x(identity("u1"), identity("su2"))
