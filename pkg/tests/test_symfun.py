"""Symmetric functions, Garding cones and ellipticity constants."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from confmetric.errors import ConeError, DomainError
from confmetric.symfun import (
    ConeSpec,
    OperatorFamily,
    TransformedCone,
    best_alpha,
    cone_membership,
    cone_slack,
    deleted_symmetric,
    elementary_sigma,
    elementary_symmetric,
    f_gradient,
    f_value,
    kappa_of_cone,
    q_matrix,
    rho_forward,
    rho_transform,
    sample_cone,
    sharpness_sequence,
    structural_selftest,
    transformed_ellipticity_bound,
    vartheta_analytic,
    vartheta_best,
    vartheta_empirical,
    verify_lemma21,
)


def brute_sigma(lam, j):
    return sum(math.prod(c) for c in itertools.combinations(lam, j)) if j else 1.0


def families(n):
    out = [OperatorFamily.sigma_root(n, k) for k in range(1, n + 1)]
    out += [OperatorFamily.quotient(n, k, l) for k in range(2, n + 1) for l in range(1, k)]
    return out


vectors = st.lists(st.floats(-10, 10, allow_nan=False), min_size=3, max_size=6)


# ------------------------------------------------------------------ sigma


def test_sigma_examples():
    assert elementary_sigma([1, 1, 1], 2) == 3
    assert elementary_sigma([1, 2, 3], 2) == 11
    assert elementary_sigma([0, 2, 3, 5], 4) == 0
    assert elementary_sigma([4, 5], 0) == 1


@given(vectors)
def test_sigma_matches_subset_sums(lam):
    e = elementary_symmetric(lam)
    scale = max(1.0, max(abs(x) for x in lam)) ** len(lam)
    for j in range(len(lam) + 1):
        assert e[j] == pytest.approx(brute_sigma(lam, j), abs=1e-12 * scale)


@given(vectors)
def test_deleted_symmetric_is_sigma_of_remaining(lam):
    D = deleted_symmetric(lam)
    for i in range(len(lam)):
        rest = lam[:i] + lam[i + 1:]
        scale = max(1.0, max(abs(x) for x in lam)) ** len(lam)
        for j in range(len(lam)):
            assert D[i, j] == pytest.approx(brute_sigma(rest, j), abs=1e-12 * scale)


def test_sigma_batched_shape():
    lam = np.arange(24, dtype=float).reshape(2, 3, 4)
    assert elementary_symmetric(lam).shape == (2, 3, 5)


# ------------------------------------------------------------------- cones


def test_cone_membership_examples():
    assert cone_membership([1, 1, 1], ConeSpec(3, 3))
    assert not cone_membership([-1, 1, 1], ConeSpec(3, 3))
    assert cone_membership([-1, 1, 1], ConeSpec(3, 1))
    # sigma_2(-0.5, 1, 1) = 0 sits on the boundary of Gamma_2
    assert not cone_membership([-0.5, 1, 1], ConeSpec(3, 2))
    assert cone_membership([-0.4, 1, 1], ConeSpec(3, 2))


def test_cone_membership_dimension_mismatch():
    with pytest.raises(DomainError):
        cone_membership([1, 1], ConeSpec(3, 1))


def test_cone_spec_validation():
    with pytest.raises(DomainError):
        ConeSpec(3, 4)
    with pytest.raises(DomainError):
        ConeSpec(3, 0)


def test_cone_slack_and_first_violation():
    cone = ConeSpec(3, 2)
    assert cone_slack([1, 1, 1], cone) == pytest.approx(1.0)
    assert cone.first_violation([-0.5, 1, 1]) == 2
    assert cone.first_violation([-3, 1, 1]) == 1
    assert cone.first_violation([1, 1, 1]) is None


@given(st.integers(3, 6), st.data())
def test_cones_are_nested(n, data):
    k = data.draw(st.integers(1, n))
    lam = sample_cone(ConeSpec(n, k), 50, data.draw(st.integers(0, 1000)))
    for j in range(1, k + 1):
        assert np.all(ConeSpec(n, j).contains(lam))


def test_transformed_cone_contains_base_image():
    base = ConeSpec(3, 2)
    lam = sample_cone(base, 200, 1)
    cone = TransformedCone(base, 1.0)
    assert np.all(cone.contains(rho_transform(lam, 1.0)))


# ------------------------------------------------------------------ values


@pytest.mark.parametrize("fam", families(4), ids=lambda f: f.label)
def test_normalization(fam):
    assert f_value(fam, np.ones(4)) == pytest.approx(1.0, abs=1e-14)
    assert f_value(fam, 2.5 * np.ones(4)) == pytest.approx(2.5, abs=1e-14)


def test_value_example_sigma2_n4():
    fam = OperatorFamily.sigma_root(4, 2)
    assert brute_sigma((1, 1, 2, 2), 2) == 13
    assert f_value(fam, [1, 1, 2, 2]) == pytest.approx(math.sqrt(13 / 6), rel=1e-14)


def test_value_outside_cone_raises_naming_sigma():
    fam = OperatorFamily.sigma_root(3, 2)
    with pytest.raises(ConeError, match="sigma_2"):
        f_value(fam, [-0.5, 1, 1])


def test_gradient_linear_case():
    fam = OperatorFamily.sigma_root(5, 1)
    lam = np.array([-1.0, 0.3, 2.0, 4.0, 5.0])
    np.testing.assert_allclose(f_gradient(fam, lam), np.full(5, 0.2), atol=1e-15)


def test_gradient_example_sigma2():
    fam = OperatorFamily.sigma_root(3, 2)
    lam = np.array([1.0, 2.0, 3.0])
    s2 = 11.0
    analytic = 0.5 * (s2 / 3) ** -0.5 / 3 * (lam.sum() - lam)
    np.testing.assert_allclose(f_gradient(fam, lam), analytic, rtol=1e-13)
    h = 1e-6
    fd = np.array([(f_value(fam, lam + h * e) - f_value(fam, lam - h * e)) / (2 * h) for e in np.eye(3)])
    np.testing.assert_allclose(f_gradient(fam, lam), fd, rtol=1e-6)


def test_quotient_requires_order():
    with pytest.raises(DomainError):
        OperatorFamily.quotient(4, 2, 2)


def test_lemma21_holds_on_samples():
    fam = OperatorFamily.sigma_root(4, 2)
    pts = sample_cone(fam.cone, 40, 3)
    for lam, mu in zip(pts[:20], pts[20:]):
        assert verify_lemma21(fam, lam, mu) == (True, True, True)


@given(st.integers(3, 5), st.data())
@settings(max_examples=30, deadline=None)
def test_trace_inequality(n, data):
    k = data.draw(st.integers(1, n))
    fam = OperatorFamily.sigma_root(n, k)
    lam = sample_cone(fam.cone, 200, data.draw(st.integers(0, 10_000)))
    f = fam.evaluate(lam)
    assert np.all(lam.sum(axis=1) >= n * f - 1e-12 * np.abs(lam).sum(axis=1))


@given(st.integers(3, 5), st.data())
@settings(max_examples=30, deadline=None)
def test_gradient_nonnegative(n, data):
    k = data.draw(st.integers(1, n))
    fam = OperatorFamily.sigma_root(n, k)
    lam = sample_cone(fam.cone, 200, data.draw(st.integers(0, 10_000)))
    _, g = fam.value_and_gradient(lam)
    assert np.all(g >= 0)
    assert np.all(g.sum(axis=1) > 0)


def test_two_dimensional_amgm_example():
    # sqrt(1 * 4) = 2 while the mean of (1, 4) is 2.5
    lam = np.array([1.0, 4.0])
    assert math.sqrt(elementary_sigma(lam, 2)) == pytest.approx(2.0)
    assert lam.sum() >= 2 * 2.0


# -------------------------------------------------------------------- kappa


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_kappa_equals_n_minus_k(n):
    for k in range(1, n + 1):
        assert kappa_of_cone(ConeSpec(n, k)) == n - k


def test_kappa_of_transformed_cone():
    assert kappa_of_cone(TransformedCone(ConeSpec(3, 2), 1.0)) == 2
    assert kappa_of_cone(TransformedCone(ConeSpec(3, 3), 1.0)) == 1


# ------------------------------------------------------------------ vartheta


def test_vartheta_analytic_example():
    assert vartheta_analytic(ConeSpec(3, 2), [0.4, 1, 1]) == pytest.approx(1 / 15, rel=1e-14)


def test_vartheta_rejects_alpha_outside_cone():
    with pytest.raises(DomainError, match="not in"):
        vartheta_analytic(ConeSpec(3, 1), [1, 1, 1])
    assert vartheta_analytic(ConeSpec(3, 1), [0.4, 0.4, 1]) > 0


def test_vartheta_positive_cone_is_one_over_n():
    assert vartheta_analytic(ConeSpec(4, 4), None) == pytest.approx(0.25)


def test_best_alpha_frozen_values():
    # values of the power-of-two search, recomputed by hand from the formula
    assert vartheta_best(ConeSpec(3, 1)) == pytest.approx(2 / 9, rel=1e-12)
    assert vartheta_best(ConeSpec(4, 1)) == pytest.approx(0.2, rel=1e-12)
    assert vartheta_best(ConeSpec(3, 2)) == pytest.approx(1 / 18, rel=1e-12)
    alpha, theta = best_alpha(ConeSpec(3, 2))
    assert vartheta_analytic(ConeSpec(3, 2), alpha) == pytest.approx(theta)


@pytest.mark.parametrize("n,k", [(3, 1), (3, 2), (4, 2), (4, 3), (5, 2), (5, 4)])
def test_vartheta_empirical_dominates_analytic(n, k):
    fam = OperatorFamily.sigma_root(n, k)
    rep = vartheta_empirical(fam, fam.cone, 20_000, 7)
    assert rep.vartheta_empirical >= rep.vartheta_analytic - 1e-12
    assert rep.kappa == n - k


def test_sharpness_ray_sigma2_n3():
    # two small entries make the third share collapse like eps
    fam = OperatorFamily.sigma_root(3, 2)
    seq = sharpness_sequence(3, 1)
    _, g = fam.value_and_gradient(seq)
    r = g[:, 2] / g.sum(axis=1)
    assert np.all(np.diff(r) < 0)
    assert r[-1] < 1e-6


def test_sharpness_needs_room():
    with pytest.raises(DomainError):
        sharpness_sequence(3, 2)


def test_report_json_keys():
    fam = OperatorFamily.sigma_root(3, 2)
    rep = vartheta_empirical(fam, fam.cone, 1000, 0)
    assert set(rep.to_json()) == {"kappa", "vartheta_analytic", "vartheta_empirical", "sharpness_min_ratio", "sample_count", "seed"}


def test_sampling_is_reproducible():
    cone = ConeSpec(4, 2)
    np.testing.assert_array_equal(sample_cone(cone, 500, 11), sample_cone(cone, 500, 11))
    assert np.all(cone.contains(sample_cone(cone, 500, 11)))


# ---------------------------------------------------------------- transform


@pytest.mark.parametrize("n", [2, 3, 4, 5])
@pytest.mark.parametrize("rho", [-1.0, 0.5, 1.0, 1.5])
def test_q_determinant(n, rho):
    expected = (-1) ** (n - 1) * rho ** (n - 1) * (n - rho)
    assert np.linalg.det(q_matrix(n, rho)) == pytest.approx(expected, abs=1e-12)


def test_rho_forward_examples():
    np.testing.assert_allclose(rho_forward([0, 1, 2], 1.0), [3, 2, 1])
    np.testing.assert_allclose(rho_transform(np.full(4, 3.0), 1.0), np.ones(4))


@given(st.lists(st.floats(-100, 100, allow_nan=False), min_size=3, max_size=5), st.sampled_from([-1.0, 0.5, 1.0, 1.5]))
def test_rho_round_trip(lam, rho):
    lam = np.array(lam)
    back = rho_transform(rho_forward(lam, rho), rho)
    np.testing.assert_allclose(back, lam, atol=1e-12 * max(1.0, np.abs(lam).max()))


def test_rho_singular_rejected():
    with pytest.raises(DomainError, match="singular"):
        rho_transform(np.ones(3), 3.0)
    with pytest.raises(DomainError, match="singular"):
        transformed_ellipticity_bound(3.0, 1, 0.1, 3)


def test_transformed_bound_cases():
    assert transformed_ellipticity_bound(-1.0, 2, 0.1, 4) == pytest.approx(0.2)
    assert transformed_ellipticity_bound(1e-12, 2, 0.1, 4) == pytest.approx(0.25, rel=1e-9)
    assert transformed_ellipticity_bound(1.0, 2, 1 / 15, 3) == pytest.approx(1 / 15)


def test_transformed_bound_positive_cone():
    with pytest.raises(DomainError, match="Gamma_n"):
        transformed_ellipticity_bound(1.0, 0, 1 / 3, 3)


# ---------------------------------------------------------------- selftest


@pytest.mark.parametrize("fam", families(3) + families(4), ids=lambda f: f.label)
def test_structural_selftest_passes(fam):
    rep = structural_selftest(fam, 1000, 0)
    assert rep["passed"], rep["checks"]
