import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import trig_spec
from smoothmax.errors import NonGaussianSpecError, PointOutsideDomainError, ValidationError
from smoothmax.field_model import (BasisTerm, CoefficientLaw, Domain, FieldSpec, covariance,
                                   eval_field, eval_gradient, eval_hessian,
                                   gaussian_natural_distance, sample_coefficients, sample_field,
                                   zeta)


def test_empty_basis_is_deterministic():
    spec = FieldSpec(Domain.unit(1), {(2,): 1.0}, ())
    s0, s1 = sample_field(spec, 0), sample_field(spec, 17)
    assert spec.deterministic
    assert eval_field(s0, [0.5]) == eval_field(s1, [0.5]) == pytest.approx(0.25, abs=1e-15)


def test_samples_are_pure_in_seed_and_id(trig):
    a = sample_field(trig, 42).coefficients
    b = sample_field(trig, 42).coefficients
    c = sample_field(trig, 43).coefficients
    d = sample_field(trig.with_seed(8), 42).coefficients
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c) and not np.array_equal(a, d)
    np.testing.assert_array_equal(sample_coefficients(trig, [43, 42])[1], a)


def test_single_cosine_values():
    spec = FieldSpec(Domain.unit(1), {}, (BasisTerm.cos(1),))
    s = sample_field(spec, 0)
    c = s.coefficients[0]
    assert eval_field(s, [0.0]) == pytest.approx(c, abs=1e-15)
    assert eval_field(s, [0.25]) == pytest.approx(0.0, abs=1e-15)
    np.testing.assert_allclose(eval_hessian(s, [0.0]), [[-4 * math.pi ** 2 * c]], rtol=1e-14)
    assert zeta(s, [0.0]) == pytest.approx(2 * math.pi * math.sqrt(abs(c)), rel=1e-14)


def test_mean_matches_clt_bound():
    spec = FieldSpec(Domain.unit(1), {(1,): 1.0}, (BasisTerm.cos(1), BasisTerm.sin(2)))
    vals = np.array([eval_field(sample_field(spec, i), [0.3]) for i in range(10_000)])
    sd = math.sqrt(math.cos(2 * math.pi * 0.3) ** 2 + math.sin(4 * math.pi * 0.3) ** 2)
    assert abs(vals.mean() - 0.3) < 4 * sd / math.sqrt(vals.size)


@pytest.mark.parametrize("law", [CoefficientLaw.gaussian(1.3), CoefficientLaw.uniform(-2, 2),
                                 CoefficientLaw.weibull(3.0)])
def test_law_variance_matches_draws(law):
    rng = np.random.default_rng(0)
    x = law.draw(rng, 200_000)
    assert abs(x.mean()) < 5 * math.sqrt(law.variance / x.size)
    assert x.var() == pytest.approx(law.variance, rel=0.02)


def _fd_check(spec, x, h=1e-5):
    s = sample_field(spec, 3)
    x = np.asarray(x, dtype=float)
    d = x.size
    g = eval_gradient(s, x)
    H = eval_hessian(s, x)
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        fd_g = (eval_field(s, x + e) - eval_field(s, x - e)) / (2 * h)
        fd_H = (eval_gradient(s, x + e) - eval_gradient(s, x - e)) / (2 * h)
        assert fd_g == pytest.approx(g[i], rel=1e-6, abs=1e-6)
        np.testing.assert_allclose(fd_H, H[:, i], rtol=1e-5, atol=1e-5)
    np.testing.assert_allclose(H, H.T, atol=1e-12)


@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99))
def test_derivatives_match_finite_differences_2d(x, y):
    terms = (BasisTerm.cos((1, 2)), BasisTerm.sin((2, 1)), BasisTerm((1, 1), (0.3, -0.7)))
    spec = FieldSpec(Domain.unit(2), {(2, 0): -1.0, (1, 1): 0.5, (0, 1): 2.0}, terms, seed=1)
    _fd_check(spec, [x, y])


@given(st.floats(0.01, 0.99))
def test_derivatives_match_finite_differences_1d(x):
    _fd_check(trig_spec(), [x])


def test_point_outside_domain_rejected(trig):
    with pytest.raises(PointOutsideDomainError):
        eval_field(sample_field(trig, 0), [1.5])


def test_validation():
    with pytest.raises(ValidationError):
        Domain((1.0,), (0.0,))
    with pytest.raises(ValidationError):
        CoefficientLaw.weibull(0.5)
    with pytest.raises(ValidationError):
        FieldSpec(Domain.unit(1), {(3,): 1.0}, ())
    with pytest.raises(ValidationError):
        FieldSpec(Domain.unit(2), {}, (BasisTerm.cos(1),))


def test_gaussian_distance_example():
    spec = FieldSpec(Domain.unit(1), {}, (BasisTerm.cos(1),))
    assert gaussian_natural_distance(spec, [0.0], [0.5]) == pytest.approx(2.0, abs=1e-14)


def test_gaussian_distance_matches_monte_carlo(trig):
    z1, z2 = [0.1], [0.35]
    C = sample_coefficients(trig, range(20_000))
    B = trig.basis_values(np.array([z1, z2]))
    diff = C @ (B[0] - B[1])
    assert gaussian_natural_distance(trig, z1, z2) == pytest.approx(diff.std(), rel=0.03)


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_distance_is_a_semimetric(a, b, c):
    spec = trig_spec()
    d = lambda u, v: gaussian_natural_distance(spec, [u], [v])
    assert d(a, a) == pytest.approx(0.0, abs=1e-7)
    assert d(a, b) == pytest.approx(d(b, a), abs=1e-12)
    assert d(a, c) <= d(a, b) + d(b, c) + 1e-9


@given(st.lists(st.floats(0, 1), min_size=2, max_size=6))
def test_covariance_matrix_is_psd(xs):
    spec = trig_spec()
    W = np.array([[covariance(spec, [a], [b]) for b in xs] for a in xs])
    assert np.linalg.eigvalsh(W).min() > -1e-9


def test_non_gaussian_distance_rejected():
    spec = FieldSpec(Domain.unit(1), {}, (BasisTerm.cos(1, CoefficientLaw.weibull(3.0)),))
    with pytest.raises(NonGaussianSpecError):
        gaussian_natural_distance(spec, [0.0], [0.5])


def test_spec_round_trip(trig):
    spec = FieldSpec(Domain.unit(1), {(2,): -0.5},
                     (BasisTerm.cos(1, CoefficientLaw.weibull(3.0), 0.7),) + trig.terms, seed=9)
    back = FieldSpec.from_dict(spec.to_dict())
    assert back == spec
    np.testing.assert_array_equal(sample_field(back, 5).coefficients,
                                  sample_field(spec, 5).coefficients)
