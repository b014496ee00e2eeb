import csv
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate
from scipy.special import ndtr

from smoothmax.errors import DegenerateFitError, ValidationError
from smoothmax.tail_asymptotics import (AsymptoticParams, TailCurve, empirical_tail,
                                        fit_R_params, laplace_integral_check, predicted_tail,
                                        tail_shape_slope, tauberian_consistency,
                                        write_fit_report)


def test_prediction_example():
    params = AsymptoticParams(alpha=0.0, C_R=1.0, q=2.0)
    t = predicted_tail(params, [3.0])
    assert t.tail[0] == pytest.approx(math.exp(-4.5) / math.sqrt(2 * math.pi), rel=1e-12)
    assert t.tail[0] == pytest.approx(4.43185e-3, rel=1e-5)


def test_u_power_arithmetic():
    params = AsymptoticParams(alpha=1.0, C_R=1.0, q=1.5)
    assert params.p == pytest.approx(3.0)
    assert params.gamma == pytest.approx(2.5)
    assert AsymptoticParams(0.0, 1.0, 2.0).Delta == 0.0


@given(st.floats(-2, 3), st.floats(0.01, 100), st.sampled_from([1.25, 1.5, 2.0, 3.0]))
def test_prediction_is_a_tail(alpha, C, q):
    t = predicted_tail(AsymptoticParams(alpha, C, q), np.linspace(0.01, 6, 200))
    assert np.all(t.tail <= 1.0) and np.all(np.diff(t.tail) <= 0)
    ok = ~t.adjusted
    np.testing.assert_allclose(t.tail[ok], np.exp(t.log_tail[ok]), rtol=1e-12)


@given(st.floats(0.1, 12))
def test_gaussian_laplace_ratio_is_normal_cdf(lam):
    # int_0^inf exp(lam y - y^2/2) dy = sqrt(2 pi) exp(lam^2/2) Phi(lam)
    assert laplace_integral_check(0.0, 2.0, lam).ratio == pytest.approx(ndtr(lam), rel=1e-9)


@pytest.mark.parametrize("gamma,p,lam", [(1.0, 3.0, 2.0), (0.5, 1.5, 1.5), (-0.5, 2.5, 3.0)])
def test_laplace_integral_matches_scipy(gamma, p, lam):
    f = lambda y: y ** gamma * math.exp(lam * y - y ** p / p)
    ref = integrate.quad(f, 0, 1)[0] + integrate.quad(f, 1, np.inf)[0]
    assert laplace_integral_check(gamma, p, lam).numeric == pytest.approx(ref, rel=1e-8)


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_laplace_constant(p):
    # the standard Laplace constant makes the ratio tend to one; the sqrt(2 pi) form to (p-1)^-1/2
    lams = [5.0, 20.0, 80.0]
    chk = [laplace_integral_check(0.0, p, lam) for lam in lams]
    errs = [abs(c.laplace_constant_ratio - 1) for c in chk]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 0.02
    assert chk[-1].ratio == pytest.approx((p - 1) ** -0.5, rel=0.02)


def test_log_form_survives_overflow():
    c = laplace_integral_check(0.0, 2.0, 60.0)
    assert c.numeric == math.inf and math.isfinite(c.log_numeric)
    assert c.ratio == pytest.approx(1.0, rel=1e-12)


def test_tauberian_limit():
    params = AsymptoticParams(0.0, 1.0, 1.5)
    vals = [tauberian_consistency(params, lam) for lam in (10.0, 40.0, 80.0)]
    target = (params.p - 1) ** -0.5
    assert abs(vals[-1] - target) < abs(vals[0] - target)
    assert vals[-1] == pytest.approx(target, rel=0.01)


def test_fit_recovers_noiseless_parameters(tmp_path):
    truth = AsymptoticParams(1.0, 2.0, 2.0)
    lam = np.geomspace(5, 50, 25)
    fit = fit_R_params(lam, truth.log_R(lam))
    assert fit.q == pytest.approx(2.0, abs=1e-6)
    assert fit.alpha == pytest.approx(1.0, abs=1e-6)
    assert fit.C_R == pytest.approx(2.0, rel=1e-6)
    assert not fit.degenerate
    write_fit_report(fit, tmp_path / "fit.csv")
    rows = list(csv.reader(open(tmp_path / "fit.csv")))
    assert rows[0] == ["q", "alpha", "logC", "residual"] and len(rows) > 1


def test_fit_with_noise():
    truth = AsymptoticParams(1.0, 1.0, 2.0)
    lam = np.geomspace(1, 20, 40)
    noise = np.random.default_rng(0).normal(0, 0.01, lam.size)
    fit = fit_R_params(lam, truth.log_R(lam) + noise)
    assert fit.q == pytest.approx(2.0, abs=0.05)
    assert fit.alpha == pytest.approx(1.0, abs=0.1)


def test_constant_R_is_degenerate():
    lam = np.geomspace(1, 20, 20)
    fit = fit_R_params(lam, np.full(lam.size, math.log(3.0)))
    assert fit.degenerate and fit.alpha == pytest.approx(0.0, abs=1e-9)
    assert fit.C_R == pytest.approx(3.0)


def test_fit_rejects_multimodal_residuals():
    # erratic data whose residual over the q candidates goes down, up, down, up
    log_R = [196.88, 618.194, 904.009, 813.038, 1002.276, 1011.982, 1103.649, 1058.105,
             1066.948, 1019.961, 954.061, 966.235, 810.838, 298.442, 377.34, 346.437,
             450.337, 616.047, 551.345, 1138.585]
    with pytest.raises(DegenerateFitError):
        fit_R_params(np.geomspace(1, 20, 20), log_R)


def test_empirical_tail_of_normals():
    z = np.random.default_rng(8).standard_normal(100_000)
    t = empirical_tail(z, [2.0]).tail[0]
    exact = 0.02275013194817921
    assert abs(t - exact) < 3 * math.sqrt(exact * (1 - exact) / z.size)
    assert empirical_tail([1, 2, 3, 4], [0.0, 2.5, 5.0]).tail.tolist() == [1.0, 0.5, 0.0]


@pytest.mark.parametrize("q", [1.5, 2.0, 3.0])
def test_fit_then_predict_round_trip(q):
    truth = AsymptoticParams(0.7, 1.8, q)
    lam = np.geomspace(2, 20, 30)
    fit = fit_R_params(lam, truth.log_R(lam))
    u = lam ** (1 / (q - 1))  # saddle levels matched to the fitted lambda range
    a = predicted_tail(truth, u).log_tail
    b = predicted_tail(fit, u).log_tail
    assert np.max(np.abs(b / a - 1)) < 0.05


@pytest.mark.parametrize("gamma", [0.0, 1.0])
@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_laplace_ratio_stabilises(gamma, p):
    r = [laplace_integral_check(gamma, p, lam).ratio for lam in (5, 10, 20, 40, 80)]
    steps = np.abs(np.diff(r))
    assert np.all(np.diff(steps) <= 1e-12)
    assert steps[-1] < 0.01


def test_empirical_tail_strict_inequality(tmp_path):
    t = empirical_tail([1.0, 2.0, 2.0, 3.0], [0.5, 2.0, 3.0])
    np.testing.assert_array_equal(t.tail, [1.0, 0.25, 0.0])
    lo, hi = t.bands()
    assert np.all(lo <= t.tail) and np.all(t.tail <= hi)
    t.to_csv(tmp_path / "t.csv")
    head = open(tmp_path / "t.csv").readline().strip()
    assert head == "u,tail,lower95,upper95,source"


def test_tail_curve_validation():
    with pytest.raises(ValidationError):
        TailCurve(np.array([1.0, 2.0]), np.array([0.1, 0.2]), "x")
    with pytest.raises(ValidationError):
        predicted_tail(AsymptoticParams(0, 1, 2), [0.0, 1.0])


def test_shape_slope_on_exact_weibull_tail():
    # M = (p E)^{1/p} with E ~ Exp(1) has T(u) = exp(-u^p / p) exactly
    p = 3.0
    m = (p * np.random.default_rng(1).exponential(size=100_000)) ** (1 / p)
    fit = tail_shape_slope(m, p)
    assert fit.slope == pytest.approx(1.0, abs=0.05)
    assert fit.n_points == 10_000
