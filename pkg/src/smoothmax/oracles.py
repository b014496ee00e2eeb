"""Small built-in oracle checks, runnable from the command line.

Each oracle returns ``(passed, message)``. They are cheap (well under a
second or two) and use closed forms that do not share code paths with the
quantity being checked.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import integrate
from scipy.optimize import brentq
from scipy.special import ndtr

from .entropy import MetricSample, covering_number
from .extremum import brute_force_max, find_max
from .field_model import BasisTerm, CoefficientLaw, Domain, FieldSpec, sample_field
from .laplace_saddle import integral_I, pathwise_ratio
from .orlicz import PhiFunction, young_fenchel
from .quadrature import QuadOptions
from .tail_asymptotics import laplace_integral_check


def quadratic_spec() -> FieldSpec:
    """Deterministic ``xi(x) = -x^2 / 2`` on ``(-1, 1)``."""
    return FieldSpec(Domain((-1.0,), (1.0,)), {(2,): -0.5}, ())


def saddle_quadratic():
    s = sample_field(quadratic_spec(), 0)
    r = pathwise_ratio(s, 400.0)
    # exact: int exp(-400 x^2/2) dx over (-1, 1) against sqrt(2 pi / 400)
    exact = math.erf(math.sqrt(200.0))
    return abs(r - exact) < 1e-9 and abs(r - 1) <= 0.005, f"pathwise ratio {r:.12f} (exact {exact:.12f})"


def saddle_integral():
    spec = FieldSpec(Domain.unit(1), {}, (BasisTerm.cos(1, CoefficientLaw.gaussian(1.0)),
                                          BasisTerm.sin(2, CoefficientLaw.gaussian(1.0))), seed=3)
    s = sample_field(spec, 0)
    lam = 5.0
    got = float(integral_I(s, lam, QuadOptions(tol=1e-12)))
    h = lambda x: s.hessians(np.array([[x]]))[0, 0, 0]  # noqa: E731
    f = lambda x: math.sqrt(abs(h(x))) * math.exp(lam * s.values(np.array([[x]]))[0])  # noqa: E731
    # split the reference integral at the square-root kinks (Hessian zeros)
    xs = np.linspace(0.0, 1.0, 100001)
    hs = s.hessians(xs[:, None])[:, 0, 0]
    cuts = [brentq(h, xs[i], xs[i + 1]) for i in np.flatnonzero(np.sign(hs[:-1]) * np.sign(hs[1:]) < 0)]
    pts = [0.0] + cuts + [1.0]
    ref = sum(integrate.quad(f, a, b, limit=400, epsabs=0, epsrel=1e-13)[0]
              for a, b in zip(pts[:-1], pts[1:]))
    rel = abs(got / ref - 1)
    return rel < 1e-9, f"I(5) = {got:.12g}, scipy quad {ref:.12g}, rel diff {rel:.2e}"


def maximum_grid():
    spec = FieldSpec(Domain.unit(1), {}, tuple(BasisTerm.cos(k, CoefficientLaw.gaussian(1.0 / k))
                                               for k in (1, 2, 3)), seed=5)
    worst = 0.0
    for rid in range(20):
        s = sample_field(spec, rid)
        m = find_max(s).M
        g, _ = brute_force_max(s, 20001, polish=True)
        worst = max(worst, g - m)
    return worst <= 1e-10, f"largest excess of grid+polish over multistart: {worst:.2e}"


def gaussian_conjugate():
    u = np.linspace(-10, 10, 201)
    err = float(np.max(np.abs(young_fenchel(PhiFunction.gaussian(), u) - u ** 2 / 2)))
    v = young_fenchel(PhiFunction.pure_power(3.0), 8.0)
    ok = err <= 1e-8 and abs(v - 8 ** 1.5 / 1.5) <= 1e-6
    return ok, f"gaussian self-conjugacy error {err:.1e}; pure power p=3 at u=8: {v:.6f}"


def laplace_p2():
    r = laplace_integral_check(0.0, 2.0, 20.0).ratio
    exact = float(ndtr(20.0))
    return abs(r - exact) < 1e-9, f"ratio {r:.12f}, exact Phi(20) = {exact:.12f}"


def interval_cover():
    ms = MetricSample.euclidean(np.linspace(0, 1, 101))
    got = {e: covering_number(ms, e) for e in (0.5, 0.25, 0.1)}
    # a ball of radius eps covers an interval of length 2 eps; grid spacing 0.01
    want = {e: math.ceil(1.0 / (2 * e) - 1e-9) if 2 * e * 100 % 1 else math.ceil(101 / (2 * e * 100 + 1))
            for e in got}
    return got == want, f"covering numbers {got}, analytic {want}"


ORACLES = {
    "saddle-quadratic": saddle_quadratic,
    "saddle-integral": saddle_integral,
    "maximum-grid": maximum_grid,
    "gaussian-conjugate": gaussian_conjugate,
    "laplace-p2": laplace_p2,
    "interval-cover": interval_cover,
}
