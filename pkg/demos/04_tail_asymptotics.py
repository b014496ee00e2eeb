"""From the growth of a Laplace transform to the tail of the maximum.

Run with ``python demos/04_tail_asymptotics.py``. Takes about half a minute.
"""
# %%
import numpy as np
from scipy.special import gammainccinv

from smoothmax import (AsymptoticParams, fit_R_params, laplace_integral_check, predicted_tail,
                       tauberian_consistency)
from smoothmax.tail_asymptotics import tail_shape_slope

# %% [markdown]
# The integral J = int_0^inf y^gamma exp(lam y - y^p / p) dy is compared with
# (2 pi)^{1/2} lam^Delta exp(lam^q / q). The standard Laplace method carries
# the constant (2 pi / (p - 1))^{1/2}, so the simpler form is exact only at
# p = 2 and is off by (p - 1)^{-1/2} otherwise.

# %%
for p in (1.5, 2.0, 3.0):
    row = [laplace_integral_check(0.0, p, lam) for lam in (5.0, 20.0, 80.0)]
    print(f"p = {p}: ratio " + ", ".join(f"{c.ratio:.5f}" for c in row)
          + f"   (p-1)^(-1/2) = {(p - 1) ** -0.5:.5f}"
          + "   with Laplace constant " + ", ".join(f"{c.laplace_constant_ratio:.5f}" for c in row))

# %% [markdown]
# Integrating exp(lam z) against the predicted tail and dividing by R(lam)
# checks the forward direction end to end, without simulating a field.

# %%
for q in (2.0, 1.5):
    params = AsymptoticParams(0.0, 1.0, q)
    vals = [tauberian_consistency(params, lam) for lam in (5.0, 10.0, 20.0, 40.0)]
    print(f"q = {q}: " + ", ".join(f"{v:.5f}" for v in vals)
          + f"   limit (p-1)^(-1/2) = {(params.p - 1) ** -0.5:.5f}")

# %% [markdown]
# Fitting log R = log C + alpha log lam + lam^q / q recovers synthetic
# parameters; constant data are flagged as showing no growth.

# %%
lam = np.geomspace(5, 50, 30)
truth = AsymptoticParams(1.0, 2.0, 2.0)
noisy = truth.log_R(lam) + np.log1p(np.random.default_rng(0).normal(0, 0.01, lam.size))
fit = fit_R_params(lam, noisy)
print(f"fit: alpha = {fit.alpha:.4f}, C = {fit.C_R:.4f}, q = {fit.q:.5f}, p = {fit.p:.5f}")
print("constant R:", fit_R_params(lam, np.zeros(lam.size)))
print("predicted tail at u = 1, 2, 3:", predicted_tail(fit, [1.0, 2.0, 3.0]).tail)

# %% [markdown]
# The leading order exp(-u^p / p) can be probed by regressing -log T(u)
# against u^p / p over the largest tenth of the maxima. The polynomial
# factor in front biases this slope at finite sample sizes. Using the exact
# tail of |c| for one symmetric-Weibull(3) coefficient, Q(1/3, u^3 / 3), shows the
# bias without any simulation noise.

# %%
p = 3.0
for n in (10 ** 5, 10 ** 6, 10 ** 7):
    # the i-th largest of n draws sits near the exact quantile at T = i / n
    t = np.arange(1, n // 10 + 1) / n
    u = (p * gammainccinv(1 / p, t)) ** (1 / p)
    slope = np.polyfit(u ** p / p, -np.log(t), 1)[0]
    print(f"n = {n:>8d}: exact-tail slope over the top decile = {slope:.3f}")

# %% [markdown]
# Monte Carlo draws of |c| reproduce that slope.

# %%
rng = np.random.default_rng(1)
draws = (p * rng.gamma(1 / p, size=100_000)) ** (1 / p)
print(f"Monte Carlo slope (1e5 draws): {tail_shape_slope(draws, p).slope:.3f}")
