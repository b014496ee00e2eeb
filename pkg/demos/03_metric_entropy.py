"""Covering numbers and metric entropy of the natural distance of a field.

Run with ``python demos/03_metric_entropy.py``. Takes a few seconds.
"""
# %%
import numpy as np

from smoothmax import (BasisTerm, CoefficientLaw, Domain, FieldSpec, MetricSample,
                       covering_number, entropy_series, metric_dimension,
                       natural_distance_matrix)
from smoothmax.entropy import optimal_cover_size

# %% [markdown]
# Covers use centres from the point set. On a line the greedy sweep is the
# classical interval greedy and is optimal; on the unit interval an
# eps-cover needs ceil(1 / (2 eps)) centres.

# %%
line = MetricSample.euclidean(np.linspace(0, 1, 101))
for eps in (0.5, 0.25, 0.1, 0.05):
    print(f"eps = {eps:5.2f}   N = {covering_number(line, eps)}   ceil(1/(2 eps)) = "
          f"{int(np.ceil(1 / (2 * eps)))}")

# %% [markdown]
# In two dimensions the greedy count is only an upper bound. Brute force on
# small random sets shows how close it gets.

# %%
rng = np.random.default_rng(3)
gaps = []
for _ in range(50):
    ms = MetricSample.euclidean(rng.random((12, 2)))
    gaps.append(covering_number(ms, 0.3) - optimal_cover_size(ms, 0.3))
print("greedy minus optimal over 50 random sets:", np.bincount(gaps))

# %% [markdown]
# The slope of log N(eps) against log(1/eps) estimates the metric dimension.
# Only scales at least four grid gaps wide are used; finer scales only see
# the discretisation. Grids with 2^k + 1 points per axis align the dyadic
# scales with the grid.

# %%
g = np.linspace(0, 1, 65)
square = np.array(np.meshgrid(g, g)).reshape(2, -1).T
print(f"interval: {metric_dimension(MetricSample.euclidean(np.linspace(0, 1, 1025))):.3f}")
print(f"square (euclidean): {metric_dimension(MetricSample.euclidean(square)):.3f}")
print(f"square (sup): {metric_dimension(MetricSample.euclidean(square, 'sup')):.3f}")

# %% [markdown]
# For a Gaussian field the natural distance is the standard deviation of
# the increment. A smooth field has a Lipschitz natural distance, so the
# entropy series sum 2^-n log N(2^-n) converges.

# %%
terms = (BasisTerm.cos(1, CoefficientLaw.gaussian(1.0)), BasisTerm.sin(1, CoefficientLaw.gaussian(1.0)),
         BasisTerm.cos(2, CoefficientLaw.gaussian(0.5)))
spec = FieldSpec(Domain.unit(1), {}, terms)
ms = natural_distance_matrix(spec, np.linspace(0, 1, 1025)[:, None])
series = entropy_series(ms, n_max=8)
for n, N, t, s in zip(series.n, series.covering, series.terms, series.partial_sums):
    print(f"n = {n}   N = {N:4d}   term = {t:.4f}   partial sum = {s:.4f}")
print("verdict:", series.verdict)

# %% [markdown]
# With too few points the finer scales are dropped and the verdict says so.

# %%
coarse = natural_distance_matrix(spec, np.linspace(0, 1, 33)[:, None])
print("33 points:", entropy_series(coarse, n_max=8).verdict)
