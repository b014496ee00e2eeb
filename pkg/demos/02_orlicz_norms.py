"""Exponential-moment norms, conjugate functions and tail bounds from samples.

Run with ``python demos/02_orlicz_norms.py``. Takes a few seconds.
"""
# %%
import numpy as np

from smoothmax import (PhiFunction, bphi_norm, fenchel_moreau_check, gpsi_norm, kramer_check,
                       smallest_tail_constant, tail_bound_check, young_fenchel)

# %% [markdown]
# A generator phi is even and convex with phi(0) = 0. Its conjugate
# phi*(u) = sup (lam u - phi(lam)) sets the tail bound exp(-phi*(u / C)).

# %%
u = np.array([0.5, 1.0, 2.0, 4.0])
for phi in (PhiFunction.gaussian(), PhiFunction.power(3.0), PhiFunction.pure_power(1.5)):
    print(f"{phi.kind:10s} p={phi.p}   phi*(u) = {np.round(young_fenchel(phi, u), 6)}")
print("|u|^3/3 for comparison with pure_power(1.5):", np.round(u ** 3 / 3, 6))

# %% [markdown]
# Conjugating twice gives back phi when phi is convex. The power kind with
# p < 2 has a kink at |lam| = 1 where the slope drops, so it is not convex
# and the biconjugate is its convex envelope.

# %%
grid = np.linspace(-3, 3, 61)
for p in (3.0, 2.0, 1.5):
    phi = PhiFunction.power(p)
    print(f"power_p p={p}: convex={phi.is_convex()}, max |phi** - phi| = "
          f"{fenchel_moreau_check(phi, grid):.2e}")

# %% [markdown]
# The B(phi) norm is the smallest tau with log E exp(lam X) <= phi(lam tau).
# For standard normal samples and phi = lam^2 / 2 it is one; it scales
# exactly with the data.

# %%
x = np.random.default_rng(0).standard_normal(200_000)
phi = PhiFunction.gaussian()
est = bphi_norm(x, phi)
print(f"B(phi) norm = {est.value:.4f} (binding lam = {est.binding:.2f}, trimmed {est.trimmed})")
print(f"B(phi) norm of 3 x = {bphi_norm(3 * x, phi).value:.4f}")
print(f"G(psi) norm = {gpsi_norm(x, phi).value:.4f}")

# %% [markdown]
# Tail bounds are checked against a one-sided 95% Clopper-Pearson envelope of
# the empirical tail, so a pass is conservative.

# %%
for C in (0.1, 0.8, 1.5):
    res = tail_bound_check(x, phi, C)
    print(f"C = {C}: passed = {res.passed}, worst u = {res.worst_u:.3f}")
print(f"smallest passing C = {smallest_tail_constant(x, phi):.4f}")

# %% [markdown]
# An exponential tail sup_x P(|X(x)| >= u) <= 2 exp(-mu u) holds for
# Gaussian columns; heavy tails support no mu on the candidate grid.

# %%
cols = np.random.default_rng(1).standard_normal((50_000, 4)) * [1.0, 0.7, 0.5, 0.2]
print(f"Gaussian columns: mu = {kramer_check(cols).mu:.3f}")
try:
    kramer_check(np.random.default_rng(1).pareto(1.2, size=(50_000, 1)))
except Exception as exc:
    print(f"Pareto column: {type(exc).__name__}: {exc}")
