"""Pathwise maximum of a field sample and non-degeneracy checks."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .errors import GridTooLargeError, NoConvergenceError, ValidationError
from .field_model import FieldSample


@dataclass(frozen=True)
class MaximizerOptions:
    starts: int | None = None       # default 8 * 3**d
    grad_tol: float = 1e-10
    max_iter: int = 200
    det_tol: float = 1e-8
    value_tol: float = 1e-8
    boundary_margin: float = 1e-10  # relative to the box width

    def n_starts(self, d: int) -> int:
        return self.starts if self.starts is not None else 8 * 3 ** d


@dataclass(frozen=True, eq=False)
class MaxResult:
    M: float
    x0: np.ndarray
    hessian_at_max: np.ndarray
    interior: bool
    min_abs_det: float
    n_starts_agreeing: int
    gradient_norm: float = 0.0

    @property
    def dim(self) -> int:
        return self.x0.size


@lru_cache(maxsize=32)
def _unit_starts(n: int, d: int) -> np.ndarray:
    # unscrambled Halton without its first point (the lower corner)
    pts = qmc.Halton(d, scramble=False).random(n + 1)[1:]
    pts.setflags(write=False)
    return pts


def _ascent_steps(g, H):
    """Newton steps where the Hessian is negative definite, scaled gradient otherwise."""
    evals, evecs = np.linalg.eigh(H)
    newton = np.all(evals < 0, axis=1)
    proj = np.einsum("nji,nj->ni", evecs, g)
    with np.errstate(divide="ignore", invalid="ignore"):
        nstep = -np.einsum("nij,nj->ni", evecs, proj / np.where(newton[:, None], evals, 1.0))
    curv = np.max(np.abs(evals), axis=1)
    gstep = g / np.where(curv > 0, curv, 1.0)[:, None]
    return np.where(newton[:, None], nstep, gstep), newton


def find_max(sample: FieldSample, opts: MaximizerOptions | None = None) -> MaxResult:
    """Multistart projected Newton ascent on ``[D]``.

    Starts come from a low-discrepancy set projected into
    ``[l + eps, u - eps]``; every start ascends monotonically (backtracking)
    until its projected gradient falls below ``grad_tol``. The best converged
    point wins; ties keep the first start found.
    """
    opts = opts or MaximizerOptions()
    dom = sample.spec.domain
    d = dom.dim
    width = dom.width
    eps = opts.boundary_margin * width
    lo, hi = dom.lo + eps, dom.hi - eps
    max_step = 0.25 * width

    n = opts.n_starts(d)
    X = np.clip(dom.lo + _unit_starts(n, d) * width, lo, hi)
    f = sample.values(X)
    active = np.ones(n, dtype=bool)
    converged = np.zeros(n, dtype=bool)
    gnorm = np.full(n, np.inf)

    for _ in range(opts.max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        x = X[idx]
        g = sample.gradients(x)
        # zero the components that push out through an active bound
        at_lo = (x <= lo + 1e-15 * width) & (g < 0)
        at_hi = (x >= hi - 1e-15 * width) & (g > 0)
        pg = np.where(at_lo | at_hi, 0.0, g)
        pn = np.linalg.norm(pg, axis=1)
        gnorm[idx] = pn
        done = pn <= opts.grad_tol
        converged[idx[done]] = True
        active[idx[done]] = False
        keep = ~done
        if not keep.any():
            continue
        idx, x, g, pn, fx = idx[keep], x[keep], g[keep], pn[keep], f[idx[keep]]
        H = sample.hessians(x)
        step, newton = _ascent_steps(g, H)
        scale = np.max(np.abs(step) / max_step, axis=1)
        step = step / np.maximum(scale, 1.0)[:, None]

        t = np.ones(idx.size)
        xn = np.clip(x + step, lo, hi)
        fn = sample.values(xn)
        slack = 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(fx))
        for _ in range(60):
            bad = fn < fx - slack
            if not bad.any():
                break
            t[bad] *= 0.5
            xn[bad] = np.clip(x[bad] + t[bad, None] * step[bad], lo, hi)
            fn[bad] = sample.values(xn[bad])
        ok = fn >= fx - slack
        moved = np.where(ok, np.max(np.abs(xn - x) / width, axis=1), 0.0)
        X[idx] = np.where(ok[:, None], xn, x)
        f[idx] = np.where(ok, fn, fx)
        # stalled in floating point at a stationary point: round-off floor
        stuck = (moved < 1e-13) & (pn < 1e-6)
        converged[idx[stuck]] = True
        active[idx[stuck]] = False

    if not converged.any():
        raise NoConvergenceError(f"none of {n} starts converged in {opts.max_iter} iterations")
    best = int(np.argmax(f))  # first index on ties
    if not converged[best]:
        raise NoConvergenceError("best point found by a start that did not converge")
    M = float(f[best])
    x0 = X[best].copy()
    tol = opts.value_tol * max(1.0, abs(M))
    agreeing = int(np.sum(converged & (f >= M - tol)))
    H0 = sample.hessians(x0[None, :])[0]
    near = np.any((x0 - dom.lo <= 2 * eps) | (dom.hi - x0 <= 2 * eps))
    return MaxResult(
        M=M, x0=x0, hessian_at_max=H0, interior=not near,
        min_abs_det=float(abs(np.linalg.det(H0))), n_starts_agreeing=agreeing,
        gradient_norm=float(gnorm[best]),
    )


def brute_force_max(sample: FieldSample, points_per_axis: int, polish: bool = False,
                    max_points: int = 50_000_000, chunk: int = 250_000):
    """Exhaustive maximum over the closed tensor grid (endpoints included).

    Without ``polish`` this is a lower bound on the true maximum. With
    ``polish`` the best grid point is refined by a bounded quasi-Newton
    search (scipy), an optimiser independent of :func:`find_max`.
    """
    if points_per_axis < 2:
        raise ValidationError("points_per_axis must be at least 2")
    dom = sample.spec.domain
    d = dom.dim
    total = points_per_axis ** d
    if total > max_points:
        raise GridTooLargeError(f"{total} grid points exceed the budget of {max_points}")
    axes = [np.linspace(a, b, points_per_axis) for a, b in zip(dom.lower, dom.upper)]
    best_val, best_x = -np.inf, None
    for start in range(0, total, chunk):
        flat = np.arange(start, min(start + chunk, total))
        sub = np.unravel_index(flat, (points_per_axis,) * d)
        P = np.stack([axes[i][sub[i]] for i in range(d)], axis=1)
        v = sample.values(P)
        k = int(np.argmax(v))
        if v[k] > best_val:
            best_val, best_x = float(v[k]), P[k].copy()
    if polish:
        res = minimize(lambda z: -sample.values(z[None, :])[0], best_x,
                       jac=lambda z: -sample.gradients(z[None, :])[0],
                       method="L-BFGS-B", bounds=list(zip(dom.lower, dom.upper)),
                       options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 500})
        if -res.fun > best_val:
            best_val, best_x = float(-res.fun), res.x
    return best_val, best_x


def check_nondegeneracy(result: MaxResult, det_tolerance: float = 1e-8,
                        eigen_tolerance: float = 1e-8) -> bool:
    """Interior, non-singular Hessian, and a maximum rather than a saddle."""
    if not result.interior:
        return False
    if abs(np.linalg.det(result.hessian_at_max)) <= det_tolerance:
        return False
    return bool(np.all(np.linalg.eigvalsh(result.hessian_at_max) <= eigen_tolerance))
