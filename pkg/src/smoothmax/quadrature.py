"""Adaptive tensor-product Gauss-Legendre quadrature in log space.

The integrand is supplied through its logarithm, ``log_f(X) -> array``, so
integrals of ``exp(lambda * xi(x))`` with ``lambda * xi`` in the hundreds
never overflow. Cells are refined dyadically (all axes at once); a cell is
accepted when the estimate from its ``2**d`` children agrees with its own
estimate to ``tol`` relative to the running total.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from .errors import QuadratureError
from .logspace import LogValue


@dataclass(frozen=True)
class QuadOptions:
    tol: float = 1e-8
    order: int = 16
    max_levels: int = 60
    max_cells: int = 200_000
    initial_cells: int = 8


@dataclass(frozen=True)
class QuadResult:
    value: LogValue
    n_points: int
    n_cells: int
    levels: int


@lru_cache(maxsize=None)
def _rule(order: int, d: int):
    """Tensor GL nodes on [0, 1]^d and log weights."""
    x, w = np.polynomial.legendre.leggauss(order)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    nodes = np.array(list(itertools.product(x, repeat=d)))
    logw = np.log(np.array([np.prod(c) for c in itertools.product(w, repeat=d)]))
    return nodes, logw


@lru_cache(maxsize=None)
def _child_offsets(d: int):
    return np.array(list(itertools.product((0.0, 0.5), repeat=d)))


def _cell_estimates(log_f, lo, width, order):
    """Log-integral of each cell; ``lo``/``width`` have shape (m, d)."""
    m, d = lo.shape
    nodes, logw = _rule(order, d)
    pts = lo[:, None, :] + width[:, None, :] * nodes[None, :, :]
    vals = np.asarray(log_f(pts.reshape(-1, d)), dtype=float).reshape(m, -1)
    vals = np.where(np.isnan(vals), -np.inf, vals)
    logvol = np.sum(np.log(width), axis=1)
    return logsumexp(vals + logw[None, :], axis=1) + logvol


def _children(lo, width):
    d = lo.shape[1]
    offs = _child_offsets(d)
    half = 0.5 * width
    clo = (lo[:, None, :] + offs[None, :, :] * width[:, None, :]).reshape(-1, d)
    cw = np.repeat(half, offs.shape[0], axis=0)
    return clo, cw


def _axis_breaks(lower, upper, initial_cells, extra):
    breaks = np.linspace(lower, upper, initial_cells + 1)
    if extra is None or not len(extra):
        return breaks
    extra = np.asarray(extra, dtype=float)
    inner = np.union1d(breaks[1:-1], extra[(extra > lower) & (extra < upper)])
    # drop slivers created by near-coincident breakpoints
    tiny = 1e-9 * (upper - lower)
    out = [lower]
    for b in inner:
        if b - out[-1] > tiny and upper - b > tiny:
            out.append(b)
    out.append(upper)
    return np.array(out)


def log_integrate(log_f, lower, upper, opts: QuadOptions | None = None,
                  breakpoints=None) -> QuadResult:
    """Integrate ``exp(log_f)`` over the box ``[lower, upper]``.

    Parameters
    ----------
    log_f : callable
        Maps an ``(n, d)`` array of points to ``n`` log-integrand values;
        ``-inf`` encodes an exact zero.
    lower, upper : array_like
        Box corners.
    breakpoints : sequence of arrays, optional
        Extra per-axis cell boundaries (e.g. around a known peak).
    """
    opts = opts or QuadOptions()
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    d = lower.size
    axes = []
    for i in range(d):
        extra = None if breakpoints is None else breakpoints[i]
        axes.append(_axis_breaks(lower[i], upper[i], opts.initial_cells, extra))
    grids = [np.stack([b[:-1], np.diff(b)], axis=1) for b in axes]
    combos = list(itertools.product(*[range(len(g)) for g in grids]))
    lo = np.array([[grids[i][c[i], 0] for i in range(d)] for c in combos])
    width = np.array([[grids[i][c[i], 1] for i in range(d)] for c in combos])

    order = opts.order
    per_cell = order ** d
    n_points = lo.shape[0] * per_cell
    parent = _cell_estimates(log_f, lo, width, order)
    accepted = []
    n_cells = lo.shape[0]
    nch = 2 ** d

    for level in range(1, opts.max_levels + 1):
        clo, cw = _children(lo, width)
        child = _cell_estimates(log_f, clo, cw, order)
        n_points += clo.shape[0] * per_cell
        n_cells += clo.shape[0]
        child_sum = logsumexp(child.reshape(-1, nch), axis=1)
        total = logsumexp(np.concatenate([accepted, child_sum]) if accepted else child_sum)
        if total == -np.inf:
            return QuadResult(LogValue.zero(), n_points, n_cells, level)
        err = np.abs(np.exp(parent - total) - np.exp(child_sum - total))
        err = np.where(np.isnan(err), 0.0, err)
        ok = err <= opts.tol
        accepted.extend(child_sum[ok].tolist())
        if ok.all():
            return QuadResult(LogValue.from_logs(accepted), n_points, n_cells, level)
        if n_cells > opts.max_cells:
            break
        refine = np.repeat(~ok, nch)
        lo, width, parent = clo[refine], cw[refine], child[refine]
    raise QuadratureError(
        f"tolerance {opts.tol:g} not reached within {opts.max_levels} levels / "
        f"{opts.max_cells} cells")
