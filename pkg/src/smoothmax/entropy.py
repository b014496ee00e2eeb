"""Covering numbers, metric entropy and metric dimension on finite point sets."""
from __future__ import annotations

import csv
import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientScalesError, NonGaussianSpecError, ResolutionExhaustedError, ValidationError
from .field_model import FieldSpec, sample_coefficients
from .orlicz import PhiFunction, bphi_norm

# a dyadic scale is resolvable when it is at least this multiple of the
# largest nearest-neighbour gap of the point set
RESOLUTION_FACTOR = 4.0


@dataclass(frozen=True, eq=False)
class MetricSample:
    points: np.ndarray
    dist: np.ndarray = field(repr=False)

    def __post_init__(self):
        D = np.asarray(self.dist, dtype=float)
        n = D.shape[0]
        if D.shape != (n, n):
            raise ValidationError("distance matrix must be square")
        if len(self.points) != n:
            raise ValidationError("one point per distance row")
        if np.any(D < 0) or np.any(np.diag(D) != 0):
            raise ValidationError("distances must be non-negative with zero diagonal")
        if not np.allclose(D, D.T, rtol=0, atol=1e-12):
            raise ValidationError("distance matrix must be symmetric")
        object.__setattr__(self, "dist", D)
        object.__setattr__(self, "points", np.asarray(self.points, dtype=float))

    @classmethod
    def euclidean(cls, points, metric: str = "euclidean") -> "MetricSample":
        P = np.asarray(points, dtype=float)
        if P.ndim == 1:
            P = P[:, None]
        diff = np.abs(P[:, None, :] - P[None, :, :])
        if metric == "euclidean":
            D = np.sqrt(np.sum(diff ** 2, axis=2))
        elif metric == "sup":
            D = np.max(diff, axis=2)
        else:
            raise ValidationError(f"unknown metric {metric!r}")
        return cls(P, D)

    @property
    def size(self) -> int:
        return self.dist.shape[0]

    @property
    def diameter(self) -> float:
        return float(self.dist.max()) if self.size else 0.0

    @property
    def resolution(self) -> float:
        """Largest nearest-neighbour distance: finer scales cannot be resolved."""
        if self.size < 2:
            return 0.0
        D = self.dist + np.diag(np.full(self.size, np.inf))
        return float(np.max(np.min(D, axis=1)))

    def triangle_violation(self, n_triples: int = 20000, seed: int = 0) -> float:
        """Largest ``d(a,c) - d(a,b) - d(b,c)`` over random triples."""
        n = self.size
        if n < 3:
            return 0.0
        rng = np.random.default_rng(seed)
        a, b, c = rng.integers(0, n, size=(3, n_triples))
        D = self.dist
        return float(max(0.0, np.max(D[a, c] - D[a, b] - D[b, c])))

    def scaled(self, factor: float) -> "MetricSample":
        return MetricSample(self.points, self.dist * factor)

    def subset(self, idx) -> "MetricSample":
        idx = np.asarray(idx)
        return MetricSample(self.points[idx], self.dist[np.ix_(idx, idx)])


def natural_distance_matrix(spec: FieldSpec, points, mode: str = "analytic-gaussian",
                            n_replicates: int = 100_000, phi: PhiFunction | None = None,
                            threads: int | None = None) -> MetricSample:
    """Natural semi-distance ``||xi°(z1) - xi°(z2)||_B(phi)`` between points.

    ``analytic-gaussian`` uses the covariance formula and needs Gaussian
    coefficients. ``empirical-bphi`` estimates the B(phi) norm of the
    increment from ``n_replicates`` simulated coefficient vectors.
    """
    P, _ = spec._check(points)
    m = P.shape[0]
    B = spec.basis_values(P)
    if mode == "analytic-gaussian":
        if not spec.is_gaussian:
            raise NonGaussianSpecError("analytic natural distance needs Gaussian coefficients")
        var = spec._arrays[3]
        diff = B[:, None, :] - B[None, :, :]
        D = np.sqrt(np.sum(var * diff ** 2, axis=2))
        return MetricSample(P, D)
    if mode != "empirical-bphi":
        raise ValidationError(f"unknown distance mode {mode!r}")
    phi = phi or PhiFunction.gaussian()
    V = sample_coefficients(spec, range(n_replicates)) @ B.T
    pairs = list(itertools.combinations(range(m), 2))

    def one(pair):
        i, j = pair
        # xi° is centred by construction; the sample mean is noise
        return bphi_norm(V[:, i] - V[:, j], phi, check_centered=False).value

    threads = threads or int(os.environ.get("SMOOTHMAX_THREADS", "1"))
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        vals = list(pool.map(one, pairs))
    D = np.zeros((m, m))
    for (i, j), v in zip(pairs, vals):
        D[i, j] = D[j, i] = v
    return MetricSample(P, D)


def covering_number(ms: MetricSample, epsilon: float, return_centers: bool = False):
    """Greedy epsilon-cover with centres from the point set.

    Points are swept in order of decreasing distance from an extreme anchor.
    The first uncovered point is covered by the candidate centre (within
    epsilon of it) that covers the most uncovered points. On sorted 1-d sets
    this is the classical interval greedy, which is optimal; in general the
    count is an upper bound on the minimal cover of the set.
    """
    if not epsilon > 0:
        raise ValidationError("epsilon must be positive")
    n = ms.size
    if n == 0:
        return (0, []) if return_centers else 0
    D = ms.dist
    tol = epsilon * (1.0 + 1e-12)
    anchor = int(np.argmax(D[0]))
    order = np.argsort(-D[anchor], kind="stable")
    uncovered = np.ones(n, dtype=bool)
    centers = []
    for p in order:
        if not uncovered[p]:
            continue
        cand = np.flatnonzero(D[p] <= tol)
        gain = (D[cand] <= tol) @ uncovered.astype(np.int64)
        # ties go to the candidate farthest from p (pushes the sweep forward)
        best = cand[np.lexsort((-D[p, cand], -gain))[0]]
        centers.append(int(best))
        uncovered &= D[best] > tol
    return (len(centers), centers) if return_centers else len(centers)


def optimal_cover_size(ms: MetricSample, epsilon: float) -> int:
    """Exact minimal cover by brute force; only for tiny sets (oracle)."""
    n = ms.size
    if n > 16:
        raise ValidationError("brute-force cover is limited to 16 points")
    if n == 0:
        return 0
    cov = ms.dist <= epsilon * (1.0 + 1e-12)
    for k in range(1, n + 1):
        for subset in itertools.combinations(range(n), k):
            if np.all(np.any(cov[list(subset)], axis=0)):
                return k
    return n


@dataclass(frozen=True)
class EntropySeries:
    n: np.ndarray
    eps: np.ndarray
    covering: np.ndarray
    entropy: np.ndarray
    terms: np.ndarray
    partial_sums: np.ndarray
    verdict: str
    normalization: float
    resolvable: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "eps", "covering_number", "entropy", "term", "partial_sum", "verdict"])
            for k in range(self.n.size):
                w.writerow([int(self.n[k]), repr(float(self.eps[k])), int(self.covering[k]),
                            repr(float(self.entropy[k])), repr(float(self.terms[k])),
                            repr(float(self.partial_sums[k])), self.verdict])


def _normalized(ms: MetricSample):
    diam = ms.diameter
    factor = 1.0 / diam if diam > 0 else 1.0
    return ms.scaled(factor), factor


def entropy_series(ms: MetricSample, n_max: int = 10, window: int = 5,
                   ratio: float = 0.9, strict: bool = False) -> EntropySeries:
    """Partial sums of ``sum_n 2^-n log N(2^-n)`` after scaling the diameter to one.

    The verdict is ``converges`` when the ratio of consecutive terms stays
    below ``ratio`` across the last ``window`` resolvable terms. Scales below
    the resolving power of the point set are dropped; if that leaves too few
    terms the verdict is ``inconclusive beyond n=<k>`` (or, with ``strict``,
    :class:`ResolutionExhaustedError` is raised).
    """
    if n_max < 1:
        raise ValidationError("n_max must be at least 1")
    norm, factor = _normalized(ms)
    limit = RESOLUTION_FACTOR * norm.resolution
    n = np.arange(1, n_max + 1)
    eps = 2.0 ** -n
    resolvable = eps >= limit * (1.0 - 1e-9)
    usable = n[resolvable]
    if usable.size < n_max and strict:
        raise ResolutionExhaustedError(
            f"scale 2^-{usable.size + 1} is below the resolving power of {norm.size} points")
    n, eps = usable, eps[resolvable]
    cov = np.array([covering_number(norm, e) for e in eps], dtype=int)
    H = np.log(cov)
    terms = eps * H
    partial = np.cumsum(terms)

    if norm.diameter == 0:
        verdict = "converges"
    elif terms.size < window:
        verdict = f"inconclusive beyond n={int(n[-1]) if n.size else 0}"
    else:
        t = terms[-window:]
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(t[:-1] > 0, t[1:] / t[:-1], np.where(t[1:] > 0, np.inf, 0.0))
        verdict = "converges" if np.all(r < ratio) else f"inconclusive beyond n={int(n[-1])}"
    return EntropySeries(n, eps, cov, H, terms, partial, verdict, factor, resolvable)


def metric_dimension(ms: MetricSample, min_scales: int = 3) -> float:
    """Least-squares slope of ``H(eps)`` against ``|log eps|`` over resolvable dyadic scales."""
    if ms.size < 2 or ms.diameter == 0:
        return 0.0
    norm, _ = _normalized(ms)
    limit = RESOLUTION_FACTOR * norm.resolution
    k_max = int(math.floor(-math.log2(limit) + 1e-9)) if limit > 0 else 30
    eps = 2.0 ** -np.arange(1, k_max + 1)
    if eps.size < min_scales:
        raise InsufficientScalesError(
            f"only {eps.size} resolvable dyadic scales; {min_scales} needed")
    H = np.log([covering_number(norm, e) for e in eps])
    slope, _ = np.polyfit(-np.log(eps), H, 1)
    return float(slope)
