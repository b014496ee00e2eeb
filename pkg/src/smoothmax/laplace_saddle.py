"""Hessian-weighted Laplace integrals and the moment generating function of the maximum.

For one sample ``I(lam) = int_D zeta(x) exp(lam xi(x)) dx`` with
``zeta = |det Hessian|^{1/2}``. The multivariate Laplace method gives
``I(lam) ~ (2 pi / lam)^{d/2} exp(lam M)`` because ``zeta(x0)`` cancels the
Gaussian determinant factor. Averaging over replicates,
``E exp(lam M) ~ lam^{d/2} G(lam)`` with ``G = (2 pi)^{-d/2} E I``.

Everything is accumulated in log space. Replicate sets are generated once
(:func:`simulate_replicates`) and every estimator below reuses the same
replicate ids, so numerator and denominator of a ratio are paired.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from .errors import DegenerateMaximumError, EffectiveSampleSizeError, NumericError
from .extremum import MaxResult, MaximizerOptions, check_nondegeneracy, find_max
from .field_model import FieldSample, FieldSpec, sample_field
from .logspace import LogValue, leave_one_out_logsumexp
from .quadrature import QuadOptions, log_integrate

MIN_ESS = 10.0
_PEAK_MULTIPLES = (0.5, 1.0, 2.0, 4.0, 8.0, 16.0)


def log_K(d: int) -> float:
    """``log K(d)`` with ``K(d) = (2 pi)^{-d/2}``."""
    return -0.5 * d * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class SaddleReport:
    lam: float
    log_I: LogValue
    log_approx: LogValue
    ratio: float
    n_quad_points: int


@dataclass(frozen=True)
class LogEstimate:
    """Monte Carlo estimate of a positive quantity, kept as a logarithm."""

    value: LogValue
    se_log: float
    n: int
    ess: float | None = None

    @property
    def log(self) -> float:
        return self.value.log_magnitude


@dataclass(frozen=True)
class RatioEstimate:
    ratio: float
    log_ratio: float
    se_log: float
    ci: tuple
    ess: float
    log_mgf: float
    log_G: float
    n: int

    def ci_contains(self, value: float = 1.0) -> bool:
        return self.ci[0] <= value <= self.ci[1]


# -- single sample -------------------------------------------------------------

def _peak_breakpoints(sample: FieldSample, lam: float, peak: MaxResult | None):
    if peak is None or lam <= 0:
        return None
    curv = np.abs(np.diag(peak.hessian_at_max))
    width = sample.spec.domain.width
    out = []
    for i in range(sample.dim):
        w = 1.0 / math.sqrt(lam * curv[i]) if curv[i] > 0 else width[i]
        w = min(w, width[i])
        offs = np.array(_PEAK_MULTIPLES) * w
        out.append(np.concatenate([[peak.x0[i]], peak.x0[i] - offs, peak.x0[i] + offs]))
    return out


def _integral(sample: FieldSample, lam: float, quad: QuadOptions | None, peak: MaxResult | None):
    if lam < 0:
        raise ValueError("lambda must be non-negative")

    def log_f(X):
        lz = sample.log_zeta(X)
        return lz if lam == 0 else lz + lam * sample.values(X)

    dom = sample.spec.domain
    return log_integrate(log_f, dom.lo, dom.hi, quad, _peak_breakpoints(sample, lam, peak))


def integral_I(sample: FieldSample, lam: float, quad: QuadOptions | None = None,
               peak: MaxResult | None = None) -> LogValue:
    """``log I(lam)`` by adaptive Gauss-Legendre quadrature.

    ``peak`` (the sample's :class:`MaxResult`) adds cell boundaries at
    multiples of the peak width ``(lam |eta_ii|)^{-1/2}`` around ``x0``.
    """
    return _integral(sample, lam, quad, peak).value


def saddle_approx(result: MaxResult, lam: float, det_tolerance: float = 1e-8) -> LogValue:
    """``(2 pi / lam)^{d/2} exp(lam M)`` in log space."""
    if not check_nondegeneracy(result, det_tolerance):
        raise DegenerateMaximumError("saddle-point approximation needs an interior, "
                                     "non-degenerate maximum")
    d = result.dim
    return LogValue(0.5 * d * math.log(2.0 * math.pi / lam) + lam * result.M)


def unit_constant_approx(result: MaxResult, lam: float) -> LogValue:
    """The alternative normalisation ``K(d) lam^{-d/2} exp(lam M)``.

    Kept only to quantify the discrepancy: it differs from the Laplace
    asymptotic by the factor ``(2 pi)^d``.
    """
    d = result.dim
    return LogValue(log_K(d) - 0.5 * d * math.log(lam) + lam * result.M)


def saddle_report(sample: FieldSample, lam: float, quad: QuadOptions | None = None,
                  maxopts: MaximizerOptions | None = None,
                  result: MaxResult | None = None) -> SaddleReport:
    result = result or find_max(sample, maxopts)
    approx = saddle_approx(result, lam, (maxopts or MaximizerOptions()).det_tol)
    q = _integral(sample, lam, quad, result)
    return SaddleReport(lam, q.value, approx, q.value.ratio_to(approx), q.n_points)


def pathwise_ratio(sample: FieldSample, lam: float, quad: QuadOptions | None = None,
                   maxopts: MaximizerOptions | None = None,
                   result: MaxResult | None = None) -> float:
    """``I(lam) / ((2 pi/lam)^{d/2} e^{lam M})``, which tends to 1 for each sample."""
    return saddle_report(sample, lam, quad, maxopts, result).ratio


# -- replicate sets ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ReplicateSet:
    """Maxima and ``log I`` for a fixed list of replicate ids and lambdas."""

    spec: FieldSpec
    replicate_ids: np.ndarray
    lambdas: np.ndarray
    maxima: np.ndarray
    log_I: np.ndarray           # shape (n, len(lambdas))
    nondegenerate: np.ndarray
    argmax: np.ndarray = field(repr=False, default=None)

    @property
    def n(self) -> int:
        return self.maxima.size

    @property
    def dim(self) -> int:
        return self.spec.dim

    def column(self, lam: float) -> np.ndarray:
        hits = np.flatnonzero(np.isclose(self.lambdas, lam, rtol=1e-12, atol=0.0))
        if hits.size == 0:
            raise KeyError(f"lambda {lam} was not simulated")
        return self.log_I[:, hits[0]]


def _threads(threads):
    if threads is not None:
        return max(1, int(threads))
    return max(1, int(os.environ.get("SMOOTHMAX_THREADS", "1")))


def _one_replicate(spec, rid, lambdas, quad, maxopts, det_tol):
    s = sample_field(spec, int(rid))
    r = find_max(s, maxopts)
    logs = [_integral(s, lam, quad, r).value.log_magnitude for lam in lambdas]
    return r.M, r.x0, logs, check_nondegeneracy(r, det_tol)


def simulate_replicates(spec: FieldSpec, lambdas, n_replicates: int, first_id: int = 0,
                        quad: QuadOptions | None = None,
                        maxopts: MaximizerOptions | None = None,
                        threads: int | None = None) -> ReplicateSet:
    """Sample, maximise and integrate replicates ``first_id .. first_id + n - 1``.

    The result depends only on the arguments, never on thread count or
    scheduling order.
    """
    if n_replicates < 1:
        raise ValueError("n_replicates must be at least 1")
    lambdas = np.atleast_1d(np.asarray(lambdas, dtype=float))
    maxopts = maxopts or MaximizerOptions()
    ids = np.arange(first_id, first_id + n_replicates)
    n_threads = _threads(threads)
    args = (lambdas, quad, maxopts, maxopts.det_tol)
    if n_threads == 1:
        rows = [_one_replicate(spec, rid, *args) for rid in ids]
    else:
        with ThreadPoolExecutor(n_threads) as pool:
            rows = list(pool.map(lambda rid: _one_replicate(spec, rid, *args), ids))
    return ReplicateSet(
        spec=spec, replicate_ids=ids, lambdas=lambdas,
        maxima=np.array([r[0] for r in rows]),
        log_I=np.array([r[2] for r in rows]).reshape(n_replicates, lambdas.size),
        nondegenerate=np.array([r[3] for r in rows]),
        argmax=np.array([r[1] for r in rows]),
    )


@lru_cache(maxsize=8)
def _cached_replicates(spec, lam, n, first_id, quad, maxopts):
    return simulate_replicates(spec, [lam], n, first_id, quad, maxopts)


def _replicates_for(spec, lam, n, replicates, quad, maxopts):
    if replicates is not None:
        if replicates.n != n:
            raise ValueError("replicate set size does not match n_replicates")
        return replicates
    return _cached_replicates(spec, float(lam), int(n), 0, quad, maxopts)


# -- estimators on arrays ------------------------------------------------------

def effective_sample_size(log_weights) -> float:
    """``(sum w)^2 / sum w^2`` for weights given by their logarithms."""
    lw = np.asarray(log_weights, dtype=float)
    if lw.size == 0 or np.all(lw == -np.inf):
        return 0.0
    return float(np.exp(2.0 * logsumexp(lw) - logsumexp(2.0 * lw)))


def _jackknife_se(loo_estimates) -> float:
    n = loo_estimates.size
    if n < 2:
        return float("nan")
    dev = loo_estimates - loo_estimates.mean()
    return float(math.sqrt((n - 1) / n * np.sum(dev * dev)))


def log_mean_exp(logs) -> LogEstimate:
    """``log (1/n) sum exp(logs)`` with a jackknife standard error of the log."""
    logs = np.asarray(logs, dtype=float)
    n = logs.size
    value = LogValue.from_logs(logs).scale_log(-math.log(n))
    se = float("nan")
    if n >= 2:
        se = _jackknife_se(leave_one_out_logsumexp(logs) - math.log(n - 1))
    return LogEstimate(value, se, n, effective_sample_size(logs))


def log_mgf(maxima, lam: float, min_ess: float | None = MIN_ESS) -> LogEstimate:
    """``log E exp(lam M)`` from a vector of maxima.

    Raises :class:`EffectiveSampleSizeError` when fewer than ``min_ess``
    effective samples carry the estimate.
    """
    est = log_mean_exp(lam * np.asarray(maxima, dtype=float))
    if min_ess is not None and lam != 0 and est.ess < min_ess:
        raise EffectiveSampleSizeError(
            f"effective sample size {est.ess:.2f} < {min_ess} at lambda={lam}",
            ess=est.ess, estimate=est)
    return est


def ratio_from_arrays(maxima, log_I, lam: float, d: int, min_ess: float | None = MIN_ESS,
                      z: float = 1.959963984540054) -> RatioEstimate:
    """``E e^{lam M} / (lam^{d/2} G(lam))`` from per-replicate arrays.

    Paired when ``maxima[i]`` and ``log_I[i]`` come from the same replicate;
    the 1/n normalisations cancel. The jackknife drops one replicate from
    numerator and denominator at once.
    """
    num = lam * np.asarray(maxima, dtype=float)
    den = np.asarray(log_I, dtype=float)
    n = num.size
    if den.size != n:
        raise ValueError("numerator and denominator need the same replicate count")
    offset = 0.5 * d * math.log(lam) + log_K(d)
    lse_num, lse_den = logsumexp(num), logsumexp(den)
    log_ratio = float(lse_num - lse_den - offset)
    ess = effective_sample_size(num)
    if min_ess is not None and ess < min_ess:
        raise EffectiveSampleSizeError(
            f"effective sample size {ess:.2f} < {min_ess} at lambda={lam}", ess=ess)
    se = float("nan")
    if n >= 2:
        loo = leave_one_out_logsumexp(num) - leave_one_out_logsumexp(den) - offset
        se = _jackknife_se(loo)
    ci = (math.exp(log_ratio - z * se), math.exp(log_ratio + z * se))
    log_mgf_ = float(lse_num - math.log(n))
    log_G = float(lse_den - math.log(n) + log_K(d))
    return RatioEstimate(math.exp(log_ratio), log_ratio, se, ci, ess, log_mgf_, log_G, n)


def laplace_tail_integral(maxima, lam: float, lower: float = -math.inf) -> LogValue:
    """``lam * int_lower^inf exp(lam z) T(z) dz`` for the empirical tail ``T``.

    Computed exactly from the step function ``T(z) = #{M_i > z} / n``. With
    ``lower = -inf`` this equals the empirical mean of ``exp(lam M)`` for any
    sample; with ``lower = 0`` and non-negative maxima it equals that mean
    minus one.
    """
    m = np.sort(np.asarray(maxima, dtype=float))
    n = m.size
    s = m[m > lower]
    k0 = n - s.size
    edges = np.concatenate([[lower], s])
    weights = (n - k0 - np.arange(s.size)) / n
    a, b = edges[:-1], edges[1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        gap = np.where(np.isfinite(a), lam * (a - b), -np.inf)
        terms = np.log(weights) + lam * b + np.log(-np.expm1(gap))
    return LogValue.from_logs(terms[np.isfinite(terms)])


# -- estimators on a field spec ------------------------------------------------

def estimate_G(spec: FieldSpec, lam: float, n_replicates: int,
               quad: QuadOptions | None = None, maxopts: MaximizerOptions | None = None,
               replicates: ReplicateSet | None = None) -> LogEstimate:
    """``G(lam) = K(d) E I(lam)`` averaged over replicates ``0 .. n-1``."""
    reps = _replicates_for(spec, lam, n_replicates, replicates, quad, maxopts)
    est = log_mean_exp(reps.column(lam))
    return LogEstimate(est.value.scale_log(log_K(spec.dim)), est.se_log, est.n, est.ess)


def mgf_of_max(spec: FieldSpec, lam: float, n_replicates: int,
               quad: QuadOptions | None = None, maxopts: MaximizerOptions | None = None,
               replicates: ReplicateSet | None = None,
               min_ess: float | None = MIN_ESS) -> LogEstimate:
    """``E exp(lam M)`` on the same replicate ids as :func:`estimate_G`."""
    if lam == 0:
        return LogEstimate(LogValue(0.0), 0.0, n_replicates, float(n_replicates))
    reps = _replicates_for(spec, lam, n_replicates, replicates, quad, maxopts)
    return log_mgf(reps.maxima, lam, min_ess)


def mgf_saddle_ratio(spec: FieldSpec, lam: float, n_replicates: int,
                   quad: QuadOptions | None = None, maxopts: MaximizerOptions | None = None,
                   replicates: ReplicateSet | None = None,
                   min_ess: float | None = MIN_ESS) -> RatioEstimate:
    """Paired estimate of ``E e^{lam M} / (lam^{d/2} G(lam))``."""
    reps = _replicates_for(spec, lam, n_replicates, replicates, quad, maxopts)
    return ratio_from_arrays(reps.maxima, reps.column(lam), lam, spec.dim, min_ess)


def laplace_R(spec: FieldSpec, lam: float, n_replicates: int,
                quad: QuadOptions | None = None, maxopts: MaximizerOptions | None = None,
                replicates: ReplicateSet | None = None) -> LogEstimate:
    """``R(lam) = lam^{d/2 - 1} (2 pi)^{-d/2} int_D E[zeta(x) e^{lam xi(x)}] dx``.

    The inner integral equals ``E I(lam)`` (Fubini) and is estimated from the
    same replicate sums as :func:`estimate_G`, so ``R = lam^{d/2-1} G``.
    """
    d = spec.dim
    G = estimate_G(spec, lam, n_replicates, quad, maxopts, replicates)
    return LogEstimate(G.value.scale_log((0.5 * d - 1.0) * math.log(lam)), G.se_log, G.n, G.ess)


# interface names used by external callers
theorem1_ratio = mgf_saddle_ratio
corollary_R = laplace_R


def tail_mgf_identity(maxima, lam: float) -> tuple:
    """``(log lam int e^{lam z} T(z) dz, log mean e^{lam M})`` on one empirical measure."""
    lhs = laplace_tail_integral(maxima, lam)
    rhs = log_mean_exp(lam * np.asarray(maxima, dtype=float)).value
    if lhs.is_zero or rhs.is_zero:
        raise NumericError("empty empirical measure")
    return lhs.log_magnitude, rhs.log_magnitude
