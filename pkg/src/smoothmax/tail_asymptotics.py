"""Tail of the maximum from the growth of its Laplace transform.

If ``R(lam) ~ C lam^alpha exp(lam^q / q)`` then, with ``p = q / (q - 1)``,
the predicted tail is

    T(u) ~ (2 pi)^(-1/2) C u^(alpha (p - 1) - 1 + p / 2) exp(-u^p / p).

The Laplace-type integral ``J = int_0^inf y^gamma exp(lam y - y^p / p) dy``
links the two; its standard Laplace asymptotic carries the constant
``(2 pi / (p - 1))^(1/2)``, so the simpler ``(2 pi)^(1/2)`` form is exact
only at ``p = 2``. Both are reported.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import beta

from .errors import DegenerateFitError, ValidationError
from .quadrature import QuadOptions, log_integrate

LOG_2PI = math.log(2.0 * math.pi)
Q_CANDIDATES = (1.25, 1.5, 2.0, 2.5, 3.0)


@dataclass(frozen=True)
class AsymptoticParams:
    alpha: float
    C_R: float
    q: float
    degenerate: bool = False
    residuals: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        if not self.q > 1:
            raise ValidationError("q must exceed 1")
        if not self.C_R > 0:
            raise ValidationError("C_R must be positive")

    @property
    def p(self) -> float:
        return self.q / (self.q - 1.0)

    @property
    def gamma(self) -> float:
        """Exponent of ``u`` in the predicted tail."""
        return self.alpha * (self.p - 1.0) - 1.0 + self.p / 2.0

    @property
    def Delta(self) -> float:
        return delta(self.gamma, self.p)

    def log_R(self, lam):
        lam = np.asarray(lam, dtype=float)
        return math.log(self.C_R) + self.alpha * np.log(lam) + lam ** self.q / self.q


def delta(gamma: float, p: float) -> float:
    return (2.0 * gamma + 2.0 - p) / (2.0 * (p - 1.0))


@dataclass(frozen=True, eq=False)
class TailCurve:
    u: np.ndarray
    tail: np.ndarray
    source: str
    n: int | None = None
    adjusted: np.ndarray | None = field(default=None, repr=False)
    log_tail: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        t = np.asarray(self.tail, dtype=float)
        if u.shape != t.shape or u.ndim != 1:
            raise ValidationError("u and tail must be matching vectors")
        if np.any(np.diff(u) <= 0):
            raise ValidationError("u grid must be strictly increasing")
        if np.any((t < 0) | (t > 1)):
            raise ValidationError("tail values must lie in [0, 1]")
        if np.any(np.diff(t) > 0):
            raise ValidationError("tail must be non-increasing")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "tail", t)

    def bands(self, confidence: float = 0.95):
        """Two-sided Clopper-Pearson band; empirical curves only."""
        if self.n is None:
            raise ValidationError("confidence bands need an empirical curve")
        k = np.rint(self.tail * self.n)
        a = (1.0 - confidence) / 2.0
        lo = np.where(k > 0, beta.ppf(a, k, self.n - k + 1), 0.0)
        hi = np.where(k < self.n, beta.ppf(1.0 - a, k + 1, self.n - k), 1.0)
        return np.nan_to_num(lo), np.nan_to_num(hi, nan=1.0)

    def to_csv(self, path) -> None:
        if self.n is not None:
            lo, hi = self.bands()
        else:
            lo = hi = np.full(self.u.size, np.nan)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["u", "tail", "lower95", "upper95", "source"])
            for row in zip(self.u, self.tail, lo, hi):
                w.writerow([repr(float(v)) for v in row] + [self.source])


def empirical_tail(maxima, u_grid) -> TailCurve:
    """``T(u) = #{M_i > u} / n`` on an increasing grid."""
    M = np.sort(np.asarray(maxima, dtype=float).ravel())
    if M.size == 0:
        raise ValidationError("need at least one maximum")
    u = np.asarray(u_grid, dtype=float)
    t = (M.size - np.searchsorted(M, u, side="right")) / M.size
    return TailCurve(u, t, f"empirical(n={M.size})", n=M.size)


def log_predicted_tail(params: AsymptoticParams, u):
    u = np.asarray(u, dtype=float)
    return (-0.5 * LOG_2PI + math.log(params.C_R) + params.gamma * np.log(u)
            - u ** params.p / params.p)


def predicted_tail(params: AsymptoticParams, u_grid) -> TailCurve:
    """Predicted tail on ``u_grid``, clipped to 1 and made non-increasing.

    Below the formula's stationary point the power factor can make it rise;
    those points are replaced by the smallest non-increasing majorant and
    marked in ``adjusted`` (clipped points are marked too).
    """
    u = np.asarray(u_grid, dtype=float)
    if np.any(u <= 0):
        raise ValidationError("u must be positive")
    lt = log_predicted_tail(params, u)
    clipped = np.minimum(lt, 0.0)
    mono = np.maximum.accumulate(clipped[::-1])[::-1]
    adjusted = (mono != lt)
    return TailCurve(u, np.exp(mono), "predicted", adjusted=adjusted, log_tail=lt)


def _log_J(gamma: float, p: float, lam: float, quad: QuadOptions | None = None):
    """``log int_0^inf y^gamma exp(lam y - y^p / p) dy`` by log-space quadrature."""
    if not gamma > -1:
        raise ValidationError("gamma must exceed -1 for integrability at 0")
    if not p > 1:
        raise ValidationError("p must exceed 1")
    if not lam > 0:
        raise ValidationError("lambda must be positive")

    def log_f(Y):
        y = Y[:, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            g = gamma * np.log(y) if gamma != 0 else 0.0
        return g + lam * y - y ** p / p

    ystar = lam ** (1.0 / (p - 1.0))
    sigma = 1.0 / math.sqrt((p - 1.0) * ystar ** (p - 2.0))
    peak = float(log_f(np.array([[ystar]]))[0])
    upper = ystar + sigma
    while float(log_f(np.array([[upper]]))[0]) > peak - 800.0:
        upper = ystar + 2.0 * (upper - ystar)
    breaks = [ystar + k * sigma for k in (-16, -8, -4, -2, -1, 0, 1, 2, 4, 8, 16)]
    opts = quad or QuadOptions(tol=1e-12)
    return log_integrate(log_f, [0.0], [upper], opts, breakpoints=[breaks]).value.log_magnitude


@dataclass(frozen=True)
class LaplaceCheck:
    numeric: float
    formula: float
    ratio: float
    log_numeric: float
    log_formula: float
    laplace_constant_ratio: float


def laplace_integral_check(gamma: float, p: float, lam: float,
                          quad: QuadOptions | None = None) -> LaplaceCheck:
    """Integral ``J`` against ``(2 pi)^(1/2) lam^Delta exp(lam^q / q)``.

    ``ratio`` uses that formula; ``laplace_constant_ratio`` divides by the
    standard Laplace constant ``(2 pi / (p - 1))^(1/2)`` instead. Linear
    values overflow to ``inf`` for large arguments; the logs do not.
    """
    q = p / (p - 1.0)
    log_num = _log_J(gamma, p, lam, quad)
    log_form = 0.5 * LOG_2PI + delta(gamma, p) * math.log(lam) + lam ** q / q
    log_ratio = log_num - log_form
    with np.errstate(over="ignore"):
        num, form = float(np.exp(log_num)), float(np.exp(log_form))
    return LaplaceCheck(num, form, math.exp(log_ratio), log_num, log_form,
                        math.exp(log_ratio + 0.5 * math.log(p - 1.0)))


# interface names used by external configs and callers
laplace_asymptotic_44 = laplace_integral_check
tail_prediction_45 = predicted_tail


def tauberian_consistency(params: AsymptoticParams, lam: float,
                          quad: QuadOptions | None = None) -> float:
    """``int_0^inf exp(lam z) T(z) dz / R(lam)`` with the unclipped predicted tail."""
    log_int = -0.5 * LOG_2PI + math.log(params.C_R) + _log_J(params.gamma, params.p, lam, quad)
    return math.exp(log_int - float(params.log_R(lam)))


def _fit_fixed_q(loglam, lam, logR, q):
    y = logR - lam ** q / q
    A = np.column_stack([loglam, np.ones_like(loglam)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    rss = float(np.sum((A @ coef - y) ** 2))
    return float(coef[0]), float(coef[1]), rss


def _golden_min(f, a, b, iters=80):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def fit_R_params(lambda_grid, log_R_values, q_candidates=Q_CANDIDATES) -> AsymptoticParams:
    """Fit ``log R = log C + alpha log lam + lam^q / q`` by least squares per ``q``.

    The best candidate ``q`` is refined by golden section between its
    neighbours and the refinement kept only if it lowers the residual. If a
    plain power law ``C lam^alpha`` fits at least as well, there is no
    exponential growth: that fit is returned with ``degenerate=True``.

    Raises
    ------
    DegenerateFitError
        If the residual is not unimodal across the sorted candidates.
    """
    lam = np.asarray(lambda_grid, dtype=float)
    logR = np.asarray(log_R_values, dtype=float)
    if lam.size != logR.size or lam.size < 6:
        raise ValidationError("need at least six (lambda, log R) pairs")
    if np.any(lam <= 0) or lam.max() < 10.0 * lam.min():
        raise ValidationError("lambda grid must be positive and span a decade")
    loglam = np.log(lam)
    qs = np.sort(np.asarray(q_candidates, dtype=float))
    if np.any(qs <= 1):
        raise ValidationError("q candidates must exceed 1")
    fits = [_fit_fixed_q(loglam, lam, logR, q) for q in qs]
    rss = np.array([f[2] for f in fits])
    table = tuple((float(q), a, c, r) for q, (a, c, r) in zip(qs, fits))

    A = np.column_stack([loglam, np.ones_like(loglam)])
    pcoef, *_ = np.linalg.lstsq(A, logR, rcond=None)
    p_rss = float(np.sum((A @ pcoef - logR) ** 2))
    k = int(np.argmin(rss))
    if p_rss <= rss[k]:
        return AsymptoticParams(float(pcoef[0]), math.exp(pcoef[1]), float(qs[k]),
                                degenerate=True, residuals=table)

    steps = np.sign(np.diff(rss))
    steps = steps[steps != 0]
    if np.any(np.diff(steps) < 0):
        raise DegenerateFitError("residual is not unimodal in q", table=table)

    best_q, (alpha, logC, best) = float(qs[k]), fits[k]
    if qs.size > 1:
        a = qs[max(k - 1, 0)]
        b = qs[min(k + 1, qs.size - 1)]
        q_ref, r_ref = _golden_min(lambda q: _fit_fixed_q(loglam, lam, logR, q)[2], a, b)
        if r_ref < best:
            best_q = float(q_ref)
            alpha, logC, best = _fit_fixed_q(loglam, lam, logR, q_ref)
    return AsymptoticParams(alpha, math.exp(logC), best_q, residuals=table)


def write_fit_report(params: AsymptoticParams, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["q", "alpha", "logC", "residual"])
        for row in params.residuals:
            w.writerow([repr(float(v)) for v in row])


@dataclass(frozen=True)
class ShapeFit:
    slope: float
    intercept: float
    n_points: int


def tail_shape_slope(maxima, p: float, fraction: float = 0.1) -> ShapeFit:
    """Slope of ``-log T(u)`` against ``u^p / p`` over the top ``fraction`` of maxima.

    The ``i``-th largest maximum is paired with ``T = i / n``.
    """
    M = np.sort(np.asarray(maxima, dtype=float).ravel())[::-1]
    n = M.size
    k = int(math.floor(fraction * n))
    if k < 3:
        raise ValidationError("too few maxima in the top fraction")
    u = M[:k]
    if np.any(u <= 0):
        raise ValidationError("top maxima must be positive")
    x = u ** p / p
    y = -np.log(np.arange(1, k + 1) / n)
    slope, intercept = np.polyfit(x, y, 1)
    return ShapeFit(float(slope), float(intercept), k)
