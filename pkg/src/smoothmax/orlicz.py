"""Young-Fenchel conjugates, B(phi) and G(psi) norms, and tail-bound checks.

A :class:`PhiFunction` is an even function with ``phi(0) = 0``, quadratic
near zero and superlinear at infinity. Conjugates are computed by
golden-section search on the concave objective ``lam * u - phi(lam)``, one
convex piece at a time, so the non-convex ``power_p`` kinds with ``p < 2``
are handled piecewise.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq
from scipy.special import logsumexp
from scipy.stats import beta

from .errors import NoCandidatePassesError, NotCenteredError, RangeError, ValidationError

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True, eq=False)
class PhiFunction:
    """Generator of a B(phi) space.

    Kinds
    -----
    ``gaussian``    ``lam^2 / 2``
    ``power_p``     ``lam^2`` for ``|lam| <= 1`` and ``|lam|^p`` beyond
    ``pure_power``  ``|lam|^p / p``
    ``tabulated``   monotone (PCHIP) interpolation of a table on ``[0, lambda0]``
    """

    kind: str
    p: float | None = None
    table: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("gaussian", "power_p", "pure_power", "tabulated"):
            raise ValidationError(f"unknown phi kind {self.kind!r}")
        if self.kind in ("power_p", "pure_power") and not (self.p is not None and self.p > 1):
            raise ValidationError("power kinds need p > 1")
        if self.kind == "tabulated":
            lam, val = (np.asarray(a, dtype=float) for a in self.table)
            if lam.ndim != 1 or lam.size < 3 or lam.size != val.size:
                raise ValidationError("table needs at least three (lambda, phi) rows")
            if lam[0] != 0 or val[0] != 0:
                raise ValidationError("table must start at (0, 0)")
            if np.any(np.diff(lam) <= 0):
                raise ValidationError("table lambda values must be strictly increasing")
            if np.any(np.diff(val) < 0):
                raise ValidationError("table phi values must be non-decreasing")
            object.__setattr__(self, "table", (lam, val))
            object.__setattr__(self, "_interp", PchipInterpolator(lam, val, extrapolate=False))

    @classmethod
    def gaussian(cls):
        return cls("gaussian")

    @classmethod
    def power(cls, p: float):
        return cls("power_p", float(p))

    @classmethod
    def pure_power(cls, p: float):
        return cls("pure_power", float(p))

    @classmethod
    def tabulated(cls, lambdas, values):
        return cls("tabulated", None, (lambdas, values))

    @property
    def lambda0(self) -> float:
        return float(self.table[0][-1]) if self.kind == "tabulated" else math.inf

    @property
    def conjugate_exponent(self) -> float | None:
        return None if self.p is None else self.p / (self.p - 1.0)

    def __call__(self, lam):
        a = np.abs(np.asarray(lam, dtype=float))
        if self.kind == "gaussian":
            out = 0.5 * a * a
        elif self.kind == "power_p":
            out = np.where(a <= 1.0, a * a, a ** self.p)
        elif self.kind == "pure_power":
            out = a ** self.p / self.p
        else:
            out = self._interp(np.where(a <= self.lambda0, a, np.nan))
            out = np.where(np.isnan(out), np.inf, out)
        return out if np.ndim(out) else float(out)

    def pieces(self):
        """Intervals of ``[0, lambda0)`` on which ``phi`` is convex."""
        if self.kind == "power_p":
            return [(0.0, 1.0), (1.0, math.inf)]
        return [(0.0, self.lambda0)]

    def quadratic_constants(self, n: int = 1001):
        """``(C_minus, C_plus)`` with ``C_- lam^2 <= phi <= C_+ lam^2`` on ``0 < |lam| <= 1``."""
        lam = np.linspace(0.0, min(1.0, self.lambda0), n)[1:]
        r = np.asarray(self(lam)) / lam ** 2
        return float(r.min()), float(r.max())

    def is_convex(self, grid=None, tol: float = 1e-9) -> bool:
        if grid is None:
            top = self.lambda0 if math.isfinite(self.lambda0) else 10.0
            grid = np.linspace(-top, top, 4001)
        v = np.asarray(self(np.sort(grid)))
        return bool(np.all(v[:-2] + v[2:] - 2.0 * v[1:-1] >= -tol * (1.0 + np.abs(v[1:-1]))))

    def to_text(self) -> str:
        if self.kind != "tabulated":
            raise ValidationError("only tabulated phi functions have a text form")
        buf = io.StringIO()
        np.savetxt(buf, np.column_stack(self.table), fmt="%.17g")
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "PhiFunction":
        data = np.loadtxt(io.StringIO(text), ndmin=2)
        if data.shape[1] != 2:
            raise ValidationError("tabulated phi text needs exactly two columns")
        return cls.tabulated(data[:, 0], data[:, 1])


@dataclass(frozen=True)
class NormEstimate:
    value: float
    grid: np.ndarray = field(repr=False)
    binding: float | None
    trimmed: int = 0


@dataclass(frozen=True)
class TailBoundResult:
    passed: bool
    worst_u: float | None
    worst_log_excess: float


@dataclass(frozen=True)
class KramerResult:
    mu: float
    mu_supported: float
    lambdas: np.ndarray = field(repr=False)
    phi0: np.ndarray = field(repr=False)


# -- golden section ------------------------------------------------------------

def _golden_max(obj, a, b, iters: int = 90):
    """Vectorised golden-section maximisation of concave ``obj`` on ``[a, b]``."""
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    a0, b0 = a.copy(), b.copy()
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = obj(c), obj(d)
    for _ in range(iters):
        left = fc >= fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        nc = np.where(left, b - _INVPHI * (b - a), d)
        nd = np.where(left, c, a + _INVPHI * (b - a))
        fnew = obj(np.where(left, nc, nd))
        fc, fd = np.where(left, fnew, fd), np.where(left, fc, fnew)
        c, d = nc, nd
    best = np.maximum(np.maximum(obj(0.5 * (a + b)), obj(a0)), obj(b0))
    return best


def _bracket(obj, lo, cap, start=1.0):
    """Upper end ``B`` of a bracket: concavity gives argmax <= B once obj(B) <= obj(lo)."""
    flo = obj(np.asarray(lo, dtype=float))
    B = np.maximum(lo * 2.0, start) * np.ones_like(flo)
    B = np.minimum(B, cap)
    for _ in range(1100):
        grow = (obj(B) > flo) & (B < cap)
        if not grow.any():
            break
        B = np.where(grow, np.minimum(B * 2.0, cap), B)
    return B


def _dense_grid(phi: PhiFunction, n: int = 20001):
    lam = np.union1d(np.linspace(0.0, phi.lambda0, n), phi.table[0])
    return lam, np.asarray(phi(lam))


def young_fenchel(phi: PhiFunction, u):
    """``phi*(u) = sup_lam (lam u - phi(lam))``; exact for the gaussian kind."""
    u_arr = np.abs(np.asarray(u, dtype=float))
    scalar = u_arr.ndim == 0
    u_arr = np.atleast_1d(u_arr)
    if phi.kind == "gaussian":
        out = 0.5 * u_arr ** 2
    elif phi.kind == "tabulated":
        lam, val = _dense_grid(phi)
        out = np.empty_like(u_arr)
        for s in range(0, u_arr.size, 256):
            blk = u_arr[s:s + 256]
            out[s:s + 256] = np.max(blk[:, None] * lam[None, :] - val[None, :], axis=1)
    else:
        out = np.zeros_like(u_arr)
        for lo, hi in phi.pieces():
            obj = lambda l: l * u_arr - np.asarray(phi(l))  # noqa: E731
            lo_arr = np.full_like(u_arr, lo)
            B = _bracket(obj, lo_arr, hi) if math.isinf(hi) else np.full_like(u_arr, hi)
            out = np.maximum(out, _golden_max(obj, lo_arr, B))
    return float(out[0]) if scalar else out


def fenchel_moreau_check(phi: PhiFunction, grid) -> float:
    """``max |phi** - phi|`` over ``grid``, with both conjugations numerical.

    Zero (to numerical accuracy) exactly when ``phi`` is convex on the grid;
    otherwise the deviation is the gap to the convex envelope.
    """
    lam = np.abs(np.asarray(grid, dtype=float))
    if np.any(lam >= phi.lambda0):
        raise ValidationError("grid must lie inside (-lambda0, lambda0)")
    obj = lambda u: lam * u - young_fenchel(phi, u)  # noqa: E731
    zero = np.zeros_like(lam)
    U = _bracket(obj, zero, math.inf)
    phi2 = _golden_max(obj, zero, U)
    return float(np.max(np.abs(phi2 - np.asarray(phi(lam)))))


def phi_inverse(phi: PhiFunction, r: float) -> float:
    """The ``lam >= 0`` with ``phi(lam) = r``."""
    if r < 0:
        raise ValidationError("phi_inverse needs r >= 0")
    if phi.kind == "gaussian":
        return math.sqrt(2.0 * r)
    if phi.kind == "power_p":
        return math.sqrt(r) if r <= 1.0 else r ** (1.0 / phi.p)
    if phi.kind == "pure_power":
        return (phi.p * r) ** (1.0 / phi.p)
    top = float(phi(phi.lambda0))
    if r > top:
        raise RangeError(f"r={r} exceeds the tabulated range (max {top})")
    if r == 0:
        return 0.0
    return brentq(lambda l: float(phi(l)) - r, 0.0, phi.lambda0, xtol=1e-300, rtol=1e-13)


def psi_from_phi(phi: PhiFunction, r: float) -> float:
    """``psi(r) = r / phi^{-1}(r)`` for ``r >= 2``."""
    if r < 2:
        raise ValidationError("psi is defined for r >= 2")
    return r / phi_inverse(phi, r)


# -- norms from samples ----------------------------------------------------------

def _ess(lw):
    return float(np.exp(2.0 * logsumexp(lw) - logsumexp(2.0 * lw)))


def bphi_norm(samples, phi: PhiFunction, lambda_grid=None, min_ess: float = 10.0,
              check_centered: bool = True) -> NormEstimate:
    """Smallest ``tau`` with empirical ``log E e^{lam X} <= phi(lam tau)`` on the grid.

    The samples are re-centred by their mean (after checking it is within
    three standard errors of zero, unless ``check_centered`` is off for
    samples centred by construction). The default grid is symmetric and scaled
    by ``1 / std``, which makes the estimate exactly homogeneous. Grid points
    whose exponential weights have fewer than ``min_ess`` effective samples
    are dropped and counted in ``trimmed``.
    """
    x = np.asarray(samples, dtype=float).ravel()
    n = x.size
    mean = x.mean()
    sd = x.std()
    if sd == 0.0:
        if mean != 0.0 and check_centered:
            raise NotCenteredError("constant non-zero samples are not centred")
        return NormEstimate(0.0, np.zeros(0), None, 0)
    if check_centered and abs(mean) > 3.0 * sd / math.sqrt(n):
        raise NotCenteredError(f"sample mean {mean:g} is more than 3 standard errors from 0")
    xc = x - mean
    if lambda_grid is None:
        t = np.linspace(0.1, 6.0, 60)
        lambda_grid = np.concatenate([-t[::-1], t]) / sd
    grid = np.asarray(lambda_grid, dtype=float)
    grid = grid[grid != 0]
    best, binding, trimmed = 0.0, None, 0
    for lam in grid:
        lw = lam * xc
        if _ess(lw) < min_ess:
            trimmed += 1
            continue
        L = float(logsumexp(lw) - math.log(n))
        if L <= 0:
            continue
        try:
            tau = phi_inverse(phi, L) / abs(lam)
        except RangeError:
            trimmed += 1
            continue
        if tau > best:
            best, binding = tau, float(lam)
    return NormEstimate(best, grid, binding, trimmed)


def gpsi_norm(samples, phi: PhiFunction, r_grid=None) -> NormEstimate:
    """``sup_r (E|X|^r)^{1/r} / psi(r)`` over ``r_grid`` (default ``2..16``)."""
    x = np.abs(np.asarray(samples, dtype=float).ravel())
    r_grid = np.linspace(2.0, 16.0, 29) if r_grid is None else np.asarray(r_grid, dtype=float)
    if np.any(r_grid < 2):
        raise ValidationError("r grid must satisfy r >= 2")
    if not np.any(x > 0):
        return NormEstimate(0.0, r_grid, None, 0)
    with np.errstate(divide="ignore"):
        lx = np.log(x)
    best, binding = 0.0, None
    for r in r_grid:
        log_mom = (logsumexp(r * lx) - math.log(x.size)) / r
        val = math.exp(log_mom) / psi_from_phi(phi, r)
        if val > best:
            best, binding = val, float(r)
    return NormEstimate(best, r_grid, binding, 0)


def _upper_envelope(counts, n, confidence):
    """One-sided Clopper-Pearson upper bound on a binomial proportion."""
    counts = np.asarray(counts)
    env = np.ones(counts.shape)
    ok = counts < n
    env[ok] = beta.ppf(confidence, counts[ok] + 1, n - counts[ok])
    return env


def tail_bound_check(samples, phi: PhiFunction, C: float, confidence: float = 0.95,
                     factor: float = 2.0) -> TailBoundResult:
    """Is ``P(X >= u)`` below ``factor * exp(-phi*(u / C))`` at every positive sample point?

    The empirical tail is replaced by its one-sided ``confidence`` upper
    envelope before comparison.
    """
    if not C > 0:
        raise ValidationError("C must be positive")
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    u = np.unique(x[x > 0])
    if u.size == 0:
        return TailBoundResult(True, None, -math.inf)
    counts = n - np.searchsorted(x, u, side="left")
    log_env = np.log(_upper_envelope(counts, n, confidence))
    log_bound = math.log(factor) - young_fenchel(phi, u / C)
    excess = log_env - log_bound
    k = int(np.argmax(excess))
    return TailBoundResult(bool(excess[k] <= 0), float(u[k]), float(excess[k]))


def smallest_tail_constant(samples, phi: PhiFunction, confidence: float = 0.95,
                           factor: float = 2.0, lo: float = 1e-3, hi: float = 1e3,
                           rtol: float = 1e-6) -> float:
    """Smallest ``C`` (bisection in ``log C``) for which :func:`tail_bound_check` passes."""
    check = lambda c: tail_bound_check(samples, phi, c, confidence, factor).passed  # noqa: E731
    if not check(hi):
        return math.inf
    if check(lo):
        return lo
    a, b = math.log(lo), math.log(hi)
    while b - a > rtol:
        m = 0.5 * (a + b)
        a, b = (a, m) if check(math.exp(m)) else (m, b)
    return math.exp(b)


def kramer_check(per_x_samples, mu_candidates=None, confidence: float = 0.95,
                 lambda_grid=None, factor: float = 2.0) -> KramerResult:
    """Largest ``mu`` with ``sup_x P(|xi°(x)| >= u) <= factor * exp(-mu u)`` on the data.

    Without a prefactor above one no ``mu > 0`` can hold near ``u = 0``,
    where the tail probability tends to one.

    ``per_x_samples`` has one column per spatial point. Columns are centred
    by their means. Also returns the natural function
    ``phi0(lam) = log sup_x E exp(lam xi°(x))`` on ``lambda_grid``.
    """
    X = np.asarray(per_x_samples, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, m = X.shape
    Xc = X - X.mean(axis=0)
    if mu_candidates is None:
        mu_candidates = np.geomspace(10.0, 0.05, 40)
    cands = np.sort(np.asarray(mu_candidates, dtype=float))[::-1]

    mu_supported = math.inf
    for j in range(m):
        a = np.sort(np.abs(Xc[:, j]))
        u = np.unique(a[a > 0])
        if u.size == 0:
            continue
        counts = n - np.searchsorted(a, u, side="left")
        env = _upper_envelope(counts, n, confidence)
        mu_supported = min(mu_supported, float(np.min((math.log(factor) - np.log(env)) / u)))
    passing = cands[cands <= mu_supported]
    if passing.size == 0:
        raise NoCandidatePassesError(
            f"no candidate mu passes; the data support at most mu={mu_supported:.4g}")

    sd = Xc.std(axis=0).max()
    if lambda_grid is None:
        lambda_grid = np.linspace(-4.0, 4.0, 33) / (sd if sd > 0 else 1.0)
    lambdas = np.asarray(lambda_grid, dtype=float)
    phi0 = np.array([np.max(logsumexp(l * Xc, axis=0)) - math.log(n) for l in lambdas])
    return KramerResult(float(passing[0]), mu_supported, lambdas, phi0)
