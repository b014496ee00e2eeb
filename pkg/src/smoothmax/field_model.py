"""Smooth random fields on boxes with closed-form derivatives.

A field is ``xi(x) = a(x) + sum_j c_j * b_j(x)`` where ``a`` is a polynomial
of degree at most two in each coordinate and each basis term ``b_j`` is a
product of cosines ``amp * prod_i cos(2 pi k_i x_i + phase_i)`` (a sine is a
cosine with phase ``-pi/2``). Coefficients ``c_j`` are drawn independently
from mean-zero laws with finite moment generating functions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np
from scipy.special import gammaln

from .errors import NonGaussianSpecError, PointOutsideDomainError, ValidationError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Domain:
    """Open box ``prod_i (lower_i, upper_i)`` with closure ``[D]``."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lo) == 0 or len(lo) != len(hi):
            raise ValidationError("lower and upper must be non-empty and of equal length")
        if not all(math.isfinite(a) and math.isfinite(b) and a < b for a, b in zip(lo, hi)):
            raise ValidationError(f"need finite lower < upper on every axis, got {lo}, {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unit(cls, d: int = 1) -> "Domain":
        return cls((0.0,) * d, (1.0,) * d)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def lo(self) -> np.ndarray:
        return np.array(self.lower)

    @property
    def hi(self) -> np.ndarray:
        return np.array(self.upper)

    @property
    def width(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def volume(self) -> float:
        return float(np.prod(self.width))

    def contains(self, X, rtol: float = 1e-12) -> np.ndarray:
        """Membership in the closure ``[D]``, row-wise for an ``(n, d)`` array."""
        X = np.atleast_2d(X)
        slack = rtol * self.width
        return np.all((X >= self.lo - slack) & (X <= self.hi + slack), axis=1)


@dataclass(frozen=True)
class CoefficientLaw:
    """Mean-zero law of one basis coefficient.

    ``kind`` is ``"gaussian"`` (``scale`` = standard deviation),
    ``"weibull"`` (symmetric, density proportional to
    ``exp(-|c/scale|^p / p)``) or ``"uniform"`` on ``[-scale, scale]``.
    """

    kind: str = "gaussian"
    scale: float = 1.0
    p: float | None = None

    def __post_init__(self):
        if self.kind not in ("gaussian", "weibull", "uniform"):
            raise ValidationError(f"unknown coefficient law {self.kind!r}")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValidationError("law scale must be positive and finite")
        if self.kind == "weibull":
            if self.p is None or not self.p > 1:
                raise ValidationError("symmetric-weibull law needs p > 1")
        elif self.p is not None:
            raise ValidationError(f"parameter p is not used by the {self.kind} law")

    @classmethod
    def gaussian(cls, sd: float = 1.0, mean: float = 0.0) -> "CoefficientLaw":
        if mean != 0.0:
            raise ValidationError("coefficient laws are centred; put the mean into a(x)")
        return cls("gaussian", sd)

    @classmethod
    def weibull(cls, p: float, scale: float = 1.0) -> "CoefficientLaw":
        return cls("weibull", scale, p)

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "CoefficientLaw":
        if not math.isclose(lo, -hi):
            raise ValidationError("uniform coefficient law must be symmetric (lo == -hi)")
        return cls("uniform", hi)

    @property
    def variance(self) -> float:
        if self.kind == "gaussian":
            return self.scale ** 2
        if self.kind == "uniform":
            return self.scale ** 2 / 3.0
        p = self.p
        # E|c|^2 for density ~ exp(-|c|^p/p): p^{2/p} Gamma(3/p) / Gamma(1/p)
        return self.scale ** 2 * math.exp((2.0 / p) * math.log(p) + gammaln(3.0 / p) - gammaln(1.0 / p))

    def draw(self, rng: np.random.Generator, size=None):
        if self.kind == "gaussian":
            return self.scale * rng.standard_normal(size)
        if self.kind == "uniform":
            return rng.uniform(-self.scale, self.scale, size)
        # |c|^p / p ~ Gamma(1/p, 1)
        g = rng.standard_gamma(1.0 / self.p, size)
        sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
        return self.scale * sign * (self.p * g) ** (1.0 / self.p)

    def to_dict(self) -> dict:
        if self.kind == "gaussian":
            return {"law": "gaussian", "params": {"sd": self.scale}}
        if self.kind == "uniform":
            return {"law": "uniform", "params": {"lo": -self.scale, "hi": self.scale}}
        return {"law": "weibull", "params": {"p": self.p, "scale": self.scale}}

    @classmethod
    def from_dict(cls, law: str, params: Mapping | None) -> "CoefficientLaw":
        params = dict(params or {})
        try:
            if law == "gaussian":
                return cls.gaussian(**params)
            if law in ("weibull", "symmetric-weibull"):
                return cls.weibull(**params)
            if law == "uniform":
                return cls.uniform(**params)
        except TypeError as exc:
            raise ValidationError(f"bad parameters for law {law!r}: {exc}") from None
        raise ValidationError(f"unknown coefficient law {law!r}")


@dataclass(frozen=True)
class BasisTerm:
    """``amplitude * prod_i cos(2 pi frequency_i x_i + phase_i)`` with a random coefficient."""

    frequency: tuple
    phase: tuple
    law: CoefficientLaw = field(default_factory=CoefficientLaw)
    amplitude: float = 1.0

    def __post_init__(self):
        k = tuple(float(v) for v in np.atleast_1d(self.frequency))
        ph = tuple(float(v) for v in np.atleast_1d(self.phase))
        if len(k) != len(ph):
            raise ValidationError("frequency and phase vectors differ in length")
        object.__setattr__(self, "frequency", k)
        object.__setattr__(self, "phase", ph)

    @classmethod
    def cos(cls, k, law=None, amplitude=1.0):
        k = tuple(np.atleast_1d(k))
        return cls(k, (0.0,) * len(k), law or CoefficientLaw(), amplitude)

    @classmethod
    def sin(cls, k, law=None, amplitude=1.0):
        """Product with a single sine factor on the first axis with a non-zero frequency."""
        k = tuple(np.atleast_1d(k))
        ph = [0.0] * len(k)
        axis = next((i for i, v in enumerate(k) if v != 0), 0)
        ph[axis] = -math.pi / 2
        return cls(k, tuple(ph), law or CoefficientLaw(), amplitude)


def _parse_exponent_key(key, d):
    if isinstance(key, (tuple, list)):
        e = tuple(int(v) for v in key)
    else:
        e = tuple(int(v) for v in str(key).split(","))
    if len(e) != d or any(v < 0 or v > 2 for v in e):
        raise ValidationError(f"mean exponent {key!r} must have {d} entries in 0..2")
    return e


@dataclass(frozen=True)
class FieldSpec:
    """Law of a random field: domain, mean polynomial, random basis, base seed.

    ``mean`` maps exponent tuples ``(e_1, ..., e_d)`` with ``e_i <= 2`` to
    coefficients, e.g. ``{(2,): -0.5}`` is ``a(x) = -x^2/2``.
    """

    domain: Domain
    mean: Mapping = field(default_factory=dict)
    terms: tuple = ()
    seed: int = 0

    def __post_init__(self):
        d = self.domain.dim
        mean = {}
        for key, val in dict(self.mean).items():
            e = _parse_exponent_key(key, d)
            mean[e] = mean.get(e, 0.0) + float(val)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "terms", tuple(self.terms))
        for t in self.terms:
            if len(t.frequency) != d:
                raise ValidationError("basis term dimension does not match the domain")
        if int(self.seed) < 0:
            raise ValidationError("seed must be non-negative")
        object.__setattr__(self, "seed", int(self.seed))

    def __hash__(self):
        return hash((self.domain, tuple(sorted(self.mean.items())), self.terms, self.seed))

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def n_terms(self) -> int:
        return len(self.terms)

    @property
    def deterministic(self) -> bool:
        return not self.terms

    @property
    def is_gaussian(self) -> bool:
        return all(t.law.kind == "gaussian" for t in self.terms)

    @cached_property
    def _arrays(self):
        d = self.dim
        if self.terms:
            omega = TWO_PI * np.array([t.frequency for t in self.terms])
            phase = np.array([t.phase for t in self.terms])
            amp = np.array([t.amplitude for t in self.terms])
            var = np.array([t.law.variance for t in self.terms])
        else:
            omega = np.zeros((0, d))
            phase = np.zeros((0, d))
            amp = np.zeros(0)
            var = np.zeros(0)
        if self.mean:
            exps = np.array(list(self.mean.keys()), dtype=int)
            coefs = np.array(list(self.mean.values()))
        else:
            exps = np.zeros((0, d), dtype=int)
            coefs = np.zeros(0)
        return omega, phase, amp, var, exps, coefs

    def with_seed(self, seed: int) -> "FieldSpec":
        return FieldSpec(self.domain, self.mean, self.terms, seed)

    # -- evaluation kernels shared by samples -----------------------------

    def _check(self, X):
        X = np.asarray(X, dtype=float)
        single = X.ndim <= 1
        X = X.reshape(-1, self.dim) if single else X
        if X.shape[-1] != self.dim:
            raise ValidationError(f"points must have {self.dim} coordinates")
        if not self.domain.contains(X).all():
            raise PointOutsideDomainError("point outside the closed domain")
        return X, single

    def _mean_parts(self, X, order):
        """Mean polynomial value (order 0), gradient (1) or Hessian (2)."""
        _, _, _, _, exps, coefs = self._arrays
        n, d = X.shape
        if order == 0:
            out = np.zeros(n)
        elif order == 1:
            out = np.zeros((n, d))
        else:
            out = np.zeros((n, d, d))
        if coefs.size == 0:
            return out
        # powers[k][:, p, i] = d^k/dx^k x_i^{e_{p,i}}
        e = exps[None, :, :]
        x = X[:, None, :]
        p0 = np.where(e == 0, 1.0, np.where(e == 1, x, x * x))
        if order == 0:
            return np.prod(p0, axis=2) @ coefs
        p1 = np.where(e == 0, 0.0, np.where(e == 1, 1.0, 2.0 * x))
        p2 = np.where(e == 2, 2.0, 0.0) * np.ones_like(x)
        if order == 1:
            for i in range(d):
                f = p0.copy()
                f[:, :, i] = p1[:, :, i]
                out[:, i] = np.prod(f, axis=2) @ coefs
            return out
        for i in range(d):
            for j in range(i, d):
                f = p0.copy()
                if i == j:
                    f[:, :, i] = p2[:, :, i]
                else:
                    f[:, :, i] = p1[:, :, i]
                    f[:, :, j] = p1[:, :, j]
                out[:, i, j] = out[:, j, i] = np.prod(f, axis=2) @ coefs
        return out

    def basis_values(self, X) -> np.ndarray:
        """Basis functions at points, shape ``(n, J)``."""
        omega, phase, amp, _, _, _ = self._arrays
        X = np.atleast_2d(X)
        theta = X[:, None, :] * omega[None, :, :] + phase[None, :, :]
        return np.prod(np.cos(theta), axis=2) * amp

    def _basis_parts(self, X, coef, order):
        omega, phase, amp, _, _, _ = self._arrays
        n, d = X.shape
        w = coef * amp
        theta = X[:, None, :] * omega[None, :, :] + phase[None, :, :]
        C = np.cos(theta)
        if order == 0:
            return np.prod(C, axis=2) @ w
        S = np.sin(theta)
        if order == 1:
            out = np.empty((n, d))
            for i in range(d):
                f = C.copy()
                f[:, :, i] = -omega[None, :, i] * S[:, :, i]
                out[:, i] = np.prod(f, axis=2) @ w
            return out
        out = np.empty((n, d, d))
        for i in range(d):
            for j in range(i, d):
                f = C.copy()
                if i == j:
                    f[:, :, i] = -omega[None, :, i] ** 2 * C[:, :, i]
                else:
                    f[:, :, i] = -omega[None, :, i] * S[:, :, i]
                    f[:, :, j] = -omega[None, :, j] * S[:, :, j]
                out[:, i, j] = out[:, j, i] = np.prod(f, axis=2) @ w
        return out

    # -- serialisation ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "domain": {"lower": list(self.domain.lower), "upper": list(self.domain.upper)},
            "mean": {",".join(str(v) for v in e): c for e, c in sorted(self.mean.items())},
            "terms": [
                {"frequency": list(t.frequency), "phase": list(t.phase),
                 "amplitude": t.amplitude, **t.law.to_dict()}
                for t in self.terms
            ],
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, block: Mapping) -> "FieldSpec":
        allowed = {"domain", "mean", "terms", "seed"}
        unknown = set(block) - allowed
        if unknown:
            raise ValidationError(f"unknown field keys: {sorted(unknown)}")
        dom = block.get("domain")
        if not isinstance(dom, Mapping) or set(dom) != {"lower", "upper"}:
            raise ValidationError("field.domain needs exactly 'lower' and 'upper'")
        domain = Domain(tuple(dom["lower"]), tuple(dom["upper"]))
        terms = []
        for t in block.get("terms") or []:
            extra = set(t) - {"frequency", "phase", "amplitude", "law", "params"}
            if extra:
                raise ValidationError(f"unknown basis-term keys: {sorted(extra)}")
            law = CoefficientLaw.from_dict(t.get("law", "gaussian"), t.get("params"))
            freq = tuple(t["frequency"])
            phase = tuple(t.get("phase", (0.0,) * len(freq)))
            terms.append(BasisTerm(freq, phase, law, float(t.get("amplitude", 1.0))))
        return cls(domain, dict(block.get("mean") or {}), tuple(terms), int(block.get("seed", 0)))


@dataclass(frozen=True, eq=False)
class FieldSample:
    """One realisation: frozen coefficients for a :class:`FieldSpec`."""

    spec: FieldSpec
    coefficients: np.ndarray
    replicate_id: int = 0

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=float).reshape(-1)
        if c.size != self.spec.n_terms:
            raise ValidationError("coefficient count does not match the basis")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @property
    def dim(self) -> int:
        return self.spec.dim

    @property
    def deterministic(self) -> bool:
        return self.spec.deterministic

    # vectorised, unchecked evaluations on (n, d) arrays
    def values(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        return self.spec._mean_parts(X, 0) + self.spec._basis_parts(X, self.coefficients, 0)

    def gradients(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        return self.spec._mean_parts(X, 1) + self.spec._basis_parts(X, self.coefficients, 1)

    def hessians(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        return self.spec._mean_parts(X, 2) + self.spec._basis_parts(X, self.coefficients, 2)

    def log_zeta(self, X) -> np.ndarray:
        """``0.5 * log|det Hessian|`` at each row of ``X``."""
        H = self.hessians(X)
        if self.dim == 1:
            det = H[:, 0, 0]
        elif self.dim == 2:
            det = H[:, 0, 0] * H[:, 1, 1] - H[:, 0, 1] * H[:, 1, 0]
        else:
            det = np.linalg.det(H)
        with np.errstate(divide="ignore"):
            return 0.5 * np.log(np.abs(det))


def _rng(seed: int, replicate_id: int) -> np.random.Generator:
    # Philox is counter-based: the key (seed, replicate) selects an independent stream
    return np.random.Generator(np.random.Philox(key=[int(seed), int(replicate_id)]))


def sample_field(spec: FieldSpec, replicate_id: int) -> FieldSample:
    """Draw the coefficients of replicate ``replicate_id``; pure in its inputs."""
    if replicate_id < 0:
        raise ValidationError("replicate_id must be non-negative")
    rng = _rng(spec.seed, replicate_id)
    coef = np.array([t.law.draw(rng) for t in spec.terms], dtype=float)
    return FieldSample(spec, coef, int(replicate_id))


def sample_coefficients(spec: FieldSpec, replicate_ids: Sequence[int]) -> np.ndarray:
    """Coefficient matrix ``(len(replicate_ids), J)``, row ``i`` equal to ``sample_field(spec, ids[i])``."""
    out = np.empty((len(replicate_ids), spec.n_terms))
    for r, rid in enumerate(replicate_ids):
        out[r] = sample_field(spec, rid).coefficients
    return out


def eval_field(sample: FieldSample, x) -> float:
    X, _ = sample.spec._check(x)
    return float(sample.values(X)[0])


def eval_gradient(sample: FieldSample, x) -> np.ndarray:
    X, _ = sample.spec._check(x)
    return sample.gradients(X)[0]


def eval_hessian(sample: FieldSample, x) -> np.ndarray:
    X, _ = sample.spec._check(x)
    return sample.hessians(X)[0]


def zeta(sample: FieldSample, x) -> float:
    """``|det Hessian(x)|^{1/2}``."""
    return float(math.sqrt(abs(np.linalg.det(eval_hessian(sample, x)))))


def covariance(spec: FieldSpec, z1, z2) -> float:
    """``W(z1, z2) = E[xi°(z1) xi°(z2)] = sum_j var(c_j) b_j(z1) b_j(z2)``."""
    var = spec._arrays[3]
    B1 = spec.basis_values(np.atleast_2d(z1))[0]
    B2 = spec.basis_values(np.atleast_2d(z2))[0]
    return float(np.sum(var * B1 * B2))


def gaussian_natural_distance(spec: FieldSpec, z1, z2) -> float:
    """Canonical distance ``sqrt(W(z1,z1) - 2 W(z1,z2) + W(z2,z2))`` of a Gaussian field."""
    if not spec.is_gaussian:
        raise NonGaussianSpecError("closed-form natural distance needs Gaussian coefficients")
    spec._check(z1)
    spec._check(z2)
    d2 = covariance(spec, z1, z1) - 2.0 * covariance(spec, z1, z2) + covariance(spec, z2, z2)
    return math.sqrt(max(d2, 0.0))
