"""PC priors for the mixing parameter and the total precision, plus uniforms.

Mixing parameter (interaction share of the generalized variance)::

    pi(g) = theta * exp(-theta * sqrt(g)) / (2 sqrt(g) (1 - exp(-theta))),  0 < g < 1
    F(g)  = (1 - exp(-theta sqrt(g))) / (1 - exp(-theta))

Total precision (type-2 Gumbel with shape 1/2)::

    pi(tau) = lam / 2 * tau^(-3/2) * exp(-lam / sqrt(tau))
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.optimize import bisect

from .errors import DomainError, ElicitationError, NumericalError, ValidationError

THETA_BRACKET = (1e-8, 1e4)
EDGE = 1e-12


def _cdf_ratio(theta: float, u: float) -> float:
    return math.expm1(-theta * math.sqrt(u)) / math.expm1(-theta)


def solve_theta(U: float, a: float) -> float:
    """Scale of the mixing-parameter PC prior from ``P(gamma < U) = a``.

    The ratio is increasing in theta, running from sqrt(U) (theta -> 0) to 1,
    so a solution exists only for ``a > sqrt(U)``.
    """
    if not (0 < U < 1 and 0 < a < 1):
        raise ElicitationError(f"need 0 < U < 1 and 0 < a < 1, got U={U}, a={a}")
    if not a > math.sqrt(U):
        raise ElicitationError(
            f"PC prior for gamma requires a > sqrt(U); got a={a} <= sqrt({U}) = {math.sqrt(U):.6g}"
        )
    lo, hi = THETA_BRACKET

    def f(t):
        return _cdf_ratio(t, U) - a

    if not f(lo) < 0 < f(hi):
        raise NumericalError(f"cannot bracket theta for U={U}, a={a} within {THETA_BRACKET}")
    theta = bisect(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    if abs(f(theta)) >= 1e-10:
        raise NumericalError(f"theta residual {f(theta):.3g} too large for U={U}, a={a}")
    return float(theta)


@dataclass(frozen=True)
class GammaPCPrior:
    theta: float
    elicitation: Optional[tuple[float, float]] = None

    def __post_init__(self):
        if not self.theta > 0:
            raise ValidationError(f"theta must be positive, got {self.theta}")
        if self.elicitation is not None:
            U, a = self.elicitation
            if not a > math.sqrt(U):
                raise ElicitationError(f"a={a} must exceed sqrt(U)={math.sqrt(U):.6g}")

    @classmethod
    def from_tail(cls, U: float, a: float) -> "GammaPCPrior":
        return cls(solve_theta(U, a), (U, a))

    def _check(self, gamma):
        g = np.asarray(gamma, dtype=float)
        if np.any(g <= EDGE) or np.any(g >= 1 - EDGE):
            raise DomainError(f"gamma must lie in (0, 1), got {gamma}")
        return g

    def logpdf(self, gamma):
        g = self._check(gamma)
        t = self.theta
        r = np.sqrt(g)
        out = math.log(t) - t * r - math.log(2.0) - np.log(r) - math.log(-math.expm1(-t))
        return out if np.ndim(out) else float(out)

    def cdf(self, gamma):
        g = np.clip(np.asarray(gamma, dtype=float), 0.0, 1.0)
        out = np.expm1(-self.theta * np.sqrt(g)) / math.expm1(-self.theta)
        return out if np.ndim(out) else float(out)

    def quantile(self, p):
        p = np.asarray(p, dtype=float)
        if np.any((p < 0) | (p > 1)):
            raise DomainError("probabilities must lie in [0, 1]")
        root = -np.log1p(p * math.expm1(-self.theta)) / self.theta
        out = root**2
        return out if np.ndim(out) else float(out)

    def median(self) -> float:
        return self.quantile(0.5)

    def sample(self, rng: np.random.Generator, size=None):
        return self.quantile(rng.uniform(size=size))


@dataclass(frozen=True)
class TauPCPrior:
    lam: float
    elicitation: Optional[tuple[float, float]] = None

    def __post_init__(self):
        if not self.lam > 0:
            raise ValidationError(f"lambda must be positive, got {self.lam}")

    @classmethod
    def from_tail(cls, U: float, a: float) -> "TauPCPrior":
        """``P(1/sqrt(tau) > U) = a``."""
        if not (U > 0 and 0 < a < 1):
            raise ElicitationError(f"need U > 0 and 0 < a < 1, got U={U}, a={a}")
        return cls(-math.log(a) / U, (U, a))

    def logpdf(self, tau):
        t = np.asarray(tau, dtype=float)
        if np.any(t <= 0):
            raise DomainError(f"tau must be positive, got {tau}")
        out = math.log(self.lam / 2) - 1.5 * np.log(t) - self.lam / np.sqrt(t)
        return out if np.ndim(out) else float(out)

    def cdf(self, tau):
        t = np.asarray(tau, dtype=float)
        out = np.where(t > 0, np.exp(-self.lam / np.sqrt(np.maximum(t, 1e-300))), 0.0)
        return out if np.ndim(out) else float(out)

    def sd_tail_probability(self, U: float) -> float:
        """``P(1/sqrt(tau) > U)``; the standard deviation is exponential(lam)."""
        return math.exp(-self.lam * U)

    def quantile(self, p):
        p = np.asarray(p, dtype=float)
        out = (self.lam / -np.log(p)) ** 2
        return out if np.ndim(out) else float(out)

    def median(self) -> float:
        return float(self.quantile(0.5))

    def sample(self, rng: np.random.Generator, size=None):
        return self.quantile(rng.uniform(size=size))


@dataclass(frozen=True)
class UniformPrior:
    """Uniform(0, 1) on a mixing proportion."""

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0) or np.any(x >= 1):
            raise DomainError(f"value must lie in (0, 1), got {x}")
        out = np.zeros_like(x)
        return out if np.ndim(out) else 0.0

    def cdf(self, x):
        out = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        return out if np.ndim(out) else float(out)

    def quantile(self, p):
        return p

    def median(self) -> float:
        return 0.5

    def sample(self, rng: np.random.Generator, size=None):
        return rng.uniform(size=size)


MixingPrior = Union[GammaPCPrior, UniformPrior]


@dataclass(frozen=True)
class PriorSpec:
    gamma: MixingPrior
    tau: TauPCPrior
    phi: UniformPrior = UniformPrior()
    psi1: Optional[UniformPrior] = UniformPrior()
    psi2: Optional[UniformPrior] = UniformPrior()

    def for_parameter(self, name: str):
        prior = getattr(self, name)
        if prior is None:
            raise ValidationError(f"no prior declared for {name}")
        return prior


def prior_from_declaration(decl: dict, parameter: str):
    """Build a prior from a config entry ``{"type": "pc", "U": .., "a": ..}``
    or ``{"type": "uniform"}``."""
    kind = decl.get("type")
    if kind == "uniform":
        if parameter == "tau":
            raise ElicitationError("tau needs a PC prior; uniform is only defined on (0, 1)")
        return UniformPrior()
    if kind == "pc":
        U, a = float(decl["U"]), float(decl["a"])
        if parameter == "tau":
            return TauPCPrior.from_tail(U, a)
        if parameter == "gamma":
            return GammaPCPrior.from_tail(U, a)
        raise ElicitationError(f"PC prior is not available for {parameter}; use uniform")
    raise ElicitationError(f"unknown prior type {kind!r} for {parameter}")


def default_priors(include_iid: bool = False) -> PriorSpec:
    return PriorSpec(
        gamma=GammaPCPrior.from_tail(0.5, 0.99),
        tau=TauPCPrior.from_tail(1 / 0.31, 0.01),
        psi1=UniformPrior() if include_iid else None,
        psi2=UniformPrior() if include_iid else None,
    )
