"""Variance-partitioning linear predictor, parameter mappings, likelihoods, simulation.

With total precision tau and mixing proportions gamma (interaction share),
phi (space share of the main effects) and optionally psi1 / psi2 (iid share
within time / space), the predictor for time i and area j is

    eta_ij = alpha + sqrt(1/tau) * [ sqrt(1-gamma) * ( sqrt(1-phi) * T_i + sqrt(phi) * S_j )
                                     + sqrt(gamma) * delta_ij ]

    T_i = sqrt(1-psi1) * beta1_i + sqrt(psi1) * eps1_i     (T_i = beta1_i without iid)
    S_j = sqrt(1-psi2) * beta2_j + sqrt(psi2) * eps2_j     (S_j = beta2_j without iid)

where every latent block has a fixed unit-scale prior (scaled IGMRF or iid N(0, I)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from functools import cached_property
from typing import Optional, Union

import numpy as np
from scipy.special import expit, gammaln

from .errors import DatasetError, DomainError, ValidationError
from .gmrf import SpectralDecomposition, StructureMatrix, icar_structure, rw_structure, sample_igmrf, scale_structure
from .graph import AdjacencyGraph
from .interaction import InteractionModel, InteractionType, build_interaction, DEFAULT_MAX_DIM

FAMILIES = ("binomial", "poisson")
BLOCKS = ("beta1", "eps1", "beta2", "eps2", "delta")
CONSTRAINT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ModelSpec:
    family: str
    temporal_order: int
    interaction_type: InteractionType
    include_iid_main: bool
    n1: int
    graph: AdjacencyGraph
    max_dim: int = DEFAULT_MAX_DIM

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if self.temporal_order not in (1, 2):
            raise ValidationError(f"temporal_order must be 1 or 2, got {self.temporal_order}")
        object.__setattr__(self, "interaction_type", InteractionType.parse(self.interaction_type))

    @property
    def n2(self) -> int:
        return self.graph.n_areas

    @property
    def n_cells(self) -> int:
        return self.n1 * self.n2

    @cached_property
    def time_structure(self) -> StructureMatrix:
        return scale_structure(rw_structure(self.n1, self.temporal_order))

    @cached_property
    def space_structure(self) -> StructureMatrix:
        return scale_structure(icar_structure(self.graph))

    @cached_property
    def interaction(self) -> InteractionModel:
        return build_interaction(
            self.interaction_type,
            self.time_structure,
            self.space_structure,
            components=self.graph.components,
            max_dim=self.max_dim,
        )

    @cached_property
    def time_index(self) -> np.ndarray:
        return np.tile(np.arange(self.n1), self.n2)

    @cached_property
    def area_index(self) -> np.ndarray:
        return np.repeat(np.arange(self.n2), self.n1)

    @cached_property
    def intercept_groups(self) -> np.ndarray:
        """Per-area intercept group: one per component with more than one
        area, plus one shared group for all isolated areas."""
        groups = np.empty(self.n2, dtype=int)
        big = [c for c in self.graph.components if len(c) > 1]
        for g, comp in enumerate(big):
            groups[list(comp)] = g
        for s in self.graph.singletons:
            groups[s] = len(big)
        return groups

    @property
    def n_intercepts(self) -> int:
        return int(self.intercept_groups.max()) + 1

    @property
    def blocks(self) -> tuple[str, ...]:
        if self.include_iid_main:
            return BLOCKS
        return ("beta1", "beta2", "delta")

    @property
    def hyper_names(self) -> tuple[str, ...]:
        if self.include_iid_main:
            return ("tau", "gamma", "phi", "psi1", "psi2")
        return ("tau", "gamma", "phi")

    def block_spectrum(self, block: str) -> Optional[SpectralDecomposition]:
        """Prior spectrum of a latent block; ``None`` for iid blocks."""
        return {
            "beta1": self.time_structure.spectrum,
            "beta2": self.space_structure.spectrum,
            "delta": self.interaction.spectrum,
        }.get(block)

    def block_size(self, block: str) -> int:
        return {"beta1": self.n1, "eps1": self.n1, "beta2": self.n2, "eps2": self.n2}.get(block, self.n_cells)

    def block_dof(self, block: str) -> int:
        spec = self.block_spectrum(block)
        return self.block_size(block) if spec is None else spec.rank

    def block_to_cells(self, block: str, x: np.ndarray) -> np.ndarray:
        if block in ("beta1", "eps1"):
            return x[self.time_index]
        if block in ("beta2", "eps2"):
            return x[self.area_index]
        return x


@dataclass(frozen=True)
class Hyperparameters:
    tau: float
    gamma: float
    phi: float
    psi1: Optional[float] = None
    psi2: Optional[float] = None
    boundary_ok: bool = field(default=False, compare=False, repr=False)

    def __post_init__(self):
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise DomainError(f"tau must be positive and finite, got {self.tau}")
        if (self.psi1 is None) != (self.psi2 is None):
            raise ValidationError("psi1 and psi2 must be given together")
        for name in ("gamma", "phi", "psi1", "psi2"):
            v = getattr(self, name)
            if v is None:
                continue
            ok = 0 <= v <= 1 if self.boundary_ok else 0 < v < 1
            if not ok:
                raise DomainError(f"{name} must lie in (0, 1), got {v}")

    @property
    def has_iid(self) -> bool:
        return self.psi1 is not None

    def as_dict(self) -> dict:
        out = {"tau": self.tau, "gamma": self.gamma, "phi": self.phi}
        if self.has_iid:
            out.update(psi1=self.psi1, psi2=self.psi2)
        return out


def block_weights(h: Hyperparameters) -> dict[str, float]:
    """Coefficient multiplying each unit-scale latent block in the predictor."""
    sd = 1.0 / math.sqrt(h.tau)
    main = sd * math.sqrt(1 - h.gamma)
    out = {"delta": sd * math.sqrt(h.gamma)}
    t = main * math.sqrt(1 - h.phi)
    s = main * math.sqrt(h.phi)
    if h.has_iid:
        out.update(
            beta1=t * math.sqrt(1 - h.psi1),
            eps1=t * math.sqrt(h.psi1),
            beta2=s * math.sqrt(1 - h.psi2),
            eps2=s * math.sqrt(h.psi2),
        )
    else:
        out.update(beta1=t, beta2=s)
    return out


@dataclass(frozen=True, eq=False)
class LatentField:
    alpha: np.ndarray
    beta1: np.ndarray
    beta2: np.ndarray
    delta: np.ndarray
    eps1: Optional[np.ndarray] = None
    eps2: Optional[np.ndarray] = None

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v is not None:
                object.__setattr__(self, f.name, np.atleast_1d(np.asarray(v, dtype=float)))

    @classmethod
    def zeros(cls, spec: ModelSpec) -> "LatentField":
        iid = spec.include_iid_main
        return cls(
            alpha=np.zeros(spec.n_intercepts),
            beta1=np.zeros(spec.n1),
            beta2=np.zeros(spec.n2),
            delta=np.zeros(spec.n_cells),
            eps1=np.zeros(spec.n1) if iid else None,
            eps2=np.zeros(spec.n2) if iid else None,
        )

    def block(self, name: str) -> np.ndarray:
        return getattr(self, name)

    def check(self, spec: ModelSpec, tol: float = CONSTRAINT_TOL) -> None:
        expected = {"alpha": spec.n_intercepts}
        for b in spec.blocks:
            expected[b] = spec.block_size(b)
        for name, size in expected.items():
            v = getattr(self, name)
            if v is None or v.shape != (size,):
                got = None if v is None else v.shape
                raise ValidationError(f"latent block {name} must have shape ({size},), got {got}")
        for b in ("beta1", "beta2", "delta"):
            spectrum = spec.block_spectrum(b)
            resid = spectrum.null_residual(getattr(self, b))
            if resid > tol * max(1.0, float(np.linalg.norm(getattr(self, b)))):
                raise ValidationError(f"latent block {b} violates its constraints (residual {resid:.3g})")


def linear_predictor(h: Hyperparameters, x: LatentField, spec: ModelSpec, check: bool = True) -> np.ndarray:
    """Predictor on the cell grid, time-fastest ordering."""
    if h.has_iid != spec.include_iid_main:
        raise ValidationError("psi parameters must be present exactly when iid main effects are included")
    if check:
        x.check(spec)
    w = block_weights(h)
    eta = x.alpha[spec.intercept_groups][spec.area_index].astype(float)
    for b in spec.blocks:
        eta = eta + w[b] * spec.block_to_cells(b, x.block(b))
    return eta


@dataclass(frozen=True)
class ClassicPrecisions:
    """Precisions of the classic parametrization (relative to scaled structures)."""

    tau1: float
    tau2: float
    tau12: float
    tau_eps1: Optional[float] = None
    tau_eps2: Optional[float] = None

    def variances(self) -> dict[str, float]:
        out = {"beta1": 1 / self.tau1, "beta2": 1 / self.tau2, "delta": 1 / self.tau12}
        if self.tau_eps1 is not None:
            out.update(eps1=1 / self.tau_eps1, eps2=1 / self.tau_eps2)
        return out


def vp_to_classic(h: Hyperparameters) -> ClassicPrecisions:
    var = {b: w * w for b, w in block_weights(h).items()}
    zero = [b for b, v in var.items() if not v > 0]
    if zero:
        raise DomainError(f"mixing parameter at a boundary: zero variance for {zero}")
    return ClassicPrecisions(
        tau1=1 / var["beta1"],
        tau2=1 / var["beta2"],
        tau12=1 / var["delta"],
        tau_eps1=1 / var["eps1"] if h.has_iid else None,
        tau_eps2=1 / var["eps2"] if h.has_iid else None,
    )


def classic_to_vp(p: ClassicPrecisions) -> Hyperparameters:
    for name in ("tau1", "tau2", "tau12", "tau_eps1", "tau_eps2"):
        v = getattr(p, name)
        if v is not None and not (v > 0 and math.isfinite(v)):
            raise DomainError(f"{name} must be positive and finite, got {v}")
    v = p.variances()
    v_time = v["beta1"] + v.get("eps1", 0.0)
    v_space = v["beta2"] + v.get("eps2", 0.0)
    v_main = v_time + v_space
    total = v_main + v["delta"]
    psi = {}
    if p.tau_eps1 is not None:
        psi = {"psi1": v["eps1"] / v_time, "psi2": v["eps2"] / v_space}
    return Hyperparameters(tau=1 / total, gamma=v["delta"] / total, phi=v_space / v_main, **psi)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Counts on the full (time, area) grid, time-fastest.

    ``exposure`` holds binomial trials or Poisson expected counts per cell;
    unobserved cells have ``observed == False`` and never enter the likelihood.
    """

    y: np.ndarray
    exposure: np.ndarray
    n1: int
    n2: int
    observed: Optional[np.ndarray] = None
    family: str = "binomial"

    def __post_init__(self):
        n = self.n1 * self.n2
        y = np.asarray(self.y, dtype=float).reshape(-1)
        e = np.asarray(self.exposure, dtype=float).reshape(-1)
        obs = np.ones(n, dtype=bool) if self.observed is None else np.asarray(self.observed, dtype=bool).reshape(-1)
        if y.shape != (n,) or e.shape != (n,) or obs.shape != (n,):
            raise DatasetError(f"dataset arrays must have length n1*n2 = {n}")
        if self.family not in FAMILIES:
            raise DatasetError(f"unknown family {self.family!r}")
        yo, eo = y[obs], e[obs]
        if np.any(~np.isfinite(yo)) or np.any(yo < 0) or np.any(yo != np.round(yo)):
            raise DatasetError("counts must be nonnegative integers")
        if np.any(~np.isfinite(eo)) or np.any(eo <= 0):
            raise DatasetError("exposure must be positive")
        if self.family == "binomial":
            if np.any(eo != np.round(eo)):
                raise DatasetError("binomial trials must be integers")
            if np.any(yo > eo):
                k = int(np.flatnonzero(obs)[np.argmax(yo > eo)])
                raise DatasetError(
                    f"count exceeds trials at time {k % self.n1 + 1}, area {k // self.n1 + 1}"
                )
        y = np.where(obs, y, 0.0)
        e = np.where(obs, e, 1.0)
        for name, v in (("y", y), ("exposure", e), ("observed", obs)):
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @classmethod
    def empty(cls, n1: int, n2: int, family: str = "binomial") -> "Dataset":
        """All cells missing: the likelihood is constant."""
        n = n1 * n2
        return cls(np.zeros(n), np.ones(n), n1, n2, np.zeros(n, dtype=bool), family)

    @property
    def n_observed(self) -> int:
        return int(self.observed.sum())

    def grid(self, values: np.ndarray) -> np.ndarray:
        """Reshape a time-fastest cell vector to (n1, n2)."""
        return np.asarray(values).reshape(self.n2, self.n1).T


def log_likelihood(data: Dataset, eta: np.ndarray, family: Optional[str] = None, pointwise: bool = False):
    """Log likelihood including normalizing constants; unobserved cells give 0."""
    family = family or data.family
    eta = np.asarray(eta, dtype=float)
    y, e = data.y, data.exposure
    if family == "binomial":
        if np.any(y[data.observed] > e[data.observed]):
            raise DatasetError("binomial count exceeds trials")
        const = gammaln(e + 1) - gammaln(y + 1) - gammaln(e - y + 1)
        ll = const + y * eta - e * np.logaddexp(0.0, eta)
    elif family == "poisson":
        ll = y * (np.log(e) + eta) - e * np.exp(eta) - gammaln(y + 1)
    else:
        raise ValidationError(f"unknown family {family!r}")
    ll = np.where(data.observed, ll, 0.0)
    return ll if pointwise else float(np.sum(ll))


def draw_latent(spec: ModelSpec, rng: np.random.Generator, alpha: Union[float, np.ndarray] = 0.0) -> LatentField:
    """Latent effects drawn from their (constrained) priors."""
    iid = spec.include_iid_main
    return LatentField(
        alpha=np.broadcast_to(np.asarray(alpha, dtype=float), (spec.n_intercepts,)).copy(),
        beta1=sample_igmrf(spec.time_structure.spectrum, rng),
        beta2=sample_igmrf(spec.space_structure.spectrum, rng),
        delta=sample_igmrf(spec.interaction.spectrum, rng),
        eps1=rng.standard_normal(spec.n1) if iid else None,
        eps2=rng.standard_normal(spec.n2) if iid else None,
    )


def simulate_dataset(
    h: Hyperparameters,
    effects: Union[LatentField, str],
    pop: np.ndarray,
    spec: ModelSpec,
    rng: np.random.Generator,
    alpha: float = 0.0,
) -> Dataset:
    """Simulate counts from the predictor; ``effects="prior"`` draws the latent
    blocks first (with intercept ``alpha``)."""
    if isinstance(effects, str):
        if effects not in ("prior", "draw-from-prior"):
            raise ValidationError(f"unknown effects source {effects!r}")
        effects = draw_latent(spec, rng, alpha)
    pop = np.asarray(pop, dtype=float)
    if pop.shape == (spec.n2,):
        pop = pop[spec.area_index]
    if pop.shape != (spec.n_cells,):
        raise ValidationError(f"exposure must have length n2={spec.n2} or n1*n2={spec.n_cells}")
    if np.any(pop <= 0):
        raise ValidationError("exposure must be positive")
    eta = linear_predictor(h, effects, spec)
    if spec.family == "binomial":
        y = rng.binomial(pop.astype(np.int64), expit(eta))
    else:
        y = rng.poisson(pop * np.exp(eta))
    return Dataset(y.astype(float), pop, spec.n1, spec.n2, family=spec.family)
