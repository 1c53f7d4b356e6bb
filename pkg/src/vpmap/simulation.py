"""Simulation-recovery harness for the mixing parameter.

Data are binomial on a fixed lattice with fixed base effects::

    logit(mu_ij) = alpha + sqrt(1/tau) * ( sqrt(1-gamma) * ( sqrt(1-phi) b1_i + sqrt(phi) b2_j )
                                           + sqrt(gamma) * d_ij )

with tau = 1 and phi = 0.5 held fixed while gamma varies across scenarios.
The base effects ``b1, b2, d`` are drawn once from their scaled priors and
standardized so that each has empirical generalized variance one
(``x' R x / rank(R) = 1``); the nominal gamma is then the realized share.
Replicates differ only in the binomial noise, and the data for a replicate do
not depend on the prior being fitted, so prior comparisons are paired.
"""

from __future__ import annotations

import enum
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .errors import ValidationError, VpmapError
from .graph import AdjacencyGraph, lattice_graph
from .inference import McmcConfig, run_mcmc
from .model import Dataset, Hyperparameters, LatentField, ModelSpec, draw_latent, simulate_dataset
from .priors import GammaPCPrior, PriorSpec, TauPCPrior, UniformPrior

log = logging.getLogger(__name__)

SCENARIO_GAMMA = {"SC1": 0.0, "SC2": 0.1, "SC3": 1 / 3, "SC4": 2 / 3}
SIZE_FACTOR = {"actual": 1.0, "smaller": 0.1, "larger": 10.0}
PRIOR_CHOICES = ("PC(0.05,0.99)", "PC(0.5,0.99)", "PC(0.95,0.99)", "Uniform")
TRUE_TAU = 1.0
TRUE_PHI = 0.5


class PriorChoice(enum.Enum):
    PC005 = "PC(0.05,0.99)"
    PC05 = "PC(0.5,0.99)"
    PC095 = "PC(0.95,0.99)"
    UNIFORM = "Uniform"

    @classmethod
    def parse(cls, value) -> "PriorChoice":
        if isinstance(value, cls):
            return value
        key = str(value).replace(" ", "")
        for member in cls:
            if member.value.lower() == key.lower() or member.name.lower() == key.lower():
                return member
        raise ValidationError(f"unknown prior choice {value!r}; expected one of {PRIOR_CHOICES}")

    def gamma_prior(self):
        if self is PriorChoice.UNIFORM:
            return UniformPrior()
        U = {"PC005": 0.05, "PC05": 0.5, "PC095": 0.95}[self.name]
        return GammaPCPrior.from_tail(U, 0.99)


@dataclass(frozen=True)
class ScenarioSpec:
    scenario: str
    size_level: str = "actual"
    prior_choice: PriorChoice = PriorChoice.PC05
    replicates: int = 10

    def __post_init__(self):
        if self.scenario not in SCENARIO_GAMMA:
            raise ValidationError(f"scenario must be one of {tuple(SCENARIO_GAMMA)}, got {self.scenario!r}")
        if self.size_level not in SIZE_FACTOR:
            raise ValidationError(f"size_level must be one of {tuple(SIZE_FACTOR)}, got {self.size_level!r}")
        object.__setattr__(self, "prior_choice", PriorChoice.parse(self.prior_choice))
        if int(self.replicates) < 1:
            raise ValidationError("replicates must be at least 1")

    @property
    def gamma(self) -> float:
        return SCENARIO_GAMMA[self.scenario]

    @property
    def label(self) -> str:
        return f"{self.scenario}/{self.size_level}/{self.prior_choice.value}"


def all_scenarios(replicates: int = 10) -> list[ScenarioSpec]:
    """Every scenario x size x prior cell of the design."""
    return [
        ScenarioSpec(sc, size, prior, replicates)
        for sc in SCENARIO_GAMMA
        for size in SIZE_FACTOR
        for prior in PriorChoice
    ]


@dataclass(frozen=True, eq=False)
class SimulationDesign:
    """Lattice, base effects and exposure shared by every scenario."""

    n1: int = 10
    graph: AdjacencyGraph = field(default_factory=lambda: lattice_graph(3, 5))
    alpha: float = -3.0
    base_population: float = 1000.0
    base_seed: int = 20240517
    tau_prior: TauPCPrior = field(default_factory=lambda: TauPCPrior.from_tail(1 / 0.31, 0.01))
    effects: Optional[LatentField] = None

    @cached_property
    def spec(self) -> ModelSpec:
        return ModelSpec("binomial", 1, "IV", False, self.n1, self.graph)

    def base_effects(self) -> LatentField:
        """Loaded effects when given (used as is), else standardized prior draws."""
        spec = self.spec
        if self.effects is not None:
            self.effects.check(spec, tol=1e-6)
            return self.effects
        rng = np.random.default_rng(self.base_seed)
        x = draw_latent(spec, rng, self.alpha)
        scaled = {}
        for b in ("beta1", "beta2", "delta"):
            s = spec.block_spectrum(b)
            v = x.block(b)
            q = float(v @ s.matrix @ v)
            scaled[b] = v * math.sqrt(s.rank / q)
        return LatentField(alpha=x.alpha, **scaled)

    def population(self) -> np.ndarray:
        """Per-area trials: log-normal spread around ``base_population``."""
        rng = np.random.default_rng(self.base_seed + 1)
        pop = self.base_population * np.exp(0.5 * rng.standard_normal(self.graph.n_areas))
        return np.round(pop)

    def population_at(self, size_level: str) -> np.ndarray:
        return np.maximum(np.round(self.population() * SIZE_FACTOR[size_level]), 1.0)

    def simulate(self, scenario: ScenarioSpec, replicate: int, seed: int) -> Dataset:
        h = Hyperparameters(TRUE_TAU, scenario.gamma, TRUE_PHI, boundary_ok=True)
        rng = np.random.default_rng(data_seed(seed, scenario, replicate))
        return simulate_dataset(
            h, self.base_effects(), self.population_at(scenario.size_level), self.spec, rng
        )

    def priors(self, scenario: ScenarioSpec) -> PriorSpec:
        return PriorSpec(
            gamma=scenario.prior_choice.gamma_prior(), tau=self.tau_prior, psi1=None, psi2=None
        )


def data_seed(seed: int, scenario: ScenarioSpec, replicate: int) -> np.random.SeedSequence:
    """Depends on the scenario and size level but not on the prior."""
    sc = list(SCENARIO_GAMMA).index(scenario.scenario)
    size = list(SIZE_FACTOR).index(scenario.size_level)
    return np.random.SeedSequence([seed, sc, size, replicate])


def mcmc_seed(seed: int, scenario: ScenarioSpec, replicate: int) -> int:
    return int(data_seed(seed, scenario, replicate).generate_state(1)[0])


class ReplicateError(VpmapError):
    """Failure inside one replicate; keeps the exit code of the cause."""

    def __init__(self, message: str, replicate: int, exit_code: int = 1):
        super().__init__(message)
        self.replicate = replicate
        self.exit_code = exit_code

    def __reduce__(self):
        return type(self), (self.args[0], self.replicate, self.exit_code)


def run_replicate(
    scenario: ScenarioSpec,
    replicate: int,
    mcmc: McmcConfig,
    seed: int = 0,
    design: Optional[SimulationDesign] = None,
) -> dict:
    design = design or SimulationDesign()
    try:
        data = design.simulate(scenario, replicate, seed)
        cfg = replace(mcmc, seed=mcmc_seed(seed, scenario, replicate), store_pointwise=False)
        draws = run_mcmc(data, design.spec, design.priors(scenario), cfg)
    except VpmapError as exc:
        raise ReplicateError(f"{scenario.label} replicate {replicate}: {exc}", replicate, exc.exit_code) from exc
    return {
        "scenario": scenario.scenario,
        "size_level": scenario.size_level,
        "prior": scenario.prior_choice.value,
        "replicate": replicate,
        "true_gamma": scenario.gamma,
        "gamma_mean": float(np.mean(draws.pooled("gamma"))),
        "phi_mean": float(np.mean(draws.pooled("phi"))),
        "tau_mean": float(np.mean(draws.pooled("tau"))),
    }


def _replicate_task(args):
    return run_replicate(*args)


def run_scenario(
    scenario: ScenarioSpec,
    mcmc: McmcConfig,
    seed: int = 0,
    design: Optional[SimulationDesign] = None,
    jobs: int = 1,
) -> list[dict]:
    """One record per replicate, in replicate order."""
    design = design or SimulationDesign()
    tasks = [(scenario, r, mcmc, seed, design) for r in range(scenario.replicates)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_replicate_task, tasks))
    out = []
    for t in tasks:
        out.append(_replicate_task(t))
        log.info("%s replicate %d: gamma mean %.4f", scenario.label, t[1], out[-1]["gamma_mean"])
    return out


def summarize(records: Sequence[dict]) -> list[dict]:
    """Mean and sd of the posterior means, per scenario cell."""
    cells: dict[tuple, list[dict]] = {}
    for r in records:
        cells.setdefault((r["scenario"], r["size_level"], r["prior"]), []).append(r)
    out = []
    for (sc, size, prior), rs in cells.items():
        row = {"scenario": sc, "size_level": size, "prior": prior, "replicates": len(rs),
               "true_gamma": rs[0]["true_gamma"]}
        for name in ("gamma_mean", "phi_mean", "tau_mean"):
            v = np.array([r[name] for r in rs])
            row[f"{name}_avg"] = float(v.mean())
            row[f"{name}_sd"] = float(v.std(ddof=1)) if v.size > 1 else 0.0
        out.append(row)
    return out
