"""Numerical check that the distance from the main-effects model grows as sqrt(gamma).

For a mixing parameter g the latent covariance is

    Sigma(g) = (1 - g) * C_main + g * C_int

with ``C_main`` the main-effects covariance and ``C_int`` the pseudo-inverse of
the interaction structure. The distance ``d(g) = sqrt(2 KLD(Sigma(g) || Sigma(g0)))``
is evaluated for a tiny base value ``g0``; ``d(g) / sqrt(g)`` should be flat and
close to ``sqrt(m / g0)``, where ``m`` counts support directions carried by the
interaction alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .errors import SupportError, ValidationError
from .gmrf import TOL_RANK, StructureMatrix, icar_structure, rw_structure, scale_structure
from .graph import AdjacencyGraph, lattice_graph
from .interaction import InteractionType, build_interaction

DEFAULT_GRID = tuple(round(0.1 * k, 1) for k in range(1, 10))
SPREAD_TOL = 1e-3
CONSTANT_TOL = 0.02


@dataclass(frozen=True, eq=False)
class MainEffectsCovariance:
    matrix: np.ndarray
    phi: float
    psi1: Optional[float] = None
    psi2: Optional[float] = None

    @property
    def includes_iid(self) -> bool:
        return self.psi1 is not None

    @property
    def rank(self) -> int:
        w = np.linalg.eigvalsh(self.matrix)
        return int(np.sum(w > TOL_RANK * max(w[-1], 0.0)))


def main_effects_covariance(
    R1: StructureMatrix,
    R2: StructureMatrix,
    phi: float,
    iid: Optional[tuple[float, float]] = None,
    require_scaled: bool = True,
) -> MainEffectsCovariance:
    """Covariance of the main-effects part of the linear predictor (unit total precision).

    Without ``iid`` the temporal and spatial blocks are the scaled-structure
    pseudo-inverses; with ``iid = (psi1, psi2)`` each block becomes
    ``(1 - psi) R⁻ + psi I``.
    """
    if require_scaled and not (R1.scaled and R2.scaled):
        raise ValidationError("main-effects covariance needs scaled structure matrices")
    if not 0 < phi <= 1:
        raise ValidationError(f"phi must lie in (0, 1], got {phi}")
    n1, n2 = R1.order, R2.order
    c1 = R1.spectrum.pinv
    c2 = R2.spectrum.pinv
    psi1 = psi2 = None
    if iid is not None:
        psi1, psi2 = iid
        if not (0 < psi1 <= 1 and 0 < psi2 <= 1):
            raise ValidationError(f"psi values must lie in (0, 1], got {iid}")
        c1 = (1 - psi1) * c1 + psi1 * np.eye(n1)
        c2 = (1 - psi2) * c2 + psi2 * np.eye(n2)
    a1 = np.kron(np.ones((n2, 1)), np.eye(n1))
    a2 = np.kron(np.eye(n2), np.ones((n1, 1)))
    mat = (1 - phi) * a1 @ c1 @ a1.T + phi * a2 @ c2 @ a2.T
    return MainEffectsCovariance(0.5 * (mat + mat.T), phi, psi1, psi2)


def support_basis(*covs: np.ndarray, tol: float = TOL_RANK) -> np.ndarray:
    """Orthonormal basis of the sum of the column spaces of PSD matrices."""
    total = sum(covs)
    w, v = np.linalg.eigh(0.5 * (total + total.T))
    keep = w > tol * max(w[-1], 0.0)
    return v[:, keep]


def singular_gaussian_kld(
    sigma1: np.ndarray,
    sigma0: np.ndarray,
    basis: Optional[np.ndarray] = None,
    tol: float = TOL_RANK,
) -> float:
    """KLD(N(0, sigma1) || N(0, sigma0)) for covariances on a common support.

    The support is the column space of ``sigma0`` unless ``basis`` is given.
    Both covariances are restricted to it and the usual full-rank formula is
    applied there.
    """
    s1 = np.asarray(sigma1, dtype=float)
    s0 = np.asarray(sigma0, dtype=float)
    if s1.shape != s0.shape or s1.ndim != 2:
        raise ValidationError(f"covariance shapes differ: {s1.shape} vs {s0.shape}")
    if basis is None:
        basis = support_basis(s0, tol=tol)
    k = basis.shape[1]
    if k == 0:
        raise SupportError("empty support")
    proj = basis @ basis.T
    for name, s in (("sigma1", s1), ("sigma0", s0)):
        outside = s - proj @ s @ proj
        if np.max(np.abs(outside)) > 1e-8 * max(1.0, np.max(np.abs(s))):
            raise SupportError(f"{name} has mass outside the common support")
    b1 = basis.T @ s1 @ basis
    b0 = basis.T @ s0 @ basis
    for name, b in (("sigma1", b1), ("sigma0", b0)):
        w = np.linalg.eigvalsh(b)
        if w[0] <= tol * 1e-4 * w[-1]:
            raise SupportError(f"{name} is singular on the common support")
    chol = scipy.linalg.cholesky(0.5 * (b0 + b0.T), lower=True)
    whitened = scipy.linalg.solve_triangular(chol, b1, lower=True)
    whitened = scipy.linalg.solve_triangular(chol, whitened.T, lower=True)
    mu = np.linalg.eigvalsh(0.5 * (whitened + whitened.T))
    return float(max(0.0, 0.5 * np.sum(mu - 1.0 - np.log(mu))))


def closed_form_kld(gamma: float, gamma0: float, p: int, m: int) -> float:
    """KLD when the support splits into ``p`` main-only and ``m`` interaction-only directions."""
    a = (1 - gamma) / (1 - gamma0)
    b = gamma / gamma0
    return 0.5 * (p * (a - 1 - math.log(a)) + m * (b - 1 - math.log(b)))


def interaction_only_count(cov_main: np.ndarray, cov_int: np.ndarray, basis: np.ndarray, tol: float = TOL_RANK) -> int:
    """Number of support directions where the main-effects covariance vanishes.

    Each such direction must carry positive interaction variance; this is
    checked rather than assumed.
    """
    bm = basis.T @ cov_main @ basis
    w, v = np.linalg.eigh(0.5 * (bm + bm.T))
    zero = w <= tol * max(w[-1], 0.0)
    if not np.any(zero):
        return 0
    vz = v[:, zero]
    bi = vz.T @ (basis.T @ cov_int @ basis) @ vz
    wi = np.linalg.eigvalsh(0.5 * (bi + bi.T))
    if wi[0] <= tol * max(np.max(np.abs(cov_int)), 1.0):
        raise SupportError("support direction with neither main nor interaction variance")
    return int(np.sum(zero))


@dataclass
class KldReport:
    interaction_type: str
    n1: int
    n2: int
    order: int
    includes_iid: bool
    gamma0: float
    grid: np.ndarray
    distances: np.ndarray
    ratios: np.ndarray
    ratio_mean: float
    relative_spread: float
    dominant_constant: float
    expected_constant: float
    m: int
    interaction_rank: int
    notes: list = field(default_factory=list)

    @property
    def constant_error(self) -> float:
        return abs(self.dominant_constant / self.expected_constant - 1.0)

    @property
    def passed(self) -> bool:
        return self.relative_spread < SPREAD_TOL and self.constant_error < CONSTANT_TOL

    def rows(self) -> list[dict]:
        return [
            {
                "type": self.interaction_type,
                "n1": self.n1,
                "n2": self.n2,
                "order": self.order,
                "iid": int(self.includes_iid),
                "gamma": g,
                "distance": d,
                "ratio": r,
                "fitted_constant": self.dominant_constant,
                "expected_constant": self.expected_constant,
                "m": self.m,
                "pass": int(self.passed),
            }
            for g, d, r in zip(self.grid, self.distances, self.ratios)
        ]


def mixture_distances(
    cov_main: np.ndarray,
    cov_int: np.ndarray,
    gamma0: float,
    grid: Sequence[float],
) -> tuple[np.ndarray, int, np.ndarray]:
    """Distances d(g) for each grid value, the interaction-only count, and the basis."""
    basis = support_basis(cov_main, cov_int)
    sigma0 = (1 - gamma0) * cov_main + gamma0 * cov_int
    out = []
    for g in grid:
        sigma = (1 - g) * cov_main + g * cov_int
        out.append(math.sqrt(2 * singular_gaussian_kld(sigma, sigma0, basis=basis)))
    m = interaction_only_count(cov_main, cov_int, basis)
    return np.array(out), m, basis


def distance_curve(
    itype,
    R1: StructureMatrix,
    R2: StructureMatrix,
    phi: float,
    iid: Optional[tuple[float, float]] = None,
    gamma0: float = 1e-6,
    grid: Sequence[float] = DEFAULT_GRID,
    components=None,
) -> KldReport:
    itype = InteractionType.parse(itype)
    if not gamma0 <= 1e-4:
        raise ValidationError(f"gamma0 must be at most 1e-4, got {gamma0}")
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) <= 0) or grid[0] <= 0 or grid[-1] >= 1:
        raise ValidationError("grid must be strictly increasing inside (0, 1)")
    if np.any((grid < 100 * gamma0) & (grid != gamma0)):
        raise ValidationError("grid values must be at least 100 * gamma0 (or equal gamma0)")
    model = build_interaction(itype, R1, R2, components=components)
    cov_main = main_effects_covariance(R1, R2, phi, iid).matrix
    cov_int = model.spectrum.pinv
    distances, m, _ = mixture_distances(cov_main, cov_int, gamma0, grid)
    use = grid >= 100 * gamma0
    ratios = distances / np.sqrt(grid)
    r = ratios[use]
    mean = float(np.mean(r))
    notes = []
    if m != model.theoretical_rank:
        notes.append(
            f"interaction-only directions m={m} differ from rank of interaction structure "
            f"{model.theoretical_rank}"
        )
    return KldReport(
        interaction_type=itype.value,
        n1=R1.order,
        n2=R2.order,
        order=1 if R1.kind == "rw1" else 2,
        includes_iid=iid is not None,
        gamma0=gamma0,
        grid=grid,
        distances=distances,
        ratios=ratios,
        ratio_mean=mean,
        relative_spread=float((np.max(r) - np.min(r)) / mean),
        dominant_constant=mean,
        expected_constant=math.sqrt(m / gamma0),
        m=m,
        interaction_rank=model.theoretical_rank,
        notes=notes,
    )


@dataclass(frozen=True)
class KldConfig:
    type: str
    n1: int = 4
    n2: int = 4
    order: int = 1
    phi: float = 0.5
    iid: Optional[tuple[float, float]] = None
    gamma0: float = 1e-6
    grid: tuple = DEFAULT_GRID
    graph: Optional[AdjacencyGraph] = None


def _structures(cfg: KldConfig):
    graph = cfg.graph if cfg.graph is not None else lattice_graph(1, cfg.n2)
    R1 = scale_structure(rw_structure(cfg.n1, cfg.order))
    R2 = scale_structure(icar_structure(graph))
    return R1, R2, graph


def verify_result1(configs: Sequence[KldConfig]) -> tuple[list[KldReport], bool]:
    """Run every configuration; failures are reported, never raised."""
    reports = []
    for cfg in configs:
        R1, R2, graph = _structures(cfg)
        reports.append(
            distance_curve(
                cfg.type, R1, R2, cfg.phi, cfg.iid, cfg.gamma0, cfg.grid,
                components=graph.components,
            )
        )
    return reports, all(r.passed for r in reports)


def default_configs(n1: int = 4, n2: int = 4, orders=(1, 2), iid_options=(None, (0.5, 0.5)), phi: float = 0.5):
    return [
        KldConfig(type=t.value, n1=n1, n2=n2, order=o, phi=phi, iid=iid)
        for t in InteractionType
        for o in orders
        for iid in iid_options
    ]
