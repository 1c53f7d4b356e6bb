"""Intrinsic GMRF structure matrices: construction, spectra, scaling, sampling.

All decompositions are dense. Zero eigenvalues are detected with a
threshold relative to the largest eigenvalue (``TOL_RANK``) and stored as
exact zeros, so pseudo-inverses, generalized determinants and samples are
confined to the row space.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property
from typing import Literal

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import (
    ConstraintViolationError,
    DegenerateStructureError,
    SizeError,
    ValidationError,
)
from .graph import AdjacencyGraph

TOL_RANK = 1e-8
SYMMETRY_TOL = 1e-10

Kind = Literal["rw1", "rw2", "icar", "kronecker", "identity"]
KINDS = ("rw1", "rw2", "icar", "kronecker", "identity")


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Eigen-decomposition of a symmetric PSD matrix.

    ``eigenvalues`` are sorted nonincreasing with null eigenvalues set to 0.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    rank: int

    @property
    def order(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def null_basis(self) -> np.ndarray:
        return self.eigenvectors[:, self.rank:]

    @property
    def row_basis(self) -> np.ndarray:
        return self.eigenvectors[:, : self.rank]

    @property
    def positive_eigenvalues(self) -> np.ndarray:
        return self.eigenvalues[: self.rank]

    @cached_property
    def log_gdet(self) -> float:
        """Log generalized determinant (product of nonzero eigenvalues)."""
        return float(np.sum(np.log(self.positive_eigenvalues)))

    @cached_property
    def pinv(self) -> np.ndarray:
        v = self.row_basis
        return (v / self.positive_eigenvalues) @ v.T

    @cached_property
    def matrix(self) -> np.ndarray:
        v = self.row_basis
        return (v * self.positive_eigenvalues) @ v.T

    @cached_property
    def sampling_factor(self) -> np.ndarray:
        """L with L @ z ~ N(0, pinv) for standard normal z of length ``rank``."""
        return self.row_basis / np.sqrt(self.positive_eigenvalues)

    def project(self, x: np.ndarray) -> np.ndarray:
        """Orthogonal projection onto the row space."""
        v = self.row_basis
        return v @ (v.T @ x)

    def null_residual(self, x: np.ndarray) -> float:
        """Largest absolute null-space coordinate of ``x``."""
        if self.rank == self.order:
            return 0.0
        return float(np.max(np.abs(self.null_basis.T @ x)))


@dataclass(frozen=True, eq=False)
class StructureMatrix:
    entries: np.ndarray
    kind: str
    scaled: bool = False

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValidationError(f"structure matrix must be square, got shape {a.shape}")
        if self.kind not in KINDS:
            raise ValidationError(f"unknown structure kind {self.kind!r}")
        scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
        if np.max(np.abs(a - a.T), initial=0.0) > SYMMETRY_TOL * scale:
            raise ValidationError("structure matrix is not symmetric")
        a = 0.5 * (a + a.T)
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def order(self) -> int:
        return self.entries.shape[0]

    @cached_property
    def spectrum(self) -> SpectralDecomposition:
        return spectral(self.entries)

    @property
    def rank(self) -> int:
        return self.spectrum.rank

    def __mul__(self, c: float) -> "StructureMatrix":
        return replace(self, entries=float(c) * self.entries)

    __rmul__ = __mul__


def spectral(R, tol_rank: float = TOL_RANK) -> SpectralDecomposition:
    """Dense symmetric eigendecomposition with relative rank detection."""
    if isinstance(R, StructureMatrix):
        return R.spectrum
    a = np.asarray(R, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if np.max(np.abs(a - a.T), initial=0.0) > SYMMETRY_TOL * scale:
        raise ValidationError("matrix is not symmetric within tolerance")
    w, v = np.linalg.eigh(0.5 * (a + a.T))
    w, v = w[::-1], v[:, ::-1]
    top = w[0] if w.size else 0.0
    if top <= 0:
        rank = 0
    else:
        rank = int(np.sum(w > tol_rank * top))
    w = w.copy()
    w[rank:] = 0.0
    w.setflags(write=False)
    v = np.ascontiguousarray(v)
    v.setflags(write=False)
    return SpectralDecomposition(w, v, rank)


def kronecker_spectral(outer: SpectralDecomposition, inner: SpectralDecomposition) -> SpectralDecomposition:
    """Spectrum of ``outer ⊗ inner`` assembled from the factor spectra."""
    lam = np.kron(outer.eigenvalues, inner.eigenvalues)
    vec = np.kron(outer.eigenvectors, inner.eigenvectors)
    idx = np.argsort(-lam, kind="stable")
    lam, vec = lam[idx], vec[:, idx]
    rank = outer.rank * inner.rank
    lam[rank:] = 0.0
    lam.setflags(write=False)
    vec = np.ascontiguousarray(vec)
    vec.setflags(write=False)
    return SpectralDecomposition(lam, vec, rank)


def rw_structure(n: int, order: int) -> StructureMatrix:
    """Unscaled RW1 / RW2 structure matrix ``DᵀD`` for ``n`` time points."""
    if order not in (1, 2):
        raise ValidationError(f"random-walk order must be 1 or 2, got {order}")
    if n < order + 1:
        raise SizeError(f"rw{order} needs at least {order + 1} time points, got {n}")
    d = np.diff(np.eye(n), n=order, axis=0)
    return StructureMatrix(d.T @ d, kind=f"rw{order}")


def icar_structure(g: AdjacencyGraph) -> StructureMatrix:
    """Unscaled ICAR structure: neighbour counts on the diagonal, -1 for neighbours."""
    if not g.edges:
        raise DegenerateStructureError("ICAR structure needs a graph with at least one edge")
    r = np.diag(g.neighbor_counts.astype(float)) - g.adjacency
    return StructureMatrix(r, kind="icar")


def identity_structure(n: int) -> StructureMatrix:
    return StructureMatrix(np.eye(n), kind="identity", scaled=True)


def generalized_variance(R, tol: float = 1e-12) -> float:
    """Geometric mean of the diagonal of the Moore-Penrose pseudo-inverse."""
    s = spectral(R)
    if s.rank == 0:
        raise DegenerateStructureError("structure matrix has rank 0")
    d = np.diag(s.pinv)
    if np.any(d <= tol):
        bad = np.flatnonzero(d <= tol)
        raise DegenerateStructureError(
            f"pseudo-inverse has zero variance at indices {bad.tolist()[:10]} (isolated nodes?)"
        )
    return float(np.exp(np.mean(np.log(d))))


def structure_components(R: StructureMatrix) -> list[np.ndarray]:
    """Index sets of the blocks that scale independently.

    ICAR matrices split along the connected components of their off-diagonal
    pattern; every other kind is a single block.
    """
    n = R.order
    if R.kind != "icar":
        return [np.arange(n)]
    pattern = (np.abs(R.entries) > 0).astype(int)
    np.fill_diagonal(pattern, 0)
    _, labels = connected_components(pattern, directed=False)
    blocks = [np.flatnonzero(labels == lab) for lab in np.unique(labels)]
    return sorted(blocks, key=lambda b: b[0])


def scale_structure(R: StructureMatrix) -> StructureMatrix:
    """Return ``GV(R) * R`` so the generalized variance becomes 1.

    ICAR blocks belonging to different connected components are scaled
    separately; isolated areas keep a zero row and column.
    """
    if R.kind == "identity":
        return replace(R, scaled=True)
    out = np.array(R.entries, dtype=float)
    blocks = [b for b in structure_components(R) if b.size > 1 or R.kind != "icar"]
    if not blocks:
        raise DegenerateStructureError("no component with more than one node to scale")
    for b in blocks:
        sub = out[np.ix_(b, b)]
        out[np.ix_(b, b)] = generalized_variance(sub) * sub
    return StructureMatrix(out, kind=R.kind, scaled=True)


def sample_igmrf(spec: SpectralDecomposition, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw from N(0, R⁻) restricted to the row space of R.

    The draw is a combination of row-space eigenvectors only, so every
    null-space constraint holds up to round-off.
    """
    if size is None:
        z = rng.standard_normal(spec.rank)
        return spec.sampling_factor @ z
    z = rng.standard_normal((size, spec.rank))
    return z @ spec.sampling_factor.T


def igmrf_logdensity(
    x: np.ndarray,
    spec: SpectralDecomposition,
    tol: float = 1e-8,
    project: bool = False,
) -> float:
    """Improper GMRF log density on the row space (generalized determinant).

    With ``project=True`` any null-space component of ``x`` is removed first;
    otherwise it must be below ``tol`` (relative to ``max(1, |x|)``).
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.order,):
        raise ValidationError(f"expected a vector of length {spec.order}, got shape {x.shape}")
    if project:
        x = spec.project(x)
    else:
        resid = spec.null_residual(x)
        if resid > tol * max(1.0, float(np.linalg.norm(x))):
            raise ConstraintViolationError(f"null-space component {resid:.3g} exceeds tolerance")
    coords = spec.row_basis.T @ x
    quad = float(np.sum(spec.positive_eigenvalues * coords**2))
    return -0.5 * spec.rank * np.log(2 * np.pi) + 0.5 * spec.log_gdet - 0.5 * quad
