"""Kronecker-product space-time interaction structures (types I to IV).

The interaction vector is ordered time-fastest: cell (i, j) with time i and
area j sits at position ``j * n1 + i``, matching ``R_space ⊗ R_time``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import SizeError, ValidationError
from .gmrf import (
    SpectralDecomposition,
    StructureMatrix,
    identity_structure,
    kronecker_spectral,
)

DEFAULT_MAX_DIM = 5000


class InteractionType(enum.Enum):
    I = "I"
    II = "II"
    III = "III"
    IV = "IV"

    @classmethod
    def parse(cls, value) -> "InteractionType":
        if isinstance(value, cls):
            return value
        aliases = {"1": "I", "2": "II", "3": "III", "4": "IV"}
        key = str(value).strip().upper()
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValidationError(f"unknown interaction type {value!r}") from None

    @property
    def structured_time(self) -> bool:
        return self in (InteractionType.II, InteractionType.IV)

    @property
    def structured_space(self) -> bool:
        return self in (InteractionType.III, InteractionType.IV)


def interaction_rank(itype, n1: int, n2: int, r1: int, n_components: int = 1) -> int:
    """Rank of the interaction structure; ``n_components`` counts every
    connected component of the graph, isolated areas included."""
    itype = InteractionType.parse(itype)
    t = n1 - r1 if itype.structured_time else n1
    s = n2 - n_components if itype.structured_space else n2
    return t * s


def constraint_rows(
    itype,
    n1: int,
    n2: int,
    components: Sequence[Sequence[int]] | None = None,
) -> np.ndarray:
    """Sum-to-zero constraints on the interaction, one row per constraint.

    Type II sums over time within each area, type III sums over areas at
    each time point (within each connected component when ``components`` is
    given), type IV stacks both sets.
    """
    itype = InteractionType.parse(itype)
    rows = []
    if itype.structured_time:
        rows.append(np.kron(np.eye(n2), np.ones((1, n1))))
    if itype.structured_space:
        comps = components if components is not None else [range(n2)]
        for comp in comps:
            ind = np.zeros((1, n2))
            ind[0, list(comp)] = 1.0
            rows.append(np.kron(ind, np.eye(n1)))
    if not rows:
        return np.zeros((0, n1 * n2))
    return np.vstack(rows)


@dataclass(frozen=True, eq=False)
class InteractionModel:
    type: InteractionType
    time_factor: StructureMatrix
    space_factor: StructureMatrix
    constraints: np.ndarray
    theoretical_rank: int
    ordering: str = "time-fastest"

    @property
    def n1(self) -> int:
        return self.time_factor.order

    @property
    def n2(self) -> int:
        return self.space_factor.order

    @cached_property
    def structure(self) -> StructureMatrix:
        kron = np.kron(self.space_factor.entries, self.time_factor.entries)
        return StructureMatrix(kron, kind="kronecker", scaled=True)

    @cached_property
    def spectrum(self) -> SpectralDecomposition:
        return kronecker_spectral(self.space_factor.spectrum, self.time_factor.spectrum)

    @property
    def null_dimension(self) -> int:
        return self.n1 * self.n2 - self.spectrum.rank

    @property
    def constraints_span_null_space(self) -> bool:
        """False when the tabulated constraints leave null directions free
        (RW2-based types II and IV); sampling then uses the full row space."""
        if self.constraints.shape[0] == 0:
            return self.null_dimension == 0
        return int(np.linalg.matrix_rank(self.constraints)) == self.null_dimension

    def metadata(self) -> dict:
        return {
            "type": self.type.value,
            "n1": self.n1,
            "n2": self.n2,
            "rank": self.spectrum.rank,
            "theoretical_rank": self.theoretical_rank,
            "n_constraints": int(self.constraints.shape[0]),
            "null_dimension": self.null_dimension,
            "constraints_span_null_space": self.constraints_span_null_space,
            "ordering": self.ordering,
        }


def build_interaction(
    itype,
    R1: StructureMatrix,
    R2: StructureMatrix,
    components: Sequence[Sequence[int]] | None = None,
    max_dim: int = DEFAULT_MAX_DIM,
) -> InteractionModel:
    """Assemble the interaction model from the scaled time and space structures.

    ``components`` is the connected-component partition of the spatial graph;
    it drives the per-component constraints and the rank correction.
    """
    itype = InteractionType.parse(itype)
    if not (R1.scaled and R2.scaled):
        raise ValidationError("interaction factors must be scaled structure matrices")
    if R1.kind not in ("rw1", "rw2"):
        raise ValidationError(f"time factor must be rw1 or rw2, got {R1.kind}")
    if R2.kind != "icar":
        raise ValidationError(f"space factor must be icar, got {R2.kind}")
    n1, n2 = R1.order, R2.order
    if n1 * n2 > max_dim:
        raise SizeError(f"interaction dimension {n1 * n2} exceeds cap {max_dim}")
    if components is None:
        components = [tuple(range(n2))]
    r1 = 1 if R1.kind == "rw1" else 2
    time_factor = R1 if itype.structured_time else identity_structure(n1)
    space_factor = R2 if itype.structured_space else identity_structure(n2)
    return InteractionModel(
        type=itype,
        time_factor=time_factor,
        space_factor=space_factor,
        constraints=constraint_rows(itype, n1, n2, components),
        theoretical_rank=interaction_rank(itype, n1, n2, r1, len(components)),
    )
