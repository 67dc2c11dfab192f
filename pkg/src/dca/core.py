"""Cell-level mathematics of the dendritic cell algorithm.

A dendritic cell fuses four tissue signals (PAMP, danger, safe,
inflammation) into three cytokine accumulators via a weighted sum,
collects antigen labels while immature, and migrates once its
costimulatory (csm) accumulator crosses an individual threshold.
Migrated cells present their antigen store under a binary context
decided by comparing the mature and semi-mature accumulators.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class CellState(Enum):
    IMMATURE = "immature"
    MIGRATED = "migrated"


class Context(Enum):
    MATURE = "mature"
    SEMI_MATURE = "semi-mature"


class CellStateError(Exception):
    """Operation invoked on a cell in the wrong state."""


class AntigenStoreFull(Exception):
    """Ingestion attempted on a cell whose antigen store is at capacity."""


class InvalidWeights(ValueError):
    """Weight row whose absolute-value sum is zero (normalization undefined)."""


@dataclass(frozen=True)
class SignalVector:
    """Signal concentrations at one instant.

    pamp, danger and safe are non-negative concentrations (nominal range
    0-100); inflammation is a context amplifier in [0, 2].
    """

    pamp: float = 0.0
    danger: float = 0.0
    safe: float = 0.0
    inflammation: float = 0.0

    def __post_init__(self):
        if self.pamp < 0 or self.danger < 0 or self.safe < 0:
            raise ValueError("pamp, danger and safe must be non-negative")
        if not 0.0 <= self.inflammation <= 2.0:
            raise ValueError("inflammation must lie in [0, 2]")


@dataclass(frozen=True)
class WeightMatrix:
    """Fusion weights, one (P, D, S) triple per output accumulator.

    Defaults are the empirically derived values: csm (2, 1, 2),
    semi (0, 0, 3), mat (2, 1, -3).
    """

    csm: tuple[float, float, float] = (2.0, 1.0, 2.0)
    semi: tuple[float, float, float] = (0.0, 0.0, 3.0)
    mat: tuple[float, float, float] = (2.0, 1.0, -3.0)

    def __post_init__(self):
        for name in ("csm", "semi", "mat"):
            row = getattr(self, name)
            if sum(abs(w) for w in row) == 0.0:
                raise InvalidWeights(f"{name} weight row has zero absolute sum")

    def with_safe_mat_weight(self, weight: float) -> "WeightMatrix":
        """Return a copy with the safe-to-mature weight replaced.

        This is the cell patched by the portscan experiment series
        (default -3, overridden to -1 or -2).
        """
        p, d, _ = self.mat
        return WeightMatrix(csm=self.csm, semi=self.semi, mat=(p, d, weight))


def fuse_signals(s: SignalVector, w: WeightMatrix) -> tuple[float, float, float]:
    """Fuse one signal vector into per-accumulator increments.

    For each output row: (Wp*P + Ws*S + Wd*D) / (|Wp| + |Ws| + |Wd|),
    scaled by (1 + inflammation) / 2. The denominator uses absolute
    values so the mixed-sign mat row stays well defined.
    """
    ic_factor = (1.0 + s.inflammation) / 2.0
    out = []
    for wp, wd, ws in (w.csm, w.semi, w.mat):
        num = wp * s.pamp + ws * s.safe + wd * s.danger
        den = abs(wp) + abs(ws) + abs(wd)
        out.append(num / den * ic_factor)
    return out[0], out[1], out[2]


@dataclass
class CytokineState:
    """Cumulative cytokine levels of one cell."""

    csm: float = 0.0
    semi: float = 0.0
    mat: float = 0.0


@dataclass
class DendriticCell:
    """One dendritic cell of the sampling pool.

    The cell is mutable: `update` accumulates fused signals and flips the
    state to migrated once csm reaches the migration threshold; `ingest`
    appends antigen labels (a bounded multiset); `present` reads out the
    context and antigen of a migrated cell.
    """

    id: int
    migration_threshold: float
    antigen_capacity: int = 50
    state: CellState = CellState.IMMATURE
    cytokines: CytokineState = field(default_factory=CytokineState)
    antigen_store: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.migration_threshold <= 0:
            raise ValueError("migration threshold must be positive")
        if self.antigen_capacity <= 0:
            raise ValueError("antigen capacity must be positive")

    @property
    def is_migrated(self) -> bool:
        return self.state is CellState.MIGRATED

    @property
    def store_full(self) -> bool:
        return len(self.antigen_store) >= self.antigen_capacity

    def update(self, s: SignalVector, w: WeightMatrix) -> None:
        """Accumulate fused signals; migrate on threshold crossing.

        The per-update csm increment is floored at zero as defensive
        hygiene (never triggered by the default weights).
        """
        self.apply_deltas(fuse_signals(s, w))

    def apply_deltas(self, deltas: tuple[float, float, float]) -> None:
        """Accumulate pre-fused increments (shared per tick by the pool)."""
        if self.is_migrated:
            raise CellStateError("cannot update a migrated cell")
        d_csm, d_semi, d_mat = deltas
        self.cytokines.csm += max(0.0, d_csm)
        self.cytokines.semi += d_semi
        self.cytokines.mat += d_mat
        if self.cytokines.csm >= self.migration_threshold:
            self.state = CellState.MIGRATED

    def ingest(self, label: str) -> None:
        """Add one antigen label to the internal store (duplicates allowed)."""
        if not label:
            raise ValueError("antigen label must be non-empty")
        if self.is_migrated:
            raise CellStateError("migrated cells do not ingest antigen")
        if self.store_full:
            raise AntigenStoreFull(f"cell {self.id} store at capacity")
        self.antigen_store.append(label)

    def present(self) -> tuple[Context, list[str]]:
        """Read out the context and antigen store of a migrated cell.

        Context is mature iff the mature accumulator strictly exceeds
        the semi-mature one; ties resolve to semi-mature.
        """
        if not self.is_migrated:
            raise CellStateError("only migrated cells present antigen")
        if self.cytokines.mat > self.cytokines.semi:
            return Context.MATURE, list(self.antigen_store)
        return Context.SEMI_MATURE, list(self.antigen_store)
