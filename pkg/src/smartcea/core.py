"""Core data structures for two-stage SMART trajectories and embedded regimes.

A two-stage SMART record is the tuple O = (X(1), A(1), L(2), S(2), A(2), Y, C):
baseline covariates, a randomized stage-1 treatment, a binary intermediate
response status (the re-randomization trigger), a continuous intermediate
covariate, a stage-2 treatment randomized within the branch selected by L(2),
a binary effectiveness outcome, and a nonnegative cost outcome.

An embedded regime prescribes one stage-1 treatment and one stage-2 treatment
per branch: d = (d1, d2_if_lapse, d2_if_no_lapse).  A record is consistent
with a regime when its observed treatments match the regime's recommendations
along the branch the record actually followed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np

__all__ = [
    "TrajectoryRecord",
    "Dataset",
    "RegimeSpec",
    "EstimateWithIC",
    "is_consistent",
    "consistency_mask",
    "regime_grid",
]


@dataclass(frozen=True)
class TrajectoryRecord:
    """One subject's trajectory through a two-stage SMART."""

    id: int
    x1: tuple[float, ...]
    a1: int
    l2: int
    s2: float
    a2: int
    y: int
    c: float


@dataclass(frozen=True)
class RegimeSpec:
    """An embedded regime: stage-1 treatment plus a stage-2 treatment per branch.

    Parameters
    ----------
    id : int
        Positive identifier, unique within a regime collection.
    d1 : int
        Stage-1 treatment code.
    d2_if_lapse : int
        Stage-2 treatment prescribed when L(2) = 1.
    d2_if_no_lapse : int
        Stage-2 treatment prescribed when L(2) = 0.
    """

    id: int
    d1: int
    d2_if_lapse: int
    d2_if_no_lapse: int

    def d2(self, l2: int) -> int:
        """Stage-2 recommendation on the branch selected by ``l2``."""
        return self.d2_if_lapse if l2 == 1 else self.d2_if_no_lapse


class Dataset:
    """Columnar container for SMART trajectories.

    Columns are validated on construction and frozen (read-only views).
    ``x1`` always has shape (n, p); the common scalar-baseline case is p = 1.

    Parameters
    ----------
    x1 : array_like
        Baseline covariates, shape (n,) or (n, p).
    a1, l2, s2, a2, y, c : array_like
        Remaining trajectory columns, each of length n.
    ids : array_like of int, optional
        Record identifiers; defaults to 0..n-1.
    stage1_support : set of int, optional
        Valid stage-1 codes.  Inferred from the data when omitted.
    stage2_support : mapping {1: set, 0: set}, optional
        Valid stage-2 codes per branch.  Inferred when omitted.
    x1_names : sequence of str, optional
        Column names for x1; defaults to ("x1",) or ("x1_1", ..., "x1_p").
    """

    def __init__(
        self,
        x1,
        a1,
        l2,
        s2,
        a2,
        y,
        c,
        ids=None,
        stage1_support: frozenset[int] | None = None,
        stage2_support: Mapping[int, frozenset[int]] | None = None,
        x1_names: Sequence[str] | None = None,
    ) -> None:
        x1 = np.asarray(x1, dtype=np.float64)
        if x1.ndim == 1:
            x1 = x1[:, None]
        if x1.ndim != 2 or x1.shape[1] < 1:
            raise ValueError("x1 must have shape (n,) or (n, p) with p >= 1")
        n = x1.shape[0]
        if n < 1:
            raise ValueError("dataset must contain at least one record")

        self.x1 = x1
        self.a1 = np.asarray(a1, dtype=np.int64)
        self.l2 = np.asarray(l2, dtype=np.int64)
        self.s2 = np.asarray(s2, dtype=np.float64)
        self.a2 = np.asarray(a2, dtype=np.int64)
        self.y = np.asarray(y, dtype=np.int64)
        self.c = np.asarray(c, dtype=np.float64)
        self.ids = (
            np.arange(n, dtype=np.int64)
            if ids is None
            else np.asarray(ids, dtype=np.int64)
        )

        for name in ("a1", "l2", "s2", "a2", "y", "c", "ids"):
            col = getattr(self, name)
            if col.shape != (n,):
                raise ValueError(f"column {name} has length {col.shape}, expected ({n},)")

        if not np.isfinite(self.x1).all():
            raise ValueError("x1 contains non-finite values")
        if not np.isfinite(self.s2).all():
            raise ValueError("s2 contains non-finite values")
        if not np.isin(self.l2, (0, 1)).all():
            raise ValueError("l2 must be binary (0/1)")
        if not np.isin(self.y, (0, 1)).all():
            raise ValueError("y must be binary (0/1)")
        if not (np.isfinite(self.c) & (self.c >= 0)).all():
            raise ValueError("c must be finite and nonnegative")

        if stage1_support is None:
            stage1_support = frozenset(int(v) for v in np.unique(self.a1))
        self.stage1_support = frozenset(stage1_support)
        if not np.isin(self.a1, sorted(self.stage1_support)).all():
            raise ValueError("a1 value outside stage1_support")

        if stage2_support is None:
            stage2_support = {
                branch: frozenset(int(v) for v in np.unique(self.a2[self.l2 == branch]))
                for branch in (0, 1)
            }
        self.stage2_support = {
            0: frozenset(stage2_support[0]),
            1: frozenset(stage2_support[1]),
        }
        for branch in (0, 1):
            on_branch = self.a2[self.l2 == branch]
            if on_branch.size and not np.isin(
                on_branch, sorted(self.stage2_support[branch])
            ).all():
                raise ValueError(f"a2 value outside stage2_support[{branch}]")

        if x1_names is None:
            p = x1.shape[1]
            x1_names = ("x1",) if p == 1 else tuple(f"x1_{j}" for j in range(1, p + 1))
        self.x1_names = tuple(x1_names)
        if len(self.x1_names) != x1.shape[1]:
            raise ValueError("x1_names length does not match x1 width")

        for name in ("x1", "a1", "l2", "s2", "a2", "y", "c", "ids"):
            getattr(self, name).setflags(write=False)

    def __len__(self) -> int:
        return self.x1.shape[0]

    @property
    def n(self) -> int:
        return self.x1.shape[0]

    def record(self, i: int) -> TrajectoryRecord:
        """Materialize row ``i`` as a :class:`TrajectoryRecord`."""
        return TrajectoryRecord(
            id=int(self.ids[i]),
            x1=tuple(float(v) for v in self.x1[i]),
            a1=int(self.a1[i]),
            l2=int(self.l2[i]),
            s2=float(self.s2[i]),
            a2=int(self.a2[i]),
            y=int(self.y[i]),
            c=float(self.c[i]),
        )

    def iter_records(self) -> Iterator[TrajectoryRecord]:
        for i in range(self.n):
            yield self.record(i)

    def take(self, indices) -> "Dataset":
        """Row subset (with replacement allowed), e.g. for bootstrap resampling."""
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            x1=self.x1[idx],
            a1=self.a1[idx],
            l2=self.l2[idx],
            s2=self.s2[idx],
            a2=self.a2[idx],
            y=self.y[idx],
            c=self.c[idx],
            ids=self.ids[idx],
            stage1_support=self.stage1_support,
            stage2_support=self.stage2_support,
            x1_names=self.x1_names,
        )

    def outcome(self, name: str) -> np.ndarray:
        """Outcome column by tag: 'y' (effectiveness) or 'c' (cost)."""
        if name == "y":
            return self.y.astype(np.float64)
        if name == "c":
            return self.c
        raise ValueError(f"unknown outcome {name!r}, expected 'y' or 'c'")


def is_consistent(record: TrajectoryRecord, regime: RegimeSpec) -> bool:
    """Whether the record's observed treatments follow the regime.

    Only the branch actually taken constrains consistency; the recommendation
    for the unobserved branch is vacuous.
    """
    return record.a1 == regime.d1 and record.a2 == regime.d2(record.l2)


def consistency_mask(dataset: Dataset, regime: RegimeSpec) -> np.ndarray:
    """Vectorized :func:`is_consistent` over all records; bool array of length n."""
    d2 = np.where(dataset.l2 == 1, regime.d2_if_lapse, regime.d2_if_no_lapse)
    return (dataset.a1 == regime.d1) & (dataset.a2 == d2)


def regime_grid(
    stage1_support,
    stage2_support: Mapping[int, frozenset[int]],
) -> tuple[RegimeSpec, ...]:
    """All embedded regimes over the given supports.

    Enumeration is lexicographic in (d1, d2_if_lapse, d2_if_no_lapse), d1
    ascending first; ids are assigned 1..K in that order.  This order is a
    convention of this library, not of any trial's published numbering; see
    the dgp module for the benchmark design's calibrated numbering.  Designs
    where some combinations are redundant (one stage-2 option equivalent to
    another under a particular stage-1 arm) should filter the returned grid.
    """
    regimes = []
    k = 1
    for d1 in sorted(stage1_support):
        for dl in sorted(stage2_support[1]):
            for dn in sorted(stage2_support[0]):
                regimes.append(
                    RegimeSpec(id=k, d1=d1, d2_if_lapse=dl, d2_if_no_lapse=dn)
                )
                k += 1
    return tuple(regimes)


@dataclass
class EstimateWithIC:
    """A point estimate with its estimated influence curve.

    The influence curve has one entry per analysis record; its empirical
    variance over n yields the standard error.
    """

    psi: float
    ic: np.ndarray
    n: int = field(default=0)

    def __post_init__(self) -> None:
        self.ic = np.asarray(self.ic, dtype=np.float64)
        if self.n == 0:
            self.n = self.ic.shape[0]
        if self.ic.shape != (self.n,):
            raise ValueError("influence curve length does not match n")

    @property
    def se(self) -> float:
        if self.n < 2:
            return float("nan")
        return float(np.sqrt(np.var(self.ic, ddof=1) / self.n))
