"""Shared value types: sparse outcome vectors, simplex points, regret ledgers, seeded streams."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Tuple, Union

import numpy as np

SIMPLEX_ATOL = 1e-9


class Direction(str, enum.Enum):
    GAIN = "gain"
    LOSS = "loss"


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SparseOutcome:
    """One stage's outcome vector in [0, 1]^dim, stored by its support.

    ``entries`` is any iterable of ``(index, value)`` pairs. Zero values are
    dropped on construction, so ``len(outcome.indices)`` is the sparsity.
    """

    dim: int
    entries: Iterable[Tuple[int, float]] = ()
    direction: Direction = Direction.LOSS
    indices: np.ndarray = field(init=False, repr=False)
    values: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim!r}")
        pairs = list(self.entries)
        idx = np.array([int(i) for i, _ in pairs], dtype=np.int64)
        val = np.array([float(v) for _, v in pairs], dtype=np.float64)
        if idx.size:
            if idx.min() < 0 or idx.max() >= self.dim:
                raise ValueError(f"entry index out of range for dim={self.dim}")
            if np.unique(idx).size != idx.size:
                raise ValueError("entry indices must be distinct")
            if not np.all(np.isfinite(val)) or val.min() < 0.0 or val.max() > 1.0:
                raise ValueError("entry values must lie in [0, 1]")
        keep = val > 0.0
        order = np.argsort(idx[keep], kind="stable")
        idx, val = idx[keep][order], val[keep][order]
        object.__setattr__(self, "direction", Direction(self.direction))
        object.__setattr__(self, "entries", tuple(zip(idx.tolist(), val.tolist())))
        object.__setattr__(self, "indices", _frozen(idx))
        object.__setattr__(self, "values", _frozen(val))

    @classmethod
    def from_dense(cls, vec, direction=Direction.LOSS) -> "SparseOutcome":
        vec = np.asarray(vec, dtype=np.float64)
        if vec.ndim != 1:
            raise ValueError("expected a 1-d vector")
        nz = np.flatnonzero(vec)
        return cls(vec.size, zip(nz.tolist(), vec[nz].tolist()), direction)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out

    def __eq__(self, other):
        if not isinstance(other, SparseOutcome):
            return NotImplemented
        return (self.dim, self.direction, self.entries) == (other.dim, other.direction, other.entries)

    def __hash__(self):
        return hash((self.dim, self.direction, self.entries))


@dataclass(frozen=True, eq=False)
class SimplexDistribution:
    """A mixed action: nonnegative weights summing to one."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a non-empty 1-d vector")
        if not np.all(np.isfinite(w)) or w.min() < 0.0:
            raise ValueError("weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > SIMPLEX_ATOL:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        object.__setattr__(self, "weights", _frozen(w))

    @classmethod
    def uniform(cls, d: int) -> "SimplexDistribution":
        return cls(np.full(d, 1.0 / d))

    @property
    def dim(self) -> int:
        return self.weights.size

    def __len__(self):
        return self.weights.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.weights, dtype=dtype)


Outcomes = Union[SparseOutcome, np.ndarray]
Actions = Union[SimplexDistribution, np.ndarray]


def as_dense(outcome) -> np.ndarray:
    """Dense float array for a SparseOutcome or array-like (batch axes allowed)."""
    if isinstance(outcome, SparseOutcome):
        return outcome.to_dense()
    return np.asarray(outcome, dtype=np.float64)


def as_weights(action) -> np.ndarray:
    if isinstance(action, SimplexDistribution):
        return action.weights
    return np.asarray(action, dtype=np.float64)


def sparsity(outcome: Outcomes) -> int:
    """Number of strictly positive components."""
    if isinstance(outcome, SparseOutcome):
        return int(np.count_nonzero(outcome.values > 0))
    return int(np.count_nonzero(np.asarray(outcome) > 0))


@dataclass(frozen=True)
class RegretLedger:
    """Running totals needed for regret.

    Array fields may carry leading batch axes (one row per replication);
    ``per_arm_cumulative`` then has shape ``batch + (dim,)``.
    """

    dim: int
    direction: Direction
    per_arm_cumulative: np.ndarray
    cumulative_expected: np.ndarray
    cumulative_realized: np.ndarray
    stage_count: int = 0

    @classmethod
    def empty(cls, dim: int, direction=Direction.LOSS, batch: Tuple[int, ...] = ()) -> "RegretLedger":
        return cls(
            dim=dim,
            direction=Direction(direction),
            per_arm_cumulative=np.zeros(tuple(batch) + (dim,)),
            cumulative_expected=np.zeros(batch),
            cumulative_realized=np.zeros(batch),
        )


def update_ledger(
    ledger: RegretLedger,
    outcome: Outcomes,
    action: Actions,
    realized_arm: Optional[Union[int, np.ndarray]] = None,
) -> RegretLedger:
    omega = as_dense(outcome)
    x = as_weights(action)
    if omega.shape[-1] != ledger.dim or x.shape[-1] != ledger.dim:
        raise ValueError(
            f"dimension mismatch: ledger {ledger.dim}, outcome {omega.shape[-1]}, action {x.shape[-1]}"
        )
    realized = ledger.cumulative_realized
    if realized_arm is not None:
        arm = np.asarray(realized_arm)
        realized = realized + np.take_along_axis(omega, arm[..., None], axis=-1)[..., 0]
    return replace(
        ledger,
        per_arm_cumulative=ledger.per_arm_cumulative + omega,
        cumulative_expected=ledger.cumulative_expected + np.sum(omega * x, axis=-1),
        cumulative_realized=realized,
        stage_count=ledger.stage_count + 1,
    )


def _regret_against(ledger: RegretLedger, total):
    per_arm = ledger.per_arm_cumulative
    if ledger.direction is Direction.GAIN:
        r = per_arm.max(axis=-1) - total
    else:
        r = total - per_arm.min(axis=-1)
    return float(r) if np.ndim(r) == 0 else r


def regret(ledger: RegretLedger):
    """Pseudo-regret, computed from the expected per-stage outcome."""
    return _regret_against(ledger, ledger.cumulative_expected)


def realized_regret(ledger: RegretLedger):
    """Regret of the sampled arms (bandit runs)."""
    return _regret_against(ledger, ledger.cumulative_realized)


@dataclass(frozen=True)
class RngStream:
    """Names an independent random stream by ``(seed, stream_id)``.

    Each call to :meth:`generator` starts the stream from its beginning, so a
    stream is reproducible bit for bit. ``substream`` splits one stream into
    further independent children (e.g. adversary draws vs. arm sampling).
    """

    seed: int = 0
    stream_id: int = 0

    def generator(self, substream: int = 0) -> np.random.Generator:
        ss = np.random.SeedSequence(
            entropy=int(self.seed) & (2**64 - 1),
            spawn_key=(int(self.stream_id) & (2**64 - 1), int(substream)),
        )
        return np.random.Generator(np.random.PCG64(ss))
