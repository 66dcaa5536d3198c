"""Oblivious outcome-sequence generators.

``generate`` materializes a whole sequence from a spec before any play, so
the sequence cannot depend on the learner. Sequences are stored by support:
``indices`` and ``values`` have shape ``(T, s)``; rows whose support is
smaller than ``s`` are padded with further distinct indices carrying value
zero, so a row can always be scattered into a dense vector in one step.
"""

from __future__ import annotations

import enum
import json
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from .core import Direction, RngStream, SparseOutcome


class AdversaryKind(str, enum.Enum):
    RANDOM_SPARSE = "random-sparse"
    FIRST_S_GAINS = "first-s-gains"
    FULL_INFO_LOSS_LB = "full-info-loss-lb"
    BANDIT_LOSS_LB = "bandit-loss-lb"


_FIXED_DIRECTION = {
    AdversaryKind.FIRST_S_GAINS: Direction.GAIN,
    AdversaryKind.FULL_INFO_LOSS_LB: Direction.LOSS,
    AdversaryKind.BANDIT_LOSS_LB: Direction.LOSS,
}


def default_epsilon(s, T) -> float:
    """Bias of the best arm in the bandit lower-bound construction."""
    return math.sqrt(s / T) / 8.0


@dataclass(frozen=True)
class AdversarySpec:
    """What to generate.

    ``ramp`` (random-sparse only) splits the horizon into equal consecutive
    blocks with the given support sizes, e.g. ``(1, 2, 5, 8)``, each at most
    ``s``; a level of 0 yields all-zero vectors. ``epsilon`` (bandit-loss-lb only) defaults to
    :func:`default_epsilon`.
    """

    kind: AdversaryKind
    d: int
    s: int
    T: int
    direction: Optional[Direction] = None
    epsilon: Optional[float] = None
    rng: RngStream = field(default_factory=RngStream)
    ramp: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        kind = AdversaryKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if not (1 <= self.s <= self.d):
            raise ValueError(f"need 1 <= s <= d, got s={self.s}, d={self.d}")
        if self.T < 0:
            raise ValueError("T must be nonnegative")
        fixed = _FIXED_DIRECTION.get(kind)
        direction = Direction(self.direction) if self.direction is not None else (fixed or Direction.LOSS)
        if fixed is not None and direction is not fixed:
            raise ValueError(f"{kind.value} produces {fixed.value} vectors, not {direction.value}")
        object.__setattr__(self, "direction", direction)
        if self.ramp is not None:
            if kind is not AdversaryKind.RANDOM_SPARSE:
                raise ValueError("ramp applies to random-sparse sequences only")
            ramp = tuple(int(k) for k in self.ramp)
            if not ramp or min(ramp) < 0 or max(ramp) > self.s:
                raise ValueError("ramp levels must lie in [0, s]")
            object.__setattr__(self, "ramp", ramp)
        if kind is AdversaryKind.BANDIT_LOSS_LB:
            eps = default_epsilon(self.s, max(self.T, 1)) if self.epsilon is None else float(self.epsilon)
            if not (0.0 <= eps <= self.s / (4.0 * self.d)):
                raise ValueError(f"epsilon must lie in [0, s/(4d)] = [0, {self.s / (4.0 * self.d):.6g}], got {eps!r}")
            object.__setattr__(self, "epsilon", eps)
        elif self.epsilon is not None:
            raise ValueError("epsilon applies to bandit-loss-lb only")


class OutcomeSequence(Sequence):
    """T sparse outcome vectors plus generator-side metadata.

    ``hidden`` holds what the adversary knows but the learner must not see
    (the favoured arm ``Z``, the drawn supports). Indexing yields
    :class:`SparseOutcome` values.
    """

    def __init__(self, dim, direction, indices, values, hidden=None):
        self.dim = int(dim)
        self.direction = Direction(direction)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.values = np.asarray(values, dtype=np.float64)
        if self.indices.shape != self.values.shape or self.indices.ndim != 2:
            raise ValueError("indices and values must both have shape (T, k)")
        self.hidden = dict(hidden or {})

    def __len__(self):
        return self.indices.shape[0]

    def __getitem__(self, t):
        if isinstance(t, slice):
            return [self[i] for i in range(*t.indices(len(self)))]
        return SparseOutcome(self.dim, zip(self.indices[t].tolist(), self.values[t].tolist()), self.direction)

    def dense(self) -> np.ndarray:
        out = np.zeros((len(self), self.dim))
        np.put_along_axis(out, self.indices, self.values, axis=1)
        return out

    def __eq__(self, other):
        if not isinstance(other, OutcomeSequence):
            return NotImplemented
        return (
            self.dim == other.dim
            and self.direction is other.direction
            and np.array_equal(self.dense(), other.dense())
        )


def _random_supports(rng: np.random.Generator, T: int, d: int, s: int) -> np.ndarray:
    """Uniform s-subsets of range(d), one per row, by partial Fisher-Yates.

    Only the swapped positions are tracked, so memory is O(T * s).
    """
    rows = np.arange(T)
    out = np.empty((T, s), dtype=np.int64)
    keys = np.full((T, s), -1, dtype=np.int64)  # positions moved so far
    vals = np.zeros((T, s), dtype=np.int64)  # what they hold now
    for j in range(s):
        k = j + rng.integers(0, d - j, size=T)
        hit_k = keys == k[:, None]
        has_k = hit_k.any(axis=1)
        slot_k = hit_k.argmax(axis=1)
        at_k = np.where(has_k, vals[rows, slot_k], k)
        hit_j = keys == j
        at_j = np.where(hit_j.any(axis=1), vals[rows, hit_j.argmax(axis=1)], j)
        out[:, j] = at_k
        slot = np.where(has_k, slot_k, j)
        keys[rows, slot] = k
        vals[rows, slot] = at_j
    return out


def _ramp_levels(ramp, T: int) -> np.ndarray:
    blocks = (np.arange(T) * len(ramp)) // max(T, 1)
    return np.asarray(ramp, dtype=np.int64)[blocks]


def generate(spec: AdversarySpec) -> OutcomeSequence:
    rng = spec.rng.generator()
    d, s, T = spec.d, spec.s, spec.T
    hidden = {}
    if spec.kind is AdversaryKind.FIRST_S_GAINS:
        indices = np.tile(np.arange(s, dtype=np.int64), (T, 1))
        values = (rng.random((T, s)) < 0.5).astype(np.float64)
    elif spec.kind is AdversaryKind.RANDOM_SPARSE:
        indices = _random_supports(rng, T, d, s)
        values = rng.random((T, s))
        if spec.ramp is not None:
            levels = _ramp_levels(spec.ramp, T)
            values[np.arange(s)[None, :] >= levels[:, None]] = 0.0
    elif spec.kind is AdversaryKind.FULL_INFO_LOSS_LB:
        indices = _random_supports(rng, T, d, s)
        values = (rng.random((T, s)) < 0.5).astype(np.float64)
        hidden["supports"] = indices
    else:
        z = int(rng.integers(0, d))
        indices = _random_supports(rng, T, d, s)
        prob = np.where(indices == z, 0.5 - spec.epsilon * d / s, 0.5)
        values = (rng.random((T, s)) < prob).astype(np.float64)
        hidden["Z"] = z
        hidden["supports"] = indices
    return OutcomeSequence(d, spec.direction, indices, values, hidden)


# ---------------------------------------------------------------------------
# JSON-lines replay files


def write_jsonl(sequence: OutcomeSequence, path) -> None:
    """One line per stage: ``{"stage", "dim", "direction", "entries"}``.

    Stages are numbered from 1; ``entries`` lists ``[index, value]`` pairs of
    the nonzero components in increasing index order.
    """
    path = Path(path)
    try:
        with path.open("w") as fh:
            for t, outcome in enumerate(sequence, start=1):
                rec = {
                    "stage": t,
                    "dim": sequence.dim,
                    "direction": sequence.direction.value,
                    "entries": [[i, v] for i, v in outcome.entries],
                }
                fh.write(json.dumps(rec) + "\n")
    except OSError as exc:
        raise OSError(f"could not write {path}: {exc}") from exc


def read_jsonl(path) -> OutcomeSequence:
    path = Path(path)
    records = [json.loads(line) for line in path.read_text().splitlines() if line.strip()]
    if not records:
        raise ValueError(f"{path}: no stages")
    dim = records[0]["dim"]
    direction = records[0]["direction"]
    for expected, rec in enumerate(records, start=1):
        if rec["stage"] != expected or rec["dim"] != dim or rec["direction"] != direction:
            raise ValueError(f"{path}: inconsistent record at stage {expected}")
    width = max(1, max(len(rec["entries"]) for rec in records))
    width = min(width, dim)
    indices = np.zeros((len(records), width), dtype=np.int64)
    values = np.zeros((len(records), width))
    for t, rec in enumerate(records):
        outcome = SparseOutcome(dim, rec["entries"], direction)
        k = outcome.indices.size
        pad = np.setdiff1d(np.arange(dim), outcome.indices)[: width - k]
        indices[t] = np.concatenate([outcome.indices, pad])
        values[t, :k] = outcome.values
    return OutcomeSequence(dim, direction, indices, values)
