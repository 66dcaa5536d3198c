"""Greedy mirror descent with a Tsallis-type potential for bandit losses.

The learner sees only the loss of the arm it sampled. That scalar is turned
into a 1-sparse importance-weighted estimate, the iterate takes a greedy
step in the mirror space of ``F_q``, and the result is projected back onto
the simplex with the Bregman divergence of ``F_q``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Tuple

import numpy as np

from .bounds import BoundPreconditionError
from .core import SimplexDistribution, as_weights
from .regularizers import POSITIVITY_FLOOR, TsallisPotential, project_from_gradient, tsallis_gradient

ETA_RULES = ("balanced", "proof")


def bandit_eta(q: float, d, s, T, rule: str = "balanced") -> float:
    """Step size for exponent ``q``.

    ``balanced`` equalizes the two terms of the generic guarantee
    ``q * (d^(1/q) / (eta (q-1)) + eta T s^(1-1/q) / 2)``; ``proof`` is the
    reciprocal arrangement of d and s, kept for comparison.
    """
    if q <= 1:
        raise ValueError("q must exceed 1")
    if T < 1:
        raise ValueError("T must be at least 1")
    d_term = d ** (1.0 / q)
    s_term = s ** (1.0 - 1.0 / q)
    if rule == "balanced":
        return math.sqrt(2.0 * d_term / ((q - 1.0) * T * s_term))
    if rule == "proof":
        return math.sqrt(2.0 * s_term / ((q - 1.0) * T * d_term))
    raise ValueError(f"unknown eta rule {rule!r}; expected one of {ETA_RULES}")


def tune_bandit(s, d, T, rule: str = "balanced") -> Tuple[float, float]:
    """``q = log(d/s)`` and its step size; requires ``d/s >= e^2``."""
    if s <= 0 or d <= 0:
        raise ValueError("d and s must be positive")
    q = math.log(d / s)
    # d/s = e^2 is accepted even when the ratio is rounded a hair below
    if q < 2.0 - 1e-12:
        raise BoundPreconditionError(
            f"precondition violated: d/s >= e^2 is required for the tuned bandit algorithm (d/s = {d / s:.6g})"
        )
    q = max(q, 2.0)
    return q, bandit_eta(q, d, s, T, rule)


@dataclass(frozen=True)
class BanditState:
    d: int
    q: float
    eta: float
    x: np.ndarray

    @classmethod
    def initial(cls, d: int, q: float, eta: float, batch=()) -> "BanditState":
        if q <= 1 or eta <= 0:
            raise ValueError("need q > 1 and eta > 0")
        return cls(d, float(q), float(eta), np.full(tuple(batch) + (d,), 1.0 / d))

    @property
    def potential(self) -> TsallisPotential:
        return TsallisPotential(self.q)


@dataclass(frozen=True)
class LossEstimate:
    """1-sparse loss estimate: ``value`` at ``arm``, zero elsewhere."""

    dim: int
    arm: int
    value: float

    def __post_init__(self):
        if not 0 <= self.arm < self.dim:
            raise ValueError("arm out of range")
        if not self.value >= 0:
            raise ValueError("estimate must be nonnegative")

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.arm] = self.value
        return out


def sample_arm(x, rng: np.random.Generator) -> int:
    """Draw an arm with probability ``x[arm]`` (one uniform draw per call)."""
    return int(_arms_from_uniforms(as_weights(x), np.asarray(rng.random())))


def _arms_from_uniforms(x: np.ndarray, u: np.ndarray) -> np.ndarray:
    # inverse-CDF sampling, rows of x against entries of u
    cdf = np.cumsum(x, axis=-1)
    arms = np.sum(cdf <= (u * cdf[..., -1])[..., None], axis=-1)
    # rounding can push past the last positive arm; step back onto it
    last = x.shape[-1] - 1 - np.argmax(x[..., ::-1] > 0, axis=-1)
    return np.minimum(arms, last)


def estimate_loss(observed: float, arm: int, x) -> LossEstimate:
    w = as_weights(x)
    if not w[arm] > 0:
        raise ValueError("cannot estimate from an arm with zero probability")
    return LossEstimate(w.size, int(arm), float(observed) / float(w[arm]))


def bandit_advance(state: BanditState, arms, values) -> BanditState:
    """Greedy mirror step on the estimates ``values`` at ``arms`` (batch form)."""
    pot = state.potential
    x = np.maximum(state.x, POSITIVITY_FLOOR)
    grad = tsallis_gradient(x, pot)
    flat = grad.reshape(-1, state.d)
    flat[np.arange(flat.shape[0]), np.asarray(arms).reshape(-1)] -= state.eta * np.asarray(values, dtype=np.float64).reshape(-1)
    return replace(state, x=project_from_gradient(grad, pot))


def bandit_step(state: BanditState, estimate: LossEstimate) -> BanditState:
    if estimate.dim != state.d or state.x.ndim != 1:
        raise ValueError("estimate dimension does not match the state")
    return bandit_advance(state, estimate.arm, estimate.value)


def current_distribution(state: BanditState) -> SimplexDistribution:
    return SimplexDistribution(state.x)
