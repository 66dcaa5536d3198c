"""Full-information learners for sparse gains and losses.

Each learner is a frozen state plus a pure transition. ``*_advance`` works on
raw arrays and accepts a leading batch axis (one row per independent run);
``*_step`` is the single-run convenience form returning a
:class:`SimplexDistribution`. Both emit the distribution for the current
stage *before* absorbing its outcome.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Tuple

import numpy as np

from .bounds import Setting, theoretical_bound  # noqa: F401  re-exported for callers of this module
from .core import SimplexDistribution, as_dense
from .regularizers import dual_exponent, logit_map, lp_mirror_map

ADAPTIVE_LOSSES_C = 2.0**0.75 * math.sqrt(math.sqrt(2.0) + 1.0)
ADAPTIVE_GAINS_C = math.sqrt(math.e * math.sqrt(2.0) * (math.sqrt(2.0) + 1.0))


def tune_gains(s: int, T: int) -> Tuple[float, float]:
    """Exponent and step size for l^p mirror descent on s-sparse gains.

    For s >= 3 the exponent makes ``s^(2/q) = e``; for s in {1, 2} the
    Euclidean case p = 2 is used.
    """
    if s < 1:
        raise ValueError("sparsity s must be at least 1")
    if T < 1:
        raise ValueError("horizon T must be at least 1")
    if s >= 3:
        p = 1.0 + 1.0 / (2.0 * math.log(s) - 1.0)
        s_term = math.e
    else:
        p = 2.0
        s_term = float(s)
    return p, math.sqrt((p - 1.0) / (T * s_term))


def tune_losses(s: int, d: int, T: int) -> float:
    """Step size for exponential weights on s-sparse losses (used with a minus sign)."""
    if d < 2:
        raise ValueError("need d >= 2 arms (log d must be positive)")
    if s < 1 or T < 1:
        raise ValueError("s and T must be positive")
    return math.log1p(math.sqrt(2.0 * d * math.log(d) / (s * T)))


def _ceil_log2(n) -> np.ndarray:
    n = np.asarray(n, dtype=np.int64)
    return np.array([int(k - 1).bit_length() for k in n.reshape(-1)], dtype=np.int64).reshape(n.shape)


def _support_sizes(omega: np.ndarray) -> np.ndarray:
    return np.count_nonzero(omega > 0, axis=-1)


# ---------------------------------------------------------------------------
# l^p mirror descent, tuned to a known sparsity


@dataclass(frozen=True)
class OmdGainsConfig:
    d: int
    s: int
    T: int
    p: float
    eta: float

    @classmethod
    def tuned(cls, d: int, s: int, T: int) -> "OmdGainsConfig":
        p, eta = tune_gains(s, T)
        return cls(d, s, T, p, eta)

    @property
    def q(self) -> float:
        return dual_exponent(self.p)


@dataclass(frozen=True)
class OmdGainsState:
    config: OmdGainsConfig
    cumulative: np.ndarray

    @classmethod
    def initial(cls, config: OmdGainsConfig, batch=()) -> "OmdGainsState":
        return cls(config, np.zeros(tuple(batch) + (config.d,)))


def omd_gains_advance(state: OmdGainsState, gains) -> Tuple[np.ndarray, OmdGainsState]:
    g = as_dense(gains)
    if g.shape != state.cumulative.shape:
        raise ValueError(f"outcome shape {g.shape} does not match state {state.cumulative.shape}")
    x = lp_mirror_map(state.config.eta * state.cumulative, state.config.p)
    return x, replace(state, cumulative=state.cumulative + g)


def omd_gains_step(state: OmdGainsState, gains):
    x, state = omd_gains_advance(state, gains)
    return SimplexDistribution(x), state


# ---------------------------------------------------------------------------
# exponential weights


@dataclass(frozen=True)
class EwaState:
    """Exponential weights; ``signed_eta`` > 0 for gains, < 0 for losses."""

    d: int
    signed_eta: float
    cumulative: np.ndarray

    @classmethod
    def initial(cls, d: int, signed_eta: float, batch=()) -> "EwaState":
        return cls(d, float(signed_eta), np.zeros(tuple(batch) + (d,)))

    @classmethod
    def tuned_for_losses(cls, d: int, s: int, T: int, batch=()) -> "EwaState":
        return cls.initial(d, -tune_losses(s, d, T), batch)


def ewa_advance(state: EwaState, outcome) -> Tuple[np.ndarray, EwaState]:
    w = as_dense(outcome)
    if w.shape != state.cumulative.shape:
        raise ValueError(f"outcome shape {w.shape} does not match state {state.cumulative.shape}")
    x = logit_map(state.cumulative, state.signed_eta)
    return x, replace(state, cumulative=state.cumulative + w)


def ewa_step(state: EwaState, outcome):
    x, state = ewa_advance(state, outcome)
    return SimplexDistribution(x), state


# ---------------------------------------------------------------------------
# sparsity-adaptive exponential weights (losses)


def adaptive_losses_eta(m, d: int, T: int, C: float = ADAPTIVE_LOSSES_C):
    m = np.asarray(m, dtype=np.float64)
    return np.log1p(C * np.sqrt(d * math.log(d) / (2.0**m * T)))


@dataclass(frozen=True)
class AdaptiveLossState:
    """Regime-restarted exponential weights for losses of unknown sparsity.

    The weights are kept in log form: ``weights = exp(-eta * cumulative) / d``
    where ``cumulative`` sums the losses absorbed since the last restart.
    ``m``, ``eta`` carry the batch shape.
    """

    d: int
    T: int
    C: float
    m: np.ndarray
    eta: np.ndarray
    cumulative: np.ndarray

    @classmethod
    def initial(cls, d: int, T: int, C: float = ADAPTIVE_LOSSES_C, batch=()) -> "AdaptiveLossState":
        if d < 2:
            raise ValueError("need d >= 2 arms")
        m = np.ones(batch, dtype=np.int64)
        return cls(d, T, C, m, adaptive_losses_eta(m, d, T, C), np.zeros(tuple(batch) + (d,)))

    @property
    def weights(self) -> np.ndarray:
        return np.exp(-self.eta[..., None] * self.cumulative) / self.d


def adaptive_losses_advance(state: AdaptiveLossState, losses) -> Tuple[np.ndarray, AdaptiveLossState]:
    loss = as_dense(losses)
    if loss.shape != state.cumulative.shape:
        raise ValueError(f"outcome shape {loss.shape} does not match state {state.cumulative.shape}")
    x = logit_map(state.cumulative, -state.eta)
    n = _support_sizes(loss)
    trigger = n > 2.0**state.m
    if not np.any(trigger):
        return x, replace(state, cumulative=state.cumulative + loss)
    m = np.where(trigger, _ceil_log2(np.where(trigger, n, 1)), state.m)
    eta = np.where(trigger, adaptive_losses_eta(m, state.d, state.T, state.C), state.eta)
    # the triggering loss vector is dropped, weights restart uniform
    cumulative = np.where(trigger[..., None], 0.0, state.cumulative + loss)
    return x, replace(state, m=m, eta=eta, cumulative=cumulative)


def adaptive_losses_step(state: AdaptiveLossState, losses):
    x, state = adaptive_losses_advance(state, losses)
    return SimplexDistribution(x), state


# ---------------------------------------------------------------------------
# sparsity-adaptive l^p mirror descent (gains)


def adaptive_gains_parameters(m, T: int, C: float = ADAPTIVE_GAINS_C):
    """Exponent p, dual q and step size for regime m (arrays allowed)."""
    m = np.asarray(m, dtype=np.float64)
    p = 1.0 + 1.0 / (math.log(2.0) * 2.0 ** (m + 1.0) - 1.0)
    q = 1.0 / (1.0 - 1.0 / p)
    eta = C * np.sqrt((p - 1.0) / (T * np.exp(math.log(2.0) * 2.0 ** (m + 1.0) / q)))
    return p, q, eta


@dataclass(frozen=True)
class AdaptiveGainsState:
    """Regime-restarted l^p mirror descent for gains of unknown sparsity.

    Regime m tolerates supports up to ``2^(2^m)``; ``y`` sums the gains
    absorbed since the last restart.
    """

    d: int
    T: int
    C: float
    m: np.ndarray
    p: np.ndarray
    q: np.ndarray
    eta: np.ndarray
    y: np.ndarray

    @classmethod
    def initial(cls, d: int, T: int, C: float = ADAPTIVE_GAINS_C, batch=()) -> "AdaptiveGainsState":
        m = np.ones(batch, dtype=np.int64)
        p, q, eta = adaptive_gains_parameters(m, T, C)
        return cls(d, T, C, m, p, q, eta, np.zeros(tuple(batch) + (d,)))


def adaptive_gains_advance(state: AdaptiveGainsState, gains) -> Tuple[np.ndarray, AdaptiveGainsState]:
    g = as_dense(gains)
    if g.shape != state.y.shape:
        raise ValueError(f"outcome shape {g.shape} does not match state {state.y.shape}")
    x = lp_mirror_map(state.eta[..., None] * state.y, state.p)
    n = _support_sizes(g)
    trigger = n > 2.0 ** (2.0**state.m)
    if not np.any(trigger):
        return x, replace(state, y=state.y + g)
    if np.any(n[trigger] <= 1):
        raise RuntimeError("regime change with support <= 1 is unreachable")
    m = np.where(trigger, _ceil_log2(_ceil_log2(np.where(trigger, n, 4))), state.m)
    p, q, eta = adaptive_gains_parameters(m, state.T, state.C)
    y = np.where(trigger[..., None], 0.0, state.y + g)
    return x, replace(
        state,
        m=m,
        p=np.where(trigger, p, state.p),
        q=np.where(trigger, q, state.q),
        eta=np.where(trigger, eta, state.eta),
        y=y,
    )


def adaptive_gains_step(state: AdaptiveGainsState, gains):
    x, state = adaptive_gains_advance(state, gains)
    return SimplexDistribution(x), state
