"""Mirror maps on the simplex.

Three maps are provided:

* the logit map (entropic regularizer), used by exponential weights;
* the gradient of the conjugate of ``h_p(x) = 0.5 * ||x||_p^2`` restricted to
  the simplex, used by the sparse-gains algorithms;
* the Tsallis-type potential ``F_q(x) = -q/(q-1) * sum(x_i^(1 - 1/q))`` with
  its gradient, inverse gradient and Bregman projection, used by the bandit
  algorithm.

All vector functions accept leading batch axes; the last axis indexes arms.
The root-finders keep per-row state, so a row's answer does not depend on
which other rows share the batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import SimplexDistribution

# bandit iterates are floored here before taking negative powers
POSITIVITY_FLOOR = 1e-300
# projected weights below this are clipped up and the vector renormalized
CLIP_FLOOR = 1e-15

MAX_ITER = 200
LAMBDA_TOL = 1e-13


class NumericalFailure(ArithmeticError):
    """A root-finder did not converge; ``rows`` lists the offending batch rows."""

    def __init__(self, message, rows=()):
        super().__init__(message)
        self.rows = tuple(int(r) for r in np.atleast_1d(rows))


@dataclass(frozen=True)
class PNormRegularizer:
    """``h_p(x) = 0.5 * ||x||_p^2`` on the simplex, for p in (1, 2]."""

    p: float

    def __post_init__(self):
        if not (1.0 < self.p <= 2.0):
            raise ValueError(f"p must lie in (1, 2], got {self.p!r}")

    @property
    def q(self) -> float:
        return dual_exponent(self.p)

    @property
    def strong_convexity(self) -> float:
        return self.p - 1.0

    @property
    def range_bound(self) -> float:
        return 0.5


@dataclass(frozen=True)
class TsallisPotential:
    q: float

    def __post_init__(self):
        if not self.q > 1.0:
            raise ValueError(f"q must exceed 1, got {self.q!r}")

    def value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return -(self.q / (self.q - 1.0)) * np.sum(_pow(x, 1.0 - 1.0 / self.q), axis=-1)


def dual_exponent(p: float) -> float:
    return 1.0 / (1.0 - 1.0 / p)


def _pow(a, b):
    # exp/log form keeps exponents like 1/(p-1) with p near 1 well behaved
    a = np.asarray(a, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return np.exp(b * np.log(a))


def _finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ValueError("inputs must be finite")


def _batched(fn):
    """Run a row-wise (2-d) implementation on arrays with any leading shape."""

    def wrapper(y, *args, **kwargs):
        y = np.asarray(y, dtype=np.float64)
        if y.ndim == 0:
            raise ValueError("expected at least a 1-d vector")
        flat = y.reshape(-1, y.shape[-1])
        return fn(flat, *args, **kwargs).reshape(y.shape)

    wrapper.__wrapped__ = fn
    return wrapper


# ---------------------------------------------------------------------------
# entropic map


def logit_map(cumulative, eta: float) -> np.ndarray:
    """Softmax of ``eta * cumulative`` along the last axis.

    ``eta`` may be an array broadcastable against the batch axes.
    """
    cumulative = np.asarray(cumulative, dtype=np.float64)
    eta = np.asarray(eta, dtype=np.float64)
    _finite(cumulative, eta)
    if cumulative.shape[-1] < 1:
        raise ValueError("need at least one arm")
    z = eta[..., None] * cumulative
    z = z - z.max(axis=-1, keepdims=True)
    w = np.exp(z)
    return w / w.sum(axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# l^p map


def _safeguarded_newton(fn, lo, hi, lam, label):
    """Row-wise root of a decreasing function bracketed by ``[lo, hi]``.

    ``fn(rows, lam)`` returns ``(f, df)`` for the selected rows. A Newton
    step is accepted when it lands strictly inside the current bracket;
    otherwise the bracket is bisected. Rows stop as soon as they converge.
    """
    active = np.ones(lam.shape, dtype=bool)
    for _ in range(MAX_ITER):
        rows = np.flatnonzero(active)
        if rows.size == 0:
            return lam
        f, df = fn(rows, lam[rows])
        pos = f > 0
        lo[rows[pos]] = lam[rows[pos]]
        hi[rows[~pos]] = lam[rows[~pos]]
        with np.errstate(divide="ignore", invalid="ignore"):
            step = f / df
        newton = lam[rows] - step
        inside = np.isfinite(newton) & (newton > lo[rows]) & (newton < hi[rows])
        scale = LAMBDA_TOL * np.maximum(1.0, np.abs(lam[rows]))
        converged = (f == 0) | (np.isfinite(step) & (np.abs(step) <= scale))
        nxt = np.where(inside, newton, 0.5 * (lo[rows] + hi[rows]))
        lam[rows] = np.where(converged, lam[rows], nxt)
        done = converged | (hi[rows] - lo[rows] <= scale)
        active[rows[done]] = False
    if np.any(active):
        raise NumericalFailure(f"{label}: root-finder did not converge", np.flatnonzero(active))
    return lam


def _lp_equation(y, lam, p, derivative=False):
    """Sign-carrying KKT residual for the l^p map, plus the candidate point.

    With ``a = (y - lam)_+`` and ``u = a^(1/(p-1))`` the candidate is
    ``x = u / sum(u)``; it satisfies the KKT conditions exactly when
    ``sum(u) = ||u||_p^(2-p)``. In logs, with ``a`` rescaled by its max
    ``M`` (the equation is homogeneous of degree one):

        G = log M + log sum(a~^r) - (2-p)/p * log sum(a~^q)

    which is -inf once ``lam >= max(y)``.
    """
    p = np.asarray(p, dtype=np.float64)
    if p.ndim:
        p = p[:, None]
    r = 1.0 / (p - 1.0)
    q = p * r
    c = (2.0 - p) / p
    a = np.maximum(y - lam[:, None], 0.0)
    m = a.max(axis=1, keepdims=True)
    safe_m = np.where(m > 0, m, 1.0)
    at = a / safe_m
    u = _pow(at, r)
    v = _pow(at, q)
    su = u.sum(axis=1)
    sv = v.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.log(m[:, 0]) + np.log(su) - np.reshape(c, -1) * np.log(sv)
        g = np.where(m[:, 0] > 0, g, -np.inf)
        x = u / su[:, None]
        if not derivative:
            return g, x
        nz = at > 0
        inv = np.where(nz, 1.0 / np.where(nz, at, 1.0), 0.0)
        dg = (-r * (u * inv).sum(axis=1, keepdims=True) / su[:, None]
              + c * q * (v * inv).sum(axis=1, keepdims=True) / sv[:, None])[:, 0] / m[:, 0]
    return g, x, dg


@_batched
def _lp_mirror_map(y, p):
    n = y.shape[0]
    p = np.asarray(p, dtype=np.float64)
    if np.any(p <= 1.0) or np.any(p > 2.0):
        raise ValueError("p must lie in (1, 2]")
    if p.ndim:
        p = np.broadcast_to(p.reshape(-1), (n,))
    _finite(y)
    lo = y.min(axis=1) - 1.0
    hi = y.max(axis=1)

    # exp(G) - 1 is degree-one homogeneous in a, close to linear in lam and
    # finite at the top of the bracket, which suits Newton better than G
    def fn(rows, lam):
        g, _, dg = _lp_equation(y[rows], lam, p[rows] if p.ndim else p, derivative=True)
        return np.expm1(g), np.exp(g) * dg

    lam = _safeguarded_newton(fn, lo, hi, 0.5 * (lo + hi), "lp mirror map")
    g, x = _lp_equation(y, lam, p)
    bad = ~np.isfinite(g)
    if np.any(bad):
        raise NumericalFailure("lp mirror map: degenerate multiplier", np.flatnonzero(bad))
    return x


def lp_mirror_map(y, reg) -> np.ndarray:
    """argmax over the simplex of ``<y, x> - 0.5 * ||x||_p^2``.

    ``reg`` is a :class:`PNormRegularizer` or a float ``p``; with batch input
    ``p`` may also be an array with one exponent per row. The multiplier of
    the sum constraint is bracketed by ``[min(y) - 1, max(y)]`` and found
    by safeguarded Newton iteration.
    """
    p = np.asarray(reg.p if isinstance(reg, PNormRegularizer) else reg, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if p.ndim:
        p = np.broadcast_to(p, y.shape[:-1]).reshape(-1)
    return _lp_mirror_map(y, p)


def lp_kkt_residual(y, x, p: float) -> float:
    """Largest violation of the optimality conditions of :func:`lp_mirror_map`."""
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    norm = np.sum(x**p) ** (1.0 / p)
    grad = norm ** (2.0 - p) * np.where(x > 0, x, 0.0) ** (p - 1.0)
    support = x > 0
    lam = np.mean((y - grad)[support])
    res = np.max(np.abs((y - lam - grad)[support]))
    if np.any(~support):
        res = max(res, float(np.max(y[~support] - lam)))
    return max(float(res), abs(float(x.sum()) - 1.0))


# ---------------------------------------------------------------------------
# Tsallis potential


def tsallis_gradient(x, pot: TsallisPotential) -> np.ndarray:
    x = np.asarray(x if not isinstance(x, SimplexDistribution) else x.weights, dtype=np.float64)
    if np.any(~(x > 0)):
        raise ValueError("Tsallis gradient needs strictly positive weights")
    return -_pow(x, -1.0 / pot.q)


def tsallis_gradient_inverse(y, pot: TsallisPotential) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if np.any(~(y < 0)):
        raise ValueError("inverse Tsallis gradient needs strictly negative inputs")
    return _pow(-y, -pot.q)


def bregman_divergence(x, z, pot: TsallisPotential) -> np.ndarray:
    """``D(x, z) = F(x) - F(z) - <grad F(z), x - z>`` (x may sit on the boundary)."""
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    return pot.value(x) - pot.value(z) - np.sum(tsallis_gradient(z, pot) * (x - z), axis=-1)


def _projection_mass(base, lam, q):
    # sum_i (base_i + lam)^(-q), and its derivative in lam
    t = base + lam[:, None]
    v = _pow(t, -q)
    return v.sum(axis=1) - 1.0, -q * (v / t).sum(axis=1), v


@_batched
def _project_bases(base, q):
    """Solve ``sum (base_i + lam)^(-q) = 1`` row-wise; return the point.

    The mass is convex and strictly decreasing in ``lam`` on
    ``lam > -min(base)``. The upper end of the bracket is grown
    geometrically until the mass drops below one.
    """
    n = base.shape[0]
    lo = -base.min(axis=1) + 1e-15
    hi = np.zeros(n)
    f_hi, _, _ = _projection_mass(base, hi, q)
    grow = f_hi > 0
    step = np.maximum(base.max(axis=1), 1.0)
    for _ in range(MAX_ITER):
        if not np.any(grow):
            break
        lo[grow] = np.maximum(lo[grow], hi[grow])
        hi[grow] = hi[grow] + step[grow]
        step[grow] *= 2.0
        f_hi[grow], _, _ = _projection_mass(base[grow], hi[grow], q)
        grow = f_hi > 0
    if np.any(grow):
        raise NumericalFailure("Bregman projection: could not bracket the multiplier", np.flatnonzero(grow))

    def fn(rows, lam):
        f, df, _ = _projection_mass(base[rows], lam, q)
        return f, df

    lam = _safeguarded_newton(fn, lo, hi.copy(), hi.copy(), "Bregman projection")
    _, _, x = _projection_mass(base, lam, q)
    x = x / x.sum(axis=1, keepdims=True)
    if np.any(x < CLIP_FLOOR):
        x = np.maximum(x, CLIP_FLOOR)
        x = x / x.sum(axis=1, keepdims=True)
    return x


def bregman_project(z, pot: TsallisPotential) -> np.ndarray:
    """argmin over the simplex of ``D(x, z)`` for positive ``z``.

    The minimizer has the form ``x_i = (z_i^(-1/q) + lam)^(-q)``.
    """
    z = np.asarray(z, dtype=np.float64)
    if np.any(~(z > 0)):
        raise ValueError("Bregman projection needs strictly positive z")
    base = _pow(np.maximum(z, POSITIVITY_FLOOR), -1.0 / pot.q)
    if np.any(~np.isfinite(base)):
        raise NumericalFailure("Bregman projection: non-finite gradient")
    return _project_bases(base, pot.q)


def project_from_gradient(grad, pot: TsallisPotential) -> np.ndarray:
    """Bregman projection of the point whose gradient is ``grad`` (all negative).

    Equivalent to ``bregman_project(tsallis_gradient_inverse(grad))`` but
    skips the round trip through ``z``, which can underflow for very
    negative gradients.
    """
    grad = np.asarray(grad, dtype=np.float64)
    if np.any(~(grad < 0)):
        raise ValueError("gradient components must be negative")
    return _project_bases(-grad, pot.q)
