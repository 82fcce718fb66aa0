"""Exact tail-risk computations for finite discrete reward laws.

Everything here is closed-form arithmetic on sorted atoms: quantile
integrals are finite segment sums, never sampled. The right-tailed CVaR
(mean of the top 1-alpha quantile mass) is the maximization target; the
left tail and the mean are tied to it by
(1-alpha) * cvar_right + alpha * cvar_left = mean.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .model import as_pair_array

# Guard against last-bit noise in cumulative probabilities when locating
# quantiles; distinct CDF levels of real data sit far above this.
_QEPS = 1e-12


@dataclass(frozen=True)
class RiskParams:
    """Probability level alpha in [0,1) and mean weight beta >= 0.

    beta = 0 is pure CVaR; alpha = 0 collapses CVaR to the mean, which
    recovers the classical average-reward criterion.
    """

    alpha: float
    beta: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError(f"alpha must lie in [0, 1), got {self.alpha}")
        if self.beta < 0.0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")


@dataclass(frozen=True)
class DiscreteDistribution:
    """Finite law in canonical form: values sorted, equal values merged."""

    values: np.ndarray
    probs: np.ndarray

    @classmethod
    def from_atoms(cls, values, probs, tol=1e-9):
        values = np.asarray(values, dtype=np.float64).ravel()
        probs = np.asarray(probs, dtype=np.float64).ravel()
        if values.shape != probs.shape:
            raise ValueError("values and probs must have the same length")
        if not np.all(np.isfinite(values)):
            raise ValueError("distribution values must be finite")
        if probs.size == 0:
            raise ValueError("distribution needs at least one atom")
        if float(probs.min()) < -tol:
            raise ValueError(f"negative probability {probs.min():.3g}")
        total = float(probs.sum())
        if abs(total - 1.0) > tol:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        uniq, inverse = np.unique(values, return_inverse=True)
        merged = np.bincount(inverse, weights=np.clip(probs, 0.0, None), minlength=uniq.size)
        keep = merged > 0.0
        if not keep.any():
            # All mass was clipped away; keep the single heaviest atom.
            keep[np.argmax(merged)] = True
        v = np.ascontiguousarray(uniq[keep])
        p = np.ascontiguousarray(merged[keep])
        v.setflags(write=False)
        p.setflags(write=False)
        return cls(v, p)

    @classmethod
    def dirac(cls, value):
        return cls.from_atoms([value], [1.0])

    @cached_property
    def cdf(self):
        out = np.cumsum(self.probs)
        out.setflags(write=False)
        return out

    def mean(self):
        return float(self.values @ self.probs)

    def __len__(self):
        return self.values.size


def var(dist, alpha):
    """The alpha-quantile inf{z : F(z) >= alpha}; alpha = 0 gives the minimum."""
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    idx = int(np.searchsorted(dist.cdf, alpha - _QEPS, side="left"))
    idx = min(idx, len(dist) - 1)
    return float(dist.values[idx])


def cvar_right(dist, alpha):
    """Mean of the top (1-alpha) quantile mass, as an exact segment sum."""
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    cum = dist.cdf
    prev = np.concatenate(([0.0], cum[:-1]))
    weights = np.clip(cum - np.maximum(prev, alpha), 0.0, None)
    return float(dist.values @ weights) / (1.0 - alpha)


def cvar_left(dist, alpha):
    """Mean of the bottom alpha quantile mass; defined for alpha in (0, 1]."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    cum = dist.cdf
    prev = np.concatenate(([0.0], cum[:-1]))
    weights = np.clip(np.minimum(cum, alpha) - prev, 0.0, None)
    return float(dist.values @ weights) / alpha


def ru_objective(dist, y, alpha):
    """The convex objective y + E[xi - y]^+ / (1-alpha).

    Its minimum over y equals cvar_right and is attained at the
    alpha-quantile.
    """
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    excess = np.clip(dist.values - y, 0.0, None)
    return float(y + (dist.probs @ excess) / (1.0 - alpha))


def cvar_via_ru(dist, alpha):
    """Minimize the convex tail objective over the support values.

    Returns (minimum value, leftmost minimizing y). Restricting candidates
    to the support is exact for a discrete law because the quantile lies in
    the support.
    """
    best_val = np.inf
    best_y = None
    for y in dist.values:
        val = ru_objective(dist, float(y), alpha)
        if val < best_val:
            best_val = val
            best_y = float(y)
    return best_val, best_y


def reward_distribution(instance, x):
    """Law of the reward under the state-action weights x.

    With next-state rewards each atom value r(i,a,j) carries weight
    x(i,a) * P(j|i,a).
    """
    x = as_pair_array(x)
    if instance.rewards is not None:
        return DiscreteDistribution.from_atoms(instance.rewards, x)
    weights = x[:, None] * instance.kernel
    return DiscreteDistribution.from_atoms(instance.rewards3.ravel(), weights.ravel())


@dataclass(frozen=True)
class Breakpoints:
    """Sorted distinct reward values, their minimum gap, and the bounds."""

    values: np.ndarray
    delta: float | None
    bounds: tuple

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


def breakpoints(instance):
    """Breakpoint set of the instance's saddle objective in y.

    The objective is piecewise linear in y with kinks only at reward
    values, so scans over y can be restricted to this finite set.
    """
    values = np.unique(instance.reward_table())
    delta = float(np.diff(values).min()) if values.size >= 2 else None
    return Breakpoints(values=values, delta=delta,
                       bounds=(float(values[0]), float(values[-1])))


def saddle_coefficients(instance, y, params):
    """Per-pair coefficients c_k(y) with v(x, y) = sum_k x(k) c_k(y).

    State-action rewards give
        c_k = y + [r_k - y]^+ / (1-alpha) + beta * r_k;
    next-state rewards average the bracket over the transition kernel.
    """
    inv = 1.0 / (1.0 - params.alpha)
    if instance.rewards is not None:
        r = instance.rewards
        return y + inv * np.clip(r - y, 0.0, None) + params.beta * r
    r3 = instance.rewards3
    inner = y + inv * np.clip(r3 - y, 0.0, None) + params.beta * r3
    return np.einsum("kj,kj->k", instance.kernel, inner)


def saddle_value(instance, x, y, params):
    """The convex-concave objective v(x, y): linear in x, piecewise linear
    and convex in y with kinks at the instance's reward values."""
    x = as_pair_array(x)
    return float(x @ saddle_coefficients(instance, y, params))
