"""Rasch-family response probabilities.

All array functions broadcast over ``beta`` and ``delta``; the category
axis is appended last.  Thresholds ``tau`` follow the Andrich form: the
exponent for category ``x`` is ``sum_{j<=x} (beta - delta - tau_j)`` with an
empty sum for ``x = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class ModelDomainError(ValueError):
    """Invalid argument to a model function."""


@dataclass
class CategoryStructure:
    tau: np.ndarray
    tau_se: np.ndarray
    thurstone: np.ndarray
    category_measures: np.ndarray
    observed_counts: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @classmethod
    def from_tau(cls, tau, tau_se=None, observed_counts=None):
        tau = np.asarray(tau, dtype=float)
        return cls(
            tau=tau,
            tau_se=np.full(tau.shape, np.nan) if tau_se is None else np.asarray(tau_se, float),
            thurstone=thurstone_thresholds(0.0, tau),
            category_measures=category_measures(0.0, tau),
            observed_counts=(
                np.zeros(tau.size + 1) if observed_counts is None else np.asarray(observed_counts)
            ),
        )

    @property
    def n_steps(self) -> int:
        return int(self.tau.size)


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ModelDomainError("model inputs must be finite")


def _logistic(x):
    # Branch on sign so exp never overflows.
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def dichotomous_prob(beta, delta):
    """P(X=1) = exp(beta - delta) / (1 + exp(beta - delta))."""
    beta = np.asarray(beta, dtype=float)
    delta = np.asarray(delta, dtype=float)
    _check_finite(beta, delta)
    p = _logistic(beta - delta)
    return float(p) if p.ndim == 0 else p


def three_pl_prob(beta, sigma, a=1.0, c=0.0):
    """Three-parameter logistic probability ``c + (1 - c) * logistic(a (beta - sigma))``.

    Evaluation only; the toolkit does not estimate 3-PL parameters.
    """
    beta, sigma, a, c = (np.asarray(v, dtype=float) for v in (beta, sigma, a, c))
    _check_finite(beta, sigma, a, c)
    if np.any(c < 0) or np.any(c >= 1):
        raise ModelDomainError("guessing parameter c must lie in [0, 1)")
    p = c + (1.0 - c) * _logistic(a * (beta - sigma))
    return float(p) if p.ndim == 0 else p


def _category_exponents(theta, tau):
    # theta: (...), tau: (m,) -> (..., m+1)
    theta = np.asarray(theta, dtype=float)[..., None]
    steps = np.arange(tau.size + 1, dtype=float)
    cum_tau = np.concatenate([[0.0], np.cumsum(tau)])
    return steps * theta - cum_tau


def _as_tau(tau):
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    if tau.ndim != 1 or tau.size == 0:
        raise ModelDomainError("tau must hold at least one threshold")
    _check_finite(tau)
    return tau


def rsm_category_probs(beta, delta, tau):
    """Rating scale model probabilities for categories ``0..m``.

    Returns an array with a trailing axis of length ``m + 1``.
    """
    tau = _as_tau(tau)
    beta = np.asarray(beta, dtype=float)
    delta = np.asarray(delta, dtype=float)
    _check_finite(beta, delta)
    expo = _category_exponents(beta - delta, tau)
    expo -= expo.max(axis=-1, keepdims=True)
    w = np.exp(expo)
    return w / w.sum(axis=-1, keepdims=True)


def expected_score_and_variance(beta, delta, tau):
    """Model expectation ``E = sum x pi_x`` and variance ``V = sum (x-E)^2 pi_x``."""
    probs = rsm_category_probs(beta, delta, tau)
    x = np.arange(probs.shape[-1], dtype=float)
    e = probs @ x
    v = probs @ (x**2) - e**2
    # Cancellation can leave tiny negatives far from the target.
    v = np.maximum(v, 0.0)
    if e.ndim == 0:
        return float(e), float(v)
    return e, v


def score_moments(probs):
    """Expectation, variance and fourth central moment from category probabilities."""
    x = np.arange(probs.shape[-1], dtype=float)
    e = probs @ x
    dev = x - e[..., None]
    v = np.sum(dev**2 * probs, axis=-1)
    kurt = np.sum(dev**4 * probs, axis=-1)
    return e, v, kurt


# -- scalar helpers for root finding ---------------------------------------

def _scalar_probs(theta, tau):
    expo = [0.0]
    acc = 0.0
    for t in tau:
        acc += theta - t
        expo.append(acc)
    top = max(expo)
    w = [math.exp(e - top) for e in expo]
    total = sum(w)
    return [wi / total for wi in w]


def _solve_increasing(f, lo, hi, target, tol):
    """Root of ``f(theta)[0] = target`` for increasing ``f`` on ``[lo, hi]``.

    ``f`` returns ``(value, derivative)``.  Newton steps are taken while they
    stay inside the current bracket; otherwise the bracket is bisected.
    """
    if f(lo)[0] - target > 0:
        return lo
    x = 0.5 * (lo + hi) if not lo <= 0.0 <= hi else 0.0
    for _ in range(200):
        value, slope = f(x)
        g = value - target
        if abs(g) < tol:
            return x
        if g < 0:
            lo = x
        else:
            hi = x
        if hi - lo < 1e-14:
            return x
        step = x - g / slope if slope > 0 else lo - 1.0
        x = step if lo < step < hi else 0.5 * (lo + hi)
    return x


_BRACKET = 50.0


def thurstone_thresholds(delta, tau):
    """Rasch-Thurstone thresholds: the measure where ``P(X >= k) = 0.5``.

    Parameters
    ----------
    delta : float
        Item location.
    tau : sequence of float
        Andrich thresholds.

    Returns
    -------
    numpy.ndarray
        ``m`` increasing logit locations.
    """
    tau = [float(t) for t in _as_tau(tau)]
    delta = float(delta)
    if not math.isfinite(delta):
        raise ModelDomainError("delta must be finite")
    out = []
    for k in range(1, len(tau) + 1):
        def upper_tail(theta, k=k):
            p = _scalar_probs(theta, tau)
            e = sum(x * px for x, px in enumerate(p))
            return sum(p[k:]), sum((x - e) * p[x] for x in range(k, len(p)))

        out.append(delta + _solve_increasing(upper_tail, -_BRACKET, _BRACKET, 0.5, 1e-10))
    return np.array(out)


def measure_for_expected_score(target, delta, tau, tol=1e-10):
    """Measure at which the expected score equals ``target`` (internal units)."""
    tau = [float(t) for t in _as_tau(tau)]
    m = len(tau)
    if not 0 < target < m:
        raise ModelDomainError(f"expected score target must lie in (0, {m})")

    def expected(theta):
        p = _scalar_probs(theta, tau)
        e = sum(x * px for x, px in enumerate(p))
        return e, sum((x - e) ** 2 * px for x, px in enumerate(p))

    return float(delta) + _solve_increasing(expected, -_BRACKET, _BRACKET, target, tol)


EXTREME_OFFSET = 0.25


def category_measures(delta, tau):
    """Measure representing each category.

    Interior categories sit where the expected score equals the category;
    the two extremes use the finite proxies ``E = 0.25`` and ``E = m - 0.25``.
    """
    m = _as_tau(tau).size
    targets = [EXTREME_OFFSET, *range(1, m), m - EXTREME_OFFSET]
    return np.array([measure_for_expected_score(t, delta, tau) for t in targets])


def score_zone_boundaries(delta, tau):
    """Measures where the expected score crosses each half-point ``x + 0.5``."""
    m = _as_tau(tau).size
    return np.array([measure_for_expected_score(x + 0.5, delta, tau) for x in range(m)])
