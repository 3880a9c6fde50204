"""Seeded rating-scale data generation."""

from __future__ import annotations

import numpy as np

from .data import ResponseMatrix, ScoringKey
from .model import rsm_category_probs

# Counter-based generator: identical streams on every platform for a given seed.
RNG_ALGORITHM = "Philox"

# Generating values from a published 7-item self-concept calibration.
REPORTED_ITEM_IDS = ("03A", "03D", "03E", "03F", "03BR", "03CR", "03GR")
REPORTED_DELTA = (0.20, -0.21, -0.09, 0.09, -0.52, 0.19, 0.34)
REPORTED_TAU = (-0.21, 0.03, 0.19)


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def spawn_rngs(seed, n):
    """``n`` independent generators derived from one seed."""
    return [np.random.Generator(np.random.Philox(s)) for s in np.random.SeedSequence(seed).spawn(n)]


def draw_responses(beta, delta, tau, rng) -> np.ndarray:
    """Sample internal scores 0..m for every person/item pair."""
    probs = rsm_category_probs(np.asarray(beta)[:, None], np.asarray(delta)[None, :], tau)
    cdf = np.cumsum(probs, axis=-1)
    u = rng.random(probs.shape[:-1])[..., None]
    return np.minimum((u > cdf).sum(axis=-1), probs.shape[-1] - 1).astype(float)


def simulate_rsm(n_persons, delta, tau, seed, mean=0.0, sd=1.0, item_ids=None,
                 reverse=(), min_category=1):
    """Generate a raw (external-coded) ResponseMatrix and the true abilities.

    Items named in ``reverse`` are written with the category order inverted
    so that applying their reverse key recovers the simulated score.
    """
    rng = make_rng(seed)
    delta = np.asarray(delta, dtype=float)
    tau = np.asarray(tau, dtype=float)
    beta = rng.normal(mean, sd, size=n_persons)
    scores = draw_responses(beta, delta, tau, rng)
    m = tau.size
    if item_ids is None:
        item_ids = [f"I{i + 1}" for i in range(delta.size)]
    keys = [
        ScoringKey(item, "reverse" if item in reverse else "forward", min_category, min_category + m)
        for item in item_ids
    ]
    cells = np.column_stack([k.unscore(scores[:, i]) for i, k in enumerate(keys)])
    width = len(str(n_persons))
    person_ids = [f"P{v + 1:0{width}d}" for v in range(n_persons)]
    return ResponseMatrix(person_ids, item_ids, cells, keys), beta
