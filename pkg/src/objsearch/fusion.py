"""Merging room priors with cell beliefs.

Priors live at room level; beliefs at cell level. room_marginals sums a
belief into a room distribution (hallway counted as the last room),
the merge strategies combine prior and marginals into a new room
distribution, and redistribute maps that back onto cells while
preserving each room's internal shape.
"""

from __future__ import annotations

import enum
import logging

import numpy as np

from .priors import dirichlet_pdf

log = logging.getLogger(__name__)


class FusionError(Exception):
    pass


class MergeStrategy(enum.Enum):
    NONE = "none"
    BAYESIAN = "bayesian"
    TRUST_FACTOR = "trust_factor"
    DIRICHLET_WEIGHT = "dirichlet_weight"


def room_marginals(belief, room_ids, n_rooms: int | None = None) -> np.ndarray:
    """Per-room belief mass. room_ids[i] indexes rooms 0..n_rooms-1.

    The hallway is just the last room id, so it shows up as the final
    component.
    """
    belief = np.asarray(belief, dtype=float)
    room_ids = np.asarray(room_ids, dtype=int)
    if belief.shape != room_ids.shape:
        raise FusionError("belief and room assignment lengths differ")
    if n_rooms is None:
        n_rooms = int(room_ids.max()) + 1 if room_ids.size else 0
    if np.any(room_ids < 0) or np.any(room_ids >= n_rooms):
        raise FusionError("cell without room assignment")
    out = np.zeros(n_rooms)
    np.add.at(out, room_ids, belief)
    return out


def bayesian_merge(prior, marginals) -> np.ndarray:
    """Normalized elementwise product; falls back to marginals if zero."""
    prior = np.asarray(prior, dtype=float)
    marginals = np.asarray(marginals, dtype=float)
    if prior.shape != marginals.shape:
        raise FusionError("prior and marginals lengths differ")
    product = prior * marginals
    total = product.sum()
    if total <= 0.0:
        log.warning("bayesian merge degenerate (all products zero); keeping marginals")
        return marginals.copy()
    return product / total


def weighted_average_merge(prior, marginals, trust: float) -> np.ndarray:
    if not 0.0 <= trust <= 1.0:
        raise FusionError("trust must be in [0, 1]")
    prior = np.asarray(prior, dtype=float)
    marginals = np.asarray(marginals, dtype=float)
    return trust * prior + (1.0 - trust) * marginals


def dirichlet_weight_merge(prior_alpha, marginals) -> np.ndarray:
    """Average weighted by how plausible the marginals look to the prior.

    The weight is the Dirichlet density of the marginals under the
    prior concentrations, squashed through x/(1+x). This baseline is a
    stand-in for comparison experiments, not a calibrated rule.
    """
    alpha = np.asarray(prior_alpha, dtype=float)
    marginals = np.asarray(marginals, dtype=float)
    density = dirichlet_pdf(alpha, marginals)
    trust = density / (1.0 + density)
    prior = alpha / alpha.sum()
    return weighted_average_merge(prior, marginals, trust)


def redistribute(belief, merged, room_ids) -> np.ndarray:
    """Rescale cells so room masses match the merged distribution.

    Rooms currently holding zero belief receive their share uniformly
    over their cells. Defining contract:
    room_marginals(redistribute(b, m, r), r) == m.
    """
    belief = np.asarray(belief, dtype=float)
    merged = np.asarray(merged, dtype=float)
    room_ids = np.asarray(room_ids, dtype=int)
    n_rooms = len(merged)
    current = room_marginals(belief, room_ids, n_rooms)
    out = np.empty_like(belief)
    for k in range(n_rooms):
        cells = room_ids == k
        if current[k] > 0.0:
            out[cells] = belief[cells] * (merged[k] / current[k])
        else:
            count = int(cells.sum())
            if count == 0:
                if merged[k] > 0.0:
                    raise FusionError(f"room {k} has mass but no cells")
                continue
            out[cells] = merged[k] / count
    total = out.sum()
    if total <= 0.0:
        raise FusionError("redistribution produced an empty belief")
    return out / total


def apply_merge(strategy: MergeStrategy, belief, prior_alpha, room_ids,
                trust: float = 0.5) -> np.ndarray:
    """Run one KB-triggered merge and return the new cell belief."""
    belief = np.asarray(belief, dtype=float)
    if strategy is MergeStrategy.NONE:
        return belief.copy()
    alpha = np.asarray(prior_alpha, dtype=float)
    prior = alpha / alpha.sum()
    marginals = room_marginals(belief, room_ids, len(prior))
    if strategy is MergeStrategy.BAYESIAN:
        merged = bayesian_merge(prior, marginals)
    elif strategy is MergeStrategy.TRUST_FACTOR:
        merged = weighted_average_merge(prior, marginals, trust)
    elif strategy is MergeStrategy.DIRICHLET_WEIGHT:
        merged = dirichlet_weight_merge(alpha, marginals)
    else:
        raise FusionError(f"unknown strategy {strategy}")
    return redistribute(belief, merged, room_ids)
