"""Dirichlet room priors from symbolic evidence, Beta existence priors.

Evidence strength for a class with a observed instances is ln(a) + xi,
attenuated by the product of branching widths between the searched-for
class and the evidence class in the hierarchy. Per-room strengths sum
into a Dirichlet concentration vector over rooms; existence of the
target in a room is a Beta whose pseudo-counts derive from the same
vector.
"""

from __future__ import annotations

import math

import numpy as np

XI = 1.0
DELTA = 0.1


def class_support(count: int, xi: float = XI) -> float:
    """ln(count) + xi, zero when nothing of the class was seen."""
    if count < 0:
        raise ValueError("negative instance count")
    if count == 0:
        return 0.0
    return math.log(count) + xi


def attenuated_support(count: int, widths, xi: float = XI) -> float:
    denom = 1.0
    for w in widths:
        denom *= w
    return class_support(count, xi) / denom


def room_alpha(target_cls: str, room_counts: dict, hierarchy,
               xi: float = XI) -> float:
    """Concentration mass one room contributes for the searched class.

    room_counts maps evidence class name -> number of instances known
    to be in the room.
    """
    total = 0.0
    for cls, count in room_counts.items():
        _, widths = hierarchy.lca_path(target_cls, cls)
        total += attenuated_support(count, widths, xi)
    return total


def alpha_vector(target_cls: str, counts_by_room, hierarchy,
                 xi: float = XI, delta: float = DELTA) -> np.ndarray:
    """Dirichlet concentrations per room, smoothed if any room is empty."""
    alpha = np.array(
        [room_alpha(target_cls, counts, hierarchy, xi) for counts in counts_by_room],
        dtype=float,
    )
    if np.any(alpha == 0.0):
        alpha = alpha + delta
    return alpha


def dirichlet_expectation(alpha) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=float)
    total = alpha.sum()
    if total <= 0:
        raise ValueError("concentration sum must be positive")
    return alpha / total


def dirichlet_pdf(alpha, x) -> float:
    alpha = np.asarray(alpha, dtype=float)
    x = np.asarray(x, dtype=float)
    if alpha.shape != x.shape:
        raise ValueError("alpha and x must have matching length")
    if np.any(alpha <= 0):
        raise ValueError("concentrations must be positive")
    if abs(x.sum() - 1.0) > 1e-9 or np.any(x < 0):
        raise ValueError("x must lie on the probability simplex")
    log_norm = math.lgamma(alpha.sum()) - sum(math.lgamma(a) for a in alpha)
    log_density = log_norm
    for a, mu in zip(alpha, x):
        if mu == 0.0:
            if a < 1.0:
                raise ValueError("density diverges at a zero coordinate")
            if a > 1.0:
                return 0.0
        else:
            log_density += (a - 1.0) * math.log(mu)
    return math.exp(log_density)


def beta_pdf(x: float, a: float, b: float) -> float:
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must be in [0, 1]")
    if a <= 0 or b <= 0:
        raise ValueError("shape parameters must be positive")
    if x == 0.0:
        if a < 1.0:
            raise ValueError("density diverges at 0")
        return 0.0 if a > 1.0 else b
    if x == 1.0:
        if b < 1.0:
            raise ValueError("density diverges at 1")
        return 0.0 if b > 1.0 else a
    log_norm = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
    return math.exp(log_norm + (a - 1.0) * math.log(x) + (b - 1.0) * math.log(1.0 - x))


def beta_init(alpha, delta: float = DELTA):
    """Per-room Beta parameters: alpha copied, beta = mean(alpha) floored."""
    alpha = np.asarray(alpha, dtype=float)
    value = max(float(alpha.mean()), delta)
    return alpha.copy(), np.full(alpha.shape, value)


def beta_existence(alpha, beta) -> np.ndarray:
    """Beta-mean probability that the class exists in each room."""
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if np.any(alpha + beta <= 0):
        raise ValueError("alpha + beta must be positive")
    return alpha / (alpha + beta)


def domain_nonexistence(room_probs) -> float:
    """Probability that no room holds the target."""
    out = 1.0
    for p in np.asarray(room_probs, dtype=float):
        if not 0.0 <= p <= 1.0:
            raise ValueError("room probabilities must be in [0, 1]")
        out *= 1.0 - p
    return out
