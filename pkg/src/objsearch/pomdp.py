"""Grid belief tracking and greedy information-gain action selection.

The target sits in one of N cells; sensing from a cell yields a binary
detection whose hit probability falls off as a Gaussian of distance
inside the field of view and is a flat floor outside it. Expected
posterior entropy for every candidate sensing cell is computed in
closed form with segmented sums, so action scoring stays cheap on a
single core.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class BeliefError(Exception):
    pass


@dataclass(frozen=True)
class ObservationConfig:
    p_max: float = 0.8
    sigma: float = 1.5
    fov_radius: float = 2.0
    epsilon: float = 0.05

    def __post_init__(self):
        if not 0.0 < self.p_max <= 1.0:
            raise ValueError("p_max must be in (0, 1]")
        if self.sigma <= 0 or self.fov_radius < 0:
            raise ValueError("sigma and fov_radius must be positive")
        # epsilon 0 means a perfect sensor; useful for existence tests
        if not 0.0 <= self.epsilon < self.p_max:
            raise ValueError("epsilon must be in [0, p_max)")


def detection_prob(distance: float, in_view: bool,
                   config: ObservationConfig) -> float:
    if not in_view:
        return config.epsilon
    return config.p_max * math.exp(-(distance ** 2) / (2.0 * config.sigma ** 2))


def _xlog2(values: np.ndarray) -> np.ndarray:
    out = np.zeros_like(values)
    mask = values > 0.0
    out[mask] = values[mask] * np.log2(values[mask])
    return out


def entropy(belief: np.ndarray) -> float:
    return float(-_xlog2(np.asarray(belief, dtype=float)).sum())


def reward(before: np.ndarray, after: np.ndarray) -> float:
    """Entropy drop achieved by an observation."""
    return entropy(before) - entropy(after)


class GridModel:
    """Detection geometry over traversable cells.

    coords holds one (x, y) row per cell and room_ids the room index of
    each cell; a cell is in view from another only within fov_radius and
    inside the same room.
    """

    def __init__(self, coords, room_ids, config: ObservationConfig | None = None):
        self.config = config or ObservationConfig()
        self.coords = np.asarray(coords, dtype=float)
        self.room_ids = np.asarray(room_ids, dtype=int)
        if self.coords.ndim != 2 or self.coords.shape[1] != 2:
            raise ValueError("coords must be an (N, 2) array")
        if len(self.room_ids) != len(self.coords):
            raise ValueError("room_ids must match coords")
        self.n_cells = len(self.coords)

        diff = self.coords[:, None, :] - self.coords[None, :, :]
        dist = np.sqrt((diff ** 2).sum(axis=2))
        same_room = self.room_ids[:, None] == self.room_ids[None, :]
        in_view = (dist <= self.config.fov_radius) & same_room
        gauss = self.config.p_max * np.exp(
            -(dist ** 2) / (2.0 * self.config.sigma ** 2)
        )
        self.detection = np.where(in_view, gauss, self.config.epsilon)
        self.in_view = in_view

        # flattened per-action FoV segments for np.add.reduceat
        counts = in_view.sum(axis=1)
        if np.any(counts == 0):
            raise ValueError("every cell must at least see itself")
        self._fov_flat = np.nonzero(in_view)[1]
        self._fov_ptr = np.concatenate(([0], np.cumsum(counts)[:-1]))
        rows = np.repeat(np.arange(self.n_cells), counts)
        self._d_in = self.detection[rows, self._fov_flat]

    def fov_states(self, action: int) -> np.ndarray:
        return np.nonzero(self.in_view[action])[0]

    def detection_row(self, action: int) -> np.ndarray:
        return self.detection[action]

    def uniform_belief(self) -> np.ndarray:
        return np.full(self.n_cells, 1.0 / self.n_cells)

    def belief_update(self, belief, action: int, observed: bool) -> np.ndarray:
        belief = np.asarray(belief, dtype=float)
        if belief.shape != (self.n_cells,):
            raise BeliefError("belief length does not match the grid")
        row = self.detection[action]
        weighted = belief * (row if observed else 1.0 - row)
        norm = weighted.sum()
        if norm <= 0.0:
            raise BeliefError("observation has zero probability under the belief")
        return weighted / norm

    def expected_gains(self, belief) -> np.ndarray:
        """One-step expected entropy reduction for every sensing cell."""
        b = np.asarray(belief, dtype=float)
        eps = self.config.epsilon
        h_now = entropy(b)
        u = _xlog2(b)
        u_tot = u.sum()

        b_flat = b[self._fov_flat]
        hit = self._d_in * b_flat
        miss = (1.0 - self._d_in) * b_flat
        b_in = np.add.reduceat(b_flat, self._fov_ptr)
        u_in = np.add.reduceat(u[self._fov_flat], self._fov_ptr)
        s_in = np.add.reduceat(hit, self._fov_ptr)
        s2_in = np.add.reduceat(_xlog2(hit), self._fov_ptr)
        t2_in = np.add.reduceat(_xlog2(miss), self._fov_ptr)

        b_out = 1.0 - b_in
        u_out = u_tot - u_in
        p_hit = s_in + eps * b_out
        p_miss = 1.0 - p_hit
        log_eps = math.log2(eps) if eps > 0.0 else 0.0
        s2 = s2_in + eps * (u_out + log_eps * b_out)
        t2 = t2_in + (1.0 - eps) * (u_out + math.log2(1.0 - eps) * b_out)

        exp_h = -s2 - t2
        nz = p_hit > 0.0
        exp_h[nz] += _xlog2(p_hit[nz])
        nz = p_miss > 0.0
        exp_h[nz] += _xlog2(p_miss[nz])
        return h_now - exp_h

    def select_action(self, belief, rng=None, temperature: float | None = None,
                      allowed=None) -> int:
        """Best sensing cell; ties go to the lowest index.

        allowed optionally masks the action set (inaccessible rooms).
        """
        gains = self.expected_gains(belief)
        if allowed is not None:
            allowed = np.asarray(allowed, dtype=bool)
            if not allowed.any():
                raise BeliefError("no actions allowed")
            gains = np.where(allowed, gains, -np.inf)
        if temperature is None:
            return int(np.argmax(gains))
        if rng is None:
            raise BeliefError("softmax selection needs a random generator")
        scaled = gains / temperature
        scaled -= scaled.max()
        weights = np.exp(scaled)
        weights /= weights.sum()
        return int(rng.choice(self.n_cells, p=weights))
