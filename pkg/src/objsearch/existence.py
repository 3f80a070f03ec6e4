"""Tracking whether the target exists in the domain at all.

Alongside the cell belief we keep a scalar p(not-exist). Negative
observations move probability mass out of the searched field of view
and feed it here; a positive detection pulls it back down through a
Bayes step over the detection likelihoods.
"""

from __future__ import annotations

import numpy as np


class ExistenceError(Exception):
    pass


def update_negative(p_not: float, b_pre, b_post, fov_idx) -> float:
    """Posterior p(not-exist) after a miss.

    p_not + (1 - p_not) * (mass of fov in b_pre - mass of fov in b_post),
    clamped to [0, 1].
    """
    b_pre = np.asarray(b_pre, dtype=float)
    b_post = np.asarray(b_post, dtype=float)
    if b_pre.shape != b_post.shape:
        raise ExistenceError("belief lengths differ")
    fov_idx = np.asarray(fov_idx, dtype=int)
    delta = b_pre[fov_idx].sum() - b_post[fov_idx].sum()
    return float(min(1.0, max(0.0, p_not + (1.0 - p_not) * delta)))


def detection_likelihoods(model, belief, action: int) -> tuple[float, float]:
    """(p(D|exists), p(D|not-exists)) for a detection at `action`.

    Out-of-view cells only contribute the false-positive floor, and
    under nonexistence that floor is all there is.
    """
    belief = np.asarray(belief, dtype=float)
    row = model.detection_row(action)
    in_view = model.in_view[action]
    p_d_e = float(row[in_view] @ belief[in_view]
                  + model.config.epsilon * belief[~in_view].sum())
    p_d_not_e = float(model.config.epsilon * belief[~in_view].sum())
    return p_d_e, p_d_not_e


def update_positive(p_not: float, likelihoods: tuple[float, float]) -> float:
    """Bayes posterior p(not-exist) after a detection."""
    p_d_e, p_d_not_e = likelihoods
    denom = p_d_e * (1.0 - p_not) + p_d_not_e * p_not
    if denom <= 0.0:
        raise ExistenceError("detection impossible under model (zero likelihood)")
    return float(p_d_not_e * p_not / denom)


def should_terminate_absent(p_not: float, theta: float = 0.9) -> bool:
    if not 0.5 < theta < 1.0:
        raise ExistenceError("absence threshold must lie in (0.5, 1)")
    return p_not >= theta


class ExistenceTracker:
    """Per-trial p(not-exist) state with a step history.

    History rows are (action, observed, p_not_exist) after the update.
    """

    def __init__(self, p_not_exist: float, theta: float = 0.9):
        if not 0.0 <= p_not_exist <= 1.0:
            raise ExistenceError("initial p(not-exist) outside [0, 1]")
        if not 0.5 < theta < 1.0:
            raise ExistenceError("absence threshold must lie in (0.5, 1)")
        self.p_not_exist = float(p_not_exist)
        self.theta = theta
        self.history: list[tuple[int, bool, float]] = []

    def negative(self, action: int, b_pre, b_post, fov_idx) -> float:
        self.p_not_exist = update_negative(self.p_not_exist, b_pre, b_post, fov_idx)
        self.history.append((action, False, self.p_not_exist))
        return self.p_not_exist

    def positive(self, action: int, model, belief) -> float:
        lk = detection_likelihoods(model, belief, action)
        self.p_not_exist = update_positive(self.p_not_exist, lk)
        self.history.append((action, True, self.p_not_exist))
        return self.p_not_exist

    def should_stop(self) -> bool:
        return should_terminate_absent(self.p_not_exist, self.theta)


class SweepCounter:
    """Counts fully-negative sweeps of each room.

    A room is swept once every one of its cells has appeared in the
    field of view of a negative observation; coverage then resets so
    later sweeps count again. Completed sweeps are the conjugate
    negative evidence for the room Beta parameters (one per sweep).
    """

    def __init__(self, cell_rooms, n_rooms: int):
        cell_rooms = np.asarray(cell_rooms, dtype=int)
        self._full = [frozenset(np.flatnonzero(cell_rooms == k).tolist())
                      for k in range(n_rooms)]
        self._pending = [set(s) for s in self._full]
        self.sweeps = np.zeros(n_rooms, dtype=int)
        self._room_of = cell_rooms

    def observe_negative(self, fov_idx) -> list[int]:
        """Record a miss over fov_idx; returns rooms completed this step."""
        touched = set()
        for i in np.asarray(fov_idx, dtype=int):
            touched.add(int(self._room_of[i]))
        for i in np.asarray(fov_idx, dtype=int):
            self._pending[self._room_of[i]].discard(int(i))
        completed = []
        for k in touched:
            if self._full[k] and not self._pending[k]:
                completed.append(k)
                self.sweeps[k] += 1
                self._pending[k] = set(self._full[k])
        return sorted(completed)
