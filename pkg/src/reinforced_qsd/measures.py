"""Weighted empirical measures: the occupation measure of a path and discrete point masses."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyMeasureError


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finitely many atoms with non-negative masses summing to one."""

    atoms: np.ndarray
    masses: np.ndarray

    @classmethod
    def from_samples(cls, points):
        """Uniform empirical measure of ``points``; repeated points are merged."""
        pts = np.asarray(points)
        if len(pts) == 0:
            raise EmptyMeasureError("no points")
        atoms, counts = np.unique(pts, axis=0, return_counts=True)
        return cls(atoms, counts / counts.sum())

    def as_dict(self):
        keys = [a.item() if np.ndim(a) == 0 or np.size(a) == 1 else tuple(np.ravel(a))
                for a in self.atoms]
        return dict(zip(keys, self.masses.tolist()))

    def coordinate(self, projection=None):
        """One real coordinate per atom: ``projection(atoms)`` or the first component."""
        if projection is not None:
            return np.asarray(projection(self.atoms), dtype=float)
        a = np.asarray(self.atoms, dtype=float)
        return a if a.ndim == 1 else a[:, 0]

    def probability_vector(self, n_states):
        """Dense vector over states ``0..n_states-1`` (atoms must be state indices)."""
        p = np.zeros(n_states)
        np.add.at(p, np.asarray(self.atoms, dtype=int).ravel(), self.masses)
        return p


class OccupationMeasure:
    """Append-only time-weighted states with a prefix-sum index.

    Only the states and cumulative times are stored; per-entry weights are the
    successive differences of the prefix sums.
    """

    def __init__(self, capacity=1024):
        self._cap = max(int(capacity), 1)
        self._states = None
        self._cum = np.empty(self._cap)
        self._n = 0

    @classmethod
    def from_arrays(cls, states, weights):
        occ = cls(capacity=len(states))
        occ.append(states, weights)
        return occ

    @classmethod
    def from_cumulative(cls, states, cumulative):
        """Wrap precomputed prefix sums without re-summing them."""
        cumulative = np.asarray(cumulative, dtype=float)
        if len(cumulative) and (cumulative[0] <= 0 or np.any(np.diff(cumulative) <= 0)):
            raise ValueError("cumulative times must be positive and strictly increasing")
        occ = cls(capacity=len(states))
        occ._states = np.array(states)
        occ._cum = cumulative.copy()
        occ._n = len(cumulative)
        return occ

    def __len__(self):
        return self._n

    def _grow(self, need):
        cap = self._cap
        while cap < need:
            cap = int(cap * 1.5) + 1
        if cap != self._cap:
            cum = np.empty(cap)
            cum[:self._n] = self._cum[:self._n]
            self._cum = cum
            if self._states is not None:
                st = np.empty((cap,) + self._states.shape[1:], dtype=self._states.dtype)
                st[:self._n] = self._states[:self._n]
                self._states = st
            self._cap = cap

    def append(self, states, weights):
        states = np.asarray(states)
        weights = np.asarray(weights, dtype=float)
        k = len(states)
        if k != len(weights):
            raise ValueError("states and weights differ in length")
        if k == 0:
            return
        if np.any(weights <= 0):
            raise ValueError("occupation weights must be positive")
        if self._states is None:
            self._states = np.empty((self._cap,) + states.shape[1:], dtype=states.dtype)
        self._grow(self._n + k)
        self._states[self._n:self._n + k] = states
        start = self._cum[self._n - 1] if self._n else 0.0
        self._cum[self._n:self._n + k] = start + np.cumsum(weights)
        self._n += k

    @property
    def states(self):
        if self._states is None:
            return np.empty(0)
        return self._states[:self._n]

    @property
    def cumulative(self):
        return self._cum[:self._n]

    @property
    def weights(self):
        return np.diff(self.cumulative, prepend=0.0)

    @property
    def total_time(self):
        return float(self._cum[self._n - 1]) if self._n else 0.0

    def tail(self, start):
        """Measure made of entries ``start:`` (used to discard a burn-in prefix)."""
        if start >= self._n:
            raise EmptyMeasureError("burn-in removes every entry")
        return OccupationMeasure.from_arrays(self.states[start:], self.weights[start:])

    def to_discrete(self):
        if self._n == 0:
            raise EmptyMeasureError("empty occupation measure")
        return DiscreteMeasure(self.states, self.weights / self.total_time)
