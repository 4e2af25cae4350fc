"""Self-interacting absorbed diffusion: run, absorb, restart from the occupation measure.

The process diffuses until it leaves the domain; the whole path so far defines
an occupation measure and the next excursion starts from a point drawn from it.
Both the time-averaged occupation measure and the empirical measure of the
restart points converge to the quasi-stationary distribution, and the number
of excursions per unit time converges to the absorption rate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numba import njit

from .diffusion import DEFAULT_MAX_STEPS, DEFAULT_REFINE_TOL, _check_start, _run_path
from .errors import EmptyMeasureError, ParameterError
from .measures import DiscreteMeasure, OccupationMeasure


def occupation_average(occ, f):
    """Time average of ``f`` over the occupation measure (``f`` is vectorised)."""
    if len(occ) == 0 or occ.total_time <= 0:
        raise EmptyMeasureError("occupation measure is empty")
    return float(np.asarray(f(occ.states), dtype=float) @ occ.weights / occ.total_time)


def resample(occ, rng):
    """Draw one stored state with probability proportional to its occupation time."""
    if len(occ) == 0:
        raise EmptyMeasureError("cannot resample from an empty occupation measure")
    u = rng.random() * occ.total_time
    i = min(int(np.searchsorted(occ.cumulative, u, side="right")), len(occ) - 1)
    return occ.states[i].copy()


@dataclass
class Diagnostics:
    """What to record while a reinforced run progresses.

    Snapshots are taken at cycles 1, b, b**2, ... and at the final cycle, with
    ``b = snapshot_base``.  ``reference_cdf`` (with an optional ``projection``
    from states to one coordinate) enables a Kolmogorov-Smirnov column,
    computed at cycle n after dropping the first ``burn_in * n`` cycles.
    """

    eta_boundary: float = 0.05
    snapshot_base: int = 2
    burn_in: float = 0.1
    reference_cdf: Callable | None = None
    projection: Callable | None = None


@dataclass
class ReinforcedTrace:
    theta: np.ndarray
    resample_points: np.ndarray
    occupation: OccupationMeasure
    cycle_ends: np.ndarray
    snapshots: list = field(default_factory=list)

    def __len__(self):
        return len(self.theta)

    def burn_in_start(self, burn_in, n=None):
        """Index of the first occupation entry after the first ``burn_in * n`` cycles."""
        n = len(self.theta) if n is None else n
        k = int(math.floor(burn_in * n))
        return 0 if k == 0 else int(self.cycle_ends[k - 1])

    def occupation_after(self, burn_in=0.1):
        """Occupation measure with the first ``burn_in`` fraction of cycles removed."""
        start = self.burn_in_start(burn_in)
        return self.occupation if start == 0 else self.occupation.tail(start)

    def discrete_after(self, burn_in=0.1, n=None):
        """Normalised occupation law after burn-in, sharing the stored states."""
        n = len(self.theta) if n is None else n
        start = self.burn_in_start(burn_in, n)
        end = int(self.cycle_ends[n - 1])
        cum = self.occupation.cumulative
        base = cum[start - 1] if start else 0.0
        w = np.diff(cum[start:end], prepend=base)
        w /= w.sum()
        return DiscreteMeasure(self.occupation.states[start:end], w)

    def cycle_lengths(self):
        return np.diff(self.theta, prepend=0.0)


def snapshot_cycles(n_cycles, base=2):
    """1, base, base**2, ... below ``n_cycles``, plus ``n_cycles`` itself."""
    if base < 2:
        raise ParameterError("snapshot_base must be >= 2")
    out = []
    c = 1
    while c < n_cycles:
        out.append(c)
        c *= base
    out.append(n_cycles)
    return out


def _thin(states, weights, m):
    if m == 1:
        return states, weights
    idx = np.arange(0, len(states), m)
    return states[idx], np.add.reduceat(weights, idx)


def run_reinforced(model, domain, x0, dt, n_cycles, rng, diagnostics=None, *, thinning=1,
                   max_steps=DEFAULT_MAX_STEPS, refine_tol=DEFAULT_REFINE_TOL,
                   bridge_correction=False):
    """Run ``n_cycles`` absorbed excursions with occupation-measure restarts.

    Cycle ``k`` simulates from the current start until absorption, appends the
    visited states to the shared occupation measure, records the cumulative
    time ``theta_k`` and draws the next start ``Z_k`` from the occupation
    measure.  With ``thinning=m`` only every m-th state of each excursion is
    stored, carrying the summed weight of its block.
    """
    x = _check_start(model, domain, x0, dt)
    if n_cycles < 1:
        raise ParameterError("n_cycles must be >= 1")
    if thinning < 1:
        raise ParameterError("thinning must be >= 1")
    diag = diagnostics
    marks = set(snapshot_cycles(n_cycles, diag.snapshot_base)) if diag else set()
    occ = OccupationMeasure(capacity=1 << 16)
    theta = np.empty(n_cycles)
    cycle_ends = np.empty(n_cycles, dtype=np.int64)
    points = np.empty((n_cycles, model.dim))
    trace = ReinforcedTrace(theta, points, occ, cycle_ends)
    for k in range(n_cycles):
        states, frac = _run_path(model, domain, x, dt, rng, refine_tol, max_steps,
                                 bridge_correction)
        w = np.full(len(states), dt)
        w[-1] = frac * dt
        occ.append(*_thin(states, w, thinning))
        theta[k] = occ.total_time
        cycle_ends[k] = len(occ)
        x = resample(occ, rng)
        points[k] = x
        if k + 1 in marks:
            trace.snapshots.append(_snapshot(trace, k + 1, domain, diag))
    return trace


def _snapshot(trace, n, domain, diag):
    from .benchmarks import ks_distance

    occ = trace.occupation
    theta_n = float(trace.theta[n - 1])
    row = {"cycle": n, "theta": theta_n, "theta_over_n": theta_n / n,
           "lambda0_estimate": n / theta_n,
           "boundary_layer_mass": boundary_layer_mass(occ, domain, diag.eta_boundary)}
    if diag.reference_cdf is not None:
        row["ks_to_reference"] = ks_distance(trace.discrete_after(diag.burn_in, n),
                                             diag.reference_cdf, diag.projection)
    return row


def lambda0_estimate(trace):
    """Absorption-rate estimate ``n / theta_n``."""
    if len(trace.theta) == 0:
        raise EmptyMeasureError("trace has no cycles")
    return len(trace.theta) / float(trace.theta[-1])


def eta_n_measure(trace, start=0):
    """Uniform empirical measure of the restart points ``Z_{start+1}, ..., Z_n``."""
    pts = trace.resample_points[start:]
    if len(pts) == 0:
        raise EmptyMeasureError("trace has no restart points")
    return DiscreteMeasure.from_samples(pts)


@njit
def _distances(distance, states):
    out = np.empty(states.shape[0])
    for i in range(states.shape[0]):
        out[i] = distance(states[i])
    return out


def boundary_distances(domain, states):
    return _distances(domain.boundary_distance, np.ascontiguousarray(states, dtype=float))


def boundary_layer_mass(occ, domain, eta):
    """Fraction of occupation time spent within distance ``eta`` of the boundary."""
    if len(occ) == 0:
        raise EmptyMeasureError("occupation measure is empty")
    near = boundary_distances(domain, occ.states) < eta
    return float(occ.weights[near].sum() / occ.total_time)


def theta_ratio_series(trace):
    """Rows ``(n, theta_n / n)`` for every cycle."""
    n = np.arange(1, len(trace.theta) + 1)
    return np.column_stack((n, np.asarray(trace.theta) / n))
