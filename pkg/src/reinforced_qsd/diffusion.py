"""Euler-Maruyama simulation of diffusions killed at the boundary of a bounded domain.

Coefficient and domain functions are compiled with numba so that the inner
stepping loop runs without Python overhead.  A model's ``drift(x)`` returns a
length-``dim`` array and ``diffusion(x)`` a ``(dim, noise_dim)`` array; a
domain's ``contains(x)`` returns a bool and ``boundary_distance(x)`` a
non-negative float (zero outside the domain).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numba import njit
from numba.extending import is_jitted

from .errors import ModelEvaluationError, ParameterError, RunawayPathError

DEFAULT_MAX_STEPS = 10**9
DEFAULT_REFINE_TOL = 1e-9

_CONTINUE, _HIT, _BAD = 0, 1, 2
_FIRST_CHUNK = 1024
_MAX_CHUNK = 1 << 16
_NO_UNIFORMS = np.empty(0)


def _jit(fn):
    return fn if is_jitted(fn) else njit(fn)


def _as_point(x, dim=None):
    p = np.atleast_1d(np.asarray(x, dtype=float)).copy()
    if p.ndim != 1:
        raise ParameterError(f"expected a point, got array of shape {p.shape}")
    if dim is not None and p.shape[0] != dim:
        raise ParameterError(f"point has dimension {p.shape[0]}, expected {dim}")
    return p


@dataclass(frozen=True)
class DiffusionModel:
    """Coefficients of ``dX = b(X) dt + sigma(X) dB`` with ``B`` of dimension ``noise_dim``."""

    dim: int
    drift: Callable
    diffusion: Callable
    noise_dim: int
    name: str = "custom"

    def __post_init__(self):
        if self.dim < 1 or self.noise_dim < 1:
            raise ParameterError("dim and noise_dim must be >= 1")
        object.__setattr__(self, "drift", _jit(self.drift))
        object.__setattr__(self, "diffusion", _jit(self.diffusion))

    def coefficients(self, x):
        """Evaluate (b(x), sigma(x)) and check shapes and finiteness."""
        x = _as_point(x, self.dim)
        b = np.asarray(self.drift(x), dtype=float)
        s = np.asarray(self.diffusion(x), dtype=float)
        if b.shape != (self.dim,) or s.shape != (self.dim, self.noise_dim):
            raise ModelEvaluationError(
                f"coefficient shapes {b.shape}, {s.shape} do not match "
                f"dim={self.dim}, noise_dim={self.noise_dim}", point=x)
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(s))):
            raise ModelEvaluationError(f"non-finite coefficient at x={x.tolist()}", point=x)
        return b, s

    def check_coefficients(self, domain, n_points=64, rng=None):
        """Evaluate the coefficients at interior points sampled from the domain's box."""
        for x in domain.sample_interior(n_points, rng):
            self.coefficients(x)


@dataclass(frozen=True)
class Domain:
    """Bounded open set with a membership test and distance to its boundary."""

    contains: Callable
    boundary_distance: Callable
    bounding_box: tuple
    interior_point: np.ndarray
    name: str = "custom"
    inradius: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "contains", _jit(self.contains))
        object.__setattr__(self, "boundary_distance", _jit(self.boundary_distance))
        lo, hi = (np.atleast_1d(np.asarray(v, dtype=float)) for v in self.bounding_box)
        object.__setattr__(self, "bounding_box", (lo, hi))
        x0 = _as_point(self.interior_point, lo.shape[0])
        object.__setattr__(self, "interior_point", x0)
        if not self.contains(x0):
            raise ParameterError(f"interior_point {x0.tolist()} is not inside the domain")

    @property
    def dim(self):
        return self.bounding_box[0].shape[0]

    def sample_interior(self, n, rng=None, box=None):
        """Uniform points of the domain (rejection from ``box``, default the bounding box)."""
        rng = np.random.default_rng(rng)
        lo, hi = self.bounding_box if box is None else box
        out = []
        for _ in range(1000 * max(n, 1)):
            if len(out) == n:
                break
            x = rng.uniform(lo, hi)
            if self.contains(x):
                out.append(x)
        if len(out) < n:
            raise ParameterError("could not sample interior points; box misses the domain")
        return np.array(out).reshape(n, self.dim)


def interval(a=0.0, b=1.0):
    if not b > a:
        raise ParameterError("interval needs a < b")
    a, b = float(a), float(b)

    def contains(x):
        return a < x[0] < b

    def boundary_distance(x):
        return max(0.0, min(x[0] - a, b - x[0]))

    return Domain(contains, boundary_distance, ([a], [b]), [(a + b) / 2],
                  name=f"interval({a:g},{b:g})", inradius=(b - a) / 2)


def ball(center, radius=1.0):
    c = np.asarray(center, dtype=float)
    r = float(radius)
    if r <= 0:
        raise ParameterError("ball radius must be positive")

    def contains(x):
        s = 0.0
        for k in range(x.shape[0]):
            s += (x[k] - c[k]) ** 2
        return s < r * r

    def boundary_distance(x):
        s = 0.0
        for k in range(x.shape[0]):
            s += (x[k] - c[k]) ** 2
        return max(0.0, r - math.sqrt(s))

    return Domain(contains, boundary_distance, (c - r, c + r), c.copy(),
                  name=f"ball(d={c.size},r={r:g})", inradius=r)


def box(lo, hi):
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if lo.shape != hi.shape or np.any(hi <= lo):
        raise ParameterError("box needs lo < hi componentwise")

    def contains(x):
        for k in range(x.shape[0]):
            if not lo[k] < x[k] < hi[k]:
                return False
        return True

    def boundary_distance(x):
        d = np.inf
        for k in range(x.shape[0]):
            d = min(d, x[k] - lo[k], hi[k] - x[k])
        return max(0.0, d)

    return Domain(contains, boundary_distance, (lo, hi), (lo + hi) / 2,
                  name=f"box(d={lo.size})", inradius=float(np.min(hi - lo)) / 2)


# --- single steps -----------------------------------------------------------

def euler_step(model, x, dt, z):
    """One explicit Euler-Maruyama step ``x + b(x) dt + sigma(x) z sqrt(dt)``."""
    if not dt > 0:
        raise ParameterError("dt must be positive")
    x = _as_point(x, model.dim)
    if not np.all(np.isfinite(x)):
        raise ParameterError(f"non-finite starting point {x.tolist()}")
    z = np.atleast_1d(np.asarray(z, dtype=float))
    b, s = model.coefficients(x)
    return x + b * dt + s @ z * math.sqrt(dt)


@dataclass(frozen=True)
class Interior:
    pass


@dataclass(frozen=True)
class Hit:
    fraction: float


INTERIOR = Interior()


@njit
def _bisect_fraction(contains, x, y, tol):
    lo, hi = 0.0, 1.0
    z = np.empty_like(x)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        for k in range(x.shape[0]):
            z[k] = x[k] + mid * (y[k] - x[k])
        if contains(z):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def detect_absorption(domain, x_prev, x_next, refine_tol=DEFAULT_REFINE_TOL):
    """Classify the step ``x_prev -> x_next`` as interior or as a boundary hit.

    On a hit the crossing fraction of the step is located by bisection on the
    segment until the bracket is at most ``refine_tol`` wide; the midpoint of the
    final bracket is returned.
    """
    if not refine_tol > 0:
        raise ParameterError("refine_tol must be positive")
    x_prev = _as_point(x_prev, domain.dim)
    x_next = _as_point(x_next, domain.dim)
    if not domain.contains(x_prev):
        raise ParameterError(f"x_prev={x_prev.tolist()} is not inside the domain")
    if domain.contains(x_next):
        return INTERIOR
    return Hit(float(_bisect_fraction(domain.contains, x_prev, x_next, refine_tol)))


@njit
def _advance(drift, diffusion, contains, distance, x, noise, uniforms, dt, refine_tol,
             bridge, out):
    # Steps from x (mutated in place) consuming one noise row per step.  Rows of
    # `out` receive the pre-step states.  Returns (rows written, fraction, status).
    d = x.shape[0]
    r = noise.shape[1]
    sq = math.sqrt(dt)
    y = np.empty(d)
    for i in range(noise.shape[0]):
        for k in range(d):
            out[i, k] = x[k]
        b = drift(x)
        s = diffusion(x)
        for k in range(d):
            if not math.isfinite(b[k]):
                return i, 0.0, _BAD
            for j in range(r):
                if not math.isfinite(s[k, j]):
                    return i, 0.0, _BAD
        for k in range(d):
            acc = b[k] * dt
            for j in range(r):
                acc += s[k, j] * noise[i, j] * sq
            y[k] = x[k] + acc
        if not contains(y):
            return i + 1, _bisect_fraction(contains, x, y, refine_tol), _HIT
        if bridge:
            # probability that a Brownian bridge between the two endpoints
            # touched the boundary, using the largest local variance
            var = 0.0
            for k in range(d):
                v = 0.0
                for j in range(r):
                    v += s[k, j] * s[k, j]
                var = max(var, v)
            if var > 0.0:
                p = math.exp(-2.0 * distance(x) * distance(y) / (var * dt))
                if uniforms[i] < p:
                    return i + 1, 0.5, _HIT
        for k in range(d):
            x[k] = y[k]
    return noise.shape[0], 0.0, _CONTINUE


def _run_path(model, domain, x0, dt, rng, refine_tol=DEFAULT_REFINE_TOL,
              max_steps=DEFAULT_MAX_STEPS, bridge_correction=False):
    """Simulate one path; returns (interior states, hit fraction of the last step)."""
    x = _as_point(x0, model.dim)
    chunks = []
    steps = 0
    size = _FIRST_CHUNK
    while True:
        size = min(size, max_steps - steps)
        if size <= 0:
            raise RunawayPathError(
                f"path from {np.asarray(x0).tolist()} not absorbed after {max_steps} steps")
        noise = rng.standard_normal((size, model.noise_dim))
        uniforms = rng.random(size) if bridge_correction else _NO_UNIFORMS
        out = np.empty((size, model.dim))
        n, frac, status = _advance(model.drift, model.diffusion, domain.contains,
                                   domain.boundary_distance, x, noise, uniforms, dt,
                                   refine_tol, bridge_correction, out)
        if status == _BAD:
            raise ModelEvaluationError(
                f"non-finite coefficient at x={out[n].tolist()}", point=out[n].copy())
        chunks.append(out[:n])
        steps += n
        if status == _HIT:
            states = chunks[0] if len(chunks) == 1 else np.concatenate(chunks)
            return states, float(frac)
        size = min(2 * size, _MAX_CHUNK)


@dataclass(frozen=True)
class AbsorbedPath:
    states: np.ndarray
    dt: float
    absorption_time: float
    hit_fraction: float

    @property
    def weights(self):
        """Occupation time attributed to each stored state."""
        w = np.full(len(self.states), self.dt)
        w[-1] = self.hit_fraction * self.dt
        return w


def _check_start(model, domain, x0, dt):
    if not dt > 0:
        raise ParameterError("dt must be positive")
    if model.dim != domain.dim:
        raise ParameterError(f"model dim {model.dim} != domain dim {domain.dim}")
    x0 = _as_point(x0, model.dim)
    if not domain.contains(x0):
        raise ParameterError(f"start {x0.tolist()} is not inside the domain")
    return x0


def simulate_until_absorption(model, domain, x0, dt, rng, *, max_steps=DEFAULT_MAX_STEPS,
                              refine_tol=DEFAULT_REFINE_TOL, bridge_correction=False):
    """Run Euler-Maruyama from ``x0`` until the first step that leaves the domain."""
    x0 = _check_start(model, domain, x0, dt)
    states, frac = _run_path(model, domain, x0, dt, rng, refine_tol, max_steps,
                             bridge_correction)
    tau = (len(states) - 1) * dt + frac * dt
    return AbsorbedPath(states, dt, tau, frac)


def estimate_green_mc(model, domain, x, f, n_samples, dt, rng, **path_kwargs):
    """Monte Carlo estimate of ``E_x[int_0^tau f(X_s) ds]`` with its standard error.

    ``f`` is vectorised: it maps an ``(n, dim)`` array of states to ``n`` values.
    """
    if n_samples < 2:
        raise ParameterError("n_samples must be >= 2")
    x = _check_start(model, domain, x, dt)
    values = np.empty(n_samples)
    for i in range(n_samples):
        path = simulate_until_absorption(model, domain, x, dt, rng, **path_kwargs)
        values[i] = np.asarray(f(path.states), dtype=float) @ path.weights
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(n_samples))


def absorption_times(model, domain, x0, dt, n_samples, rng, **path_kwargs):
    x0 = _check_start(model, domain, x0, dt)
    return np.array([simulate_until_absorption(model, domain, x0, dt, rng,
                                               **path_kwargs).absorption_time
                     for _ in range(n_samples)])


def survival_curve(times, t_grid):
    """Empirical ``P(t < tau)`` on ``t_grid`` from a sample of absorption times."""
    times = np.sort(np.asarray(times, dtype=float))
    return 1.0 - np.searchsorted(times, np.asarray(t_grid, dtype=float), side="right") / len(times)


def fit_survival_rate(times, t_min, t_max=None, min_count=50):
    """Exponential decay rate of the empirical survival curve on ``[t_min, t_max]``.

    Fits ``log P(t < tau)`` linearly in ``t``; grid points with fewer than
    ``min_count`` survivors are dropped.  Returns the negated slope.
    """
    times = np.asarray(times, dtype=float)
    if t_max is None:
        t_max = np.sort(times)[-min_count]
    grid = np.linspace(t_min, t_max, 50)
    surv = survival_curve(times, grid)
    keep = surv * len(times) >= min_count
    if keep.sum() < 3:
        raise ParameterError("too few survivors in the fitting window")
    slope = np.polyfit(grid[keep], np.log(surv[keep]), 1)[0]
    return float(-slope)

