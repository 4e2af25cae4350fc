"""Reference quasi-stationary distributions and distances for the benchmark problems.

Two closed forms are available: Brownian motion killed outside (0, 1) and
Brownian motion killed outside the unit disk.  ``fd_eigensolver`` computes the
same objects independently from a finite-difference generator, for any 1-D
model or an isotropic model on a disk.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ModelEvaluationError, ParameterError
from .green_lab import AbsorbingChain, spectral
from .measures import DiscreteMeasure


@dataclass(frozen=True)
class ReferenceQSD:
    """Closed-form QSD as a law of one real coordinate.

    For the disk the coordinate is the distance to the centre; ``projection``
    maps an array of states to that coordinate.
    """

    name: str
    lambda0: float
    cdf: Callable
    density: Callable
    provenance: str
    support: tuple = (0.0, 1.0)
    projection: Callable | None = None


def reference_bm_interval():
    return ReferenceQSD(
        name="bm-interval",
        lambda0=math.pi ** 2 / 2,
        cdf=lambda x: (1.0 - np.cos(np.pi * np.clip(x, 0.0, 1.0))) / 2.0,
        density=lambda x: np.where((np.asarray(x) > 0) & (np.asarray(x) < 1),
                                   np.pi / 2 * np.sin(np.pi * np.asarray(x)), 0.0),
        provenance="principal Dirichlet eigenfunction of -(1/2) d^2/dx^2 on (0,1)",
    )


# --- Bessel functions by power series -----------------------------------------

_SERIES_TERMS = 40


def bessel_j0(x):
    x = np.asarray(x, dtype=float)
    q = -(x / 2.0) ** 2
    term = np.ones_like(x)
    total = term.copy()
    for k in range(1, _SERIES_TERMS):
        term = term * q / (k * k)
        total = total + term
    return total


def bessel_j1(x):
    x = np.asarray(x, dtype=float)
    q = -(x / 2.0) ** 2
    term = x / 2.0
    total = term.copy()
    for k in range(1, _SERIES_TERMS):
        term = term * q / (k * (k + 1))
        total = total + term
    return total


def first_zero_j0(tol=1e-12):
    """First positive zero of J0 by bisection on [2, 3]."""
    lo, hi = 2.0, 3.0
    flo = float(bessel_j0(lo))
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = float(bessel_j0(mid))
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def radial_norm(states):
    s = np.asarray(states, dtype=float)
    return np.linalg.norm(s.reshape(len(s), -1), axis=1)


def reference_bm_disk():
    j0 = first_zero_j0()
    norm = float(bessel_j1(j0))

    def cdf(r):
        r = np.clip(np.asarray(r, dtype=float), 0.0, 1.0)
        return r * bessel_j1(j0 * r) / norm

    def density(r):
        r = np.asarray(r, dtype=float)
        inside = (r > 0) & (r < 1)
        return np.where(inside, j0 * r * bessel_j0(j0 * r) / norm, 0.0)

    return ReferenceQSD(
        name="bm-disk",
        lambda0=j0 ** 2 / 2,
        cdf=cdf,
        density=density,
        provenance=f"J0 series with first zero j0={j0:.12f} found by bisection; radial law",
        projection=radial_norm,
    )


REFERENCES = {"bm-interval": reference_bm_interval, "bm-disk": reference_bm_disk}


def get_reference(name):
    try:
        return REFERENCES[name]()
    except KeyError:
        raise ParameterError(f"no reference for {name!r}; choose from {sorted(REFERENCES)}") from None


# --- finite differences -------------------------------------------------------

@dataclass(frozen=True)
class FdSolution:
    lambda0: float
    grid: np.ndarray
    density: np.ndarray
    upwind: bool

    def __iter__(self):
        # unpacks as (lambda0, grid, density)
        return iter((self.lambda0, self.grid, self.density))


def _tridiagonal_chain(down, up):
    Q = np.diag(up[:-1], 1) + np.diag(down[1:], -1) - np.diag(up + down)
    return AbsorbingChain(Q)


def _interval_generator(model, a, b, grid_size):
    h = (b - a) / grid_size
    x = a + h * np.arange(1, grid_size)
    drift = np.empty(len(x))
    var = np.empty(len(x))
    for i, xi in enumerate(x):
        bx, sx = model.coefficients(np.array([xi]))
        drift[i] = bx[0]
        var[i] = float(sx[0] @ sx[0])
    if np.any(var <= 0):
        bad = x[np.argmax(var <= 0)]
        raise ModelEvaluationError("diffusion coefficient vanishes on the grid", point=[bad])
    up = var / (2 * h * h) + drift / (2 * h)
    down = var / (2 * h * h) - drift / (2 * h)
    upwind = bool(np.any(up < 0) or np.any(down < 0))
    if upwind:
        up = var / (2 * h * h) + np.maximum(drift, 0.0) / h
        down = var / (2 * h * h) + np.maximum(-drift, 0.0) / h
    return x, h, up, down, upwind


def _radial_generator(model, domain, grid_size):
    c = np.asarray(domain.interior_point, dtype=float)
    R = float(domain.inradius)
    d = c.size
    rng = np.random.default_rng(0)
    probes = c + R * 0.9 * (rng.random((16, d)) - 0.5)
    _, s0 = model.coefficients(c)
    scale = float(s0[0, 0])
    for p in probes:
        bx, sx = model.coefficients(p)
        if np.any(bx != 0) or not np.allclose(sx, scale * np.eye(d)):
            raise ParameterError("radial solver needs zero drift and constant isotropic diffusion")
    if scale == 0:
        raise ModelEvaluationError("diffusion coefficient vanishes", point=c)
    v = scale * scale
    h = R / grid_size
    r = h * np.arange(grid_size)
    i = np.arange(grid_size, dtype=float)
    up = np.empty(grid_size)
    down = np.zeros(grid_size)
    up[0] = d * v / (h * h)
    up[1:] = v / 2 * (1 / h ** 2 + (d - 1) / (2 * i[1:] * h ** 2))
    down[1:] = v / 2 * (1 / h ** 2 - (d - 1) / (2 * i[1:] * h ** 2))
    return r, h, up, down


def fd_eigensolver(model, domain, grid_size):
    """Principal eigenvalue and QSD density from a finite-difference generator.

    A 1-D model on an interval uses central differences, switching to upwind
    drift terms when central ones would give a negative off-diagonal rate.  A
    ball uses the radial part of the generator; the model must then have zero
    drift and constant diffusion ``s I``.  The grid generator is an absorbing
    chain (boundary nodes removed), so its killing rate is the eigenvalue and
    its QSD, divided by the mesh width, the density on the nodes.  For a ball
    the density is radial and the origin node is left out of the output grid.
    """
    if int(grid_size) < 16:
        raise ParameterError("grid_size must be >= 16")
    grid_size = int(grid_size)
    if domain.name.startswith("interval"):
        (a,), (b,) = domain.bounding_box
        x, h, up, down, upwind = _interval_generator(model, a, b, grid_size)
        # first/last nodes: the outward rate is absorption
        chain = _tridiagonal_chain(down, up)
    elif domain.name.startswith("ball"):
        x, h, up, down = _radial_generator(model, domain, grid_size)
        upwind = False
        chain = _tridiagonal_chain(down, up)
    else:
        raise ParameterError(f"fd_eigensolver supports intervals and balls, not {domain.name}")
    sp = spectral(chain)
    density = sp.alpha / h
    if x[0] == 0.0:
        # the origin node has no radial cell of width h; report r > 0 only
        x, density = x[1:], density[1:]
    return FdSolution(sp.lambda0, x, density, upwind)


# --- distances ----------------------------------------------------------------

def ks_distance(empirical, cdf, projection=None):
    """Kolmogorov-Smirnov distance between a discrete measure and a reference CDF.

    Atoms are mapped to one coordinate (``projection`` or the first
    component); ties are merged, and both one-sided limits of the empirical
    CDF are compared at every atom.
    """
    if not isinstance(empirical, DiscreteMeasure):
        empirical = DiscreteMeasure.from_samples(empirical)
    xs = empirical.coordinate(projection)
    if xs.size == 0:
        raise ParameterError("empirical measure is empty")
    # in place where possible: occupation measures can hold 1e8 atoms
    order = np.argsort(xs)
    xs = xs[order]
    cum = empirical.masses[order]
    del order
    np.cumsum(cum, out=cum)
    last = np.empty(len(xs), dtype=bool)
    np.not_equal(xs[1:], xs[:-1], out=last[:-1])
    last[-1] = True
    if not last.all():
        xs, cum = xs[last], cum[last]
    del last
    cum /= cum[-1]
    g = np.asarray(cdf(xs), dtype=float)
    upper = float(np.max(np.abs(cum - g)))
    lower = max(abs(float(g[0])), float(np.max(np.abs(cum[:-1] - g[1:]), initial=0.0)))
    return min(1.0, max(upper, lower))


def write_reference_csv(ref, path, n_points=201):
    """Write ``x, density, cdf`` on a uniform grid over the support."""
    lo, hi = ref.support
    xs = np.linspace(lo, hi, n_points)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "density", "cdf"])
        for x, dens, c in zip(xs, ref.density(xs), ref.cdf(xs)):
            w.writerow([f"{x:.10g}", f"{dens:.12g}", f"{c:.12g}"])
    return path
