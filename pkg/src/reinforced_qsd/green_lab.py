"""Exact finite-state laboratory for absorbed continuous-time Markov chains.

A chain is given by its sub-generator ``Q`` on the transient states; the row
deficits are the absorption rates.  On a finite space the Green operator is the
fundamental matrix ``A = (-Q)^{-1}``, whose normalised powers and normalised
exponential flow both converge to the quasi-stationary distribution.  This
module computes those objects exactly, checks the decay rates they must obey,
and simulates the reinforced (occupation-resampled) chain without any
discretisation error.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as la
from numba import njit
from scipy.integrate import IntegrationWarning, quad, solve_ivp
from scipy.sparse.csgraph import connected_components
from scipy.special import gammaincc, gammaln

from .errors import ChainError, HorizonError, NumericalError, ParameterError
from .measures import OccupationMeasure
from .reinforced import ReinforcedTrace

COND_LIMIT = 1e8
_SIGN_TOL = 1e-12


def tv_distance(p, q):
    """Total variation between measures on a finite set: half the l1 distance."""
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum(axis=-1))


class AbsorbingChain:
    """Sub-generator of a continuous-time chain absorbed at an extra state."""

    def __init__(self, Q):
        Q = np.array(Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or Q.shape[0] == 0:
            raise ChainError(f"Q must be a non-empty square matrix, got shape {Q.shape}")
        off = Q - np.diag(np.diag(Q))
        if np.any(off < -_SIGN_TOL):
            raise ChainError("off-diagonal rates must be non-negative")
        scale = max(1.0, float(np.abs(Q).max()))
        if np.any(Q.sum(axis=1) > _SIGN_TOL * scale):
            raise ChainError("row sums of Q must be <= 0")
        self.Q = Q
        self.absorb_rate = np.clip(-Q.sum(axis=1), 0.0, None)
        if not np.any(self.absorb_rate > 0):
            raise ChainError("no state can be absorbed")

    @property
    def n_states(self):
        return self.Q.shape[0]

    @cached_property
    def is_irreducible(self):
        adj = (self.Q - np.diag(np.diag(self.Q))) > 0
        n_comp, _ = connected_components(adj, directed=True, connection="strong")
        return n_comp == 1

    @cached_property
    def _eig(self):
        w, V = la.eig(self.Q)
        cond = np.linalg.cond(V)
        if not np.isfinite(cond) or cond > COND_LIMIT:
            return w, None, None, cond
        return w, V, np.linalg.inv(V), cond

    @cached_property
    def _lu(self):
        return la.lu_factor(-self.Q)

    @cached_property
    def _lu_t(self):
        return la.lu_factor(-self.Q.T)

    def apply_green(self, f):
        """``A f`` for a column vector (or matrix of columns) ``f``."""
        return la.lu_solve(self._lu, np.asarray(f, dtype=float))

    def green_left(self, mu):
        """``mu A`` for a row vector ``mu``."""
        return la.lu_solve(self._lu_t, np.asarray(mu, dtype=float))

    def __repr__(self):
        return f"AbsorbingChain(n_states={self.n_states})"


def random_chain(n_states, rng, max_tries=1000):
    """Dense random chain: off-diagonal rates U[0,1], absorption rates U[0.1,1].

    Resamples until the transient part is irreducible.
    """
    for _ in range(max_tries):
        off = rng.uniform(0.0, 1.0, size=(n_states, n_states))
        np.fill_diagonal(off, 0.0)
        kill = rng.uniform(0.1, 1.0, size=n_states)
        chain = AbsorbingChain(off - np.diag(off.sum(axis=1) + kill))
        if chain.is_irreducible:
            return chain
    raise ChainError("could not draw an irreducible chain")


# --- spectral objects ---------------------------------------------------------

@dataclass(frozen=True)
class SpectralData:
    lambda0: float
    alpha: np.ndarray
    eta: np.ndarray
    gamma: float


def spectral(chain, allow_reducible=False):
    """Absorption rate, QSD, survival eigenvector and spectral gap of ``chain``.

    ``lambda0`` is minus the eigenvalue of ``Q`` with the largest real part,
    ``alpha`` the matching left eigenvector normalised to a probability vector,
    ``eta`` the right eigenvector with ``alpha @ eta == 1`` and ``gamma`` the gap
    between the largest and the second largest real part.
    """
    if not allow_reducible and not chain.is_irreducible:
        raise ChainError("chain is reducible; the quasi-stationary distribution may not be unique")
    Q = chain.Q
    w = la.eigvals(Q)
    order = np.argsort(-w.real)
    top = w[order[0]]
    scale = max(1.0, float(np.abs(w).max()))
    if len(w) > 1 and w[order[1]].real > top.real - 1e-9 * scale:
        raise NumericalError("leading eigenvalue of Q is not simple")
    lam = -float(top.real)
    # left/right eigenvectors from the null spaces of (Q + lambda0 I)
    alpha = _null_vector((Q + lam * np.eye(len(Q))).T)
    eta = _null_vector(Q + lam * np.eye(len(Q)))
    alpha = alpha / alpha.sum()
    eta = eta / (alpha @ eta)
    if alpha.min() < -1e-10 * alpha.max() or eta.min() < -1e-10 * eta.max():
        raise NumericalError("leading eigenvectors are not non-negative")
    alpha = np.clip(alpha, 0.0, None)
    alpha /= alpha.sum()
    eta = np.clip(eta, 0.0, None)
    eta /= alpha @ eta
    gamma = float(top.real - w[order[1]].real) if len(w) > 1 else math.inf
    return SpectralData(lam, alpha, eta, gamma)


def _null_vector(M):
    _, s, vh = np.linalg.svd(M)
    v = vh[-1].real
    return v if v.sum() >= 0 else -v


def green(chain):
    """Fundamental matrix ``A = (-Q)^{-1}``: ``(A f)(x)`` is the expected integral of f until absorption."""
    if np.linalg.cond(chain.Q) > 1e14:
        raise ChainError("-Q is singular: absorption is not certain")
    A = chain.apply_green(np.eye(chain.n_states))
    if np.abs(A @ -chain.Q - np.eye(chain.n_states)).max() > 1e-8:
        raise NumericalError("inverse of -Q is inaccurate")
    return A


def semigroup(chain, t):
    """Sub-Markov transition matrix ``P_t = exp(t Q)``."""
    if t < 0:
        raise ParameterError("t must be non-negative")
    if t == 0:
        return np.eye(chain.n_states)
    w, V, Vinv, _ = chain._eig
    if V is not None:
        P = ((V * np.exp(w * t)) @ Vinv).real
    else:
        P = la.expm(t * chain.Q)
    return np.clip(P, 0.0, 1.0)


def _scaled_semigroup(chain, t, lam):
    # exp(lambda0 t) P_t, bounded for all t
    w, V, Vinv, _ = chain._eig
    if V is not None:
        return ((V * np.exp((w + lam) * t)) @ Vinv).real
    return la.expm(t * (chain.Q + lam * np.eye(chain.n_states)))


def conditional_law(chain, mu, t):
    """Law at time ``t`` conditioned on survival, started from ``mu``."""
    mu = _probability(mu, chain.n_states)
    p = mu @ semigroup(chain, t)
    s = p.sum()
    if not s > 1e-300:
        raise HorizonError(f"survival probability underflows at t={t}")
    return p / s


def _probability(mu, n):
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (n,) or np.any(mu < 0) or abs(mu.sum() - 1.0) > 1e-9:
        raise ParameterError("mu must be a probability vector over the chain's states")
    return mu


# --- mixing conditions --------------------------------------------------------

@dataclass(frozen=True)
class MixingReport:
    t0: float
    c1: float
    nu: np.ndarray | None
    c2: float
    satisfied: bool
    message: str = ""


def check_A1_A2(chain, t0, n_grid=400):
    """Constants of the two mixing conditions at time ``t0``.

    ``c1`` is the total mass of the column-wise minimum of the conditioned
    kernel at ``t0`` and ``nu`` that minimum normalised.  ``c2`` is the
    smallest ratio of the survival probability from ``nu`` to the survival
    probability from a point, over a time grid and the long-time limit.
    """
    if not t0 > 0:
        raise ParameterError("t0 must be positive")
    P = semigroup(chain, t0)
    surv = P.sum(axis=1)
    if np.any(surv <= 0):
        return MixingReport(t0, 0.0, None, 0.0, False, "some state is absorbed before t0 surely")
    K = P / surv[:, None]
    floor = K.min(axis=0)
    c1 = float(floor.sum())
    if c1 <= 1e-14:
        return MixingReport(t0, 0.0, None, 0.0, False, f"kernel at t0={t0} has no common minorant")
    nu = floor / c1
    sp = spectral(chain, allow_reducible=True)
    horizon = t0 + (30.0 / sp.gamma if math.isfinite(sp.gamma) else 0.0)
    c2 = math.inf
    for t in np.linspace(0.0, horizon, n_grid):
        S = _scaled_semigroup(chain, t, sp.lambda0).sum(axis=1)
        c2 = min(c2, float((nu @ S) / S.max()))
    pos = sp.eta > 0
    if pos.any():
        c2 = min(c2, float((nu @ sp.eta) / sp.eta[pos].max()))
    c2 = min(c2, 1.0)
    return MixingReport(t0, min(c1, 1.0), nu, c2, c2 > 0)


# --- powers of the Green operator -------------------------------------------

def green_power(chain, mu, f, n, rtol=1e-6):
    """``mu A^n f`` by repeated solves, cross-checked against its integral form.

    The integral form is ``int_0^inf u^(n-1)/(n-1)! mu P_u f du``; it is
    evaluated by adaptive quadrature on ``[0, U]`` with ``U`` chosen so that the
    neglected tail is below 1e-12 (relative to the value when smaller than one).
    Disagreement beyond ``rtol`` raises ``NumericalError``.
    """
    value, integral, scale = green_power_routes(chain, mu, f, n)
    if abs(integral - value) > rtol * scale:
        raise NumericalError(
            f"matrix value {value!r} and integral {integral!r} disagree for n={n}")
    return value


def green_power_routes(chain, mu, f, n):
    """``(matrix value, integral value, scale)`` where scale is ``|mu| A^n |f|``."""
    if n < 1:
        raise ParameterError("n must be >= 1")
    mu = np.asarray(mu, dtype=float)
    f = np.asarray(f, dtype=float)
    v, va = f.copy(), np.abs(f)
    for _ in range(n):
        v = chain.apply_green(v)
        va = chain.apply_green(va)
    value = float(mu @ v)
    scale = max(float(np.abs(mu) @ va), 1e-300)
    integral = green_power_integral(chain, mu, f, n, tail_tol=1e-12 * min(1.0, scale))
    return value, integral, scale


def green_power_integral(chain, mu, f, n, tail_tol=1e-12):
    """Quadrature of ``int_0^U u^(n-1)/(n-1)! mu P_u f du``."""
    sp = spectral(chain, allow_reducible=True)
    lam = sp.lambda0
    w, V, Vinv, _ = chain._eig
    if V is not None:
        c = (mu @ V) * (Vinv @ f)
        bound = float(np.abs(c).sum())

        def mpf(u):
            return float((c * np.exp(w * u)).sum().real)
    else:
        bound = float(np.abs(mu).sum() * np.abs(f).max()) * float(
            np.abs(_scaled_semigroup(chain, 0.0, lam)).sum(axis=1).max()) * 10

        def mpf(u):
            return float(mu @ la.expm(u * chain.Q) @ f)

    # tail: bound * lam^-n * Q(n, lam U) where Q is the regularised upper gamma
    U = max(1.0, n / lam)
    while bound * lam ** (-n) * gammaincc(n, lam * U) > tail_tol:
        U *= 1.5
        if U > 1e8:
            raise NumericalError("could not bound the integral tail")
    logfact = gammaln(n)

    def integrand(u):
        if u == 0.0:
            return mpf(0.0) if n == 1 else 0.0
        return math.exp((n - 1) * math.log(u) - logfact) * mpf(u)

    # breakpoints around the fast modes and the Gamma peak
    fast = 1.0 / max(1.0, float(np.abs(w).max()))
    peak = (n - 1) / lam
    pts = sorted({p for p in (fast, 10 * fast, 0.5 * peak, peak, 2 * peak) if 0 < p < U})
    edges = [0.0, *pts, U]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        with warnings.catch_warnings():
            warnings.simplefilter("error", IntegrationWarning)
            try:
                val, _ = quad(integrand, a, b, limit=400, epsabs=0.0, epsrel=1e-11)
            except IntegrationWarning as exc:
                raise NumericalError(f"quadrature did not converge on [{a:.4g}, {b:.4g}]: {exc}") \
                    from None
        total += val
    return total


@dataclass(frozen=True)
class RateReport:
    """Decay of a TV distance along a grid (powers ``n`` or flow times ``t``)."""

    grid: np.ndarray
    tv: np.ndarray
    fit_window: tuple
    fitted_rate: float
    predicted_rate: float
    envelope_constant: float
    passed: bool
    note: str = ""


def _fit_rate(grid, tv, window, predicted, slack=0.01):
    lo, hi = window
    sel = (grid >= lo) & (grid <= hi) & (tv > 1e-300)
    note = ""
    if sel.sum() < (window_size := int(((grid >= lo) & (grid <= hi)).sum())):
        note = f"distances underflow: fit window reduced to {int(sel.sum())} of {window_size} points"
    if sel.sum() < 3:
        return math.nan, True, note or "fit window too short", sel
    slope = float(np.polyfit(grid[sel], np.log(tv[sel]), 1)[0])
    return slope, slope <= predicted + slack, note, sel


def normalized_power_deviations(chain, mu, n_max, sp=None):
    """``mu A^n / mu A^n 1 - alpha`` for n = 0..n_max, as rows.

    The deviation ``d`` from the QSD is propagated directly,
    ``d -> (d A - alpha (d A 1)) / (1/lambda0 + d A 1)``, which is algebraically
    the normalised power iteration but keeps full relative precision once the
    deviation is far below machine epsilon.
    """
    sp = sp or spectral(chain)
    d = np.asarray(mu, dtype=float) - sp.alpha
    out = [d]
    for _ in range(n_max):
        dA = chain.green_left(d)
        m = dA.sum()
        d = (dA - sp.alpha * m) / (1.0 / sp.lambda0 + m)
        out.append(d)
    return np.array(out)


def verify_powers_bound(chain, mu, n_max=30, fit_window=None, slack=0.01):
    """Check that ``TV(mu A^n / mu A^n 1, alpha)`` decays at least like ``(lambda0/(lambda0+gamma))^n``.

    The log-distance is fitted linearly over ``fit_window`` (default: the last
    half of ``1..n_max``) and the slope must not exceed the predicted log-ratio
    by more than ``slack``.
    """
    if n_max < 5:
        raise ParameterError("n_max must be >= 5")
    mu = _probability(mu, chain.n_states)
    sp = spectral(chain)
    dev = normalized_power_deviations(chain, mu, n_max, sp)
    n = np.arange(1, n_max + 1)
    tv = 0.5 * np.abs(dev[1:]).sum(axis=1)
    window = fit_window or (math.ceil(n_max / 2), n_max)
    ratio = sp.lambda0 / (sp.lambda0 + sp.gamma)
    predicted = math.log(ratio) if ratio > 0 else -math.inf
    slope, ok, note, _ = _fit_rate(n.astype(float), tv, window, predicted, slack)
    pos = tv > 0
    if ratio > 0 and pos.any():
        # log space: ratio**n underflows long before tv does
        env = float(np.exp(np.max(np.log(tv[pos]) - n[pos] * math.log(ratio))))
    else:
        env = 0.0 if ratio > 0 else math.nan
    return RateReport(n, tv, window, slope, predicted, env, ok, note)


def _a_modes(chain, sp):
    # eigen-decomposition of A from that of Q: same vectors, eigenvalues -1/w
    w, V, Vinv, cond = chain._eig
    if V is None:
        return None
    a = -1.0 / w
    top = int(np.argmax(a.real))
    return a, V, Vinv, top


def normalized_flow(chain, nu, times, sp=None):
    """Closed form ``nu e^{tA} / nu e^{tA} 1`` at each time (rows)."""
    sp = sp or spectral(chain, allow_reducible=True)
    nu = np.asarray(nu, dtype=float)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    modes = _a_modes(chain, sp)
    if modes is None:
        A = green(chain)
        shift = A - np.eye(chain.n_states) / sp.lambda0
        rows = np.array([nu @ la.expm(t * shift) for t in times])
        return rows / rows.sum(axis=1, keepdims=True)
    a, V, Vinv, top = modes
    c = nu @ V
    growth = np.exp(np.outer(times, a - a[top]))
    rows = ((growth * c) @ Vinv).real
    return rows / rows.sum(axis=1, keepdims=True)


def normalized_flow_deviation(chain, nu, times, sp=None):
    """``nu e^{tA} / nu e^{tA} 1 - alpha`` computed mode by mode (no cancellation floor)."""
    sp = sp or spectral(chain)
    modes = _a_modes(chain, sp)
    if modes is None:
        return normalized_flow(chain, nu, times, sp) - sp.alpha
    a, V, Vinv, top = modes
    times = np.atleast_1d(np.asarray(times, dtype=float))
    c = np.asarray(nu, dtype=float) @ V
    mass = Vinv.sum(axis=1)
    others = np.arange(len(a)) != top
    proj = Vinv[others] - np.outer(mass[others], sp.alpha)
    growth = np.exp(np.outer(times, a[others] - a[top])) * c[others]
    num = growth @ proj
    den = c[top] * mass[top] + growth @ mass[others]
    return (num / den[:, None]).real


def verify_exp_flow_bound(chain, mu, t_grid=None, slack=0.01):
    """Check that ``TV(mu e^{tA} / mu e^{tA} 1, alpha)`` decays at rate ``gamma/(lambda0 (lambda0+gamma))``.

    The default grid spans 25 predicted decay lengths; the log-distance is
    fitted over the last half of the grid.
    """
    mu = _probability(mu, chain.n_states)
    sp = spectral(chain)
    rate = (sp.gamma / (sp.lambda0 * (sp.lambda0 + sp.gamma)) if math.isfinite(sp.gamma)
            else 1.0 / sp.lambda0)
    if t_grid is None:
        t_grid = np.linspace(0.0, 25.0 / rate, 51)[1:]
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid <= 0) or np.any(np.diff(t_grid) <= 0):
        raise ParameterError("t_grid must be positive and increasing")
    tv = 0.5 * np.abs(normalized_flow_deviation(chain, mu, t_grid, sp)).sum(axis=1)
    window = (t_grid[len(t_grid) // 2], t_grid[-1])
    slope, ok, note, _ = _fit_rate(t_grid, tv, window, -rate, slack)
    env = float(np.max(tv * np.exp(rate * t_grid)))
    return RateReport(t_grid, tv, window, slope, -rate, env, ok, note)


# --- the normalised flow as an ODE ------------------------------------------

@dataclass(frozen=True)
class FlowState:
    measure: np.ndarray
    time: float


@dataclass
class FlowTrajectory:
    states: list
    closed_form: np.ndarray
    max_tv_error: float

    @property
    def times(self):
        return np.array([s.time for s in self.states])

    @property
    def measures(self):
        return np.array([s.measure for s in self.states])


def flow_vector_field(A, nu):
    """``F(nu) = nu A - (nu A 1) nu``."""
    nuA = nu @ A
    return nuA - nuA.sum() * nu


def flow_ode(chain, nu, T, tol=1e-10, n_out=None):
    """Integrate ``dphi/dt = F(phi)`` from ``nu`` with an adaptive embedded Runge-Kutta scheme.

    Every accepted step (or ``n_out`` evenly spaced times) is compared with
    the closed form ``nu e^{tA} / nu e^{tA} 1``; the largest TV gap is kept.
    """
    nu = _probability(nu, chain.n_states)
    if not T > 0:
        raise ParameterError("T must be positive")
    A = green(chain)
    t_eval = None if n_out is None else np.linspace(0.0, T, n_out)
    sol = solve_ivp(lambda t, y: flow_vector_field(A, y), (0.0, T), nu, method="DOP853",
                    rtol=tol, atol=tol, t_eval=t_eval)
    if sol.status != 0:
        raise NumericalError(f"flow integration failed: {sol.message}")
    exact = normalized_flow(chain, nu, sol.t)
    gaps = 0.5 * np.abs(sol.y.T - exact).sum(axis=1)
    states = [FlowState(y, float(t)) for t, y in zip(sol.t, sol.y.T)]
    return FlowTrajectory(states, exact, float(gaps.max()))


# --- the reinforced chain ---------------------------------------------------

@njit
def _reinforced_chain_kernel(rate, jump_cdf, start, n_cycles, seed, cap):
    np.random.seed(seed)
    n = rate.shape[0]
    states = np.empty(cap, np.int64)
    cum = np.empty(cap)
    theta = np.empty(n_cycles)
    ends = np.empty(n_cycles, np.int64)
    points = np.empty(n_cycles, np.int64)
    m = 0
    total = 0.0
    x = start
    for k in range(n_cycles):
        while True:
            if m == cap:
                cap *= 2
                s2 = np.empty(cap, np.int64)
                c2 = np.empty(cap)
                s2[:m] = states[:m]
                c2[:m] = cum[:m]
                states, cum = s2, c2
            total += np.random.exponential(1.0 / rate[x])
            states[m] = x
            cum[m] = total
            m += 1
            j = np.searchsorted(jump_cdf[x], np.random.random(), side="right")
            if j >= n:
                break
            x = j
        theta[k] = total
        ends[k] = m
        i = np.searchsorted(cum[:m], np.random.random() * total, side="right")
        x = states[min(i, m - 1)]
        points[k] = x
    return states[:m].copy(), cum[:m].copy(), theta, ends, points


def reinforced_chain(chain, n_cycles, rng, start=0):
    """Exact simulation of the reinforced chain for ``n_cycles`` absorptions.

    Holding times are exponential and jumps categorical, so occupation weights
    are exact holding times.  Restart states are drawn from the occupation
    measure by one uniform and a binary search on its prefix sums.
    """
    if n_cycles < 1:
        raise ParameterError("n_cycles must be >= 1")
    rate, jump_cdf = _jump_table(chain)
    seed = int(rng.integers(0, 2**32 - 1))
    states, cum, theta, ends, points = _reinforced_chain_kernel(
        rate, jump_cdf, int(start), int(n_cycles), seed, max(1024, 4 * n_cycles))
    occ = OccupationMeasure.from_cumulative(states, cum)
    return ReinforcedTrace(theta, points, occ, ends)


def _jump_table(chain):
    Q = chain.Q
    rate = -np.diag(Q).copy()
    if np.any(rate <= 0):
        raise ChainError("every state needs a positive total exit rate")
    probs = np.clip(Q, 0.0, None)
    np.fill_diagonal(probs, 0.0)
    probs = np.column_stack([probs, chain.absorb_rate]) / rate[:, None]
    jump_cdf = np.cumsum(probs, axis=1)
    jump_cdf[:, -1] = 1.0
    return rate, jump_cdf


@njit
def _absorption_kernel(rate, jump_cdf, start, n_samples, seed):
    np.random.seed(seed)
    n = rate.shape[0]
    out = np.empty(n_samples)
    for k in range(n_samples):
        x = start
        t = 0.0
        while True:
            t += np.random.exponential(1.0 / rate[x])
            j = np.searchsorted(jump_cdf[x], np.random.random(), side="right")
            if j >= n:
                break
            x = j
        out[k] = t
    return out


def chain_absorption_times(chain, start, n_samples, rng):
    """Exact absorption times of ``n_samples`` independent runs from state ``start``."""
    rate, jump_cdf = _jump_table(chain)
    return _absorption_kernel(rate, jump_cdf, int(start), int(n_samples),
                              int(rng.integers(0, 2**32 - 1)))


# --- asymptotic pseudo-trajectory check --------------------------------------

@dataclass(frozen=True)
class AptReport:
    window_starts: np.ndarray
    sup_distances: np.ndarray
    T: float
    tau_end: float

    @property
    def final(self):
        return float(self.sup_distances[-1])

    @property
    def early_median(self):
        q = max(1, len(self.sup_distances) // 4)
        return float(np.median(self.sup_distances[:q]))

    @property
    def late_median(self):
        q = max(1, len(self.sup_distances) // 4)
        return float(np.median(self.sup_distances[-q:]))

    @property
    def decreasing(self):
        return self.late_median < self.early_median


def empirical_sequence(points, n_states):
    """Rows ``eta_n`` = empirical law of the first n points, n = 1..N."""
    pts = np.asarray(points, dtype=np.int64)
    counts = np.zeros((len(pts), n_states))
    counts[np.arange(len(pts)), pts] = 1.0
    np.cumsum(counts, axis=0, out=counts)
    return counts / np.arange(1, len(pts) + 1)[:, None]


def apt_clock(etas, h):
    """Times ``tau_n`` with ``tau_1 = 0`` and steps ``1 / ((n+1) eta_n A 1)``."""
    n = np.arange(1, len(etas))
    steps = 1.0 / ((n + 1) * (etas[:-1] @ h))
    return np.concatenate([[0.0], np.cumsum(steps)])


def apt_distances(etas, chain, T, t_grid=None, n_windows=40, max_points=4000):
    """Sup over ``s <= T`` of ``TV(eta~_{t+s}, flow_s(eta~_t))`` for each window start ``t``.

    ``eta~`` is the linear interpolation of ``etas`` on the ``tau`` clock.
    """
    if not T > 0:
        raise ParameterError("T must be positive")
    etas = np.asarray(etas, dtype=float)
    h = chain.apply_green(np.ones(chain.n_states))
    tau = apt_clock(etas, h)
    if t_grid is None:
        if tau[-1] <= T:
            raise HorizonError(f"trace covers tau in [0, {tau[-1]:.3g}], shorter than T={T}")
        t_grid = np.linspace(0.0, tau[-1] - T, n_windows)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.max() + T > tau[-1] + 1e-12:
        raise HorizonError(f"window {t_grid.max()} + {T} lies beyond the trace (tau_end={tau[-1]:.4g})")
    sp = spectral(chain, allow_reducible=True)

    def interp(ts):
        return np.column_stack([np.interp(ts, tau, etas[:, j]) for j in range(etas.shape[1])])

    sups = np.empty(len(t_grid))
    for i, t in enumerate(t_grid):
        lo, hi = np.searchsorted(tau, [t, t + T])
        knots = tau[lo:hi]
        if len(knots) > max_points:
            knots = knots[np.linspace(0, len(knots) - 1, max_points).astype(int)]
        s_pts = np.concatenate([[t], knots, [t + T]])
        path = interp(s_pts)
        flow = normalized_flow(chain, path[0], s_pts - t, sp)
        sups[i] = float((0.5 * np.abs(path - flow).sum(axis=1)).max())
    return AptReport(t_grid, sups, float(T), float(tau[-1]))


def apt_check(trace, chain, T=1.0, t_grid=None, **kwargs):
    """Asymptotic pseudo-trajectory check of the restart-point measures of a chain trace."""
    etas = empirical_sequence(trace.resample_points, chain.n_states)
    return apt_distances(etas, chain, T, t_grid, **kwargs)


def deterministic_sequence(chain, nu, n):
    """Noise-free recursion ``eta_{k+1} = eta_k + gamma_{k+1} F(eta_k)`` (k = 1..n-1)."""
    A = green(chain)
    h = A.sum(axis=1)
    etas = np.empty((n, chain.n_states))
    etas[0] = nu
    for k in range(1, n):
        e = etas[k - 1]
        g = 1.0 / ((k + 1) * (e @ h))
        etas[k] = e + g * flow_vector_field(A, e)
    return etas


@dataclass
class VerificationRow:
    quantity: str
    index: float
    value: float
    bound: float
    passed: bool


def verification_rows(chain, n_max=30, t_max=None, mu=None, fit_window=None,
                      n_random_f=100, seed=0):
    """Every identity and bound of the laboratory for one chain, as report rows."""
    rows = []
    sp = spectral(chain)
    A = green(chain)
    n = chain.n_states
    mu = np.eye(n)[0] if mu is None else _probability(mu, n)
    res = float(np.abs(A @ -chain.Q - np.eye(n)).max())
    rows.append(VerificationRow("green_inverse_residual", 0, res, 1e-10, res <= 1e-10))
    rng = np.random.default_rng(seed)
    fs = rng.standard_normal((n, n_random_f))
    lhs = sp.alpha @ A @ fs
    rhs = sp.alpha @ fs / sp.lambda0
    rel = float(np.max(np.abs(lhs - rhs) / np.maximum(np.abs(sp.alpha) @ np.abs(fs) / sp.lambda0, 1e-300)))
    rows.append(VerificationRow("qsd_green_identity", 0, rel, 1e-10, rel <= 1e-10))
    for name, vec in (("left_eigen_residual", sp.alpha @ chain.Q + sp.lambda0 * sp.alpha),
                      ("right_eigen_residual", chain.Q @ sp.eta + sp.lambda0 * sp.eta)):
        r = float(np.abs(vec).max())
        rows.append(VerificationRow(name, 0, r, 1e-10, r <= 1e-10))
    ones = np.ones(n)
    for k in range(1, 6):
        try:
            v, vi, scale = green_power_routes(chain, mu, ones, k)
            rel = abs(v - vi) / scale
        except NumericalError:
            rel = math.nan
        rows.append(VerificationRow("quadrature_identity", k, rel, 1e-6, rel <= 1e-6))
    pw = verify_powers_bound(chain, mu, n_max, fit_window)
    rows.append(VerificationRow("powers_rate", n_max, pw.fitted_rate, pw.predicted_rate + 0.01,
                                pw.passed))
    # smallest B with TV_n <= B r^n on 1..n_max; informative, only finiteness is checked
    rows.append(VerificationRow("powers_envelope_constant", n_max, pw.envelope_constant,
                                math.inf, math.isfinite(pw.envelope_constant)))
    grid = None if t_max is None else np.linspace(0.0, t_max, 51)[1:]
    fl = verify_exp_flow_bound(chain, mu, grid)
    rows.append(VerificationRow("exp_flow_rate", float(fl.grid[-1]), fl.fitted_rate,
                                fl.predicted_rate + 0.01, fl.passed))
    traj = flow_ode(chain, mu, 10.0 / sp.lambda0)
    rows.append(VerificationRow("flow_ode_max_tv", 10.0 / sp.lambda0, traj.max_tv_error, 1e-8,
                                traj.max_tv_error <= 1e-8))
    fa = float(np.abs(flow_vector_field(A, sp.alpha)).max())
    rows.append(VerificationRow("flow_fixed_point", 0, fa, 1e-12, fa <= 1e-12))
    mix = check_A1_A2(chain, 1.0)
    rows.append(VerificationRow("A1_c1", 1.0, mix.c1, 0.0, mix.c1 > 0))
    rows.append(VerificationRow("A2_c2", 1.0, mix.c2, 0.0, mix.c2 > 0))
    return rows
