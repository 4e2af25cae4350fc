import math

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st

from reinforced_qsd.errors import ChainError, HorizonError, ParameterError
from reinforced_qsd.green_lab import (AbsorbingChain, apt_check, apt_distances,
                                      chain_absorption_times, check_A1_A2, conditional_law,
                                      deterministic_sequence, flow_ode, flow_vector_field, green,
                                      green_power, green_power_routes, normalized_flow,
                                      random_chain, reinforced_chain, semigroup, spectral,
                                      tv_distance, verify_exp_flow_bound, verify_powers_bound)

seeds = st.integers(0, 2**32 - 1)
sizes = st.integers(1, 12)


def chain_from(seed, n):
    return random_chain(n, np.random.default_rng(seed))


def test_spectral_two_state(two_state):
    sp = spectral(two_state)
    assert sp.lambda0 == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(sp.alpha, [0.5, 0.5], atol=1e-12)
    assert np.allclose(sp.eta, [1.0, 1.0], atol=1e-12)
    assert sp.gamma == pytest.approx(2.0, abs=1e-12)


def test_spectral_scalar():
    sp = spectral(AbsorbingChain([[-3.5]]))
    assert sp.lambda0 == pytest.approx(3.5)
    assert sp.alpha.tolist() == [1.0] and sp.eta.tolist() == [1.0]


@given(seeds, sizes)
def test_spectral_invariants(seed, n):
    c = chain_from(seed, n)
    sp = spectral(c)
    assert np.abs(sp.alpha @ c.Q + sp.lambda0 * sp.alpha).max() <= 1e-10 * max(1, sp.lambda0)
    assert np.abs(c.Q @ sp.eta + sp.lambda0 * sp.eta).max() <= 1e-10 * max(1, sp.lambda0)
    assert sp.alpha @ sp.eta == pytest.approx(1.0, abs=1e-10)
    assert sp.lambda0 > 0 and (n == 1 or sp.gamma > 0)
    assert np.all(sp.alpha >= 0) and sp.alpha.sum() == pytest.approx(1.0)


def test_chain_validation():
    with pytest.raises(ChainError):
        AbsorbingChain([[-1.0, -0.5], [0.5, -1.0]])
    with pytest.raises(ChainError):
        AbsorbingChain([[-1.0, 1.0], [1.0, -1.0]])
    with pytest.raises(ChainError):
        AbsorbingChain([[-1.0, 2.0], [0.5, -1.0]])
    # state 1 cannot reach state 0: reducible
    red = AbsorbingChain([[-2.0, 1.0], [0.0, -1.0]])
    assert not red.is_irreducible
    with pytest.raises(ChainError):
        spectral(red)
    assert spectral(red, allow_reducible=True).lambda0 == pytest.approx(1.0)


def test_green_two_state(two_state):
    A = green(two_state)
    assert np.allclose(A, [[2 / 3, 1 / 3], [1 / 3, 2 / 3]], atol=1e-14)
    assert np.allclose(A @ np.ones(2), [1.0, 1.0])


@given(seeds, sizes)
def test_green_identities(seed, n):
    c = chain_from(seed, n)
    A = green(c)
    sp = spectral(c)
    assert np.abs(A @ -c.Q - np.eye(n)).max() <= 1e-10
    f = np.random.default_rng(seed).standard_normal((n, 100))
    lhs, rhs = sp.alpha @ A @ f, sp.alpha @ f / sp.lambda0
    scale = np.abs(sp.alpha) @ np.abs(f) / sp.lambda0
    assert np.all(np.abs(lhs - rhs) <= 1e-10 * scale)


def test_semigroup_examples():
    c = AbsorbingChain([[-0.7]])
    assert semigroup(c, 0.0).tolist() == [[1.0]]
    assert semigroup(c, 2.0)[0, 0] == pytest.approx(math.exp(-1.4), rel=1e-14)
    with pytest.raises(ParameterError):
        semigroup(c, -1.0)


@given(seeds, sizes, st.floats(0, 3), st.floats(0, 3))
def test_semigroup_law(seed, n, s, t):
    c = chain_from(seed, n)
    Ps, Pt, Pst = semigroup(c, s), semigroup(c, t), semigroup(c, s + t)
    assert np.abs(Ps @ Pt - Pst).max() <= 1e-10
    assert Pst.min() >= 0 and Pst.max() <= 1 and Pst.sum(axis=1).max() <= 1 + 1e-12
    assert np.abs(Pst - sla.expm((s + t) * c.Q)).max() <= 1e-10


def test_conditional_law(two_state):
    sp = spectral(two_state)
    for t in (0.0, 0.5, 3.0):
        assert np.allclose(conditional_law(two_state, sp.alpha, t), sp.alpha, atol=1e-12)
    mu = np.array([0.9, 0.1])
    assert np.allclose(conditional_law(two_state, mu, 0.0), mu)
    ts = np.array([1.0, 2.0, 3.0])
    tv = [tv_distance(conditional_law(two_state, [1.0, 0.0], t), sp.alpha) for t in ts]
    assert np.polyfit(ts, np.log(tv), 1)[0] == pytest.approx(-2.0, abs=0.01)
    with pytest.raises(HorizonError):
        conditional_law(AbsorbingChain([[-1.0]]), [1.0], 800.0)


def test_A1_A2():
    rep = check_A1_A2(AbsorbingChain([[-2.0, 1.0], [1.0, -2.0]]), 1.0)
    assert rep.c1 > 0 and rep.c2 > 0
    one = check_A1_A2(AbsorbingChain([[-1.3]]), 1.0)
    assert one.c1 == pytest.approx(1.0) and one.c2 == pytest.approx(1.0)
    # state 0 feeds state 1, which only slowly returns
    feed = AbsorbingChain([[-1.0, 0.9], [0.01, -0.5]])
    assert check_A1_A2(feed, 10.0).c1 > 0


def test_green_power_examples(two_state):
    mu = np.array([1.0, 0.0])
    assert green_power(two_state, mu, np.ones(2), 1) == pytest.approx(1.0, abs=1e-12)
    assert green_power(two_state, mu, np.ones(2), 2) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ParameterError):
        green_power(two_state, mu, np.ones(2), 0)


@settings(max_examples=25)
@given(seeds, st.integers(1, 10), st.integers(1, 5))
def test_quadrature_identity(seed, n, k):
    c = chain_from(seed, n)
    rng = np.random.default_rng(seed)
    mu = rng.dirichlet(np.ones(n))
    f = rng.standard_normal(n)
    v, vi, scale = green_power_routes(c, mu, f, k)
    assert abs(v - vi) <= 1e-6 * scale


def test_powers_two_state(two_state):
    rep = verify_powers_bound(two_state, [1.0, 0.0], 30)
    assert math.exp(rep.predicted_rate) == pytest.approx(1 / 3, rel=1e-12)
    assert rep.passed and rep.fitted_rate <= math.log(1 / 3) + 0.01
    assert verify_powers_bound(two_state, [0.5, 0.5], 30).tv.max() <= 1e-12


def test_powers_underflow_reduces_window(two_state):
    rep = verify_powers_bound(two_state, [1.0, 0.0], 700)
    assert "reduced" in rep.note
    assert rep.fitted_rate == pytest.approx(math.log(1 / 3), abs=1e-6)


def test_powers_random_ten_state_chains():
    # literal example: 50 seeds, pass rate 100% (see decisions ledger for the transient analysis)
    failed = [i for i in range(50)
              if not verify_powers_bound(random_chain(10, np.random.default_rng(1000 + i)),
                                         np.eye(10)[0], 30).passed]
    assert failed == []


def test_powers_long_horizon_rate():
    # the asymptotic slope, once transients of clustered eigenvalues have died out
    for i in range(50):
        rng = np.random.default_rng(i)
        n = int(rng.integers(2, 21))
        rep = verify_powers_bound(random_chain(n, rng), np.eye(n)[0], 200, (100, 200))
        assert rep.passed, (i, rep.fitted_rate, rep.predicted_rate)
        assert math.isfinite(rep.envelope_constant)


def test_exp_flow_two_state(two_state):
    rep = verify_exp_flow_bound(two_state, [1.0, 0.0])
    assert rep.predicted_rate == pytest.approx(-2 / 3, abs=1e-12)
    assert rep.fitted_rate == pytest.approx(-2 / 3, abs=1e-6)
    assert verify_exp_flow_bound(two_state, [0.5, 0.5]).tv.max() <= 1e-12
    with pytest.raises(ParameterError):
        verify_exp_flow_bound(two_state, [1.0, 0.0], [0.0, 1.0])


def test_exp_flow_random_ten_state_chains():
    failed = [i for i in range(50)
              if not verify_exp_flow_bound(random_chain(10, np.random.default_rng(1000 + i)),
                                           np.eye(10)[0]).passed]
    assert failed == []


@given(seeds, st.integers(2, 8))
def test_normalized_flow_matches_expm(seed, n):
    c = chain_from(seed, n)
    nu = np.random.default_rng(seed).dirichlet(np.ones(n))
    A = green(c)
    for t in (0.3, 2.0):
        row = nu @ sla.expm(t * A)
        assert np.abs(normalized_flow(c, nu, [t])[0] - row / row.sum()).max() <= 1e-9


def test_flow_ode_two_state(two_state):
    traj = flow_ode(two_state, [1.0, 0.0], 10.0, tol=1e-10)
    assert traj.max_tv_error <= 1e-8
    assert np.all(np.abs(traj.measures.sum(axis=1) - 1) <= 1e-9)
    assert np.all(traj.measures >= -1e-12)


def test_flow_fixed_point():
    c = random_chain(6, np.random.default_rng(0))
    sp = spectral(c)
    assert np.abs(flow_vector_field(green(c), sp.alpha)).max() <= 1e-12
    traj = flow_ode(c, sp.alpha, 10.0 / sp.lambda0)
    assert max(tv_distance(m, sp.alpha) for m in traj.measures) <= 1e-9


def test_exact_absorption_times(two_state):
    c = random_chain(5, np.random.default_rng(7))
    h = green(c) @ np.ones(5)
    times = chain_absorption_times(c, 2, 100_000, np.random.default_rng(1))
    assert abs(times.mean() - h[2]) <= 3 * times.std() / math.sqrt(len(times))


def test_reinforced_chain_single_state():
    c = AbsorbingChain([[-2.5]])
    tr = reinforced_chain(c, 100_000, np.random.default_rng(3))
    assert tr.theta[-1] / len(tr.theta) == pytest.approx(1 / 2.5, rel=0.02)


def test_reinforced_chain_bookkeeping(two_state):
    tr = reinforced_chain(two_state, 500, np.random.default_rng(0))
    assert np.all(np.diff(tr.theta) > 0)
    assert tr.occupation.total_time == tr.theta[-1]
    assert np.array_equal(tr.occupation.cumulative[tr.cycle_ends - 1], tr.theta)
    again = reinforced_chain(two_state, 500, np.random.default_rng(0))
    assert np.array_equal(tr.resample_points, again.resample_points)


def test_apt_synthetic_flow_trace(two_state):
    etas = deterministic_sequence(two_state, np.array([1.0, 0.0]), 5000)
    rep = apt_distances(etas, two_state, 1.0)
    # interpolation error of the clock is O(max step) ~ 1/(2 eta A 1)
    assert rep.sup_distances.max() <= 0.05
    assert rep.final <= 1e-3


def test_apt_horizon_error(two_state):
    tr = reinforced_chain(two_state, 20, np.random.default_rng(0))
    with pytest.raises(HorizonError):
        apt_check(tr, two_state, T=50.0)
