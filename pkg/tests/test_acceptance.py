"""End-to-end acceptance checks 1-12.

Each test prints one ``criterion k: PASS|FAIL ...`` line; run with ``-s`` (or
``-rA``) to see them.  Criteria 8, 9 and 11 simulate about 4e7 Euler steps per
replica and take several minutes in total.
"""
import gc
import math

import numpy as np
import pytest

from reinforced_qsd.benchmarks import fd_eigensolver, get_reference, ks_distance
from reinforced_qsd.diffusion import estimate_green_mc
from reinforced_qsd.green_lab import (AbsorbingChain, apt_check, flow_ode, flow_vector_field,
                                      green, green_power_routes, normalized_flow, random_chain,
                                      reinforced_chain, spectral, tv_distance,
                                      verify_exp_flow_bound, verify_powers_bound)
from reinforced_qsd.models import make_model
from reinforced_qsd.reinforced import (boundary_layer_mass, lambda0_estimate, run_reinforced,
                                       theta_ratio_series)
from reinforced_qsd.runner import replica_rng

TWO_STATE = AbsorbingChain([[-2.0, 1.0], [1.0, -2.0]])
N_SEEDS = 5


def report(k, ok, detail):
    print(f"\ncriterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def _chains():
    out = []
    for i in range(50):
        rng = np.random.default_rng(i)
        n = int(rng.integers(2, 21))
        out.append(random_chain(n, rng))
    return out


CHAINS = _chains()


def test_criterion_01_green_identity():
    worst_inv = worst_rel = 0.0
    for i, c in enumerate(CHAINS):
        A = green(c)
        sp = spectral(c)
        worst_inv = max(worst_inv, np.abs(A @ -c.Q - np.eye(c.n_states)).max())
        f = np.random.default_rng(100 + i).standard_normal((c.n_states, 100))
        lhs, rhs = sp.alpha @ A @ f, sp.alpha @ f / sp.lambda0
        rel = np.abs(lhs - rhs) / np.maximum(np.abs(rhs), np.abs(sp.alpha) @ np.abs(f) / sp.lambda0)
        worst_rel = max(worst_rel, rel.max())
    report(1, worst_inv <= 1e-10 and worst_rel <= 1e-10,
           f"max|A(-Q)-I|={worst_inv:.2e}, max rel |aAf-af/l0|={worst_rel:.2e}")


def test_criterion_02_powers_rate():
    two = verify_powers_bound(TWO_STATE, [1.0, 0.0], 30, (10, 30))
    exact = math.exp(two.predicted_rate) == pytest.approx(1 / 3, rel=1e-12) and two.passed
    failed = [i for i, c in enumerate(CHAINS)
              if not verify_powers_bound(c, np.eye(c.n_states)[0], 30, (10, 30)).passed]
    report(2, exact and not failed,
           f"2-state ratio {math.exp(two.predicted_rate):.15f}; "
           f"{50 - len(failed)}/50 chains within slack, failing seeds {failed}")


def test_criterion_03_flow_rate():
    two = verify_exp_flow_bound(TWO_STATE, [1.0, 0.0])
    exact = abs(two.predicted_rate + 2 / 3) <= 1e-12 and two.passed
    failed = [i for i, c in enumerate(CHAINS)
              if not verify_exp_flow_bound(c, np.eye(c.n_states)[0]).passed]
    report(3, exact and not failed,
           f"2-state predicted {two.predicted_rate:.12f}, fitted {two.fitted_rate:.6f}; "
           f"{50 - len(failed)}/50 chains within slack, failing seeds {failed}")


def test_criterion_04_quadrature_identity():
    worst = 0.0
    for i, c in enumerate([TWO_STATE] + CHAINS):
        rng = np.random.default_rng(200 + i)
        mu, f = rng.dirichlet(np.ones(c.n_states)), rng.standard_normal(c.n_states)
        for k in range(1, 6):
            v, vi, scale = green_power_routes(c, mu, f, k)
            worst = max(worst, abs(v - vi) / scale)
    report(4, worst <= 1e-6, f"max relative discrepancy {worst:.2e} (n <= 5, 51 chains)")


def test_criterion_05_flow_uniqueness():
    worst_tv = worst_f = 0.0
    for c in [TWO_STATE] + CHAINS:
        sp = spectral(c)
        traj = flow_ode(c, np.eye(c.n_states)[0], 10.0 / sp.lambda0, tol=1e-10)
        worst_tv = max(worst_tv, traj.max_tv_error)
        worst_f = max(worst_f, np.abs(flow_vector_field(green(c), sp.alpha)).max())
    report(5, worst_tv <= 1e-8 and worst_f <= 1e-12,
           f"max TV(ode, closed form)={worst_tv:.2e}, max|F(alpha)|={worst_f:.2e}")


@pytest.fixture(scope="module")
def chain_traces():
    return [reinforced_chain(TWO_STATE, 200_000, replica_rng(6, s)) for s in range(N_SEEDS)]


def test_criterion_06_reinforced_chain(chain_traces):
    alpha = spectral(TWO_STATE).alpha
    good, lines = 0, []
    for tr in chain_traces:
        eta = np.bincount(tr.resample_points.astype(int), minlength=2) / len(tr)
        tv = tv_distance(eta, alpha)
        lam = abs(lambda0_estimate(tr) - 1.0)
        good += tv <= 0.05 and lam <= 0.02
        lines.append(f"tv={tv:.4f} dl={lam:.4f}")
    report(6, good >= 4, f"{good}/5 seeds pass: " + "; ".join(lines))


def test_criterion_07_apt(chain_traces):
    rep = apt_check(chain_traces[0], TWO_STATE)
    report(7, rep.decreasing and rep.final <= 0.05,
           f"median first quarter {rep.early_median:.4f}, last quarter {rep.late_median:.4f}, "
           f"final window {rep.final:.4f}")


def _diffusion_runs(name, thinning, master_seed, extra):
    model, domain = make_model(name)
    ref = get_reference(name)
    rows = []
    for s in range(N_SEEDS):
        tr = run_reinforced(model, domain, domain.interior_point, 1e-4, 20_000,
                            replica_rng(master_seed, s), thinning=thinning)
        lam = lambda0_estimate(tr)
        ks = ks_distance(tr.discrete_after(0.1), ref.cdf, ref.projection)
        row = {"rel": abs(lam - ref.lambda0) / ref.lambda0, "ks": ks}
        row.update(extra(tr, domain))
        rows.append(row)
        del tr
        gc.collect()
    return rows


def _tightness(tr, domain):
    ratios = theta_ratio_series(tr)
    late = ratios[ratios[:, 0] >= 1000, 1]
    return {"boundary": boundary_layer_mass(tr.occupation, domain, 0.05),
            "theta_min": float(late.min()), "theta_max": float(late.max())}


@pytest.fixture(scope="module")
def interval_runs():
    return _diffusion_runs("bm-interval", 1, 8, _tightness)


@pytest.fixture(scope="module")
def disk_runs():
    return _diffusion_runs("bm-disk", 2, 9, lambda tr, d: {})


@pytest.mark.slow
def test_criterion_08_interval(interval_runs):
    good = sum(r["rel"] <= 0.05 and r["ks"] <= 0.02 for r in interval_runs)
    report(8, good >= 4, f"{good}/5 seeds pass: " +
           "; ".join(f"dl={r['rel']:.4f} ks={r['ks']:.4f}" for r in interval_runs))


@pytest.mark.slow
def test_criterion_09_disk(disk_runs):
    good = sum(r["rel"] <= 0.05 and r["ks"] <= 0.03 for r in disk_runs)
    report(9, good == N_SEEDS, f"{good}/5 seeds pass: " +
           "; ".join(f"dl={r['rel']:.4f} ks={r['ks']:.4f}" for r in disk_runs))


@pytest.mark.slow
def test_criterion_10_green_mc():
    model, domain = make_model("bm-interval")
    dt, lines, ok = 1e-4, [], True
    for x in (0.1, 0.5):
        est, se = estimate_green_mc(model, domain, [x], lambda s: np.ones(len(s)), 100_000, dt,
                                    np.random.default_rng(int(100 * x)))
        err, budget = abs(est - x * (1 - x)), 3 * se + 2 * math.sqrt(dt)
        ok &= err <= budget
        lines.append(f"x={x}: est={est:.5f} err={err:.4f} budget={budget:.4f}")
    report(10, ok, "; ".join(lines))


@pytest.mark.slow
def test_criterion_11_tightness(interval_runs):
    ok = all(r["boundary"] <= 0.03 and 0.1 <= r["theta_min"] and r["theta_max"] <= 0.4
             for r in interval_runs)
    report(11, ok, "; ".join(f"boundary={r['boundary']:.4f} theta/n in "
                             f"[{r['theta_min']:.4f}, {r['theta_max']:.4f}]"
                             for r in interval_runs))


def test_criterion_12_fd_oracle():
    ref = get_reference("bm-interval")
    sol = fd_eigensolver(*make_model("bm-interval"), 512)
    rel = abs(sol.lambda0 - ref.lambda0) / ref.lambda0
    err = float(np.abs(sol.density - ref.density(sol.grid)).max())
    report(12, rel <= 1e-3 and err <= 1e-3, f"lambda0 rel err {rel:.2e}, max density err {err:.2e}")
