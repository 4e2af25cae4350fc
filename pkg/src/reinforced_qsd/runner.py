"""Replica execution and CSV artifacts.

Every replica gets its own generator, seeded by
``SeedSequence(master_seed, spawn_key=(replica,))``, and writes its own files;
the summary is recomputed from those files after all replicas finish.  Floats
are written with ``repr`` so reruns are byte-identical and values round-trip.
"""
from __future__ import annotations

import csv
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .benchmarks import fd_eigensolver, get_reference, write_reference_csv
from .config import ExperimentConfig, load_chain
from .errors import ReinforcedQSDError
from .green_lab import apt_check, reinforced_chain, spectral, tv_distance, verification_rows
from .models import make_model
from .reinforced import Diagnostics, run_reinforced, snapshot_cycles

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
OUTPUT_ENV = "REINFORCED_QSD_OUTPUT_DIR"

SIMULATE_COLUMNS = ("schema_version", "replica", "cycle", "theta", "theta_over_n",
                    "lambda0_estimate", "ks_to_reference", "boundary_layer_mass")
FINITE_COLUMNS = ("schema_version", "replica", "cycle", "theta", "theta_over_n",
                  "lambda0_estimate", "tv_occupation_to_qsd", "tv_restarts_to_qsd")
HIST_COLUMNS = ("schema_version", "bin_left", "bin_right", "mass")
SUMMARY_COLUMNS = ("schema_version", "quantity", "n_replicas", "median", "q25", "q75", "iqr")
STATUS_COLUMNS = ("schema_version", "replica", "status", "message")
VERIFY_COLUMNS = ("schema_version", "quantity", "n_or_t", "value", "bound", "pass")


def replica_seed(master_seed, replica):
    """Seed sequence of one replica; a pure function of its two arguments."""
    return np.random.SeedSequence(int(master_seed), spawn_key=(int(replica),))


def replica_rng(master_seed, replica):
    return np.random.default_rng(replica_seed(master_seed, replica))


def resolve_output_dir(config_dir, override=None):
    """``override`` (a CLI flag) beats the environment variable, which beats the config."""
    out = override or os.environ.get(OUTPUT_ENV) or config_dir
    if not out:
        raise ReinforcedQSDError("no output directory given")
    return Path(out)


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_csv(path, columns, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in columns])


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


# --- simulate ----------------------------------------------------------------

def _build(cfg):
    model, domain = make_model(cfg.model, cfg.model_params, cfg.domain)
    ref = get_reference(cfg.reference) if cfg.reference else None
    x0 = cfg.x0 if cfg.x0 is not None else domain.interior_point
    return model, domain, ref, x0


def _histogram(trace, domain, ref, diag_cfg):
    law = trace.discrete_after(diag_cfg.burn_in)
    if ref is not None:
        coord, (lo, hi) = law.coordinate(ref.projection), ref.support
    else:
        coord = law.coordinate()
        lo, hi = domain.bounding_box[0][0], domain.bounding_box[1][0]
    mass, edges = np.histogram(coord, bins=diag_cfg.histogram_bins, range=(lo, hi),
                               weights=law.masses)
    return [{"schema_version": SCHEMA_VERSION, "bin_left": a, "bin_right": b, "mass": m}
            for a, b, m in zip(edges[:-1], edges[1:], mass)]


def _simulate_replica(cfg, replica, out_dir):
    model, domain, ref, x0 = _build(cfg)
    d = cfg.diagnostics
    diag = Diagnostics(eta_boundary=d.eta_boundary, snapshot_base=d.snapshot_base,
                       burn_in=d.burn_in, reference_cdf=ref.cdf if ref else None,
                       projection=ref.projection if ref else None)
    trace = run_reinforced(model, domain, x0, cfg.dt, cfg.n_cycles,
                           replica_rng(cfg.master_seed, replica), diag,
                           thinning=cfg.thinning, max_steps=cfg.max_steps,
                           bridge_correction=cfg.bridge_correction)
    rows = [dict(row, schema_version=SCHEMA_VERSION, replica=replica) for row in trace.snapshots]
    _write_csv(out_dir / f"replica_{replica:03d}.csv", SIMULATE_COLUMNS, rows)
    _write_csv(out_dir / f"replica_{replica:03d}_hist.csv", HIST_COLUMNS,
               _histogram(trace, domain, ref, d))


# --- finite-lab --------------------------------------------------------------

def _finite_replica(cfg, replica, out_dir):
    chain, mu = load_chain(cfg.chain)
    sp = spectral(chain)
    rng = replica_rng(cfg.master_seed, replica)
    start = 0 if mu is None else int(rng.choice(chain.n_states, p=mu))
    trace = reinforced_chain(chain, cfg.n_cycles, rng, start=start)
    rows = []
    for n in snapshot_cycles(cfg.n_cycles, cfg.diagnostics.snapshot_base):
        theta = float(trace.theta[n - 1])
        occ = trace.discrete_after(cfg.diagnostics.burn_in, n).probability_vector(chain.n_states)
        eta = np.bincount(trace.resample_points[:n].astype(int), minlength=chain.n_states) / n
        rows.append({"schema_version": SCHEMA_VERSION, "replica": replica, "cycle": n,
                     "theta": theta, "theta_over_n": theta / n, "lambda0_estimate": n / theta,
                     "tv_occupation_to_qsd": tv_distance(occ, sp.alpha),
                     "tv_restarts_to_qsd": tv_distance(eta, sp.alpha)})
    _write_csv(out_dir / f"replica_{replica:03d}.csv", FINITE_COLUMNS, rows)
    if cfg.n_cycles >= 100:
        apt = apt_check(trace, chain)
        log.info("replica %d: APT final window %.4g, decreasing=%s", replica, apt.final,
                 apt.decreasing)


def _run_one(task):
    kind, cfg, replica, out_dir = task
    try:
        (_simulate_replica if kind == "simulate" else _finite_replica)(cfg, replica, out_dir)
        return replica, "ok", ""
    except (ReinforcedQSDError, ValueError, ArithmeticError) as exc:
        return replica, "failed", f"{type(exc).__name__}: {exc}"


def _summarise(out_dir, quantities, statuses):
    finals = {q: [] for q in quantities}
    for replica, status, _ in statuses:
        if status != "ok":
            continue
        last = read_csv(out_dir / f"replica_{replica:03d}.csv")[-1]
        for q in quantities:
            if last.get(q):
                finals[q].append(float(last[q]))
    rows = []
    for q, vals in finals.items():
        if not vals:
            continue
        q25, med, q75 = np.percentile(vals, [25, 50, 75])
        rows.append({"schema_version": SCHEMA_VERSION, "quantity": q, "n_replicas": len(vals),
                     "median": med, "q25": q25, "q75": q75, "iqr": q75 - q25})
    _write_csv(out_dir / "summary.csv", SUMMARY_COLUMNS, rows)
    _write_csv(out_dir / "replicas.csv", STATUS_COLUMNS,
               [{"schema_version": SCHEMA_VERSION, "replica": r, "status": s, "message": m}
                for r, s, m in statuses])
    return rows


def _run_replicas(kind, cfg, out_dir, jobs):
    tasks = [(kind, cfg, i, out_dir) for i in range(cfg.replicas)]
    jobs = max(1, min(jobs or os.cpu_count() or 1, len(tasks)))
    if jobs == 1:
        statuses = [_run_one(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            statuses = list(pool.map(_run_one, tasks))
    for replica, status, msg in statuses:
        if status != "ok":
            log.error("replica %d failed: %s", replica, msg)
    quantities = (("lambda0_estimate", "ks_to_reference") if kind == "simulate"
                  else ("lambda0_estimate", "tv_occupation_to_qsd", "tv_restarts_to_qsd"))
    _summarise(out_dir, quantities, statuses)
    return 0 if all(s == "ok" for _, s, _ in statuses) else 1


# --- verify / benchmark ------------------------------------------------------

def _verify(cfg, out_dir):
    chain, mu = load_chain(cfg.chain)
    rows = verification_rows(chain, n_max=cfg.n_max, t_max=cfg.t_max, mu=mu)
    _write_csv(out_dir / "verify_report.csv", VERIFY_COLUMNS,
               [{"schema_version": SCHEMA_VERSION, "quantity": r.quantity, "n_or_t": r.index,
                 "value": r.value, "bound": r.bound, "pass": r.passed} for r in rows])
    failed = [r.quantity for r in rows if not r.passed]
    for name in dict.fromkeys(failed):
        log.warning("verification failed: %s", name)
    return 0 if not failed else 1


def _benchmark(cfg, out_dir):
    ref = get_reference(cfg.model)
    model, domain = make_model(cfg.model, cfg.model_params, cfg.domain)
    sol = fd_eigensolver(model, domain, cfg.grid)
    rel = abs(sol.lambda0 - ref.lambda0) / ref.lambda0
    exact = ref.density(sol.grid)
    err = float(np.max(np.abs(sol.density - exact)))
    _write_csv(out_dir / f"benchmark_{cfg.model}_grid{cfg.grid}.csv",
               ("schema_version", "x", "density_fd", "density_reference", "cdf_reference"),
               [{"schema_version": SCHEMA_VERSION, "x": x, "density_fd": a,
                 "density_reference": b, "cdf_reference": c}
                for x, a, b, c in zip(sol.grid, sol.density, exact, ref.cdf(sol.grid))])
    write_reference_csv(ref, out_dir / f"reference_{cfg.model}.csv")
    _write_csv(out_dir / f"benchmark_{cfg.model}_grid{cfg.grid}_summary.csv",
               ("schema_version", "lambda0_fd", "lambda0_reference", "lambda0_rel_error",
                "density_max_error"),
               [{"schema_version": SCHEMA_VERSION, "lambda0_fd": sol.lambda0,
                 "lambda0_reference": ref.lambda0, "lambda0_rel_error": rel,
                 "density_max_error": err}])
    print(f"{cfg.model} grid {cfg.grid}: lambda0 fd={sol.lambda0:.10g} "
          f"reference={ref.lambda0:.10g} rel.err={rel:.3g}; max density error={err:.3g}")
    return 0


def run_experiment(cfg: ExperimentConfig, jobs=None, out=None):
    """Run the configured command; returns the process exit status.

    Replica failures are recorded in ``replicas.csv`` and make the status
    nonzero without stopping the other replicas.
    """
    out_dir = resolve_output_dir(cfg.output_dir, out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        log.error("cannot create output directory %s: %s", out_dir, exc)
        return 2
    try:
        if cfg.command == "simulate":
            return _run_replicas("simulate", cfg, out_dir, jobs)
        if cfg.command == "finite-lab":
            return _run_replicas("finite-lab", cfg, out_dir, jobs)
        if cfg.command == "verify":
            return _verify(cfg, out_dir)
        return _benchmark(cfg, out_dir)
    except OSError as exc:
        log.error("I/O failure: %s", exc)
        return 2

