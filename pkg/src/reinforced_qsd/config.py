"""Experiment and chain files.

Both are TOML documents.  Parsing is strict: unknown keys, wrong types,
out-of-range values and missing required fields raise ``ConfigError`` with
the dotted key path and, when the key is present in the text, its line.

Experiment schema (required fields depend on ``command``)::

    command      simulate | finite-lab | verify | benchmark   (default simulate)
    model        registry name, or a table {name = ..., <model params>}
    domain       table {kind = interval|ball|box, ...}; default: the model's own
    dt           0 < dt <= 1
    n_cycles     integer >= 1
    replicas     1 <= replicas <= 10000
    master_seed  0 <= master_seed < 2**64
    output_dir   non-empty path
    reference    bm-interval | bm-disk (enables KS columns)
    x0           start point; default: the domain's interior point
    thinning     integer >= 1 (store every m-th state)      default 1
    max_steps    steps per excursion before giving up        default 10**9
    bridge_correction  bool                                  default false
    chain        path to a chain file (finite-lab, verify)
    grid         finite-difference grid size >= 16 (benchmark)
    n_max, t_max horizons for verify                         default 30, auto
    [diagnostics]
    eta_boundary 0 < eta                                     default 0.05
    snapshot_base integer >= 2                               default 2
    burn_in      0 <= burn_in < 1                            default 0.1
    histogram_bins integer >= 1                              default 50

Chain schema::

    n_states = 2
    Q = [[-2.0, 1.0], [1.0, -2.0]]
    mu = [1.0, 0.0]     # optional initial law
"""
from __future__ import annotations

import re
import sys
from dataclasses import dataclass, field

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ChainError, ConfigError
from .models import MODEL_NAMES

COMMANDS = ("simulate", "finite-lab", "verify", "benchmark")
REFERENCE_NAMES = ("bm-interval", "bm-disk")

_REQUIRED = {
    "simulate": ("model", "dt", "n_cycles", "replicas", "master_seed", "output_dir"),
    "finite-lab": ("chain", "n_cycles", "replicas", "master_seed", "output_dir"),
    "verify": ("chain", "output_dir"),
    "benchmark": ("model", "grid", "output_dir"),
}

_KEY_LINE = re.compile(r"""^\s*("?)([A-Za-z0-9_\-]+)\1\s*=""")
_TABLE_LINE = re.compile(r"^\s*\[\s*([A-Za-z0-9_.\-]+)\s*\]")


@dataclass
class DiagnosticsConfig:
    eta_boundary: float = 0.05
    snapshot_base: int = 2
    burn_in: float = 0.1
    histogram_bins: int = 50


@dataclass
class ExperimentConfig:
    command: str = "simulate"
    model: str | None = None
    model_params: dict = field(default_factory=dict)
    domain: dict | None = None
    dt: float | None = None
    n_cycles: int | None = None
    replicas: int | None = None
    master_seed: int | None = None
    output_dir: str | None = None
    diagnostics: DiagnosticsConfig = field(default_factory=DiagnosticsConfig)
    reference: str | None = None
    x0: list | None = None
    thinning: int = 1
    max_steps: int = 10**9
    bridge_correction: bool = False
    chain: str | None = None
    grid: int | None = None
    n_max: int = 30
    t_max: float | None = None


def _line_index(text):
    """Map dotted key paths to 1-based line numbers (first occurrence)."""
    index = {}
    table = ""
    for no, line in enumerate(text.splitlines(), start=1):
        m = _TABLE_LINE.match(line)
        if m:
            table = m.group(1)
            index.setdefault(table, no)
            continue
        m = _KEY_LINE.match(line)
        if m:
            key = f"{table}.{m.group(2)}" if table else m.group(2)
            index.setdefault(key, no)
    return index


def _load(text):
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        if line is None:
            m = re.search(r"line (\d+)", str(exc))
            line = int(m.group(1)) if m else None
        raise ConfigError(f"not valid TOML: {exc}", key="<document>", line=line) from None


class _Checker:
    def __init__(self, text):
        self.lines = _line_index(text)

    def fail(self, msg, key):
        raise ConfigError(msg, key=key, line=self.lines.get(key))

    def number(self, value, key, lo=None, hi=None, lo_open=False, integer=False):
        ok_type = int if integer else (int, float)
        if isinstance(value, bool) or not isinstance(value, ok_type):
            self.fail(f"{key} must be {'an integer' if integer else 'a number'}, got {value!r}", key)
        if not np.isfinite(value):
            self.fail(f"{key} must be finite", key)
        if lo is not None and (value < lo or (lo_open and value == lo)):
            self.fail(f"{key}={value!r} is out of range (must be {'>' if lo_open else '>='} {lo})", key)
        if hi is not None and value > hi:
            self.fail(f"{key}={value!r} is out of range (must be <= {hi})", key)
        return value

    def string(self, value, key, choices=None):
        if not isinstance(value, str) or not value:
            self.fail(f"{key} must be a non-empty string", key)
        if choices is not None and value not in choices:
            self.fail(f"{key}={value!r} is not one of {list(choices)}", key)
        return value


def parse_config(text):
    """Parse an experiment document into an ``ExperimentConfig``."""
    raw = _load(text)
    ck = _Checker(text)
    cfg = ExperimentConfig()
    known = set(ExperimentConfig.__dataclass_fields__) - {"model_params"}
    for key in raw:
        if key not in known:
            ck.fail(f"unknown key {key!r}", key)

    cfg.command = ck.string(raw.get("command", "simulate"), "command", COMMANDS)

    if "model" in raw:
        model = raw["model"]
        if isinstance(model, dict):
            params = dict(model)
            name = params.pop("name", None)
            cfg.model = ck.string(name, "model.name", MODEL_NAMES)
            cfg.model_params = params
        else:
            cfg.model = ck.string(model, "model", MODEL_NAMES)
    if "domain" in raw:
        if not isinstance(raw["domain"], dict):
            ck.fail("domain must be a table", "domain")
        cfg.domain = dict(raw["domain"])
    if "dt" in raw:
        cfg.dt = float(ck.number(raw["dt"], "dt", lo=0.0, hi=1.0, lo_open=True))
    if "n_cycles" in raw:
        cfg.n_cycles = ck.number(raw["n_cycles"], "n_cycles", lo=1, integer=True)
    if "replicas" in raw:
        cfg.replicas = ck.number(raw["replicas"], "replicas", lo=1, hi=10_000, integer=True)
    if "master_seed" in raw:
        cfg.master_seed = ck.number(raw["master_seed"], "master_seed", lo=0, hi=2**64 - 1,
                                    integer=True)
    if "output_dir" in raw:
        cfg.output_dir = ck.string(raw["output_dir"], "output_dir")
    if "reference" in raw:
        cfg.reference = ck.string(raw["reference"], "reference", REFERENCE_NAMES)
    if "x0" in raw:
        x0 = raw["x0"]
        x0 = x0 if isinstance(x0, list) else [x0]
        cfg.x0 = [float(ck.number(v, "x0")) for v in x0]
    if "thinning" in raw:
        cfg.thinning = ck.number(raw["thinning"], "thinning", lo=1, integer=True)
    if "max_steps" in raw:
        cfg.max_steps = ck.number(raw["max_steps"], "max_steps", lo=1, integer=True)
    if "bridge_correction" in raw:
        if not isinstance(raw["bridge_correction"], bool):
            ck.fail("bridge_correction must be true or false", "bridge_correction")
        cfg.bridge_correction = raw["bridge_correction"]
    if "chain" in raw:
        cfg.chain = ck.string(raw["chain"], "chain")
    if "grid" in raw:
        cfg.grid = ck.number(raw["grid"], "grid", lo=16, integer=True)
    if "n_max" in raw:
        cfg.n_max = ck.number(raw["n_max"], "n_max", lo=1, integer=True)
    if "t_max" in raw:
        cfg.t_max = float(ck.number(raw["t_max"], "t_max", lo=0.0, lo_open=True))

    diag = raw.get("diagnostics", {})
    if not isinstance(diag, dict):
        ck.fail("diagnostics must be a table", "diagnostics")
    for key in diag:
        if key not in DiagnosticsConfig.__dataclass_fields__:
            ck.fail(f"unknown key {key!r}", f"diagnostics.{key}")
    d = cfg.diagnostics
    if "eta_boundary" in diag:
        d.eta_boundary = float(ck.number(diag["eta_boundary"], "diagnostics.eta_boundary",
                                         lo=0.0, lo_open=True))
    if "snapshot_base" in diag:
        d.snapshot_base = ck.number(diag["snapshot_base"], "diagnostics.snapshot_base", lo=2,
                                    integer=True)
    if "burn_in" in diag:
        d.burn_in = float(ck.number(diag["burn_in"], "diagnostics.burn_in", lo=0.0, hi=0.99))
    if "histogram_bins" in diag:
        d.histogram_bins = ck.number(diag["histogram_bins"], "diagnostics.histogram_bins",
                                     lo=1, integer=True)

    missing = [k for k in _REQUIRED[cfg.command] if k not in raw]
    if missing:
        raise ConfigError(f"missing required field {missing[0]!r} for command {cfg.command!r}",
                          key=missing[0])
    return cfg


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


@dataclass
class ChainSpec:
    Q: np.ndarray
    mu: np.ndarray | None = None


def parse_chain(text):
    """Parse a chain document; the ``Q`` rows must match ``n_states``."""
    raw = _load(text)
    ck = _Checker(text)
    for key in raw:
        if key not in ("n_states", "Q", "mu"):
            ck.fail(f"unknown key {key!r}", key)
    for key in ("n_states", "Q"):
        if key not in raw:
            raise ConfigError(f"missing required field {key!r}", key=key)
    n = ck.number(raw["n_states"], "n_states", lo=1, integer=True)
    Q = raw["Q"]
    if not isinstance(Q, list) or len(Q) != n or any(not isinstance(r, list) or len(r) != n
                                                     for r in Q):
        ck.fail(f"Q must be {n} rows of {n} numbers", "Q")
    try:
        Qa = np.array([[float(ck.number(v, "Q")) for v in row] for row in Q])
    except (TypeError, ValueError):
        ck.fail("Q entries must be numbers", "Q")
    mu = None
    if "mu" in raw:
        m = raw["mu"]
        if not isinstance(m, list) or len(m) != n:
            ck.fail(f"mu must list {n} probabilities", "mu")
        mu = np.array([float(ck.number(v, "mu", lo=0.0)) for v in m])
        if abs(mu.sum() - 1.0) > 1e-9:
            ck.fail("mu must sum to 1", "mu")
    return ChainSpec(Qa, mu)


def load_chain(path):
    """Read a chain file and return ``(AbsorbingChain, mu or None)``."""
    from .green_lab import AbsorbingChain

    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    spec = parse_chain(text)
    try:
        return AbsorbingChain(spec.Q), spec.mu
    except ChainError as exc:
        raise ConfigError(f"invalid chain in {path}: {exc}", key="Q",
                          line=_line_index(text).get("Q")) from None
