"""Quasi-stationary distributions of absorbed processes via reinforced restarts."""
from .benchmarks import (ReferenceQSD, fd_eigensolver, ks_distance, reference_bm_disk,
                         reference_bm_interval)
from .config import ExperimentConfig, parse_config
from .diffusion import (DiffusionModel, Domain, ball, box, detect_absorption, estimate_green_mc,
                        euler_step, interval, simulate_until_absorption)
from .green_lab import (AbsorbingChain, apt_check, green, green_power, reinforced_chain,
                        semigroup, spectral, verify_exp_flow_bound, verify_powers_bound)
from .measures import DiscreteMeasure, OccupationMeasure
from .models import make_model
from .reinforced import Diagnostics, ReinforcedTrace, lambda0_estimate, run_reinforced
from .runner import run_experiment

__version__ = "0.1.0"
