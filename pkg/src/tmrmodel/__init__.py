"""CTMC dependability models of partitioned TMR designs under configuration scrubbing."""

from .builder import build_chain, build_system, compose, export_prism
from .engine import availability, reliability, steady_state, transient
from .ingest import parse_config, parse_dfg, parse_library, plan_partitions
from .model import ComposedCtmc, RateParams
from .simulator import simulate
from .sweep import calibrate_lambda_bit, emit_csv, run_sweep

__version__ = "0.1.0"
