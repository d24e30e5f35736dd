"""Personalized resource allocation driven by predicted zones of tolerance."""
from .allocator import (NonPersonalized, Personalized, UserAllocation, allocate_rbs, exhaustive_allocate,
                        optimize_delta, policy_from_name, target_rate)
from .channel import CellConfig, ChannelSampler, ChannelState, noise_power_dbm, path_loss_db, rb_rate
from .config import SimulationConfig
from .pipeline import compare, run_development, run_production
from .predictor import TrainReport, TwoPhaseModel, cluster_personas, train
from .synth import Persona, Trace, default_personas, emit_dataset, generate_trace, read_dataset
from .zot import ZoTProfile, delta_of, min_qos_for, satisfaction_of, zot_bounds

__version__ = "0.1.0"
