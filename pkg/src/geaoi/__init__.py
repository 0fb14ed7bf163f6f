"""Average Age of Information over Gilbert-Elliott erasure channels."""

from .analytic import (
    Bernoulli,
    GenerateAtWill,
    Periodic,
    Policy,
    aoi_fcfs_bernoulli,
    aoi_fcfs_gaw,
    aoi_gap_bernoulli,
    aoi_plgfs,
    average_aoi,
)
from .channel import BAD, GOOD, ChannelParams, ChannelState, good_count_distribution, make_symmetric
from .periodic_fcfs import aoi_periodic_fcfs
from .simulator import SimConfig, SimResult, run_experiment, simulate_trajectory

__version__ = "0.1.0"

__all__ = [
    "BAD",
    "GOOD",
    "Bernoulli",
    "ChannelParams",
    "ChannelState",
    "GenerateAtWill",
    "Periodic",
    "Policy",
    "SimConfig",
    "SimResult",
    "aoi_fcfs_bernoulli",
    "aoi_fcfs_gaw",
    "aoi_gap_bernoulli",
    "aoi_periodic_fcfs",
    "aoi_plgfs",
    "average_aoi",
    "good_count_distribution",
    "make_symmetric",
    "run_experiment",
    "simulate_trajectory",
]
