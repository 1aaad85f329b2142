"""Link-level simulator for grant-free massive random access.

A bilinear-AMP detector jointly estimates user activity, channels and soft
data symbols; a BP LDPC decoder exchanges extrinsic LLRs with it in a turbo
loop. The package also ships the conventional baselines and a Monte Carlo
harness for activity-error / NMSE / BLER sweeps.
"""

from .campaign import CampaignResult, build_world, run_campaign, run_trial, write_outputs
from .config import SystemConfig, load_config, reduced_config, table1_config
from .detector import DetectorConfig, DetectorOutput
from .ldpc import LdpcCode, load_code
from .metrics import TrialMetrics, activity_error, bler, channel_nmse
from .scenario import ActivityPattern, PilotMatrix, UserPopulation
from .turbo import (
    RECEIVER_NAMES,
    ReceiverResult,
    baseline_data_assisted,
    baseline_separate,
    genie_turbo,
    run_receiver,
    run_turbo,
)

__version__ = "0.1.0"

__all__ = [
    "ActivityPattern",
    "CampaignResult",
    "DetectorConfig",
    "DetectorOutput",
    "LdpcCode",
    "PilotMatrix",
    "RECEIVER_NAMES",
    "ReceiverResult",
    "SystemConfig",
    "TrialMetrics",
    "UserPopulation",
    "activity_error",
    "baseline_data_assisted",
    "baseline_separate",
    "bler",
    "build_world",
    "channel_nmse",
    "genie_turbo",
    "load_code",
    "load_config",
    "reduced_config",
    "run_campaign",
    "run_receiver",
    "run_trial",
    "run_turbo",
    "table1_config",
    "write_outputs",
]
