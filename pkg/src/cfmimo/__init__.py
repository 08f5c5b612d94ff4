"""Downlink user scheduling for multicell and cell-free massive MIMO.

The package builds drops of a shared square coverage area, draws channels for
both a cellular (one multi-antenna BS per cell) and a cell-free (distributed
single-antenna APs) deployment, and compares exhaustive, greedy ZFS and
multi-candidate enhanced greedy user scheduling under ZF and MMSE precoding.
"""

__version__ = "0.1.0"

from .scenario import (
    ChannelRealization,
    Scenario,
    ScenarioConfig,
    generate_scenario,
    large_scale_coeff,
    path_loss_db,
    realize_channels,
)
from .precoding import (
    PrecoderOutput,
    equal_power,
    mmse_precoder,
    normalize_power,
    waterfill,
    zf_precoder,
)
from .rates import (
    RateReport,
    cellfree_sum_rate,
    log2det,
    multicell_sum_rate,
    sum_channel_correlation,
    zf_throughput,
)
from .flops import FlopCounter
from .scheduling import (
    ScheduleResult,
    enhanced_greedy_schedule,
    exhaustive_schedule,
    zfs_schedule,
)
from .harness import ExperimentConfig, SweepReport, cluster_aps, run_sweep

__all__ = [
    "ChannelRealization",
    "ExperimentConfig",
    "FlopCounter",
    "PrecoderOutput",
    "RateReport",
    "Scenario",
    "ScenarioConfig",
    "ScheduleResult",
    "SweepReport",
    "cellfree_sum_rate",
    "cluster_aps",
    "enhanced_greedy_schedule",
    "equal_power",
    "exhaustive_schedule",
    "generate_scenario",
    "large_scale_coeff",
    "log2det",
    "mmse_precoder",
    "multicell_sum_rate",
    "normalize_power",
    "path_loss_db",
    "realize_channels",
    "run_sweep",
    "sum_channel_correlation",
    "waterfill",
    "zf_precoder",
    "zf_throughput",
    "zfs_schedule",
]
