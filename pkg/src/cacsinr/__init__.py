"""Outage-driven call admission control and Angle-SINR Table discovery."""

from .cac import AdmissionDecision, CacPolicy, CallArrival, CallKind, PolicyVariant, admit, max_admissible
from .channel import ChannelModel, build_toeplitz, channel_output, estimate_sinr, gen_symbols
from .discovery import (
    ANGLES,
    BELOW_DETECTION,
    AngleSinrTable,
    DiscoveryNetwork,
    NodePosition,
    PropagationConfig,
    ProtocolConfig,
    assemble_ast,
    best_angle,
    link_sinr,
    offline_ast,
    run_discovery,
)
from .errors import CacsinrError, ConfigurationError, DomainError, InfeasibleError
from .outage import (
    CellState,
    OutageEstimate,
    PowerAllocation,
    SystemConfig,
    TrafficClass,
    active_count_moments,
    allocate_powers,
    ber_to_x,
    class_thresholds,
    outage_gaussian,
    outage_montecarlo,
    power_ratio,
    q_function,
    single_class_capacity,
    trsp_moments,
)
from .traffic import SimConfig, SimMetrics, compare_cacs, erlang_b, run_sim

__version__ = "0.1.0"
