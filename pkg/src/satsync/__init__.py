"""Scale-free synchronization protocols for saturated multi-agent systems.

Synthesizes observer-based coupling controllers from a single agent
model -- never from the network -- simulates the resulting closed loop
over arbitrary directed graphs with a well-connected root set, and
checks convergence and energy-decrease certificates numerically.
"""

from .agents import (
    AgentModel,
    Classification,
    EigenCluster,
    MixedDecomposition,
    ModelClass,
    classify,
    mixed_decompose,
    saturate,
    saturation_potential,
)
from .analysis import (
    LyapunovCertificate,
    RunRecord,
    ScaleFreeCase,
    SyncReport,
    export_report,
    gain_margin_runs,
    gain_margin_sweep,
    lyapunov_certificate_P1,
    lyapunov_trace_P3,
    parse_report,
    scale_free_runs,
    scale_free_sweep,
    sync_metrics,
    v_trace_violation,
)
from .errors import IntegrationError, SynthesisError, ValidationError
from .gains import (
    GainCheck,
    GainReport,
    GainSet,
    design_F,
    design_K_double,
    design_K_mixed,
    solve_P_neutral,
    synthesize_gains,
    verify_gains,
)
from .graphs import (
    CommGraph,
    check_rootset,
    generate_graph,
    laplacian,
    load_graph,
    parse_graph,
    save_graph,
    serialize_graph,
)
from .presets import preset_names, preset_scenario
from .protocols import (
    KINDS,
    NetworkSignals,
    ProtocolRealization,
    build_protocol,
    compatible_classes,
    compute_network_signals,
)
from .scenario import build_scenario, parse_scenario, parse_scenario_doc, scenario_echo
from .simulation import (
    Scenario,
    TrajectoryRecord,
    exosystem_reference,
    export_trajectory,
    read_trajectory,
    simulate,
)

__version__ = "0.1.0"

__all__ = [
    "AgentModel",
    "Classification",
    "CommGraph",
    "EigenCluster",
    "GainCheck",
    "GainReport",
    "GainSet",
    "IntegrationError",
    "KINDS",
    "LyapunovCertificate",
    "MixedDecomposition",
    "ModelClass",
    "NetworkSignals",
    "ProtocolRealization",
    "RunRecord",
    "ScaleFreeCase",
    "Scenario",
    "SyncReport",
    "SynthesisError",
    "TrajectoryRecord",
    "ValidationError",
    "build_protocol",
    "build_scenario",
    "check_rootset",
    "classify",
    "compatible_classes",
    "compute_network_signals",
    "design_F",
    "design_K_double",
    "design_K_mixed",
    "exosystem_reference",
    "export_report",
    "export_trajectory",
    "gain_margin_runs",
    "gain_margin_sweep",
    "generate_graph",
    "laplacian",
    "load_graph",
    "lyapunov_certificate_P1",
    "lyapunov_trace_P3",
    "mixed_decompose",
    "parse_graph",
    "parse_report",
    "parse_scenario",
    "parse_scenario_doc",
    "preset_names",
    "preset_scenario",
    "read_trajectory",
    "save_graph",
    "saturate",
    "saturation_potential",
    "scale_free_runs",
    "scale_free_sweep",
    "scenario_echo",
    "serialize_graph",
    "simulate",
    "solve_P_neutral",
    "synthesize_gains",
    "sync_metrics",
    "v_trace_violation",
    "verify_gains",
]
