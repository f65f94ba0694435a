"""Self-stabilizing ranking population protocol: simulator, safety checkers,
and benchmark harness."""

from .blocks import epidemic_step, lsle_step, phase_clock_step
from .core import (
    AgentState,
    Configuration,
    ConfigurationError,
    Mode,
    ParameterError,
    ProtocolParams,
    RngStream,
    config_from_json,
    config_to_json,
    new_params,
    phase,
    sample_ordered_pair,
    state_space_bits,
)
from .detect import RNameView, detect_init, detect_step, is_king, is_ronin, is_vassal, trust
from .harness import (
    ExperimentSpec,
    GENERATORS,
    RunReport,
    closure_fuzz,
    generate_config,
    run,
    sweep,
)
from .protocol import (
    count_colliding_pairs,
    in_initialized_set,
    in_safe_set,
    interact,
)
from .rank import rank_init, rank_step
from .target import TargetFinder, get_target_finder, register_target_finder, target_init, target_step

__version__ = "0.1.0"
