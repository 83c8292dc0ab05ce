"""Uniform randomization of simple graphs with a fixed degree sequence."""
from .chain import (
    DEFAULT_PL,
    ChainState,
    SwitchDescriptor,
    SwitchOutcome,
    apply_global_switch,
    apply_switch,
    inverse_global_switch,
    run_es,
    run_es_supersteps,
    run_global_es,
)
from .errors import (
    Busy,
    EdgeSwitchError,
    InsufficientData,
    InvalidGraph,
    InvariantViolation,
    NotGraphical,
    RetriesExhausted,
    StaleTicket,
    TooLarge,
    UnknownState,
)
from .graph import EdgeList, degree_sequence_of, gen_gnp, havel_hakimi, is_graphical, read_edge_list, write_edge_list
from .parallel import ALGORITHMS, EagerES, SteadyGlobalES, eager_es, make_chain, steady_global_es, steady_global_switch
from .rng import GlobalSwitch, RandomStream, RandomSwitchSource, RecordingSwitchSource, ReplaySwitchSource

__version__ = "0.1.0"
