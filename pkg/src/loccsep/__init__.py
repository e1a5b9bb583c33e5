"""Conclusive cloning, unambiguous discrimination and state separation of two
product states, globally and under LOCC."""
from .errors import (
    DimensionError,
    IncompleteInstrumentError,
    InfeasibleSeparationError,
    LoccSepError,
    PreconditionError,
    ProtocolParseError,
    ProtocolStructureError,
    UndefinedTaskError,
)
from .locc import (
    EvalReport,
    Leaf,
    LoccTask,
    Measurement,
    audit_bound,
    build_chain_protocol,
    build_discrimination_protocol,
    build_protocol_pprime,
    evaluate_exact,
    one_round_audit,
    simulate_mc,
)
from .qcore import (
    Instrument,
    KrausOperator,
    PureState,
    apply,
    gauge_align,
    inner,
    random_instrument,
    random_state,
    tensor,
)
from .separation import (
    SeparationChannel,
    SeparationTask,
    build_discrimination_channel,
    build_separation_channel,
    check_chain_inequalities,
    eta_discrimination,
    eta_global_cloning,
    eta_global_separation,
    eta_locc_cloning,
    eta_locc_separation,
    eta_locc_upper_bound,
    eta_separation_upper_bound,
)

__version__ = "0.1.0"
