"""Multi-version STM history checkers and a graph-testing engine."""

from .model import (
    ABORT,
    OK,
    T0,
    Event,
    EventKind,
    History,
    InvalidHistoryError,
    NotAbortedError,
    NotSequentialError,
    OpKind,
    Operation,
    TxnStatus,
    WellFormednessError,
    abort_op,
    begin_op,
    build_history,
    commit_op,
    equivalent,
    flatten,
    is_sequential,
    mvc_completion,
    ops_history,
    opq_completions,
    read_op,
    real_time_order,
    subhistory_committed,
    subhistory_until_abort,
    try_commit_op,
    write_op,
)
from .semantics import (
    is_legal,
    is_multiversioned,
    is_valid,
    last_write_of,
    resolve_read,
    valid_write_of,
)
from .conflicts import (
    ConflictPair,
    Cycle,
    MvcGraph,
    MvcOrder,
    PairKind,
    TopoOrder,
    acyclic_witness,
    build_mvcg,
    commit_ref,
    conflict_order,
    export_dot,
    mvc_order,
    read_ref,
    satisfies,
)
from .membership import (
    CancelToken,
    CancelledError,
    NotPermissiveError,
    TooLargeError,
    Verdict,
    audit_olsness,
    audit_permissiveness,
    check_co_opacity,
    check_mvc_local_opacity,
    check_mvc_opacity,
    check_mvc_opacity_bruteforce,
    check_opacity_bruteforce,
)
from .engine import EngineMode, GcStats, ProtocolViolation, SgtEngine
from .harness import (
    AdversaryScript,
    Begin,
    Branch,
    ChoiceRead,
    Commit,
    Read,
    RunMetrics,
    UnknownVersionError,
    WorkloadConfig,
    Write,
    compare_modes,
    generate_workload,
    replay_adversary,
    run_workload,
    version_choice_dilemma_script,
)
from .trace import ParseError, parse_trace, serialize_trace

__version__ = "0.1.0"
