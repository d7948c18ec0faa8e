"""Quantum counter, stack, and tape machines: unitarity checking, windowed
simulation, and probability-preserving translation between the three models."""

from .amplitudes import (
    DomainError,
    SparseOperator,
    Superposition,
    WindowLeakError,
    apply,
    check_unitary,
    inner_product,
    to_matrix,
)
from .machine_io import ParseError, load_machine, parse_machine, save_machine
from .machines import (
    CounterConfig,
    CounterMachine,
    CounterRule,
    IntExpr,
    IntPattern,
    SimulationBounds,
    StackConfig,
    StackMachine,
    StackRule,
    TapeConfig,
    TapeMachine,
    TapeRule,
    derive_bounds,
    validate_machine,
)
from .simulate import (
    RunResult,
    accept_probability,
    build_adjoint_evolution,
    build_evolution,
    run_counter_machine,
    run_machine,
    run_qtm,
    run_stack_machine,
)
from .transpile import (
    EquivalenceReport,
    PipelineResult,
    TmEncodingPlan,
    all_inputs,
    check_intertwining,
    compare_acceptance,
    counters_to_stacks,
    reduce_to_unit_counts,
    split_counter_radix,
    tm_to_counters,
    tm_to_stacks,
)
from .wf import (
    WfReport,
    check_counter_machine,
    check_machine,
    check_stack_machine,
    check_tm_isometry,
    matrix_crosscheck,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
