"""Superposition evolution for the three machine families.

Counter and stack machines consume #  x  $ one symbol at a time through
per-symbol sparse operators grounded over the truncation window.  Tape
machines evolve for a fixed number of steps on a finite tape window with
final states frozen in place, so running longer than the halting time leaves
the outcome unchanged.  Every run records the norm after each step; a
well-formed machine keeps it at 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

from .amplitudes import (
    DomainError,
    SparseOperator,
    Superposition,
    WindowLeakError,
    apply,
)
from .machines import (
    CounterMachine,
    DOLLAR,
    HASH,
    SimulationBounds,
    StackMachine,
    TapeConfig,
    TapeMachine,
    derive_bounds,
    ground_rules,
    machine_symbols,
)

__all__ = [
    "RunResult",
    "build_evolution",
    "build_adjoint_evolution",
    "accept_probability",
    "input_sequence",
    "run_counter_machine",
    "run_stack_machine",
    "run_machine",
    "qtm_step",
    "run_qtm",
]


@dataclass(frozen=True)
class RunResult:
    final: Superposition
    probability: float
    steps: int
    norms: tuple[float, ...]
    trace: tuple[Superposition, ...] | None = None
    halted: bool | None = None
    halt_step: int | None = None


def input_sequence(x: Sequence[str]) -> list[str]:
    """The symbol stream a machine actually consumes: # x $."""
    return [HASH, *x, DOLLAR]


def accept_probability(s: Superposition, accept: str) -> float:
    return sum(abs(amp) ** 2 for config, amp in s.items() if config.state == accept)


@lru_cache(maxsize=256)
def build_evolution(machine: CounterMachine | StackMachine, symbol: str,
                    bounds: SimulationBounds) -> SparseOperator:
    """Per-symbol evolution operator over the window.

    Sources that lost rule instances to truncation are poisoned rather than
    silently renormalized: applying the operator to them raises a window leak.
    """
    if symbol not in machine_symbols(machine):
        raise DomainError(f"symbol {symbol!r} not in the machine's alphabet")
    grounded = ground_rules(machine, bounds)
    cols: dict = {}
    for rule in grounded.by_symbol.get(symbol, ()):
        cols.setdefault(rule.source, []).append((rule.target, rule.amp))
    return SparseOperator(columns={src: tuple(entries) for src, entries in cols.items()},
                          identity_default=machine.complete_with_identity,
                          leaky=grounded.clipped.get(symbol, frozenset()))


def build_adjoint_evolution(machine: CounterMachine | StackMachine, symbol: str,
                            bounds: SimulationBounds) -> SparseOperator:
    """Exact conjugate transpose of build_evolution over the same window.

    Implicit identity columns of the forward operator contribute self-loops,
    and forward sources that receive no amplitude get explicit empty columns,
    so the adjoint's matrix equals the conjugate transpose entry for entry.
    """
    forward = build_evolution(machine, symbol, bounds)
    cols: dict = {}
    for src, entries in forward.columns.items():
        for tgt, amp in entries:
            cols.setdefault(tgt, []).append((src, amp.conjugate()))
    if forward.identity_default:
        for tgt in cols:
            if tgt not in forward.columns:
                cols[tgt].append((tgt, complex(1.0)))
    for src in forward.columns:
        cols.setdefault(src, [])
    return SparseOperator(
        columns={key: tuple(sorted(entries, key=lambda e: e[0])) for key, entries in cols.items()},
        identity_default=forward.identity_default,
        leaky=forward.leaky)


def run_machine(machine: CounterMachine | StackMachine, x: Sequence[str],
                bounds: SimulationBounds | None = None, trace: bool = False) -> RunResult:
    """Consume # x $ from the initial configuration; returns the final
    superposition and the accept-state probability mass."""
    seq = input_sequence(x)
    allowed = set(machine.input_alphabet) | set(machine.padding)
    for sym in x:
        if sym not in allowed:
            raise DomainError(f"input symbol {sym!r} not in the machine's alphabet")
    if bounds is None:
        bounds = derive_bounds(machine, len(seq))
    s = Superposition.basis(machine.initial_config())
    norms = [1.0]
    steps = [s] if trace else None
    for symbol in seq:
        op = build_evolution(machine, symbol, bounds)
        try:
            s = apply(op, s)
        except WindowLeakError as exc:
            raise WindowLeakError(
                f"window leak while consuming {symbol!r}: {exc}",
                config=exc.config, step=len(norms)) from None
        norms.append(s.norm2() ** 0.5)
        if trace:
            steps.append(s)
    return RunResult(final=s, probability=accept_probability(s, machine.accept),
                     steps=len(seq), norms=tuple(norms),
                     trace=tuple(steps) if trace else None)


def run_counter_machine(machine: CounterMachine, x: Sequence[str],
                        bounds: SimulationBounds | None = None,
                        trace: bool = False) -> RunResult:
    if not isinstance(machine, CounterMachine):
        raise DomainError("expected a counter machine")
    return run_machine(machine, x, bounds, trace)


def run_stack_machine(machine: StackMachine, x: Sequence[str],
                      bounds: SimulationBounds | None = None,
                      trace: bool = False) -> RunResult:
    if not isinstance(machine, StackMachine):
        raise DomainError("expected a stack machine")
    return run_machine(machine, x, bounds, trace)


def _tape_rule_index(machine: TapeMachine) -> dict:
    index: dict = {}
    for rule in machine.rules:
        if abs(rule.amp) > 0.0:
            index.setdefault((rule.state, rule.read), []).append(rule)
    return index


def qtm_step(machine: TapeMachine, s: Superposition, radius: int,
             rule_index: dict | None = None) -> Superposition:
    """One synchronous step.  Final-state configurations are frozen in place;
    non-final configurations with no applicable rule evolve to zero, which the
    isometry check reports rather than this function."""
    index = _tape_rule_index(machine) if rule_index is None else rule_index
    finals = {machine.accept, machine.reject}
    out: dict = {}
    for config, amp in s.items():
        if config.state in finals:
            out[config] = out.get(config, 0.0) + amp
            continue
        cell = config.head + radius
        read = config.tape[cell]
        for rule in index.get((config.state, read), ()):
            head = config.head + (1 if rule.move == "R" else -1)
            if abs(head) > radius:
                raise WindowLeakError(f"head left the tape window at {config}",
                                      config=config)
            tape = config.tape
            if rule.write != read:
                tape = tape[:cell] + (rule.write,) + tape[cell + 1:]
            target = TapeConfig(rule.to, tape, head)
            out[target] = out.get(target, 0.0) + amp * rule.amp
    return Superposition(out)


def run_qtm(machine: TapeMachine, x: Sequence[str], t: int,
            bounds: SimulationBounds | None = None, trace: bool = False) -> RunResult:
    """Evolve for t steps on a window of radius T (default t).

    halted means every branch reached a final state by step t and no branch
    reached one strictly before the common halting step.
    """
    if t < 0:
        raise DomainError("step count must be nonnegative")
    for sym in x:
        if sym not in machine.input_alphabet:
            raise DomainError(f"input symbol {sym!r} not on the tape alphabet")
    radius = bounds.radius if bounds is not None and bounds.radius is not None else max(1, t)
    s = Superposition.basis(machine.initial_config(x, radius))
    index = _tape_rule_index(machine)
    finals = {machine.accept, machine.reject}
    norms = [1.0]
    steps = [s] if trace else None
    any_final = [any(c.state in finals for c in s.keys())]
    all_final = [bool(len(s)) and all(c.state in finals for c in s.keys())]
    for _ in range(t):
        s = qtm_step(machine, s, radius, index)
        norms.append(s.norm2() ** 0.5)
        any_final.append(any(c.state in finals for c in s.keys()))
        all_final.append(bool(len(s)) and all(c.state in finals for c in s.keys()))
        if trace:
            steps.append(s)
    halt_step = next((j for j, done in enumerate(all_final) if done), None)
    halted = halt_step is not None and not any(any_final[j] for j in range(halt_step))
    return RunResult(final=s, probability=accept_probability(s, machine.accept),
                     steps=t, norms=tuple(norms), trace=tuple(steps) if trace else None,
                     halted=halted, halt_step=halt_step)
