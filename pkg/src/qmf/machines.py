"""Machine descriptions, rule schemas, and windowed rule grounding.

Three machine families share one rule vocabulary:

* counter machines: tuples of nonnegative counters, per-rule deltas drawn
  from a declared finite set containing 0;
* stack machines: tuples of stacks over a finite alphabet with a reserved
  bottom symbol that is never pushed, popped, or buried;
* tape machines: a two-way infinite tape with a single head, simulated on a
  finite window.

Rule schemas give a finite encoding of infinite rule families: source
coordinates are literals or range variables (inclusive, optionally unbounded
above), targets are single-variable affine expressions for counters and
push/pop/keep patterns for stacks.  Grounding instantiates a schema inside a
finite window; instances whose target leaves the window are dropped and their
sources remembered, so downstream checks can mark them inconclusive instead
of silently judging a truncated rule family.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, NamedTuple, Sequence

from .amplitudes import DomainError, WindowLeakError

__all__ = [
    "HASH",
    "DOLLAR",
    "RESERVED_SYMBOLS",
    "CounterConfig",
    "StackConfig",
    "TapeConfig",
    "IntPattern",
    "IntExpr",
    "StackPattern",
    "StackExpr",
    "CounterRule",
    "StackRule",
    "TapeRule",
    "ExplicitRule",
    "CounterMachine",
    "StackMachine",
    "TapeMachine",
    "SimulationBounds",
    "Violation",
    "validate_machine",
    "enumerate_rules",
    "ground_rules",
    "GroundedRules",
    "reachable_configs",
    "derive_bounds",
    "counter_window",
    "stack_window",
    "machine_symbols",
]

HASH = "#"
DOLLAR = "$"
# Names reserved for the input framing and the tape-to-counter padding blocks.
RESERVED_SYMBOLS = frozenset({HASH, DOLLAR, "B2", "B3", "B4"})

WINDOW_GUARD = 200_000


class CounterConfig(NamedTuple):
    state: str
    counters: tuple[int, ...]

    def __str__(self) -> str:
        return f"({self.state}|{','.join(map(str, self.counters))})"


class StackConfig(NamedTuple):
    state: str
    stacks: tuple[tuple[str, ...], ...]

    def __str__(self) -> str:
        body = ";".join("".join(s) for s in self.stacks)
        return f"({self.state}|{body})"


class TapeConfig(NamedTuple):
    state: str
    tape: tuple[str, ...]
    head: int

    def __str__(self) -> str:
        return f"({self.state}|{''.join(self.tape)}|head={self.head})"


@dataclass(frozen=True)
class IntPattern:
    """Source counter coordinate: a literal value or a range variable."""

    value: int | None = None
    var: str | None = None
    lo: int | None = None
    hi: int | None = None  # None means unbounded above

    def is_literal(self) -> bool:
        return self.value is not None


@dataclass(frozen=True)
class IntExpr:
    """Target counter coordinate: const, or var + const for a bound variable."""

    var: str | None
    const: int

    def evaluate(self, env: dict[str, int]) -> int:
        return self.const if self.var is None else env[self.var] + self.const


@dataclass(frozen=True)
class StackPattern:
    """Source stack coordinate.

    Literal form: prefix is the whole stack (bottom symbol last), rest None.
    Variable form: prefix is a literal top segment and rest names the part
    below it; lo/hi bound the height of the whole matched stack, counted as
    symbols above the bottom marker.
    """

    prefix: tuple[str, ...]
    rest: str | None = None
    lo: int | None = None
    hi: int | None = None

    def is_literal(self) -> bool:
        return self.rest is None


@dataclass(frozen=True)
class StackExpr:
    prefix: tuple[str, ...]
    rest: str | None = None


@dataclass(frozen=True)
class CounterRule:
    state: str
    symbol: str
    pre: tuple[IntPattern, ...]
    post: tuple[IntExpr, ...]
    to: str
    amp: complex


@dataclass(frozen=True)
class StackRule:
    state: str
    symbol: str
    pre: tuple[StackPattern, ...]
    post: tuple[StackExpr, ...]
    to: str
    amp: complex


@dataclass(frozen=True)
class TapeRule:
    state: str
    read: str
    write: str
    to: str
    move: str  # "L" or "R"
    amp: complex


@dataclass(frozen=True)
class ExplicitRule:
    source: CounterConfig | StackConfig
    symbol: str
    target: CounterConfig | StackConfig
    amp: complex


@dataclass(frozen=True)
class CounterMachine:
    states: tuple[str, ...]
    initial: str
    accept: str
    reject: str
    input_alphabet: tuple[str, ...]
    counters: int
    allowed_deltas: tuple[int, ...]
    rules: tuple[CounterRule, ...]
    padding: tuple[str, ...] = ()
    complete_with_identity: bool = False

    @property
    def model(self) -> str:
        return "qmcm"

    def initial_config(self) -> CounterConfig:
        return CounterConfig(self.initial, (0,) * self.counters)

    def max_delta(self) -> int:
        return max(abs(d) for d in self.allowed_deltas)


@dataclass(frozen=True)
class StackMachine:
    states: tuple[str, ...]
    initial: str
    accept: str
    reject: str
    input_alphabet: tuple[str, ...]
    stacks: int
    stack_alphabet: tuple[str, ...]
    bottom: str
    rules: tuple[StackRule, ...]
    padding: tuple[str, ...] = ()
    complete_with_identity: bool = False

    @property
    def model(self) -> str:
        return "qmsm"

    def initial_config(self) -> StackConfig:
        return StackConfig(self.initial, ((self.bottom,),) * self.stacks)

    def pushable(self) -> tuple[str, ...]:
        return tuple(sym for sym in self.stack_alphabet if sym != self.bottom)


@dataclass(frozen=True)
class TapeMachine:
    states: tuple[str, ...]
    initial: str
    accept: str
    reject: str
    input_alphabet: tuple[str, ...]  # full tape alphabet, blank included
    blank: str
    rules: tuple[TapeRule, ...]

    @property
    def model(self) -> str:
        return "qtm"

    def initial_config(self, x: Sequence[str], radius: int) -> TapeConfig:
        if len(x) > radius + 1:
            raise DomainError(f"input of length {len(x)} does not fit in window radius {radius}")
        tape = [self.blank] * (2 * radius + 1)
        for j, sym in enumerate(x):
            tape[j + radius] = sym
        return TapeConfig(self.initial, tuple(tape), 0)


Machine = CounterMachine | StackMachine | TapeMachine


@dataclass(frozen=True)
class SimulationBounds:
    """Finite truncation window: counter cap, stack height cap, tape radius."""

    n_max: int | None = None
    d_max: int | None = None
    radius: int | None = None
    tol: float = 1e-9

    def __post_init__(self):
        for name in ("n_max", "d_max", "radius"):
            value = getattr(self, name)
            if value is not None and (not isinstance(value, int) or value < 1):
                raise DomainError(f"{name} must be a positive integer, got {value!r}")
        if not (0.0 < self.tol < 1e-3):
            raise DomainError(f"tol must lie in (0, 1e-3), got {self.tol!r}")


def derive_bounds(machine: Machine, planned_symbols: int, t: int | None = None,
                  tol: float = 1e-9) -> SimulationBounds:
    """Default window for a run consuming planned_symbols input symbols."""
    s = max(1, planned_symbols)
    if isinstance(machine, CounterMachine):
        return SimulationBounds(n_max=s * machine.max_delta() + 1, tol=tol)
    if isinstance(machine, StackMachine):
        return SimulationBounds(d_max=s + 1, tol=tol)
    if isinstance(machine, TapeMachine):
        if t is None:
            raise DomainError("tape machines need a step count to derive a window")
        return SimulationBounds(radius=max(1, t), tol=tol)
    raise DomainError(f"unknown machine type {type(machine).__name__}")


@dataclass(frozen=True)
class Violation:
    clause: str
    message: str
    rule: int | None = None

    def to_json(self) -> dict:
        return {"clause": self.clause, "message": self.message, "rule": self.rule}


def machine_symbols(machine: CounterMachine | StackMachine) -> tuple[str, ...]:
    """All symbols the machine can consume: alphabet, padding, endmarkers."""
    return tuple(machine.input_alphabet) + tuple(machine.padding) + (HASH, DOLLAR)


def _check_common(machine, out: list[Violation]) -> None:
    seen = set()
    for q in machine.states:
        if q in seen:
            out.append(Violation("states", f"duplicate state {q!r}"))
        seen.add(q)
    for name in ("initial", "accept", "reject"):
        q = getattr(machine, name)
        if q not in seen:
            out.append(Violation("states", f"{name} state {q!r} not among declared states"))
    alpha = list(machine.input_alphabet)
    if len(set(alpha)) != len(alpha):
        out.append(Violation("alphabet", "duplicate input symbols"))
    clash = RESERVED_SYMBOLS & set(alpha)
    if clash:
        out.append(Violation("alphabet", f"reserved symbols used in input alphabet: {sorted(clash)}"))
    padding = tuple(getattr(machine, "padding", ()))
    if set(padding) & set(alpha):
        out.append(Violation("alphabet", "padding symbols overlap the input alphabet"))
    if set(padding) & {HASH, DOLLAR}:
        out.append(Violation("alphabet", "endmarkers cannot be padding symbols"))


def _counter_rule_violations(machine: CounterMachine, idx: int, rule: CounterRule,
                             out: list[Violation]) -> None:
    symbols = set(machine_symbols(machine))
    states = set(machine.states)
    if rule.state not in states or rule.to not in states:
        out.append(Violation("states", f"rule uses undeclared state", rule=idx))
    if rule.symbol not in symbols:
        out.append(Violation("symbol", f"rule consumes undeclared symbol {rule.symbol!r}", rule=idx))
    if len(rule.pre) != machine.counters or len(rule.post) != machine.counters:
        out.append(Violation("arity", f"rule has {len(rule.pre)}/{len(rule.post)} coordinates, "
                                      f"machine has {machine.counters}", rule=idx))
        return

    ranges: dict[str, tuple[int, int | None]] = {}
    for c, pat in enumerate(rule.pre):
        if pat.is_literal():
            if pat.value < 0:
                out.append(Violation("nonnegative", f"coordinate {c}: negative source literal", rule=idx))
            continue
        if pat.var in ranges:
            out.append(Violation("binding", f"variable {pat.var!r} bound twice", rule=idx))
        if pat.lo is None or pat.lo < 0:
            out.append(Violation("range", f"variable {pat.var!r} needs a nonnegative lower bound", rule=idx))
            continue
        if pat.hi is not None and pat.hi < pat.lo:
            out.append(Violation("range", f"variable {pat.var!r} has empty range", rule=idx))
        ranges[pat.var] = (pat.lo, pat.hi)

    deltas = set(machine.allowed_deltas)
    for c, (pat, expr) in enumerate(zip(rule.pre, rule.post)):
        if expr.var is not None and expr.var not in ranges:
            out.append(Violation("binding", f"coordinate {c}: target variable {expr.var!r} "
                                            f"is not bound by any source pattern", rule=idx))
            continue
        # Nonnegativity of the target over every instance.
        if expr.var is None:
            if expr.const < 0:
                out.append(Violation("nonnegative", f"coordinate {c}: negative target", rule=idx))
        else:
            lo, _ = ranges[expr.var]
            if lo + expr.const < 0:
                out.append(Violation("nonnegative", f"coordinate {c}: target can go negative", rule=idx))
        # Allowed-delta check.  With a shared variable the delta is constant;
        # otherwise it sweeps the involved ranges and each value must be allowed.
        if pat.is_literal():
            if expr.var is None:
                if expr.const - pat.value not in deltas:
                    out.append(Violation("allowed-delta",
                                         f"coordinate {c}: delta {expr.const - pat.value:+d} "
                                         f"not in allowed set", rule=idx))
            else:
                lo, hi = ranges[expr.var]
                if hi is None:
                    out.append(Violation("allowed-delta",
                                         f"coordinate {c}: unbounded cross-variable delta", rule=idx))
                else:
                    for v in range(lo, hi + 1):
                        if v + expr.const - pat.value not in deltas:
                            out.append(Violation("allowed-delta",
                                                 f"coordinate {c}: delta {v + expr.const - pat.value:+d} "
                                                 f"not in allowed set", rule=idx))
                            break
        else:
            lo, hi = ranges.get(pat.var, (0, 0))
            if expr.var == pat.var:
                if expr.const not in deltas:
                    out.append(Violation("allowed-delta",
                                         f"coordinate {c}: delta {expr.const:+d} not in allowed set",
                                         rule=idx))
            elif expr.var is None:
                if hi is None:
                    out.append(Violation("allowed-delta",
                                         f"coordinate {c}: unbounded delta to a constant target", rule=idx))
                else:
                    for v in range(lo, hi + 1):
                        if expr.const - v not in deltas:
                            out.append(Violation("allowed-delta",
                                                 f"coordinate {c}: delta {expr.const - v:+d} "
                                                 f"not in allowed set", rule=idx))
                            break
            else:
                olo, ohi = ranges[expr.var]
                if hi is None or ohi is None:
                    out.append(Violation("allowed-delta",
                                         f"coordinate {c}: unbounded cross-variable delta", rule=idx))
                else:
                    ok = all((w + expr.const - v) in deltas
                             for v in range(lo, hi + 1) for w in range(olo, ohi + 1))
                    if not ok:
                        out.append(Violation("allowed-delta",
                                             f"coordinate {c}: cross-variable delta leaves allowed set",
                                             rule=idx))


def _valid_literal_stack(stack: tuple[str, ...], machine: StackMachine) -> str | None:
    if not stack:
        return "stack literal is empty; the bottom symbol must always be present"
    if stack[-1] != machine.bottom:
        return f"stack literal must end with the bottom symbol {machine.bottom!r}"
    if machine.bottom in stack[:-1]:
        return "bottom symbol buried inside a stack literal"
    for sym in stack:
        if sym not in machine.stack_alphabet:
            return f"stack symbol {sym!r} not in the stack alphabet"
    return None


def _stack_rule_violations(machine: StackMachine, idx: int, rule: StackRule,
                           out: list[Violation]) -> None:
    symbols = set(machine_symbols(machine))
    states = set(machine.states)
    if rule.state not in states or rule.to not in states:
        out.append(Violation("states", "rule uses undeclared state", rule=idx))
    if rule.symbol not in symbols:
        out.append(Violation("symbol", f"rule consumes undeclared symbol {rule.symbol!r}", rule=idx))
    if len(rule.pre) != machine.stacks or len(rule.post) != machine.stacks:
        out.append(Violation("arity", f"rule has {len(rule.pre)}/{len(rule.post)} stacks, "
                                      f"machine has {machine.stacks}", rule=idx))
        return

    bound: set[str] = set()
    for c, pat in enumerate(rule.pre):
        if pat.is_literal():
            problem = _valid_literal_stack(pat.prefix, machine)
            if problem:
                clause = "stack-symbols" if "alphabet" in problem else "bottom"
                out.append(Violation(clause, f"stack {c}: {problem}", rule=idx))
            continue
        if pat.rest in bound:
            out.append(Violation("binding", f"stack variable {pat.rest!r} bound twice", rule=idx))
        bound.add(pat.rest)
        if machine.bottom in pat.prefix:
            out.append(Violation("bottom", f"stack {c}: bottom symbol inside a top segment", rule=idx))
        for sym in pat.prefix:
            if sym not in machine.stack_alphabet:
                out.append(Violation("stack-symbols", f"stack {c}: symbol {sym!r} not in alphabet", rule=idx))
        if pat.lo is not None and pat.lo < 0:
            out.append(Violation("range", f"stack {c}: negative height bound", rule=idx))
        if pat.lo is not None and pat.hi is not None and pat.hi < pat.lo:
            out.append(Violation("range", f"stack {c}: empty height range", rule=idx))

    for c, (pat, expr) in enumerate(zip(rule.pre, rule.post)):
        if pat.is_literal():
            if expr.rest is not None:
                out.append(Violation("binding", f"stack {c}: variable target with literal source", rule=idx))
                continue
            problem = _valid_literal_stack(expr.prefix, machine)
            if problem:
                out.append(Violation("bottom", f"stack {c}: {problem}", rule=idx))
                continue
            src, dst = pat.prefix, expr.prefix
            legal = (src == dst
                     or (len(dst) == len(src) + 1 and dst[1:] == src and dst[0] != machine.bottom)
                     or (len(src) == len(dst) + 1 and src[1:] == dst and src[0] != machine.bottom))
            if not legal:
                clause = "bottom" if src == (machine.bottom,) or dst == (machine.bottom,) else "stack-legality"
                out.append(Violation(clause,
                                     f"stack {c}: {''.join(src)} -> {''.join(dst)} is not a "
                                     f"push, pop, or keep of a non-bottom symbol", rule=idx))
            continue
        if expr.rest is None:
            out.append(Violation("stack-legality",
                                 f"stack {c}: literal target with variable source is not "
                                 f"uniformly legal", rule=idx))
            continue
        if expr.rest != pat.rest:
            out.append(Violation("binding", f"stack {c}: target uses unbound variable {expr.rest!r}",
                                 rule=idx))
            continue
        if machine.bottom in expr.prefix:
            out.append(Violation("bottom", f"stack {c}: pushing the bottom symbol", rule=idx))
            continue
        src, dst = pat.prefix, expr.prefix
        legal = (src == dst
                 or (len(dst) == len(src) + 1 and dst[1:] == src)
                 or (len(src) == len(dst) + 1 and src[1:] == dst))
        if not legal:
            out.append(Violation("stack-legality",
                                 f"stack {c}: top segments {''.join(src) or '(empty)'} -> "
                                 f"{''.join(dst) or '(empty)'} differ by more than one push or pop",
                                 rule=idx))


def _tape_rule_violations(machine: TapeMachine, idx: int, rule: TapeRule,
                          out: list[Violation]) -> None:
    states = set(machine.states)
    alpha = set(machine.input_alphabet)
    if rule.state not in states or rule.to not in states:
        out.append(Violation("states", "rule uses undeclared state", rule=idx))
    if rule.read not in alpha or rule.write not in alpha:
        out.append(Violation("alphabet", f"rule reads/writes outside the tape alphabet", rule=idx))
    if rule.move not in ("L", "R"):
        out.append(Violation("direction", f"move must be L or R, got {rule.move!r}", rule=idx))


def validate_machine(machine: Machine) -> list[Violation]:
    """Structural legality of a machine description; empty list means valid."""
    out: list[Violation] = []
    _check_common(machine, out)
    if isinstance(machine, CounterMachine):
        if machine.counters < 1:
            out.append(Violation("arity", "machine needs at least one counter"))
        if 0 not in machine.allowed_deltas:
            out.append(Violation("allowed-delta", "allowed delta set must contain 0"))
        if len(set(machine.allowed_deltas)) != len(machine.allowed_deltas):
            out.append(Violation("allowed-delta", "duplicate entries in allowed delta set"))
        for idx, rule in enumerate(machine.rules):
            _counter_rule_violations(machine, idx, rule, out)
    elif isinstance(machine, StackMachine):
        if machine.stacks < 1:
            out.append(Violation("arity", "machine needs at least one stack"))
        if machine.bottom not in machine.stack_alphabet:
            out.append(Violation("bottom", "bottom symbol missing from the stack alphabet"))
        if len(set(machine.stack_alphabet)) != len(machine.stack_alphabet):
            out.append(Violation("alphabet", "duplicate stack symbols"))
        for idx, rule in enumerate(machine.rules):
            _stack_rule_violations(machine, idx, rule, out)
    elif isinstance(machine, TapeMachine):
        if machine.blank not in machine.input_alphabet:
            out.append(Violation("alphabet", "blank symbol missing from the tape alphabet"))
        for idx, rule in enumerate(machine.rules):
            _tape_rule_violations(machine, idx, rule, out)
    else:
        raise DomainError(f"unknown machine type {type(machine).__name__}")
    return out


@dataclass(frozen=True)
class GroundedRules:
    """Explicit window rules per symbol plus the sources truncation touched."""

    by_symbol: dict[str, tuple[ExplicitRule, ...]]
    clipped: dict[str, frozenset]

    def all_rules(self) -> list[ExplicitRule]:
        merged: list[ExplicitRule] = []
        for symbol in self.by_symbol:
            merged.extend(self.by_symbol[symbol])
        merged.sort(key=lambda r: (r.source.state, r.source[1], r.symbol, r.target.state, r.target[1]))
        return merged


def _counter_var_box(rule: CounterRule, n_max: int | None) -> list[tuple[str, int, int]]:
    box = []
    for pat in rule.pre:
        if pat.is_literal():
            continue
        hi = pat.hi
        if hi is None:
            if n_max is None:
                raise DomainError(
                    f"variable {pat.var!r} has an unbounded range and the window has no counter cap")
            hi = n_max
        elif n_max is not None:
            hi = min(hi, n_max)
        box.append((pat.var, pat.lo, hi))
    return box


def _ground_counter_rule(rule: CounterRule, n_max: int,
                         sink: dict[str, dict], clipped: dict[str, set]) -> None:
    box = _counter_var_box(rule, n_max)
    names = [b[0] for b in box]
    spans = [range(b[1], b[2] + 1) for b in box]
    per_symbol = sink.setdefault(rule.symbol, {})
    clip = clipped.setdefault(rule.symbol, set())
    for values in itertools.product(*spans):
        env = dict(zip(names, values))
        src = tuple(p.value if p.is_literal() else env[p.var] for p in rule.pre)
        if any(v > n_max for v in src):
            continue
        tgt = tuple(e.evaluate(env) for e in rule.post)
        source = CounterConfig(rule.state, src)
        if any(v > n_max or v < 0 for v in tgt):
            clip.add(source)
            continue
        key = (source, CounterConfig(rule.to, tgt))
        per_symbol[key] = per_symbol.get(key, 0.0) + rule.amp


def _stack_suffixes(machine: StackMachine, length: int) -> Iterable[tuple[str, ...]]:
    """All valid stack tails of the given total symbol length (bottom included)."""
    body = machine.pushable()
    for combo in itertools.product(body, repeat=length - 1):
        yield combo + (machine.bottom,)


def _ground_stack_rule(machine: StackMachine, rule: StackRule, d_max: int,
                       sink: dict[str, dict], clipped: dict[str, set]) -> None:
    choices: list[list[tuple[tuple[str, ...], tuple[str, ...] | None]]] = []
    for pat in rule.pre:
        if pat.is_literal():
            choices.append([(pat.prefix, None)])
            continue
        lo = max(pat.lo if pat.lo is not None else 0, len(pat.prefix))
        hi = min(pat.hi, d_max) if pat.hi is not None else d_max
        opts = []
        for height in range(lo, hi + 1):
            tail_len = height + 1 - len(pat.prefix)
            if tail_len < 1:
                continue
            for tail in _stack_suffixes(machine, tail_len):
                opts.append((pat.prefix + tail, tail))
        choices.append(opts)
    per_symbol = sink.setdefault(rule.symbol, {})
    clip = clipped.setdefault(rule.symbol, set())
    for picked in itertools.product(*choices):
        src_stacks = tuple(stack for stack, _ in picked)
        if any(len(s) - 1 > d_max for s in src_stacks):
            continue
        tgt_stacks = []
        for (stack, tail), pat, expr in zip(picked, rule.pre, rule.post):
            if expr.rest is None:
                tgt_stacks.append(expr.prefix)
            else:
                tgt_stacks.append(expr.prefix + tail)
        source = StackConfig(rule.state, src_stacks)
        if any(len(s) - 1 > d_max for s in tgt_stacks):
            clip.add(source)
            continue
        key = (source, StackConfig(rule.to, tuple(tgt_stacks)))
        per_symbol[key] = per_symbol.get(key, 0.0) + rule.amp


@lru_cache(maxsize=128)
def ground_rules(machine: CounterMachine | StackMachine,
                 bounds: SimulationBounds) -> GroundedRules:
    """Instantiate every schema inside the window, tracking truncated sources."""
    if isinstance(machine, CounterMachine):
        if bounds.n_max is None:
            raise DomainError("counter machines need a counter cap in the window")
    elif isinstance(machine, StackMachine):
        if bounds.d_max is None:
            raise DomainError("stack machines need a height cap in the window")
    else:
        raise DomainError("grounding applies to counter and stack machines")

    sink: dict[str, dict] = {}
    clipped: dict[str, set] = {}
    for rule in machine.rules:
        if abs(rule.amp) == 0.0:
            continue
        if isinstance(machine, CounterMachine):
            _ground_counter_rule(rule, bounds.n_max, sink, clipped)
        else:
            _ground_stack_rule(machine, rule, bounds.d_max, sink, clipped)

    by_symbol: dict[str, tuple[ExplicitRule, ...]] = {}
    for symbol in machine_symbols(machine):
        pairs = sink.get(symbol, {})
        rules = [ExplicitRule(src, symbol, tgt, amp) for (src, tgt), amp in pairs.items()
                 if abs(amp) > 0.0]
        rules.sort(key=lambda r: (r.source.state, r.source[1], r.target.state, r.target[1]))
        by_symbol[symbol] = tuple(rules)
    return GroundedRules(by_symbol=by_symbol,
                         clipped={s: frozenset(c) for s, c in clipped.items()})


def enumerate_rules(machine: CounterMachine | StackMachine | TapeMachine,
                    bounds: SimulationBounds) -> list:
    """Explicit window rules in deterministic order; tape rule lists pass through."""
    if isinstance(machine, TapeMachine):
        return list(machine.rules)
    return ground_rules(machine, bounds).all_rules()


def columns_for(machine: CounterMachine | StackMachine, symbol: str,
                bounds: SimulationBounds) -> dict:
    grounded = ground_rules(machine, bounds)
    cols: dict = {}
    for rule in grounded.by_symbol.get(symbol, ()):
        cols.setdefault(rule.source, []).append((rule.target, rule.amp))
    return cols


def reachable_configs(machine: CounterMachine | StackMachine, symbols: Sequence[str],
                      bounds: SimulationBounds) -> list[frozenset]:
    """Support-level reachability while consuming the given symbol sequence.

    Returns one configuration set per step, starting with the initial
    configuration alone.  Follows every rule with a nonzero amplitude, so the
    result is a superset of the true support (cancellations are ignored).
    """
    grounded = ground_rules(machine, bounds)
    current = {machine.initial_config()}
    trace = [frozenset(current)]
    known = set(machine_symbols(machine))
    for step, symbol in enumerate(symbols, start=1):
        if symbol not in known:
            raise DomainError(f"symbol {symbol!r} not in the machine's alphabet")
        cols: dict = {}
        for rule in grounded.by_symbol.get(symbol, ()):
            cols.setdefault(rule.source, []).append(rule.target)
        clipped = grounded.clipped.get(symbol, frozenset())
        nxt = set()
        for config in current:
            if config in clipped:
                raise WindowLeakError(
                    f"window leak at step {step}: rules from {config} were truncated",
                    config=config, step=step)
            targets = cols.get(config)
            if targets is None:
                if machine.complete_with_identity:
                    nxt.add(config)
                    continue
                raise WindowLeakError(
                    f"no rule for {config} on {symbol!r} at step {step} and the machine "
                    f"does not complete with identity", config=config, step=step)
            nxt.update(targets)
        current = nxt
        trace.append(frozenset(current))
    return trace


def counter_window(machine: CounterMachine, bounds: SimulationBounds) -> list[CounterConfig]:
    """Every window configuration, ordered; guarded against blowup."""
    if bounds.n_max is None:
        raise DomainError("counter window needs a counter cap")
    size = len(machine.states) * (bounds.n_max + 1) ** machine.counters
    if size > WINDOW_GUARD:
        raise DomainError(f"window of {size} configurations is too large to materialize; "
                          f"use a reachable scope instead")
    configs = []
    for state in machine.states:
        for values in itertools.product(range(bounds.n_max + 1), repeat=machine.counters):
            configs.append(CounterConfig(state, values))
    return configs


def stack_window(machine: StackMachine, bounds: SimulationBounds) -> list[StackConfig]:
    if bounds.d_max is None:
        raise DomainError("stack window needs a height cap")
    per_stack = []
    for height in range(bounds.d_max + 1):
        per_stack.extend(tuple(s) for s in
                         itertools.product(machine.pushable(), repeat=height))
    stacks = [tuple(body) + (machine.bottom,) for body in per_stack]
    size = len(machine.states) * len(stacks) ** machine.stacks
    if size > WINDOW_GUARD:
        raise DomainError(f"window of {size} configurations is too large to materialize; "
                          f"use a reachable scope instead")
    configs = []
    for state in machine.states:
        for combo in itertools.product(stacks, repeat=machine.stacks):
            configs.append(StackConfig(state, combo))
    return configs
