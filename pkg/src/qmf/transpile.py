"""Model-to-model translations that preserve acceptance probabilities.

Four constructive stages plus a comparator:

* split_counter_radix: a machine counting with jumps of a fixed radix r
  becomes one with twice the counters, each value stored as (digit, quotient);
* reduce_to_unit_counts: arbitrary bounded jumps become increments and
  decrements only, each value stored as a one-hot digit block plus quotient;
* tm_to_counters: a tape machine becomes a (2t+2)-counter machine; the tape
  window lives in counters 1..2t+1 as coded symbol values and the head in the
  last counter.  The input is padded with three reserved symbols that drive a
  deterministic preprocessing choreography (documented in docs/): B2 moves
  the read prefix into the window block, each B3 walks or writes one blank,
  and each B4 applies exactly one tape-machine step;
* counters_to_stacks: unit-delta counters become stacks of X above a bottom
  marker, height = value.

compare_acceptance runs both machines on a shared input set (through an input
encoder when models differ) and verdicts the probability gap at a tolerance.
"""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

from .amplitudes import DomainError, Superposition, WindowLeakError, apply
from .machines import (
    CounterConfig,
    CounterMachine,
    CounterRule,
    IntExpr,
    IntPattern,
    SimulationBounds,
    StackExpr,
    StackMachine,
    StackPattern,
    StackRule,
    TapeConfig,
    TapeMachine,
    validate_machine,
)
from .simulate import build_evolution, qtm_step, run_machine, run_qtm

__all__ = [
    "split_value_radix",
    "join_value_radix",
    "split_counter_radix",
    "encode_unit",
    "decode_unit",
    "reduce_to_unit_counts",
    "EncodedInput",
    "TmEncodingPlan",
    "tm_to_counters",
    "counters_to_stacks",
    "counter_value_to_stack",
    "stack_to_counter_value",
    "PipelineResult",
    "tm_to_stacks",
    "ComparisonRow",
    "EquivalenceReport",
    "compare_acceptance",
    "IntertwiningReport",
    "check_intertwining",
    "all_inputs",
]

BOTTOM = "Z0"
PUSH = "X"


# ---------------------------------------------------------------------------
# value encodings

def split_value_radix(v: int, r: int) -> tuple[int, int]:
    """v = digit + quotient * r with digit in [0, r)."""
    if v < 0 or r < 2:
        raise DomainError(f"need v >= 0 and r >= 2, got v={v}, r={r}")
    return v % r, v // r


def join_value_radix(digit: int, quotient: int, r: int) -> int:
    if not (0 <= digit < r) or quotient < 0:
        raise DomainError(f"invalid radix pair ({digit}, {quotient}) for r={r}")
    return digit + quotient * r


def encode_unit(v: int, r: int) -> tuple[int, ...]:
    """One-hot digit block (r-1 wide, all zero for digit 0) plus quotient."""
    if v < 0 or r < 1:
        raise DomainError(f"need v >= 0 and r >= 1, got v={v}, r={r}")
    digit, quotient = v % r, v // r
    return tuple(1 if digit == j else 0 for j in range(1, r)) + (quotient,)


def decode_unit(coords: Sequence[int], r: int) -> int:
    if len(coords) != r:
        raise DomainError(f"expected {r} coordinates, got {len(coords)}")
    block, quotient = coords[: r - 1], coords[r - 1]
    ones = [j + 1 for j, bit in enumerate(block) if bit == 1]
    if any(bit not in (0, 1) for bit in block) or len(ones) > 1 or quotient < 0:
        raise DomainError(f"coordinates {tuple(coords)} are not a unit encoding")
    return quotient * r + (ones[0] if ones else 0)


# ---------------------------------------------------------------------------
# shared schema plumbing

def _ground_finite_vars(rule: CounterRule) -> list[CounterRule]:
    """Substitute every bounded variable, leaving unbounded ones symbolic."""
    finite = []
    for pat in rule.pre:
        if not pat.is_literal() and pat.hi is not None:
            finite.append((pat.var, pat.lo, pat.hi))
    if not finite:
        return [rule]
    out = []
    names = [f[0] for f in finite]
    for values in itertools.product(*(range(lo, hi + 1) for _, lo, hi in finite)):
        env = dict(zip(names, values))
        pre = tuple(IntPattern(value=env[p.var]) if (not p.is_literal() and p.var in env)
                    else p for p in rule.pre)
        post = tuple(IntExpr(None, env[e.var] + e.const) if (e.var in env) else e
                     for e in rule.post)
        out.append(CounterRule(rule.state, rule.symbol, pre, post, rule.to, rule.amp))
    return out


def _coordinate_shapes(rule: CounterRule, purpose: str):
    """Classify coordinates as ("lit", value, delta) or ("var", lo, shift)."""
    shapes = []
    for c, (pat, expr) in enumerate(zip(rule.pre, rule.post)):
        if pat.is_literal():
            if expr.var is not None:
                raise DomainError(
                    f"{purpose}: coordinate {c} writes a variable from another "
                    f"coordinate; ground it with a finite range first")
            shapes.append(("lit", pat.value, expr.const - pat.value))
        else:
            if expr.var != pat.var:
                raise DomainError(
                    f"{purpose}: coordinate {c} does not map its own variable; "
                    f"unsupported rule shape")
            shapes.append(("var", pat.lo or 0, expr.const))
    return shapes


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


# ---------------------------------------------------------------------------
# radix split: one counter with jumps {0, +-1, +-r} -> (digit, quotient) pair

def split_counter_radix(machine: CounterMachine) -> CounterMachine:
    """Each counter value n becomes the pair (n mod r, n div r); jumps of r
    turn into quotient steps, unit jumps into digit steps with carries."""
    deltas = set(machine.allowed_deltas)
    big = sorted(d for d in deltas if d >= 2)
    if len(big) != 1 or deltas != {0, 1, -1, big[0], -big[0]}:
        raise DomainError(
            f"radix split expects jump set {{0, +-1, +-r}} with r >= 2, "
            f"got {sorted(deltas)}")
    r = big[0]

    rules = []
    for raw in machine.rules:
        for rule in _ground_finite_vars(raw):
            shapes = _coordinate_shapes(rule, "radix split")
            options = []
            for c, shape in enumerate(shapes):
                kind, a, d = shape
                if kind == "lit":
                    lo_d, lo_q = split_value_radix(a, r)
                    hi_d, hi_q = split_value_radix(a + d, r)
                    options.append([(
                        (IntPattern(value=lo_d), IntPattern(value=lo_q)),
                        (IntExpr(None, hi_d), IntExpr(None, hi_q)))])
                    continue
                cases = []
                for j in range(r):
                    j2, carry = (j + d) % r, (j + d) // r
                    q_lo = max(0, _ceil_div(a - j, r), -carry)
                    name = f"v{c}"
                    cases.append((
                        (IntPattern(value=j), IntPattern(var=name, lo=q_lo, hi=None)),
                        (IntExpr(None, j2), IntExpr(name, carry))))
                options.append(cases)
            for combo in itertools.product(*options):
                pre = tuple(p for pair, _ in combo for p in pair)
                post = tuple(e for _, pair in combo for e in pair)
                rules.append(CounterRule(rule.state, rule.symbol, pre, post,
                                         rule.to, rule.amp))

    new_deltas = sorted({0, 1, -1, r - 1, -(r - 1)})
    return CounterMachine(
        states=machine.states, initial=machine.initial, accept=machine.accept,
        reject=machine.reject, input_alphabet=machine.input_alphabet,
        counters=2 * machine.counters, allowed_deltas=tuple(new_deltas),
        rules=tuple(rules), padding=machine.padding, complete_with_identity=True)


# ---------------------------------------------------------------------------
# unit-count reduction: jumps up to +-r -> one-hot block + quotient, +-1 only

def _unit_guard(v1: int, v2: int, r: int, where: str) -> None:
    k1, i1 = divmod(v1, r)
    k2, i2 = divmod(v2, r)
    if abs(k2 - k1) > 1 or (k2 - k1 == 1 and i2 > i1) or (k2 - k1 == -1 and i2 < i1):
        raise DomainError(
            f"{where}: transition {v1} -> {v2} cannot keep the digit block "
            f"one-hot with unit steps (radix {r})")


def reduce_to_unit_counts(machine: CounterMachine) -> CounterMachine:
    """Rewrite a machine with jumps in [-r, r] so every counter moves by at
    most one, multiplying the counter count by r."""
    r = max(abs(d) for d in machine.allowed_deltas)
    if r <= 1:
        return machine

    rules = []
    for raw in machine.rules:
        for rule in _ground_finite_vars(raw):
            shapes = _coordinate_shapes(rule, "unit-count reduction")
            options = []
            for c, shape in enumerate(shapes):
                kind, a, d = shape
                if abs(d) > r:
                    raise DomainError(
                        f"unit-count reduction: coordinate {c} jumps by {d}, "
                        f"beyond the declared radius {r}")
                if kind == "lit":
                    _unit_guard(a, a + d, r, f"coordinate {c}")
                    src = encode_unit(a, r)
                    dst = encode_unit(a + d, r)
                    options.append([(
                        tuple(IntPattern(value=v) for v in src),
                        tuple(IntExpr(None, v) for v in dst))])
                    continue
                cases = []
                for j in range(r):
                    j2, carry = (j + d) % r, (j + d) // r
                    _unit_guard(j + r, j2 + (1 + carry) * r, r, f"coordinate {c}")
                    q_lo = max(0, _ceil_div(a - j, r), -carry)
                    name = f"v{c}"
                    src_block = encode_unit(j, r)[: r - 1]
                    dst_block = encode_unit(j2, r)[: r - 1]
                    cases.append((
                        tuple(IntPattern(value=v) for v in src_block)
                        + (IntPattern(var=name, lo=q_lo, hi=None),),
                        tuple(IntExpr(None, v) for v in dst_block)
                        + (IntExpr(name, carry),)))
                options.append(cases)
            for combo in itertools.product(*options):
                pre = tuple(p for pair, _ in combo for p in pair)
                post = tuple(e for _, pair in combo for e in pair)
                rules.append(CounterRule(rule.state, rule.symbol, pre, post,
                                         rule.to, rule.amp))

    return CounterMachine(
        states=machine.states, initial=machine.initial, accept=machine.accept,
        reject=machine.reject, input_alphabet=machine.input_alphabet,
        counters=machine.counters * r, allowed_deltas=(-1, 0, 1),
        rules=tuple(rules), padding=machine.padding, complete_with_identity=True)


# ---------------------------------------------------------------------------
# tape machine -> counters

@dataclass(frozen=True)
class EncodedInput:
    x: tuple[str, ...]
    body: tuple[str, ...]  # what the counter machine consumes between the endmarkers
    exponents: dict

    @property
    def full(self) -> tuple[str, ...]:
        return ("#",) + self.body + ("$",)

    @property
    def length(self) -> int:
        return len(self.body) + 2


def _fresh(name: str, taken: set[str]) -> str:
    while name in taken:
        name = name + "_"
    return name


@dataclass(frozen=True)
class TmEncodingPlan:
    """A (2t+2)-counter machine simulating a tape machine for t steps on
    inputs of length at most n, plus everything needed to feed and read it.

    Counter c in 1..2t+1 holds the coded symbol of tape cell c-t-1; counter
    2t+2 holds head+t+1.  e codes tape symbols as 1..r-1 with the blank last.
    """

    source: TapeMachine
    machine: CounterMachine
    n: int
    t: int
    r: int
    e: dict
    start_state: str
    work_state: str

    def l2(self, k: int) -> int:
        return 1

    def l3(self, k: int) -> int:
        return k + self.t + 2

    def l4(self) -> int:
        return self.t

    def encode_input(self, x: Sequence[str]) -> EncodedInput:
        x = tuple(x)
        k = len(x)
        if k > self.n:
            raise DomainError(f"input length {k} exceeds the plan's limit {self.n}")
        sigma = set(self.source.input_alphabet) - {self.source.blank}
        for sym in x:
            if sym not in sigma:
                raise DomainError(f"symbol {sym!r} is not a source input symbol")
        body = x + ("B2",) * self.l2(k) + ("B3",) * self.l3(k) + ("B4",) * self.t
        return EncodedInput(x=x, body=body,
                            exponents={"B2": self.l2(k), "B3": self.l3(k), "B4": self.t})

    def embed_config(self, config: TapeConfig) -> CounterConfig:
        if len(config.tape) != 2 * self.t + 1:
            raise DomainError(
                f"expected a tape window of radius {self.t}, got {len(config.tape)} cells")
        cells = tuple(self.e[sym] for sym in config.tape)
        return CounterConfig(config.state, cells + (config.head + self.t + 1,))

    def recommended_bounds(self, tol: float = 1e-9) -> SimulationBounds:
        return SimulationBounds(n_max=2 * self.t + 3 * self.r + 3, tol=tol)

    def provenance(self) -> dict:
        return {
            "stage": "tm-to-counters",
            "n": self.n,
            "t": self.t,
            "r": self.r,
            "counters": 2 * self.t + 2,
            "encoding": dict(sorted(self.e.items())),
            "exponents": {"B2": "1", "B3": "k+t+2", "B4": "t"},
            "length_bound": {"input_coeff": 2, "step_coeff": 2, "constant": 5},
        }


def tm_to_counters(machine: TapeMachine, n: int, t: int) -> TmEncodingPlan:
    """Build the counter simulation.  Requires n <= t+1 so the written input
    always fits inside the simulated tape window."""
    problems = validate_machine(machine)
    if problems:
        raise DomainError(f"source machine is invalid: {problems[0].message}")
    if n < 0 or t < 0 or n > t + 1:
        raise DomainError(f"need 0 <= n <= t+1, got n={n}, t={t}")
    clash = {"B2", "B3", "B4", "#", "$"} & set(machine.input_alphabet)
    if clash:
        raise DomainError(f"tape alphabet collides with reserved symbols: {sorted(clash)}")

    sigma = tuple(s for s in machine.input_alphabet if s != machine.blank)
    r = len(sigma) + 2
    e = {sym: i + 1 for i, sym in enumerate(sigma)}
    e[machine.blank] = r - 1
    b = e[machine.blank]

    taken = set(machine.states)
    q0 = _fresh("q0", taken)
    taken.add(q0)
    q0p = _fresh("q0p", taken)
    p0 = machine.initial

    width = 2 * t + 1  # cell counters; index c-1 holds cell c
    K = width + 1      # plus the head-position counter
    POS = K - 1

    def rule(state, symbol, to, pre, post, amp=1.0):
        return CounterRule(state=state, symbol=symbol, pre=tuple(pre),
                           post=tuple(post), to=to, amp=complex(amp))

    def blanks(k: int) -> list[int]:
        """Cell counters (1-based) holding blanks once the tape is loaded."""
        return list(range(1, t + 1)) + list(range(t + k + 1, width + 1))

    def literal_config(state, cells: dict, pos: int) -> CounterConfig:
        coords = [0] * K
        for c, v in cells.items():
            coords[c - 1] = v
        coords[POS] = pos
        return CounterConfig(state, tuple(coords))

    def arc(symbol, src: CounterConfig, dst: CounterConfig, block: Sequence[int]):
        """Rule mapping src to dst with the block cells carried by variables.

        Block cells hold coded input symbols, never the blank code r-1, so
        the variable range [1, r-2] keeps the rule families disjoint."""
        pre, post = [], []
        for i in range(K):
            c = i + 1
            if c in block and i != POS:
                name = f"w{c}"
                pre.append(IntPattern(var=name, lo=1, hi=r - 2))
                post.append(IntExpr(name, 0))
            else:
                pre.append(IntPattern(value=src.counters[i]))
                post.append(IntExpr(None, dst.counters[i]))
        return rule(src.state, symbol, dst.state, pre, post)

    rules: list[CounterRule] = []
    # Without input symbols only the empty input exists; prefix-carrying
    # families would need an empty variable range, so they are dropped.
    kmax = n if sigma else 0

    # Reading # nudges the head counter to 1; the reverse arc closes the swap.
    zero = literal_config(q0, {}, 0)
    one = literal_config(q0, {}, 1)
    rules.append(arc("#", zero, one, ()))
    rules.append(arc("#", one, zero, ()))

    # Input symbols: at head value j+1 the symbol lands in cell j+1.  The
    # family extends one position past n so the last written configuration is
    # still a source and its column judgment stays complete.
    for sym in sigma:
        for j in range(0, min(n, 2 * t) + 1):
            pre, post = [], []
            for i in range(K):
                c = i + 1
                if i == POS:
                    pre.append(IntPattern(value=j + 1))
                    post.append(IntExpr(None, j + 2))
                elif c <= j:
                    name = f"w{c}"
                    pre.append(IntPattern(var=name, lo=1, hi=r - 2))
                    post.append(IntExpr(name, 0))
                elif c == j + 1:
                    pre.append(IntPattern(value=0))
                    post.append(IntExpr(None, e[sym]))
                else:
                    pre.append(IntPattern(value=0))
                    post.append(IntExpr(None, 0))
            rules.append(rule(q0, sym, q0, pre, post))

    # B2 swaps the read prefix (cells 1..k) into the window block (cells
    # t+1..t+k) in one move; the mirror arc keeps the operator unitary.
    if t >= 1:
        for k in range(1, kmax + 1):
            for forward in (True, False):
                pre, post = [], []
                for i in range(K):
                    c = i + 1
                    if i == POS:
                        pre.append(IntPattern(value=k + 1))
                        post.append(IntExpr(None, k + 1))
                        continue
                    src_hot = c <= k if forward else t + 1 <= c <= t + k
                    if src_hot:
                        pre.append(IntPattern(var=f"w{c}", lo=1, hi=r - 2))
                    else:
                        pre.append(IntPattern(value=0))
                    if forward:
                        post.append(IntExpr(f"w{c - t}", 0) if t + 1 <= c <= t + k
                                    else IntExpr(None, 0))
                    else:
                        post.append(IntExpr(f"w{c + t}", 0) if c <= k
                                    else IntExpr(None, 0))
                rules.append(rule(q0, "B2", q0, pre, post))

    # B3 choreography, per prefix length k:
    #   enter: flip to the working state;
    #   descend: walk the head from k+1 down to 1;
    #   ascend: walk up to t+1 writing one blank per step into cells 1..t;
    #   handoff: write the remaining blanks at once and hand control to the
    #   source machine's initial state at head value t+1;
    #   return leg: a marked, never-reached path closing the orbit so every
    #   in-window column of the B3 operator stays unit.
    for k in range(0, kmax + 1):
        block = tuple(range(t + 1, t + k + 1))

        def cfg(state, extra: dict, pos: int):
            return literal_config(state, extra, pos)

        enter_src = cfg(q0, {}, k + 1)
        enter_dst = cfg(q0p, {}, k + 1)
        rules.append(arc("B3", enter_src, enter_dst, block))

        for nu in range(k, 0, -1):
            rules.append(arc("B3", cfg(q0p, {}, nu + 1), cfg(q0p, {}, nu), block))

        for nu in range(1, t + 1):
            written = {c: b for c in range(1, nu)}
            src = cfg(q0p, dict(written), nu)
            written[nu] = b
            rules.append(arc("B3", src, cfg(q0p, dict(written), nu + 1), block))

        low = {c: b for c in range(1, t + 1)}
        full = dict(low)
        for c in blanks(k)[t:]:
            full[c] = b
        handoff_src = cfg(q0p, low, t + 1)
        handoff_dst = cfg(p0, full, t + 1)
        rules.append(arc("B3", handoff_src, handoff_dst, block))

        if t >= 1:
            marked = dict(full)
            marked[1] = b + r
            erased = {1: b + r}
            chain = [handoff_dst, cfg(q0p, marked, t + 1), cfg(q0p, erased, t + 1)]
            pos = t + 1
            while pos != k + 1:
                step = max(-r, min(r, (k + 1) - pos))
                pos += step
                chain.append(cfg(q0p, erased, pos))
            chain.append(cfg(q0p, {1: r}, k + 1))
            chain.append(enter_src)
            for src, dst in zip(chain, chain[1:]):
                if src != dst:
                    rules.append(arc("B3", src, dst, block))

    # Each B4 applies one source-machine step at the head position.
    for tm_rule in machine.rules:
        if abs(tm_rule.amp) == 0.0:
            continue
        for c in range(1, width + 1):
            move = 1 if tm_rule.move == "R" else -1
            pre, post = [], []
            for i in range(K):
                cc = i + 1
                if i == POS:
                    pre.append(IntPattern(value=c))
                    post.append(IntExpr(None, c + move))
                elif cc == c:
                    pre.append(IntPattern(value=e[tm_rule.read]))
                    post.append(IntExpr(None, e[tm_rule.write]))
                else:
                    name = f"w{cc}"
                    pre.append(IntPattern(var=name, lo=1, hi=r - 1))
                    post.append(IntExpr(name, 0))
            rules.append(rule(tm_rule.state, "B4", tm_rule.to, pre, post,
                              amp=tm_rule.amp))

    counter_machine = CounterMachine(
        states=(q0, q0p) + machine.states,
        initial=q0, accept=machine.accept, reject=machine.reject,
        input_alphabet=sigma, counters=K,
        allowed_deltas=tuple(range(-r, r + 1)),
        rules=tuple(rules), padding=("B2", "B3", "B4"),
        complete_with_identity=True)
    return TmEncodingPlan(source=machine, machine=counter_machine, n=n, t=t,
                          r=r, e=e, start_state=q0, work_state=q0p)


# ---------------------------------------------------------------------------
# counters -> stacks

def counter_value_to_stack(v: int) -> tuple[str, ...]:
    if v < 0:
        raise DomainError(f"counter value must be nonnegative, got {v}")
    return (PUSH,) * v + (BOTTOM,)


def stack_to_counter_value(stack: Sequence[str]) -> int:
    if not stack or stack[-1] != BOTTOM or any(s != PUSH for s in stack[:-1]):
        raise DomainError(f"stack {tuple(stack)} is not a counter encoding")
    return len(stack) - 1


def counters_to_stacks(machine: CounterMachine) -> StackMachine:
    """Each counter becomes a stack of X over a bottom marker; increments
    push, decrements pop."""
    if any(abs(d) > 1 for d in machine.allowed_deltas):
        raise DomainError(
            "stack translation needs unit jumps only; apply the unit-count "
            "reduction first")

    rules = []
    for raw in machine.rules:
        for cr in _ground_finite_vars(raw):
            shapes = _coordinate_shapes(cr, "stack translation")
            pre, post = [], []
            for c, (kind, a, d) in enumerate(shapes):
                if kind == "lit":
                    pre.append(StackPattern(prefix=counter_value_to_stack(a)))
                    post.append(StackExpr(prefix=counter_value_to_stack(a + d)))
                    continue
                name = f"s{c}"
                lo = a
                if d < 0:
                    pre.append(StackPattern(prefix=(PUSH,), rest=name, lo=max(lo, 1)))
                    post.append(StackExpr(prefix=(), rest=name))
                elif d > 0:
                    pre.append(StackPattern(prefix=(), rest=name, lo=lo))
                    post.append(StackExpr(prefix=(PUSH,), rest=name))
                else:
                    pre.append(StackPattern(prefix=(), rest=name, lo=lo))
                    post.append(StackExpr(prefix=(), rest=name))
            rules.append(StackRule(state=cr.state, symbol=cr.symbol, pre=tuple(pre),
                                   post=tuple(post), to=cr.to, amp=cr.amp))

    return StackMachine(
        states=machine.states, initial=machine.initial, accept=machine.accept,
        reject=machine.reject, input_alphabet=machine.input_alphabet,
        stacks=machine.counters, stack_alphabet=(BOTTOM, PUSH), bottom=BOTTOM,
        rules=tuple(rules), padding=machine.padding,
        complete_with_identity=machine.complete_with_identity)


# ---------------------------------------------------------------------------
# full pipeline

@dataclass(frozen=True)
class PipelineResult:
    plan: TmEncodingPlan
    counter_machine: CounterMachine
    unit_machine: CounterMachine
    stack_machine: StackMachine

    def encode_input(self, x: Sequence[str]) -> EncodedInput:
        return self.plan.encode_input(x)

    def provenance(self) -> dict:
        out = self.plan.provenance()
        out["stage"] = "pipeline"
        out["unit_counters"] = self.unit_machine.counters
        out["stacks"] = self.stack_machine.stacks
        return out


def tm_to_stacks(machine: TapeMachine, n: int, t: int) -> PipelineResult:
    plan = tm_to_counters(machine, n, t)
    unit = reduce_to_unit_counts(plan.machine)
    stacks = counters_to_stacks(unit)
    return PipelineResult(plan=plan, counter_machine=plan.machine,
                          unit_machine=unit, stack_machine=stacks)


# ---------------------------------------------------------------------------
# acceptance comparison

@dataclass(frozen=True)
class ComparisonRow:
    x: tuple[str, ...]
    p_source: float | None
    p_target: float | None
    diff: float | None
    leak: str | None = None

    def to_json(self) -> dict:
        return {
            "input": "".join(self.x),
            "p_source": self.p_source,
            "p_target": self.p_target,
            "diff": self.diff,
            "leak": self.leak,
        }


@dataclass(frozen=True)
class EquivalenceReport:
    rows: tuple[ComparisonRow, ...]
    max_diff: float
    tol: float
    passed: bool
    inconclusive: bool

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "inconclusive": self.inconclusive,
            "max_diff": self.max_diff,
            "tol": self.tol,
            "rows": [row.to_json() for row in self.rows],
        }


def _resolve_workers(requested: int | None, items: int) -> int:
    if requested is not None:
        return max(1, requested)
    env = os.environ.get("QMF_THREADS", "").strip()
    cap = int(env) if env.isdigit() and int(env) > 0 else 4
    return max(1, min(cap, items))


def _probability(machine, x, t, bounds) -> float:
    if isinstance(machine, TapeMachine):
        if t is None:
            raise DomainError("comparing a tape machine needs its step count")
        return run_qtm(machine, x, t, bounds).probability
    return run_machine(machine, x, bounds).probability


def compare_acceptance(m1, m2, inputs: Sequence[Sequence[str]],
                       encoder: Callable | None = None, tol: float = 1e-9,
                       t1: int | None = None, t2: int | None = None,
                       bounds1: SimulationBounds | None = None,
                       bounds2: SimulationBounds | None = None,
                       workers: int | None = None) -> EquivalenceReport:
    """Acceptance probabilities of two machines over an input set.

    encoder maps a first-machine input to the second machine's input (refer
    to TmEncodingPlan.encode_input for the tape-to-counter case); identity
    when omitted.  A window leak marks that row inconclusive instead of
    failing the whole sweep.
    """
    inputs = [tuple(x) for x in inputs]

    def evaluate(x: tuple) -> ComparisonRow:
        try:
            p1 = _probability(m1, x, t1, bounds1)
            encoded = encoder(x) if encoder is not None else x
            if isinstance(encoded, EncodedInput):
                encoded = encoded.body
            p2 = _probability(m2, tuple(encoded), t2, bounds2)
        except WindowLeakError as exc:
            return ComparisonRow(x=x, p_source=None, p_target=None, diff=None,
                                 leak=str(exc))
        return ComparisonRow(x=x, p_source=p1, p_target=p2, diff=abs(p1 - p2))

    count = _resolve_workers(workers, len(inputs))
    if count > 1 and len(inputs) > 1:
        with ThreadPoolExecutor(max_workers=count) as pool:
            rows = tuple(pool.map(evaluate, inputs))
    else:
        rows = tuple(evaluate(x) for x in inputs)

    diffs = [row.diff for row in rows if row.diff is not None]
    max_diff = max(diffs, default=0.0)
    inconclusive = any(row.leak is not None for row in rows)
    passed = bool(rows) and not inconclusive and max_diff <= tol
    return EquivalenceReport(rows=rows, max_diff=max_diff, tol=tol,
                             passed=passed, inconclusive=inconclusive)


def all_inputs(alphabet: Sequence[str], max_len: int) -> list[tuple[str, ...]]:
    """Every string up to max_len, shortest first, symbol order as declared."""
    out: list[tuple[str, ...]] = []
    for length in range(max_len + 1):
        out.extend(itertools.product(alphabet, repeat=length))
    return out


# ---------------------------------------------------------------------------
# structural intertwining of the tape simulation

@dataclass(frozen=True)
class IntertwiningReport:
    passed: bool
    judged: int
    max_diff: float
    offender: str | None

    def to_json(self) -> dict:
        return {"passed": self.passed, "judged": self.judged,
                "max_diff": self.max_diff, "offender": self.offender}


def check_intertwining(plan: TmEncodingPlan, x: Sequence[str],
                       bounds: SimulationBounds | None = None,
                       tol: float = 1e-12) -> IntertwiningReport:
    """Applying the simulated step to an embedded configuration must equal
    embedding the stepped configuration, entrywise, on every non-final
    configuration reachable within t steps."""
    qtm = plan.source
    radius = plan.t
    finals = {qtm.accept, qtm.reject}
    op = build_evolution(plan.machine, "B4",
                         bounds if bounds is not None else plan.recommended_bounds())

    current = {qtm.initial_config(tuple(x), radius)}
    sources: set = set()
    for _ in range(plan.t):
        live = {c for c in current if c.state not in finals}
        sources.update(live)
        nxt = {c for c in current if c.state in finals}
        for c in live:
            nxt.update(qtm_step(qtm, Superposition.basis(c), radius).keys())
        current = nxt

    worst = 0.0
    offender = None
    for c in sorted(sources, key=lambda c: (c.state, c.head, c.tape)):
        lhs = apply(op, Superposition.basis(plan.embed_config(c)))
        stepped = qtm_step(qtm, Superposition.basis(c), radius)
        rhs = Superposition((plan.embed_config(c2), amp) for c2, amp in stepped.items())
        keys = set(lhs.keys()) | set(rhs.keys())
        for key in keys:
            gap = abs(lhs.get(key) - rhs.get(key))
            if gap > worst:
                worst = gap
                offender = str(c)
    return IntertwiningReport(passed=worst <= tol, judged=len(sources),
                              max_diff=worst, offender=offender if worst > tol else None)
