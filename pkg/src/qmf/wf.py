"""Well-formedness checks: per-symbol unitarity certificates from the rules.

For each input symbol the evolution operator must be unitary.  Two conditions
are checked directly on the rule table:

* condition I: the target lists of any two source configurations are
  orthonormal (sum of products 1 when the sources coincide, 0 otherwise);
* condition II: the mirrored statement over sources for any two target
  configurations.

Both are judged on the interior of a finite window, at least max-delta (or
one stack level) away from either window edge, so every judged sum is
complete.  Rule families that are uniform above a threshold (all variables
unbounded above) make the windowed verdict a certificate for the whole
translation-invariant bulk; the report says which certificate applied.
Sources whose rule instances were truncated by the window are reported as
inconclusive, never judged.

A dense-matrix oracle (matrix_crosscheck) rebuilds the operator explicitly
and compares, and a separate isometry check covers tape machines on their
reachable configurations.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .amplitudes import (
    DEFAULT_TOL,
    DomainError,
    Superposition,
    WindowLeakError,
    inner_product,
)
from .machines import (
    CounterConfig,
    CounterMachine,
    SimulationBounds,
    StackConfig,
    StackMachine,
    TapeMachine,
    counter_window,
    ground_rules,
    machine_symbols,
    reachable_configs,
    stack_window,
)
from .simulate import input_sequence, qtm_step

__all__ = [
    "WfViolation",
    "SymbolReport",
    "WfReport",
    "check_counter_machine",
    "check_stack_machine",
    "check_machine",
    "matrix_crosscheck",
    "CrosscheckRecord",
    "IsometryReport",
    "check_tm_isometry",
]

VIOLATION_CAP = 100


@dataclass(frozen=True)
class WfViolation:
    condition: int  # 1 or 2
    first: object
    second: object | None  # None for a diagonal (single-config) failure
    value: complex
    expected: float

    def to_json(self) -> dict:
        return {
            "condition": self.condition,
            "configs": [str(self.first)] + ([str(self.second)] if self.second is not None else []),
            "value": {"re": self.value.real, "im": self.value.imag},
            "expected": self.expected,
        }


@dataclass(frozen=True)
class SymbolReport:
    symbol: str
    condition1: bool
    condition2: bool
    judged: int
    violations: tuple[WfViolation, ...]
    inconclusive: tuple[object, ...]
    truncated: bool = False

    def to_json(self) -> dict:
        return {
            "symbol": self.symbol,
            "condition1": self.condition1,
            "condition2": self.condition2,
            "judged": self.judged,
            "violations": [v.to_json() for v in self.violations],
            "inconclusive": [str(c) for c in self.inconclusive],
            "truncated": self.truncated,
        }


@dataclass(frozen=True)
class WfReport:
    scope: str
    certificate: str  # "translation-uniform" or "windowed-only"
    symbols: tuple[SymbolReport, ...]
    judged: int
    passed: bool

    @property
    def status(self) -> str:
        if any(s.violations for s in self.symbols):
            return "violations"
        if self.passed:
            return "pass"
        return "inconclusive"

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "status": self.status,
            "scope": self.scope,
            "certificate": self.certificate,
            "judged": self.judged,
            "symbols": [s.to_json() for s in self.symbols],
        }


def _margin(machine) -> int:
    return machine.max_delta() if isinstance(machine, CounterMachine) else 1


def _coords(config) -> tuple[int, ...]:
    if isinstance(config, CounterConfig):
        return config.counters
    return tuple(len(s) - 1 for s in config.stacks)


def _limit(machine, bounds: SimulationBounds) -> int:
    return bounds.n_max if isinstance(machine, CounterMachine) else bounds.d_max


def _uniformity(machine) -> tuple[bool, int]:
    """Whether all rule families keep one shape for all values above a
    threshold, and that threshold."""
    u = 0
    uniform = True
    if isinstance(machine, CounterMachine):
        for rule in machine.rules:
            lows = {}
            for pat in rule.pre:
                if pat.is_literal():
                    u = max(u, pat.value)
                else:
                    if pat.hi is not None:
                        uniform = False
                        u = max(u, pat.hi)
                    lows[pat.var] = pat.lo or 0
                    u = max(u, pat.lo or 0)
            for expr in rule.post:
                if expr.var is None:
                    u = max(u, expr.const)
                else:
                    u = max(u, lows.get(expr.var, 0) + abs(expr.const))
    else:
        for rule in machine.rules:
            for pat in rule.pre:
                if pat.is_literal():
                    u = max(u, len(pat.prefix) - 1)
                else:
                    if pat.hi is not None:
                        uniform = False
                        u = max(u, pat.hi)
                    u = max(u, len(pat.prefix) + (pat.lo or 0))
            for expr in rule.post:
                u = max(u, len(expr.prefix))
    return uniform, u + 1


def default_wf_bounds(machine, scope: Sequence[Sequence[str]] | None = None,
                      tol: float = DEFAULT_TOL) -> SimulationBounds:
    """Window big enough that the interior judgment is meaningful: covers the
    uniformity threshold for full-window scope, or the longest input for a
    reachable scope."""
    margin = _margin(machine)
    if scope is None:
        _, u = _uniformity(machine)
        limit = u + 2 * margin + 2
    else:
        steps = max((len(x) + 2 for x in scope), default=2)
        limit = steps * margin + margin + 2
    if isinstance(machine, CounterMachine):
        return SimulationBounds(n_max=limit, tol=tol)
    return SimulationBounds(d_max=limit, tol=tol)


def _sorted_configs(configs):
    return sorted(configs, key=lambda c: (c.state, c[1]))


def _check_symbol(machine, symbol: str, judged_rows: list, judged_cols: list,
                  inconclusive: list, grounded, tol: float) -> SymbolReport:
    flag = machine.complete_with_identity
    explicit: dict = {}
    for rule in grounded.by_symbol.get(symbol, ()):
        explicit.setdefault(rule.source, []).append((rule.target, rule.amp))

    def row(c):
        entries = explicit.get(c)
        if entries is not None:
            return entries
        return [(c, complex(1.0))] if flag else []

    violations: list[WfViolation] = []

    def record(condition, first, second, value, expected):
        violations.append(WfViolation(condition, first, second, complex(value), expected))

    # Condition I, diagonal: each judged source's target list has norm 1.
    for c in judged_rows:
        total = sum(abs(a) ** 2 for _, a in row(c))
        if abs(total - 1.0) > tol:
            record(1, c, None, total, 1.0)

    # Condition I, off-diagonal: only source pairs sharing a target can have a
    # nonzero sum, so enumerate them through a target-indexed map.
    by_target: dict = {}
    for c in judged_rows:
        for t, _ in row(c):
            by_target.setdefault(t, []).append(c)
    pairs = set()
    for sources in by_target.values():
        ordered = _sorted_configs(set(sources))
        for a, b in itertools.combinations(ordered, 2):
            pairs.add((a, b))
    for c1, c2 in sorted(pairs, key=lambda p: (p[0].state, p[0][1], p[1].state, p[1][1])):
        lookup = dict(row(c2))
        total = sum(a * lookup[t].conjugate() for t, a in row(c1) if t in lookup)
        if abs(total) > tol:
            record(1, c1, c2, total, 0.0)

    # Condition II mirrors the statement over columns.
    judged_col_set = set(judged_cols)
    touched = set(explicit)
    columns: dict = {}
    for src, entries in explicit.items():
        for tgt, amp in entries:
            columns.setdefault(tgt, []).append((src, amp))

    def column(c):
        base = columns.get(c, [])
        if flag and c not in touched:
            return base + [(c, complex(1.0))]
        return base

    for c in judged_cols:
        total = sum(abs(a) ** 2 for _, a in column(c))
        if abs(total - 1.0) > tol:
            record(2, c, None, total, 1.0)

    pairs2 = set()
    for src, entries in explicit.items():
        targets = _sorted_configs({t for t, _ in entries} & judged_col_set)
        for a, b in itertools.combinations(targets, 2):
            pairs2.add((a, b))
    for c1, c2 in sorted(pairs2, key=lambda p: (p[0].state, p[0][1], p[1].state, p[1][1])):
        lookup = dict(column(c2))
        total = sum(a * lookup[s].conjugate() for s, a in column(c1) if s in lookup)
        if abs(total) > tol:
            record(2, c1, c2, total, 0.0)

    truncated = len(violations) > VIOLATION_CAP
    kept = tuple(violations[:VIOLATION_CAP])
    return SymbolReport(
        symbol=symbol,
        condition1=not any(v.condition == 1 for v in violations),
        condition2=not any(v.condition == 2 for v in violations),
        judged=len(set(judged_rows) | judged_col_set),
        violations=kept,
        inconclusive=tuple(_sorted_configs(set(inconclusive))),
        truncated=truncated,
    )


def check_machine(machine: CounterMachine | StackMachine,
                  bounds: SimulationBounds | None = None,
                  scope: Sequence[Sequence[str]] | None = None,
                  tol: float | None = None) -> WfReport:
    """Judge both conditions for every symbol.

    scope None judges the whole window interior for every symbol the machine
    can consume.  Otherwise scope is a list of raw inputs; the endmarked
    sequences are consumed and only non-final configurations actually
    reachable when each symbol arrives are judged.  Reachable configurations
    that sit too close to the window edge or lost rule instances to
    truncation become inconclusive, and with a reachable scope any
    inconclusive configuration blocks a pass.
    """
    if not isinstance(machine, (CounterMachine, StackMachine)):
        raise DomainError("well-formedness conditions apply to counter and stack machines")
    if bounds is None:
        bounds = default_wf_bounds(machine, scope)
    if tol is None:
        tol = bounds.tol
    margin = _margin(machine)
    limit = _limit(machine, bounds)
    if limit is None:
        raise DomainError("window does not bound this machine family")
    if limit < 2 * margin:
        raise DomainError(
            f"window limit {limit} is too small for margin {margin}; "
            f"need at least {2 * margin}")

    grounded = ground_rules(machine, bounds)
    finals = {machine.accept, machine.reject}

    if scope is None:
        window = (counter_window(machine, bounds) if isinstance(machine, CounterMachine)
                  else stack_window(machine, bounds))
        interior = [c for c in window
                    if all(margin <= v <= limit - margin for v in _coords(c))]
        rows_by_symbol = {sym: list(interior) for sym in machine_symbols(machine)}
        cols_by_symbol = {sym: list(interior) for sym in machine_symbols(machine)}
        incon_by_symbol = {sym: list(grounded.clipped.get(sym, ()))
                           for sym in machine_symbols(machine)}
        scope_desc = "full-window"
    else:
        # Sources are judged where the run can be when the symbol arrives;
        # targets where it can be just afterwards.  Final states are carried
        # by identity completion and stay out of the judgment.
        rows_raw: dict[str, set] = {}
        cols_raw: dict[str, set] = {}
        incon_by_symbol = {}
        for x in scope:
            seq = input_sequence(x)
            try:
                trace = reachable_configs(machine, seq, bounds)
            except WindowLeakError as exc:
                sym = seq[min(len(seq), exc.step or 1) - 1]
                incon_by_symbol.setdefault(sym, []).append(exc.config)
                continue
            for j, sym in enumerate(seq):
                rows_raw.setdefault(sym, set()).update(
                    c for c in trace[j] if c.state not in finals)
                cols_raw.setdefault(sym, set()).update(
                    c for c in trace[j + 1] if c.state not in finals)
        rows_by_symbol = {}
        cols_by_symbol = {}
        for sym in set(rows_raw) | set(cols_raw):
            clipped = grounded.clipped.get(sym, frozenset())
            drop = list(incon_by_symbol.get(sym, []))

            def fits(c):
                return c not in clipped and all(v <= limit - margin for v in _coords(c))

            keep_rows = [c for c in rows_raw.get(sym, ()) if fits(c)]
            keep_cols = [c for c in cols_raw.get(sym, ()) if fits(c)]
            drop.extend(c for c in rows_raw.get(sym, ()) if not fits(c))
            drop.extend(c for c in cols_raw.get(sym, ()) if not fits(c))
            rows_by_symbol[sym] = _sorted_configs(keep_rows)
            cols_by_symbol[sym] = _sorted_configs(keep_cols)
            incon_by_symbol[sym] = drop
        scope_desc = f"reachable({len(list(scope))} inputs)"

    reports = []
    for sym in sorted(rows_by_symbol):
        reports.append(_check_symbol(machine, sym, rows_by_symbol[sym],
                                     cols_by_symbol.get(sym, []),
                                     incon_by_symbol.get(sym, []), grounded, tol))

    uniform, u = _uniformity(machine)
    certificate = ("translation-uniform"
                   if uniform and limit >= u + 2 * margin else "windowed-only")
    judged_total = sum(r.judged for r in reports)
    clean = all(not r.violations for r in reports)
    no_inconclusive = all(not r.inconclusive for r in reports)
    passed = clean and judged_total > 0 and (scope is None or no_inconclusive)
    return WfReport(scope=scope_desc, certificate=certificate,
                    symbols=tuple(reports), judged=judged_total, passed=passed)


def check_counter_machine(machine: CounterMachine, bounds=None, scope=None,
                          tol=None) -> WfReport:
    if not isinstance(machine, CounterMachine):
        raise DomainError("expected a counter machine")
    return check_machine(machine, bounds, scope, tol)


def check_stack_machine(machine: StackMachine, bounds=None, scope=None,
                        tol=None) -> WfReport:
    if not isinstance(machine, StackMachine):
        raise DomainError("expected a stack machine")
    return check_machine(machine, bounds, scope, tol)


@dataclass(frozen=True)
class CrosscheckRecord:
    symbol: str
    matrix_passed: bool
    delta_passed: bool
    deviation: float
    worst_pair: tuple[str, str]
    common_offender: bool

    @property
    def agree(self) -> bool:
        return self.matrix_passed == self.delta_passed and (
            self.matrix_passed or self.common_offender)

    def to_json(self) -> dict:
        return {
            "symbol": self.symbol,
            "matrix_passed": self.matrix_passed,
            "delta_passed": self.delta_passed,
            "agree": self.agree,
            "deviation": self.deviation,
            "worst_pair": list(self.worst_pair),
        }


def matrix_crosscheck(machine: CounterMachine | StackMachine, symbol: str,
                      bounds: SimulationBounds | None = None,
                      tol: float | None = None) -> CrosscheckRecord:
    """Dense oracle: build the operator matrix over the window, form both
    products with its adjoint, and compare against the identity on the
    interior block.  Must agree with the rule-level verdict."""
    if bounds is None:
        bounds = default_wf_bounds(machine)
    if tol is None:
        tol = bounds.tol
    margin = _margin(machine)
    limit = _limit(machine, bounds)
    window = (counter_window(machine, bounds) if isinstance(machine, CounterMachine)
              else stack_window(machine, bounds))
    if len(window) > 6000:
        raise DomainError(
            f"window holds {len(window)} configurations; the dense oracle "
            f"needs a smaller window (shrink the bounds or use check_machine)")
    index = {c: i for i, c in enumerate(window)}
    interior_ix = [i for i, c in enumerate(window)
                   if all(margin <= v <= limit - margin for v in _coords(c))]
    if not interior_ix:
        raise DomainError("window interior is empty; enlarge the window")

    grounded = ground_rules(machine, bounds)
    clipped = grounded.clipped.get(symbol, frozenset())
    explicit: dict = {}
    for rule in grounded.by_symbol.get(symbol, ()):
        explicit.setdefault(rule.source, []).append((rule.target, rule.amp))

    # Surviving entries of truncated sources stay in, mirroring the rule-level
    # column sums; such sources sit outside the interior so the comparison
    # blocks still see complete data.
    n = len(window)
    m = np.zeros((n, n), dtype=np.complex128)
    for c, i in index.items():
        entries = explicit.get(c)
        if entries is None:
            if machine.complete_with_identity and c not in clipped:
                m[i, i] = 1.0
            continue
        for tgt, amp in entries:
            m[index[tgt], i] += amp

    eye = np.eye(len(interior_ix), dtype=np.complex128)
    worst = 0.0
    worst_pair = (str(window[interior_ix[0]]), str(window[interior_ix[0]]))
    for product in (m.conj().T @ m, m @ m.conj().T):
        block = product[np.ix_(interior_ix, interior_ix)]
        dev = np.abs(block - eye)
        j, i = np.unravel_index(int(np.argmax(dev)), dev.shape)
        if dev[j, i] >= worst:
            worst = float(dev[j, i])
            worst_pair = (str(window[interior_ix[j]]), str(window[interior_ix[i]]))
    matrix_passed = worst <= tol

    delta_report = check_machine(machine, bounds, scope=None, tol=tol)
    sym_report = next((r for r in delta_report.symbols if r.symbol == symbol), None)
    if sym_report is None:
        raise DomainError(f"symbol {symbol!r} not in the machine's alphabet")
    delta_passed = not sym_report.violations
    offenders = {str(v.first) for v in sym_report.violations}
    offenders.update(str(v.second) for v in sym_report.violations if v.second is not None)
    common = (not matrix_passed and not delta_passed
              and bool(set(worst_pair) & offenders))
    return CrosscheckRecord(symbol=symbol, matrix_passed=matrix_passed,
                            delta_passed=delta_passed, deviation=worst,
                            worst_pair=worst_pair, common_offender=common)


@dataclass(frozen=True)
class IsometryReport:
    passed: bool
    judged: int
    violations: tuple[WfViolation, ...]

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "judged": self.judged,
            "violations": [v.to_json() for v in self.violations],
        }


def check_tm_isometry(machine: TapeMachine, x: Sequence[str], t: int,
                      bounds: SimulationBounds | None = None,
                      tol: float = DEFAULT_TOL) -> IsometryReport:
    """Norm preservation and pairwise orthogonality of one-step images over
    the non-final configurations reachable within t steps.  This certifies an
    isometry on the reachable subspace only, not full-space unitarity."""
    radius = bounds.radius if bounds is not None and bounds.radius is not None else max(1, t)
    finals = {machine.accept, machine.reject}
    current = {machine.initial_config(x, radius)}
    sources: set = set()
    for _ in range(t):
        live = {c for c in current if c.state not in finals}
        sources.update(live)
        nxt = {c for c in current if c.state in finals}
        for c in live:
            nxt.update(qtm_step(machine, Superposition.basis(c), radius).keys())
        current = nxt

    ordered = sorted(sources, key=lambda c: (c.state, c.head, c.tape))
    images = {c: qtm_step(machine, Superposition.basis(c), radius) for c in ordered}
    violations: list[WfViolation] = []
    for c in ordered:
        norm2 = images[c].norm2()
        if abs(norm2 - 1.0) > tol:
            violations.append(WfViolation(1, c, None, complex(norm2), 1.0))
    by_support: dict = {}
    for c in ordered:
        for key in images[c].keys():
            by_support.setdefault(key, []).append(c)
    pairs = set()
    for group in by_support.values():
        for a, b in itertools.combinations(group, 2):
            pairs.add((a, b))
    for c1, c2 in sorted(pairs, key=lambda p: (p[0].state, p[0].head, p[1].state, p[1].head)):
        overlap = inner_product(images[c1], images[c2])
        if abs(overlap) > tol:
            violations.append(WfViolation(1, c1, c2, overlap, 0.0))
    return IsometryReport(passed=not violations and bool(ordered),
                          judged=len(ordered), violations=tuple(violations))
