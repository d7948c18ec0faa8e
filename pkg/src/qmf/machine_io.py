"""Strict JSON reader and canonical writer for machine descriptions.

The on-disk format is a single JSON object with a "model" tag selecting the
machine family.  Parsing is strict: unknown fields, wrong types, and malformed
expressions raise ParseError with a breadcrumb path into the document.
Emission is canonical (fixed field order, two-space indent, amplitudes always
in object form, trailing newline) so that parse/emit round-trips are
byte-identical, which the transpilers rely on for reproducible output.
"""

from __future__ import annotations

import json
import re
from typing import Any

from .amplitudes import format_amplitude, parse_amplitude
from .machines import (
    CounterMachine,
    CounterRule,
    IntExpr,
    IntPattern,
    Machine,
    StackExpr,
    StackMachine,
    StackPattern,
    StackRule,
    TapeMachine,
    TapeRule,
)

__all__ = [
    "ParseError",
    "parse_machine",
    "emit_machine",
    "machine_to_json",
    "load_machine",
    "save_machine",
]

_EXPR_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)(?:([+-])(\d+))?$")


class ParseError(ValueError):
    """Malformed machine description; message carries a path into the document."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


def _expect(obj: Any, kind: type, path: str) -> Any:
    if not isinstance(obj, kind) or (kind is int and isinstance(obj, bool)):
        raise ParseError(path, f"expected {kind.__name__}, got {type(obj).__name__}")
    return obj


def _string_list(obj: Any, path: str) -> tuple[str, ...]:
    _expect(obj, list, path)
    out = []
    for i, item in enumerate(obj):
        out.append(_expect(item, str, f"{path}[{i}]"))
    return tuple(out)


def _take(doc: dict, field: str, path: str, required: bool = True, default=None) -> Any:
    if field not in doc:
        if required:
            raise ParseError(path, f"missing field {field!r}")
        return default
    return doc.pop(field)


def _no_leftovers(doc: dict, path: str) -> None:
    if doc:
        raise ParseError(path, f"unknown fields: {sorted(doc)}")


def _parse_amp(obj: Any, path: str) -> complex:
    try:
        return parse_amplitude(obj)
    except ValueError as exc:
        raise ParseError(path, str(exc)) from None


def _parse_int_pattern(obj: Any, path: str) -> IntPattern:
    if isinstance(obj, bool):
        raise ParseError(path, "expected an integer or a variable object")
    if isinstance(obj, int):
        return IntPattern(value=obj)
    if isinstance(obj, dict):
        doc = dict(obj)
        var = _expect(_take(doc, "var", path), str, f"{path}.var")
        lo = _take(doc, "min", path, required=False)
        hi = _take(doc, "max", path, required=False)
        _no_leftovers(doc, path)
        if lo is not None:
            _expect(lo, int, f"{path}.min")
        if hi is not None:
            _expect(hi, int, f"{path}.max")
        return IntPattern(var=var, lo=lo, hi=hi)
    raise ParseError(path, f"expected an integer or a variable object, got {type(obj).__name__}")


def _parse_int_expr(obj: Any, path: str) -> IntExpr:
    if isinstance(obj, bool):
        raise ParseError(path, "expected an integer or an expression string")
    if isinstance(obj, int):
        return IntExpr(var=None, const=obj)
    if isinstance(obj, str):
        m = _EXPR_RE.match(obj.replace(" ", ""))
        if not m:
            raise ParseError(path, f"cannot parse expression {obj!r}; expected forms like "
                                   f"\"n\", \"n+1\", \"n-2\"")
        var, sign, digits = m.groups()
        const = 0 if digits is None else (int(digits) if sign == "+" else -int(digits))
        return IntExpr(var=var, const=const)
    raise ParseError(path, f"expected an integer or an expression string, got {type(obj).__name__}")


def _parse_counter_rule(obj: Any, path: str) -> CounterRule:
    doc = dict(_expect(obj, dict, path))
    state = _expect(_take(doc, "from", path), str, f"{path}.from")
    symbol = _expect(_take(doc, "symbol", path), str, f"{path}.symbol")
    pre_raw = _expect(_take(doc, "pre", path), list, f"{path}.pre")
    post_raw = _expect(_take(doc, "post", path), list, f"{path}.post")
    to = _expect(_take(doc, "to", path), str, f"{path}.to")
    amp = _parse_amp(_take(doc, "amp", path), f"{path}.amp")
    _no_leftovers(doc, path)
    pre = tuple(_parse_int_pattern(p, f"{path}.pre[{i}]") for i, p in enumerate(pre_raw))
    post = tuple(_parse_int_expr(p, f"{path}.post[{i}]") for i, p in enumerate(post_raw))
    return CounterRule(state=state, symbol=symbol, pre=pre, post=post, to=to, amp=amp)


def _parse_stack_pattern(obj: Any, path: str) -> StackPattern:
    if isinstance(obj, list):
        return StackPattern(prefix=_string_list(obj, path))
    if isinstance(obj, dict):
        doc = dict(obj)
        top = _string_list(_take(doc, "top", path), f"{path}.top")
        rest = _expect(_take(doc, "rest", path), str, f"{path}.rest")
        lo = _take(doc, "min", path, required=False)
        hi = _take(doc, "max", path, required=False)
        _no_leftovers(doc, path)
        if lo is not None:
            _expect(lo, int, f"{path}.min")
        if hi is not None:
            _expect(hi, int, f"{path}.max")
        return StackPattern(prefix=top, rest=rest, lo=lo, hi=hi)
    raise ParseError(path, f"expected a symbol list or a top/rest object, got {type(obj).__name__}")


def _parse_stack_expr(obj: Any, path: str) -> StackExpr:
    if isinstance(obj, list):
        return StackExpr(prefix=_string_list(obj, path))
    if isinstance(obj, dict):
        doc = dict(obj)
        top = _string_list(_take(doc, "top", path), f"{path}.top")
        rest = _expect(_take(doc, "rest", path), str, f"{path}.rest")
        _no_leftovers(doc, path)
        return StackExpr(prefix=top, rest=rest)
    raise ParseError(path, f"expected a symbol list or a top/rest object, got {type(obj).__name__}")


def _parse_stack_rule(obj: Any, path: str) -> StackRule:
    doc = dict(_expect(obj, dict, path))
    state = _expect(_take(doc, "from", path), str, f"{path}.from")
    symbol = _expect(_take(doc, "symbol", path), str, f"{path}.symbol")
    pre_raw = _expect(_take(doc, "pre", path), list, f"{path}.pre")
    post_raw = _expect(_take(doc, "post", path), list, f"{path}.post")
    to = _expect(_take(doc, "to", path), str, f"{path}.to")
    amp = _parse_amp(_take(doc, "amp", path), f"{path}.amp")
    _no_leftovers(doc, path)
    pre = tuple(_parse_stack_pattern(p, f"{path}.pre[{i}]") for i, p in enumerate(pre_raw))
    post = tuple(_parse_stack_expr(p, f"{path}.post[{i}]") for i, p in enumerate(post_raw))
    return StackRule(state=state, symbol=symbol, pre=pre, post=post, to=to, amp=amp)


def _parse_tape_rule(obj: Any, path: str) -> TapeRule:
    doc = dict(_expect(obj, dict, path))
    state = _expect(_take(doc, "from", path), str, f"{path}.from")
    read = _expect(_take(doc, "read", path), str, f"{path}.read")
    write = _expect(_take(doc, "write", path), str, f"{path}.write")
    to = _expect(_take(doc, "to", path), str, f"{path}.to")
    move = _expect(_take(doc, "move", path), str, f"{path}.move")
    amp = _parse_amp(_take(doc, "amp", path), f"{path}.amp")
    _no_leftovers(doc, path)
    return TapeRule(state=state, read=read, write=write, to=to, move=move, amp=amp)


def parse_machine(text: str) -> Machine:
    """Parse a machine description from JSON text; strict about every field."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError("", f"invalid JSON: {exc}") from None
    doc = dict(_expect(doc, dict, ""))

    model = _expect(_take(doc, "model", ""), str, "model")
    states = _string_list(_take(doc, "states", ""), "states")
    initial = _expect(_take(doc, "initial", ""), str, "initial")
    accept = _expect(_take(doc, "accept", ""), str, "accept")
    reject = _expect(_take(doc, "reject", ""), str, "reject")
    input_alphabet = _string_list(_take(doc, "input_alphabet", ""), "input_alphabet")
    rules_raw = _expect(_take(doc, "rules", ""), list, "rules")

    if model == "qmcm":
        counters = _expect(_take(doc, "counters", ""), int, "counters")
        deltas_raw = _expect(_take(doc, "allowed_deltas", ""), list, "allowed_deltas")
        deltas = tuple(_expect(d, int, f"allowed_deltas[{i}]") for i, d in enumerate(deltas_raw))
        padding = _string_list(_take(doc, "padding", "", required=False, default=[]), "padding")
        identity = _expect(_take(doc, "complete_with_identity", "", required=False, default=False),
                           bool, "complete_with_identity")
        _no_leftovers(doc, "")
        rules = tuple(_parse_counter_rule(r, f"rules[{i}]") for i, r in enumerate(rules_raw))
        return CounterMachine(states=states, initial=initial, accept=accept, reject=reject,
                              input_alphabet=input_alphabet, counters=counters,
                              allowed_deltas=deltas, rules=rules, padding=padding,
                              complete_with_identity=identity)
    if model == "qmsm":
        stacks = _expect(_take(doc, "stacks", ""), int, "stacks")
        stack_alphabet = _string_list(_take(doc, "stack_alphabet", ""), "stack_alphabet")
        bottom = _expect(_take(doc, "bottom", ""), str, "bottom")
        padding = _string_list(_take(doc, "padding", "", required=False, default=[]), "padding")
        identity = _expect(_take(doc, "complete_with_identity", "", required=False, default=False),
                           bool, "complete_with_identity")
        _no_leftovers(doc, "")
        rules = tuple(_parse_stack_rule(r, f"rules[{i}]") for i, r in enumerate(rules_raw))
        return StackMachine(states=states, initial=initial, accept=accept, reject=reject,
                            input_alphabet=input_alphabet, stacks=stacks,
                            stack_alphabet=stack_alphabet, bottom=bottom, rules=rules,
                            padding=padding, complete_with_identity=identity)
    if model == "qtm":
        blank = _expect(_take(doc, "blank", ""), str, "blank")
        _no_leftovers(doc, "")
        rules = tuple(_parse_tape_rule(r, f"rules[{i}]") for i, r in enumerate(rules_raw))
        return TapeMachine(states=states, initial=initial, accept=accept, reject=reject,
                           input_alphabet=input_alphabet, blank=blank, rules=rules)
    raise ParseError("model", f"unknown model {model!r}; expected qtm, qmcm, or qmsm")


def _int_pattern_json(pat: IntPattern):
    if pat.is_literal():
        return pat.value
    out: dict = {"var": pat.var}
    if pat.lo is not None:
        out["min"] = pat.lo
    if pat.hi is not None:
        out["max"] = pat.hi
    return out


def _int_expr_json(expr: IntExpr):
    if expr.var is None:
        return expr.const
    if expr.const == 0:
        return expr.var
    return f"{expr.var}{expr.const:+d}"


def _stack_pattern_json(pat: StackPattern):
    if pat.is_literal():
        return list(pat.prefix)
    out: dict = {"top": list(pat.prefix), "rest": pat.rest}
    if pat.lo is not None:
        out["min"] = pat.lo
    if pat.hi is not None:
        out["max"] = pat.hi
    return out


def _stack_expr_json(expr: StackExpr):
    if expr.rest is None:
        return list(expr.prefix)
    return {"top": list(expr.prefix), "rest": expr.rest}


def machine_to_json(machine: Machine) -> dict:
    """Canonical JSON document for a machine; field order is part of the format."""
    doc: dict = {
        "model": machine.model,
        "states": list(machine.states),
        "initial": machine.initial,
        "accept": machine.accept,
        "reject": machine.reject,
        "input_alphabet": list(machine.input_alphabet),
    }
    if isinstance(machine, CounterMachine):
        doc["counters"] = machine.counters
        doc["allowed_deltas"] = list(machine.allowed_deltas)
        if machine.padding:
            doc["padding"] = list(machine.padding)
        if machine.complete_with_identity:
            doc["complete_with_identity"] = True
        doc["rules"] = [
            {"from": r.state, "symbol": r.symbol,
             "pre": [_int_pattern_json(p) for p in r.pre],
             "post": [_int_expr_json(e) for e in r.post],
             "to": r.to, "amp": format_amplitude(r.amp)}
            for r in machine.rules
        ]
    elif isinstance(machine, StackMachine):
        doc["stacks"] = machine.stacks
        doc["stack_alphabet"] = list(machine.stack_alphabet)
        doc["bottom"] = machine.bottom
        if machine.padding:
            doc["padding"] = list(machine.padding)
        if machine.complete_with_identity:
            doc["complete_with_identity"] = True
        doc["rules"] = [
            {"from": r.state, "symbol": r.symbol,
             "pre": [_stack_pattern_json(p) for p in r.pre],
             "post": [_stack_expr_json(e) for e in r.post],
             "to": r.to, "amp": format_amplitude(r.amp)}
            for r in machine.rules
        ]
    else:
        doc["blank"] = machine.blank
        doc["rules"] = [
            {"from": r.state, "read": r.read, "write": r.write,
             "to": r.to, "move": r.move, "amp": format_amplitude(r.amp)}
            for r in machine.rules
        ]
    return doc


def emit_machine(machine: Machine) -> str:
    return json.dumps(machine_to_json(machine), indent=2, ensure_ascii=False) + "\n"


def load_machine(path) -> Machine:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_machine(handle.read())


def save_machine(machine: Machine, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(emit_machine(machine))
