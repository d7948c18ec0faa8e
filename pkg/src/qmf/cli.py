"""Command-line front end: check, run, transpile, compare.

Exit statuses are a function of the printed report: 0 success/pass, 1 failed
judgment, 2 inconclusive, 3 parse/validate/precondition error, 4 window leak.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .amplitudes import DomainError, WindowLeakError
from .machine_io import ParseError, emit_machine, load_machine
from .machines import (
    CounterMachine,
    SimulationBounds,
    StackMachine,
    TapeMachine,
    derive_bounds,
    validate_machine,
)
from .simulate import input_sequence, run_machine, run_qtm
from .transpile import (
    all_inputs,
    compare_acceptance,
    counters_to_stacks,
    reduce_to_unit_counts,
    split_counter_radix,
    tm_to_counters,
    tm_to_stacks,
)
from .wf import check_machine

STAGES = ("split-radix", "unit-counts", "tm-to-counters", "counters-to-stacks",
          "pipeline")


class CliError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status


def _parse_symbols(text: str) -> tuple[str, ...]:
    """Symbol stream: comma-separated tokens, or one symbol per character."""
    if text == "":
        return ()
    if "," in text:
        return tuple(tok for tok in text.split(",") if tok)
    return tuple(text)


def _label(x: tuple[str, ...]) -> str:
    return ",".join(x) if any(len(s) > 1 for s in x) else "".join(x) or "(empty)"


def _load(path: str):
    try:
        machine = load_machine(path)
    except FileNotFoundError:
        raise CliError(3, f"{path}: no such file")
    except ParseError as exc:
        raise CliError(3, f"{path}: {exc}")
    problems = validate_machine(machine)
    if problems:
        lines = "; ".join(v.message for v in problems[:3])
        raise CliError(3, f"{path}: invalid machine: {lines}")
    return machine


def _merge_bounds(defaults: SimulationBounds, args) -> SimulationBounds:
    updates = {}
    if args.nmax is not None:
        updates["n_max"] = args.nmax
    if args.dmax is not None:
        updates["d_max"] = args.dmax
    if args.radius is not None:
        updates["radius"] = args.radius
    if args.tol is not None:
        updates["tol"] = args.tol
    return dataclasses.replace(defaults, **updates) if updates else defaults


def _bounds_override(args) -> bool:
    return any(v is not None for v in (args.nmax, args.dmax, args.radius))


def _input_alphabet(machine) -> tuple[str, ...]:
    if isinstance(machine, TapeMachine):
        return tuple(s for s in machine.input_alphabet if s != machine.blank)
    return machine.input_alphabet


def _gather_inputs(args, alphabet) -> list[tuple[str, ...]]:
    if args.all_inputs is not None:
        return all_inputs(alphabet, args.all_inputs)
    return [_parse_symbols(text) for text in (args.input or [])]


def _emit_json(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


# ---------------------------------------------------------------------------

def cmd_check(args) -> int:
    machine = _load(args.machine)
    if isinstance(machine, TapeMachine):
        raise CliError(3, "tape machines are checked through their counter "
                          "translation; run transpile first")
    scope = None
    if args.scope == "reachable":
        scope = _gather_inputs(args, machine.input_alphabet) or \
            all_inputs(machine.input_alphabet, 2)
    bounds = None
    if _bounds_override(args) or args.tol is not None:
        from .wf import default_wf_bounds
        bounds = _merge_bounds(default_wf_bounds(machine, scope), args)
    report = check_machine(machine, bounds=bounds, scope=scope,
                           tol=args.tol)
    if args.format == "json":
        _emit_json(report.to_json())
    else:
        for sym in report.symbols:
            verdict = "ok" if (sym.condition1 and sym.condition2) else "violated"
            extra = f", {len(sym.inconclusive)} boundary" if sym.inconclusive else ""
            print(f"symbol {sym.symbol}: {verdict} "
                  f"({sym.judged} judged{extra})")
            for v in sym.violations[:5]:
                print(f"  condition {v.condition}: {v.first} / {v.second} "
                      f"-> {v.value:.6g}, expected {v.expected:.6g}")
        print(f"{report.status} ({report.certificate}, {report.judged} configurations)")
    return {"pass": 0, "violations": 1, "inconclusive": 2}[report.status]


def cmd_run(args) -> int:
    machine = _load(args.machine)
    inputs = _gather_inputs(args, _input_alphabet(machine))
    if not inputs:
        raise CliError(3, "provide --input or --all-inputs")
    rows = []
    for x in inputs:
        if isinstance(machine, TapeMachine):
            if args.t is None:
                raise CliError(3, "tape machines need --t (number of steps)")
            defaults = derive_bounds(machine, len(x), t=args.t,
                                     tol=args.tol or 1e-9)
            result = run_qtm(machine, x, args.t, _merge_bounds(defaults, args),
                             trace=args.trace)
        else:
            defaults = derive_bounds(machine, len(input_sequence(x)),
                                     tol=args.tol or 1e-9)
            result = run_machine(machine, x, _merge_bounds(defaults, args),
                                 trace=args.trace)
        rows.append((x, result))
    if args.format == "json":
        _emit_json([{
            "input": _label(x),
            "probability": r.probability,
            "steps": r.steps,
            "norms": r.norms,
            "halted": r.halted,
        } for x, r in rows])
        return 0
    for x, r in rows:
        if args.trace:
            for i, norm in enumerate(r.norms):
                print(f"# {_label(x)} step {i} norm {norm:.12f}")
        if len(rows) == 1:
            print(f"{r.probability:.12f}")
        else:
            print(f"{_label(x)} {r.probability:.12f}")
    return 0


def _transpile_output(args, machine, provenance) -> None:
    out = Path(args.output)
    out.write_text(emit_machine(machine), encoding="utf-8")
    sidecar = out.with_suffix(".provenance.json") if out.suffix else \
        Path(str(out) + ".provenance.json")
    sidecar.write_text(json.dumps(provenance, indent=2, sort_keys=True) + "\n",
                       encoding="utf-8")
    print(f"wrote {out} and {sidecar.name}")


def cmd_transpile(args) -> int:
    machine = _load(args.machine)
    try:
        if args.stage == "split-radix":
            if not isinstance(machine, CounterMachine):
                raise DomainError("split-radix expects a counter machine")
            out = split_counter_radix(machine)
            prov = {"stage": args.stage,
                    "r": max(machine.allowed_deltas),
                    "counters_in": machine.counters, "counters_out": out.counters}
        elif args.stage == "unit-counts":
            if not isinstance(machine, CounterMachine):
                raise DomainError("unit-counts expects a counter machine")
            out = reduce_to_unit_counts(machine)
            prov = {"stage": args.stage,
                    "r": max(abs(d) for d in machine.allowed_deltas),
                    "counters_in": machine.counters, "counters_out": out.counters}
        elif args.stage == "counters-to-stacks":
            if not isinstance(machine, CounterMachine):
                raise DomainError("counters-to-stacks expects a counter machine")
            out = counters_to_stacks(machine)
            prov = {"stage": args.stage, "stacks": out.stacks}
        else:
            if not isinstance(machine, TapeMachine):
                raise DomainError(f"{args.stage} expects a tape machine")
            if args.n is None or args.t is None:
                raise DomainError(f"{args.stage} needs --n and --t")
            if args.stage == "tm-to-counters":
                plan = tm_to_counters(machine, args.n, args.t)
                out, prov = plan.machine, plan.provenance()
            else:
                result = tm_to_stacks(machine, args.n, args.t)
                out, prov = result.stack_machine, result.provenance()
    except DomainError as exc:
        raise CliError(3, str(exc))
    _transpile_output(args, out, prov)
    return 0


def cmd_compare(args) -> int:
    m1 = _load(args.machine)
    m2 = _load(args.other)
    inputs = _gather_inputs(args, _input_alphabet(m1))
    if not inputs:
        raise CliError(3, "provide --input or --all-inputs")
    encoder = None
    if args.encoder == "tape":
        if not isinstance(m1, TapeMachine):
            raise CliError(3, "--encoder tape needs a tape machine first")
        if args.n is None or args.t is None:
            raise CliError(3, "--encoder tape needs --n and --t")
        plan = tm_to_counters(m1, args.n, args.t)
        encoder = plan.encode_input
    bounds1 = bounds2 = None
    if _bounds_override(args):
        longest = max((len(x) for x in inputs), default=0)
        if isinstance(m1, TapeMachine):
            bounds1 = _merge_bounds(derive_bounds(m1, longest, t=args.t), args)
        else:
            bounds1 = _merge_bounds(derive_bounds(m1, longest + 2), args)
        enc_len = longest + 2
        if encoder is not None:
            enc_len = encoder(inputs[-1]).length if inputs else enc_len
        bounds2 = _merge_bounds(derive_bounds(m2, enc_len), args)
    report = compare_acceptance(m1, m2, inputs, encoder=encoder,
                                tol=args.tol or 1e-9, t1=args.t,
                                bounds1=bounds1, bounds2=bounds2,
                                workers=args.workers)
    if args.format == "json":
        _emit_json(report.to_json())
    else:
        for row in report.rows:
            if row.leak is not None:
                print(f"{_label(row.x)} inconclusive: {row.leak}")
            else:
                print(f"{_label(row.x)} {row.p_source:.12f} {row.p_target:.12f} "
                      f"diff {row.diff:.3e}")
        verdict = "pass" if report.passed else \
            ("inconclusive" if report.inconclusive else "fail")
        print(f"{verdict} max_diff {report.max_diff:.3e} tol {report.tol:g}")
    if report.passed:
        return 0
    return 2 if report.inconclusive else 1


# ---------------------------------------------------------------------------

def _add_bounds_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--nmax", type=int, default=None,
                   help="counter-value window cap")
    p.add_argument("--dmax", type=int, default=None,
                   help="stack-height window cap")
    p.add_argument("--radius", type=int, default=None, help="tape window radius")
    p.add_argument("--tol", type=float, default=None, help="numeric tolerance")


def _add_input_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", action="append", metavar="X",
                   help="input string; comma-separate multi-character symbols; "
                        "repeatable; empty string allowed")
    p.add_argument("--all-inputs", type=int, metavar="L", default=None,
                   help="all inputs up to length L, shortest first")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qmf",
        description="Verify, simulate, and translate quantum counter, stack, "
                    "and tape machines.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="unitarity judgment over a finite window")
    p.add_argument("machine")
    p.add_argument("--scope", choices=("full", "reachable"), default="full")
    _add_input_flags(p)
    _add_bounds_flags(p)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("run", help="acceptance probability on an input")
    p.add_argument("machine")
    _add_input_flags(p)
    p.add_argument("--t", type=int, default=None,
                   help="step count (tape machines)")
    p.add_argument("--trace", action="store_true",
                   help="print per-step norms")
    _add_bounds_flags(p)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("transpile", help="translate between machine models")
    p.add_argument("stage", choices=STAGES)
    p.add_argument("machine")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--n", type=int, default=None, help="input length bound")
    p.add_argument("--t", type=int, default=None, help="step count bound")
    p.set_defaults(func=cmd_transpile)

    p = sub.add_parser("compare", help="acceptance probabilities of two machines")
    p.add_argument("machine")
    p.add_argument("other")
    _add_input_flags(p)
    p.add_argument("--encoder", choices=("identity", "tape"), default="identity",
                   help="how first-machine inputs map to the second machine")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--t", type=int, default=None)
    p.add_argument("--workers", type=int, default=None,
                   help="parallel evaluations (QMF_THREADS also caps this)")
    _add_bounds_flags(p)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.status
    except WindowLeakError as exc:
        print(f"window leak: {exc}", file=sys.stderr)
        return 4
    except (DomainError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main(argv=sys.argv[1:]))
