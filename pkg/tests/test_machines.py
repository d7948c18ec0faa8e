"""Machine structures, validation clauses, and schema grounding."""

import pytest

from conftest import INVALID_NAMES, WF_CORPUS, load_corpus
from qmf.amplitudes import DomainError, WindowLeakError
from qmf.machines import (
    CounterConfig,
    CounterMachine,
    CounterRule,
    IntExpr,
    IntPattern,
    SimulationBounds,
    StackConfig,
    derive_bounds,
    ground_rules,
    machine_symbols,
    reachable_configs,
    validate_machine,
)


def one_counter(rules, deltas=(0, 1, -1), **kwargs):
    defaults = dict(states=("q0", "qa", "qr"), initial="q0", accept="qa",
                    reject="qr", input_alphabet=("a",), counters=1,
                    allowed_deltas=deltas, rules=tuple(rules))
    defaults.update(kwargs)
    return CounterMachine(**defaults)


def var_rule(state="q0", symbol="a", lo=0, hi=None, shift=0, to="q0", amp=1.0):
    return CounterRule(state=state, symbol=symbol,
                       pre=(IntPattern(var="n", lo=lo, hi=hi),),
                       post=(IntExpr("n", shift),), to=to, amp=complex(amp))


class TestValidation:
    def test_clean_machine(self):
        assert validate_machine(one_counter([var_rule()])) == []

    def test_unknown_state(self):
        m = one_counter([var_rule(to="nowhere")])
        assert any(v.clause == "states" for v in validate_machine(m))

    def test_reserved_symbols_not_in_alphabet(self):
        m = one_counter([], input_alphabet=("a", "#"))
        assert any(v.clause == "alphabet" for v in validate_machine(m))

    def test_rule_symbol_must_be_consumable(self):
        m = one_counter([var_rule(symbol="z")])
        assert any(v.clause == "symbol" for v in validate_machine(m))

    def test_arity_mismatch(self):
        bad = CounterRule(state="q0", symbol="a",
                          pre=(IntPattern(value=0), IntPattern(value=0)),
                          post=(IntExpr(None, 0), IntExpr(None, 0)),
                          to="q0", amp=1.0 + 0j)
        m = one_counter([bad])
        assert any(v.clause == "arity" for v in validate_machine(m))

    def test_unbound_variable_in_post(self):
        bad = CounterRule(state="q0", symbol="a", pre=(IntPattern(value=0),),
                          post=(IntExpr("m", 0),), to="q0", amp=1.0 + 0j)
        m = one_counter([bad])
        assert any(v.clause == "binding" for v in validate_machine(m))

    def test_missing_lower_bound(self):
        m = one_counter([var_rule(lo=None)])
        assert any(v.clause == "range" for v in validate_machine(m))

    def test_delta_outside_declared_set(self):
        m = one_counter([var_rule(shift=5)])
        assert any(v.clause == "allowed-delta" for v in validate_machine(m))

    def test_negative_target_rejected(self):
        m = one_counter([var_rule(lo=0, shift=-1)])
        assert any(v.clause == "nonnegative" for v in validate_machine(m))

    def test_lowered_variable_needs_matching_floor(self):
        assert validate_machine(one_counter([var_rule(lo=1, shift=-1)])) == []

    @pytest.mark.parametrize("name", WF_CORPUS)
    def test_corpus_validates(self, name):
        assert validate_machine(load_corpus(name)) == []

    @pytest.mark.parametrize("name", INVALID_NAMES)
    def test_invalid_corpus_flagged(self, name):
        assert validate_machine(load_corpus(name)) != []


class TestBounds:
    def test_rejects_nonpositive(self):
        with pytest.raises(DomainError):
            SimulationBounds(n_max=0)

    def test_rejects_wild_tol(self):
        with pytest.raises(DomainError):
            SimulationBounds(n_max=4, tol=0.5)

    def test_derived_counter_window_scales_with_input(self):
        m = load_corpus("hadamard_shift3")
        b = derive_bounds(m, 6)
        assert b.n_max == 6 * 3 + 1

    def test_derived_stack_window(self):
        m = load_corpus("push_stack")
        assert derive_bounds(m, 5).d_max == 6

    def test_qtm_needs_steps(self):
        m = load_corpus("toy_branch_qtm")
        with pytest.raises(DomainError):
            derive_bounds(m, 3)


class TestGrounding:
    def test_duplicate_rule_amplitudes_accumulate(self):
        m = one_counter([var_rule(amp=0.5), var_rule(amp=-0.5)])
        g = ground_rules(m, SimulationBounds(n_max=4))
        assert g.by_symbol.get("a", ()) == ()

    def test_clipped_sources_recorded(self):
        m = one_counter([var_rule(shift=1)])
        g = ground_rules(m, SimulationBounds(n_max=3))
        assert CounterConfig("q0", (3,)) in g.clipped["a"]
        assert CounterConfig("q0", (2,)) not in g.clipped["a"]

    def test_instances_ordered_and_complete(self):
        m = one_counter([var_rule(lo=1, shift=-1)])
        g = ground_rules(m, SimulationBounds(n_max=3))
        sources = [r.source.counters[0] for r in g.by_symbol["a"]]
        assert sources == [1, 2, 3]

    def test_unbounded_var_without_cap_raises(self):
        m = one_counter([var_rule()])
        with pytest.raises(DomainError):
            ground_rules(m, SimulationBounds(d_max=3))


class TestReachability:
    def test_route_trace(self):
        m = load_corpus("route_counter")
        trace = reachable_configs(m, ["#", "a", "$"], SimulationBounds(n_max=2))
        assert trace[0] == frozenset({CounterConfig("q0", (0,))})
        assert trace[1] == frozenset({CounterConfig("qa", (0,))})
        assert trace[3] == frozenset({CounterConfig("qa", (0,))})

    def test_leak_carries_config_and_step(self):
        m = one_counter([var_rule(symbol="#", shift=1)])
        with pytest.raises(WindowLeakError) as exc:
            reachable_configs(m, ["#", "#"], SimulationBounds(n_max=1))
        assert exc.value.config == CounterConfig("q0", (1,))
        assert exc.value.step == 2

    def test_stack_configs_reachable(self):
        m = load_corpus("push_stack")
        trace = reachable_configs(m, ["#", "a", "$"], SimulationBounds(d_max=4))
        assert StackConfig("qa", (("X", "Z0"),)) in trace[3]


class TestSymbols:
    def test_machine_symbols_include_endmarkers(self):
        m = load_corpus("hadamard_walk")
        syms = machine_symbols(m)
        assert "#" in syms and "$" in syms and "a" in syms and "b" in syms

    def test_padding_symbols_consumable(self):
        m = one_counter([], padding=("B2",))
        assert "B2" in machine_symbols(m)
