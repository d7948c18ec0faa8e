"""Model-to-model translations and their equivalence machinery.

Numeric oracles (digit splits, one-hot encodings, acceptance probabilities)
were computed by hand or with the dense matrix check before being frozen.
"""

import pytest

from conftest import load_corpus
from qmf.amplitudes import DomainError
from qmf.machines import SimulationBounds, TapeConfig, TapeMachine, TapeRule, validate_machine
from qmf.simulate import run_machine, run_qtm
from qmf.transpile import (
    all_inputs,
    check_intertwining,
    compare_acceptance,
    counter_value_to_stack,
    counters_to_stacks,
    decode_unit,
    encode_unit,
    join_value_radix,
    reduce_to_unit_counts,
    split_counter_radix,
    split_value_radix,
    stack_to_counter_value,
    tm_to_counters,
    tm_to_stacks,
)
from qmf.wf import check_machine

EXACT = 1e-12


class TestRadixSplit:
    def test_frozen_digits(self):
        assert split_value_radix(7, 3) == (1, 2)
        assert split_value_radix(0, 3) == (0, 0)
        assert split_value_radix(3, 3) == (0, 1)

    @pytest.mark.parametrize("r", [2, 3, 4, 5])
    def test_round_trip(self, r):
        for v in range(31):
            digit, quot = split_value_radix(v, r)
            assert 0 <= digit < r
            assert join_value_radix(digit, quot, r) == v

    def test_machine_shape(self):
        out = split_counter_radix(load_corpus("hadamard_shift3"))
        assert out.counters == 2
        assert out.allowed_deltas == (-2, -1, 0, 1, 2)
        assert out.complete_with_identity

    def test_requires_single_long_stride(self):
        with pytest.raises(DomainError):
            split_counter_radix(load_corpus("mixed_shift23"))

    def test_preserves_acceptance(self):
        m = load_corpus("hadamard_shift3")
        rep = compare_acceptance(m, split_counter_radix(m),
                                 all_inputs(m.input_alphabet, 3))
        assert rep.passed
        assert rep.max_diff == 0.0


class TestUnitCounts:
    def test_frozen_codes(self):
        assert encode_unit(7, 3) == (1, 0, 2)
        assert encode_unit(3, 3) == (0, 0, 1)
        assert encode_unit(0, 3) == (0, 0, 0)

    @pytest.mark.parametrize("r", [2, 3, 4])
    def test_round_trip(self, r):
        for v in range(31):
            coords = encode_unit(v, r)
            assert len(coords) == r
            assert decode_unit(coords, r) == v

    def test_machine_shape(self):
        out = reduce_to_unit_counts(load_corpus("mixed_shift23"))
        assert out.counters == 3
        assert out.allowed_deltas == (-1, 0, 1)

    def test_unit_strides_pass_through(self):
        m = load_corpus("hadamard_walk")
        assert reduce_to_unit_counts(m) is m

    def test_preserves_acceptance(self):
        m = load_corpus("mixed_shift23")
        rep = compare_acceptance(m, reduce_to_unit_counts(m),
                                 all_inputs(m.input_alphabet, 2))
        assert rep.passed
        assert rep.max_diff == 0.0

    def test_target_is_well_formed(self):
        rep = check_machine(reduce_to_unit_counts(load_corpus("mixed_shift23")))
        assert rep.status == "pass"


class TestTapeToCounters:
    def test_plan_shape(self, toy_qtm):
        plan = tm_to_counters(toy_qtm, 2, 3)
        assert plan.machine.counters == 8
        assert plan.r == 3
        assert plan.e == {"a": 1, "B1": 2}
        assert plan.machine.allowed_deltas == (-3, -2, -1, 0, 1, 2, 3)
        assert max(plan.machine.allowed_deltas) == plan.r

    def test_encoded_input_layout(self, toy_qtm):
        plan = tm_to_counters(toy_qtm, 2, 3)
        enc = plan.encode_input(["a"])
        assert enc.body == ("a",) + ("B2",) * 1 + ("B3",) * 6 + ("B4",) * 3
        assert enc.exponents == {"B2": 1, "B3": 6, "B4": 3}
        assert enc.full == ("#",) + enc.body + ("$",)
        assert enc.length == 2 * 1 + 2 * 3 + 5

    def test_length_bound_over_small_grid(self, toy_qtm):
        for t in range(0, 5):
            for n in range(0, t + 2):
                plan = tm_to_counters(toy_qtm, n, t)
                for k in range(n + 1):
                    enc = plan.encode_input(["a"] * k)
                    assert enc.length <= 4 * (n + t) + 5

    def test_embed_config(self, toy_qtm):
        plan = tm_to_counters(toy_qtm, 2, 3)
        c = TapeConfig("p0", ("B1",) * 3 + ("a",) + ("B1",) * 3, 0)
        assert plan.embed_config(c).counters == (2, 2, 2, 1, 2, 2, 2, 4)

    def test_embed_rejects_wrong_window(self, toy_qtm):
        plan = tm_to_counters(toy_qtm, 1, 2)
        with pytest.raises(DomainError):
            plan.embed_config(TapeConfig("p0", ("B1",) * 3, 0))

    def test_input_too_long_rejected(self, toy_qtm):
        plan = tm_to_counters(toy_qtm, 1, 1)
        with pytest.raises(DomainError):
            plan.encode_input(["a", "a"])

    def test_needs_room_for_input(self, toy_qtm):
        with pytest.raises(DomainError, match="t\\+1"):
            tm_to_counters(toy_qtm, 3, 1)

    def test_reserved_marker_collision(self):
        m = TapeMachine(states=("p0", "qa", "qr"), initial="p0", accept="qa",
                        reject="qr", input_alphabet=("B2", "B1"), blank="B1",
                        rules=(TapeRule("p0", "B2", "B2", "qa", "R", 1.0 + 0j),))
        with pytest.raises(DomainError, match="reserved"):
            tm_to_counters(m, 1, 1)

    def test_invalid_source_rejected(self):
        m = TapeMachine(states=("p0", "qa", "qr"), initial="p0", accept="qa",
                        reject="qr", input_alphabet=("a", "B1"), blank="B1",
                        rules=(TapeRule("p0", "a", "a", "ghost", "R", 1.0 + 0j),))
        with pytest.raises(DomainError, match="invalid"):
            tm_to_counters(m, 1, 1)

    def test_target_validates(self, toy_qtm):
        plan = tm_to_counters(toy_qtm, 2, 3)
        assert validate_machine(plan.machine) == []

    def test_probabilities_match_source(self, toy_qtm):
        plan = tm_to_counters(toy_qtm, 2, 3)
        bounds = plan.recommended_bounds()
        for x in ([], ["a"], ["a", "a"]):
            want = run_qtm(toy_qtm, x, plan.t).probability
            got = run_machine(plan.machine, plan.encode_input(x).body, bounds).probability
            assert got == pytest.approx(want, abs=EXACT)

    def test_reachable_well_formedness(self, toy_qtm):
        plan = tm_to_counters(toy_qtm, 2, 3)
        bodies = [plan.encode_input(x).body for x in ([], ["a"], ["a", "a"])]
        rep = check_machine(plan.machine, bounds=plan.recommended_bounds(),
                            scope=bodies)
        assert rep.status == "pass"

    def test_provenance_contents(self, toy_qtm):
        plan = tm_to_counters(toy_qtm, 2, 3)
        p = plan.provenance()
        assert p["counters"] == 8
        assert p["length_bound"] == {"input_coeff": 2, "step_coeff": 2,
                                     "constant": 5}
        assert p["exponents"]["B3"] == "k+t+2"

    def test_degenerate_zero_steps(self, toy_qtm):
        # t=0: no B4 phase, probability is just the initial-state mass
        plan = tm_to_counters(toy_qtm, 1, 0)
        got = run_machine(plan.machine, plan.encode_input(["a"]).body,
                          plan.recommended_bounds()).probability
        assert got == run_qtm(toy_qtm, ["a"], 0).probability == 0.0

    def test_empty_alphabet_source(self):
        m = TapeMachine(states=("p0", "qa", "qr"), initial="p0", accept="qa",
                        reject="qr", input_alphabet=("B1",), blank="B1",
                        rules=(TapeRule("p0", "B1", "B1", "qa", "R", 1.0 + 0j),))
        plan = tm_to_counters(m, 0, 2)
        got = run_machine(plan.machine, plan.encode_input([]).body,
                          plan.recommended_bounds()).probability
        assert got == pytest.approx(1.0, abs=EXACT)


class TestIntertwining:
    def test_branching_machine(self, toy_qtm):
        plan = tm_to_counters(toy_qtm, 2, 3)
        for x in ([], ["a"], ["a", "a"]):
            rep = check_intertwining(plan, x)
            assert rep.passed
            assert rep.max_diff == 0.0
            assert rep.offender is None

    def test_judged_grows_with_walk_length(self):
        m = load_corpus("move_right_qtm")
        plan = tm_to_counters(m, 2, 3)
        judged = [check_intertwining(plan, ["a"] * k).judged for k in range(3)]
        assert judged == [1, 2, 3]


class TestCountersToStacks:
    def test_value_encoding(self):
        assert counter_value_to_stack(0) == ("Z0",)
        assert counter_value_to_stack(3) == ("X", "X", "X", "Z0")
        for v in range(12):
            assert stack_to_counter_value(counter_value_to_stack(v)) == v

    def test_machine_shape(self):
        out = counters_to_stacks(load_corpus("hadamard_walk"))
        assert out.stacks == 1
        assert out.stack_alphabet == ("Z0", "X")
        assert out.bottom == "Z0"

    def test_needs_unit_strides(self):
        with pytest.raises(DomainError, match="unit"):
            counters_to_stacks(load_corpus("hadamard_shift3"))

    def test_preserves_acceptance(self):
        m = load_corpus("hadamard_walk")
        rep = compare_acceptance(m, counters_to_stacks(m),
                                 all_inputs(m.input_alphabet, 3))
        assert rep.passed
        assert rep.max_diff == 0.0

    def test_target_is_well_formed(self):
        rep = check_machine(counters_to_stacks(load_corpus("hadamard_walk")))
        assert rep.status == "pass"


class TestPipeline:
    def test_stage_chain(self):
        m = load_corpus("two_symbol_qtm")
        result = tm_to_stacks(m, 1, 2)
        assert result.counter_machine.counters == 6
        assert result.stack_machine.stacks == 6 * 4
        assert result.provenance()["stage"] == "pipeline"

    def test_stack_count_formula(self, toy_qtm):
        result = tm_to_stacks(toy_qtm, 1, 1)
        # (2t+2) counters, each fanned out over |input alphabet|+2 unit counters
        assert result.stack_machine.stacks == 4 * 3

    def test_end_to_end_probability(self, toy_qtm):
        result = tm_to_stacks(toy_qtm, 1, 1)
        enc = result.encode_input(["a"])
        want = run_qtm(toy_qtm, ["a"], 1).probability
        got = run_machine(result.stack_machine, enc.body,
                          SimulationBounds(d_max=len(enc.full) + 1)).probability
        assert got == pytest.approx(want, abs=EXACT)


class TestComparison:
    def test_identical_machines_pass(self):
        m = load_corpus("hadamard_walk")
        rep = compare_acceptance(m, m, all_inputs(m.input_alphabet, 2))
        assert rep.passed and not rep.inconclusive
        assert len(rep.rows) == 7

    def test_different_machines_fail(self):
        rep = compare_acceptance(load_corpus("route_counter"),
                                 load_corpus("identity_counter"), [(), ("a",)])
        assert not rep.passed
        assert rep.max_diff == pytest.approx(1.0)

    def test_leak_is_inconclusive_not_fail(self):
        m = load_corpus("hadamard_shift3")
        rep = compare_acceptance(m, m, [("b",) * 6],
                                 bounds2=SimulationBounds(n_max=6))
        assert rep.inconclusive
        assert not rep.passed
        assert rep.rows[0].leak is not None

    def test_tape_comparison_via_encoder(self, toy_qtm):
        plan = tm_to_counters(toy_qtm, 2, 3)
        rep = compare_acceptance(toy_qtm, plan.machine,
                                 all_inputs(("a",), 2), encoder=plan.encode_input,
                                 t1=plan.t, bounds2=plan.recommended_bounds())
        assert rep.passed
        assert rep.max_diff == 0.0

    def test_serial_and_parallel_agree(self):
        m = load_corpus("hadamard_walk")
        inputs = all_inputs(m.input_alphabet, 3)
        serial = compare_acceptance(m, m, inputs, workers=1)
        parallel = compare_acceptance(m, m, inputs, workers=4)
        assert serial.passed and parallel.passed
        assert [r.x for r in serial.rows] == [r.x for r in parallel.rows]

    def test_report_json_round_trips(self):
        import json
        m = load_corpus("route_counter")
        rep = compare_acceptance(m, m, [(), ("a",)])
        doc = json.loads(json.dumps(rep.to_json()))
        assert doc["passed"] is True
        assert doc["rows"][1]["input"] == "a"

    def test_all_inputs_order(self):
        got = all_inputs(("a", "b"), 2)
        assert got[:3] == [(), ("a",), ("b",)]
        assert len(got) == 7
