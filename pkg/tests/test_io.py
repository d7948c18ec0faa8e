"""File format: strict parsing, canonical emission, round-trip stability."""

import json

import pytest

from conftest import CORPUS_DIR, INVALID_NAMES, WF_CORPUS, corpus_path, load_corpus
from qmf.machine_io import ParseError, emit_machine, load_machine, parse_machine
from qmf.machines import CounterMachine, StackMachine, TapeMachine
from qmf.transpile import counters_to_stacks

MINIMAL = {
    "model": "qmcm",
    "states": ["q0", "qa", "qr"],
    "initial": "q0",
    "accept": "qa",
    "reject": "qr",
    "input_alphabet": ["a"],
    "counters": 1,
    "allowed_deltas": [0],
    "rules": [],
}


def doc(**overrides):
    d = json.loads(json.dumps(MINIMAL))
    d.update(overrides)
    return d


def parse(d):
    return parse_machine(json.dumps(d))


class TestParsing:
    def test_minimal_counter_machine(self):
        m = parse(MINIMAL)
        assert isinstance(m, CounterMachine)
        assert m.states == ("q0", "qa", "qr")
        assert m.allowed_deltas == (0,)

    def test_unknown_top_level_field(self):
        with pytest.raises(ParseError, match="unknown fields"):
            parse(doc(extra=1))

    def test_unknown_rule_field(self):
        rule = {"from": "q0", "symbol": "a", "pre": [0], "post": [0],
                "to": "q0", "amp": 1, "note": "hi"}
        with pytest.raises(ParseError, match=r"rules\[0\]"):
            parse(doc(rules=[rule]))

    def test_missing_field_names_it(self):
        d = doc()
        del d["counters"]
        with pytest.raises(ParseError, match="counters"):
            parse(d)

    def test_bad_model_tag(self):
        with pytest.raises(ParseError, match="model"):
            parse(doc(model="pushdown"))

    def test_error_path_reaches_into_rule(self):
        rule = {"from": "q0", "symbol": "a", "pre": [{"var": "n", "min": 0}],
                "post": ["n*2"], "to": "q0", "amp": 1}
        with pytest.raises(ParseError, match=r"post\[0\]"):
            parse(doc(rules=[rule]))

    def test_bool_is_not_an_integer(self):
        rule = {"from": "q0", "symbol": "a", "pre": [True], "post": [0],
                "to": "q0", "amp": 1}
        with pytest.raises(ParseError):
            parse(doc(rules=[rule]))

    def test_amp_forms(self):
        rules = [
            {"from": "q0", "symbol": "a", "pre": [0], "post": [0], "to": "q0",
             "amp": {"re": "0", "im": "-1"}},
            {"from": "q0", "symbol": "a", "pre": [1], "post": [1], "to": "q0",
             "amp": "r2"},
        ]
        m = parse(doc(rules=rules, allowed_deltas=[0]))
        assert m.rules[0].amp == -1j
        assert m.rules[1].amp.real == pytest.approx(2 ** -0.5)

    def test_garbage_amp_rejected(self):
        rule = {"from": "q0", "symbol": "a", "pre": [0], "post": [0],
                "to": "q0", "amp": "lots"}
        with pytest.raises(ParseError, match="amp"):
            parse(doc(rules=[rule]))

    def test_not_json(self):
        with pytest.raises(ParseError):
            parse_machine("{nope")

    def test_top_level_must_be_object(self):
        with pytest.raises(ParseError):
            parse_machine("[1, 2]")

    def test_stack_machine_fields(self):
        m = load_corpus("push_stack")
        assert isinstance(m, StackMachine)
        assert m.bottom == "Z0"
        assert m.stack_alphabet == ("Z0", "X")

    def test_tape_machine_fields(self):
        m = load_corpus("toy_branch_qtm")
        assert isinstance(m, TapeMachine)
        assert m.blank == "B1"
        assert m.rules[0].move == "R"


class TestRoundTrip:
    @pytest.mark.parametrize("name", WF_CORPUS + INVALID_NAMES)
    def test_corpus_files_are_canonical(self, name):
        text = corpus_path(name).read_text()
        assert emit_machine(parse_machine(text)) == text

    @pytest.mark.parametrize("name", WF_CORPUS)
    def test_emit_parse_fixed_point(self, name):
        m = load_corpus(name)
        assert parse_machine(emit_machine(m)) == m

    def test_save_load(self, tmp_path):
        m = load_corpus("hadamard_walk")
        out = tmp_path / "m.json"
        from qmf.machine_io import save_machine
        save_machine(m, out)
        assert load_machine(out) == m
        assert out.read_text().endswith("\n")

    def test_transpiled_output_is_reproducible(self):
        # frozen copy of counters_to_stacks(hadamard_walk) guards against
        # accidental drift in rule ordering or formatting
        live = emit_machine(counters_to_stacks(load_corpus("hadamard_walk")))
        frozen = (CORPUS_DIR / "hadamard_walk_stacks.json").read_text()
        assert live == frozen
