"""End-to-end runs: probabilities, norms, halting, adjoints, leaks.

Expected probabilities were derived by hand from the rule tables (Hadamard
branch amplitudes r2, counter decoherence splitting branches) before being
frozen here.
"""

import numpy as np
import pytest

from conftest import load_corpus
from qmf.amplitudes import DomainError, WindowLeakError, to_matrix
from qmf.machines import SimulationBounds, counter_window
from qmf.simulate import (
    accept_probability,
    build_adjoint_evolution,
    build_evolution,
    input_sequence,
    run_machine,
    run_qtm,
)

EXACT = 1e-12


class TestCounterRuns:
    def test_identity_machine_never_accepts(self):
        m = load_corpus("identity_counter")
        assert run_machine(m, []).probability == 0.0
        assert run_machine(m, ["a"]).probability == 0.0

    def test_route_machine_always_accepts(self):
        m = load_corpus("route_counter")
        for x in ([], ["a"], ["a", "a"]):
            assert run_machine(m, x).probability == pytest.approx(1.0, abs=EXACT)

    # interference on aa, decoherence through the counter on ab/aba
    WALK_ORACLE = [([], 1.0), (["a"], 0.5), (["a", "a"], 1.0), (["b"], 1.0),
                   (["a", "b"], 0.5), (["a", "b", "a"], 0.5)]

    @pytest.mark.parametrize("x,p", WALK_ORACLE)
    def test_hadamard_walk(self, x, p):
        m = load_corpus("hadamard_walk")
        assert run_machine(m, x).probability == pytest.approx(p, abs=EXACT)

    @pytest.mark.parametrize("x,p", WALK_ORACLE)
    def test_hadamard_shift3_same_language(self, x, p):
        # a larger step size changes the counter values, not the amplitudes
        m = load_corpus("hadamard_shift3")
        assert run_machine(m, x).probability == pytest.approx(p, abs=EXACT)

    def test_norms_stay_unit(self):
        m = load_corpus("hadamard_walk")
        r = run_machine(m, ["a", "b", "a", "b"])
        assert max(abs(n - 1.0) for n in r.norms) < EXACT

    def test_trace_length(self):
        m = load_corpus("hadamard_walk")
        r = run_machine(m, ["a", "b"], trace=True)
        assert r.steps == 4
        assert len(r.trace) == 5
        assert r.trace[-1].isclose(r.final)

    def test_unknown_input_symbol(self):
        m = load_corpus("hadamard_walk")
        with pytest.raises(DomainError):
            run_machine(m, ["z"])

    def test_leak_reports_step(self):
        m = load_corpus("hadamard_shift3")
        with pytest.raises(WindowLeakError) as exc:
            run_machine(m, ["b"] * 5, bounds=SimulationBounds(n_max=6))
        assert exc.value.step is not None

    def test_input_sequence_brackets(self):
        assert input_sequence(["a", "b"]) == ["#", "a", "b", "$"]


class TestStackRuns:
    def test_push_machine_accepts_everything(self):
        m = load_corpus("push_stack")
        for x in ([], ["a"], ["a", "a", "a"]):
            r = run_machine(m, x)
            assert r.probability == pytest.approx(1.0, abs=EXACT)

    def test_stack_grows_with_input(self):
        m = load_corpus("push_stack")
        r = run_machine(m, ["a", "a"])
        (config,) = r.final.keys()
        assert config.stacks[0] == ("X", "X", "Z0")


class TestQtmRuns:
    def test_branching_probability(self, toy_qtm):
        assert run_qtm(toy_qtm, ["a"], 1).probability == pytest.approx(0.5, abs=EXACT)
        assert run_qtm(toy_qtm, [], 1).probability == 0.0

    def test_halt_detection(self, toy_qtm):
        r = run_qtm(toy_qtm, ["a"], 3)
        assert r.halted
        assert r.halt_step == 1

    def test_not_halted_midway(self):
        m = load_corpus("move_right_qtm")
        r = run_qtm(m, ["a"], 1)
        assert r.halt_step is None
        assert not r.halted

    def test_walk_to_accept(self):
        m = load_corpus("move_right_qtm")
        r = run_qtm(m, ["a", "a"], 3)
        assert r.probability == pytest.approx(1.0, abs=EXACT)
        assert r.halt_step == 3

    def test_erase_walk(self):
        m = load_corpus("erase_walk_qtm")
        assert run_qtm(m, ["a"], 2).probability == pytest.approx(1.0, abs=EXACT)
        assert run_qtm(m, ["a", "a"], 2).probability == 0.0

    def test_final_states_freeze(self, toy_qtm):
        r = run_qtm(toy_qtm, ["a"], 5, trace=True)
        assert r.trace[1].isclose(r.trace[5])

    def test_norms_preserved(self):
        m = load_corpus("two_symbol_qtm")
        r = run_qtm(m, ["a", "b"], 4)
        assert max(abs(n - 1.0) for n in r.norms) < EXACT

    def test_negative_steps_rejected(self, toy_qtm):
        with pytest.raises(DomainError):
            run_qtm(toy_qtm, ["a"], -1)

    def test_tiny_radius_leaks(self):
        m = load_corpus("move_right_qtm")
        with pytest.raises(WindowLeakError):
            run_qtm(m, ["a", "a"], 4, bounds=SimulationBounds(radius=1))


class TestOperators:
    def test_adjoint_matrix_is_conjugate_transpose(self):
        # "b" shifts and clips at the cap, so only the clean symbols admit a
        # dense matrix over the full window
        m = load_corpus("hadamard_walk")
        bounds = SimulationBounds(n_max=6)
        basis = counter_window(m, bounds)
        for symbol in ("#", "a", "$"):
            fwd = to_matrix(build_evolution(m, symbol, bounds), basis)
            adj = to_matrix(build_adjoint_evolution(m, symbol, bounds), basis)
            assert np.allclose(adj, fwd.conj().T, atol=EXACT)

    def test_adjoint_pairing_on_shift_symbol(self):
        from qmf.amplitudes import Superposition, apply, inner_product
        from qmf.machines import CounterConfig
        m = load_corpus("hadamard_walk")
        bounds = SimulationBounds(n_max=6)
        fwd = build_evolution(m, "b", bounds)
        adj = build_adjoint_evolution(m, "b", bounds)
        rng = np.random.default_rng(3)
        configs = [CounterConfig(q, (n,)) for q in m.states for n in range(1, 5)]
        for _ in range(20):
            picks = rng.choice(len(configs), size=3, replace=False)
            s = Superposition({configs[i]: complex(*rng.normal(size=2)) for i in picks})
            u = Superposition({configs[i]: complex(*rng.normal(size=2))
                               for i in rng.choice(len(configs), size=3, replace=False)})
            lhs = inner_product(apply(fwd, s), u)
            rhs = inner_product(s, apply(adj, u))
            assert lhs == pytest.approx(rhs, abs=1e-10)

    def test_unknown_symbol_rejected(self):
        m = load_corpus("hadamard_walk")
        with pytest.raises(DomainError):
            build_evolution(m, "z", SimulationBounds(n_max=4))


class TestAcceptProbability:
    def test_mixed_state_mass(self):
        from qmf.machines import CounterConfig
        s = {CounterConfig("qa", (0,)): 0.6, CounterConfig("qr", (0,)): 0.8}
        from qmf.amplitudes import Superposition
        assert accept_probability(Superposition(s), "qa") == pytest.approx(0.36)
