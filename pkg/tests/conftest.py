"""Shared corpus plumbing for the test suite."""

from pathlib import Path

import pytest

from qmf import load_machine

CORPUS_DIR = Path(__file__).parent / "corpus"

# Machines whose per-symbol operators should pass the window judgment.
WF_GOOD = [
    "identity_counter",
    "route_counter",
    "hadamard_walk",
    "hadamard_shift3",
    "mixed_shift23",
    "identity_stack",
    "push_stack",
    "hadamard_walk_stacks",
]

# Deliberately ill-formed machines; parse and validate but fail the judgment.
WF_BROKEN = [
    "broken_two_targets",
    "broken_shared_target",
    "broken_amp08",
    "broken_stack_shared",
]

WF_CORPUS = WF_GOOD + WF_BROKEN

QTM_NAMES = ["toy_branch_qtm", "move_right_qtm", "erase_walk_qtm", "two_symbol_qtm"]

# Files that must be rejected before any judgment happens.
INVALID_NAMES = ["pop_bottom_stack", "bad_unbounded_var"]


def corpus_path(name: str) -> Path:
    return CORPUS_DIR / f"{name}.json"


def load_corpus(name: str):
    return load_machine(corpus_path(name))


@pytest.fixture(scope="session")
def toy_qtm():
    return load_corpus("toy_branch_qtm")
