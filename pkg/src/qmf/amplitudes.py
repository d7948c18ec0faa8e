"""Complex amplitudes, sparse superpositions, and sparse evolution operators.

Configurations of a machine form an orthonormal basis of a sequence space;
superpositions are finitely supported vectors over that basis and evolution
operators are sparse column maps.  A dense-matrix view is provided as an
independent cross-check for the rule-level unitarity tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Iterator, Mapping, Sequence

import numpy as np

__all__ = [
    "RSQRT2",
    "PRUNE_EPS",
    "DEFAULT_TOL",
    "DomainError",
    "WindowLeakError",
    "parse_scalar",
    "format_scalar",
    "parse_amplitude",
    "format_amplitude",
    "Superposition",
    "SparseOperator",
    "inner_product",
    "apply",
    "to_matrix",
    "check_unitary",
    "UnitaryReport",
]

RSQRT2 = 2.0 ** -0.5
# Entries with squared-modulus noise below this are numerically zero.
PRUNE_EPS = 1e-14
DEFAULT_TOL = 1e-9


class DomainError(ValueError):
    """Arguments outside an operation's contract (mismatched families, bad ranges)."""


class WindowLeakError(RuntimeError):
    """A computation stepped outside the finite truncation window."""

    def __init__(self, message: str, config: Hashable = None, step: int | None = None):
        super().__init__(message)
        self.config = config
        self.step = step


def parse_scalar(text: str) -> float:
    """Parse one real component: a decimal string or the token r2 for 1/sqrt(2)."""
    token = text.strip().replace("−", "-")
    if token == "r2":
        return RSQRT2
    if token == "-r2":
        return -RSQRT2
    try:
        value = float(token)
    except ValueError as exc:
        raise DomainError(f"not a real amplitude component: {text!r}") from exc
    if not math.isfinite(value):
        raise DomainError(f"amplitude component must be finite, got {text!r}")
    return value


def format_scalar(value: float) -> str:
    if value == RSQRT2:
        return "r2"
    if value == -RSQRT2:
        return "-r2"
    return repr(float(value))


def parse_amplitude(obj) -> complex:
    """Parse a file-level amplitude: {"re": ..., "im": ...}, a bare string, or a number."""
    if isinstance(obj, dict):
        unknown = set(obj) - {"re", "im"}
        if unknown:
            raise DomainError(f"unknown amplitude fields: {sorted(unknown)}")
        re = parse_scalar(str(obj.get("re", "0")))
        im = parse_scalar(str(obj.get("im", "0")))
        return complex(re, im)
    if isinstance(obj, str):
        return complex(parse_scalar(obj), 0.0)
    if isinstance(obj, (int, float)):
        if not math.isfinite(obj):
            raise DomainError("amplitude must be finite")
        return complex(float(obj), 0.0)
    raise DomainError(f"cannot parse amplitude from {type(obj).__name__}")


def format_amplitude(z: complex) -> dict:
    """Canonical file form of an amplitude; parse(format(z)) == z exactly."""
    return {"re": format_scalar(z.real), "im": format_scalar(z.imag)}


class Superposition:
    """Finitely supported vector over configuration basis states.

    Entries with modulus below sqrt(PRUNE_EPS)-ish noise are dropped on
    construction so that repeated arithmetic cannot accumulate dead keys.
    """

    __slots__ = ("entries",)

    def __init__(self, entries: Mapping[Hashable, complex] | Iterable[tuple[Hashable, complex]] = ()):
        items = entries.items() if isinstance(entries, Mapping) else entries
        kept: dict[Hashable, complex] = {}
        for key, amp in items:
            z = complex(amp)
            if abs(z) >= PRUNE_EPS:
                kept[key] = z
        self.entries = kept

    @classmethod
    def basis(cls, key: Hashable) -> "Superposition":
        return cls({key: 1.0 + 0.0j})

    def get(self, key: Hashable) -> complex:
        return self.entries.get(key, 0.0 + 0.0j)

    def keys(self):
        return self.entries.keys()

    def items(self):
        return self.entries.items()

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[Hashable]:
        return iter(self.entries)

    def norm2(self) -> float:
        return sum((a.real * a.real + a.imag * a.imag) for a in self.entries.values())

    def scaled(self, factor: complex) -> "Superposition":
        return Superposition({k: factor * a for k, a in self.entries.items()})

    def add(self, other: "Superposition") -> "Superposition":
        merged = dict(self.entries)
        for k, a in other.entries.items():
            merged[k] = merged.get(k, 0.0) + a
        return Superposition(merged)

    def isclose(self, other: "Superposition", tol: float = 1e-12) -> bool:
        keys = set(self.entries) | set(other.entries)
        return all(abs(self.get(k) - other.get(k)) <= tol for k in keys)

    def __repr__(self) -> str:
        parts = ", ".join(f"{k}: {a:.6g}" for k, a in sorted(self.entries.items(), key=lambda kv: repr(kv[0])))
        return f"Superposition({{{parts}}})"


def _check_same_family(keys_a: Iterable[Hashable], keys_b: Iterable[Hashable]) -> None:
    try:
        ka = next(iter(keys_a))
        kb = next(iter(keys_b))
    except StopIteration:
        return
    if type(ka) is not type(kb):
        raise DomainError(
            f"mismatched configuration families: {type(ka).__name__} vs {type(kb).__name__}"
        )


def inner_product(a: Superposition, b: Superposition) -> complex:
    """Hermitian inner product <a|b>, conjugating the first argument."""
    _check_same_family(a.keys(), b.keys())
    if len(a) > len(b):
        return inner_product(b, a).conjugate()
    total = 0.0 + 0.0j
    for k, amp in a.items():
        other = b.get(k)
        if other:
            total += amp.conjugate() * other
    return total


@dataclass(frozen=True)
class SparseOperator:
    """Column map of a per-symbol evolution operator over the window.

    columns maps each explicitly-handled source configuration to its list of
    (target, amplitude) pairs.  Sources absent from columns are treated as
    identity when identity_default is set, otherwise they are outside the
    operator's domain.  Sources in leaky lost at least one rule instance to
    window truncation; applying the operator to them is a window leak.
    """

    columns: Mapping[Hashable, tuple[tuple[Hashable, complex], ...]]
    identity_default: bool = False
    leaky: frozenset = field(default_factory=frozenset)

    def domain(self) -> Iterable[Hashable]:
        return self.columns.keys()


def apply(op: SparseOperator, s: Superposition) -> Superposition:
    """Apply a sparse operator to a superposition; prunes numerically dead entries."""
    out: dict[Hashable, complex] = {}
    for key, amp in s.items():
        if key in op.leaky:
            raise WindowLeakError(f"window leak: rules from {key} were truncated", config=key)
        col = op.columns.get(key)
        if col is None:
            if not op.identity_default:
                raise WindowLeakError(f"window leak: {key} outside operator domain", config=key)
            out[key] = out.get(key, 0.0) + amp
            continue
        for target, weight in col:
            out[target] = out.get(target, 0.0) + amp * weight
    return Superposition(out)


def to_matrix(op: SparseOperator, basis: Sequence[Hashable]) -> np.ndarray:
    """Dense matrix of op over an ordered basis; M[j, i] is the basis[i] -> basis[j] amplitude."""
    index = {key: i for i, key in enumerate(basis)}
    if len(index) != len(basis):
        raise DomainError("basis contains duplicate configurations")
    n = len(basis)
    m = np.zeros((n, n), dtype=np.complex128)
    for i, key in enumerate(basis):
        if key in op.leaky:
            raise WindowLeakError(f"window leak: rules from {key} were truncated", config=key)
        col = op.columns.get(key)
        if col is None:
            if op.identity_default:
                m[i, i] = 1.0
            continue
        for target, weight in col:
            j = index.get(target)
            if j is None:
                raise WindowLeakError(f"window leak: target {target} outside the basis", config=target)
            m[j, i] += weight
    return m


@dataclass(frozen=True)
class UnitaryReport:
    passed: bool
    deviation: float
    index: tuple[int, int]
    side: str

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "deviation": self.deviation,
            "index": list(self.index),
            "side": self.side,
        }


def check_unitary(m: np.ndarray, tol: float = DEFAULT_TOL) -> UnitaryReport:
    """Check both M*M and MM* against the identity; reports the worst entry."""
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {m.shape}")
    eye = np.eye(m.shape[0], dtype=np.complex128)
    worst = 0.0
    worst_index = (0, 0)
    worst_side = "M*M"
    for side, product in (("M*M", m.conj().T @ m), ("MM*", m @ m.conj().T)):
        dev = np.abs(product - eye)
        j, i = np.unravel_index(int(np.argmax(dev)), dev.shape)
        if dev[j, i] >= worst:
            worst = float(dev[j, i])
            worst_index = (int(j), int(i))
            worst_side = side
    return UnitaryReport(passed=worst <= tol, deviation=worst, index=worst_index, side=worst_side)
