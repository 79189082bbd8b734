"""Guarded step programs and deterministic choice streams.

A process's code is a flat sequence of guarded statements over the kernel
primitives: pick a pseudo-random value, communicate an item, output a value,
or wait on a predicate.  Guards are conjunctions of atoms over the process's
locals and its observation set.  Synchronous programs additionally tag every
statement with the (round, phase) in which it runs; asynchronous programs are
untagged straight-line code.

Crash positions are statement boundaries: a failure pattern naming slot k for
a process makes it halt when it is about to execute statement k, so "just
before its output" and "just after it communicated" are both expressible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Tuple, Union

from .outputsets import Value

# Information item tags (the wire vocabulary of all six algorithms).
INIT = "INIT"
OUTPUT = "OUTPUT"
PROPOSE = "PROPOSE"

# Phases of a synchronous round.
COMM = 0  # communication step
COMP = 1  # computation step

#: (round, phase) tag for synchronous statements; None in asynchronous code.
SyncTag = Optional[Tuple[int, int]]


# ---------------------------------------------------------------------------
# Expressions: a statement operand is a constant, a local, or a flipped local.


@dataclass(frozen=True)
class LocalRef:
    name: str


@dataclass(frozen=True)
class Flip:
    """One's complement of a bit-valued local."""

    name: str


Expr = Union[int, None, LocalRef, Flip]


# ---------------------------------------------------------------------------
# Guard atoms.  A guard is a tuple of atoms, all of which must hold.


@dataclass(frozen=True)
class LocalIs:
    name: str
    value: Value
    negate: bool = False


@dataclass(frozen=True)
class ObservedInit:
    negate: bool = False


@dataclass(frozen=True)
class ObservedOutput:
    value: int
    negate: bool = False


@dataclass(frozen=True)
class ObservedPropose:
    value: int
    negate: bool = False


@dataclass(frozen=True)
class HasOutput:
    """True once the process itself has output a value."""

    negate: bool = False


GuardAtom = Union[LocalIs, ObservedInit, ObservedOutput, ObservedPropose, HasOutput]
Guard = Tuple[GuardAtom, ...]


# ---------------------------------------------------------------------------
# Wait predicates (asynchronous programs only).


@dataclass(frozen=True)
class WaitInit:
    """Block until some INIT item has been observed."""


@dataclass(frozen=True)
class WaitAnyOutput:
    """Block until some OUTPUT item is observed; bind the first one's value.

    Ties within one delivery batch resolve by (sender index, payload bit).
    """

    dest: str


@dataclass(frozen=True)
class WaitDeadline:
    """Block until a logical delivery step; None means the horizon."""

    step: Optional[int] = None


WaitPredicate = Union[WaitInit, WaitAnyOutput, WaitDeadline]


# ---------------------------------------------------------------------------
# Statements.


@dataclass(frozen=True)
class Pick:
    dest: str
    candidates: Tuple[Value, ...]
    guard: Guard = ()
    at: SyncTag = None


@dataclass(frozen=True)
class SetLocal:
    dest: str
    value: Expr
    guard: Guard = ()
    at: SyncTag = None


@dataclass(frozen=True)
class Communicate:
    tag: str
    value: Expr = None
    guard: Guard = ()
    at: SyncTag = None


@dataclass(frozen=True)
class Output:
    value: Expr
    guard: Guard = ()
    at: SyncTag = None


@dataclass(frozen=True)
class Wait:
    predicate: WaitPredicate
    guard: Guard = ()
    at: SyncTag = None


Statement = Union[Pick, SetLocal, Communicate, Output, Wait]


@dataclass(frozen=True)
class Program:
    """One process's code: an ordered tuple of guarded statements."""

    statements: Tuple[Statement, ...] = ()
    initial_locals: Tuple[Tuple[str, Value], ...] = ()

    def __post_init__(self) -> None:
        tags = [s.at for s in self.statements]
        if any(t is None for t in tags) and any(t is not None for t in tags):
            raise ValueError("program mixes tagged and untagged statements")
        if tags and tags[0] is not None and sorted(tags) != tags:
            raise ValueError("synchronous statements must be (round, phase)-sorted")

    @property
    def is_sync(self) -> bool:
        return bool(self.statements) and self.statements[0].at is not None

    def __len__(self) -> int:
        return len(self.statements)

    @property
    def communicate_count(self) -> int:
        return sum(1 for s in self.statements if isinstance(s, Communicate))

    @property
    def slot_count(self) -> int:
        """Number of crash positions: before each statement plus after the last."""
        return len(self.statements) + 1


# ---------------------------------------------------------------------------
# Choice streams: the deterministic realization of pseudo_random_pick.


class ChoiceNeeded(Exception):
    """Raised by a scripted stream when an unscripted pick site is reached."""

    def __init__(self, pid: int, counter: int, candidates: Tuple[Value, ...]):
        super().__init__(f"unscripted pick at pid={pid} counter={counter}")
        self.pid = pid
        self.counter = counter
        self.candidates = candidates


class ChoiceStream:
    """Deterministic total function (pid, counter, candidates) -> value."""

    def pick(self, pid: int, counter: int, candidates: Tuple[Value, ...]) -> Value:
        raise NotImplementedError

    def describe(self) -> Dict[str, object]:
        raise NotImplementedError


_M64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _M64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _M64
    return x ^ (x >> 31)


class SeededChoices(ChoiceStream):
    """Counter-based mix of (seed, pid, counter); platform-independent."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._base = _splitmix64(self.seed & _M64)

    def pick(self, pid: int, counter: int, candidates: Tuple[Value, ...]) -> Value:
        z = _splitmix64(self._base ^ (pid * 0xA076_1D64_78BD_642F) & _M64)
        z = _splitmix64(z ^ (counter * 0xE703_7ED1_A0B4_28DB) & _M64)
        return candidates[z % len(candidates)]

    def describe(self) -> Dict[str, object]:
        return {"mode": "seed", "seed": self.seed}


class ScriptedChoices(ChoiceStream):
    """Explicit (pid, counter) -> value map; strict on unscripted sites.

    The exhaustive explorer catches ChoiceNeeded and forks one extended
    script per candidate, which enumerates every pick outcome reachable
    under the given failure and delay patterns.
    """

    def __init__(self, picks: Optional[Dict[Tuple[int, int], Value]] = None):
        self.picks = dict(picks or {})

    def pick(self, pid: int, counter: int, candidates: Tuple[Value, ...]) -> Value:
        try:
            value = self.picks[(pid, counter)]
        except KeyError:
            raise ChoiceNeeded(pid, counter, candidates) from None
        if value not in candidates:
            raise ValueError(
                f"scripted value {value!r} not among candidates at "
                f"pid={pid} counter={counter}"
            )
        return value

    def describe(self) -> Dict[str, object]:
        picks = sorted(
            [pid, ctr, val] for (pid, ctr), val in self.picks.items()
        )
        return {"mode": "script", "picks": picks}


def choices_from_descriptor(d: Dict[str, object]) -> ChoiceStream:
    if d["mode"] == "seed":
        return SeededChoices(int(d["seed"]))
    if d["mode"] == "script":
        picks = {(int(p), int(c)): v for p, c, v in d["picks"]}
        return ScriptedChoices(picks)
    raise ValueError(f"unknown choice mode: {d['mode']!r}")
