"""Finite trajectories of a two-site distributed system.

A trajectory is a pair of local words (one per site) whose sequences of
shared states coincide. Everything here is an immutable value; the
operations are pure functions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Iterator, Sequence

Word = tuple[str, ...]
GlobalState = tuple[str, str]


class TrajectoryError(ValueError):
    """A pair of words violates the synchronization constraint."""


class LatticeError(ValueError):
    """A lattice operation was applied outside its precondition."""


class EnumerationLimitError(RuntimeError):
    """An explicit enumeration grew beyond the caller's budget."""


@dataclass(frozen=True)
class DistributedSystem:
    """Two finite local alphabets; the shared states are their intersection.

    Alphabet order is the declaration order and is used for every
    deterministic enumeration in the package.
    """

    s1: tuple[str, ...]
    s2: tuple[str, ...]
    allow_empty_q: bool = False
    q: tuple[str, ...] = field(init=False)

    def __post_init__(self):
        s1 = tuple(self.s1)
        s2 = tuple(self.s2)
        object.__setattr__(self, "s1", s1)
        object.__setattr__(self, "s2", s2)
        for name, alphabet in (("s1", s1), ("s2", s2)):
            if not alphabet:
                raise ValueError(f"{name} is empty")
            if len(set(alphabet)) != len(alphabet):
                raise ValueError(f"{name} has repeated states")
            if any(not isinstance(x, str) or not x for x in alphabet):
                raise ValueError(f"{name} states must be nonempty strings")
        in_s2 = set(s2)
        q = tuple(x for x in s1 if x in in_s2)
        object.__setattr__(self, "q", q)
        if not q and not self.allow_empty_q:
            raise ValueError("no shared states (pass allow_empty_q=True to permit this)")
        if len(q) == len(s1) or len(q) == len(s2):
            raise ValueError("each site needs at least one private state")

    @property
    def shared(self) -> frozenset[str]:
        return frozenset(self.q)

    def alphabet(self, site: int) -> tuple[str, ...]:
        if site == 1:
            return self.s1
        if site == 2:
            return self.s2
        raise ValueError(f"site must be 1 or 2, got {site!r}")

    def private(self, site: int) -> tuple[str, ...]:
        shared = self.shared
        return tuple(x for x in self.alphabet(site) if x not in shared)

    def x0(self) -> tuple[GlobalState, ...]:
        """Global states (x, z) such that x, z both shared implies x == z."""
        shared = self.shared
        return tuple(
            (x, z)
            for x in self.s1
            for z in self.s2
            if not (x in shared and z in shared and x != z)
        )

    def order_key(self, site: int, word: Sequence[str]) -> tuple[int, ...]:
        rank = {x: i for i, x in enumerate(self.alphabet(site))}
        return tuple(rank[x] for x in word)

    def trajectory(self, w1: Iterable[str], w2: Iterable[str]) -> Trajectory:
        return Trajectory(tuple(w1), tuple(w2), self)

    def empty(self) -> Trajectory:
        return Trajectory((), (), self)


def induced_q_sequence(word: Sequence[str], system: DistributedSystem) -> Word:
    """Shared states of ``word`` in order of appearance."""
    shared = system.shared
    return tuple(x for x in word if x in shared)


def _check_word(word: Sequence[str], system: DistributedSystem, site: int) -> None:
    alphabet = set(system.alphabet(site))
    for x in word:
        if x not in alphabet:
            raise TrajectoryError(f"state {x!r} is not in the site-{site} alphabet")


def is_trajectory(w1: Sequence[str], w2: Sequence[str], system: DistributedSystem) -> bool:
    return induced_q_sequence(w1, system) == induced_q_sequence(w2, system)


@dataclass(frozen=True)
class Length:
    """Finite two-component length ``(m, n)``; ordered componentwise."""

    m: int
    n: int

    def __le__(self, other):
        if other is INFINITY:
            return True
        if not isinstance(other, Length):
            return NotImplemented
        return self.m <= other.m and self.n <= other.n

    def __lt__(self, other):
        return self <= other and self != other

    def __ge__(self, other):
        if other is INFINITY:
            return False
        if not isinstance(other, Length):
            return NotImplemented
        return other <= self

    def __add__(self, other):
        if other is INFINITY:
            return INFINITY
        return Length(self.m + other.m, self.n + other.n)

    def as_tuple(self) -> tuple[int, int]:
        return (self.m, self.n)

    def __str__(self):
        return f"({self.m},{self.n})"


class _Infinity:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __le__(self, other):
        return other is self

    def __ge__(self, other):
        return True

    def __add__(self, other):
        return self

    __radd__ = __add__

    def __repr__(self):
        return "INFINITY"

    __str__ = __repr__


INFINITY = _Infinity()
TimeLength = Length | _Infinity


@dataclass(frozen=True)
class Trajectory:
    """Pair of local words with equal induced shared-state sequences."""

    w1: Word
    w2: Word
    system: DistributedSystem = field(compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "w1", tuple(self.w1))
        object.__setattr__(self, "w2", tuple(self.w2))
        _check_word(self.w1, self.system, 1)
        _check_word(self.w2, self.system, 2)
        q1 = induced_q_sequence(self.w1, self.system)
        q2 = induced_q_sequence(self.w2, self.system)
        if q1 != q2:
            raise TrajectoryError(
                f"shared-state sequences differ: {'.'.join(q1) or 'ε'} vs {'.'.join(q2) or 'ε'}"
            )

    @property
    def length(self) -> Length:
        return Length(len(self.w1), len(self.w2))

    @property
    def q_sequence(self) -> Word:
        return induced_q_sequence(self.w1, self.system)

    def is_empty(self) -> bool:
        return not self.w1 and not self.w2

    def is_sync_free(self) -> bool:
        return not self.q_sequence

    def is_elementary(self) -> bool:
        qs = self.q_sequence
        return (
            len(qs) == 1
            and bool(self.w1)
            and bool(self.w2)
            and self.w1[-1] == qs[0]
            and self.w2[-1] == qs[0]
        )

    def __le__(self, other: Trajectory) -> bool:
        return _is_prefix(self.w1, other.w1) and _is_prefix(self.w2, other.w2)

    def __ge__(self, other: Trajectory) -> bool:
        return other <= self

    def __mul__(self, other: Trajectory) -> Trajectory:
        return concat(self, other)

    def prefix(self, m: int, n: int) -> Trajectory:
        """The prefix of length ``(m, n)``; raises if it is not a trajectory."""
        return Trajectory(self.w1[:m], self.w2[:n], self.system)

    def __str__(self):
        return f"({_fmt(self.w1)}, {_fmt(self.w2)})"


def _fmt(word: Word) -> str:
    return "·".join(word) if word else "ε"


def _is_prefix(u: Word, v: Word) -> bool:
    return len(u) <= len(v) and v[: len(u)] == u


def gamma(alpha: GlobalState, s: Trajectory) -> GlobalState:
    """Global state reached after executing ``s`` from ``alpha``."""
    x = s.w1[-1] if s.w1 else alpha[0]
    z = s.w2[-1] if s.w2 else alpha[1]
    return (x, z)


def concat(s: Trajectory, t: Trajectory) -> Trajectory:
    return Trajectory(s.w1 + t.w1, s.w2 + t.w2, s.system)


def _common(u: Trajectory, v: Trajectory, site: int) -> tuple[Word, Word]:
    a, b = (u.w1, v.w1) if site == 1 else (u.w2, v.w2)
    short, long_ = (a, b) if len(a) <= len(b) else (b, a)
    if not _is_prefix(short, long_):
        raise LatticeError(f"site-{site} components are not prefix-comparable")
    return short, long_


def meet(u: Trajectory, v: Trajectory, witness: Trajectory | None = None) -> Trajectory:
    """Componentwise greatest lower bound of two subtrajectories."""
    if witness is not None and not (u <= witness and v <= witness):
        raise LatticeError("arguments are not subtrajectories of the witness")
    s1, _ = _common(u, v, 1)
    s2, _ = _common(u, v, 2)
    try:
        return Trajectory(s1, s2, u.system)
    except TrajectoryError as exc:
        raise LatticeError(f"meet is not a trajectory: {exc}") from None


def join(u: Trajectory, v: Trajectory, witness: Trajectory | None = None) -> Trajectory:
    """Componentwise least upper bound of two subtrajectories."""
    if witness is not None and not (u <= witness and v <= witness):
        raise LatticeError("arguments are not subtrajectories of the witness")
    _, l1 = _common(u, v, 1)
    _, l2 = _common(u, v, 2)
    try:
        return Trajectory(l1, l2, u.system)
    except TrajectoryError as exc:
        raise LatticeError(f"join is not a trajectory: {exc}") from None


def prefix_lengths(v: Trajectory) -> Iterator[tuple[int, int]]:
    """Lengths ``(m, n)`` whose prefix pair of ``v`` is a trajectory, row-major."""
    shared = v.system.shared
    # count of shared states in each prefix of each component
    c1 = [0]
    for x in v.w1:
        c1.append(c1[-1] + (x in shared))
    c2 = [0]
    for x in v.w2:
        c2.append(c2[-1] + (x in shared))
    for m in range(len(v.w1) + 1):
        for n in range(len(v.w2) + 1):
            # equal counts of shared prefixes suffice: both are prefixes of one sequence
            if c1[m] == c2[n]:
                yield m, n


def subtrajectory_lattice(v: Trajectory, limit: int = 100_000) -> list[Trajectory]:
    """All subtrajectories of a finite trajectory, in row-major length order."""
    out = []
    for m, n in prefix_lengths(v):
        if len(out) >= limit:
            raise EnumerationLimitError(f"more than {limit} subtrajectories")
        out.append(Trajectory(v.w1[:m], v.w2[:n], v.system))
    return out


@dataclass(frozen=True)
class Decomposition:
    elementary: tuple[Trajectory, ...]
    tail: Trajectory

    @property
    def targets(self) -> Word:
        return tuple(e.w1[-1] for e in self.elementary)

    def recompose(self) -> Trajectory:
        out = self.tail.system.empty()
        for e in self.elementary:
            out = concat(out, e)
        return concat(out, self.tail)


def sync_positions(s: Trajectory) -> list[tuple[int, int]]:
    """Index pairs of aligned shared-state occurrences (the synchronizations)."""
    shared = s.system.shared
    p1 = [i for i, x in enumerate(s.w1) if x in shared]
    p2 = [i for i, x in enumerate(s.w2) if x in shared]
    return list(zip(p1, p2))


def decompose(s: Trajectory) -> Decomposition:
    """Unique split into elementary trajectories followed by a sync-free tail."""
    parts = []
    a = b = 0
    for i, j in sync_positions(s):
        parts.append(Trajectory(s.w1[a : i + 1], s.w2[b : j + 1], s.system))
        a, b = i + 1, j + 1
    return Decomposition(tuple(parts), Trajectory(s.w1[a:], s.w2[b:], s.system))


def words(alphabet: Sequence[str], max_len: int) -> Iterator[Word]:
    """All words of length ≤ ``max_len``, shortest first then lexicographic."""
    for k in range(max_len + 1):
        yield from product(alphabet, repeat=k)


def enumerate_trajectories(system: DistributedSystem, max_len: int) -> list[Trajectory]:
    """Every trajectory with both components of length ≤ ``max_len``.

    Ordered by total length, then site-1 word, then site-2 word (alphabet
    declaration order), so downstream reports are deterministic.
    """
    by_q: dict[Word, list[Word]] = {}
    for w2 in words(system.s2, max_len):
        by_q.setdefault(induced_q_sequence(w2, system), []).append(w2)
    out = []
    for w1 in words(system.s1, max_len):
        for w2 in by_q.get(induced_q_sequence(w1, system), ()):
            out.append(Trajectory(w1, w2, system))
    out.sort(
        key=lambda t: (
            len(t.w1) + len(t.w2),
            system.order_key(1, t.w1),
            system.order_key(2, t.w2),
        )
    )
    return out
