"""Random times on observed prefixes.

A time maps an :class:`~m2cp.simulation.OmegaPrefix` to the prefix of its
body at that time, or to :data:`NOT_WITHIN_HORIZON` when the value is not
determined by the observed data.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Sequence

from .simulation import OmegaPrefix, RNGStream
from .trajectory import (
    DistributedSystem,
    GlobalState,
    Length,
    Trajectory,
    gamma,
    join,
    meet,
    prefix_lengths,
)


class UndefinedShiftError(ValueError):
    """Shift by a time that is not reached within the observed prefix."""


@dataclass(frozen=True)
class SquareSet:
    """``X0 ∩ (s1sub × s2sub)``; square by construction."""

    s1sub: frozenset[str]
    s2sub: frozenset[str]
    system: DistributedSystem

    def __post_init__(self):
        object.__setattr__(self, "s1sub", frozenset(self.s1sub))
        object.__setattr__(self, "s2sub", frozenset(self.s2sub))

    def __contains__(self, state) -> bool:
        x, z = state
        if x not in self.s1sub or z not in self.s2sub:
            return False
        shared = self.system.shared
        return not (x in shared and z in shared and x != z)

    @property
    def members(self) -> tuple[GlobalState, ...]:
        return tuple(a for a in self.system.x0() if a in self)

    @classmethod
    def everything(cls, system: DistributedSystem) -> SquareSet:
        return cls(frozenset(system.s1), frozenset(system.s2), system)

    @classmethod
    def diagonal(cls, system: DistributedSystem) -> SquareSet:
        return cls(frozenset(system.q), frozenset(system.q), system)


@dataclass(frozen=True)
class Reached:
    prefix: Trajectory
    length: Length


class _NotWithinHorizon:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "NOT_WITHIN_HORIZON"


NOT_WITHIN_HORIZON = _NotWithinHorizon()
StoppingTimeValue = Reached | _NotWithinHorizon
TimeFn = Callable[[OmegaPrefix], StoppingTimeValue]


def _reached(body: Trajectory, m: int, n: int) -> Reached:
    return Reached(Trajectory(body.w1[:m], body.w2[:n], body.system), Length(m, n))


def candidate_lengths(omega: OmegaPrefix, accept) -> list[tuple[int, int]]:
    """Every length ``(m, n) ≥ (1, 1)`` of a subtrajectory whose end state is accepted."""
    w1, w2 = omega.body.w1, omega.body.w2
    return [(m, n) for m, n in prefix_lengths(omega.body) if m and n and accept((w1[m - 1], w2[n - 1]))]


def _by_sync_count(word, shared) -> list[list[int]]:
    # groups[k] lists the lengths m >= 1 whose prefix holds k shared states
    groups: list[list[int]] = [[]]
    for m, x in enumerate(word, 1):
        if x in shared:
            groups.append([])
        groups[-1].append(m)
    return groups


def _least(omega: OmegaPrefix, accept) -> StoppingTimeValue:
    # Prefix lengths with k synchronizations form an interval on each site
    # and these intervals increase with k, so the least candidate lives in
    # the smallest k that has any candidate at all.
    shared = omega.body.system.shared
    w1, w2 = omega.body.w1, omega.body.w2
    for ms, ns in zip(_by_sync_count(w1, shared), _by_sync_count(w2, shared)):
        cands = [(m, n) for m in ms for n in ns if accept((w1[m - 1], w2[n - 1]))]
        if cands:
            m = min(c[0] for c in cands)
            n = min(c[1] for c in cands)
            # a square target set makes the candidates a sublattice
            if (m, n) not in cands:
                raise AssertionError(f"candidate set has no least element ({m},{n})")
            return _reached(omega.body, m, n)
    return NOT_WITHIN_HORIZON


def first_return(omega: OmegaPrefix, alpha: GlobalState) -> StoppingTimeValue:
    """Least subtrajectory of length at least ``(1,1)`` ending at ``alpha``.

    The observed value is final: every later candidate meets an observed
    one inside the observed prefix.
    """
    alpha = tuple(alpha)
    return _least(omega, alpha.__eq__)


def first_return_square(omega: OmegaPrefix, a: SquareSet) -> StoppingTimeValue:
    """First return to a square set, cross-checked against the meet of single returns."""
    value = _least(omega, a.__contains__)
    singles = [r for r in (first_return(omega, alpha) for alpha in a.members) if isinstance(r, Reached)]
    if isinstance(value, Reached):
        low = singles[0].prefix
        for r in singles[1:]:
            low = meet(low, r.prefix)
        if low != value.prefix:
            raise AssertionError("square-set return differs from the meet of single returns")
    elif singles:
        raise AssertionError("single return reached but square-set return is not")
    return value


def shift(omega: OmegaPrefix, t: StoppingTimeValue) -> OmegaPrefix:
    """Remainder of ``omega`` after the prefix ``t``; started at the reached state."""
    if not isinstance(t, Reached):
        raise UndefinedShiftError("shift is undefined for a time beyond the observed horizon")
    v = t.prefix
    if not v <= omega.body:
        raise UndefinedShiftError("time prefix is not a subtrajectory of the observed body")
    body = Trajectory(omega.body.w1[len(v.w1) :], omega.body.w2[len(v.w2) :], omega.body.system)
    return OmegaPrefix(gamma(omega.start, v), body, len(body.q_sequence), omega.truncated)


def as_time(spec) -> TimeFn:
    """Time function of a global state, a square set, or a callable."""
    if isinstance(spec, SquareSet):
        return lambda omega: first_return_square(omega, spec)
    if callable(spec):
        return spec
    alpha = tuple(spec)
    return lambda omega: first_return(omega, alpha)


def iterated_returns(omega: OmegaPrefix, spec, n_max: int) -> list[Reached]:
    """Successive returns ``T^1, T^2, ...`` with cumulative prefixes.

    Stops at ``n_max`` values or at the first return beyond the horizon.
    """
    fn = as_time(spec)
    out: list[Reached] = []
    cur = omega
    m = n = 0
    while len(out) < n_max:
        r = fn(cur)
        if not isinstance(r, Reached):
            break
        m += r.length.m
        n += r.length.n
        out.append(_reached(omega.body, m, n))
        cur = shift(cur, r)
    return out


def supremum(*fns: TimeFn) -> TimeFn:
    def time(omega):
        values = [f(omega) for f in fns]
        if any(not isinstance(v, Reached) for v in values):
            return NOT_WITHIN_HORIZON
        top = values[0].prefix
        for v in values[1:]:
            top = join(top, v.prefix)
        return Reached(top, top.length)

    return time


def infimum(*fns: TimeFn) -> TimeFn:
    """Componentwise meet; a time beyond the horizon acts as the whole trajectory."""

    def time(omega):
        values = [v for v in (f(omega) for f in fns) if isinstance(v, Reached)]
        if not values:
            return NOT_WITHIN_HORIZON
        low = values[0].prefix
        for v in values[1:]:
            low = meet(low, v.prefix)
        return Reached(low, low.length)

    return time


def last_instant_before_first_sync(omega: OmegaPrefix) -> StoppingTimeValue:
    """Prefix preceding the first synchronization: a random time, not a stopping time."""
    shared = omega.body.system.shared
    w1, w2 = omega.body.w1, omega.body.w2
    i = next((k for k, x in enumerate(w1) if x in shared), None)
    j = next((k for k, x in enumerate(w2) if x in shared), None)
    if i is None or j is None:
        return NOT_WITHIN_HORIZON
    return _reached(omega.body, i, j)


@dataclass(frozen=True)
class StoppingViolation:
    omega: OmegaPrefix
    extension: OmegaPrefix
    value: StoppingTimeValue
    extension_value: StoppingTimeValue


def check_stopping_property(
    time_fn: TimeFn, pairs: Iterable[tuple[OmegaPrefix, OmegaPrefix]]
) -> list[StoppingViolation]:
    """Pairs ``(ω, ω')`` with ``ω' ≥ ω_T`` on which the values of ``T`` differ.

    Pairs where ``T(ω)`` is not reached, or where ``ω'`` does not extend
    ``ω_T``, carry no information and are skipped.
    """
    out = []
    for omega, ext in pairs:
        v = time_fn(omega)
        if not isinstance(v, Reached) or not v.prefix <= ext.body:
            continue
        w = time_fn(ext)
        if not (isinstance(w, Reached) and w.prefix == v.prefix):
            out.append(StoppingViolation(omega, ext, v, w))
    return out


def random_trajectory(
    system: DistributedSystem, rng: RNGStream, syncs: int = 3, max_private: int = 3
) -> Trajectory:
    """Uniformly generated trajectory with ``syncs`` synchronizations and a private tail."""

    def pick(seq):
        return seq[min(int(rng.uniform() * len(seq)), len(seq) - 1)]

    def private_run(site):
        alphabet = system.private(site)
        return [pick(alphabet) for _ in range(pick(range(max_private + 1)))]

    w1: list[str] = []
    w2: list[str] = []
    for _ in range(syncs):
        y = pick(system.q)
        w1 += private_run(1) + [y]
        w2 += private_run(2) + [y]
    w1 += private_run(1)
    w2 += private_run(2)
    return Trajectory(tuple(w1), tuple(w2), system)


def extension_pairs(
    omegas: Sequence[OmegaPrefix],
    time_fn: TimeFn,
    seed: int = 0,
    per_omega: int = 1,
    syncs: int = 3,
) -> Iterator[tuple[OmegaPrefix, OmegaPrefix]]:
    """Pairs ``(ω, ω_T·t)`` with ``t`` a random continuation, one stream per ``ω``."""
    for i, omega in enumerate(omegas):
        v = time_fn(omega)
        if not isinstance(v, Reached):
            continue
        rng = RNGStream(seed, i)
        for _ in range(per_omega):
            t = random_trajectory(omega.body.system, rng, syncs)
            body = Trajectory(v.prefix.w1 + t.w1, v.prefix.w2 + t.w2, omega.body.system)
            yield omega, OmegaPrefix(omega.start, body, len(body.q_sequence))
