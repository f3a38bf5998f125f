"""Exhaustive exact check of the Markov property at bounded lengths."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .chains import fmt_fraction
from .model import cylinder_from_words, exact_cylinder_prob
from .trajectory import EnumerationLimitError, GlobalState, Trajectory, enumerate_trajectories, gamma


@dataclass(frozen=True)
class Violation:
    reference: Trajectory
    prefix: Trajectory
    future: Trajectory
    reference_value: Fraction
    value: Fraction

    def to_json(self) -> dict:
        return {
            "reference": [list(self.reference.w1), list(self.reference.w2)],
            "prefix": [list(self.prefix.w1), list(self.prefix.w2)],
            "future": [list(self.future.w1), list(self.future.w2)],
            "reference_value": fmt_fraction(self.reference_value),
            "value": fmt_fraction(self.value),
        }


@dataclass(frozen=True)
class ConsistencyReport:
    start: GlobalState
    max_prefix_len: int
    max_future_len: int
    n_prefixes: int
    n_groups: int
    n_comparisons: int
    violations: tuple[Violation, ...] = field(default=())

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {
            "start": list(self.start),
            "max_prefix_len": self.max_prefix_len,
            "max_future_len": self.max_future_len,
            "positive_prefixes": self.n_prefixes,
            "gamma_groups": self.n_groups,
            "comparisons": self.n_comparisons,
            "violation_count": len(self.violations),
            "violations": [v.to_json() for v in self.violations],
        }


def markov_consistency_report(
    model,
    start: GlobalState,
    max_prefix_len: int = 3,
    max_future_len: int = 3,
    budget: int = 2_000_000,
) -> ConsistencyReport:
    """Compare probabilistic futures of prefixes that reach the same global state.

    Every positive-probability prefix ``s`` (components of length at most
    ``max_prefix_len``) is compared with the first prefix of its
    ``gamma``-class in enumeration order, on every future ``t`` with
    components of length at most ``max_future_len``. Equality with the
    class representative for all members is equivalent to pairwise
    equality, so each listed violation names the representative, the
    offending prefix and the future, with both exact conditional values.
    """
    start = tuple(start)
    system = model.system
    prefixes = [
        s for s in enumerate_trajectories(system, max_prefix_len) if exact_cylinder_prob(model, start, s) > 0
    ]
    futures = enumerate_trajectories(system, max_future_len)
    groups: dict[GlobalState, list[Trajectory]] = {}
    for s in prefixes:
        groups.setdefault(gamma(start, s), []).append(s)
    work = sum(len(g) - 1 for g in groups.values()) * len(futures)
    if work > budget:
        raise EnumerationLimitError(f"{work} comparisons exceed the budget of {budget}")

    def future_law(s):
        ps = exact_cylinder_prob(model, start, s)
        return [cylinder_from_words(model, start, s.w1 + t.w1, s.w2 + t.w2) / ps for t in futures]

    violations = []
    comparisons = 0
    for members in groups.values():
        if len(members) < 2:
            continue
        ref = members[0]
        ref_law = future_law(ref)
        for s in members[1:]:
            law = future_law(s)
            comparisons += len(futures)
            for t, a, b in zip(futures, ref_law, law):
                if a != b:
                    violations.append(Violation(ref, s, t, a, b))
    return ConsistencyReport(
        start,
        max_prefix_len,
        max_future_len,
        len(prefixes),
        len(groups),
        comparisons,
        tuple(violations),
    )
