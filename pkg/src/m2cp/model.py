"""Finite parameterization of a closed M2CP with the local independence property.

A model is a synchronization matrix on the set ``q0`` of synchronization
states plus, for every target ``y`` in ``q0`` and every site, a transition
matrix driving that site until it reaches ``y``. Cylinder probabilities are
computed exactly from these data.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

from .chains import (
    ONE,
    ZERO,
    StochasticMatrix,
    conditioned_chain,
    derive_adapted_matrix,
    fmt_fraction,
    hitting_law,
    reachable_in,
    sync_chain_matrix,
    to_fraction,
)
from .trajectory import DistributedSystem, GlobalState, Trajectory

# Families accepted by :func:`sync_product`.
CONDITIONED = "conditioned"
RENORMALIZED = "renormalized"


class ModelError(ValueError):
    pass


class ClosureWarning(UserWarning):
    """States reachable from ``x0`` were missing from it and have been added."""


@dataclass(frozen=True)
class TargetChain:
    """Transition law of one site while it travels towards target ``target``.

    ``matrix`` lives on ``{target}`` plus the private states of the site.
    ``departures`` gives the first-step law out of a shared state other
    than ``target``; when a shared state has no entry, the ``target`` row
    of ``matrix`` is used (the departure row of a synchronization).
    """

    site: int
    target: str
    matrix: StochasticMatrix
    departures: Mapping[str, Mapping[str, Fraction]] = field(default_factory=dict)

    def step_law(self, u: str) -> Mapping[str, Fraction]:
        if u in self.matrix:
            return self.matrix.row(u)
        if u in self.departures:
            return self.departures[u]
        return self.matrix.row(self.target)


@dataclass(frozen=True)
class AdaptedFamily:
    q0: tuple[str, ...]
    chains: Mapping[tuple[int, str], TargetChain]

    def __getitem__(self, key: tuple[int, str]) -> TargetChain:
        return self.chains[key]

    def validate(self, system: DistributedSystem) -> None:
        shared = system.shared
        for y in self.q0:
            if y not in shared:
                raise ModelError(f"{y!r} is not a shared state")
            for site in (1, 2):
                chain = self.chains.get((site, y))
                if chain is None:
                    raise ModelError(f"family has no site-{site} matrix for target {y!r}")
                expected = {y, *system.private(site)}
                if set(chain.matrix.index) != expected:
                    raise ModelError(
                        f"site-{site} matrix for {y!r} must be indexed by {sorted(expected)}, "
                        f"got {list(chain.matrix.index)}"
                    )
                unreachable = expected - reachable_in(chain.matrix, y)
                if unreachable:
                    raise ModelError(
                        f"site-{site} matrix for {y!r}: target not reachable from {sorted(unreachable)}"
                    )
                for c, row in chain.departures.items():
                    if c not in shared or c == y:
                        raise ModelError(f"departure row for {c!r} on target {y!r} is not a departure")
                    if set(row) - expected:
                        raise ModelError(f"departure row for {c!r} on target {y!r} leaves the index")
                    if any(p < 0 for p in row.values()) or sum(row.values(), ZERO) != 1:
                        raise ModelError(f"departure row for {c!r} on target {y!r} is not a distribution")
        extra = {y for _, y in self.chains} - set(self.q0)
        if extra:
            raise ModelError(f"family has matrices for states outside q0: {sorted(extra)}")


@dataclass(frozen=True, eq=False)
class M2CPModel:
    system: DistributedSystem
    x0: tuple[GlobalState, ...]
    sync_matrix: StochasticMatrix
    family: AdaptedFamily
    initial_sync_laws: Mapping[GlobalState, Mapping[str, Fraction]] = field(default_factory=dict)
    metadata: Mapping = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "_cache", {})
        object.__setattr__(self, "_steps", {})
        object.__setattr__(self, "_sync_rows", {y: self.sync_matrix.row(y) for y in self.sync_matrix.index})

    @property
    def q0(self) -> tuple[str, ...]:
        return self.sync_matrix.index

    def is_admissible(self, alpha: GlobalState) -> bool:
        x, z = alpha
        return (x == z and x in self.sync_matrix) or tuple(alpha) in self.initial_sync_laws

    def sync_law(self, alpha: GlobalState) -> Mapping[str, Fraction]:
        """Law of the next synchronization state seen from ``alpha``."""
        alpha = tuple(alpha)
        x, z = alpha
        if x == z and x in self._sync_rows:
            return self._sync_rows[x]
        try:
            return self.initial_sync_laws[alpha]
        except KeyError:
            raise ModelError(f"no initial synchronization law for private start {alpha}") from None

    def step_law(self, site: int, target: str, u: str) -> Mapping[str, Fraction]:
        return self.family[site, target].step_law(u)

    def _step_table(self, site: int, target: str, u: str) -> Mapping[str, Fraction]:
        key = (site, target, u)
        table = self._steps.get(key)
        if table is None:
            table = {v: p for v, p in self.step_law(site, target, u).items() if p}
            self._steps[key] = table
        return table

    def path_weight(self, site: int, target: str, start: str, word) -> Fraction:
        """Product of transition probabilities along ``word`` under the target chain."""
        w = ONE
        u = start
        for v in word:
            p = self._step_table(site, target, u).get(v)
            if p is None:
                return ZERO
            w *= p
            u = v
        return w

    def kind(self) -> str:
        return "closed"


def exact_cylinder_prob(model: M2CPModel, start: GlobalState, s: Trajectory) -> Fraction:
    """Probability of the elementary cylinder of ``s`` under ``P_start``.

    The process is observed strictly after ``start``: no factor is spent
    on occupying ``start`` itself.
    """
    if isinstance(model, IndependentChains):
        return independent_cylinder_prob(model, start, s)
    return cylinder_from_words(model, tuple(start), s.w1, s.w2)


def cylinder_from_words(model: M2CPModel, start: GlobalState, w1: tuple, w2: tuple) -> Fraction:
    """:func:`exact_cylinder_prob` on raw words already known to form a trajectory."""
    key = (start, w1, w2)
    cache = model._cache
    hit = cache.get(key)
    if hit is not None:
        return hit
    shared = model.system.shared
    law = model.sync_law(start)
    x, z = start
    cuts1 = [i for i, v in enumerate(w1) if v in shared]
    cuts2 = [j for j, v in enumerate(w2) if v in shared]
    prob = ONE
    a = b = 0
    for i, j in zip(cuts1, cuts2):
        y = w1[i]
        p = law.get(y, ZERO)
        if p:
            p *= model.path_weight(1, y, x, w1[a : i + 1])
        if p:
            p *= model.path_weight(2, y, z, w2[b : j + 1])
        prob *= p
        if prob == 0:
            break
        x = z = y
        law = model._sync_rows[y]
        a, b = i + 1, j + 1
    else:
        r1, r2 = w1[a:], w2[b:]
        if r1 or r2:
            tail = ZERO
            for y, p in law.items():
                if p:
                    tail += p * model.path_weight(1, y, x, r1) * model.path_weight(2, y, z, r2)
            prob *= tail
    cache[key] = prob
    return prob


def build_from_adapted(
    system: DistributedSystem,
    x0,
    sync_matrix: StochasticMatrix,
    family: AdaptedFamily,
    initial_sync_laws: Mapping | None = None,
    metadata: Mapping | None = None,
) -> M2CPModel:
    """Validate a model given by an adapted family and close ``x0`` under reachability.

    ``x0`` may be the string ``"auto"``: the closure of the diagonal states
    ``(y, y)`` for ``y`` in the index of ``sync_matrix``.
    """
    allowed = set(system.x0())
    if isinstance(x0, str):
        if x0 != "auto":
            raise ModelError(f"x0 must be a list of states or 'auto', got {x0!r}")
        states = [(y, y) for y in sync_matrix.index]
    else:
        states = [tuple(a) for a in x0]
    for a in states:
        if a not in allowed:
            raise ModelError(f"{a} is not an admissible global state (shared components must agree)")
    q0 = tuple(y for y in system.q if (y, y) in states)
    if not q0:
        raise ModelError("q0 is empty: x0 contains no diagonal synchronization state")
    if set(sync_matrix.index) != set(q0):
        raise ModelError(
            f"sync matrix index {list(sync_matrix.index)} does not match q0 {list(q0)}"
        )
    if set(family.q0) != set(q0):
        raise ModelError(f"family targets {list(family.q0)} do not match q0 {list(q0)}")
    family.validate(system)
    laws = {}
    for alpha, law in (initial_sync_laws or {}).items():
        alpha = tuple(alpha)
        law = {y: to_fraction(p) for y, p in law.items()}
        if set(law) - set(q0):
            raise ModelError(f"initial law at {alpha} charges states outside q0")
        if any(p < 0 for p in law.values()) or sum(law.values(), ZERO) != 1:
            raise ModelError(f"initial law at {alpha} is not a distribution")
        if alpha not in allowed:
            raise ModelError(f"initial law given for inadmissible state {alpha}")
        laws[alpha] = law
    model = M2CPModel(system, tuple(states), sync_matrix, family, laws, dict(metadata or {}))

    from .reachability import ReachabilityGraph

    graph = ReachabilityGraph(model)
    closure = set(states)
    for a in states:
        if model.is_admissible(a):
            closure |= graph.reachable_states(a)
    missing = [a for a in system.x0() if a in closure and a not in states]
    if missing:
        warnings.warn(f"added states reachable from x0: {missing}", ClosureWarning, stacklevel=2)
        order = {a: i for i, a in enumerate(system.x0())}
        states = sorted(closure, key=order.__getitem__)
        model = M2CPModel(system, tuple(states), sync_matrix, family, laws, dict(metadata or {}))
    return model


def sync_product(m1: StochasticMatrix, m2: StochasticMatrix, family: str = CONDITIONED) -> M2CPModel:
    """Synchronization of two Markov chains on their shared states.

    With ``family="conditioned"`` each site matrix is the chain conditioned
    on its next shared state, which reproduces the law obtained by running
    both chains and conditioning on agreement at their first shared hits.
    ``family="renormalized"`` instead uses deletion plus renormalization
    (:func:`~m2cp.chains.derive_adapted_matrix`), which gives a different
    process in general.
    """
    if family not in (CONDITIONED, RENORMALIZED):
        raise ValueError(f"unknown family {family!r}")
    system = DistributedSystem(m1.index, m2.index)
    q = system.q
    sync = sync_chain_matrix(m1, m2, q)
    laws = {1: hitting_law(m1, q), 2: hitting_law(m2, q)}
    chains = {}
    for y in q:
        for site, m in ((1, m1), (2, m2)):
            if family == CONDITIONED:
                cc = conditioned_chain(m, y, q, laws[site])
                chains[site, y] = TargetChain(site, y, cc.matrix, cc.departures)
            else:
                chains[site, y] = TargetChain(site, y, derive_adapted_matrix(m, y, q), _renormalized_departures(m, y, q))
    initial = {}
    x0 = []
    for x, z in system.x0():
        if x == z:
            x0.append((x, z))
            continue
        weights = {y: laws[1][x, y] * laws[2][z, y] for y in q}
        total = sum(weights.values(), ZERO)
        if total == 0:
            warnings.warn(f"Δ has probability zero from {(x, z)}; state dropped", stacklevel=2)
            continue
        x0.append((x, z))
        initial[x, z] = {y: w / total for y, w in weights.items()}
    meta = {
        "construction": "sync_product",
        "family": family,
        "hitting": {1: laws[1], 2: laws[2]},
        "chains": {1: m1, 2: m2},
    }
    return build_from_adapted(system, x0, sync, AdaptedFamily(q, chains), initial, meta)


def _renormalized_departures(m: StochasticMatrix, y: str, q) -> dict:
    keep = [v for v in m.index if v == y or v not in q]
    out = {}
    for c in q:
        if c == y:
            continue
        total = sum((m[c, v] for v in keep), ZERO)
        if total:
            out[c] = {v: m[c, v] / total for v in keep}
    return out


def replace_row(model: M2CPModel, site: int, target: str, state: str, row: Iterable) -> M2CPModel:
    """Copy of ``model`` with one row of one family matrix replaced."""
    chain = model.family[site, target]
    m = chain.matrix
    new_rows = tuple(
        tuple(to_fraction(p) for p in row) if u == state else m.rows[i] for i, u in enumerate(m.index)
    )
    chains = dict(model.family.chains)
    chains[site, target] = TargetChain(site, target, StochasticMatrix(m.index, new_rows), chain.departures)
    meta = dict(model.metadata)
    meta["modified"] = f"site {site}, target {target}, row {state} -> ({', '.join(fmt_fraction(p) for p in new_rows[m.index.index(state)])})"
    return build_from_adapted(
        model.system,
        model.x0,
        model.sync_matrix,
        AdaptedFamily(model.family.q0, chains),
        model.initial_sync_laws,
        meta,
    )


@dataclass(frozen=True, eq=False)
class IndependentChains:
    """Open process: two independent chains on alphabets with no shared state."""

    system: DistributedSystem
    m1: StochasticMatrix
    m2: StochasticMatrix

    def __post_init__(self):
        if self.system.q:
            raise ModelError("independent chains require disjoint alphabets")
        if self.m1.index != self.system.s1 or self.m2.index != self.system.s2:
            raise ModelError("matrix indices must match the site alphabets")

    @classmethod
    def from_chains(cls, m1: StochasticMatrix, m2: StochasticMatrix) -> IndependentChains:
        return cls(DistributedSystem(m1.index, m2.index, allow_empty_q=True), m1, m2)

    @property
    def x0(self) -> tuple[GlobalState, ...]:
        return self.system.x0()

    @property
    def q0(self) -> tuple[str, ...]:
        return ()

    def is_admissible(self, alpha: GlobalState) -> bool:
        return alpha[0] in self.m1 and alpha[1] in self.m2

    def chain(self, site: int) -> StochasticMatrix:
        return self.m1 if site == 1 else self.m2

    def kind(self) -> str:
        return "open"


def independent_cylinder_prob(model: IndependentChains, start: GlobalState, s: Trajectory) -> Fraction:
    prob = ONE
    for site, u, word in ((1, start[0], s.w1), (2, start[1], s.w2)):
        m = model.chain(site)
        for v in word:
            prob *= m[u, v]
            u = v
    return prob
