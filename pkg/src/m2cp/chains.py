"""Exact rational algebra on finite stochastic matrices.

All arithmetic uses :class:`fractions.Fraction`. Linear systems are solved
by fraction-free (Bareiss) elimination on an integer matrix and every
solution is verified by substitution before it is returned.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Iterable, Mapping, Sequence

ZERO = Fraction(0)
ONE = Fraction(1)


class ChainError(ValueError):
    """Raised for ill-formed matrices or undefined chain quantities."""


def to_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ChainError(f"not a probability: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise ChainError(f"cannot parse fraction {value!r}") from None
    if isinstance(value, float):
        raise ChainError(f"floats are not accepted, write {value!r} as a fraction string")
    raise ChainError(f"unsupported entry type {type(value).__name__}")


def fmt_fraction(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


@dataclass(frozen=True)
class StochasticMatrix:
    """Square row-stochastic matrix with rows and columns labelled by states."""

    index: tuple[str, ...]
    rows: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self):
        index = tuple(self.index)
        if len(set(index)) != len(index):
            raise ChainError("matrix index has repeated states")
        rows = tuple(tuple(to_fraction(x) for x in row) for row in self.rows)
        if len(rows) != len(index):
            raise ChainError(f"expected {len(index)} rows, got {len(rows)}")
        for label, row in zip(index, rows):
            if len(row) != len(index):
                raise ChainError(f"row {label!r} has {len(row)} entries, expected {len(index)}")
            for x in row:
                if x < 0:
                    raise ChainError(f"row {label!r} has negative entry {fmt_fraction(x)}")
            total = sum(row, ZERO)
            if total != 1:
                raise ChainError(f"row {label!r}: row sum {fmt_fraction(total)}")
        object.__setattr__(self, "index", index)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "_pos", {x: i for i, x in enumerate(index)})

    def __getitem__(self, key: tuple[str, str]) -> Fraction:
        u, v = key
        return self.rows[self._pos[u]][self._pos[v]]

    def __contains__(self, state: str) -> bool:
        return state in self._pos

    def row(self, u: str) -> dict[str, Fraction]:
        return dict(zip(self.index, self.rows[self._pos[u]]))

    def successors(self, u: str) -> list[str]:
        return [v for v, p in zip(self.index, self.rows[self._pos[u]]) if p > 0]

    @classmethod
    def from_mapping(cls, rows: Mapping[str, Mapping[str, object]], index: Sequence[str]):
        return cls(tuple(index), tuple(tuple(rows[u].get(v, 0) for v in index) for u in index))

    @classmethod
    def identity(cls, index: Sequence[str]):
        index = tuple(index)
        return cls(index, tuple(tuple(ONE if i == j else ZERO for j in range(len(index))) for i in range(len(index))))


def validate_stochastic(rows: Sequence[Sequence[object]], index: Sequence[str]) -> StochasticMatrix:
    return StochasticMatrix(tuple(index), tuple(tuple(r) for r in rows))


def solve_exact(a: Sequence[Sequence[Fraction]], b: Sequence[Sequence[Fraction]]) -> list[list[Fraction]]:
    """Solve ``a @ x = b`` exactly for square ``a`` and a block of right-hand sides.

    Rows are scaled to integers and eliminated with Bareiss' fraction-free
    scheme; the exact rational solution is then checked against ``a`` and
    ``b``. Raises :class:`ZeroDivisionError` if ``a`` is singular.
    """
    n = len(a)
    k = len(b[0]) if n else 0
    mat = []
    for i in range(n):
        row = [to_fraction(x) for x in a[i]] + [to_fraction(x) for x in b[i]]
        scale = lcm(*(x.denominator for x in row)) if row else 1
        mat.append([int(x * scale) for x in row])
    prev = 1
    for col in range(n):
        pivot = next((r for r in range(col, n) if mat[r][col] != 0), None)
        if pivot is None:
            raise ZeroDivisionError("singular system")
        mat[col], mat[pivot] = mat[pivot], mat[col]
        p = mat[col][col]
        for r in range(col + 1, n):
            for c in range(col + 1, n + k):
                mat[r][c] = (mat[r][c] * p - mat[r][col] * mat[col][c]) // prev
            mat[r][col] = 0
        prev = p
    x = [[ZERO] * k for _ in range(n)]
    for r in range(n - 1, -1, -1):
        for j in range(k):
            acc = Fraction(mat[r][n + j])
            for c in range(r + 1, n):
                acc -= mat[r][c] * x[c][j]
            x[r][j] = acc / mat[r][r]
    for i in range(n):
        for j in range(k):
            lhs = sum((to_fraction(a[i][c]) * x[c][j] for c in range(n)), ZERO)
            if lhs != to_fraction(b[i][j]):
                raise ArithmeticError("exact back-substitution check failed")
    return x


@dataclass(frozen=True)
class HittingLaw:
    """First-hitting distribution over a target set, for every start state.

    ``law[u, y]`` is the probability that the chain started at ``u`` first
    enters the target set (at a time ``n > 0``) at ``y``.
    """

    states: tuple[str, ...]
    targets: tuple[str, ...]
    rows: tuple[tuple[Fraction, ...], ...]

    def __getitem__(self, key: tuple[str, str]) -> Fraction:
        u, y = key
        return self.rows[self.states.index(u)][self.targets.index(y)]

    def row(self, u: str) -> dict[str, Fraction]:
        return dict(zip(self.targets, self.rows[self.states.index(u)]))


def hitting_law(m: StochasticMatrix, q: Iterable[str]) -> HittingLaw:
    """Exact law of the first visit to ``q`` at a positive time.

    Private states go through the fundamental matrix ``(I - N)^-1``; rows of
    target states follow by conditioning on the first step.
    """
    q_set = set(q)
    targets = tuple(x for x in m.index if x in q_set)
    if not targets:
        raise ChainError("target set is empty")
    private = [x for x in m.index if x not in q_set]
    a = [[(ONE if u == v else ZERO) - m[u, v] for v in private] for u in private]
    b = [[m[u, y] for y in targets] for u in private]
    if private:
        try:
            x = solve_exact(a, b)
        except ZeroDivisionError:
            stuck = _states_missing_targets(m, q_set)
            where = f" from state {stuck[0]!r}" if stuck else ""
            raise ChainError(f"Q not almost surely reached{where}") from None
    else:
        x = []
    h_private = dict(zip(private, x))
    rows = []
    for u in m.index:
        if u in h_private:
            row = tuple(h_private[u])
        else:
            row = tuple(
                m[u, y] + sum((m[u, p] * h_private[p][j] for p in private), ZERO)
                for j, y in enumerate(targets)
            )
        total = sum(row, ZERO)
        if total != 1:
            raise ChainError(f"Q not almost surely reached from state {u!r} (mass {fmt_fraction(total)})")
        rows.append(row)
    return HittingLaw(tuple(m.index), targets, tuple(rows))


def _states_missing_targets(m: StochasticMatrix, q: set[str]) -> list[str]:
    """Private states from which no target is reachable along positive entries."""
    reach = set(q)
    changed = True
    while changed:
        changed = False
        for u in m.index:
            if u not in reach and any(v in reach for v in m.successors(u)):
                reach.add(u)
                changed = True
    no_path = [u for u in m.index if u not in reach]
    if no_path:
        return no_path
    # every state reaches q, yet some closed private class must exist: report any
    return [u for u in m.index if u not in q]


def derive_adapted_matrix(m: StochasticMatrix, y: str, q: Iterable[str]) -> StochasticMatrix:
    """Delete the other shared states and renormalize every surviving row."""
    q_set = set(q)
    if y not in q_set:
        raise ChainError(f"{y!r} is not a shared state")
    keep = tuple(x for x in m.index if x == y or x not in q_set)
    rows = []
    for u in keep:
        kept = [m[u, v] for v in keep]
        total = sum(kept, ZERO)
        if total == 0:
            raise ChainError(f"state {u!r} transitions only to deleted shared states")
        rows.append(tuple(p / total for p in kept))
    return StochasticMatrix(keep, tuple(rows))


def reachable_in(m: StochasticMatrix, target: str) -> set[str]:
    """States of ``m`` from which ``target`` is reachable along positive entries."""
    reach = {target}
    changed = True
    while changed:
        changed = False
        for u in m.index:
            if u not in reach and any(v in reach for v in m.successors(u)):
                reach.add(u)
                changed = True
    return reach


@dataclass(frozen=True)
class ConditionedChain:
    """Law of a chain conditioned on first entering ``q`` at ``target``.

    ``matrix`` is a stochastic matrix on ``{target}`` plus private states.
    ``departures`` holds the first-step law out of every other shared state.
    Private states that cannot reach ``target`` first get a point mass on
    ``target``; they carry zero conditional probability anyway.
    """

    target: str
    matrix: StochasticMatrix
    departures: Mapping[str, Mapping[str, Fraction]]


def conditioned_chain(m: StochasticMatrix, y: str, q: Iterable[str], law: HittingLaw | None = None) -> ConditionedChain:
    """Doob transform of ``m`` by ``u -> P_u(first shared state hit is y)``."""
    q_set = set(q)
    if y not in q_set:
        raise ChainError(f"{y!r} is not a shared state")
    if law is None:
        law = hitting_law(m, q_set)
    keep = tuple(x for x in m.index if x == y or x not in q_set)

    def h(v):
        return ONE if v == y else law[v, y]

    def conditioned_row(u):
        if law[u, y] == 0:
            return tuple(ONE if v == y else ZERO for v in keep)
        # entering y stops the chain, so its weight is 1 rather than h(y)
        return tuple(m[u, v] * h(v) / law[u, y] for v in keep)

    matrix = StochasticMatrix(keep, tuple(conditioned_row(u) for u in keep))
    departures = {
        c: dict(zip(keep, conditioned_row(c))) for c in m.index if c in q_set and c != y
    }
    return ConditionedChain(y, matrix, departures)


def sync_chain_matrix(m1: StochasticMatrix, m2: StochasticMatrix, q: Iterable[str]) -> StochasticMatrix:
    """Transition matrix of the synchronization sequence of two chains.

    Row ``y`` is the product of the two first-hitting laws from ``y``,
    conditioned on both chains hitting the same shared state.
    """
    q = tuple(q)
    h1 = hitting_law(m1, q)
    h2 = hitting_law(m2, q)
    order = h1.targets
    rows = []
    for y in order:
        weights = [h1[y, t] * h2[y, t] for t in order]
        total = sum(weights, ZERO)
        if total == 0:
            raise ChainError(f"Δ has probability zero from ({y},{y})")
        rows.append(tuple(w / total for w in weights))
    return StochasticMatrix(order, tuple(rows))


def matrix_to_json(m: StochasticMatrix) -> dict:
    return {"index": list(m.index), "rows": [[fmt_fraction(x) for x in row] for row in m.rows]}


def matrix_from_json(data: Mapping) -> StochasticMatrix:
    try:
        index = data["index"]
        rows = data["rows"]
    except (KeyError, TypeError):
        raise ChainError("matrix JSON needs 'index' and 'rows'") from None
    return StochasticMatrix(tuple(index), tuple(tuple(r) for r in rows))


def hitting_to_json(h: HittingLaw) -> dict:
    return {
        "states": list(h.states),
        "targets": list(h.targets),
        "rows": [[fmt_fraction(x) for x in row] for row in h.rows],
    }
