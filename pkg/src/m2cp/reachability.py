"""Support graph of a model over augmented states.

For closed models a node is ``(x, z, y, arrived1, arrived2)``: the current
local states, the pending synchronization target ``y``, and whether a site
has already entered ``y`` and waits for the other one. A node projects to
the global state ``(x, z)`` only when no site is waiting, because only then
is the pair of local states the end of a finite trajectory.

For open models (independent chains) nodes are plain global states.
"""

from __future__ import annotations

from collections import deque
from typing import Iterable

from .trajectory import GlobalState

Node = tuple


class ReachabilityGraph:
    def __init__(self, model):
        self.model = model
        self._succ: dict[Node, tuple[Node, ...]] = {}
        self._open = model.kind() == "open"
        self._closure: set[Node] | None = None

    # -- node structure -------------------------------------------------
    def start_nodes(self, alpha: GlobalState) -> list[Node]:
        alpha = tuple(alpha)
        if self._open:
            return [alpha]
        law = self.model.sync_law(alpha)
        return [(alpha[0], alpha[1], y, False, False) for y in self.model.q0 if law.get(y, 0) > 0]

    def project(self, node: Node) -> GlobalState | None:
        if self._open:
            return node
        x, z, _, a1, a2 = node
        return None if a1 or a2 else (x, z)

    def successors(self, node: Node) -> tuple[Node, ...]:
        out = self._succ.get(node)
        if out is None:
            out = tuple(self._compute_successors(node))
            self._succ[node] = out
        return out

    def _compute_successors(self, node: Node) -> Iterable[Node]:
        model = self.model
        if self._open:
            x, z = node
            for v in model.m1.successors(x):
                yield (v, z)
            for v in model.m2.successors(z):
                yield (x, v)
            return
        x, z, y, a1, a2 = node
        shared = model.system.shared
        for site, u, arrived in ((1, x, a1), (2, z, a2)):
            if arrived:
                continue
            other_arrived = a2 if site == 1 else a1
            for v, p in model.step_law(site, y, u).items():
                if p <= 0:
                    continue
                if v == y:
                    if other_arrived:
                        # both sites at y: synchronization, then draw the next target
                        for y2, p2 in model.sync_matrix.row(y).items():
                            if p2 > 0:
                                yield (y, y, y2, False, False)
                    elif site == 1:
                        yield (y, z, y, True, False)
                    else:
                        yield (x, y, y, False, True)
                elif v not in shared:
                    yield (v, z, y, a1, a2) if site == 1 else (x, v, y, a1, a2)

    # -- searches --------------------------------------------------------
    def reachable_nodes(self, sources: Iterable[Node]) -> set[Node]:
        seen = set(sources)
        todo = deque(seen)
        while todo:
            n = todo.popleft()
            for m in self.successors(n):
                if m not in seen:
                    seen.add(m)
                    todo.append(m)
        return seen

    def closure(self) -> set[Node]:
        """Nodes reachable from any admissible state of ``x0``."""
        if self._closure is None:
            sources = []
            for a in self.model.x0:
                if self.model.is_admissible(a):
                    sources.extend(self.start_nodes(a))
            self._closure = self.reachable_nodes(sources)
        return self._closure

    def entry_nodes(self, alpha: GlobalState) -> list[Node]:
        """Nodes from which the future of ``alpha`` unfolds.

        Admissible states use their own start nodes. Other states use every
        node of the closure that projects to them.
        """
        alpha = tuple(alpha)
        if self.model.is_admissible(alpha):
            return self.start_nodes(alpha)
        return sorted(n for n in self.closure() if self.project(n) == alpha)

    def reachable_states(self, alpha: GlobalState) -> set[GlobalState]:
        alpha = tuple(alpha)
        nodes = self.reachable_nodes(self.entry_nodes(alpha))
        out = {p for p in map(self.project, nodes) if p is not None}
        if nodes:
            out.add(alpha)
        return out
