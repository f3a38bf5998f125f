"""Reachability, irreducible components and recurrence of global states."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import networkx as nx
from scipy import stats as sps

from .reachability import ReachabilityGraph
from .simulation import DirectSampler, OmegaPrefix, draw_prefixes
from .stats import TestReport, independence_test, return_category
from .stopping import Reached, iterated_returns
from .trajectory import GlobalState

RECURRENT = "recurrent"
TRANSIENT = "transient"


def reachable_states(model, alpha: GlobalState) -> set[GlobalState]:
    """Global states reachable from ``alpha`` along positive-probability moves."""
    return ReachabilityGraph(model).reachable_states(alpha)


def node_graph(model) -> nx.DiGraph:
    """Support graph on the augmented nodes reachable from ``x0``.

    A global state with a private component does not determine its own
    future; the pending synchronization target does. Working on nodes
    keeps those futures apart.
    """
    graph = ReachabilityGraph(model)
    g = nx.DiGraph()
    for n in graph.closure():
        g.add_node(n)
        g.add_edges_from((n, m) for m in graph.successors(n))
    g.graph["reach"] = graph
    return g


def irreducible_components(model, graph: nx.DiGraph | None = None) -> list[frozenset[GlobalState]]:
    """Global states visited by each bottom strongly connected component of the node graph.

    Ordered by the position in ``x0`` of their first member.
    """
    g = node_graph(model) if graph is None else graph
    reach = g.graph["reach"]
    order = {a: i for i, a in enumerate(model.x0)}
    comps = set()
    for c in nx.attracting_components(g):
        states = frozenset(p for p in map(reach.project, c) if p is not None and p in order)
        if states:
            comps.add(states)
    return sorted(comps, key=lambda c: min(order[a] for a in c))


def structural_class(model, alpha: GlobalState, graph: nx.DiGraph | None = None) -> str:
    """``recurrent`` when ``alpha`` can be revisited from every node reachable from it."""
    g = node_graph(model) if graph is None else graph
    reach = g.graph["reach"]
    alpha = tuple(alpha)
    entries = [n for n in reach.entry_nodes(alpha) if n in g]
    if not entries:
        return TRANSIENT
    target = {n for n in g if reach.project(n) == alpha}
    for h in list(target):
        target |= nx.ancestors(g, h)
    # nodes with a move into ``target`` revisit alpha after at least one step
    back = {n for n in g if any(m in target for m in g.successors(n))}
    seen = set(entries)
    for n in entries:
        seen |= nx.descendants(g, n)
    return RECURRENT if seen <= back else TRANSIENT


def classify_open_closed(model, alpha: GlobalState | None = None) -> str:
    """``closed`` when some synchronization state is reachable, ``open`` when none exists.

    Adapted-family models are always closed. For two independent chains
    without shared states no synchronization can ever occur.
    """
    if model.kind() == "open":
        return "open"
    if alpha is None:
        return "closed"
    reach = reachable_states(model, alpha)
    return "closed" if any(x == z and x in model.system.shared for x, z in reach) else "open"


def wilson_interval(k: int, n: int, confidence: float = 0.99) -> tuple[float, float]:
    if n == 0:
        return (0.0, 1.0)
    ci = sps.binomtest(k, n).proportion_ci(confidence_level=confidence, method="wilson")
    return (float(ci.low), float(ci.high))


@dataclass(frozen=True)
class GeometricPoint:
    n: int
    p_n: float
    predicted: float
    sigma: float
    within_band: bool


@dataclass(frozen=True)
class RecurrenceReport:
    alpha: GlobalState
    structural: str
    estimate: float
    interval: tuple[float, float]
    sample_size: int
    horizon: int
    geometric: tuple[GeometricPoint, ...] = field(default=())

    @property
    def geometric_ok(self) -> bool:
        return all(g.within_band for g in self.geometric)

    def to_json(self) -> dict:
        return {
            "alpha": list(self.alpha),
            "structural": self.structural,
            "estimate": self.estimate,
            "interval": list(self.interval),
            "sample_size": self.sample_size,
            "horizon": self.horizon,
            "geometric": [g.__dict__ for g in self.geometric],
            "geometric_ok": self.geometric_ok,
        }


def return_counts(prefixes, alpha: GlobalState, k_max: int) -> list[int]:
    """``counts[n]`` is the number of prefixes with at least ``n`` returns, for ``n ≤ k_max``."""
    counts = [0] * (k_max + 1)
    for p in prefixes:
        r = len(iterated_returns(p, alpha, k_max))
        for n in range(r + 1):
            counts[n] += 1
    return counts


def geometric_check(counts: list[int], n_total: int, bands: float = 3.0) -> tuple[GeometricPoint, ...]:
    """Compare ``P(R^n < ∞)`` with ``P(R < ∞)·P(R^{n-1} < ∞)`` within ``bands`` combined sigmas.

    The sigma adds the binomial variances of both sides, so it ignores their
    positive correlation and errs on the wide side.
    """
    p = [c / n_total for c in counts]
    out = []
    for n in range(2, len(counts)):
        pred = p[1] * p[n - 1]
        var = (
            p[n] * (1 - p[n]) / n_total
            + p[n - 1] ** 2 * p[1] * (1 - p[1]) / n_total
            + p[1] ** 2 * p[n - 1] * (1 - p[n - 1]) / n_total
        )
        sigma = math.sqrt(var)
        out.append(GeometricPoint(n, p[n], pred, sigma, abs(p[n] - pred) <= bands * sigma + 1e-15))
    return tuple(out)


def classify_recurrence(
    model,
    alpha: GlobalState,
    n_samples: int = 10_000,
    horizon: int = 50,
    seed: int = 0,
    k_max: int = 4,
    threads: int = 1,
    sampler=None,
) -> RecurrenceReport:
    """Structural verdict plus Monte-Carlo estimates of successive return probabilities."""
    alpha = tuple(alpha)
    sampler = sampler or DirectSampler(model)
    prefixes = draw_prefixes(sampler, alpha, n_samples, horizon, seed, threads)
    counts = return_counts(prefixes, alpha, k_max)
    return RecurrenceReport(
        alpha,
        structural_class(model, alpha),
        counts[1] / n_samples,
        wilson_interval(counts[1], n_samples),
        n_samples,
        horizon,
        geometric_check(counts, n_samples),
    )


def return_pieces(prefix: OmegaPrefix, alpha: GlobalState, k: int = 2) -> list[tuple[tuple, tuple]] | None:
    """The first ``k`` excursions between successive returns, or None if fewer occur."""
    rs = iterated_returns(prefix, alpha, k)
    if len(rs) < k:
        return None
    out = []
    m = n = 0
    for r in rs:
        assert isinstance(r, Reached)
        out.append((r.prefix.w1[m:], r.prefix.w2[n:]))
        m, n = r.length.m, r.length.n
    return out


def iid_returns_tests(
    model,
    alpha: GlobalState,
    n_samples: int = 10_000,
    horizon: int = 50,
    significance: float = 0.01,
    seed: int = 0,
    threads: int = 1,
) -> tuple[TestReport, TestReport]:
    """Same law for the first two excursions, and no dependence between them.

    Returns the two-sample homogeneity report and the independence report.
    """
    alpha = tuple(alpha)
    prefixes = draw_prefixes(DirectSampler(model), alpha, n_samples, horizon, seed, threads)
    shared = model.system.shared
    first, second = [], []
    for p in prefixes:
        pieces = return_pieces(p, alpha)
        if pieces is None:
            continue
        first.append(return_category(*pieces[0], shared))
        second.append(return_category(*pieces[1], shared))
    used = len(first)
    homog = independence_test([1] * used + [2] * used, first + second, seed=seed)
    indep = independence_test(first, second, seed=seed + 1)
    reports = []
    for name, r in (("returns_same_law", homog), ("returns_independent", indep)):
        reports.append(
            TestReport(
                name,
                r.statistic,
                r.dof,
                r.p_value,
                "reject" if r.p_value < significance else "pass",
                used,
                {"alpha": list(alpha), "method": r.method, "horizon": horizon, "seed": seed,
                 "drawn": n_samples, "merged_categories": r.merged_rows + r.merged_cols},
            )
        )
    return reports[0], reports[1]
