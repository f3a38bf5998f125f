"""Statistical checks on sampled prefixes.

Contingency tables are coarsened by merging their sparsest categories
until every expected count reaches five. If a table still fails that
rule, a permutation test replaces the chi-square reference law.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Hashable, Mapping, Sequence

import numpy as np
from scipy import stats as sps

from .simulation import OmegaPrefix, draw_elementary, draw_prefixes
from .trajectory import decompose

MIN_EXPECTED = 5.0
LENGTH_CAP = 6
PERMUTATIONS = 2000


@dataclass(frozen=True)
class TestReport:
    """Outcome of one statistical check.

    ``p_value`` is the chi-square tail of ``statistic`` with ``dof`` degrees
    of freedom, except where ``details["p_value_rule"]`` says otherwise.
    """

    __test__ = False  # not a pytest class

    name: str
    statistic: float
    dof: int
    p_value: float
    decision: str
    sample_size: int
    details: Mapping = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.decision == "pass"

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "statistic": self.statistic,
            "dof": self.dof,
            "p_value": self.p_value,
            "decision": self.decision,
            "sample_size": self.sample_size,
            "details": _jsonable(self.details),
        }


def _jsonable(x):
    if isinstance(x, Mapping):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return x


def _decide(p: float, significance: float) -> str:
    return "reject" if p < significance else "pass"


# -- contingency tables ---------------------------------------------------------


@dataclass(frozen=True)
class IndependenceResult:
    statistic: float
    dof: int
    p_value: float
    method: str
    merged_rows: int
    merged_cols: int


def _coarsen(table: np.ndarray) -> tuple[np.ndarray, int, int]:
    """Merge the sparsest row or column into its next sparsest peer until expected counts are ≥ 5."""
    t = table.astype(float)
    merged_r = merged_c = 0
    while t.shape[0] > 1 and t.shape[1] > 1:
        n = t.sum()
        rows, cols = t.sum(1), t.sum(0)
        if np.outer(rows, cols).min() / n >= MIN_EXPECTED:
            break
        # merge along the axis whose smallest margin is smaller
        axis = 0 if rows.min() <= cols.min() else 1
        margins = rows if axis == 0 else cols
        if len(margins) <= 2 and len((cols if axis == 0 else rows)) > 2:
            axis = 1 - axis
            margins = rows if axis == 0 else cols
        if len(margins) <= 2:
            break
        i, j = np.argsort(margins, kind="stable")[:2]
        if axis == 0:
            t[j] += t[i]
            t = np.delete(t, i, axis=0)
            merged_r += 1
        else:
            t[:, j] += t[:, i]
            t = np.delete(t, i, axis=1)
            merged_c += 1
    return t, merged_r, merged_c


def _table(xs: Sequence[Hashable], ys: Sequence[Hashable]) -> tuple[np.ndarray, list, list]:
    rl = sorted(set(xs), key=repr)
    cl = sorted(set(ys), key=repr)
    ri = {v: i for i, v in enumerate(rl)}
    ci = {v: i for i, v in enumerate(cl)}
    t = np.zeros((len(rl), len(cl)))
    for x, y in zip(xs, ys):
        t[ri[x], ci[y]] += 1
    return t, rl, cl


def _chi2(t: np.ndarray) -> tuple[float, int]:
    res = sps.chi2_contingency(t, correction=False)
    return float(res.statistic), int(res.dof)


def independence_test(xs: Sequence[Hashable], ys: Sequence[Hashable], seed: int = 0) -> IndependenceResult:
    """Chi-square test of independence of paired categorical samples."""
    t, _, _ = _table(xs, ys)
    # drop empty margins left by the category union
    t = t[t.sum(1) > 0][:, t.sum(0) > 0]
    t, mr, mc = _coarsen(t)
    if t.shape[0] < 2 or t.shape[1] < 2:
        return IndependenceResult(0.0, 0, 1.0, "degenerate", mr, mc)
    stat, dof = _chi2(t)
    expected = np.outer(t.sum(1), t.sum(0)) / t.sum()
    if expected.min() >= MIN_EXPECTED:
        return IndependenceResult(stat, dof, float(sps.chi2.sf(stat, dof)), "chi2", mr, mc)
    return IndependenceResult(stat, dof, _permutation_p(t, stat, seed), "permutation", mr, mc)


def _permutation_p(t: np.ndarray, observed: float, seed: int) -> float:
    rows = np.repeat(np.arange(t.shape[0]), t.sum(1).astype(int))
    cols = np.concatenate([np.repeat(np.arange(t.shape[1]), t[i].astype(int)) for i in range(t.shape[0])])
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(1 << 20,))))
    hits = 0
    for _ in range(PERMUTATIONS):
        perm = rng.permutation(cols)
        pt = np.zeros_like(t)
        np.add.at(pt, (rows, perm), 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            s, _ = _chi2(pt)
        hits += s >= observed - 1e-12
    return (hits + 1) / (PERMUTATIONS + 1)


def fisher_combine(pvalues: Sequence[float]) -> tuple[float, int, float]:
    """Fisher's statistic, its degrees of freedom and combined p-value."""
    if not pvalues:
        return 0.0, 0, 1.0
    stat, p = sps.combine_pvalues(np.clip(pvalues, 1e-300, 1.0), method="fisher")
    return float(stat), 2 * len(pvalues), float(p)


# -- categories -----------------------------------------------------------------


def component_category(word: Sequence[str], cap: int = LENGTH_CAP) -> tuple:
    """Length capped at ``cap`` and the state entered just before the synchronization."""
    before = word[-2] if len(word) >= 2 else "-"
    return (min(len(word), cap), before)


def return_category(w1: Sequence[str], w2: Sequence[str], shared, cap: int = LENGTH_CAP) -> tuple:
    """Category of a return trajectory: capped lengths and first synchronization state."""
    first = next((x for x in w1 if x in shared), "-")
    return (min(len(w1), cap), min(len(w2), cap), first)


def _y0(start) -> str:
    x, z = start
    return x if x == z else f"({x},{z})"


# -- tests ------------------------------------------------------------------------


def lip_test(
    sampler,
    start,
    n: int = 2,
    n_samples: int = 100_000,
    significance: float = 0.01,
    seed: int = 0,
    threads: int = 1,
    prefixes: Sequence[OmegaPrefix] | None = None,
) -> TestReport:
    """Conditional independence of the two components of the ``n``-th elementary trajectory.

    Samples are bucketed by ``(Y_{n-1}, Y_n)``; each bucket gets a contingency
    test of site-1 against site-2 categories and the bucket p-values are
    combined with Fisher's method.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if prefixes is None:
        prefixes = draw_prefixes(sampler, start, n_samples, n, seed, threads)
    buckets: dict[tuple, tuple[list, list]] = {}
    for p in prefixes:
        parts = decompose(p.body).elementary
        if len(parts) < n:
            raise ValueError("prefix has fewer synchronizations than the tested step")
        ys = [_y0(p.start)] + [e.w1[-1] for e in parts]
        a, b = buckets.setdefault((ys[n - 1], ys[n]), ([], []))
        e = parts[n - 1]
        a.append(component_category(e.w1))
        b.append(component_category(e.w2))
    pvals = []
    per_bucket = {}
    for k, key in enumerate(sorted(buckets)):
        xs, zs = buckets[key]
        r = independence_test(xs, zs, seed=seed + k)
        per_bucket[f"{key[0]}->{key[1]}"] = {
            "count": len(xs),
            "statistic": r.statistic,
            "dof": r.dof,
            "p_value": r.p_value,
            "method": r.method,
            "merged_categories": r.merged_rows + r.merged_cols,
        }
        if r.method != "degenerate":
            pvals.append(r.p_value)
    stat, dof, p = fisher_combine(pvals)
    return TestReport(
        "lip",
        stat,
        dof,
        p,
        _decide(p, significance),
        len(prefixes),
        {"step": n, "significance": significance, "seed": seed, "combination": "fisher", "buckets": per_bucket},
    )


def y_transitions(prefixes: Sequence[OmegaPrefix]) -> list[tuple[str, ...]]:
    """Sequences ``Y_0, Y_1, ...`` with ``Y_0`` the start label."""
    return [(_y0(p.start),) + p.y_sequence for p in prefixes]


def y_chain_test(
    sampler,
    model,
    start,
    n_samples: int = 100_000,
    horizon: int = 10,
    significance: float = 0.01,
    seed: int = 0,
    threads: int = 1,
    prefixes: Sequence[OmegaPrefix] | None = None,
) -> TestReport:
    """Goodness of fit of observed ``Y`` transitions plus a memorylessness check.

    The two parts are combined by Bonferroni: the reported p-value is twice
    the smaller part p-value (capped at 1), and ``statistic``/``dof`` belong to
    that part.
    """
    if prefixes is None:
        prefixes = draw_prefixes(sampler, start, n_samples, horizon, seed, threads)
    seqs = y_transitions(prefixes)
    q0 = list(model.q0)
    counts: dict[str, Counter] = {y: Counter() for y in q0}
    triples: dict[str, tuple[list, list]] = {}
    for ys in seqs:
        for a, b in zip(ys[1:], ys[2:]):
            counts[a][b] += 1
        for a, b, c in zip(ys, ys[1:], ys[2:]):
            prev, nxt = triples.setdefault(b, ([], []))
            prev.append(a)
            nxt.append(c)

    gof_stat = 0.0
    gof_dof = 0
    impossible = 0
    empirical = {}
    for y in q0:
        total = sum(counts[y].values())
        if not total:
            continue
        exp = np.array([float(model.sync_matrix[y, t]) * total for t in q0])
        obs = np.array([counts[y][t] for t in q0], dtype=float)
        empirical[y] = {t: counts[y][t] / total for t in q0}
        impossible += int(obs[exp == 0].sum())
        keep = exp > 0
        if keep.sum() > 1:
            gof_stat += float(((obs[keep] - exp[keep]) ** 2 / exp[keep]).sum())
            gof_dof += int(keep.sum()) - 1
    p_gof = 0.0 if impossible else (float(sps.chi2.sf(gof_stat, gof_dof)) if gof_dof else 1.0)

    mem_stat = 0.0
    mem_dof = 0
    mem_methods = {}
    for k, b in enumerate(sorted(triples)):
        prev, nxt = triples[b]
        r = independence_test(prev, nxt, seed=seed + k)
        mem_methods[b] = r.method
        if r.method != "degenerate":
            mem_stat += r.statistic
            mem_dof += r.dof
    p_mem = float(sps.chi2.sf(mem_stat, mem_dof)) if mem_dof else 1.0

    if p_gof <= p_mem:
        stat, dof, pmin = gof_stat, gof_dof, p_gof
    else:
        stat, dof, pmin = mem_stat, mem_dof, p_mem
    p = min(1.0, 2 * pmin)
    details = {
        "significance": significance,
        "seed": seed,
        "horizon": horizon,
        "p_value_rule": "bonferroni over goodness of fit and memorylessness",
        "goodness_of_fit": {"statistic": gof_stat, "dof": gof_dof, "p_value": p_gof, "impossible_transitions": impossible},
        "memorylessness": {"statistic": mem_stat, "dof": mem_dof, "p_value": p_mem, "methods": mem_methods},
        "empirical_matrix": empirical,
        "exact_matrix": {y: {t: model.sync_matrix[y, t] for t in q0} for y in q0},
    }
    return TestReport("y_chain", stat, dof, p, _decide(p, significance), len(prefixes), details)


# -- total variation ---------------------------------------------------------------


def _outcome_class(parts, max_site_len: int):
    for w1, w2 in parts:
        if len(w1) > max_site_len or len(w2) > max_site_len:
            return "rest"
    return tuple(parts)


def _elementary_words(system, site: int, y: str, max_len: int):
    from itertools import product

    private = system.private(site)
    for k in range(max_len):
        for w in product(private, repeat=k):
            yield w + (y,)


def _support(law) -> list[str]:
    return [t for t, p in law.items() if p]


def exact_outcome_law(model, start, depth: int, max_site_len: int = 3, budget: int = 10_000) -> dict:
    """Exact law of the first ``depth`` elementary trajectories, lumped beyond ``max_site_len``."""
    from .model import cylinder_from_words

    start = tuple(start)
    system = model.system
    law: dict = {}

    def extend(parts, w1, w2, targets):
        if len(parts) == depth:
            p = cylinder_from_words(model, start, w1, w2)
            if p:
                law[tuple(parts)] = p
                if len(law) > budget:
                    raise ValueError(f"more than {budget} outcomes")
            return
        for y in targets:
            for e1 in _elementary_words(system, 1, y, max_site_len):
                for e2 in _elementary_words(system, 2, y, max_site_len):
                    extend(parts + [(e1, e2)], w1 + e1, w2 + e2, _support(model.sync_law((y, y))))

    extend([], (), (), _support(model.sync_law(start)))
    rest = 1 - sum(law.values(), Fraction(0))
    if rest:
        law["rest"] = rest
    return law


def _split_parts(w1, w2, shared, depth):
    parts = []
    a = b = 0
    i1 = [i for i, x in enumerate(w1) if x in shared]
    i2 = [j for j, x in enumerate(w2) if x in shared]
    for i, j in list(zip(i1, i2))[:depth]:
        parts.append((tuple(w1[a : i + 1]), tuple(w2[b : j + 1])))
        a, b = i + 1, j + 1
    return parts


def tv_distance(p: Mapping, q: Mapping) -> float:
    return 0.5 * sum(abs(float(p.get(k, 0)) - float(q.get(k, 0))) for k in set(p) | set(q))


def _empirical(samples, depth, shared, max_site_len) -> dict:
    counts = Counter(_outcome_class(_split_parts(w1, w2, shared, depth), max_site_len) for w1, w2 in samples)
    n = len(samples)
    return {k: c / n for k, c in counts.items()}


def sampler_vs_exact_tv(
    sampler,
    model,
    start,
    depth: int = 1,
    n_samples: int = 100_000,
    seed: int = 0,
    max_site_len: int = 3,
    threads: int = 1,
) -> dict:
    """Total variation between sampled and exact laws of the first ``depth`` elementary trajectories."""
    if depth == 0:
        return {"tv_distance": 0.0, "outcomes": 1, "sample_size": n_samples, "depth": 0}
    shared = model.system.shared
    if depth == 1:
        samples = draw_elementary(sampler, start, n_samples, seed)
    else:
        samples = [(p.body.w1, p.body.w2) for p in draw_prefixes(sampler, start, n_samples, depth, seed, threads)]
    exact = exact_outcome_law(model, start, depth, max_site_len)
    emp = _empirical(samples, depth, shared, max_site_len)
    return {
        "tv_distance": tv_distance(emp, exact),
        "outcomes": len(exact),
        "sample_size": n_samples,
        "depth": depth,
        "max_site_len": max_site_len,
        "rest_mass": float(exact.get("rest", 0)),
        "seed": seed,
    }


def two_sample_tv(samples_a, samples_b, shared, depth: int = 1, max_site_len: int = 3) -> float:
    """Total variation between two empirical laws of first elementary trajectories."""
    return tv_distance(
        _empirical(samples_a, depth, shared, max_site_len),
        _empirical(samples_b, depth, shared, max_site_len),
    )
