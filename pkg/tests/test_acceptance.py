"""End-to-end acceptance checks, one group per numbered criterion.

Each test carries a ``criterion`` marker; the terminal summary prints one
PASS/FAIL line per criterion with the measured quantities.
"""

from __future__ import annotations

import itertools
import time
import warnings
from fractions import Fraction as F
from pathlib import Path

import pytest

from m2cp import io as mio
from m2cp.analysis import RECURRENT, TRANSIENT, classify_recurrence, iid_returns_tests, structural_class
from m2cp.chains import StochasticMatrix, derive_adapted_matrix, fmt_fraction, hitting_law, sync_chain_matrix
from m2cp.consistency import markov_consistency_report
from m2cp.model import replace_row, sync_product
from m2cp.simulation import CoupledSampler, DirectSampler, OmegaPrefix, RejectionSampler, draw_elementary, draw_prefixes
from m2cp.stats import lip_test, sampler_vs_exact_tv, two_sample_tv, y_chain_test
from m2cp.stopping import (
    SquareSet,
    as_time,
    check_stopping_property,
    extension_pairs,
    first_return,
    infimum,
    iterated_returns,
    last_instant_before_first_sync,
    supremum,
)
from m2cp.trajectory import DistributedSystem, Length, join, meet, subtrajectory_lattice

REPORTS = Path(__file__).resolve().parent.parent / "reports"

M_ROWS = (
    ("1/3", "1/3", "1/3", "0"),
    ("1/2", "1/8", "1/8", "1/4"),
    ("1/2", "0", "1/4", "1/4"),
    ("0", "1/2", "1/4", "1/4"),
)
SYSTEM = DistributedSystem(("a", "b", "c", "d"), ("c", "d", "e", "f"))


def rows(m):
    return [[fmt_fraction(x) for x in r] for r in m.rows]


@pytest.fixture(scope="module")
def example():
    return mio.load_fixture("two-site")


@pytest.fixture(scope="module")
def raw(example):
    return mio.raw_chains(example)


# -- 1 ----------------------------------------------------------------------------


@pytest.mark.criterion(1)
def test_exact_reproduction(record_property):
    t0 = time.perf_counter()
    m1 = StochasticMatrix(("a", "b", "c", "d"), M_ROWS)
    m2 = StochasticMatrix(("e", "f", "c", "d"), M_ROWS)
    q = ("c", "d")
    rc = derive_adapted_matrix(m1, "c", q)
    rd = derive_adapted_matrix(m1, "d", q)
    h = hitting_law(m1, q)
    y = sync_chain_matrix(m1, m2, q)
    model = sync_product(m1, m2)
    elapsed = time.perf_counter() - t0
    record_property("measured", f"{elapsed * 1000:.0f} ms")

    assert rows(rc) == [["1/3", "1/3", "1/3"], ["2/3", "1/6", "1/6"], ["2/3", "0", "1/3"]]
    assert rows(rd) == [["1/2", "1/2", "0"], ["4/7", "1/7", "2/7"], ["0", "2/3", "1/3"]]
    assert [h[u, t] for u in "abcd" for t in q] == [
        F(4, 5), F(1, 5), F(3, 5), F(2, 5), F(13, 20), F(7, 20), F(11, 20), F(9, 20)
    ]
    assert rows(y) == [["169/218", "49/218"], ["121/202", "81/202"]]
    assert model.sync_matrix == y
    assert elapsed < 1.0


# -- 2 ----------------------------------------------------------------------------


@pytest.mark.criterion(2)
def test_small_lattice(record_property):
    v = SYSTEM.trajectory("ac", "efc")
    elems = subtrajectory_lattice(v)
    expected = {("", ""), ("a", ""), ("", "e"), ("", "ef"), ("a", "e"), ("a", "ef"), ("ac", "efc")}
    got = {("".join(s.w1), "".join(s.w2)) for s in elems}
    record_property("measured", f"{len(elems)} elements")
    assert got == expected and len(elems) == 7
    members = set(elems)
    for x, y in itertools.product(elems, repeat=2):
        assert meet(x, y) in members and join(x, y) in members
        assert meet(x, y) <= x and x <= join(x, y)


# -- 3 ----------------------------------------------------------------------------


@pytest.mark.criterion(3)
def test_return_times(record_property):
    body = SYSTEM.trajectory("abcad", "ecefd")
    om = OmegaPrefix(("a", "e"), body, 2)
    single = [(r.length.m, r.length.n) for r in iterated_returns(om, ("a", "e"), 2)]
    x0 = [(r.length.m, r.length.n) for r in iterated_returns(om, SquareSet.everything(SYSTEM), 10)]
    record_property("measured", f"R={single[:1]}, R2={single[1:]}, X0 returns={x0}")
    assert first_return(om, ("a", "e")).length == Length(1, 1)
    assert single == [(1, 1), (4, 3)]
    assert x0 == [(1, 1), (3, 2), (4, 3), (5, 5)]


# -- 4 ----------------------------------------------------------------------------


@pytest.mark.criterion(4)
def test_stopping_harness(example, record_property):
    t0 = time.perf_counter()
    prefixes = draw_prefixes(DirectSampler(example), ("c", "c"), 10_000, 6, seed=0)
    times = {
        "R(c,c)": as_time(("c", "c")),
        "R(a,e)": as_time(("a", "e")),
        "R(c,c) v R(d,d)": supremum(as_time(("c", "c")), as_time(("d", "d"))),
    }
    counts = {}
    for name, fn in times.items():
        pairs = list(itertools.islice(extension_pairs(prefixes, fn, seed=1, per_omega=2), 10_000))
        counts[name] = (len(pairs), len(check_stopping_property(fn, pairs)))

    # last instant before the first synchronization
    om = OmegaPrefix(("a", "f"), SYSTEM.trajectory("ac", "ffec"), 1)
    ext = OmegaPrefix(("a", "f"), SYSTEM.trajectory("abc", "ffefc"), 1)
    assert last_instant_before_first_sync(om).length == Length(1, 3)
    last_v = check_stopping_property(last_instant_before_first_sync, [(om, ext)])

    # infimum of two first returns
    small = DistributedSystem(("a", "b", "c"), ("c", "e", "f"))
    inf = infimum(as_time(("a", "e")), as_time(("b", "f")))
    om2 = OmegaPrefix(("a", "e"), small.trajectory("ab", "fe"), 0)
    ext2 = OmegaPrefix(("a", "e"), small.trajectory("a" * 10, "f" * 10), 0)
    assert inf(om2).prefix == small.trajectory("a", "f")
    inf_v = check_stopping_property(inf, [(om2, ext2)])
    elapsed = time.perf_counter() - t0

    record_property(
        "measured",
        ", ".join(f"{k}: {n} pairs {v} violations" for k, (n, v) in counts.items())
        + f"; non-examples flagged {len(last_v)}+{len(inf_v)}; {elapsed:.1f} s",
    )
    for n, v in counts.values():
        assert n == 10_000 and v == 0
    assert len(last_v) == 1 and len(inf_v) == 1
    assert elapsed < 30


# -- 5 ----------------------------------------------------------------------------


@pytest.mark.criterion(5)
def test_sampler_correctness(example, raw, record_property):
    toy = mio.load_fixture("toy")
    t0 = time.perf_counter()
    toy_tv = sampler_vs_exact_tv(DirectSampler(toy), toy, ("c", "c"), depth=1, n_samples=100_000, seed=0)
    a = draw_elementary(DirectSampler(example), ("c", "c"), 100_000, seed=1)
    b = draw_elementary(RejectionSampler(*raw), ("c", "c"), 100_000, seed=2)
    rej_tv = two_sample_tv(a, b, example.system.shared)
    elapsed = time.perf_counter() - t0
    record_property(
        "measured", f"toy TV {toy_tv['tv_distance']:.4f}, rejection vs direct TV {rej_tv:.4f}, {elapsed:.1f} s"
    )
    assert toy_tv["tv_distance"] <= 0.01
    assert rej_tv <= 0.015
    assert elapsed < 60


# -- 6 ----------------------------------------------------------------------------


@pytest.mark.criterion(6)
def test_y_chain(example, record_property):
    r = y_chain_test(DirectSampler(example), example, ("c", "c"), n_samples=100_000, horizon=10, seed=0)
    emp = r.details["empirical_matrix"]["c"]
    record_property(
        "measured", f"c->c {emp['c']:.4f}, c->d {emp['d']:.4f}, p={r.p_value:.3f}"
    )
    assert abs(emp["c"] - 169 / 218) <= 0.01
    assert abs(emp["d"] - 49 / 218) <= 0.01
    assert r.details["goodness_of_fit"]["p_value"] >= 0.01
    assert r.passed


# -- 7 ----------------------------------------------------------------------------


@pytest.mark.criterion(7)
def test_lip_passes_on_model(example, record_property):
    r = lip_test(DirectSampler(example), ("c", "c"), n=2, n_samples=100_000, significance=0.01, seed=0)
    record_property("measured", f"direct p={r.p_value:.3f}")
    assert r.passed


POWER_REPS = 10


@pytest.mark.criterion(7)
@pytest.mark.slow
def test_lip_power_against_coupled(record_property):
    sampler, start = mio.adversarial_sampler()
    rejected = 0
    for rep in range(POWER_REPS):
        r = lip_test(sampler, start, n=2, n_samples=100_000, significance=0.01, seed=1000 + rep)
        rejected += not r.passed
    power = rejected / POWER_REPS
    record_property("measured", f"coupled sampler rejected {rejected}/{POWER_REPS} at 1e5")
    assert power >= 0.9


# -- 8 ----------------------------------------------------------------------------


@pytest.mark.criterion(8)
def test_geometric_law_on_transient(record_property):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        model = mio.load_fixture("transient")
    rep = classify_recurrence(model, ("c", "c"), n_samples=20_000, horizon=12, seed=0, k_max=5)
    record_property(
        "measured",
        "transient p_n=" + ",".join(f"{g.p_n:.4f}" for g in rep.geometric) + f" P(R<inf)={rep.estimate:.4f}",
    )
    assert structural_class(model, ("c", "c")) == TRANSIENT
    assert rep.geometric and rep.geometric_ok


@pytest.mark.criterion(8)
def test_iid_returns_on_recurrent_state(example, record_property):
    assert structural_class(example, ("c", "c")) == RECURRENT
    same, indep = iid_returns_tests(example, ("c", "c"), n_samples=10_000, horizon=40, seed=0)
    record_property("measured", f"same law p={same.p_value:.3f}, independence p={indep.p_value:.3f}")
    assert same.passed and indep.passed


# -- 9 ----------------------------------------------------------------------------


@pytest.mark.criterion(9)
def test_markov_consistency(example, record_property):
    rep = markov_consistency_report(example, ("c", "c"), 3, 3)
    record_property("measured", f"{rep.n_comparisons} comparisons, {len(rep.violations)} violations")
    assert rep.n_comparisons > 0
    assert rep.ok


@pytest.mark.criterion(9)
def test_modified_family_report_archived(raw, record_property):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        base = sync_product(*raw, "renormalized")
        model = replace_row(base, 1, "c", "b", [0, 0, 1])
    config = {"family": "renormalized", "modified_row": {"site": 1, "target": "c", "state": "b", "row": ["0", "0", "1"]},
              "start": ["c", "c"], "max_prefix_len": 3, "max_future_len": 3}

    def render():
        rep = markov_consistency_report(model, ("c", "c"), 3, 3)
        return rep, mio.dumps(mio.report(rep.to_json(), config))

    rep, first = render()
    _, second = render()
    REPORTS.mkdir(exist_ok=True)
    path = REPORTS / "markov_modified_family.json"
    mio.write_text(path, first)
    record_property("measured", f"modified family: {len(rep.violations)} violations, archived {path.name}")
    assert first == second
    assert path.read_text(encoding="utf-8") == first
