from __future__ import annotations

from itertools import product

import pytest
from hypothesis import given
from hypothesis import strategies as st

from m2cp.trajectory import (
    INFINITY,
    DistributedSystem,
    EnumerationLimitError,
    LatticeError,
    Length,
    Trajectory,
    TrajectoryError,
    concat,
    decompose,
    enumerate_trajectories,
    gamma,
    induced_q_sequence,
    is_trajectory,
    join,
    meet,
    prefix_lengths,
    subtrajectory_lattice,
)

from strategies import SYSTEM, trajectories


def t(w1: str, w2: str) -> Trajectory:
    return SYSTEM.trajectory(w1, w2)


class TestSystem:
    def test_shared_states_follow_site_one_order(self):
        s = DistributedSystem(("d", "a", "c"), ("c", "e", "d"))
        assert s.q == ("d", "c")

    @pytest.mark.parametrize(
        "s1, s2, msg",
        [
            ((), ("c",), "empty"),
            (("a", "a"), ("c", "e"), "repeated"),
            (("a", "c"), ("c",), "private"),
            (("a",), ("e",), "no shared"),
        ],
    )
    def test_rejects_bad_alphabets(self, s1, s2, msg):
        with pytest.raises(ValueError, match=msg):
            DistributedSystem(s1, s2)

    def test_empty_q_behind_flag(self):
        s = DistributedSystem(("a",), ("e",), allow_empty_q=True)
        assert s.q == () and s.x0() == (("a", "e"),)

    def test_x0_excludes_disagreeing_shared_pairs(self):
        x0 = SYSTEM.x0()
        assert ("c", "d") not in x0 and ("c", "c") in x0 and ("a", "d") in x0
        assert len(x0) == 14


class TestQSequence:
    @pytest.mark.parametrize(
        "word, site, expected",
        [
            ("acbabbd", 1, ("c", "d")),
            ("", 1, ()),
            ("efcfd", 2, ("c", "d")),
        ],
    )
    def test_induced(self, word, site, expected):
        assert induced_q_sequence(tuple(word), SYSTEM) == expected

    @pytest.mark.parametrize("w1, w2, ok", [("ac", "efc", True), ("", "", True), ("ac", "ef", False)])
    def test_is_trajectory(self, w1, w2, ok):
        assert is_trajectory(tuple(w1), tuple(w2), SYSTEM) is ok

    def test_construction_rejects_mismatch(self):
        with pytest.raises(TrajectoryError, match="differ"):
            t("ac", "ef")

    def test_construction_rejects_foreign_state(self):
        with pytest.raises(TrajectoryError, match="site-1 alphabet"):
            t("ae", "e")


class TestGamma:
    def test_empty_keeps_start(self):
        assert gamma(("a", "e"), SYSTEM.empty()) == ("a", "e")

    def test_elementary_ends_diagonal(self):
        assert gamma(("b", "f"), t("ac", "efc")) == ("c", "c")

    def test_two_sync_trajectory(self):
        assert gamma(("a", "e"), t("abcad", "ecefd")) == ("d", "d")

    def test_one_sided(self):
        assert gamma(("b", "f"), t("a", "")) == ("a", "f")


class TestConcat:
    def test_componentwise(self):
        assert concat(t("a", "e"), t("bc", "c")) == t("abc", "ec")

    def test_identity(self):
        s = t("abc", "ec")
        assert s * SYSTEM.empty() == s and SYSTEM.empty() * s == s

    def test_concat_of_pieces(self):
        assert t("a", "e") * t("bc", "c") * t("ad", "efd") == t("abcad", "ecefd")

    @given(trajectories(), trajectories())
    def test_lengths_add(self, s, u):
        assert (s * u).length == s.length + u.length


class TestLength:
    def test_componentwise_order(self):
        assert Length(1, 2) <= Length(1, 3)
        assert not Length(2, 1) <= Length(1, 3)
        assert not Length(1, 3) <= Length(2, 1)

    def test_infinity_is_top(self):
        assert Length(10**6, 10**6) <= INFINITY
        assert not INFINITY <= Length(0, 0)
        assert Length(1, 1) + INFINITY is INFINITY


SMALL_LATTICE = [("", ""), ("a", ""), ("", "e"), ("", "ef"), ("a", "e"), ("a", "ef"), ("ac", "efc")]


class TestLattice:
    def test_small_elements(self):
        got = subtrajectory_lattice(t("ac", "efc"))
        assert sorted((s.w1, s.w2) for s in got) == sorted((tuple(a), tuple(b)) for a, b in SMALL_LATTICE)

    def test_small_meets_and_joins(self):
        assert meet(t("a", ""), t("", "e")) == SYSTEM.empty()
        assert join(t("a", ""), t("", "e")) == t("a", "e")
        assert join(t("a", "ef"), t("ac", "efc")) == t("ac", "efc")

    def test_empty(self):
        assert subtrajectory_lattice(SYSTEM.empty()) == [SYSTEM.empty()]

    def test_sync_free_has_every_prefix_pair(self):
        assert len(subtrajectory_lattice(t("ab", "e"))) == 6

    def test_limit(self):
        with pytest.raises(EnumerationLimitError):
            subtrajectory_lattice(t("ab", "ef"), limit=3)

    def test_witness_required_for_unrelated(self):
        v = t("ac", "efc")
        with pytest.raises(LatticeError):
            meet(t("b", ""), t("a", ""), witness=v)

    def test_incomparable_components(self):
        with pytest.raises(LatticeError):
            join(t("a", ""), t("b", ""))

    @given(trajectories(max_syncs=2, max_private=2))
    def test_lattice_laws(self, v):
        elems = subtrajectory_lattice(v)
        members = set(elems)
        for x, y in product(elems, repeat=2):
            m, j = meet(x, y), join(x, y)
            assert m in members and j in members
            assert m == meet(y, x) and j == join(y, x)
            assert meet(x, j) == x and join(x, m) == x
        for x, y, z in product(elems[:6], repeat=3):
            assert meet(meet(x, y), z) == meet(x, meet(y, z))
            assert join(join(x, y), z) == join(x, join(y, z))
        assert all(meet(x, x) == x for x in elems)

    @given(trajectories(max_syncs=2, max_private=2))
    def test_lattice_matches_brute_force(self, v):
        brute = {
            (m, n)
            for m in range(len(v.w1) + 1)
            for n in range(len(v.w2) + 1)
            if is_trajectory(v.w1[:m], v.w2[:n], SYSTEM)
        }
        assert set(prefix_lengths(v)) == brute


class TestDecompose:
    def test_two_sync(self):
        d = decompose(t("abcad", "ecefd"))
        assert d.elementary == (t("abc", "ec"), t("ad", "efd"))
        assert d.tail == SYSTEM.empty()
        assert d.targets == ("c", "d")

    def test_sync_free(self):
        s = t("ab", "fe")
        d = decompose(s)
        assert d.elementary == () and d.tail == s

    def test_single(self):
        d = decompose(t("ac", "efc"))
        assert d.elementary == (t("ac", "efc"),) and d.tail.is_empty()

    @given(trajectories())
    def test_round_trip(self, s):
        d = decompose(s)
        assert d.recompose() == s
        assert all(e.is_elementary() for e in d.elementary)
        assert d.tail.is_sync_free()

    @given(trajectories(max_syncs=3), st.data())
    def test_other_cuts_fail(self, s, data):
        d = decompose(s)
        if not d.elementary:
            return
        cuts = []
        m = n = 0
        for e in d.elementary:
            m += len(e.w1)
            n += len(e.w2)
            cuts.append((m, n))
        k = data.draw(st.integers(0, len(cuts) - 1))
        dm, dn = data.draw(st.sampled_from([(1, 0), (-1, 0), (0, 1), (0, -1)]))
        bad = list(cuts)
        bad[k] = (cuts[k][0] + dm, cuts[k][1] + dn)
        prev = (0, 0)
        ok = True
        for a, b in bad:
            w1, w2 = s.w1[prev[0] : a], s.w2[prev[1] : b]
            if a < prev[0] or b < prev[1] or a > len(s.w1) or b > len(s.w2):
                ok = False
                break
            try:
                piece = Trajectory(w1, w2, SYSTEM)
            except TrajectoryError:
                ok = False
                break
            ok = ok and piece.is_elementary()
            prev = (a, b)
        assert not ok


def test_enumeration_is_deterministic_and_complete():
    ts = enumerate_trajectories(SYSTEM, 2)
    assert ts == enumerate_trajectories(SYSTEM, 2)
    brute = {
        (w1, w2)
        for k in range(3)
        for l in range(3)
        for w1 in product(SYSTEM.s1, repeat=k)
        for w2 in product(SYSTEM.s2, repeat=l)
        if is_trajectory(w1, w2, SYSTEM)
    }
    assert {(s.w1, s.w2) for s in ts} == brute
    totals = [len(s.w1) + len(s.w2) for s in ts]
    assert totals == sorted(totals)
