from __future__ import annotations

import pytest

from m2cp.consistency import markov_consistency_report
from m2cp.model import replace_row
from m2cp.trajectory import EnumerationLimitError, gamma


@pytest.mark.parametrize("start", [("c", "c"), ("a", "e")])
def test_conditioned_family_is_markov(product, start):
    rep = markov_consistency_report(product, start, 2, 2)
    assert rep.ok and rep.n_comparisons > 0


def test_renormalized_family_violates(renormalized):
    rep = markov_consistency_report(renormalized, ("c", "c"), 2, 2)
    assert not rep.ok
    v = rep.violations[0]
    assert v.reference_value != v.value
    assert gamma(("c", "c"), v.prefix) == gamma(("c", "c"), v.reference)


def test_modified_family_report(renormalized):
    mod = replace_row(renormalized, 1, "c", "b", [0, 0, 1])
    rep = markov_consistency_report(mod, ("c", "c"), 2, 2)
    # recorded, whatever the verdict
    assert rep.to_json()["violation_count"] == len(rep.violations)


def test_singleton_q_is_markov(singleton):
    assert markov_consistency_report(singleton, ("c", "c"), 2, 2).ok


def test_toy_is_markov(toy):
    assert markov_consistency_report(toy, ("c", "c"), 3, 3).ok


def test_deterministic(renormalized):
    a = markov_consistency_report(renormalized, ("c", "c"), 2, 1).to_json()
    b = markov_consistency_report(renormalized, ("c", "c"), 2, 1).to_json()
    assert a == b


def test_budget(product):
    with pytest.raises(EnumerationLimitError):
        markov_consistency_report(product, ("c", "c"), 2, 2, budget=10)
