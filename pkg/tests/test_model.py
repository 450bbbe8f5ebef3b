import itertools

import numpy as np
import pytest

from tmrmodel.builder import build_chain, label_states
from tmrmodel.model import (
    ComposedCtmc, Dfg, Node, PartitionPlan, PartitionRates, RateParams, validate,
)


def small_dfg():
    return Dfg((Node("m1", "multiplier"), Node("m2", "multiplier"), Node("a1", "adder")),
               (("m1", "a1"), ("m2", "a1")))


def test_valid_dfg_has_no_violations():
    assert validate(small_dfg()) == []


def test_edge_to_missing_node_named():
    dfg = Dfg(small_dfg().nodes, (("m1", "a1"), ("m9", "a1")))
    problems = validate(dfg)
    assert len(problems) == 1
    assert "m9" in problems[0].message and problems[0].element == "m9"


def test_duplicate_ids_and_cycles():
    dup = Dfg((Node("x", "adder"), Node("x", "adder")))
    assert [v.invariant for v in validate(dup)] == ["unique-ids"]
    cyc = Dfg((Node("a", "adder"), Node("b", "adder")), (("a", "b"), ("b", "a")))
    assert [v.invariant for v in validate(cyc)] == ["acyclic"]


def test_plan_missing_node_is_one_coverage_violation():
    plan = PartitionPlan((("m1",), ("a1",)))
    problems = validate(plan, dfg=small_dfg())
    assert [v.invariant for v in problems] == ["coverage"]
    assert problems[0].element == "m2"


def test_plan_backward_edge_and_overlap():
    dfg = small_dfg()
    backwards = PartitionPlan((("a1",), ("m1", "m2")))
    assert {v.invariant for v in validate(backwards, dfg=dfg)} == {"topological-order"}
    overlap = PartitionPlan((("m1", "m2"), ("m2", "a1")))
    assert [v.invariant for v in validate(overlap, dfg=dfg)] == ["disjoint"]


def test_ninety_nine_to_one_alpha_split_is_valid():
    assert validate(RateParams(alpha_scu=0.99, alpha_dcu=0.01)) == []


def test_bad_rate_params():
    invariants = {v.invariant for v in validate(RateParams(alpha_scu=0.5, alpha_dcu=0.1, mu=-1))}
    assert invariants == {"alpha-sum", "nonnegative-rates"}


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_up_labeling_brute_force(n):
    rates = [PartitionRates(1e-3, 1e-3)] * n
    chain = build_chain(rates, 0.1, "scu_only")
    assert chain.n_states == 3 ** n
    for i, state in enumerate(itertools.product((1, 2, 3), repeat=n)):
        assert chain.states[i] == state
        up = all(s in (2, 3) for s in state)
        assert chain.label("up")[i] == up
        assert chain.label("down")[i] == (not up)
        assert chain.label("operational")[i] == all(s == 3 for s in state)
    assert validate(chain) == []


def test_labels_are_read_only():
    chain = build_chain([PartitionRates(1.0, 1.0)], 10.0, "scu_only")
    with pytest.raises(ValueError):
        chain.label("up")[0] = True


def test_generator_rows_sum_to_zero_and_self_loops_drop_out():
    chain = build_chain([PartitionRates(1.0, 1.0)] * 2, 10.0, "combined")
    Q = chain.generator().toarray()
    np.testing.assert_allclose(Q.sum(axis=1), 0.0, atol=1e-12)
    oper = chain.initial_index
    assert chain.rate_matrix[oper, oper] == 10.0
    assert Q[oper, oper] == pytest.approx(-Q[oper].sum() + Q[oper, oper])


def test_generic_chain_wrapper():
    c = ComposedCtmc.from_rate_matrix([[0, 1], [2, 0]], labels={"up": [True, False]})
    assert c.n_states == 2 and c.index((1,)) == 1
    np.testing.assert_allclose(c.exit_rates(), [1, 2])
    assert validate(c) == []
