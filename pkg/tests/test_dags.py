import numpy as np
import pytest

import oracles
from conftest import (
    TWO_MEDIATOR_POLICY,
    counterexample_deviation,
    random_problem,
    realize_state_policy,
)
from phiregret import (
    DecisionDAG,
    best_reduced_strategy,
    build_dt_problem,
    forward_flow,
    hypercube_problem,
    interleave,
    terminal_weights,
)
from phiregret.dags import (
    deviation_polynomial,
    dual_problem,
    eval_dt_deviation,
    evaluate_deviation,
    follow_identity_policy,
    policy_from_choices,
    uniform_policy,
)
from phiregret.errors import CapacityError, StructureError
from phiregret.maps import SupportMix
from phiregret.tfsdp import bits_to_point, hypercube_structure

def test_dual_swaps_kinds(two_stage):
    dual = dual_problem(two_stage)
    assert dual.kind[0] == "O"
    assert dual.kind[2] == "D"
    assert dual.n_terminals == two_stage.n_terminals
    back = dual_problem(dual)
    assert back.dump().splitlines()[1:] == two_stage.dump().splitlines()[1:]


def test_duality_pairing(two_stage):
    xs = two_stage.enumerate_pure_strategies()
    ys = dual_problem(two_stage).enumerate_pure_strategies()
    pairings = xs @ ys.T
    assert np.array_equal(pairings, np.ones_like(pairings))


def test_interleave_zero_mediators_is_the_base_tree(two_stage):
    dag = interleave(two_stage, 0)
    assert dag.count_pure_reduced() == 5
    assert all(len(m) == 0 for m in dag.terminal_mono)
    # reduced strategies are exactly the constant deviations = pure strategies
    vecs = oracles.pure_reduced_vectors(dag)
    outs = set()
    for q in vecs:
        img = evaluate_deviation(dag, q, np.zeros(5))
        outs.add(tuple(map(int, img)))
    pure = {tuple(map(int, y)) for y in two_stage.enumerate_pure_strategies()}
    assert outs == pure


def test_interleave_states_are_topological(two_stage):
    dag = interleave(two_stage, 2)
    for s in range(dag.n_states):
        for c in dag.edges[s]:
            assert c > s


def test_follow_the_mediator_is_identity(two_stage, hypercube2):
    rng = np.random.default_rng(12)
    for p in (two_stage, hypercube2, random_problem(rng)):
        dag = interleave(p, 1)
        flow = forward_flow(dag, follow_identity_policy(dag))
        flow.validate()
        q = flow.terminal_vector()
        for y in p.enumerate_pure_strategies():
            assert np.allclose(evaluate_deviation(dag, q, y), y, atol=1e-12)


def test_two_mediator_policy_realizes_counterexample(two_stage):
    dag = interleave(two_stage, 2)
    phi = counterexample_deviation()
    q = realize_state_policy(dag, TWO_MEDIATOR_POLICY)
    for y in two_stage.enumerate_pure_strategies():
        assert np.allclose(evaluate_deviation(dag, q, y), phi.eval_point(y), atol=1e-12)


def test_best_reduced_strategy_matches_enumeration():
    rng = np.random.default_rng(13)
    dags = [
        interleave(hypercube_problem(1), 1),
        interleave(hypercube_problem(2), 1),
        build_dt_problem(2, 1),
    ]
    for dag in dags:
        for _ in range(3):
            w = rng.normal(size=dag.n_terminal_states)
            val, strategy = best_reduced_strategy(dag, w)
            strategy.validate()
            assert val == pytest.approx(strategy.terminal_vector() @ w, abs=1e-9)
            assert val == pytest.approx(
                oracles.best_pure_reduced_value(dag, w), abs=1e-9
            )


def test_best_reduced_strategy_dominates_random_policies(two_stage):
    rng = np.random.default_rng(19)
    for dag in (interleave(two_stage, 1), build_dt_problem(2, 2)):
        for _ in range(5):
            w = rng.normal(size=dag.n_terminal_states)
            val, strategy = best_reduced_strategy(dag, w)
            assert val == pytest.approx(strategy.terminal_vector() @ w, abs=1e-9)
            for _ in range(100):
                choices = {
                    s: int(rng.integers(len(dag.edges[s]))) for s in dag.decision_states
                }
                q = forward_flow(dag, policy_from_choices(dag, choices)).terminal_vector()
                assert float(q @ w) <= val + 1e-9


def test_forward_flow_validates(two_stage):
    dag = interleave(two_stage, 1)
    forward_flow(dag, uniform_policy(dag)).validate()
    rng = np.random.default_rng(14)
    for _ in range(5):
        choices = {s: int(rng.integers(len(dag.edges[s]))) for s in dag.decision_states}
        forward_flow(dag, policy_from_choices(dag, choices)).validate()


def test_mediator_deviations_have_bounded_degree(two_stage):
    rng = np.random.default_rng(15)
    for k in (1, 2):
        dag = interleave(two_stage, k)
        choices = {s: int(rng.integers(len(dag.edges[s]))) for s in dag.decision_states}
        q = forward_flow(dag, policy_from_choices(dag, choices)).terminal_vector()
        poly = deviation_polynomial(dag, q)
        assert poly.degree <= k
        x = two_stage.random_point(rng)
        assert np.allclose(poly.eval_point(x), evaluate_deviation(dag, q, x), atol=1e-12)


def test_mediator_deviations_map_pure_into_polytope(two_stage):
    """Any reduced strategy of the interleaving gives a valid deviation."""
    rng = np.random.default_rng(16)
    dag = interleave(two_stage, 2)
    for _ in range(10):
        choices = {s: int(rng.integers(len(dag.edges[s]))) for s in dag.decision_states}
        q = forward_flow(dag, policy_from_choices(dag, choices)).terminal_vector()
        for y in two_stage.enumerate_pure_strategies():
            two_stage.require_membership(evaluate_deviation(dag, q, y))


def test_query_tree_swaps_bits():
    dag = build_dt_problem(2, 1)
    pairs = hypercube_structure(dag.base)
    # depth-1 trees include every coordinate swap: find the strategy mapping
    # output bit j to input bit 1-j by scoring the matching terminal states
    w = np.zeros(dag.n_terminal_states)
    for slot in range(dag.n_terminal_states):
        out_coord = int(dag.terminal_out[slot])
        mono = dag.terminal_mono[slot]
        j = 0 if out_coord in (pairs[0][0], pairs[0][1]) else 1
        want_set = pairs[1 - j][1] if out_coord in (pairs[j][1],) else None
        if want_set is not None and mono == frozenset([want_set]):
            w[slot] = 1.0
    _, strategy = best_reduced_strategy(dag, w)
    q = strategy.terminal_vector()
    for bits in ([0, 0], [0, 1], [1, 0], [1, 1]):
        out = eval_dt_deviation(dag, q, bits)
        assert np.allclose(out, bits[::-1], atol=1e-12)


def test_query_tree_matches_point_evaluation():
    rng = np.random.default_rng(17)
    dag = build_dt_problem(3, 2)
    pairs = hypercube_structure(dag.base)
    for _ in range(5):
        choices = {s: int(rng.integers(len(dag.edges[s]))) for s in dag.decision_states}
        q = forward_flow(dag, policy_from_choices(dag, choices)).terminal_vector()
        bits = rng.integers(0, 2, size=3)
        via_bits = eval_dt_deviation(dag, q, bits)
        via_point = evaluate_deviation(dag, q, bits_to_point(pairs, bits))
        assert np.allclose(via_bits, via_point[1::2], atol=1e-12)


def test_terminal_weights_charging_identity(two_stage):
    """<w, q> must equal <u, E_pi[phi_q(x)]>: the linear utility handed to
    the inner learner scores deviations exactly."""
    rng = np.random.default_rng(18)
    dag = interleave(two_stage, 2)
    pure = two_stage.enumerate_pure_strategies()
    for _ in range(8):
        choices = {s: int(rng.integers(len(dag.edges[s]))) for s in dag.decision_states}
        q = forward_flow(dag, policy_from_choices(dag, choices)).terminal_vector()
        picks = rng.integers(0, len(pure), size=3)
        alphas = rng.dirichlet(np.ones(3))
        pi = SupportMix([(a, pure[i]) for a, i in zip(alphas, picks)])
        u = rng.normal(size=5)
        w = terminal_weights(dag, u, pi)
        expected_image = sum(
            a * evaluate_deviation(dag, q, pure[i]) for a, i in zip(alphas, picks)
        )
        assert float(w @ q) == pytest.approx(float(u @ expected_image), abs=1e-9)


def test_state_caps_raise():
    with pytest.raises(CapacityError):
        interleave(hypercube_problem(4), 2, cap=50)
    with pytest.raises(CapacityError):
        build_dt_problem(4, 3, cap=50)


def test_non_topological_order_rejected(two_stage):
    with pytest.raises(StructureError, match="topological"):
        DecisionDAG(
            "broken", two_stage,
            states=["a", "b"], kind=["D", "T"],
            edges=[(1,), (0,)], edge_moves=[(("x", 0),), (("x", 0),)],
            payload={1: (0, frozenset())},
        )
