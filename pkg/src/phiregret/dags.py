"""Deviation families realized as decision DAGs.

Two constructions share one container. Interleaving runs the base problem
against k mediator copies of its dual, advancing one component per move; its
reduced strategies realize degree-k polynomial deviations. The query tree
observes an output coordinate, adaptively queries up to k input bits, and
picks a final bit; its reduced strategies are the depth-k decision-tree
deviations over a hypercube problem.

Every terminal state carries an output coordinate of the base problem plus a
monomial (a set of base terminal indices). A reduced strategy q then realizes
the deviation phi_q(x)[z] = sum over terminal states t with output z of
q[t] * prod_{i in mono(t)} x[i], so evaluation, polynomial export and
utility-weight computation are the same code for both families.
"""

from __future__ import annotations

import collections
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, StructureError
from .polynomials import PolynomialDeviation
from .tfsdp import (
    DECISION,
    OBSERVATION,
    TERMINAL,
    DecisionProblem,
    NodeRow,
    hypercube_problem,
)

STATE_CAP = 200_000


def dual_problem(problem):
    """The same tree with decision and observation points swapped.

    Node ids, order and terminals are preserved, so the dual's strategy
    vectors pair coordinate-for-coordinate with the original's and applying
    the construction twice restores the original node-for-node. Observation
    points with a single branch become single-action decision points, which
    the constructor allows here.
    """
    swap = {DECISION: OBSERVATION, OBSERVATION: DECISION, TERMINAL: TERMINAL}
    rows = [
        NodeRow(
            problem.node_ids[i],
            swap[problem.kind[i]],
            None if problem.parent[i] < 0 else problem.node_ids[problem.parent[i]],
            problem.edge_label[i],
        )
        for i in range(problem.n_nodes)
    ]
    name = (
        problem.name[:-5]
        if problem.name.endswith("~dual")
        else problem.name + "~dual"
    )
    return DecisionProblem(rows, name=name, min_decision_branching=1)


class DecisionDAG:
    """Acyclic decision/observation/terminal state graph with shared states.

    States are stored in topological order (root first). ``edges[s]`` lists
    child state indices and ``edge_moves[s]`` the per-edge advance labels.
    ``terminal_out``/``terminal_mono`` give each terminal state's output
    coordinate and monomial over the base problem's terminals.
    """

    def __init__(self, family, base, states, kind, edges, edge_moves, payload):
        self.family = family
        self.base = base
        self.states = states
        self.kind = kind
        self.edges = edges
        self.edge_moves = edge_moves
        self.n_states = len(states)
        self.root = 0
        self.topo = list(range(self.n_states))
        self.terminal_states = np.array(
            [i for i in range(self.n_states) if kind[i] == TERMINAL], dtype=int
        )
        self.n_terminal_states = len(self.terminal_states)
        self.terminal_slot = {int(s): i for i, s in enumerate(self.terminal_states)}
        self.terminal_out = np.array(
            [payload[int(s)][0] for s in self.terminal_states], dtype=int
        )
        self.terminal_mono = [payload[int(s)][1] for s in self.terminal_states]
        self.decision_states = [
            i for i in range(self.n_states) if kind[i] == DECISION
        ]
        for s in range(self.n_states):
            for c in edges[s]:
                if c <= s:
                    raise StructureError("state order is not topological")

    def count_pure_reduced(self):
        totals = [0] * self.n_states
        for s in range(self.n_states - 1, -1, -1):
            if self.kind[s] == TERMINAL:
                totals[s] = 1
            elif self.kind[s] == DECISION:
                totals[s] = sum(totals[c] for c in self.edges[s])
            else:
                prod = 1
                for c in self.edges[s]:
                    prod *= totals[c]
                totals[s] = prod
        return totals[self.root]

    def dump(self):
        lines = [f"dag {self.family} states={self.n_states}"]
        for s in range(self.n_states):
            edge_txt = " ".join(
                f"{c}:{move}" for c, move in zip(self.edges[s], self.edge_moves[s])
            )
            lines.append(f"{s} {self.kind[s]} {self.states[s]} {edge_txt}".rstrip())
        return "\n".join(lines)

    def __repr__(self):
        return (
            f"DecisionDAG({self.family!r}, states={self.n_states}, "
            f"terminals={self.n_terminal_states})"
        )


def _sorted_dag(family, base, raw_states, raw_kind, raw_edges, raw_moves,
                payload_by_tmp, level):
    order = sorted(range(len(raw_states)), key=lambda i: (level[i], i))
    rank = {tmp: pos for pos, tmp in enumerate(order)}
    states = [raw_states[i] for i in order]
    kind = [raw_kind[i] for i in order]
    edges = [tuple(rank[c] for c in raw_edges[i]) for i in order]
    moves = [tuple(raw_moves[i]) for i in order]
    payload = {rank[tmp]: pl for tmp, pl in payload_by_tmp.items()}
    return DecisionDAG(family, base, states, kind, edges, moves, payload)


def interleave(problem, k, cap=STATE_CAP):
    """Product DAG of the problem and k mediator copies of its dual.

    A state is one node per component. It is terminal when every component
    is; it is an observation state when any component sits at an observation
    point of its own tree, and then every such component advances at once,
    one child combination per edge (several can be at observation points only
    in the root state); otherwise the player picks a single component at a
    decision point and one of its children.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    dual = dual_problem(problem)
    components = [problem] + [dual] * k
    depth_in_tree = np.zeros(problem.n_nodes, dtype=int)
    for node in range(problem.n_nodes):
        if problem.parent[node] >= 0:
            depth_in_tree[node] = depth_in_tree[problem.parent[node]] + 1

    root = tuple([problem.root] * (k + 1))
    index = {root: 0}
    raw_states = [root]
    raw_kind = []
    raw_edges = []
    raw_moves = []
    payload = {}
    queue = collections.deque([0])
    while queue:
        idx = queue.popleft()
        state = raw_states[idx]
        kinds = [components[i].kind[state[i]] for i in range(k + 1)]
        while len(raw_kind) <= idx:
            raw_kind.append(None)
            raw_edges.append(())
            raw_moves.append(())
        if all(kd == TERMINAL for kd in kinds):
            raw_kind[idx] = TERMINAL
            out = int(problem.terminal_index[state[0]])
            mono = frozenset(
                int(problem.terminal_index[state[i]]) for i in range(1, k + 1)
            )
            payload[idx] = (out, mono)
            continue
        obs = [i for i, kd in enumerate(kinds) if kd == OBSERVATION]
        if obs:
            raw_kind[idx] = OBSERVATION
            combos = [((),)]

            def advance(combo_list, comp):
                return [
                    c + ((comp, child),)
                    for c in combo_list
                    for child in components[comp].children[state[comp]]
                ]

            combos = [()]
            for comp in obs:
                combos = advance(combos, comp)
            moves = combos
        else:
            raw_kind[idx] = DECISION
            moves = [
                ((comp, child),)
                for comp, kd in enumerate(kinds)
                if kd == DECISION
                for child in components[comp].children[state[comp]]
            ]
        children = []
        for move in moves:
            nxt = list(state)
            for comp, child in move:
                nxt[comp] = child
            nxt = tuple(nxt)
            if nxt not in index:
                if len(raw_states) >= cap:
                    raise CapacityError(
                        f"interleaving exceeds {cap} states; reduce k or the problem"
                    )
                index[nxt] = len(raw_states)
                raw_states.append(nxt)
                queue.append(index[nxt])
            children.append(index[nxt])
        raw_edges[idx] = tuple(children)
        raw_moves[idx] = tuple(moves)

    level = [int(sum(depth_in_tree[n] for n in st)) for st in raw_states]
    dag = _sorted_dag(
        "mediator", problem, raw_states, raw_kind, raw_edges, raw_moves, payload, level
    )
    dag.k = k
    dag.components = components
    return dag


def build_dt_problem(n_bits, k, distinct=False, cap=STATE_CAP):
    """Depth-k query-tree deviation problem over an n-bit hypercube.

    The deviator observes which output bit is being decided, adaptively
    queries up to k input bits (all of them when unconstrained; with
    ``distinct`` each query must differ from the observed index and earlier
    queries, stopping early when none remain), then commits the output bit.
    Terminal states record the full history, so without the distinctness
    constraint there are exactly n^(k+1) * 2^(k+1) of them.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    base = hypercube_problem(n_bits)
    raw_states = []
    raw_kind = []
    raw_edges = []
    raw_moves = []
    payload = {}
    level = []

    def add_state(state, kind, lvl):
        if len(raw_states) >= cap:
            raise CapacityError(f"query tree exceeds {cap} states")
        raw_states.append(state)
        raw_kind.append(kind)
        raw_edges.append(())
        raw_moves.append(())
        level.append(lvl)
        return len(raw_states) - 1

    def available_queries(j0, replies):
        if not distinct:
            return list(range(n_bits))
        used = {j0} | {j for j, _ in replies}
        return [j for j in range(n_bits) if j not in used]

    def build_branch(j0, replies, lvl):
        """Decision stage after the given replies; returns the state index."""
        queries = available_queries(j0, replies) if len(replies) < k else []
        if queries:
            idx = add_state((j0, replies, "query"), DECISION, lvl)
            children = []
            moves = []
            for j in queries:
                reply = add_state((j0, replies, ("asked", j)), OBSERVATION, lvl + 1)
                kids = []
                for a in (0, 1):
                    kids.append(build_branch(j0, replies + ((j, a),), lvl + 2))
                raw_edges[reply] = tuple(kids)
                raw_moves[reply] = (("reply", j, 0), ("reply", j, 1))
                children.append(reply)
                moves.append(("query", j))
            raw_edges[idx] = tuple(children)
            raw_moves[idx] = tuple(moves)
            return idx
        idx = add_state((j0, replies, "act"), DECISION, lvl)
        kids = []
        for a0 in (0, 1):
            t = add_state((j0, replies, ("end", a0)), TERMINAL, lvl + 1)
            payload[t] = (
                2 * j0 + a0,
                frozenset(2 * j + a for j, a in replies),
            )
            kids.append(t)
        raw_edges[idx] = tuple(kids)
        raw_moves[idx] = (("act", 0), ("act", 1))
        return idx

    root = add_state(("start",), OBSERVATION, 0)
    branches = []
    for j0 in range(n_bits):
        branches.append(build_branch(j0, (), 1))
    raw_edges[root] = tuple(branches)
    raw_moves[root] = tuple(("observe", j0) for j0 in range(n_bits))

    # Depth in the history tree is already a valid topological level, but the
    # recursion appends parents before children, so identity order works too.
    dag = _sorted_dag(
        "query-tree", base, raw_states, raw_kind, raw_edges, raw_moves, payload,
        list(range(len(raw_states))),
    )
    dag.k = k
    dag.n_bits = n_bits
    dag.distinct = distinct
    return dag


@dataclass
class ReducedStrategy:
    """Flow over a decision DAG: per-state mass and per-edge mass."""

    dag: DecisionDAG
    state_mass: np.ndarray
    edge_mass: list

    def terminal_vector(self):
        return self.state_mass[self.dag.terminal_states].copy()

    def validate(self, tol=1e-9):
        dag = self.dag
        if abs(self.state_mass[dag.root] - 1.0) > tol:
            raise StructureError(
                f"root mass {self.state_mass[dag.root]:.12g} != 1"
            )
        incoming = np.zeros(dag.n_states)
        incoming[dag.root] = self.state_mass[dag.root]
        for s in range(dag.n_states):
            mass = self.state_mass[s]
            em = self.edge_mass[s]
            if dag.kind[s] == DECISION:
                if np.min(em, initial=0.0) < -tol:
                    raise StructureError(f"negative edge mass at state {s}")
                if em.size and abs(np.sum(em) - mass) > tol:
                    raise StructureError(
                        f"decision state {s}: edges carry {np.sum(em):.12g}, "
                        f"state holds {mass:.12g}"
                    )
            elif dag.kind[s] == OBSERVATION:
                for m in em:
                    if abs(m - mass) > tol:
                        raise StructureError(
                            f"observation state {s}: edge carries {m:.12g}, "
                            f"state holds {mass:.12g}"
                        )
            for c, m in zip(dag.edges[s], em):
                incoming[c] += m
        if np.max(np.abs(incoming - self.state_mass)) > tol:
            bad = int(np.argmax(np.abs(incoming - self.state_mass)))
            raise StructureError(
                f"state {bad}: incoming {incoming[bad]:.12g} != "
                f"stored {self.state_mass[bad]:.12g}"
            )
        return self


def forward_flow(dag, policy):
    """Push unit mass from the root through the DAG.

    ``policy`` maps a decision state index to either an edge index or a
    distribution over that state's edges. Observation states copy their mass
    to every child; decision states split it.
    """
    state_mass = np.zeros(dag.n_states)
    state_mass[dag.root] = 1.0
    edge_mass = []
    for s in range(dag.n_states):
        n_edges = len(dag.edges[s])
        em = np.zeros(n_edges)
        mass = state_mass[s]
        if n_edges and mass != 0.0:
            if dag.kind[s] == OBSERVATION:
                em[:] = mass
            else:
                choice = policy(s)
                if np.isscalar(choice):
                    em[int(choice)] = mass
                else:
                    em[:] = mass * np.asarray(choice, dtype=float)
        elif n_edges:
            em[:] = 0.0
        for c, m in zip(dag.edges[s], em):
            state_mass[c] += m
        edge_mass.append(em)
    return ReducedStrategy(dag, state_mass, edge_mass)


def policy_from_choices(dag, choices, default=0):
    """Policy callable from a {decision state: edge index} table."""

    def policy(s):
        return choices.get(s, default)

    return policy


def uniform_policy(dag):
    def policy(s):
        n = len(dag.edges[s])
        return np.full(n, 1.0 / n)

    return policy


def best_reduced_strategy(dag, weights):
    """Max of <weights, q> over reduced strategies, with an argmax.

    Backward induction: terminal states score their weight, observation
    states add their children, decision states take the best child (ties to
    the lowest edge). Exact for any weights because the objective is linear
    over the flow polytope, whose vertices are the pure reduced strategies.
    """
    weights = np.asarray(weights, dtype=float)
    value = np.zeros(dag.n_states)
    choice = {}
    for s in range(dag.n_states - 1, -1, -1):
        kd = dag.kind[s]
        if kd == TERMINAL:
            value[s] = weights[dag.terminal_slot[s]]
        elif kd == OBSERVATION:
            value[s] = sum(value[c] for c in dag.edges[s])
        else:
            best = 0
            for e, c in enumerate(dag.edges[s]):
                if value[c] > value[dag.edges[s][best]]:
                    best = e
            choice[s] = best
            value[s] = value[dag.edges[s][best]]
    strategy = forward_flow(dag, policy_from_choices(dag, choice))
    return float(value[dag.root]), strategy


def evaluate_deviation(dag, q, x):
    """Image of x under the deviation realized by terminal masses q.

    Output coordinate z collects q[t] * prod_{i in mono(t)} x[i] over the
    terminal states t writing to z.
    """
    q = np.asarray(q, dtype=float)
    x = np.asarray(x, dtype=float)
    out = np.zeros(dag.base.n_terminals)
    for slot in range(dag.n_terminal_states):
        m = q[slot]
        if m == 0.0:
            continue
        for i in dag.terminal_mono[slot]:
            m *= x[i]
        out[dag.terminal_out[slot]] += m
    return out


def eval_dt_deviation(dag, q, bits):
    """Query-tree deviation applied to a bit vector, returned as bits.

    Literal (j, a) reads x[j] when a = 1 and 1 - x[j] otherwise; the output
    bit for coordinate j is the mass the strategy puts on committing 1 there.
    """
    bits = np.asarray(bits, dtype=float)
    point = np.empty(2 * dag.n_bits)
    point[1::2] = bits
    point[0::2] = 1.0 - bits
    image = evaluate_deviation(dag, q, point)
    return image[1::2]


def deviation_polynomial(dag, q):
    """The deviation's exact multilinear form over base terminal coordinates."""
    q = np.asarray(q, dtype=float)
    outputs = [[] for _ in range(dag.base.n_terminals)]
    for slot in range(dag.n_terminal_states):
        if q[slot] != 0.0:
            outputs[dag.terminal_out[slot]].append((q[slot], dag.terminal_mono[slot]))
    return PolynomialDeviation(dag.base.n_terminals, outputs)


def terminal_weights(dag, u, pi):
    """Utility over reduced strategies induced by utility u and mixture pi.

    w[t] = u[out(t)] * E_pi[prod_{i in mono(t)} x[i]], so that <w, q> equals
    <u, E_pi[phi_q(x)]> for every reduced strategy q.
    """
    u = np.asarray(u, dtype=float)
    w = np.empty(dag.n_terminal_states)
    for slot in range(dag.n_terminal_states):
        coeff = u[dag.terminal_out[slot]]
        w[slot] = (
            coeff * pi.monomial_expectation(dag.terminal_mono[slot])
            if coeff != 0.0
            else 0.0
        )
    return w


def follow_identity_policy(dag):
    """Pure policy on a one-mediator DAG that replays the mediator's moves.

    Whenever the mediator is at one of its decision points (an observation
    point of the base tree) above the base component, it advances toward the
    base's branch; once the mediator steps past the base's current decision
    point, the base copies that step. The resulting reduced strategy puts
    unit mass on every diagonal terminal state, realizing the identity.
    """
    if dag.family != "mediator" or dag.k != 1:
        raise ValueError("the follow policy needs a one-mediator DAG")
    problem = dag.base

    def is_strictly_below(node, anc):
        cur = problem.parent[node]
        while cur >= 0:
            if cur == anc:
                return True
            cur = problem.parent[cur]
        return False

    choices = {}
    for s in dag.decision_states:
        base_node, med_node = dag.states[s]
        moves = dag.edge_moves[s]
        picked = None
        if problem.kind[med_node] == OBSERVATION and is_strictly_below(
            base_node, med_node
        ):
            for e, move in enumerate(moves):
                (comp, child), = move
                if comp == 1 and (
                    child == base_node or is_strictly_below(base_node, child)
                ):
                    picked = e
                    break
        elif problem.kind[base_node] == DECISION and med_node in problem.children[
            base_node
        ]:
            for e, move in enumerate(moves):
                (comp, child), = move
                if comp == 0 and child == med_node:
                    picked = e
                    break
        choices[s] = picked if picked is not None else 0
    return policy_from_choices(dag, choices)
