"""Tree-form sequential decision problems.

A problem is a rooted tree of decision points (the agent picks one child),
observation points (the environment picks; the agent must handle every child)
and terminals. A strategy lives in tree form: a vector over terminals whose
induced node values satisfy the flow equations (root value 1, every child of
an observation point carries the point's own value, children of a decision
point sum to it). Pure strategies are the 0/1 points of that polytope.

Instances are immutable after construction; all derived arrays are built once.
"""

from __future__ import annotations

import collections
import math
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .errors import CapacityError, MembershipError, ParseError, StructureError

DECISION = "D"
OBSERVATION = "O"
TERMINAL = "T"

FLOW_TOL = 1e-9
ENUM_CAP = 10**6


@dataclass(frozen=True)
class NodeRow:
    """One node line: id, kind, parent id (None for the root), edge label."""

    node_id: str
    kind: str
    parent: str | None
    label: str | None


class DecisionProblem:
    """Immutable tree of decision/observation/terminal nodes, BFS indexed.

    Nodes are re-indexed breadth-first from the root with children kept in
    their appearance order; terminals get a dense index in the same order.
    Consecutive decision points on a path are repaired by inserting a dummy
    single-child observation point (recorded in ``transform_log``). An
    observation point directly under another observation point is rejected:
    the dummy-insertion repair cannot fix that shape.
    """

    def __init__(self, rows, name="problem", min_decision_branching=2):
        rows = [NodeRow(*r) if not isinstance(r, NodeRow) else r for r in rows]
        self.name = name
        rows, self.transform_log = self._repair_alternation(rows)

        by_id: dict[str, NodeRow] = {}
        children_ids: dict[str, list[str]] = collections.defaultdict(list)
        root_id = None
        for row in rows:
            if row.kind not in (DECISION, OBSERVATION, TERMINAL):
                raise StructureError(f"node {row.node_id!r}: unknown kind {row.kind!r}")
            if row.node_id in by_id:
                raise StructureError(f"duplicate node id {row.node_id!r}")
            if row.parent is None:
                if root_id is not None:
                    raise StructureError(
                        f"multiple roots: {root_id!r} and {row.node_id!r}"
                    )
                root_id = row.node_id
            else:
                if row.parent not in by_id:
                    raise StructureError(
                        f"node {row.node_id!r}: parent {row.parent!r} not defined yet "
                        "(parents must precede children)"
                    )
                if by_id[row.parent].kind == TERMINAL:
                    raise StructureError(
                        f"terminal {row.parent!r} has child {row.node_id!r}"
                    )
                children_ids[row.parent].append(row.node_id)
            by_id[row.node_id] = row
        if root_id is None:
            raise StructureError("no root node (exactly one node must have parent '-')")

        for node_id, row in by_id.items():
            kids = children_ids[node_id]
            if row.kind == DECISION and len(kids) < min_decision_branching:
                raise StructureError(
                    f"decision point {node_id!r} has {len(kids)} children "
                    f"(needs at least {min_decision_branching})"
                )
            if row.kind == OBSERVATION and len(kids) < 1:
                raise StructureError(f"observation point {node_id!r} has no children")
            if row.kind == OBSERVATION:
                for kid in kids:
                    if by_id[kid].kind == OBSERVATION:
                        raise StructureError(
                            f"observation point {kid!r} directly under observation "
                            f"point {node_id!r}; points must alternate and this shape "
                            "is not repairable by dummy observation insertion"
                        )

        # BFS re-index.
        order = []
        queue = collections.deque([root_id])
        while queue:
            cur = queue.popleft()
            order.append(cur)
            queue.extend(children_ids[cur])
        if len(order) != len(by_id):
            raise StructureError("disconnected nodes present")

        index = {node_id: i for i, node_id in enumerate(order)}
        n = len(order)
        self.n_nodes = n
        self.root = 0
        self.node_ids = order
        self.kind = [by_id[i].kind for i in order]
        self.parent = np.array(
            [-1 if by_id[i].parent is None else index[by_id[i].parent] for i in order]
        )
        self.edge_label = [by_id[i].label for i in order]
        self.children = [tuple(index[c] for c in children_ids[i]) for i in order]

        terminals = [i for i in range(n) if self.kind[i] == TERMINAL]
        self.terminals = np.array(terminals, dtype=int)
        self.n_terminals = len(terminals)
        self.terminal_index = np.full(n, -1, dtype=int)
        for dense, node in enumerate(terminals):
            self.terminal_index[node] = dense

        # Decision edges (decision node, chosen child) on the path to each terminal.
        paths = []
        for node in terminals:
            edges = []
            cur = node
            while self.parent[cur] >= 0:
                p = self.parent[cur]
                if self.kind[p] == DECISION:
                    edges.append((int(p), int(cur)))
                cur = p
            paths.append(tuple(reversed(edges)))
        self.decision_edges = paths
        self.depth = max((len(p) for p in paths), default=0)

    @staticmethod
    def _repair_alternation(rows):
        kind_of = {r.node_id: r.kind for r in rows}
        out = []
        log = []
        for row in rows:
            if (
                row.parent is not None
                and kind_of.get(row.parent) == DECISION
                and row.kind == DECISION
            ):
                dummy = f"{row.node_id}&obs"
                suffix = 0
                while dummy in kind_of:
                    suffix += 1
                    dummy = f"{row.node_id}&obs{suffix}"
                kind_of[dummy] = OBSERVATION
                out.append(NodeRow(dummy, OBSERVATION, row.parent, row.label))
                out.append(NodeRow(row.node_id, row.kind, dummy, "pass"))
                log.append(
                    f"inserted observation point {dummy!r} between decision points "
                    f"{row.parent!r} and {row.node_id!r}"
                )
            else:
                out.append(row)
        return out, log

    # -- derived values ----------------------------------------------------

    def node_values(self, x):
        """Node values induced by a terminal vector (bottom-up)."""
        x = np.asarray(x, dtype=float)
        vals = np.empty(self.n_nodes)
        for node in range(self.n_nodes - 1, -1, -1):
            kind = self.kind[node]
            if kind == TERMINAL:
                vals[node] = x[self.terminal_index[node]]
            elif kind == DECISION:
                vals[node] = sum(vals[c] for c in self.children[node])
            else:
                vals[node] = vals[self.children[node][0]]
        return vals

    def membership_violation(self, x, tol=FLOW_TOL):
        """None if x satisfies the flow equations, else a description."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_terminals,):
            return f"wrong length {x.shape} (expected {self.n_terminals})"
        if np.min(x) < -tol:
            z = int(np.argmin(x))
            return f"negative value {x[z]:.3g} at terminal {self.node_ids[self.terminals[z]]!r}"
        vals = self.node_values(x)
        if abs(vals[self.root] - 1.0) > tol:
            return f"root value {vals[self.root]:.12g} != 1"
        for node in range(self.n_nodes):
            if self.kind[node] != OBSERVATION:
                continue
            for c in self.children[node]:
                if abs(vals[c] - vals[node]) > tol:
                    return (
                        f"observation point {self.node_ids[node]!r}: child "
                        f"{self.node_ids[c]!r} carries {vals[c]:.12g} != {vals[node]:.12g}"
                    )
        return None

    def membership(self, x, tol=FLOW_TOL):
        return self.membership_violation(x, tol) is None

    def require_membership(self, x, tol=FLOW_TOL, context=""):
        violation = self.membership_violation(x, tol)
        if violation is not None:
            prefix = f"{context}: " if context else ""
            raise MembershipError(prefix + violation)

    # -- pure strategies ---------------------------------------------------

    def count_pure_strategies(self):
        counts = [0] * self.n_nodes
        for node in range(self.n_nodes - 1, -1, -1):
            kind = self.kind[node]
            if kind == TERMINAL:
                counts[node] = 1
            elif kind == DECISION:
                counts[node] = sum(counts[c] for c in self.children[node])
            else:
                prod = 1
                for c in self.children[node]:
                    prod *= counts[c]
                counts[node] = prod
        return counts[self.root]

    def enumerate_pure_strategies(self, cap=ENUM_CAP):
        """All distinct tree-form pure strategies as a (P, N) 0/1 array."""
        total = self.count_pure_strategies()
        if total > cap:
            raise CapacityError(
                f"{total} pure strategies exceeds the cap of {cap}; "
                "raise the cap only for desk-scale work"
            )

        def rec(node):
            kind = self.kind[node]
            if kind == TERMINAL:
                return [(int(self.terminal_index[node]),)]
            parts = [rec(c) for c in self.children[node]]
            if kind == DECISION:
                return [p for part in parts for p in part]
            out = parts[0]
            for part in parts[1:]:
                out = [a + b for a in out for b in part]
            return out

        combos = rec(self.root)
        pure = np.zeros((len(combos), self.n_terminals))
        for i, combo in enumerate(combos):
            pure[i, list(combo)] = 1.0
        return pure

    def uniform_point(self):
        """Tree-form point of the uniform behavioral strategy."""
        mass = np.zeros(self.n_nodes)
        mass[self.root] = 1.0
        out = np.zeros(self.n_terminals)
        for node in range(self.n_nodes):
            kind = self.kind[node]
            if kind == TERMINAL:
                out[self.terminal_index[node]] = mass[node]
            elif kind == DECISION:
                share = mass[node] / len(self.children[node])
                for c in self.children[node]:
                    mass[c] = share
            else:
                for c in self.children[node]:
                    mass[c] = mass[node]
        return out

    def random_point(self, rng):
        """Tree-form point from random Dirichlet behavioral splits."""
        mass = np.zeros(self.n_nodes)
        mass[self.root] = 1.0
        out = np.zeros(self.n_terminals)
        for node in range(self.n_nodes):
            kind = self.kind[node]
            if kind == TERMINAL:
                out[self.terminal_index[node]] = mass[node]
            elif kind == DECISION:
                split = rng.dirichlet(np.ones(len(self.children[node])))
                for c, w in zip(self.children[node], split):
                    mass[c] = mass[node] * w
            else:
                for c in self.children[node]:
                    mass[c] = mass[node]
        return out

    # -- responses and normalization ----------------------------------------

    def _pure_response(self, u, maximize):
        u = np.asarray(u, dtype=float)
        vals = np.empty(self.n_nodes)
        pick = {}
        for node in range(self.n_nodes - 1, -1, -1):
            kind = self.kind[node]
            if kind == TERMINAL:
                vals[node] = u[self.terminal_index[node]]
            elif kind == OBSERVATION:
                vals[node] = sum(vals[c] for c in self.children[node])
            else:
                best = None
                for c in self.children[node]:
                    if best is None:
                        best = c
                    elif maximize and vals[c] > vals[best]:
                        best = c
                    elif not maximize and vals[c] < vals[best]:
                        best = c
                pick[node] = best
                vals[node] = vals[best]
        bits = np.zeros(self.n_terminals)
        stack = [self.root]
        while stack:
            node = stack.pop()
            kind = self.kind[node]
            if kind == TERMINAL:
                bits[self.terminal_index[node]] = 1.0
            elif kind == DECISION:
                stack.append(pick[node])
            else:
                stack.extend(self.children[node])
        return float(vals[self.root]), bits

    def best_pure_response(self, u):
        """(value, strategy) maximizing <u, x>; ties break to the lowest child."""
        return self._pure_response(u, maximize=True)

    def worst_pure_response(self, u):
        return self._pure_response(u, maximize=False)

    def normalize_utility(self, u):
        """Scale u so every pure strategy's payoff lands in [-1, 1].

        Returns (scaled utility, scale M). M is the larger magnitude of the
        best and worst pure-strategy values; M == 0 leaves u unchanged.
        """
        u = np.asarray(u, dtype=float)
        hi, _ = self.best_pure_response(u)
        lo, _ = self.worst_pure_response(u)
        scale = max(abs(hi), abs(lo))
        if scale == 0.0:
            return u.copy(), 0.0
        return u / scale, float(scale)

    # -- restructuring -------------------------------------------------------

    def binarize(self):
        """Split wide decision points into balanced cascades of binary ones.

        Returns (problem, terminal_map, log) where terminal_map sends each old
        dense terminal index to its new one. Terminals and pure strategies are
        in exact bijection with the originals. The constructor's alternation
        repair inserts the needed dummy observation points between cascade
        levels.
        """
        rows = []
        log = []

        def emit(node, parent_id, label):
            node_id = self.node_ids[node]
            kind = self.kind[node]
            rows.append(NodeRow(node_id, kind, parent_id, label))
            if kind == TERMINAL:
                return
            kids = list(self.children[node])
            if kind == DECISION and len(kids) > 2:
                log.append(
                    f"decision point {node_id!r} with {len(kids)} actions split "
                    "into a balanced binary cascade"
                )
                emit_group(node_id, node_id, kids)
            else:
                for c in kids:
                    emit(c, node_id, self.edge_label[c])

        def emit_group(owner_id, parent_id, kids):
            if len(kids) == 1:
                emit(kids[0], parent_id, self.edge_label[kids[0]])
                return
            if len(kids) == 2:
                for c in kids:
                    emit(c, parent_id, self.edge_label[c])
                return
            mid = (len(kids) + 1) // 2
            for half, tag in ((kids[:mid], "lo"), (kids[mid:], "hi")):
                if len(half) == 1:
                    emit(half[0], parent_id, self.edge_label[half[0]])
                else:
                    gid = f"{owner_id}&{tag}{len(half)}n{self.node_ids[half[0]]}"
                    rows.append(NodeRow(gid, DECISION, parent_id, tag))
                    emit_group(owner_id, gid, half)

        emit(self.root, None, None)
        problem = DecisionProblem(rows, name=self.name + "~bin")
        new_index = {node_id: i for i, node_id in enumerate(problem.node_ids)}
        term_map = np.array(
            [
                int(problem.terminal_index[new_index[self.node_ids[t]]])
                for t in self.terminals
            ]
        )
        log.extend(problem.transform_log)
        return problem, term_map, log

    def dump(self):
        lines = [f"tfsdp {self.name}"]
        for node in range(self.n_nodes):
            parent = self.parent[node]
            pid = "-" if parent < 0 else self.node_ids[parent]
            label = self.edge_label[node] or "-"
            lines.append(f"{self.node_ids[node]} {self.kind[node]} {pid} {label}")
        return "\n".join(lines)

    def __repr__(self):
        return (
            f"DecisionProblem({self.name!r}, nodes={self.n_nodes}, "
            f"terminals={self.n_terminals}, depth={self.depth})"
        )


def parse_problem(text):
    """Parse the node-list game format.

    Header line ``tfsdp <name>``, then one line per node:
    ``<id> <kind:D|O|T> <parent-id|-> <action-label-from-parent|->``.
    Children are ordered by appearance; parents must precede children.
    Lines starting with ``#`` and blank lines are skipped.
    """
    rows = []
    name = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if name is None:
            if tokens[0] != "tfsdp" or len(tokens) != 2:
                raise ParseError(f"line {lineno}: expected header 'tfsdp <name>'")
            name = tokens[1]
            continue
        if len(tokens) != 4:
            raise ParseError(
                f"line {lineno}: expected '<id> <kind> <parent|-> <label|->', "
                f"got {len(tokens)} tokens"
            )
        node_id, kind, parent, label = tokens
        rows.append(
            NodeRow(
                node_id,
                kind,
                None if parent == "-" else parent,
                None if label == "-" else label,
            )
        )
    if name is None:
        raise ParseError("empty file: missing 'tfsdp <name>' header")
    try:
        return DecisionProblem(rows, name=name)
    except StructureError as exc:
        raise ParseError(str(exc)) from exc


def hypercube_problem(n_bits, name=None):
    """A problem whose pure strategies are the corners of the n-bit hypercube.

    One root observation point with n_bits children, each a decision point
    with two terminal children (clear first, set second).
    """
    if n_bits < 1:
        raise StructureError("need at least one bit")
    rows = [NodeRow("root", OBSERVATION, None, None)]
    for j in range(n_bits):
        rows.append(NodeRow(f"b{j}", DECISION, "root", str(j)))
        rows.append(NodeRow(f"b{j}:0", TERMINAL, f"b{j}", "0"))
        rows.append(NodeRow(f"b{j}:1", TERMINAL, f"b{j}", "1"))
    return DecisionProblem(rows, name=name or f"cube{n_bits}")


def hypercube_structure(problem):
    """Per-bit terminal index pairs (clear, set) if the problem is a flat
    observe-then-set-each-bit tree, else None."""
    if problem.kind[problem.root] != OBSERVATION:
        return None
    pairs = []
    for bit in problem.children[problem.root]:
        if problem.kind[bit] != DECISION or len(problem.children[bit]) != 2:
            return None
        lo, hi = problem.children[bit]
        if problem.kind[lo] != TERMINAL or problem.kind[hi] != TERMINAL:
            return None
        pairs.append((int(problem.terminal_index[lo]), int(problem.terminal_index[hi])))
    return pairs


def bits_to_point(pairs, bits):
    """Tree-form point for per-bit set probabilities."""
    out = np.zeros(2 * len(pairs))
    for (lo, hi), b in zip(pairs, bits):
        out[hi] = b
        out[lo] = 1.0 - b
    return out


def point_to_bits(pairs, x):
    return np.array([x[hi] for _, hi in pairs])


def induced_norm(problem, v, pure=None):
    """Norm of v in the dual pairing against the strategy polytope.

    Solves max <u, v> over utilities u with |<u, x>| <= 1 for every pure
    strategy x (desk scale: the pure strategies are enumerated). Raises if v
    lies outside the span of the pure strategies, where the program is
    unbounded.
    """
    v = np.asarray(v, dtype=float)
    if pure is None:
        pure = problem.enumerate_pure_strategies()
    a_ub = np.vstack([pure, -pure])
    res = scipy.optimize.linprog(
        c=-v,
        A_ub=a_ub,
        b_ub=np.ones(a_ub.shape[0]),
        bounds=[(None, None)] * len(v),
        method="highs",
    )
    if res.status == 3:
        raise ValueError(
            "norm is unbounded: the vector has a component outside the span "
            "of the pure strategies"
        )
    if not res.success:
        raise RuntimeError(f"norm LP failed: {res.message}")
    return float(-res.fun)


def l2_diameter(points):
    """Largest pairwise Euclidean distance among the given points."""
    points = np.asarray(points, dtype=float)
    sq = np.sum(points**2, axis=1)
    gram = points @ points.T
    d2 = sq[:, None] + sq[None, :] - 2.0 * gram
    return float(math.sqrt(max(np.max(d2), 0.0)))
