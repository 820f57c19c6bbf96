"""Consistent maps from the strategy polytope into distributions over pure
strategies, and evaluation of deviations extended through them.

Two maps are provided. The behavioral map randomizes independently at each
decision point according to the conditional flow, so monomial expectations
factor into a short product and never require enumerating the support. The
peeling map repeatedly subtracts the largest feasible multiple of a greedy
pure strategy, producing at most one atom per terminal.
"""

from __future__ import annotations

import numpy as np

from .errors import CapacityError
from .tfsdp import DECISION, OBSERVATION, TERMINAL

SUPPORT_CAP = 10**6
PEEL_TOL = 1e-12


def monomial_expectation_beta(problem, x, terminal_set):
    """E[prod_{z in S} x'_z] when x' is drawn from the behavioral map at x.

    Zero when two terminals in S need conflicting actions at a shared
    decision point; otherwise the product of conditional flows over the
    decision edges the set requires, skipping unreached decision points.
    """
    x = np.asarray(x, dtype=float)
    required = {}
    for z in terminal_set:
        for j, child in problem.decision_edges[int(z)]:
            prev = required.get(j)
            if prev is not None and prev != child:
                return 0.0
            required[j] = child
    if not required:
        return 1.0
    vals = problem.node_values(x)
    prob = 1.0
    for j, child in required.items():
        if vals[j] > 0.0:
            prob *= vals[child] / vals[j]
            if prob == 0.0:
                return 0.0
    return prob


class SupportMix:
    """Finite mixture of pure strategies: list of (weight, 0/1 vector)."""

    def __init__(self, atoms):
        self.atoms = [(float(w), np.asarray(y, dtype=float)) for w, y in atoms]
        self._mean = None

    @property
    def n_atoms(self):
        return len(self.atoms)

    def mean(self):
        if self._mean is None:
            total = np.zeros_like(self.atoms[0][1])
            for w, y in self.atoms:
                total += w * y
            total.flags.writeable = False
            self._mean = total
        return self._mean

    def monomial_expectation(self, terminal_set):
        idx = list(terminal_set)
        if not idx:
            return 1.0
        return float(sum(w * np.prod(y[idx]) for w, y in self.atoms))

    def expected_image(self, phi):
        out = np.zeros(phi.n_outputs)
        for w, y in self.atoms:
            out += w * phi.eval_point(y)
        return out

    def __repr__(self):
        return f"SupportMix(atoms={self.n_atoms})"


class BehavioralDescriptor:
    """The behavioral map's distribution at a base point, kept implicit.

    ``zero_policy`` fixes an action at decision points the base point never
    reaches ('lowest' picks the first child). It only pins down a canonical
    representative; pure strategies through such points carry probability
    zero either way, so the distribution itself does not depend on it.
    """

    def __init__(self, problem, base, zero_policy="lowest"):
        if zero_policy != "lowest":
            raise ValueError(f"unknown zero_policy {zero_policy!r}")
        self.problem = problem
        self.base = np.array(base, dtype=float)
        self.base.flags.writeable = False
        self.zero_policy = zero_policy

    def mean(self):
        return self.base

    def monomial_expectation(self, terminal_set):
        return monomial_expectation_beta(self.problem, self.base, terminal_set)

    def expected_image(self, phi):
        return phi.expected_value(self.monomial_expectation)

    def support(self, cap=SUPPORT_CAP):
        return beta_support(self.problem, self.base, cap)

    def __repr__(self):
        return f"BehavioralDescriptor(base={self.base.round(6).tolist()})"


def beta_support(problem, x, cap=SUPPORT_CAP):
    """Explicit support of the behavioral map at x (desk scale only).

    Walks the positive-flow part of the tree: decision points split atoms by
    conditional flow, observation points take the product across branches.
    Atoms are returned as (probability, terminal set) pairs turned into
    vectors; pure strategies outside the positive region have probability
    zero and are omitted.
    """
    x = np.asarray(x, dtype=float)
    vals = problem.node_values(x)

    def rec(node):
        kind = problem.kind[node]
        if kind == TERMINAL:
            return [(1.0, (int(problem.terminal_index[node]),))]
        if kind == DECISION:
            out = []
            for c in problem.children[node]:
                if vals[c] <= 0.0:
                    continue
                share = vals[c] / vals[node]
                out.extend((share * w, s) for w, s in rec(c))
            return out
        out = [(1.0, ())]
        for c in problem.children[node]:
            sub = rec(c)
            if len(out) * len(sub) > cap:
                raise CapacityError(
                    f"behavioral support exceeds {cap} atoms; "
                    "use the implicit descriptor instead"
                )
            out = [(w * w2, s + s2) for w, s in out for w2, s2 in sub]
        return out

    atoms = []
    for w, support in rec(problem.root):
        y = np.zeros(problem.n_terminals)
        y[list(support)] = 1.0
        atoms.append((w, y))
    return SupportMix(atoms)


def caratheodory(problem, x, tol=PEEL_TOL):
    """Small-support mixture with mean x: at most one atom per terminal.

    Each round follows the child with the most remaining flow at every
    reached decision point (ties to the lowest index), subtracts the largest
    multiple of that pure strategy that keeps the residual nonnegative, and
    repeats until the flow is exhausted. Each round zeroes at least one
    terminal's residual.
    """
    x = np.asarray(x, dtype=float)
    problem.require_membership(x, context="peeling decomposition")
    residual = x.copy()
    atoms = []
    remaining = 1.0
    while remaining > tol:
        vals = problem.node_values(residual)
        support = []
        stack = [problem.root]
        while stack:
            node = stack.pop()
            kind = problem.kind[node]
            if kind == TERMINAL:
                support.append(int(problem.terminal_index[node]))
            elif kind == OBSERVATION:
                stack.extend(problem.children[node])
            else:
                best = max(problem.children[node], key=lambda c: (vals[c], -c))
                stack.append(best)
        t = min(residual[z] for z in support)
        y = np.zeros(problem.n_terminals)
        y[support] = 1.0
        atoms.append((t, y))
        residual -= t * y
        remaining -= t
        if len(atoms) > problem.n_terminals + 1:
            raise RuntimeError(
                "peeling failed to terminate; residual flow "
                f"{remaining:.3g} after {len(atoms)} atoms"
            )
    total = sum(w for w, _ in atoms)
    return SupportMix([(w / total, y) for w, y in atoms])


def extended_map_eval(phi, problem, x, delta="beta", validate=False):
    """Expectation of phi over the chosen consistent map's mixture at x.

    The behavioral route expands phi monomial by monomial; the peeling route
    evaluates phi on each atom. Either way the output is a convex mix of
    phi's values on pure strategies, so it stays inside the polytope whenever
    phi itself maps pure strategies into it.
    """
    if validate:
        phi.validate_on_polytope(problem)
    if delta == "beta":
        return phi.expected_value(
            lambda s: monomial_expectation_beta(problem, x, s)
        )
    if delta in ("cara", "caratheodory"):
        return caratheodory(problem, x).expected_image(phi)
    raise ValueError(f"unknown consistent map {delta!r}")


class MixtureStrategy:
    """Weighted mixture of per-round mixtures over pure strategies.

    Components expose ``mean`` and ``monomial_expectation``; both the
    implicit behavioral descriptor and the explicit atom list qualify.
    Monomial expectations are cached, since deviation evaluation asks for
    the same monomials across many terminals.
    """

    def __init__(self, components, kind="beta"):
        self.kind = kind
        total = sum(w for w, _ in components)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"component weights sum to {total}, expected 1")
        self.components = [(float(w), c) for w, c in components]
        self._cache: dict[frozenset, float] = {}
        self._mean = None

    def mean(self):
        if self._mean is None:
            out = None
            for w, comp in self.components:
                m = w * comp.mean()
                out = m if out is None else out + m
            out.flags.writeable = False
            self._mean = out
        return self._mean

    def monomial_expectation(self, terminal_set):
        key = frozenset(terminal_set)
        if not key:
            return 1.0
        if key not in self._cache:
            self._cache[key] = float(
                sum(w * comp.monomial_expectation(key) for w, comp in self.components)
            )
        return self._cache[key]

    def expected_image(self, phi):
        return phi.expected_value(self.monomial_expectation)

    def __repr__(self):
        return f"MixtureStrategy({self.kind}, components={len(self.components)})"
