"""Expected fixed points of extended deviations, and the regret minimizer
built on them.

A deviation phi maps pure strategies into the polytope; lifted through a
consistent map delta it becomes a self-map of the polytope. Instead of
solving for an exact fixed point, iterate x_{l+1} = phi^delta(x_l) and play
the uniform mixture pi of the delta(x_l): the deviation displacement
E_pi[phi(x) - x] telescopes to (phi^delta(x_L) - x_1)/L, whose induced norm
is at most 2/L. Feeding the induced linear utilities to an external-regret
learner over the deviation DAG then drives the full deviation regret down.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dags import terminal_weights
from .errors import InvalidDeviationError
from .learners import CfrLearner, RegretMeter
from .maps import BehavioralDescriptor, MixtureStrategy, caratheodory

STALL_TOL = 1e-12


@dataclass
class FixedPointConfig:
    """Iteration budget and consistent-map choice for fixed-point runs."""

    L: int = 50
    delta: str = "beta"
    init: np.ndarray | None = None
    membership_tol: float = 1e-9
    stall_tol: float = STALL_TOL

    @classmethod
    def from_eps(cls, eps, **kw):
        """Budget for a fixed-point error of eps (L = ceil(2/eps))."""
        return cls(L=max(1, math.ceil(2.0 / eps)), **kw)

    def component(self, problem, x):
        if self.delta == "beta":
            return BehavioralDescriptor(problem, x)
        if self.delta in ("cara", "caratheodory"):
            return caratheodory(problem, x)
        raise ValueError(f"unknown consistent map {self.delta!r}")


@dataclass
class FixedPointResult:
    iterates: list
    pi: MixtureStrategy
    error_vector: np.ndarray
    L: int
    stalled: bool

    @property
    def error_bound(self):
        return 2.0 / self.L


def expected_fixed_point(problem, phi, cfg):
    """Run the averaging iteration for one deviation.

    ``phi`` is a PolynomialDeviation, or any callable mapping a mixture over
    pure strategies (anything exposing monomial expectations) to E[phi(x)].
    Returns the iterates, the mixture pi, and the exact displacement
    E_pi[phi(x) - x] = (phi^delta(x_L) - x_1)/L.

    If an iterate reproduces itself (an exact fixed point of the extended
    map), pi collapses to that single component and the displacement is the
    residual at the fixed point — at most the stall tolerance, well under
    the 2/L guarantee.
    """
    image = phi if callable(phi) else (lambda comp: comp.expected_image(phi))
    x = cfg.init if cfg.init is not None else problem.uniform_point()
    x = np.asarray(x, dtype=float)
    problem.require_membership(x, cfg.membership_tol, context="fixed-point init")
    iterates = [x]
    components = []
    for _ in range(cfg.L):
        comp = cfg.component(problem, x)
        components.append(comp)
        nxt = image(comp)
        violation = problem.membership_violation(nxt, cfg.membership_tol)
        if violation is not None:
            raise InvalidDeviationError(
                f"extended map left the polytope ({violation}); "
                "the deviation is not valid on this problem"
            )
        if np.max(np.abs(nxt - x)) <= cfg.stall_tol:
            pi = MixtureStrategy([(1.0, comp)], kind=cfg.delta)
            return FixedPointResult(iterates, pi, nxt - x, cfg.L, True)
        iterates.append(nxt)
        x = nxt
    pi = MixtureStrategy(
        [(1.0 / cfg.L, c) for c in components], kind=cfg.delta
    )
    error = (iterates[-1] - iterates[0]) / cfg.L
    return FixedPointResult(iterates[:-1], pi, error, cfg.L, False)


@dataclass
class RoundRecord:
    round: int
    phi_regret: float
    external_regret: float
    fp_error_bound: float


@dataclass
class PhiRegretRun:
    """Aggregates a learning run for exact regret measurement.

    Tracks the summed terminal-state weights (for the hindsight best
    deviation), the realized deviation values <W_t, q_t>, and the baseline
    utilities <u_t, mean of pi_t>.
    """

    dag: object
    meter: RegretMeter = None
    baseline: float = 0.0
    fp_slack_sum: float = 0.0
    records: list = field(default_factory=list)

    def __post_init__(self):
        if self.meter is None:
            self.meter = RegretMeter(self.dag)

    @property
    def rounds(self):
        return self.meter.rounds

    def record(self, weights, q_vector, base_value, fp_bound):
        self.meter.record(weights, q_vector)
        self.baseline += float(base_value)
        self.fp_slack_sum += float(fp_bound)

    def phi_regret(self):
        """Time-averaged regret against the best deviation in the DAG's set."""
        if self.rounds == 0:
            return 0.0
        from .dags import best_reduced_strategy

        best, _ = best_reduced_strategy(self.dag, self.meter.weight_sum)
        return (best - self.baseline) / self.rounds

    def external_regret(self):
        return self.meter.average_regret()

    def fp_error_bound(self):
        return self.fp_slack_sum / self.rounds if self.rounds else 0.0

    def checkpoint(self):
        rec = RoundRecord(
            self.rounds,
            self.phi_regret(),
            self.external_regret(),
            self.fp_error_bound(),
        )
        self.records.append(rec)
        return rec

    def curves_csv(self, extra_prefix=""):
        header = "round,phi_regret,external_regret,fp_error_bound"
        if extra_prefix:
            header = extra_prefix.split("=")[0] + "," + header
        lines = [header]
        for r in self.records:
            row = (
                f"{r.round},{r.phi_regret:.17g},{r.external_regret:.17g},"
                f"{r.fp_error_bound:.17g}"
            )
            if extra_prefix:
                row = extra_prefix.split("=")[1] + "," + row
            lines.append(row)
        return "\n".join(lines) + "\n"


class PhiRegretMinimizer:
    """Deviation-regret minimizer over a decision-DAG deviation set.

    Each round: the inner learner proposes a deviation q; the expected
    fixed point of q's extended map yields the mixture pi to play. On
    feedback u (normalized so all pure-strategy payoffs lie in [-1, 1]),
    the learner is charged the linear utility w[t] = u[out(t)] * E_pi[mono(t)]
    whose value at q is exactly <u, E_pi[phi_q(x)]>.
    """

    def __init__(self, dag, cfg=None, learner=None):
        self.dag = dag
        self.problem = dag.base
        self.cfg = cfg or FixedPointConfig()
        self.learner = learner or CfrLearner(dag)
        self.run = PhiRegretRun(dag)
        self._pending = None
        # Group terminal states by monomial size once. Constant and linear
        # monomials cover every k <= 1 deviation set and evaluate as plain
        # array gathers (a consistent map preserves coordinate expectations,
        # so a singleton monomial is just a mean-vector read).
        const, lin, lin_idx, higher = [], [], [], []
        for slot in range(dag.n_terminal_states):
            mono = dag.terminal_mono[slot]
            if len(mono) == 0:
                const.append(slot)
            elif len(mono) == 1:
                lin.append(slot)
                lin_idx.append(next(iter(mono)))
            else:
                higher.append(slot)
        self._const = np.array(const, dtype=int)
        self._lin = np.array(lin, dtype=int)
        self._lin_idx = np.array(lin_idx, dtype=int)
        self._higher = higher
        self._out = np.asarray(dag.terminal_out, dtype=int)

    def _phi_image(self, q_vector):
        dag = self.dag
        n_out = self.problem.n_terminals

        def image(mixture):
            out = np.zeros(n_out)
            if self._const.size:
                np.add.at(out, self._out[self._const], q_vector[self._const])
            if self._lin.size:
                reads = mixture.mean()[self._lin_idx]
                np.add.at(out, self._out[self._lin], q_vector[self._lin] * reads)
            for slot in self._higher:
                m = q_vector[slot]
                if m != 0.0:
                    out[self._out[slot]] += m * mixture.monomial_expectation(
                        dag.terminal_mono[slot]
                    )
            return out

        return image

    def next_mixture(self):
        q = self.learner.next_strategy()
        qv = q.terminal_vector()
        fp = expected_fixed_point(self.problem, self._phi_image(qv), self.cfg)
        self._pending = (qv, fp)
        return q, fp

    def observe_utility(self, u):
        if self._pending is None:
            raise RuntimeError("observe_utility called before next_mixture")
        qv, fp = self._pending
        self._pending = None
        w = terminal_weights(self.dag, u, fp.pi)
        self.learner.observe(w)
        base = float(np.asarray(u, dtype=float) @ fp.pi.mean())
        self.run.record(w, qv, base, fp.error_bound)
        return w


def _as_mixture(proposed):
    """Pull the playable mixture out of whatever next_mixture returned."""
    if hasattr(proposed, "expected_image"):
        return proposed
    if isinstance(proposed, tuple):
        for item in proposed:
            if hasattr(item, "pi"):
                return item.pi
            if hasattr(item, "expected_image"):
                return item
    raise TypeError(f"cannot interpret {type(proposed).__name__} as a mixture")


def extract_expected_fixed_point(minimizer, phi, eps, diameter=None, budget=10000):
    """Drive any deviation-regret minimizer to an approximate fixed point.

    Round t: ask the minimizer for its mixture, measure the displacement
    g = E[phi(x) - x]; stop when the Euclidean norm is at most eps times the
    strategy-set diameter, otherwise feed back the utility g (normalized),
    which rewards moving along the displacement — a minimizer with vanishing
    regret against phi cannot keep the displacement large.

    The minimizer must expose next_mixture() (returning a mixture, or a tuple
    containing one as with PhiRegretMinimizer) and observe_utility(u) or
    observe_direction(u). diameter defaults to the max pairwise distance
    between the problem's pure strategies. Returns (mixture, rounds, error).
    """
    if diameter is None:
        problem = getattr(minimizer, "problem", None)
        if problem is None:
            raise ValueError("pass diameter= when the minimizer has no .problem")
        from .tfsdp import l2_diameter

        diameter = l2_diameter(problem.enumerate_pure_strategies())
    observe = getattr(minimizer, "observe_direction", None)
    if observe is None:
        observe = minimizer.observe_utility
    image = phi if callable(phi) else None
    threshold = eps * diameter
    last_err = None
    for t in range(1, budget + 1):
        pi = _as_mixture(minimizer.next_mixture())
        expected = image(pi) if image is not None else pi.expected_image(phi)
        g = expected - pi.mean()
        err = float(np.linalg.norm(g))
        last_err = err
        if err <= threshold:
            return pi, t, err
        observe(g / err)
    raise RuntimeError(
        f"no {eps:.3g}-expected fixed point within {budget} rounds "
        f"(last error {last_err:.3g}); the minimizer's regret exceeds the target"
    )
