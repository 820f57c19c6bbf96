"""External-regret learners: regret-matching+ over decision DAGs and
multiplicative weights over finite arms, plus exact regret measurement.
"""

from __future__ import annotations

import math

import numpy as np

from .dags import ReducedStrategy, best_reduced_strategy, forward_flow
from .tfsdp import OBSERVATION, TERMINAL


class CfrLearner:
    """Regret-matching+ at every decision state of a decision DAG.

    ``next_strategy`` pushes unit mass through the DAG, splitting at each
    decision state by the local positive-regret distribution (uniform when
    all regrets are zero). ``observe`` takes the utility over terminal
    states, backs up state values under the current local policies, and adds
    the reach-weighted per-edge advantages to the clipped regret tallies.
    Mass arriving over several in-edges is summed before splitting; reach is
    tracked per state, not per history.
    """

    def __init__(self, dag):
        self.dag = dag
        self.regrets = {
            s: np.zeros(len(dag.edges[s])) for s in dag.decision_states
        }

    def local_policy(self, s):
        r = self.regrets[s]
        total = r.sum()
        if total <= 0.0:
            return np.full(len(r), 1.0 / len(r))
        return r / total

    def next_strategy(self):
        return forward_flow(self.dag, self.local_policy)

    def observe(self, weights):
        weights = np.asarray(weights, dtype=float)
        if not np.all(np.isfinite(weights)):
            raise ValueError("terminal weights must be finite")
        dag = self.dag
        policies = {s: self.local_policy(s) for s in dag.decision_states}
        reach = forward_flow(dag, lambda s: policies[s]).state_mass
        value = np.zeros(dag.n_states)
        for s in range(dag.n_states - 1, -1, -1):
            kd = dag.kind[s]
            if kd == TERMINAL:
                value[s] = weights[dag.terminal_slot[s]]
            elif kd == OBSERVATION:
                value[s] = sum(value[c] for c in dag.edges[s])
            else:
                child_vals = np.array([value[c] for c in dag.edges[s]])
                value[s] = float(policies[s] @ child_vals)
                increments = reach[s] * (child_vals - value[s])
                self.regrets[s] = np.maximum(0.0, self.regrets[s] + increments)
        return self


class Mwu:
    """Multiplicative weights over a fixed set of arms.

    With a known horizon the learning rate is sqrt(ln(A)/T); otherwise the
    doubling trick restarts the weights with a halved rate each epoch.
    """

    def __init__(self, n_arms, horizon=None):
        if n_arms < 1:
            raise ValueError("need at least one arm")
        self.n_arms = n_arms
        self.log_weights = np.zeros(n_arms)
        self.horizon = horizon
        if horizon is not None:
            self.eta = math.sqrt(math.log(max(n_arms, 2)) / horizon)
        else:
            self._epoch_len = 1
            self._epoch_used = 0
            self.eta = math.sqrt(math.log(max(n_arms, 2)))

    def next_distribution(self):
        shifted = self.log_weights - self.log_weights.max()
        w = np.exp(shifted)
        return w / w.sum()

    def observe(self, utilities, scale=1.0):
        utilities = np.asarray(utilities, dtype=float)
        if not np.all(np.isfinite(utilities)):
            raise ValueError("arm utilities must be finite")
        self.log_weights = self.log_weights + self.eta * scale * utilities
        if self.horizon is None:
            self._epoch_used += 1
            if self._epoch_used >= self._epoch_len:
                self._epoch_len *= 2
                self._epoch_used = 0
                self.log_weights = np.zeros(self.n_arms)
                self.eta = math.sqrt(
                    math.log(max(self.n_arms, 2)) / self._epoch_len
                )


class RegretMeter:
    """Running exact external regret over a decision DAG.

    Accumulates the observed terminal-state weights and the realized values;
    the time average of (best fixed reduced strategy in hindsight) minus
    (realized) is read off on demand.
    """

    def __init__(self, dag):
        self.dag = dag
        self.weight_sum = np.zeros(dag.n_terminal_states)
        self.realized = 0.0
        self.rounds = 0

    def record(self, weights, played_terminal_vector):
        weights = np.asarray(weights, dtype=float)
        self.weight_sum += weights
        self.realized += float(weights @ played_terminal_vector)
        self.rounds += 1

    def average_regret(self):
        if self.rounds == 0:
            return 0.0
        best, _ = best_reduced_strategy(self.dag, self.weight_sum)
        return (best - self.realized) / self.rounds


def measure_external_regret(dag, weight_history, play_history):
    """Exact time-averaged external regret of a played sequence.

    weight_history[t] is the terminal-state utility of round t and
    play_history[t] the terminal-state masses actually played.
    """
    if len(weight_history) != len(play_history):
        raise ValueError("histories differ in length")
    meter = RegretMeter(dag)
    for w, q in zip(weight_history, play_history):
        if isinstance(q, ReducedStrategy):
            q = q.terminal_vector()
        meter.record(w, q)
    return meter.average_regret()
