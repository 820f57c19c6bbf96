"""Normal-form games and fast correlated equilibria.

Players run a swap-regret learner: one multiplicative-weights instance per
action (the classic reduction), with the stationary distribution of the
row-stochastic matrix Q replaced by the average of the power iterates
x_{l+1} = Q^T x_l. That average pi satisfies ||Q^T pi - pi||_1 <= 2/L by the
same telescoping argument as the general template, so each round costs a
few matrix-vector products instead of an eigenvector solve.
"""

from __future__ import annotations

import math
import string
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError
from .learners import Mwu
from .maps import SupportMix
from .profile import CorrelatedProfile

PAYOFF_TOL = 1e-9
DENSE_CAP = 10**6


class NormalFormGame:
    """n-player game with payoffs in [-1, 1].

    Two storage layouts: a dense payoff tensor per player, or polymatrix
    edge matrices where a player's payoff is the sum of its pairwise edge
    payoffs against each neighbor.
    """

    def __init__(self, action_counts, tensors=None, edges=None, name="game"):
        self.action_counts = [int(a) for a in action_counts]
        if any(a < 1 for a in self.action_counts):
            raise ValueError("every player needs at least one action")
        self.n_players = len(self.action_counts)
        self.name = name
        if (tensors is None) == (edges is None):
            raise ValueError("provide exactly one of tensors= or edges=")
        self.tensors = None
        self.edges = None
        if tensors is not None:
            if len(tensors) != self.n_players:
                raise ValueError("one payoff tensor per player")
            shape = tuple(self.action_counts)
            self.tensors = []
            for i, t in enumerate(tensors):
                t = np.asarray(t, dtype=float)
                if t.shape != shape:
                    raise ValueError(
                        f"player {i} tensor shape {t.shape} != {shape}"
                    )
                self._check_range(t)
                self.tensors.append(t)
        else:
            self.edges = {}
            for (i, j), (m_i, m_j) in edges.items():
                if not (0 <= i < self.n_players and 0 <= j < self.n_players):
                    raise ValueError(f"edge ({i}, {j}) references unknown player")
                if i >= j:
                    raise ValueError("edges are keyed (i, j) with i < j")
                m_i = np.asarray(m_i, dtype=float)
                m_j = np.asarray(m_j, dtype=float)
                want_i = (self.action_counts[i], self.action_counts[j])
                want_j = (self.action_counts[j], self.action_counts[i])
                if m_i.shape != want_i or m_j.shape != want_j:
                    raise ValueError(
                        f"edge ({i}, {j}) matrices must be {want_i} and {want_j}"
                    )
                self.edges[(i, j)] = (m_i, m_j)
            # the [-1,1] invariant applies to total payoffs, i.e. edge sums
            for i in range(self.n_players):
                hi = sum(
                    np.max(np.abs(mats[0] if pair[0] == i else mats[1]))
                    for pair, mats in self.edges.items()
                    if i in pair
                )
                if hi > 1.0 + PAYOFF_TOL:
                    raise ValueError(
                        f"player {i} polymatrix payoffs can reach {hi:.3g}, "
                        "outside [-1, 1]"
                    )

    @staticmethod
    def _check_range(values):
        worst = float(np.max(np.abs(values))) if np.asarray(values).size else 0.0
        if worst > 1.0 + PAYOFF_TOL:
            raise ValueError(f"payoff magnitude {worst:.3g} outside [-1, 1]")

    @classmethod
    def dense(cls, tensors, name="game"):
        counts = np.asarray(tensors[0]).shape
        return cls(counts, tensors=tensors, name=name)

    @classmethod
    def polymatrix(cls, action_counts, edges, name="game"):
        return cls(action_counts, edges=edges, name=name)

    @property
    def is_polymatrix(self):
        return self.edges is not None

    @property
    def max_actions(self):
        return max(self.action_counts)

    def payoff(self, player, joint):
        joint = tuple(int(a) for a in joint)
        if self.tensors is not None:
            return float(self.tensors[player][joint])
        total = 0.0
        for (i, j), (m_i, m_j) in self.edges.items():
            if player == i:
                total += m_i[joint[i], joint[j]]
            elif player == j:
                total += m_j[joint[j], joint[i]]
        return float(total)

    def to_dense(self):
        """Expand to dense tensors (small games only)."""
        size = math.prod(self.action_counts)
        if size > DENSE_CAP:
            raise ValueError(f"{size} joint actions exceed the dense cap")
        if self.tensors is not None:
            return self
        shape = tuple(self.action_counts)
        tensors = [np.zeros(shape) for _ in range(self.n_players)]
        for joint in np.ndindex(*shape):
            for i in range(self.n_players):
                tensors[i][joint] = self.payoff(i, joint)
        return NormalFormGame.dense(tensors, name=self.name)

    def __repr__(self):
        layout = "polymatrix" if self.is_polymatrix else "dense"
        return f"NormalFormGame({self.name!r}, actions={self.action_counts}, {layout})"


def expectation_oracle(game, dists):
    """Expected utility of every own action against the others' mixtures.

    Returns one vector per player: entry a is u_i(a, pi_{-i}). Dense games
    contract the payoff tensor against the other players' distributions;
    polymatrix games sum edge-matrix products.
    """
    if len(dists) != game.n_players:
        raise ValueError(f"need {game.n_players} distributions, got {len(dists)}")
    dists = [np.asarray(d, dtype=float) for d in dists]
    for i, d in enumerate(dists):
        if d.shape != (game.action_counts[i],):
            raise ValueError(
                f"player {i} distribution has shape {d.shape}, "
                f"expected ({game.action_counts[i]},)"
            )
    out = []
    if game.is_polymatrix:
        for i in range(game.n_players):
            u = np.zeros(game.action_counts[i])
            for (a, b), (m_a, m_b) in game.edges.items():
                if i == a:
                    u += m_a @ dists[b]
                elif i == b:
                    u += m_b @ dists[a]
            out.append(u)
        return out
    letters = string.ascii_lowercase[: game.n_players]
    for i in range(game.n_players):
        others = [letters[j] for j in range(game.n_players) if j != i]
        spec = letters + "," + ",".join(others) + "->" + letters[i]
        args = [dists[j] for j in range(game.n_players) if j != i]
        out.append(np.einsum(spec, game.tensors[i], *args))
    return out


class SwapLearner:
    """Swap-regret learner: one external-regret MWU instance per action.

    instances[a] decides where recommendation a gets rerouted; q_matrix()
    stacks their current distributions into the row-stochastic Q.
    """

    def __init__(self, n_actions, horizon=None):
        self.n_actions = int(n_actions)
        self.instances = [Mwu(self.n_actions, horizon=horizon) for _ in range(self.n_actions)]

    def q_matrix(self):
        return np.array([inst.next_distribution() for inst in self.instances])

    def __repr__(self):
        return f"SwapLearner(n_actions={self.n_actions})"


def bm_next(learner, L, x1=None, stall_tol=1e-15):
    """Average of L power iterates of Q^T: the play distribution pi.

    pi satisfies ||Q^T pi - pi||_1 <= 2/L exactly by telescoping. Once the
    iteration reaches a fixed point of Q^T (within stall_tol) the remaining
    iterates are identical, so they are added in closed form.
    """
    L = int(L)
    if L < 1:
        raise ValueError("need at least one iterate")
    qt = learner.q_matrix().T
    x = np.full(learner.n_actions, 1.0 / learner.n_actions) if x1 is None else np.asarray(x1, dtype=float)
    total = np.zeros(learner.n_actions)
    done = 0
    while done < L:
        total += x
        done += 1
        nxt = qt @ x
        if np.max(np.abs(nxt - x)) <= stall_tol:
            total += (L - done) * nxt
            done = L
        x = nxt
    return total / L


def bm_displacement(learner, pi):
    """Exact Q^T pi - pi for the learner's current Q."""
    q = learner.q_matrix()
    return q.T @ pi - pi


def bm_observe(learner, u, pi):
    """Charge each per-action instance its share pi[a] of the round utility."""
    u = np.asarray(u, dtype=float)
    for a, inst in enumerate(learner.instances):
        inst.observe(float(pi[a]) * u)


def swap_gap(profile, game):
    """Exact per-player swap gap of a correlated profile.

    For each player: sum over recommendations a of the best single reroute
    a -> a', i.e. sum_a max_a' E[1{rec=a} (u(a') - u(a))], computed from the
    per-round product distributions. Returns an array of per-player gaps.
    """
    gaps = np.zeros(game.n_players)
    T = profile.rounds
    if T == 0:
        return gaps
    means = [profile.stacked_means(i) for i in range(game.n_players)]
    reroute = [np.zeros((a, a)) for a in game.action_counts]
    for t in range(T):
        utils = expectation_oracle(game, [means[i][t] for i in range(game.n_players)])
        for i in range(game.n_players):
            reroute[i] += np.outer(means[i][t], utils[i])
    for i in range(game.n_players):
        r = reroute[i]
        gaps[i] = float(np.sum(np.max(r, axis=1) - np.diag(r))) / T
    return gaps


def swap_regret_from_moments(moment, rounds):
    """Average swap regret given the accumulated outer(pi_t, u_t) matrix."""
    if rounds == 0:
        return 0.0
    return float(np.sum(np.max(moment, axis=1) - np.diag(moment))) / rounds


@dataclass
class CeResult:
    profile: CorrelatedProfile
    rounds: int
    L: int
    certified_gaps: np.ndarray | None
    swap_regrets: np.ndarray
    elapsed: float
    curve_rows: list = field(default_factory=list)

    def curves_csv(self):
        lines = ["round,phi_regret,external_regret,fp_error_bound"]
        for row in self.curve_rows:
            lines.append(
                f"{row[0]},{row[1]:.17g},{row[2]:.17g},{row[3]:.17g}"
            )
        return "\n".join(lines) + "\n"


def run_ce(game, eps, c=8.0, horizon=None, L=None, record_profile=True,
           checkpoints=(), audit=True, anytime=False):
    """All-players swap-regret self-play to an eps-correlated equilibrium.

    Horizon T = ceil(c * A ln A / eps^2) with A the largest action count,
    and L = ceil(4 / eps) power iterates per round, unless overridden. The
    returned profile is the uniform mixture over rounds of the product play
    distributions; when audit is set its exact swap gap is computed.
    anytime switches the inner learners to horizon-free step sizes, for
    measuring how the regret curve decays without tuning to a round count.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    A = game.max_actions
    if horizon is None:
        horizon = max(1, math.ceil(c * A * math.log(max(A, 2)) / eps**2))
    if L is None:
        L = max(1, math.ceil(4.0 / eps))
    start = time.monotonic()
    learners = [
        SwapLearner(a, horizon=None if anytime else horizon)
        for a in game.action_counts
    ]
    moments = [np.zeros((a, a)) for a in game.action_counts]
    rerouted = np.zeros(game.n_players)  # sum_t u_t . (Q_t^T pi_t)
    realized = np.zeros(game.n_players)  # sum_t u_t . pi_t
    err_sum = np.zeros(game.n_players)
    profile = CorrelatedProfile(game.n_players, dims=game.action_counts) if record_profile else None
    eyes = [np.eye(a) for a in game.action_counts]
    checkpoints = set(checkpoints)
    curve_rows = []
    for t in range(1, horizon + 1):
        pis = [bm_next(learners[i], L) for i in range(game.n_players)]
        utils = expectation_oracle(game, pis)
        for i in range(game.n_players):
            moments[i] += np.outer(pis[i], utils[i])
            shifted = learners[i].q_matrix().T @ pis[i]
            rerouted[i] += float(utils[i] @ shifted)
            realized[i] += float(utils[i] @ pis[i])
            err_sum[i] += float(np.sum(np.abs(shifted - pis[i])))
            bm_observe(learners[i], utils[i], pis[i])
        if record_profile:
            profile.add_round([
                SupportMix([(p, eyes[i][a]) for a, p in enumerate(pis[i]) if p > 0])
                for i in range(game.n_players)
            ])
        if t in checkpoints or t == horizon:
            swap = np.array([
                swap_regret_from_moments(moments[i], t) for i in range(game.n_players)
            ])
            ext = np.array([
                (float(np.sum(np.max(moments[i], axis=1))) - rerouted[i]) / t
                for i in range(game.n_players)
            ])
            curve_rows.append((
                t, float(np.max(swap)), float(np.max(ext)), float(np.max(err_sum / t))
            ))
    swap_final = np.array([
        swap_regret_from_moments(moments[i], horizon) for i in range(game.n_players)
    ])
    gaps = None
    if record_profile and audit:
        gaps = swap_gap(profile, game)
    return CeResult(
        profile=profile,
        rounds=horizon,
        L=L,
        certified_gaps=gaps,
        swap_regrets=swap_final,
        elapsed=time.monotonic() - start,
        curve_rows=curve_rows,
    )


def parse_nfg(text):
    """Read a normal-form game file.

    Header `nfg n A1 ... An`; then either dense payoff lines
    `a1 ... an u1 ... un` (0-based actions) or polymatrix blocks: a line
    `edge i j` followed by A_i rows of player i's payoffs (A_j columns)
    and A_j rows of player j's payoffs (A_i columns).
    """
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    rows = [(no + 1, ln) for no, ln in enumerate(lines) if ln]
    if not rows:
        raise ParseError("empty game file")
    no, header = rows[0]
    parts = header.split()
    if parts[0] != "nfg" or len(parts) < 3:
        raise ParseError(f"line {no}: expected header 'nfg n A1 ... An'")
    try:
        n = int(parts[1])
        counts = [int(p) for p in parts[2:]]
    except ValueError as exc:
        raise ParseError(f"line {no}: {exc}") from None
    if len(counts) != n or n < 1:
        raise ParseError(f"line {no}: header lists {len(counts)} action counts for {n} players")
    body = rows[1:]
    if any(ln.startswith("edge ") for _, ln in body):
        return _parse_polymatrix(n, counts, body)
    return _parse_dense(n, counts, body)


def _parse_dense(n, counts, body):
    shape = tuple(counts)
    tensors = [np.zeros(shape) for _ in range(n)]
    seen = set()
    for no, ln in body:
        parts = ln.split()
        if len(parts) != 2 * n:
            raise ParseError(
                f"line {no}: expected {n} actions and {n} payoffs, got {len(parts)} fields"
            )
        try:
            joint = tuple(int(p) for p in parts[:n])
            payoffs = [float(p) for p in parts[n:]]
        except ValueError as exc:
            raise ParseError(f"line {no}: {exc}") from None
        for i, a in enumerate(joint):
            if not 0 <= a < counts[i]:
                raise ParseError(f"line {no}: action {a} out of range for player {i + 1}")
        if joint in seen:
            raise ParseError(f"line {no}: duplicate joint action {joint}")
        seen.add(joint)
        for i in range(n):
            tensors[i][joint] = payoffs[i]
    try:
        return NormalFormGame(counts, tensors=tensors)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def _parse_polymatrix(n, counts, body):
    edges = {}
    pos = 0
    while pos < len(body):
        no, ln = body[pos]
        parts = ln.split()
        if parts[0] != "edge" or len(parts) != 3:
            raise ParseError(f"line {no}: expected 'edge i j'")
        try:
            i, j = int(parts[1]), int(parts[2])
        except ValueError as exc:
            raise ParseError(f"line {no}: {exc}") from None
        if not (0 <= i < j < n):
            raise ParseError(f"line {no}: edge players must satisfy 0 <= i < j < n")
        if (i, j) in edges:
            raise ParseError(f"line {no}: duplicate edge ({i}, {j})")
        need = counts[i] + counts[j]
        block = body[pos + 1 : pos + 1 + need]
        if len(block) < need:
            raise ParseError(f"line {no}: edge block needs {need} matrix rows")

        def matrix_rows(rows, n_rows, n_cols):
            mat = []
            for r_no, r_ln in rows[:n_rows]:
                vals = r_ln.split()
                if len(vals) != n_cols:
                    raise ParseError(
                        f"line {r_no}: expected {n_cols} payoffs, got {len(vals)}"
                    )
                try:
                    mat.append([float(v) for v in vals])
                except ValueError as exc:
                    raise ParseError(f"line {r_no}: {exc}") from None
            return np.array(mat)

        m_i = matrix_rows(block, counts[i], counts[j])
        m_j = matrix_rows(block[counts[i]:], counts[j], counts[i])
        edges[(i, j)] = (m_i, m_j)
        pos += 1 + need
    try:
        return NormalFormGame(counts, edges=edges)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def dump_nfg(game):
    """Write a game back to the file format parse_nfg reads."""
    header = "nfg " + str(game.n_players) + " " + " ".join(map(str, game.action_counts))
    lines = [header]
    if game.is_polymatrix:
        for (i, j), (m_i, m_j) in sorted(game.edges.items()):
            lines.append(f"edge {i} {j}")
            for row in m_i:
                lines.append(" ".join(f"{v:.17g}" for v in row))
            for row in m_j:
                lines.append(" ".join(f"{v:.17g}" for v in row))
    else:
        for joint in np.ndindex(*game.action_counts):
            payoffs = " ".join(f"{game.tensors[i][joint]:.17g}" for i in range(game.n_players))
            lines.append(" ".join(map(str, joint)) + " " + payoffs)
    return "\n".join(lines) + "\n"


def matching_pennies():
    """The 2x2 zero-sum classic: player 1 wants a match, player 2 a mismatch."""
    u1 = np.array([[1.0, -1.0], [-1.0, 1.0]])
    return NormalFormGame.dense([u1, -u1], name="matching_pennies")
