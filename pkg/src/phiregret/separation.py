"""The depth hierarchy experiment: a game and correlated profile whose best
deviation value jumps from 0 to 1 exactly when the decision-tree depth
reaches the number of bits.

Player 1 picks k signs, player 2 one sign; player 1 is paid the product of
its first sign and player 2's sign, player 2 is paid nothing. The profile is
uniform over the sign assignments with player 2 holding the parity of all k
signs. Parity of independent fair signs is uncorrelated with every monomial
of fewer than k of them, so no shallow decision tree profits; reading all k
bits and playing their parity on the first coordinate profits exactly 1.

Signs live in {-1, 1}; tree-form strategies encode sign s as the bit
b = (1 + s) / 2, so s = x[set terminal] - x[clear terminal], a linear map
with slope 1 — deviation values are identical in both coordinate systems.
"""

from __future__ import annotations

import numpy as np

from .dags import build_dt_problem
from .efg import EFGame, phi_equilibrium_gap
from .maps import SupportMix
from .profile import CorrelatedProfile
from .tfsdp import hypercube_problem

MAX_BITS = 10


def sign_payoff_matrix(n_bits):
    """u1[z1, z2] for u1 = (first sign of P1) * (P2's sign) in bit terminals."""
    u = np.zeros((2 * n_bits, 2))
    for a in (0, 1):
        for b in (0, 1):
            u[a, b] = (2 * a - 1) * (2 * b - 1)
    return u


def separation_game(k):
    """Build the k-bit hierarchy game and its parity-correlated profile."""
    if not 1 <= k <= MAX_BITS:
        raise ValueError(f"k must be between 1 and {MAX_BITS}")
    p1 = hypercube_problem(k)
    p2 = hypercube_problem(1)
    game = EFGame(
        [p1, p2],
        [sign_payoff_matrix(k), np.zeros((2 * k, 2))],
        name=f"separation-{k}",
    )
    profile = CorrelatedProfile(2, dims=[2 * k, 2])
    for assignment in range(2 ** k):
        bits = [(assignment >> j) & 1 for j in range(k)]
        x = np.zeros(2 * k)
        for j, b in enumerate(bits):
            x[2 * j + b] = 1.0
        parity = 1 if (k - sum(bits)) % 2 == 0 else 0  # sign product over bits
        y = np.zeros(2)
        y[parity] = 1.0
        profile.add_round([SupportMix([(1.0, x)]), SupportMix([(1.0, y)])])
    return game, profile


def separation_table(k, depths=None, distinct=False):
    """Audited deviation gap of the parity profile per decision-tree depth."""
    game, profile = separation_game(k)
    if depths is None:
        depths = range(k + 1)
    table = []
    for depth in depths:
        dag = build_dt_problem(k, depth, distinct=distinct)
        gap = phi_equilibrium_gap(profile, game, 0, dag)
        table.append((int(depth), float(gap)))
    return table
