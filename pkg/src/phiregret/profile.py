"""Correlated strategy profiles: uniform-over-rounds mixtures of per-player
product distributions, with bit-exact CSV round-tripping.

A profile stores, for each round and player, a list of mixture components.
The sampling semantics are: draw a round uniformly; then each player
independently draws one of its components uniformly and an atom from it.
Components are either explicit atom lists (SupportMix) or implicit
behavioral descriptors; export rewrites descriptors as explicit atoms.
"""

from __future__ import annotations

import numpy as np

from .errors import ParseError
from .maps import SupportMix


class CorrelatedProfile:
    def __init__(self, n_players, dims=None):
        self.n_players = int(n_players)
        self.rounds = 0
        self.dims = list(dims) if dims is not None else None
        self._components: list[list[list]] = []  # [t][player] -> components

    def add_round(self, per_player_components):
        """Append one round: a per-player list of mixture components.

        A component must expose mean() (and support()/atoms for export).
        A bare component is treated as a one-component mixture.
        """
        if len(per_player_components) != self.n_players:
            raise ValueError(
                f"expected components for {self.n_players} players, "
                f"got {len(per_player_components)}"
            )
        row = []
        for comps in per_player_components:
            if not isinstance(comps, (list, tuple)):
                comps = [comps]
            if not comps:
                raise ValueError("a player needs at least one component")
            row.append(list(comps))
        self._components.append(row)
        self.rounds += 1

    def components(self, t, player):
        return self._components[t][player]

    def round_mean(self, t, player):
        comps = self._components[t][player]
        total = comps[0].mean().copy()
        for c in comps[1:]:
            total += c.mean()
        return total / len(comps)

    def stacked_means(self, player):
        """T x dim matrix of the player's per-round mean strategies."""
        return np.array([self.round_mean(t, player) for t in range(self.rounds)])

    @staticmethod
    def _atoms(component):
        if isinstance(component, SupportMix):
            return component.atoms
        if hasattr(component, "support"):
            return component.support().atoms
        raise TypeError(
            f"component {type(component).__name__} has no atom expansion"
        )

    def export_csv(self):
        """One row per pure atom: t,player,ell,j,alpha,pure-strategy-bits.

        Indices are 1-based; alpha values carry 17 significant digits so the
        import reproduces them bit for bit.
        """
        lines = ["t,player,ell,j,alpha,pure-strategy-bits"]
        for t in range(self.rounds):
            for i in range(self.n_players):
                for ell, comp in enumerate(self._components[t][i], start=1):
                    for j, (alpha, y) in enumerate(self._atoms(comp), start=1):
                        bits = "".join(str(int(round(b))) for b in y)
                        lines.append(f"{t + 1},{i + 1},{ell},{j},{alpha:.17g},{bits}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text):
        rows = {}
        dims = {}
        n_players = 0
        n_rounds = 0
        lines = [ln.strip() for ln in text.strip().splitlines()]
        if not lines or lines[0] != "t,player,ell,j,alpha,pure-strategy-bits":
            raise ParseError("missing profile header row")
        for lineno, line in enumerate(lines[1:], start=2):
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 6:
                raise ParseError(f"line {lineno}: expected 6 fields, got {len(parts)}")
            try:
                t, player, ell = int(parts[0]), int(parts[1]), int(parts[2])
                alpha = float(parts[4])
                bits = np.array([float(b) for b in parts[5]])
            except ValueError as exc:
                raise ParseError(f"line {lineno}: {exc}") from None
            if t < 1 or player < 1 or ell < 1:
                raise ParseError(f"line {lineno}: indices are 1-based")
            if alpha < 0:
                raise ParseError(f"line {lineno}: negative atom weight {alpha}")
            rows.setdefault((t - 1, player - 1), {}).setdefault(ell, []).append(
                (alpha, bits)
            )
            dims.setdefault(player - 1, len(parts[5]))
            if dims[player - 1] != len(parts[5]):
                raise ParseError(f"line {lineno}: inconsistent strategy length")
            n_players = max(n_players, player)
            n_rounds = max(n_rounds, t)
        profile = cls(n_players, dims=[dims.get(i) for i in range(n_players)])
        for t in range(n_rounds):
            per_player = []
            for i in range(n_players):
                levels = rows.get((t, i))
                if not levels:
                    raise ParseError(f"round {t + 1}: no atoms for player {i + 1}")
                comps = [
                    SupportMix(levels[ell]) for ell in sorted(levels)
                ]
                per_player.append(comps)
            profile.add_round(per_player)
        return profile

    def __repr__(self):
        return f"CorrelatedProfile(players={self.n_players}, rounds={self.rounds})"
