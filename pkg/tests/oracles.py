"""Independent reference computations for the test suite.

Towers are rebuilt by literally stacking labelled levels, one list entry per
level, so nothing here shares code with the interval machinery under test.
"""

from __future__ import annotations

import math


class StackedTower:
    """Explicit stage-by-stage stacking up to ``top`` (one Python int per level)."""

    def __init__(self, spacer_lists, top):
        self.top = top
        self.heights = [1]
        # positions[j][l] = stage-top positions of stage-j level l
        self.embed = {}
        n = 1
        towers = {1: [0]}
        for j, spacers in enumerate(spacer_lists[: top - 1], start=1):
            stacked = []
            for s in spacers:
                stacked.extend(range(n))
                stacked.extend([None] * s)
            towers[j + 1] = stacked
            n = len(stacked)
            self.heights.append(n)
        self._towers = towers

    def positions(self, j, level):
        """Positions of a stage-``j`` level in the stage-``top`` tower."""
        cur = [level]
        for stage in range(j + 1, self.top + 1):
            where = self._index(stage)
            cur = [p for c in cur for p in where[c]]
        return cur

    def _index(self, stage):
        if stage not in self.embed:
            where = {}
            for p, lab in enumerate(self._towers[stage]):
                if lab is not None:
                    where.setdefault(lab, []).append(p)
            self.embed[stage] = where
        return self.embed[stage]

    def points(self, level_set):
        out = set()
        for lo, hi in level_set.intervals:
            for lvl in range(lo, hi):
                out.update(self.positions(level_set.stage, lvl))
        return out


def successor_power(points, m, height):
    """``m``-fold application of the level successor map on explicit positions."""
    cur = set(points)
    for _ in range(m):
        if cur and max(cur) + 1 >= height:
            raise ValueError("successor undefined at the top level")
        cur = {p + 1 for p in cur}
    return cur


def orthant_quadrature(rho, steps=20000):
    """``P(X > 0, Y > 0)`` for a standard bivariate normal, by direct quadrature.

    Uses ``P = int_0^inf phi(x) Phi(rho x / sqrt(1 - rho^2)) dx`` with the
    trapezoid rule on ``[0, 12]``.
    """
    c = rho / math.sqrt(1.0 - rho * rho)
    h = 12.0 / steps
    total = 0.0
    for i in range(steps + 1):
        x = i * h
        f = math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi) * 0.5 * (1 + math.erf(c * x / math.sqrt(2)))
        total += f * (0.5 if i in (0, steps) else 1.0)
    return total * h


def entropy_nats(probs):
    return -sum(p * math.log(p) for p in probs if p > 0)
