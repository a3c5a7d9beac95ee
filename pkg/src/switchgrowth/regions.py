"""Switch / continuation region bookkeeping.

A RegionReport records, for each regime i, the set S_i of capital levels at
which leaving regime i is optimal, split into half-open intervals labelled
with the switch target j (the pieces S_ij), plus the complementary
continuation intervals N_i.  Interval semantics are [lo, hi); `math.inf` is
a legal right endpoint and 0.0 stands for the open lower edge of the state
space (0, inf).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = ["SwitchInterval", "RegionReport"]


@dataclass(frozen=True)
class SwitchInterval:
    """Half-open interval [lo, hi) on which switching to `target` is optimal."""

    lo: float
    hi: float
    target: int

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi})")
        if self.target < 1:
            raise ValueError(f"switch target must be a 1-based regime id, got {self.target}")

    def contains(self, k: float) -> bool:
        return self.lo <= k < self.hi


@dataclass(frozen=True)
class RegionReport:
    """Per-regime switch intervals and their continuation complement.

    switch: tuple over regimes (1-based order) of tuples of SwitchInterval,
            sorted and pairwise disjoint.
    domain: (lo, hi) of the state space covered by the report; continuation
            intervals are derived as the complement of the switch pieces.
    """

    switch: tuple[tuple[SwitchInterval, ...], ...]
    domain: tuple[float, float] = (0.0, math.inf)

    def __post_init__(self):
        lo, hi = self.domain
        for pieces in self.switch:
            last = lo
            for piece in pieces:
                if piece.lo < last - 1e-15:
                    raise ValueError("switch intervals must be sorted and disjoint")
                last = piece.hi
            if pieces and pieces[-1].hi > hi + 1e-12 and math.isfinite(hi):
                raise ValueError("switch interval exceeds the report domain")

    @property
    def n_regimes(self) -> int:
        return len(self.switch)

    def switch_pieces(self, i: int) -> tuple[SwitchInterval, ...]:
        return self.switch[i - 1]

    def continuation(self, i: int) -> tuple[tuple[float, float], ...]:
        """Maximal intervals of the domain on which staying in regime i is optimal."""
        lo, hi = self.domain
        out = []
        cur = lo
        for piece in self.switch[i - 1]:
            if piece.lo > cur:
                out.append((cur, piece.lo))
            cur = max(cur, piece.hi)
        if cur < hi:
            out.append((cur, hi))
        return tuple(out)

    def switch_target(self, i: int, k: float) -> int | None:
        """Regime to switch to from regime i at capital k, or None to stay."""
        for piece in self.switch[i - 1]:
            if piece.contains(k):
                return piece.target
        return None

    def covers_domain(self, i: int) -> bool:
        """True if S_i and N_i together tile the domain (always, by construction)."""
        lo, hi = self.domain
        total = sum(p.hi - p.lo for p in self.switch[i - 1] if math.isfinite(p.hi))
        total += sum(b - a for a, b in self.continuation(i) if math.isfinite(b))
        span = hi - lo
        if not math.isfinite(span):
            return True
        return math.isclose(total, span, rel_tol=1e-12, abs_tol=1e-12)

    def as_dict(self) -> dict:
        """JSON-ready representation (regime keys are 1-based strings)."""
        return {
            "domain": [self.domain[0], self.domain[1]],
            "switch": {
                str(i): [
                    {"lo": p.lo, "hi": p.hi, "target": p.target}
                    for p in self.switch_pieces(i)
                ]
                for i in range(1, self.n_regimes + 1)
            },
            "continuation": {
                str(i): [[a, b] for a, b in self.continuation(i)]
                for i in range(1, self.n_regimes + 1)
            },
        }
