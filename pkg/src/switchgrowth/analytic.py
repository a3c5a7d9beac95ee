"""Closed-form benchmark for the piecewise-linear technology family.

For gamma > 1 and pi = 0-style parameters the stay-forever value of regime i
is the power law

    v_i(k) = Q_i (k - x_i)^(1-gamma),
    Q_i    = gamma^gamma / (1-gamma) * B_i^(-gamma),
    B_i    = rho_eff + (A_i - delta - pi)(gamma - 1),

with optimal consumption c_i*(k) = (B_i/gamma)(k - x_i) and capital path
k(t) = x_i + (k0 - x_i) exp(g_i t), g_i = (A_i - rho - delta)/gamma.

Pairwise value-matching gives the ratios a_ij = (Q_j/Q_i)^(1/(1-gamma)) and
thresholds k_ij = x_j + (x_j - x_i)/(a_ij - 1) at which the stay-forever
values of regimes i < j cross.  The two- and three-regime solutions below
paste the stay values at those crossings; the switch-at-crossing policy
reproduces them exactly (it is verified path-by-path by the simulation
module).

Caution: the crossing thresholds k_ij are *value-matching* points of the
stay-forever values, not the free boundaries of the costless switching
problem; the dynamic-programming optimum switches where current production
is overtaken (see the solver's comparison reports).  The functions here
reproduce the closed-form benchmark verbatim.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .problem import StationaryProblem
from .regions import RegionReport, SwitchInterval

__all__ = [
    "MINUS_INF",
    "MinusInfinity",
    "AkClosedForm",
    "PropositionPreconditionError",
    "closed_form",
    "q_coefficient",
    "stay_value",
    "stay_consumption",
    "stay_capital_path",
    "a_ratio",
    "k_threshold",
    "switch_time",
    "euler_growth_rate",
    "two_regime_solution",
    "three_regime_regions",
    "equilibrium_path",
    "Phase",
    "PiecewiseValue",
]


class MinusInfinity:
    """Typed sentinel strictly below every float; never enters arithmetic.

    Used as the stay value for k <= x_i (consumption forced to zero forever)
    and as the empty switch obstacle, so that maxima remain well defined
    without propagating floating-point infinities.
    """

    __slots__ = ()
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __lt__(self, other):
        return not isinstance(other, MinusInfinity)

    def __le__(self, other):
        return True

    def __gt__(self, other):
        return False

    def __ge__(self, other):
        return isinstance(other, MinusInfinity)

    def __eq__(self, other):
        return isinstance(other, MinusInfinity)

    def __hash__(self):
        return hash("MinusInfinity")

    def __repr__(self):
        return "MINUS_INF"


MINUS_INF = MinusInfinity()


class PropositionPreconditionError(ValueError):
    """A closed-form region statement's hypothesis fails for these parameters."""


def _require_crra_oracle(p: StationaryProblem, i: int | None = None) -> None:
    if p.prefs.gamma <= 1.0:
        raise ValueError(
            f"closed forms require gamma > 1, got gamma = {p.prefs.gamma}"
        )
    ids = range(1, p.n_regimes + 1) if i is None else (i,)
    for j in ids:
        br = p.finiteness_bracket(j)
        if br <= 0.0:
            raise ValueError(
                f"regime {j}: finiteness condition fails "
                f"(rho_eff + (A - delta - pi)(gamma - 1) = {br} <= 0)"
            )


def q_coefficient(p: StationaryProblem, i: int) -> float:
    """Value coefficient Q_i of the stay-forever power law (negative for gamma > 1)."""
    _require_crra_oracle(p, i)
    g = p.prefs.gamma
    return g ** g / (1.0 - g) * p.finiteness_bracket(i) ** (-g)


def stay_value(p: StationaryProblem, i: int, k: float) -> "float | MinusInfinity":
    """Value of staying in regime i forever; MINUS_INF for k <= x_i."""
    _require_crra_oracle(p, i)
    x = p.regime(i).x
    if k <= x:
        return MINUS_INF
    return q_coefficient(p, i) * (k - x) ** (1.0 - p.prefs.gamma)


def stay_consumption(p: StationaryProblem, i: int, k: float) -> float:
    """Optimal consumption under the stay-forever policy, (B_i/gamma)(k - x_i)."""
    _require_crra_oracle(p, i)
    x = p.regime(i).x
    if k <= x:
        raise ValueError(f"regime {i} needs k > x_i = {x}, got k = {k}")
    return p.finiteness_bracket(i) / p.prefs.gamma * (k - x)


def stay_capital_path(p: StationaryProblem, i: int, k0: float, t: float) -> float:
    """Capital at time t under the stay-forever policy started at k0 > x_i."""
    _require_crra_oracle(p, i)
    x = p.regime(i).x
    if k0 <= x:
        raise ValueError(f"regime {i} needs k0 > x_i = {x}, got k0 = {k0}")
    if t < 0.0:
        raise ValueError(f"time must be nonnegative, got {t}")
    return x + (k0 - x) * math.exp(p.growth_rate(i) * t)


def a_ratio(p: StationaryProblem, i: int, j: int) -> float:
    """Value-matching ratio a_ij = (Q_j/Q_i)^(1/(1-gamma)); a_ji = 1/a_ij."""
    if i == j:
        raise ValueError("a_ratio needs two distinct regimes")
    _require_crra_oracle(p, min(i, j))
    _require_crra_oracle(p, max(i, j))
    g = p.prefs.gamma
    lo, hi = min(i, j), max(i, j)
    a = (q_coefficient(p, hi) / q_coefficient(p, lo)) ** (1.0 / (1.0 - g))
    return a if (i, j) == (lo, hi) else 1.0 / a


def a_ratio_bracket(p: StationaryProblem, i: int, j: int) -> float:
    """Equivalent bracket form of a_ij (i < j):
    [1 + (A_j - A_i)(gamma - 1)/B_i]^(gamma/(gamma - 1))."""
    if i == j:
        raise ValueError("a_ratio needs two distinct regimes")
    g = p.prefs.gamma
    lo, hi = min(i, j), max(i, j)
    _require_crra_oracle(p, lo)
    slope_gap = p.net_slope(hi) - p.net_slope(lo)
    a = (1.0 + slope_gap * (g - 1.0) / p.finiteness_bracket(lo)) ** (g / (g - 1.0))
    return a if (i, j) == (lo, hi) else 1.0 / a


def k_threshold(p: StationaryProblem, i: int, j: int) -> float:
    """Capital level where the stay-forever values of regimes i and j cross,
    k_ij = x_j + (x_j - x_i)/(a_ij - 1) for i < j; symmetric in (i, j)."""
    if i == j:
        raise ValueError("k_threshold needs two distinct regimes")
    lo, hi = min(i, j), max(i, j)
    a = a_ratio(p, lo, hi)
    x_lo, x_hi = p.regime(lo).x, p.regime(hi).x
    if x_lo == x_hi:
        return x_hi  # dominance everywhere above the common threshold
    return x_hi + (x_hi - x_lo) / (a - 1.0)


def switch_time(p: StationaryProblem, i: int, k0: float, k_target: float) -> float:
    """First time the stay-policy path of regime i reaches k_target from k0."""
    x = p.regime(i).x
    g = p.growth_rate(i)
    if g == 0.0:
        raise ValueError(f"regime {i} has zero growth rate; target unreachable")
    if k0 <= x or k_target <= x:
        raise ValueError(f"need k0 and k_target above x_i = {x}")
    t = math.log((k_target - x) / (k0 - x)) / g
    if t < 0.0:
        raise ValueError(
            f"target {k_target} unreachable from {k0} under growth rate {g:+g}"
        )
    return t


def euler_growth_rate(p: StationaryProblem, i: int) -> float:
    """Consumption growth rate on the interior of regime i, (A_i - delta - rho)/gamma."""
    r = p.regime(i)
    return (r.A - p.prefs.delta - p.prefs.rho) / p.prefs.gamma


@dataclass(frozen=True)
class AkClosedForm:
    """All closed-form quantities of a problem in one table.

    Q, g, mpc are per-regime arrays (index 0 is regime 1); a and kthr are
    I x I with a[i][i] = 1 and kthr[i][i] = nan.
    """

    Q: np.ndarray
    a: np.ndarray
    kthr: np.ndarray
    g: np.ndarray
    mpc: np.ndarray


def closed_form(p: StationaryProblem) -> AkClosedForm:
    _require_crra_oracle(p)
    I = p.n_regimes
    Q = np.array([q_coefficient(p, i) for i in range(1, I + 1)])
    g = np.array([p.growth_rate(i) for i in range(1, I + 1)])
    mpc = np.array([p.finiteness_bracket(i) / p.prefs.gamma for i in range(1, I + 1)])
    a = np.ones((I, I))
    kthr = np.full((I, I), math.nan)
    for i in range(1, I + 1):
        for j in range(1, I + 1):
            if i != j:
                a[i - 1, j - 1] = a_ratio(p, i, j)
                kthr[i - 1, j - 1] = k_threshold(p, i, j)
    return AkClosedForm(Q=Q, a=a, kthr=kthr, g=g, mpc=mpc)


@dataclass(frozen=True)
class PiecewiseValue:
    """Stay-value paste: on [edges[m], edges[m+1]) the value is the stay value
    of pieces[m].  edges[0] = 0, edges[-1] = inf."""

    problem: StationaryProblem
    edges: tuple[float, ...]
    pieces: tuple[int, ...]
    regions: RegionReport

    def active_piece(self, k: float) -> int:
        for m in range(len(self.pieces)):
            if self.edges[m] <= k < self.edges[m + 1]:
                return self.pieces[m]
        raise ValueError(f"capital {k} outside (0, inf)")

    def value(self, k: float) -> "float | MinusInfinity":
        return stay_value(self.problem, self.active_piece(k), k)

    def consumption(self, k: float) -> float:
        return stay_consumption(self.problem, self.active_piece(k), k)


def two_regime_solution(p: StationaryProblem) -> PiecewiseValue:
    """Closed-form benchmark for I = 2 under vanishing costs.

    Value: stay value of regime 1 on (0, k12), of regime 2 on [k12, inf).
    Regions: from regime 1, switch to 2 on [k12, inf); from regime 2, switch
    down to 1 on (0, k12) and stay otherwise.
    """
    if p.n_regimes != 2:
        raise ValueError(f"two_regime_solution needs I = 2, got I = {p.n_regimes}")
    if not p.is_vanishing:
        raise ValueError("two_regime_solution is stated for vanishing switching costs")
    _require_crra_oracle(p)
    k12 = k_threshold(p, 1, 2)
    regions = RegionReport(
        switch=(
            (SwitchInterval(k12, math.inf, 2),),
            (SwitchInterval(0.0, k12, 1),),
        )
    )
    return PiecewiseValue(p, edges=(0.0, k12, math.inf), pieces=(1, 2), regions=regions)


def three_regime_regions(p: StationaryProblem) -> PiecewiseValue:
    """Closed-form benchmark for I = 3 under vanishing costs.

    Requires the ordering hypothesis k12 < min(k13, k23); raises
    PropositionPreconditionError otherwise rather than guessing a structure.
    From regime 1: switch to 2 on [k12, min(k13, k23)), continue on
    [min(k13, k23), max(k13, k23)), switch to 3 on [max(k13, k23), inf).
    Regions for regimes 2 and 3 follow the same stay-value dominance
    comparison.
    """
    if p.n_regimes != 3:
        raise ValueError(f"three_regime_regions needs I = 3, got I = {p.n_regimes}")
    if not p.is_vanishing:
        raise ValueError("three_regime_regions is stated for vanishing switching costs")
    _require_crra_oracle(p)
    k12 = k_threshold(p, 1, 2)
    k13 = k_threshold(p, 1, 3)
    k23 = k_threshold(p, 2, 3)
    lo, hi = min(k13, k23), max(k13, k23)
    if not k12 < lo:
        raise PropositionPreconditionError(
            f"region structure requires k12 < min(k13, k23); "
            f"got k12 = {k12}, k13 = {k13}, k23 = {k23}"
        )
    regions = RegionReport(
        switch=(
            (SwitchInterval(k12, lo, 2), SwitchInterval(hi, math.inf, 3)),
            # dominance comparison of stay values for regimes 2 and 3
            (SwitchInterval(0.0, k12, 1), SwitchInterval(k23, math.inf, 3)),
            (SwitchInterval(0.0, k12, 1), SwitchInterval(k12, k23, 2)),
        )
    )
    return PiecewiseValue(
        p,
        edges=(0.0, k12, lo, hi, math.inf),
        pieces=(1, 2, 1, 3),
        regions=regions,
    )


@dataclass(frozen=True)
class Phase:
    """One constant-regime stretch of the closed-form equilibrium path.

    On [t_start, t_end): k(t) = x + (k_start - x) exp(g (t - t_start)),
    c(t) = mpc (k(t) - x), rental rate R = A, wage w = 0.
    """

    regime: int
    t_start: float
    t_end: float
    k_start: float
    x: float
    growth: float
    mpc: float
    R: float
    w: float = 0.0

    def k_at(self, t: float) -> float:
        if not (self.t_start <= t and (t < self.t_end or math.isinf(self.t_end))):
            raise ValueError(f"time {t} outside phase [{self.t_start}, {self.t_end})")
        return self.x + (self.k_start - self.x) * math.exp(self.growth * (t - self.t_start))

    def c_at(self, t: float) -> float:
        return self.mpc * (self.k_at(t) - self.x)


def equilibrium_path(p: StationaryProblem, i0: int, k0: float) -> list[Phase]:
    """Closed-form two-regime equilibrium phases from initial regime i0 at k0.

    Capital is continuous across the single switch; consumption jumps from
    c_1*(k12) to c_2*(k12) there.  A start inside the switch region (or a
    regime-2 start below k12) produces an immediate time-zero transition.
    """
    sol = two_regime_solution(p)
    k12 = sol.edges[1]
    if i0 not in (1, 2):
        raise ValueError(f"initial regime must be 1 or 2, got {i0}")
    if k0 <= 0.0:
        raise ValueError(f"initial capital must be positive, got {k0}")

    def phase(i: int, t0: float, t1: float, kstart: float) -> Phase:
        r = p.regime(i)
        return Phase(
            regime=i, t_start=t0, t_end=t1, k_start=kstart, x=r.x,
            growth=p.growth_rate(i),
            mpc=p.finiteness_bracket(i) / p.prefs.gamma, R=r.A,
        )

    if k0 >= k12:
        # single growing phase in regime 2 (immediate switch if i0 = 1)
        return [phase(2, 0.0, math.inf, k0)]
    # below the crossing both starts run regime 1 until k12, then regime 2
    t12 = switch_time(p, 1, k0, k12)
    return [phase(1, 0.0, t12, k0), phase(2, t12, math.inf, k12)]
