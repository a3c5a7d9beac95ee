"""Problem data for the stationary optimal-switching growth model.

An economy chooses, at every instant, a consumption rate and one of I
piecewise-linear production technologies ("regimes").  Regime i produces
``A_i * (k - x_i)_+`` out of capital per head ``k``; switching from regime i
to regime j incurs a one-time utility cost ``eta[i, j]`` charged at the
switch time.  Capital per head evolves as

    dk/dt = (A_i - delta - pi) * (k - x_i)_+ - c

i.e. depreciation and population dilution act on capital employed above the
regime threshold.  This is the drift family for which the model's
closed-form benchmarks (see :mod:`switchgrowth.analytic`) are exact.

Utility is CRRA: ``u(c) = c^(1-gamma)/(1-gamma)`` for gamma != 1 and
``u(c) = ln c`` for gamma = 1.  Utility flows are discounted at the
effective rate ``rho - pi``.

All types are immutable; all operations are pure functions of their inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Preferences",
    "AkRegime",
    "SwitchingCostMatrix",
    "StationaryProblem",
    "ValidationReport",
    "validate_problem",
    "drift",
    "utility",
    "marginal_utility",
    "inverse_marginal_utility",
]


@dataclass(frozen=True)
class Preferences:
    """CRRA preferences and demographic rates.

    gamma: relative risk aversion (> 0; gamma = 1 means log utility)
    rho:   pure discount rate
    pi:    population growth rate
    delta: capital depreciation rate
    """

    gamma: float
    rho: float
    pi: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        for name in ("gamma", "rho", "pi", "delta"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"preference field {name!r} must be finite, got {v!r}")

    @property
    def rho_eff(self) -> float:
        """Effective discount rate rho - pi."""
        return self.rho - self.pi


@dataclass(frozen=True)
class AkRegime:
    """One production technology f(k) = A * (k - x)_+.

    index: 1-based regime id
    A:     technology level
    x:     capital threshold below which the technology produces nothing
    """

    index: int
    A: float
    x: float

    def __post_init__(self):
        if self.index < 1:
            raise ValueError(f"regime index must be >= 1, got {self.index}")
        if not (math.isfinite(self.A) and math.isfinite(self.x)):
            raise ValueError("regime parameters must be finite")

    def production(self, k: float) -> float:
        return self.A * max(k - self.x, 0.0)


@dataclass(frozen=True, eq=False)
class SwitchingCostMatrix:
    """Constant one-time switching costs eta[i, j] (utility units, 1-based i, j).

    The all-zero matrix is the distinguished "vanishing" mode: it is exempt
    from the strict triangle inequality and routes to the pooled solver.
    """

    eta: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.eta, dtype=float)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise ValueError(f"cost matrix must be square, got shape {e.shape}")
        if not np.all(np.isfinite(e)):
            raise ValueError("cost matrix entries must be finite")
        e = e.copy()
        e.setflags(write=False)
        object.__setattr__(self, "eta", e)

    @classmethod
    def vanishing(cls, n_regimes: int) -> "SwitchingCostMatrix":
        return cls(np.zeros((n_regimes, n_regimes)))

    @classmethod
    def uniform(cls, n_regimes: int, cost: float) -> "SwitchingCostMatrix":
        """Equal cost for every off-diagonal pair (satisfies the strict triangle
        inequality whenever cost > 0)."""
        e = np.full((n_regimes, n_regimes), float(cost))
        np.fill_diagonal(e, 0.0)
        return cls(e)

    @property
    def n_regimes(self) -> int:
        return self.eta.shape[0]

    @property
    def is_vanishing(self) -> bool:
        return bool(np.all(self.eta == 0.0))

    def cost(self, i: int, j: int) -> float:
        return float(self.eta[i - 1, j - 1])


@dataclass(frozen=True)
class StationaryProblem:
    """Full model data: regimes, preferences, and switching costs."""

    regimes: tuple[AkRegime, ...]
    prefs: Preferences
    costs: SwitchingCostMatrix

    def __post_init__(self):
        regimes = tuple(self.regimes)
        if len(regimes) < 1:
            raise ValueError("need at least one regime")
        if self.costs.n_regimes != len(regimes):
            raise ValueError(
                f"cost matrix is {self.costs.n_regimes}x{self.costs.n_regimes} "
                f"but there are {len(regimes)} regimes"
            )
        object.__setattr__(self, "regimes", regimes)

    # -- construction helpers -------------------------------------------------

    @classmethod
    def from_arrays(
        cls,
        A: "list[float]",
        x: "list[float]",
        prefs: Preferences,
        eta: "SwitchingCostMatrix | np.ndarray | float | str" = "vanishing",
    ) -> "StationaryProblem":
        regimes = tuple(AkRegime(i + 1, float(a), float(xx)) for i, (a, xx) in enumerate(zip(A, x)))
        if isinstance(eta, SwitchingCostMatrix):
            costs = eta
        elif isinstance(eta, str):
            if eta != "vanishing":
                raise ValueError(f"unknown cost spec {eta!r}")
            costs = SwitchingCostMatrix.vanishing(len(regimes))
        elif np.isscalar(eta):
            costs = SwitchingCostMatrix.uniform(len(regimes), float(eta))
        else:
            costs = SwitchingCostMatrix(np.asarray(eta, dtype=float))
        return cls(regimes, prefs, costs)

    # -- basic accessors ------------------------------------------------------

    @property
    def n_regimes(self) -> int:
        return len(self.regimes)

    @property
    def rho_eff(self) -> float:
        return self.prefs.rho_eff

    @property
    def is_vanishing(self) -> bool:
        return self.costs.is_vanishing

    def regime(self, i: int) -> AkRegime:
        if not 1 <= i <= self.n_regimes:
            raise ValueError(f"unknown regime id {i}; have 1..{self.n_regimes}")
        return self.regimes[i - 1]

    def net_slope(self, i: int) -> float:
        """Slope of the drift in (k - x_i)_+: A_i - delta - pi."""
        r = self.regime(i)
        return r.A - self.prefs.delta - self.prefs.pi

    def resource(self, i: int, k):
        """Production net of effective depreciation, (A_i - delta - pi)(k - x_i)_+.

        Accepts scalars or arrays.
        """
        r = self.regime(i)
        return self.net_slope(i) * np.maximum(k - r.x, 0.0)

    def drift(self, i: int, k: float, c: float) -> float:
        """Rate of change of capital per head in regime i at consumption c."""
        return float(self.resource(i, k)) - c

    def finiteness_bracket(self, i: int) -> float:
        """rho_eff + (A_i - delta - pi)(gamma - 1); must be positive for the
        stay-forever value of regime i to be finite.  Equals
        rho + (A_i - delta)(gamma - 1) when pi = 0."""
        p = self.prefs
        return p.rho_eff + self.net_slope(i) * (p.gamma - 1.0)

    def growth_rate(self, i: int) -> float:
        """Interior growth rate of capital under the optimal stay policy,
        (A_i - rho - delta)/gamma.  Independent of pi."""
        r = self.regime(i)
        return (r.A - self.prefs.rho - self.prefs.delta) / self.prefs.gamma

    # -- utility --------------------------------------------------------------

    def utility(self, c: float) -> float:
        if c <= 0.0:
            raise ValueError(f"consumption must be positive, got {c!r}")
        g = self.prefs.gamma
        if g == 1.0:
            return math.log(c)
        return c ** (1.0 - g) / (1.0 - g)

    def marginal_utility(self, c: float) -> float:
        if c <= 0.0:
            raise ValueError(f"consumption must be positive, got {c!r}")
        return c ** (-self.prefs.gamma)

    def inverse_marginal_utility(self, m: float) -> float:
        if m <= 0.0:
            raise ValueError(f"marginal utility must be positive, got {m!r}")
        return m ** (-1.0 / self.prefs.gamma)

    # -- vectorized internals used by the solver ------------------------------

    def utility_vec(self, c: np.ndarray) -> np.ndarray:
        g = self.prefs.gamma
        if g == 1.0:
            return np.log(c)
        return c ** (1.0 - g) / (1.0 - g)

    def resource_table(self, k: np.ndarray) -> np.ndarray:
        """(I, len(k)) array of net resources per regime."""
        return np.stack([np.asarray(self.resource(i, k), dtype=float)
                         for i in range(1, self.n_regimes + 1)])


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of validate_problem: empty `violations` means valid."""

    violations: tuple[str, ...] = ()
    notes: tuple[str, ...] = ()

    @property
    def valid(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        lines = ["valid" if self.valid else "INVALID"]
        lines += [f"violation: {v}" for v in self.violations]
        lines += [f"note: {n}" for n in self.notes]
        return "\n".join(lines)


def validate_problem(p: StationaryProblem) -> ValidationReport:
    """Check every standing assumption; report (never raise on) violations.

    Checks: positive effective discount, parameter signs, strict ordering of
    technologies and thresholds, cost-matrix diagonal/nonnegativity/strict
    triangle inequality (skipped in vanishing mode), and the per-regime
    finiteness condition.  Growth relevance (sign of A_i - rho - delta) is
    recorded as a note, not a violation.
    """
    bad: list[str] = []
    notes: list[str] = []
    prefs, I = p.prefs, p.n_regimes

    if prefs.gamma <= 0.0:
        bad.append(f"gamma must be positive, got {prefs.gamma}")
    if prefs.rho_eff <= 0.0:
        bad.append(f"effective discount rho - pi must be positive, got {prefs.rho_eff}")
    if prefs.delta < 0.0:
        bad.append(f"delta must be nonnegative, got {prefs.delta}")
    if prefs.pi < 0.0:
        bad.append(f"pi must be nonnegative, got {prefs.pi}")

    for r in p.regimes:
        if r.A <= 0.0:
            bad.append(f"regime {r.index}: technology level must be positive, got {r.A}")
        if r.x < 0.0:
            bad.append(f"regime {r.index}: threshold must be nonnegative, got {r.x}")
    for a, b in zip(p.regimes, p.regimes[1:]):
        if not a.A < b.A:
            bad.append(f"technology levels must increase strictly: A_{a.index}={a.A} !< A_{b.index}={b.A}")
        if not a.x < b.x:
            bad.append(f"thresholds must increase strictly: x_{a.index}={a.x} !< x_{b.index}={b.x}")

    eta = p.costs.eta
    if p.is_vanishing:
        notes.append("vanishing switching costs: pooled single-value mode")
    else:
        for i in range(I):
            if eta[i, i] != 0.0:
                bad.append(f"diagonal cost nonzero: eta[{i + 1},{i + 1}] = {eta[i, i]}")
        if np.any(eta < 0.0):
            bad.append("switching costs must be nonnegative")
        for i in range(I):
            for j in range(I):
                if j == i:
                    continue
                for l in range(I):
                    if l == j:
                        continue
                    if not eta[i, j] + eta[j, l] > eta[i, l]:
                        bad.append(
                            "triangle inequality violated: "
                            f"eta[{i + 1},{j + 1}] + eta[{j + 1},{l + 1}] = "
                            f"{eta[i, j] + eta[j, l]} <= eta[{i + 1},{l + 1}] = {eta[i, l]}"
                        )

    if prefs.gamma > 0.0:
        for r in p.regimes:
            br = p.finiteness_bracket(r.index)
            if br <= 0.0:
                bad.append(
                    f"regime {r.index}: finiteness condition violated, "
                    f"rho_eff + (A - delta - pi)(gamma - 1) = {br} <= 0"
                )
            g = p.growth_rate(r.index)
            notes.append(
                f"regime {r.index}: interior growth rate {g:+.6g} "
                f"({'growing' if g > 0 else 'stationary' if g == 0 else 'shrinking'})"
            )

    return ValidationReport(tuple(bad), tuple(notes))


# Module-level forms of the operations, matching the functional interface.

def drift(p: StationaryProblem, i: int, k: float, c: float) -> float:
    return p.drift(i, k, c)


def utility(p: StationaryProblem, c: float) -> float:
    return p.utility(c)


def marginal_utility(p: StationaryProblem, c: float) -> float:
    return p.marginal_utility(c)


def inverse_marginal_utility(p: StationaryProblem, m: float) -> float:
    return p.inverse_marginal_utility(m)
