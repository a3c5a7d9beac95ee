"""Forward simulation of the controlled economy under a switching policy.

A policy supplies, for the current regime i: the consumption rule c_i(k),
the switch regions S_i (interval lists with targets), and the value v_i(k)
used by the dynamic-programming consistency check.  Two implementations are
provided: closed-form policies built from the analytic benchmark, and
grid policies built from a converged numerical solution (consumption is
linearly interpolated between nodes; regions come from extract_regions).

Integration is classical fixed-step fourth-order Runge-Kutta.  After each
step the switch region of the current regime is checked; on a crossing the
event time is located by bisection to `event_tol`, capital is continuous
across the switch, the discounted switching cost is charged, and at least
one full step must elapse before the next switch (an immediate switch is
allowed at t = 0 only).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import analytic
from .problem import StationaryProblem
from .regions import RegionReport
from .solver import DiscretizedSolution, VanishingSolution, extract_regions

__all__ = [
    "SimConfig",
    "SwitchEvent",
    "Trajectory",
    "AnalyticPolicy",
    "GridPolicy",
    "simulate",
    "total_utility",
    "dpp_check",
    "euler_residual",
    "dynamics_probes",
    "ProbeReport",
]


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    t_max: float = 100.0
    event_tol: float = 1e-10
    tail_handling: str = "analytic-tail"  # or "truncate"

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")
        if not self.t_max > 0.0:
            raise ValueError("t_max must be positive")
        if self.tail_handling not in ("analytic-tail", "truncate"):
            raise ValueError(f"unknown tail_handling {self.tail_handling!r}")


class AnalyticPolicy:
    """Closed-form policy: stay-consumption inside continuation regions,
    switch at the stay-value crossing thresholds."""

    def __init__(self, p: StationaryProblem):
        if p.n_regimes == 1:
            regions = RegionReport(switch=((),))
            self._value = lambda i, k: analytic.stay_value(p, 1, k)
        elif p.n_regimes == 2:
            sol = analytic.two_regime_solution(p)
            regions = sol.regions
            self._value = lambda i, k: sol.value(k)
        elif p.n_regimes == 3:
            sol = analytic.three_regime_regions(p)
            regions = sol.regions
            self._value = lambda i, k: sol.value(k)
        else:
            raise ValueError("closed-form policies cover 1 to 3 regimes")
        self.problem = p
        self.regions = regions
        self.domain = (0.0, math.inf)

    def consumption(self, i: int, k: float) -> float:
        return analytic.stay_consumption(self.problem, i, k)

    def value(self, i: int, k: float):
        return self._value(i, k)


class GridPolicy:
    """Policy read off a converged numerical solution."""

    def __init__(self, solution):
        if not isinstance(solution, (DiscretizedSolution, VanishingSolution)):
            raise ValueError("GridPolicy needs a solver solution")
        self.problem = solution.problem
        self.solution = solution
        self.regions = extract_regions(solution)
        nodes = solution.grid.nodes
        self.domain = (float(nodes[0]), float(nodes[-1]))
        self._nodes = nodes

    def consumption(self, i: int, k: float) -> float:
        if isinstance(self.solution, VanishingSolution):
            c = self.solution.c_regime[i - 1]
        else:
            c = self.solution.c[i - 1]
        return float(np.interp(k, self._nodes, c))

    def value(self, i: int, k: float) -> float:
        v = self.solution.v if isinstance(self.solution, VanishingSolution) \
            else self.solution.v[i - 1]
        return float(np.interp(k, self._nodes, v))


@dataclass(frozen=True)
class SwitchEvent:
    time: float
    from_regime: int
    to_regime: int
    k: float
    cost_charged: float   # discounted: exp(-rho_eff * time) * eta[from, to]
    c_before: float = math.nan  # consumption just before the switch
    u_before: float = math.nan  # utility flow just before the switch


@dataclass(frozen=True)
class Trajectory:
    """Time-sampled controlled path.

    Arrays t, k, c, regime, u_inst, U_cum share one length; `regime` is
    right-continuous (at a switch time the sample already carries the new
    regime, while capital is continuous).  U_cum is the running discounted
    utility net of charged switching costs.
    """

    t: np.ndarray
    k: np.ndarray
    c: np.ndarray
    regime: np.ndarray
    u_inst: np.ndarray
    U_cum: np.ndarray
    events: tuple[SwitchEvent, ...]
    problem: StationaryProblem
    config: SimConfig
    truncated: bool = False
    truncation_reason: str = ""

    @property
    def final_k(self) -> float:
        return float(self.k[-1])

    @property
    def final_regime(self) -> int:
        return int(self.regime[-1])

    @property
    def final_time(self) -> float:
        return float(self.t[-1])


def _rk4_step(f, k: float, dt: float) -> float:
    k1 = f(k)
    k2 = f(k + 0.5 * dt * k1)
    k3 = f(k + 0.5 * dt * k2)
    k4 = f(k + dt * k3)
    return k + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def simulate(p: StationaryProblem, policy, i0: int, k0: float,
             cfg: SimConfig | None = None) -> Trajectory:
    """Integrate the closed-loop dynamics from (i0, k0) to t_max."""
    cfg = cfg or SimConfig()
    if k0 <= 0.0:
        raise ValueError(f"initial capital must be positive, got {k0}")
    if not 1 <= i0 <= p.n_regimes:
        raise ValueError(f"unknown regime id {i0}")
    if policy.problem is not p:
        raise ValueError("policy was built for a different problem instance")
    regions = policy.regions
    eta = p.costs.eta
    rho_eff = p.rho_eff
    lo_dom, hi_dom = policy.domain

    def drift_fn(i):
        slope = p.net_slope(i)
        x = p.regime(i).x
        return lambda k: slope * max(k - x, 0.0) - policy.consumption(i, k)

    t, k, i = 0.0, float(k0), int(i0)
    events: list[SwitchEvent] = []
    ts, ks, cs, regs, us, Us = [], [], [], [], [], []
    U = 0.0
    truncated = False
    reason = ""

    def record(t_, k_, i_):
        c_ = policy.consumption(i_, k_)
        u_ = p.utility(max(c_, 1e-300))
        ts.append(t_); ks.append(k_); cs.append(c_)
        regs.append(i_); us.append(u_); Us.append(U)
        return c_, u_

    def discounted(tt, uu):
        return math.exp(-rho_eff * tt) * uu

    # time-zero switch (at most one)
    tgt = regions.switch_target(i, k)
    if tgt is not None:
        cost = eta[i - 1, tgt - 1]
        events.append(SwitchEvent(0.0, i, tgt, k, cost))
        U -= cost
        i = tgt

    c_prev, u_prev = record(t, k, i)
    min_next_switch = cfg.dt  # one-step separation after any switch

    while t < cfg.t_max - 1e-12:
        dt = min(cfg.dt, cfg.t_max - t)
        f = drift_fn(i)
        k_new = _rk4_step(f, k, dt)
        t_new = t + dt

        if not (lo_dom < k_new <= hi_dom) or k_new <= 0.0:
            truncated = True
            reason = f"capital left the policy domain at t = {t_new:.6g} (k = {k_new:.6g})"
            U += 0.5 * dt * (discounted(t, u_prev) + discounted(t_new, u_prev))
            ts.append(t_new); ks.append(max(k_new, 0.0)); cs.append(c_prev)
            regs.append(i); us.append(u_prev); Us.append(U)
            break

        tgt = regions.switch_target(i, k_new)
        if tgt is not None and t_new >= min_next_switch:
            # bisect the crossing time within (t, t_new]
            a, b = 0.0, dt
            while b - a > cfg.event_tol:
                mid = 0.5 * (a + b)
                k_mid = _rk4_step(f, k, mid) if mid > 0.0 else k
                if regions.switch_target(i, k_mid) is not None:
                    b = mid
                else:
                    a = mid
            tau = t + b
            k_tau = _rk4_step(f, k, b) if b > 0.0 else k
            tgt = regions.switch_target(i, k_tau)
            if tgt is None:  # boundary sits within event_tol; take the region side
                tgt = regions.switch_target(i, _rk4_step(f, k, min(b + cfg.event_tol, dt)))
            c_tau_old = policy.consumption(i, k_tau)
            u_tau_old = p.utility(max(c_tau_old, 1e-300))
            U += 0.5 * (tau - t) * (discounted(t, u_prev) + discounted(tau, u_tau_old))
            cost = eta[i - 1, tgt - 1]
            U -= math.exp(-rho_eff * tau) * cost
            events.append(SwitchEvent(tau, i, tgt, k_tau,
                                      math.exp(-rho_eff * tau) * cost,
                                      c_before=c_tau_old, u_before=u_tau_old))
            i = tgt
            t, k = tau, k_tau
            c_prev, u_prev = record(t, k, i)
            min_next_switch = t + cfg.dt
            continue

        c_new = policy.consumption(i, k_new)
        u_new = p.utility(max(c_new, 1e-300))
        U += 0.5 * dt * (discounted(t, u_prev) + discounted(t_new, u_new))
        t, k = t_new, k_new
        c_prev, u_prev = record(t, k, i)

    return Trajectory(
        t=np.asarray(ts), k=np.asarray(ks), c=np.asarray(cs),
        regime=np.asarray(regs, dtype=np.int32), u_inst=np.asarray(us),
        U_cum=np.asarray(Us), events=tuple(events), problem=p, config=cfg,
        truncated=truncated, truncation_reason=reason,
    )


_trapz = getattr(np, "trapezoid", None) or np.trapz


def total_utility(traj: Trajectory, p: StationaryProblem) -> float:
    """Discounted utility of the whole path: trapezoid quadrature of
    exp(-rho_eff t) u(c(t)) minus charged switching costs, plus (in
    analytic-tail mode, gamma > 1) the closed-form continuation value of
    staying in the final regime beyond t_max.

    Consumption jumps at switch times; each event carries the pre-switch
    utility flow so the quadrature treats the jump exactly rather than
    smoothing across it.
    """
    if traj.t.size <= 1:
        return 0.0
    t = traj.t
    disc = np.exp(-p.rho_eff * t) * traj.u_inst
    total = 0.0
    seg_start = 0
    for e in traj.events:
        if e.time <= t[0]:
            continue  # a time-zero switch has no pre-switch sliver
        m = int(np.searchsorted(t, e.time, side="left"))
        if m > seg_start:
            total += float(_trapz(disc[seg_start:m], t[seg_start:m]))
            # sliver between the last pre-switch sample and the event time
            d_tau = math.exp(-p.rho_eff * e.time) * e.u_before
            total += 0.5 * (e.time - t[m - 1]) * (disc[m - 1] + d_tau)
        seg_start = m
    if t.size > seg_start + 1:
        total += float(_trapz(disc[seg_start:], t[seg_start:]))
    total -= sum(e.cost_charged for e in traj.events)
    if traj.config.tail_handling == "analytic-tail" and p.prefs.gamma > 1.0:
        i_fin, k_fin, t_fin = traj.final_regime, traj.final_k, traj.final_time
        tail = analytic.stay_value(p, i_fin, k_fin)
        if not isinstance(tail, analytic.MinusInfinity):
            total += math.exp(-p.rho_eff * t_fin) * float(tail)
    return total


def dpp_check(p: StationaryProblem, policy, traj: Trajectory, r: float) -> float:
    """Dynamic-programming consistency residual at intermediate time r:

        | v_{i0}(k0) - [ int_0^r e^(-rho_eff s) u ds
                         - sum_{tau_n < r} e^(-rho_eff tau_n) eta
                         + e^(-rho_eff r) v_{theta(r-)}(k(r)) ] |
    """
    t = traj.t
    if not (t[0] <= r <= t[-1]):
        raise ValueError(f"r = {r} outside the trajectory span [{t[0]}, {t[-1]}]")
    disc = np.exp(-p.rho_eff * t) * traj.u_inst
    m = int(np.searchsorted(t, r, side="right"))
    integral = float(_trapz(disc[:m], t[:m])) if m >= 2 else 0.0
    if m >= 1 and t[m - 1] < r and m < t.size:
        # partial last interval
        frac = (r - t[m - 1]) / (t[m] - t[m - 1])
        d_r = disc[m - 1] + frac * (disc[m] - disc[m - 1])
        integral += 0.5 * (r - t[m - 1]) * (disc[m - 1] + d_r)
    costs = sum(e.cost_charged for e in traj.events if e.time < r)
    # regime just before r and capital at r
    idx = np.searchsorted(t, r, side="left")
    theta_r_minus = int(traj.regime[max(idx - 1, 0)]) if r > t[0] else int(traj.regime[0])
    k_r = float(np.interp(r, t, traj.k))
    v_r = policy.value(theta_r_minus, k_r)
    v_0 = policy.value(int(traj.regime[0]), float(traj.k[0]))
    if isinstance(v_r, analytic.MinusInfinity) or isinstance(v_0, analytic.MinusInfinity):
        raise ValueError("dpp_check hit a minus-infinity value")
    rhs = integral - costs + math.exp(-p.rho_eff * r) * float(v_r)
    return abs(float(v_0) - rhs)


def euler_residual(traj: Trajectory, p: StationaryProblem) -> float:
    """max over interior samples of | d(ln c)/dt - (A_i - delta - rho)/gamma |,
    with centered differences, skipping samples within 2 dt of any switch,
    outside the regime interior (k <= x_i), or at regime changes."""
    t, c, k, reg = traj.t, traj.c, traj.k, traj.regime
    n = t.size
    if n < 3:
        return 0.0
    dt = traj.config.dt
    worst = 0.0
    ev_times = np.asarray([e.time for e in traj.events])
    for m in range(1, n - 1):
        i = int(reg[m])
        if reg[m - 1] != i or reg[m + 1] != i:
            continue
        if k[m] <= p.regime(i).x or c[m] <= 0.0:
            continue
        if ev_times.size and np.min(np.abs(ev_times - t[m])) < 2.0 * dt:
            continue
        span = t[m + 1] - t[m - 1]
        if span <= 0.0:
            continue
        if abs((t[m + 1] - t[m]) - (t[m] - t[m - 1])) > 1e-9 * dt:
            continue  # centered differences need symmetric spacing
        growth = (c[m + 1] - c[m - 1]) / (span * c[m])
        target = analytic.euler_growth_rate(p, i)
        worst = max(worst, abs(growth - target))
    return worst


@dataclass(frozen=True)
class ProbeReport:
    holds: bool
    max_separation_ratio: float  # sup_t |k_x - k_y| / (e^{D t} |x - y|)
    max_growth_ratio: float      # sup_t |k_x| / ((1 + |x|) e^{M t})
    exit_time: float             # inf if neither path left the domain


def dynamics_probes(p: StationaryProblem, i: int, x: float, y: float,
                    T: float, c_const: float, dt: float = 1e-2) -> ProbeReport:
    """Integrate two starts under the same constant consumption and check the
    uniqueness/growth bounds with D = A_i + delta + pi (a valid Lipschitz
    constant for the drift) and M = D + 1."""
    r = p.regime(i)
    D = r.A + p.prefs.delta + p.prefs.pi
    M = D + 1.0
    slope, xi = p.net_slope(i), r.x

    def f(k):
        return slope * max(k - xi, 0.0) - c_const

    kx, ky = float(x), float(y)
    t = 0.0
    sep0 = abs(x - y)
    max_sep = 0.0 if sep0 == 0.0 else abs(kx - ky) / ((1.0 + 0.0) * sep0)
    max_growth = abs(kx) / (1.0 + abs(x))
    exit_time = math.inf
    while t < T - 1e-12:
        step = min(dt, T - t)
        kx = _rk4_step(f, kx, step)
        ky = _rk4_step(f, ky, step)
        t += step
        if kx <= 0.0 or ky <= 0.0:
            exit_time = t
            break
        if sep0 > 0.0:
            max_sep = max(max_sep, abs(kx - ky) / (math.exp(D * t) * sep0))
        max_growth = max(max_growth, abs(kx) / ((1.0 + abs(x)) * math.exp(M * t)))
    holds = max_sep <= 1.0 + 1e-9 and max_growth <= 1.0 + 1e-9
    return ProbeReport(holds, max_sep, max_growth, exit_time)
