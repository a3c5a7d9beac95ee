"""Monotone upwind solver for the stationary switching system on a capital grid.

The coupled system solved is, for every regime i,

    max( sup_c [ mu_i(k, c) v_i'(k) + u(c) ] - rho_eff v_i(k),
         max_{j != i} ( v_j(k) - eta[i, j] ) - v_i(k) ) = 0,

and its pooled single-value form when all switching costs vanish.

Scheme.  First-order upwind one-sided differences: at each node the
consumption candidates are the first-order conditions of the forward and
backward difference quotients (each admissible only when the implied drift
points in its own direction), plus the zero-drift corner.  Each candidate's
value solves the implicit local relation

    rho_eff w = |mu| (v_upwind - w) / h + u(c),

which is monotone in the neighbor value, so the induced fixed-point map is a
sup of contractions and the discrete solution is unique.  Iteration is
policy iteration: a vectorized improvement pass chooses candidates and
switch targets, then the frozen policy's linear system is solved exactly
(sparse direct solve).  Iterates stop when the sup-norm change falls below
the tolerance.

Internal mesh.  The equations are solved on the requested uniform grid
augmented by (a) logarithmic refinement of the cells below ~100*k_min,
where the CRRA value's curvature grows like k^-3 and uniform spacing loses
first-order accuracy, and (b) a geometric tail above k_max that carries the
outflow characteristics of growing economies far enough that the harmless
state-constraint closure at the far end is discounted away (the anchor
error decays like ratio^(-B_i/(gamma g_i)), a positive exponent whenever
the finiteness condition holds).  The reported solution is the exact
restriction to the requested nodes; tail and refinement sizes appear in the
diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .analytic import MINUS_INF, MinusInfinity
from .problem import StationaryProblem, SwitchingCostMatrix, validate_problem
from .regions import RegionReport, SwitchInterval

__all__ = [
    "Grid",
    "SolverConfig",
    "DiscretizedSolution",
    "VanishingSolution",
    "ResidualReport",
    "hamiltonian",
    "switch_obstacle",
    "solve_qvi",
    "solve_vanishing",
    "extract_regions",
    "comparative_advantage",
    "qvi_residual",
]


@dataclass(frozen=True)
class Grid:
    """Uniform capital grid with n nodes on [k_min, k_max]."""

    k_min: float
    k_max: float
    n: int

    def __post_init__(self):
        if not self.k_min > 0.0:
            raise ValueError(f"k_min must be positive, got {self.k_min}")
        if not self.k_max > self.k_min:
            raise ValueError(f"need k_max > k_min, got [{self.k_min}, {self.k_max}]")
        if self.n < 3:
            raise ValueError(f"need at least 3 nodes, got {self.n}")

    @property
    def h(self) -> float:
        return (self.k_max - self.k_min) / (self.n - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.k_min, self.k_max, self.n)


@dataclass(frozen=True)
class SolverConfig:
    """Solver tuning knobs.

    consumption_mode: "closed-form" uses the CRRA first-order condition
    c = slope^(-1/gamma); "grid-search" brute-forces a log-spaced grid of
    n_c consumption levels (the oracle for the closed form).  c_floor keeps
    utility finite where optimal consumption would hit zero.  damping in
    (0, 1] relaxes the policy-iteration update.  tail_anchor_tol sets the
    far-field truncation target for growing economies; bottom_refine
    switches the sub-k_min-scale logarithmic refinement.
    """

    tol: float = 1e-8
    max_iter: int = 10000
    consumption_mode: str = "closed-form"
    n_c: int = 101
    c_floor: float = 1e-10
    boundary: str = "one-sided-differences"
    damping: float = 1.0
    bottom_refine: bool = True
    tail_anchor_tol: float = 1e-5

    def __post_init__(self):
        if not self.tol > 0.0:
            raise ValueError("tol must be positive")
        if self.consumption_mode not in ("closed-form", "grid-search"):
            raise ValueError(f"unknown consumption_mode {self.consumption_mode!r}")
        if self.consumption_mode == "grid-search" and self.n_c < 2:
            raise ValueError("grid-search needs n_c >= 2")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")
        if self.boundary != "one-sided-differences":
            raise ValueError(f"unsupported boundary mode {self.boundary!r}")


# ---------------------------------------------------------------------------
# internal mesh


@dataclass(frozen=True)
class _Mesh:
    k: np.ndarray          # all nodes, strictly increasing
    report_idx: np.ndarray  # positions of the requested uniform nodes
    hF: np.ndarray         # forward spacings (nan at the last node)
    hB: np.ndarray         # backward spacings (nan at the first node)
    n_bottom: int
    n_tail: int


def _tail_ratio(p: StationaryProblem, target: float) -> float:
    """Far-field extension ratio so the state-constraint anchor is discounted
    below `target` by the time it reaches k_max."""
    exps = []
    for i in range(1, p.n_regimes + 1):
        g = p.growth_rate(i)
        if g > 0.0:
            exps.append(p.finiteness_bracket(i) / (p.prefs.gamma * g))
    if not exps:
        return 10.0
    e = min(exps)
    if e <= 0.0:
        return 1e4
    return float(min(max(target ** (-1.0 / e), 10.0), 1e4))


def _build_mesh(p: StationaryProblem, grid: Grid, cfg: SolverConfig) -> _Mesh:
    k_uni = grid.nodes
    h = grid.h
    parts_arrays = [k_uni]

    n_bottom = 0
    if cfg.bottom_refine:
        k_c = min(100.0 * grid.k_min, grid.k_max)
        sigma = h / k_c
        extra = []
        for m in range(grid.n - 1):
            kl = k_uni[m]
            if kl >= k_c:
                break
            parts = int(math.ceil(h / (sigma * kl)))
            if parts > 1:
                extra.append(kl + h * np.arange(1, parts) / parts)
        if extra:
            bottom = np.concatenate(extra)
            n_bottom = bottom.size
            parts_arrays.append(bottom)

    ratio = _tail_ratio(p, cfg.tail_anchor_tol)
    k_big = grid.k_max * ratio
    tail = []
    kk = grid.k_max
    while kk + h < 2.0 * grid.k_max and kk + h < k_big:
        kk += h
        tail.append(kk)
    hh = h
    while kk < k_big:
        hh *= 1.01
        kk += hh
        tail.append(kk)
    if tail:
        parts_arrays.append(np.asarray(tail))

    k = np.unique(np.concatenate(parts_arrays))
    idx = np.searchsorted(k, k_uni)
    if not np.array_equal(k[idx], k_uni):
        raise AssertionError("internal mesh lost requested grid nodes")
    N = k.size
    hF = np.full(N, np.nan)
    hF[:-1] = np.diff(k)
    hB = np.full(N, np.nan)
    hB[1:] = np.diff(k)
    return _Mesh(k=k, report_idx=idx, hF=hF, hB=hB,
                 n_bottom=n_bottom, n_tail=len(tail))


# ---------------------------------------------------------------------------
# candidate engine


def _foc_consumption(slope: np.ndarray, gamma: float, c_floor: float) -> np.ndarray:
    """CRRA first-order condition c = slope^(-1/gamma); nonpositive or missing
    slopes clamp to the consumption floor."""
    c = np.full(slope.shape, c_floor)
    ok = np.isfinite(slope) & (slope > 0.0)
    np.power(slope, -1.0 / gamma, out=c, where=ok)
    return np.maximum(c, c_floor)


def _implicit_local_values(v, res, c, u_c, direction, mesh, rho_eff):
    """Value of the implicit upwind relation for consumption candidates `c`
    taken in the given difference direction; -inf where inadmissible."""
    N = v.size
    mu = res - c
    if direction == +1:
        valid = (mu > 0.0) & np.isfinite(mesh.hF)
        vu = np.empty(N)
        vu[:-1] = v[1:]
        vu[-1] = 0.0
        hh = np.where(np.isfinite(mesh.hF), mesh.hF, 1.0)
    else:
        valid = (mu < 0.0) & np.isfinite(mesh.hB)
        vu = np.empty(N)
        vu[1:] = v[:-1]
        vu[0] = 0.0
        hh = np.where(np.isfinite(mesh.hB), mesh.hB, 1.0)
    amu = np.abs(mu) / hh
    w = (amu * vu + u_c) / (rho_eff + amu)
    return np.where(valid, w, -np.inf)


def _improve_regime(p, i, v, res_i, mesh, cfg):
    """Best (w, c, direction) per node for regime i's continuation problem,
    given the current value vector v on the mesh."""
    rho_eff = p.rho_eff
    gamma = p.prefs.gamma
    N = v.size
    sF = np.full(N, np.nan)
    sF[:-1] = np.diff(v) / mesh.hF[:-1]
    sB = np.full(N, np.nan)
    sB[1:] = np.diff(v) / mesh.hB[1:]

    # zero-drift corner: consume the resource (floored); always admissible
    c0 = np.maximum(res_i, cfg.c_floor)
    best_w = p.utility_vec(c0) / rho_eff
    best_c = c0.copy()
    best_dir = np.zeros(N, dtype=np.int8)

    def consider(c, direction):
        nonlocal best_w, best_c, best_dir
        w = _implicit_local_values(v, res_i, c, p.utility_vec(c), direction,
                                   mesh, rho_eff)
        upd = w > best_w
        best_w = np.where(upd, w, best_w)
        best_c = np.where(upd, c, best_c)
        best_dir = np.where(upd, direction, best_dir).astype(np.int8)

    if cfg.consumption_mode == "closed-form":
        consider(_foc_consumption(sF, gamma, cfg.c_floor), +1)
        consider(_foc_consumption(sB, gamma, cfg.c_floor), -1)
    else:
        c_cap = res_i + (p.prefs.delta + p.prefs.pi) * mesh.k[-1] + 1.0
        log_lo = math.log(cfg.c_floor)
        log_hi = np.log(c_cap)
        for q in np.linspace(0.0, 1.0, cfg.n_c):
            c = np.exp(log_lo + q * (log_hi - log_lo))
            consider(c, +1)
            consider(c, -1)
    return best_w, best_c, best_dir


def _assemble_regime_rows(offset, res_i, c, direction, mesh, rho_eff):
    """COO triplets and rhs for the frozen continuation policy of one regime."""
    N = c.size
    mu = res_i - c
    hh = np.where(direction == +1, mesh.hF, np.where(direction == -1, mesh.hB, 1.0))
    amu = np.where(direction == 0, 0.0, np.abs(mu) / hh)
    rows = np.arange(N) + offset
    keep = direction != 0
    rr = np.concatenate([rows, rows[keep]])
    cc = np.concatenate([rows, rows[keep] + direction[keep]])
    vv = np.concatenate([rho_eff + amu, -amu[keep]])
    return rr, cc, vv


# ---------------------------------------------------------------------------
# public single-node operations


def hamiltonian(p: StationaryProblem, i: int, k: float, slope: float,
                config: SolverConfig | None = None) -> tuple[float, float]:
    """sup over consumption of [ mu_i(k, c) * slope + u(c) ] and its argmax.

    Closed-form mode: c* = slope^(-1/gamma) for slope > 0 (clamped to the
    floor otherwise).  Grid-search mode brute-forces a log-spaced grid on
    [c_floor, resource + (delta + pi) k + 1] and is the oracle for the
    closed form.
    """
    cfg = config or SolverConfig()
    res = float(p.resource(i, k))
    gamma = p.prefs.gamma
    if cfg.consumption_mode == "closed-form":
        if slope > 0.0:
            c = max(slope ** (-1.0 / gamma), cfg.c_floor)
        else:
            c = cfg.c_floor
        return (res - c) * slope + p.utility(c), c
    c_cap = res + (p.prefs.delta + p.prefs.pi) * k + 1.0
    cs = np.exp(np.linspace(math.log(cfg.c_floor), math.log(c_cap), cfg.n_c))
    vals = (res - cs) * slope + p.utility_vec(cs)
    m = int(np.argmax(vals))
    return float(vals[m]), float(cs[m])


def switch_obstacle(values, i: int, costs: SwitchingCostMatrix):
    """max over j != i of (values[j] - eta[i, j]) with smallest-index ties.

    `values` holds the per-regime values at one node in 1-based regime order.
    Returns (MINUS_INF, None) when there is no alternative regime.
    """
    n = len(values)
    if costs.n_regimes != n:
        raise ValueError("values and cost matrix disagree on the number of regimes")
    if not 1 <= i <= n:
        raise ValueError(f"unknown regime id {i}")
    best: float | MinusInfinity = MINUS_INF
    target = None
    for j in range(1, n + 1):
        if j == i:
            continue
        cand = values[j - 1] - costs.cost(i, j)
        if best is MINUS_INF or cand > best:
            best = cand
            target = j
    return best, target


# ---------------------------------------------------------------------------
# solutions


@dataclass(frozen=True)
class _SolutionBase:
    problem: StationaryProblem
    grid: Grid
    config: SolverConfig
    iterations: int
    converged: bool
    diagnostics: dict = field(repr=False)
    # internal mesh view used by residual checks
    mesh_k: np.ndarray = field(repr=False)
    report_idx: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class DiscretizedSolution(_SolutionBase):
    """Converged per-regime value vectors and policies on the requested grid.

    v, c, switch_target are (I, n) arrays on `grid.nodes`; switch_target is 0
    where staying is optimal and the 1-based target regime otherwise.  The
    mesh_* fields keep the full internal-mesh arrays for residual checks.
    """

    v: np.ndarray = None
    c: np.ndarray = None
    switch_target: np.ndarray = None
    mesh_v: np.ndarray = field(default=None, repr=False)
    mesh_c: np.ndarray = field(default=None, repr=False)
    mesh_dir: np.ndarray = field(default=None, repr=False)
    mesh_switch: np.ndarray = field(default=None, repr=False)


@dataclass(frozen=True)
class VanishingSolution(_SolutionBase):
    """Pooled solution under vanishing costs: common value vector, per-node
    active regime (1-based), common consumption policy, and each regime's own
    continuation consumption."""

    v: np.ndarray = None
    active: np.ndarray = None
    c: np.ndarray = None
    c_regime: np.ndarray = None
    mesh_v: np.ndarray = field(default=None, repr=False)
    mesh_c: np.ndarray = field(default=None, repr=False)
    mesh_dir: np.ndarray = field(default=None, repr=False)
    mesh_active: np.ndarray = field(default=None, repr=False)


def _require_valid(p: StationaryProblem) -> None:
    report = validate_problem(p)
    if not report.valid:
        raise ValueError("invalid problem:\n" + "\n".join(report.violations))


def _initial_value(p: StationaryProblem, i: int, mesh: _Mesh, cfg: SolverConfig) -> np.ndarray:
    k_mid = mesh.k[mesh.report_idx[len(mesh.report_idx) // 2]]
    c0 = max(float(p.resource(i, k_mid)), cfg.c_floor)
    return np.full(mesh.k.size, p.utility(c0) / p.rho_eff)


def solve_vanishing(p: StationaryProblem, grid: Grid,
                    config: SolverConfig | None = None) -> VanishingSolution:
    """Solve the pooled equation -rho_eff v + max_i sup_c[mu_i v' + u] = 0.

    The per-node argmax over regimes is the active-regime policy (smallest
    index on ties).  Works for any validated problem regardless of its cost
    matrix; the costs play no role in the pooled limit.
    """
    cfg = config or SolverConfig()
    _require_valid(p)
    mesh = _build_mesh(p, grid, cfg)
    N = mesh.k.size
    I = p.n_regimes
    res = p.resource_table(mesh.k)

    v = _initial_value(p, 1, mesh, cfg)
    change = math.inf
    it = 0
    W = np.empty((I, N))
    C = np.empty((I, N))
    D = np.empty((I, N), dtype=np.int8)
    active = np.zeros(N, dtype=np.int32)
    for it in range(1, cfg.max_iter + 1):
        best_w = np.full(N, -np.inf)
        best_c = np.empty(N)
        best_dir = np.zeros(N, dtype=np.int8)
        active.fill(0)
        for i in range(I):
            W[i], C[i], D[i] = _improve_regime(p, i + 1, v, res[i], mesh, cfg)
            upd = W[i] > best_w
            best_w[upd] = W[i][upd]
            best_c[upd] = C[i][upd]
            best_dir[upd] = D[i][upd]
            active[upd] = i + 1
        res_active = res[active - 1, np.arange(N)]
        rr, cc, vv = _assemble_regime_rows(0, res_active, best_c, best_dir,
                                           mesh, p.rho_eff)
        A = sp.coo_matrix((vv, (rr, cc)), shape=(N, N)).tocsr()
        b = p.utility_vec(np.maximum(best_c, cfg.c_floor))
        v_new = spla.spsolve(A, b)
        if cfg.damping != 1.0:
            v_new = (1.0 - cfg.damping) * v + cfg.damping * v_new
        change = float(np.max(np.abs(v_new - v)))
        v = v_new
        if change <= cfg.tol:
            break
    converged = change <= cfg.tol

    # refresh the policy against the converged value
    best_w = np.full(N, -np.inf)
    best_c = np.empty(N)
    best_dir = np.zeros(N, dtype=np.int8)
    active.fill(0)
    for i in range(I):
        W[i], C[i], D[i] = _improve_regime(p, i + 1, v, res[i], mesh, cfg)
        upd = W[i] > best_w
        best_w[upd] = W[i][upd]
        best_c[upd] = C[i][upd]
        best_dir[upd] = D[i][upd]
        active[upd] = i + 1

    idx = mesh.report_idx
    diagnostics = {
        "scheme": "upwind implicit policy iteration (pooled)",
        "sup_change_final": change,
        "mesh_nodes": int(N),
        "mesh_bottom_refined": mesh.n_bottom,
        "mesh_tail": mesh.n_tail,
    }
    sol = VanishingSolution(
        problem=p, grid=grid, config=cfg, iterations=it, converged=converged,
        diagnostics=diagnostics, mesh_k=mesh.k, report_idx=idx,
        v=v[idx].copy(), active=active[idx].copy(), c=best_c[idx].copy(),
        c_regime=C[:, idx].copy(),
        mesh_v=v, mesh_c=best_c, mesh_dir=best_dir, mesh_active=active,
    )
    rep = qvi_residual(sol, p)
    diagnostics["max_hjb_residual"] = rep.max_hjb_residual
    diagnostics["max_obstacle_violation"] = rep.max_obstacle_violation
    return sol


def _break_switch_cycles(switch_to: np.ndarray, gain: np.ndarray) -> None:
    """Resolve transient switch cycles at a node (i -> j -> ... -> i) by
    keeping the largest-gain switch in each cycle and forcing the rest to
    continue.  In-place on switch_to (entries are 0 = stay, else 1-based)."""
    I, N = switch_to.shape
    # a cycle needs at least two switching regimes at the same node
    candidates = np.nonzero(np.count_nonzero(switch_to, axis=0) >= 2)[0]
    for m in candidates:
        col = switch_to[:, m]
        for i in range(I):
            j = col[i]
            seen = [i]
            while j != 0 and (j - 1) not in seen:
                seen.append(j - 1)
                j = col[j - 1]
            if j != 0:
                # cycle among `seen[seen.index(j-1):]`: stay everywhere except
                # at the member with the largest switch gain
                cyc = seen[seen.index(j - 1):]
                keep = max(cyc, key=lambda r: (gain[r, m], -r))
                for r in cyc:
                    if r != keep:
                        col[r] = 0


def solve_qvi(p: StationaryProblem, grid: Grid,
              config: SolverConfig | None = None) -> DiscretizedSolution:
    """Solve the coupled obstacle system for strictly positive switching costs.

    Each sweep recomputes every regime's continuation candidates against the
    previous iterate, compares with the switch obstacle (previous iterate,
    smallest-index ties), and solves the frozen policy's linear system, whose
    switch rows read v_i - v_j = -eta[i, j].  Vanishing-cost problems belong
    to solve_vanishing.
    """
    cfg = config or SolverConfig()
    _require_valid(p)
    if p.is_vanishing:
        raise ValueError("all switching costs are zero: use solve_vanishing")
    I = p.n_regimes
    mesh = _build_mesh(p, grid, cfg)
    N = mesh.k.size
    res = p.resource_table(mesh.k)
    eta = p.costs.eta

    v = np.stack([_initial_value(p, i + 1, mesh, cfg) for i in range(I)])
    change = math.inf
    it = 0
    W = np.empty((I, N))
    C = np.empty((I, N))
    D = np.empty((I, N), dtype=np.int8)
    switch_to = np.zeros((I, N), dtype=np.int32)
    for it in range(1, cfg.max_iter + 1):
        for i in range(I):
            W[i], C[i], D[i] = _improve_regime(p, i + 1, v[i], res[i], mesh, cfg)
        switch_to.fill(0)
        gain = np.full((I, N), -np.inf)
        if I > 1:
            for i in range(I):
                obs = np.full(N, -np.inf)
                tgt = np.zeros(N, dtype=np.int32)
                for j in range(I):
                    if j == i:
                        continue
                    cand = v[j] - eta[i, j]
                    upd = cand > obs
                    obs[upd] = cand[upd]
                    tgt[upd] = j + 1
                sw = obs > W[i]
                switch_to[i, sw] = tgt[sw]
                gain[i] = obs - W[i]
            _break_switch_cycles(switch_to, gain)

        rows, cols, vals = [], [], []
        b = np.empty(I * N)
        for i in range(I):
            rr, cc, vv = _assemble_regime_rows(i * N, res[i], C[i], D[i],
                                               mesh, p.rho_eff)
            stay = switch_to[i] == 0
            keep = stay[rr - i * N]
            rows.append(rr[keep])
            cols.append(cc[keep])
            vals.append(vv[keep])
            b[i * N:(i + 1) * N] = np.where(
                stay, p.utility_vec(np.maximum(C[i], cfg.c_floor)), 0.0)
            sw_nodes = np.nonzero(~stay)[0]
            if sw_nodes.size:
                tgt = switch_to[i, sw_nodes] - 1
                rows.append(np.concatenate([i * N + sw_nodes, i * N + sw_nodes]))
                cols.append(np.concatenate([i * N + sw_nodes, tgt * N + sw_nodes]))
                vals.append(np.concatenate([np.ones(sw_nodes.size),
                                            -np.ones(sw_nodes.size)]))
                b[i * N + sw_nodes] = -eta[i, tgt]
        A = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(I * N, I * N)).tocsr()
        v_new = spla.spsolve(A, b).reshape(I, N)
        if cfg.damping != 1.0:
            v_new = (1.0 - cfg.damping) * v + cfg.damping * v_new
        change = float(np.max(np.abs(v_new - v)))
        v = v_new
        if change <= cfg.tol:
            break
    converged = change <= cfg.tol

    # refresh policy and switch classification against the converged value
    for i in range(I):
        W[i], C[i], D[i] = _improve_regime(p, i + 1, v[i], res[i], mesh, cfg)
    switch_to.fill(0)
    gain = np.full((I, N), -np.inf)
    if I > 1:
        for i in range(I):
            obs = np.full(N, -np.inf)
            tgt = np.zeros(N, dtype=np.int32)
            for j in range(I):
                if j == i:
                    continue
                cand = v[j] - eta[i, j]
                upd = cand > obs
                obs[upd] = cand[upd]
                tgt[upd] = j + 1
            # within-tolerance equality counts as switching (regions are closed)
            sw = obs >= W[i] - 10.0 * cfg.tol
            switch_to[i, sw] = tgt[sw]
            gain[i] = obs - W[i]
        _break_switch_cycles(switch_to, gain)

    idx = mesh.report_idx
    diagnostics = {
        "scheme": "upwind implicit policy iteration with switch rows",
        "sup_change_final": change,
        "mesh_nodes": int(N),
        "mesh_bottom_refined": mesh.n_bottom,
        "mesh_tail": mesh.n_tail,
    }
    sol = DiscretizedSolution(
        problem=p, grid=grid, config=cfg, iterations=it, converged=converged,
        diagnostics=diagnostics, mesh_k=mesh.k, report_idx=idx,
        v=v[:, idx].copy(), c=C[:, idx].copy(),
        switch_target=switch_to[:, idx].copy(),
        mesh_v=v, mesh_c=C, mesh_dir=D, mesh_switch=switch_to,
    )
    rep = qvi_residual(sol, p)
    diagnostics["max_hjb_residual"] = rep.max_hjb_residual
    diagnostics["max_obstacle_violation"] = rep.max_obstacle_violation
    diagnostics["complementarity_violations"] = len(rep.violations)
    return sol


# ---------------------------------------------------------------------------
# post-processing


@dataclass(frozen=True)
class ResidualReport:
    """Discrete optimality diagnostics in the value metric.

    Branch 1 at a node is (continuation candidate) - v, branch 2 is
    (switch obstacle) - v; at the discrete solution the larger of the two is
    zero.  max_hjb_residual is max |branch 1| over continuation nodes;
    max_obstacle_violation is max(0, branch 2) anywhere; `violations` lists
    (regime, node index, k) where neither branch is within tolerance of zero.
    """

    max_hjb_residual: float
    max_obstacle_violation: float
    violations: tuple
    tolerance: float


def qvi_residual(solution, p: StationaryProblem,
                 tolerance: float | None = None) -> ResidualReport:
    """Evaluate both branches of the discrete system at a solution."""
    cfg = solution.config
    tol = 10.0 * cfg.tol if tolerance is None else tolerance
    mesh = _Mesh(k=solution.mesh_k, report_idx=solution.report_idx,
                 hF=np.concatenate([np.diff(solution.mesh_k), [np.nan]]),
                 hB=np.concatenate([[np.nan], np.diff(solution.mesh_k)]),
                 n_bottom=0, n_tail=0)
    N = mesh.k.size
    res = p.resource_table(mesh.k)
    I = p.n_regimes
    eta = p.costs.eta

    if isinstance(solution, VanishingSolution):
        v = solution.mesh_v
        best_w = np.full(N, -np.inf)
        for i in range(I):
            w, _, _ = _improve_regime(p, i + 1, v, res[i], mesh, cfg)
            best_w = np.maximum(best_w, w)
        branch1 = best_w - v
        max_hjb = float(np.max(np.abs(branch1)))
        bad = np.nonzero(np.abs(branch1) > tol)[0]
        violations = tuple((int(solution.mesh_active[m]), int(m), float(mesh.k[m]))
                           for m in bad)
        return ResidualReport(max_hjb, 0.0, violations, tol)

    v = solution.mesh_v
    max_hjb = 0.0
    max_obs = 0.0
    violations = []
    for i in range(I):
        w, _, _ = _improve_regime(p, i + 1, v[i], res[i], mesh, cfg)
        branch1 = w - v[i]
        if I > 1:
            obs = np.full(N, -np.inf)
            for j in range(I):
                if j != i:
                    obs = np.maximum(obs, v[j] - eta[i, j])
            branch2 = obs - v[i]
        else:
            branch2 = np.full(N, -np.inf)
        stay = solution.mesh_switch[i] == 0
        if stay.any():
            max_hjb = max(max_hjb, float(np.max(np.abs(branch1[stay]))))
        if I > 1:
            max_obs = max(max_obs, float(max(np.max(branch2), 0.0)))
        ok = (np.abs(branch1) <= tol) | (np.abs(branch2) <= tol)
        # the HJB branch must also not be strictly positive at switch nodes
        ok &= branch1 <= tol
        for m in np.nonzero(~ok)[0]:
            violations.append((i + 1, int(m), float(mesh.k[m])))
    return ResidualReport(max_hjb, max_obs, tuple(violations), tol)


def extract_regions(solution) -> RegionReport:
    """Read the switch policy off a converged solution as interval lists.

    Interval endpoints are grid nodes; a run of switch nodes that reaches the
    top of the grid is reported as extending to infinity, and one that starts
    at the bottom node as starting from 0 (the policy is constant as far as
    the grid can see).
    """
    k = solution.grid.nodes
    n = k.size
    I = solution.problem.n_regimes
    if isinstance(solution, VanishingSolution):
        targets = np.stack([
            np.where(solution.active == i, 0, solution.active)
            for i in range(1, I + 1)
        ])
    else:
        targets = solution.switch_target
    per_regime = []
    for i in range(I):
        pieces = []
        m = 0
        while m < n:
            t = targets[i, m]
            if t == 0:
                m += 1
                continue
            start = m
            while m < n and targets[i, m] == t:
                m += 1
            lo = 0.0 if start == 0 else float(k[start])
            hi = math.inf if m == n else float(k[m])
            pieces.append(SwitchInterval(lo, hi, int(t)))
        per_regime.append(tuple(pieces))
    return RegionReport(switch=tuple(per_regime))


def comparative_advantage(solution, i: int, j: int, l: int, k: float) -> float:
    """Cost-adjusted value gap (v_j - eta_ij) - (v_l - eta_il) at the node
    nearest to k; positive means regime j dominates l as a target from i."""
    p = solution.problem
    I = p.n_regimes
    for name, idx in (("i", i), ("j", j), ("l", l)):
        if not 1 <= idx <= I:
            raise ValueError(f"regime id {name} = {idx} out of range 1..{I}")
    if j == i:
        raise ValueError("target j must differ from the current regime i")
    nodes = solution.grid.nodes
    m = int(np.argmin(np.abs(nodes - k)))
    if isinstance(solution, VanishingSolution):
        vj = vl = float(solution.v[m])
    else:
        vj = float(solution.v[j - 1, m])
        vl = float(solution.v[l - 1, m])
    eta = p.costs.eta
    return (vj - eta[i - 1, j - 1]) - (vl - eta[i - 1, l - 1])
