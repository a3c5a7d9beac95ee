"""Independent reference for the pooled (free-switching) value function.

The pooled equation is a scalar first-order ODE once the consumption supremum
is taken:

    rho_eff v(k) = R(k) s + gamma/(1-gamma) s^((gamma-1)/gamma),   s = v'(k),
    R(k) = max_i (A_i - delta - pi)(k - x_i)_+ .

Solving the algebraic relation for s on the accumulation branch and
integrating v' = s(k, v) leftward from a very large anchor is numerically
stable: a perturbation of the anchor decays like (k/k_anchor)^(B/(gamma g))
on the way down, so the crude autarky anchor v(k_far) = u(R(k_far))/rho_eff
is discounted away.  None of this shares code (or formulas) with the upwind
solver or the closed-form module, which is the point: it is an independent
oracle for what the solver computes.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import solve_ivp


def _slope_from_value(k: float, v: float, p) -> float:
    """Accumulation-branch root s of rho_eff v = R(k) s + gamma/(1-gamma) s^((gamma-1)/gamma)."""
    g = p.prefs.gamma
    rho = p.rho_eff
    R = max(float(p.resource(i, k)) for i in range(1, p.n_regimes + 1))
    if R <= 0.0:
        raise ValueError(f"no productive regime at k = {k}")
    if g == 2.0:
        # R y^2 - 2 y - rho v = 0 with y = sqrt(s); larger root = growth branch
        disc = 1.0 + R * rho * v
        if disc < 0.0:
            raise ValueError(f"no real slope at k = {k}, v = {v}")
        y = (1.0 + math.sqrt(disc)) / R
        return y * y
    # Newton on f(s) = R s + g/(1-g) s^((g-1)/g) - rho v, larger root
    s = (rho * abs(v) / R + 1.0)
    for _ in range(100):
        f = R * s + g / (1.0 - g) * s ** ((g - 1.0) / g) - rho * v
        fp = R - s ** (-1.0 / g)
        if fp <= 0.0:
            s *= 2.0
            continue
        step = f / fp
        s_new = s - step
        if s_new <= 0.0:
            s_new = s / 2.0
        if abs(s_new - s) <= 1e-14 * abs(s):
            return s_new
        s = s_new
    return s


def pooled_value(p, k_eval: np.ndarray, k_far: float = 1e6,
                 rtol: float = 1e-11, atol: float = 1e-13) -> np.ndarray:
    """Pooled value at the (ascending) points k_eval via leftward integration."""
    k_eval = np.asarray(k_eval, dtype=float)
    R_far = max(float(p.resource(i, k_far)) for i in range(1, p.n_regimes + 1))
    v_far = p.utility(R_far) / p.rho_eff  # autarky anchor, discounted away

    def rhs(k, v):
        return [_slope_from_value(k, v[0], p)]

    sol = solve_ivp(rhs, (k_far, float(k_eval[0])), [v_far], method="LSODA",
                    t_eval=np.concatenate([[k_far], k_eval[::-1]]),
                    rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"oracle integration failed: {sol.message}")
    return sol.y[0][1:][::-1].copy()


def pooled_flip_points(p) -> list[float]:
    """Capital levels where the pooled argmax regime changes: the crossings of
    the net production lines (A_i - delta - pi)(k - x_i)_+."""
    out = []
    for i in range(1, p.n_regimes):
        m_lo, x_lo = p.net_slope(i), p.regime(i).x
        m_hi, x_hi = p.net_slope(i + 1), p.regime(i + 1).x
        if m_hi != m_lo:
            out.append((m_hi * x_hi - m_lo * x_lo) / (m_hi - m_lo))
    return out
