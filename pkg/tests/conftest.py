import numpy as np
import pytest

import switchgrowth as sg

# Benchmark family: two technologies A = (0.2, 0.3), thresholds x = (0, 1),
# gamma = 2, rho = 0.04, delta = 0.05, pi = 0.  Frozen closed-form constants
# were produced by an independent 40-digit evaluation of the formulas.
BENCH_PREFS = dict(gamma=2.0, rho=0.04, pi=0.0, delta=0.05)

Q1 = -110.80332409972299
Q2 = -47.56242568370987
Q3 = -26.298487836949375
A12 = 2.3296398891966757
K12 = 1.7520833333333333          # = 841/480
K13 = 2.6224137931034484
K23 = 3.2367647058823529
T12 = 22.799140666017395          # switch time from k0 = 0.5
V_HALF = -221.60664819944598      # stay value of regime 1 at k = 0.5
V_K12 = -63.24089841601312        # common value at the crossing
# production-dominance crossings (where the pooled argmax actually flips)
KD12 = 2.5
KD23 = 4.5


def benchmark_problem(eta="vanishing", regimes=((0.2, 0.0), (0.3, 1.0)), **over):
    prefs = dict(BENCH_PREFS)
    prefs.update(over)
    A = [a for a, _ in regimes]
    x = [xx for _, xx in regimes]
    return sg.StationaryProblem.from_arrays(A, x, sg.Preferences(**prefs), eta)


THREE_REGIMES = ((0.2, 0.0), (0.3, 1.0), (0.4, 2.0))


@pytest.fixture(scope="session")
def bench():
    return benchmark_problem()


@pytest.fixture(scope="session")
def bench3():
    return benchmark_problem(regimes=THREE_REGIMES)


@pytest.fixture(scope="session")
def grid_4001():
    return sg.Grid(0.01, 6.0, 4001)


@pytest.fixture(scope="session")
def sol_vanishing_4001(bench, grid_4001):
    sol = sg.solve_vanishing(bench, grid_4001)
    assert sol.converged
    return sol


@pytest.fixture(scope="session")
def sol_vanishing_8001(bench):
    sol = sg.solve_vanishing(bench, sg.Grid(0.01, 6.0, 8001))
    assert sol.converged
    return sol


@pytest.fixture(scope="session")
def analytic_policy(bench):
    return sg.AnalyticPolicy(bench)


@pytest.fixture(scope="session")
def bench_trajectory(bench, analytic_policy):
    # t_max = 90 leaves a relative closed-form tail below 1e-5 of |v(0.5)|
    cfg = sg.SimConfig(dt=1e-3, t_max=90.0, event_tol=1e-12)
    return sg.simulate(bench, analytic_policy, 1, 0.5, cfg)


@pytest.fixture(scope="session")
def ode_reference_4001(bench, grid_4001):
    from oracle_ode import pooled_value

    k = grid_4001.nodes
    mask = (k >= 0.1) & (k <= 5.0)
    return k[mask], pooled_value(bench, k[mask])
