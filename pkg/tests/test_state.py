import numpy as np
import pytest

from oracles import crenel_state_bvp, richardson

from kppopt.errors import InvalidInput
from kppopt.grid import Grid, GridField, constant, crenel, integrate, random_bang_bang
from kppopt.state import (Method, SolverOptions, monotone_iterates, newton_from, solve_state,
                          state_residual)


@pytest.mark.parametrize("a", [0.25, 1.0])
@pytest.mark.parametrize("mu", [1e-3, 1.0, 50.0])
def test_constant_resource_is_exact(a, mu):
    st = solve_state(constant(a), mu, Grid(64))
    assert np.all(st.theta.values == a)
    assert st.residual_norm == 0.0 and st.method is Method.EXACT
    assert state_residual(st.theta, constant(a), mu) == 0.0


def test_zero_resource():
    st = solve_state(constant(0.0), 0.1, Grid(64))
    assert np.all(st.theta.values == 0.0)


def test_nonpositive_mu_rejected():
    for mu in (0.0, -1.0, float("nan")):
        with pytest.raises(InvalidInput, match="mu must be positive"):
            solve_state(crenel(0.5), mu, Grid(64))


def test_crenel_against_refined_reference():
    m, mu = crenel(0.5), 0.05
    coarse = integrate(solve_state(m, mu, Grid(2 ** 12)).theta)
    ref = richardson(integrate(solve_state(m, mu, Grid(2 ** 15)).theta),
                     integrate(solve_state(m, mu, Grid(2 ** 16)).theta))
    assert abs(coarse - ref) <= 1e-7


@pytest.mark.parametrize("ell,mu", [(0.5, 0.05), (0.3, 0.05), (0.2, 0.01)])
def test_crenel_against_collocation_oracle(ell, mu):
    theta_ref, I_ref = crenel_state_bvp(ell, mu)
    g = Grid(2 ** 13)
    st = solve_state(crenel(ell), mu, g)
    assert abs(integrate(st.theta) - I_ref) <= 1e-7
    assert np.abs(st.theta.values - theta_ref(g.nodes)).max() <= 1e-5


def test_crenel_state_is_decreasing():
    st = solve_state(crenel(0.5), 0.05, Grid(1024))
    assert np.all(np.diff(st.theta.values) < 0)


def test_residual_contract_and_perturbation():
    m, mu, g = crenel(0.4), 0.02, Grid(512)
    st = solve_state(m, mu, g)
    assert state_residual(st.theta, m, mu) <= SolverOptions().tol_residual
    eps = 1e-6
    pert = st.theta.values.copy()
    pert[200] += eps
    r = state_residual(GridField(g, pert), m, mu)
    assert r >= 2 * mu * eps / g.h ** 2 - 10 * eps


def test_monotone_iterates_decrease():
    rng = np.random.default_rng(4)
    m = random_bang_bang(rng, 8)
    its = monotone_iterates(m, 0.01, Grid(256), 40)
    assert np.all(np.diff(its, axis=0) <= 1e-14)
    assert its[-1].min() >= 0


def test_unique_positive_solution():
    m, mu, g = crenel(0.3), 0.02, Grid(512)
    ref = solve_state(m, mu, g).theta.values
    rng = np.random.default_rng(2)
    positive = 0
    for start in [0.05, 0.5, 3.0] + [0.2 + rng.random(g.n + 1) for _ in range(3)]:
        other = newton_from(m, mu, g, start)
        if np.abs(other).max() <= 1e-12:
            continue  # the trivial solution is the only other nonnegative one
        positive += 1
        assert np.abs(other - ref).max() <= 1e-9
    assert positive >= 4


def test_comparison_principle():
    g, mu = Grid(512), 0.01
    lo = solve_state(crenel(0.2), mu, g).theta.values
    hi = solve_state(crenel(0.6), mu, g).theta.values
    assert np.all(lo <= hi + 1e-12)


def test_maximum_principle_bounds():
    m = random_bang_bang(np.random.default_rng(9), 10, kappa=2.0)
    th = solve_state(m, 0.003, Grid(1024)).theta.values
    assert th.min() > 0 and th.max() <= 2.0


def test_second_order_convergence():
    m, mu = crenel(0.3), 0.05
    vals = [integrate(solve_state(m, mu, Grid(n)).theta) for n in (1000, 2000, 4000)]
    ratio = (vals[1] - vals[0]) / (vals[2] - vals[1])
    assert 3.0 <= ratio <= 5.0
