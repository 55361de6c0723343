import numpy as np
import pytest

from oracles import crenel_adjoint_bvp

from kppopt.adjoint import (adjoint_residual, directional_derivative, gateaux_gradient,
                            solve_adjoint, switching)
from kppopt.errors import InvalidInput, SingularSystem
from kppopt.grid import Grid, constant, crenel, random_bang_bang
from kppopt.optimize import objective_nodal
from kppopt.state import solve_state


@pytest.mark.parametrize("kappa", [1.0, 2.5])
def test_full_resource_adjoint(kappa):
    m = constant(kappa, kappa)
    st = solve_state(m, 0.1, Grid(128))
    adj = solve_adjoint(st, m)
    assert np.allclose(adj.p.values, 1 / kappa, atol=1e-13)
    sw = switching(st, adj, 2.0)
    assert np.allclose(sw.phi.values, 1.0, atol=1e-13)
    assert np.allclose(gateaux_gradient(sw).values, -1.0, atol=1e-13)


def test_zero_resource_is_singular():
    st = solve_state(constant(0.0), 0.1, Grid(64))
    with pytest.raises(SingularSystem):
        solve_adjoint(st)


def test_mismatched_resource_rejected():
    st = solve_state(crenel(0.5), 0.1, Grid(64))
    with pytest.raises(InvalidInput):
        solve_adjoint(st, crenel(0.4))


def test_adjoint_against_collocation_oracle():
    fields = crenel_adjoint_bvp(0.5, 0.05)
    for n, tol in ((1024, 2e-5), (4096, 2e-6)):
        g = Grid(n)
        st = solve_state(crenel(0.5), 0.05, g)
        adj = solve_adjoint(st, crenel(0.5))
        _, p_ref = fields(g.nodes)
        assert np.abs(adj.p.values - p_ref).max() <= tol
        assert adj.positive


def test_adjoint_refinement_is_second_order():
    ps = []
    for n in (512, 1024, 2048):
        st = solve_state(crenel(0.5), 0.05, Grid(n))
        ps.append(solve_adjoint(st).p.values)
    e1 = np.abs(ps[0] - ps[1][::2]).max()
    e2 = np.abs(ps[1][::2] - ps[2][::4]).max()
    assert 3.0 <= e1 / e2 <= 5.0


def test_adjoint_residual_small():
    m = random_bang_bang(np.random.default_rng(5), 6)
    st = solve_state(m, 0.02, Grid(1024))
    adj = solve_adjoint(st)
    assert adjoint_residual(adj.p.values, st) <= 1e-8


def test_gradient_matches_central_differences():
    rng = np.random.default_rng(12)
    g, mu, c, eps = Grid(2048), 0.05, 2.0, 1e-6
    m = random_bang_bang(rng, 5)
    st = solve_state(m, mu, g)
    sw = switching(st, solve_adjoint(st), c)
    s = st.m.values
    for _ in range(3):
        d = rng.standard_normal(g.n + 1)
        fp, _ = objective_nodal(s + eps * d, mu, c, g, 1.0)
        fm, _ = objective_nodal(s - eps * d, mu, c, g, 1.0)
        fd = (fp - fm) / (2 * eps)
        assert directional_derivative(sw, d) == pytest.approx(fd, rel=1e-6, abs=1e-10)


def test_directional_derivative_of_profile():
    g = Grid(1024)
    m = crenel(0.3)
    st = solve_state(m, 0.05, g)
    sw = switching(st, solve_adjoint(st), 2.0)
    # a profile direction is sampled on the cells first
    assert directional_derivative(sw, constant(1.0)) == pytest.approx(
        directional_derivative(sw, np.ones(g.n + 1)), rel=1e-14)
