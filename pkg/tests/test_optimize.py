import numpy as np
import pytest

from oracles import crenel_state_bvp

from kppopt.adjoint import SwitchingData
from kppopt.errors import InvalidInput, NonConvergence, SingularSystem
from kppopt.grid import (Grid, GridField, constant, crenel, jump_count, l1_distance, mass,
                         random_bang_bang, sample_resource)
from kppopt.optimize import (OptimizerConfig, bathtub_update, default_seeds, jump_adjacent,
                             multistart, objective, pontryagin_maximize, scaling_check_Bmu)


def _switching(g, phi, c, m_prev):
    phi = np.asarray(phi, dtype=float)
    z = GridField(g, np.zeros(g.n + 1))
    return SwitchingData(GridField(g, phi), GridField(g, phi - c), z, c,
                         sample_resource(m_prev, g))


def test_objective_examples():
    g = Grid(256)
    for mu in (1e-3, 0.3, 10.0):
        assert objective(constant(1.0), mu, 2.0, g) == pytest.approx(-1.0, abs=1e-14)
    assert objective(constant(0.0), 0.1, 2.0, g) == 0.0


def test_objective_positive_for_a_short_crenel():
    # at mu = 0.005 a short crenel pays for itself; at mu = 0.01 none does
    _, I = crenel_state_bvp(0.035, 0.005)
    assert I - 2 * 0.035 > 1e-3
    assert objective(crenel(0.035), 0.005, 2.0, Grid(4096)) == pytest.approx(I - 0.07, abs=1e-7)
    g = Grid(4096)
    assert max(objective(crenel(l), 0.01, 2.0, g) for l in np.linspace(0.002, 1, 60)) < 0


def test_bathtub_examples():
    g = Grid(64)
    out = bathtub_update(_switching(g, np.ones(g.n + 1), 2.0, crenel(0.5)), 1.0)
    assert mass(out) == 0.0
    phi = np.where(g.nodes < 0.5, 3.0, 0.0)
    out = bathtub_update(_switching(g, phi, 2.0, constant(0.0)), 1.0)
    assert jump_count(out) == 1 and l1_distance(out, crenel(0.5)) <= g.h / 2 + 1e-15
    prev = random_bang_bang(np.random.default_rng(1), 5)
    out = bathtub_update(_switching(g, np.full(g.n + 1, 2.0), 2.0, prev), 1.0)
    assert np.array_equal(sample_resource(out, g).values, sample_resource(prev, g).values)


def test_config_validation():
    with pytest.raises(InvalidInput):
        OptimizerConfig(mu=-1.0, c=2.0)
    with pytest.raises(InvalidInput):
        OptimizerConfig(mu=1e-3, c=2.0, grid_n=64)  # needs >= 317 cells
    with pytest.raises(InvalidInput):
        OptimizerConfig(mu=1e-2, c=float("inf"))
    assert OptimizerConfig(mu=1e-3, c=2.0).grid_n == 512


def test_expensive_resource_goes_to_zero():
    res = pontryagin_maximize(OptimizerConfig(mu=0.1, c=3.2, grid_n=512), crenel(0.5))
    assert res.converged and res.F_value <= 0 and mass(res.m_star) == 0


def test_free_resource_fills_domain():
    res = pontryagin_maximize(OptimizerConfig(mu=0.05, c=-0.5, grid_n=512), crenel(0.3))
    assert res.converged
    assert np.array_equal(res.m_star.values, [1.0])
    assert res.F_value == pytest.approx(1.5, abs=1e-12)


def test_zero_seed_is_flagged():
    cfg = OptimizerConfig(mu=0.1, c=2.0, grid_n=256)
    with pytest.raises(SingularSystem):
        pontryagin_maximize(cfg, constant(0.0))
    res = multistart(cfg, [constant(0.0)])
    assert res.F_value == 0.0 and not res.converged
    assert "SingularSystem" in res.seed_errors[0]


def test_multistart_all_failures_raise():
    cfg = OptimizerConfig(mu=0.1, c=2.0, grid_n=256, max_outer=1)
    with pytest.raises(InvalidInput):
        multistart(cfg, [])
    bad = crenel(0.5, length=2.0)  # does not fit the unit grid
    with pytest.raises(NonConvergence):
        multistart(cfg, [bad])


def test_ascent_and_result_invariants():
    cfg = OptimizerConfig(mu=4e-3, c=2.0, grid_n=1024)
    rng = np.random.default_rng(0)
    seeds = [crenel(0.2), crenel(0.6)] + [random_bang_bang(rng, 6) for _ in range(3)]
    g = cfg.grid
    best_seed = max(objective(s, cfg.mu, cfg.c, g) for s in seeds)
    res = multistart(cfg, seeds)
    assert res.F_value >= best_seed - 1e-12
    assert res.F_value == pytest.approx(objective(res.m_star, cfg.mu, cfg.c, g), abs=1e-12)
    assert all(b >= a - 1e-13 for a, b in zip(res.history, res.history[1:]))
    assert res.bang_bang_fraction >= 0.99
    if res.converged and res.switching is not None:
        s = res.theta.m.values
        grad = res.switching.gradient.values
        off = ~jump_adjacent(s)
        assert np.all(s[off & (grad > cfg.tie_tol)] == cfg.kappa)
        assert np.all(s[off & (grad < -cfg.tie_tol)] == 0.0)


def test_parallel_multistart_matches_serial():
    cfg = OptimizerConfig(mu=4e-3, c=2.0, grid_n=512)
    seeds = [crenel(0.1), crenel(0.4), crenel(0.8)]
    a = multistart(cfg, seeds)
    b = multistart(cfg, seeds, jobs=2)
    assert a.F_value == b.F_value and a.seed_index == b.seed_index
    assert np.array_equal(a.m_star.breakpoints, b.m_star.breakpoints)


def test_default_seeds():
    cfg = OptimizerConfig(mu=2.5e-4, c=2.0, grid_n=2048)
    seeds = default_seeds(cfg, rng_seed=3, mu_bar_guess=1.4e-3)
    # 9 crenels, tiles k = 1..ceil(2 sqrt(5.6)) = 5, two random profiles; at
    # 25 mu no crenel beats m = 0, so the k = 5 tile is dropped
    assert len(seeds) == 9 + 4 + 2
    assert [jump_count(s) for s in seeds[9:13]] == [1, 2, 3, 4]
    again = default_seeds(cfg, rng_seed=3, mu_bar_guess=1.4e-3)
    assert all(np.array_equal(a.breakpoints, b.breakpoints) for a, b in zip(seeds, again))
    assert len(default_seeds(cfg, tiles=False)) == 11


def test_b_scaling():
    g = Grid(2 ** 13)
    lhs, rhs = scaling_check_Bmu(crenel(0.4), 0.02, 2.5, 2.0, g)
    assert abs(lhs - rhs) <= 1e-6 * (1 + abs(lhs))
    assert scaling_check_Bmu(crenel(0.4), 0.02, 1.0, 2.0, g)[0] == scaling_check_Bmu(
        crenel(0.4), 0.02, 1.0, 2.0, g)[1]
    a = 0.3
    lhs, rhs = scaling_check_Bmu(constant(a), 0.1, 1.7, 2.0, g)
    assert lhs == pytest.approx(1.7 * (1 - 2.0) * a, rel=1e-14)
    assert rhs == pytest.approx(lhs, rel=1e-14)
