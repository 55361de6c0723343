"""Maximisation of ``F(m) = integral(theta - c m)`` by bathtub fixed-point iteration.

Iterates live on the node cells of the grid, so every iterate is an exact
0/kappa profile with breakpoints on cell edges.  A bathtub step that lowers
F is retracted by switching only the cells with the largest ``|phi - c|``.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .adjoint import AdjointSolution, SwitchingData, solve_adjoint, switching
from .errors import InvalidInput, KPPError, NonConvergence, SingularSystem
from .grid import (Grid, GridField, ResourceProfile, auto_grid_size, crenel, from_cells,
                   integrate, jump_count, mass, random_bang_bang, sample_resource)
from .state import SolverOptions, StateSolution, solve_state

log = logging.getLogger(__name__)

ASCENT_TOL = 1e-13


@dataclass(frozen=True)
class OptimizerConfig:
    mu: float
    c: float
    kappa: float = 1.0
    grid_n: int = 0  # 0: derive from mu
    max_outer: int = 200
    tie_tol: float = 1e-9
    switch_fraction: float = 1.0
    m_tol: float | None = None  # None: half a cell width
    solver: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        if not (self.mu > 0 and self.kappa > 0 and np.isfinite(self.c)):
            raise InvalidInput("need mu > 0, kappa > 0 and finite c")
        if not 0 < self.switch_fraction <= 1:
            raise InvalidInput("switch_fraction must lie in (0, 1]")
        if self.tie_tol < 0 or self.max_outer < 1:
            raise InvalidInput("bad tie_tol or max_outer")
        need = int(np.ceil(10 / np.sqrt(self.mu)))
        if self.grid_n == 0:
            object.__setattr__(self, "grid_n", auto_grid_size(self.mu))
        elif self.grid_n < need:
            raise InvalidInput(f"grid_n={self.grid_n} under-resolves the boundary layer; "
                               f"need n >= {need} for mu={self.mu}")

    @property
    def grid(self) -> Grid:
        return Grid(self.grid_n)


@dataclass
class OptimizerResult:
    m_star: ResourceProfile
    F_value: float
    iterations: int
    converged: bool
    bang_bang_fraction: float
    hamiltonian_flatness: float
    jump_count: int
    theta: StateSolution
    phi: GridField
    adjoint: AdjointSolution | None = None
    switching: SwitchingData | None = None
    history: list = field(default_factory=list)
    reason: str = ""
    mismatch_measure: float = 0.0
    seed_index: int | None = None
    seed_errors: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "F_value": self.F_value,
            "iterations": self.iterations,
            "converged": self.converged,
            "reason": self.reason,
            "bang_bang_fraction": self.bang_bang_fraction,
            "hamiltonian_flatness": _json_float(self.hamiltonian_flatness),
            "jump_count": self.jump_count,
            "total_variation": float(np.abs(np.diff(self.m_star.values)).sum()),
            "mass": mass(self.m_star),
            "mismatch_measure": self.mismatch_measure,
            "seed_index": self.seed_index,
            "seed_errors": {str(k): v for k, v in self.seed_errors.items()},
        }


def _json_float(x):
    return None if x is None or not np.isfinite(x) else float(x)


def objective(m: ResourceProfile, mu: float, c: float, g: Grid,
              opts: SolverOptions | None = None) -> float:
    """``trapz(theta) - c * mass(m)``, mass taken exactly from the breakpoints."""
    st = solve_state(m, mu, g, opts)
    return integrate(st.theta) - c * mass(m)


def objective_nodal(s, mu: float, c: float, g: Grid, kappa: float,
                    opts: SolverOptions | None = None) -> tuple[float, StateSolution]:
    """Objective of nodal cell samples; the mass is the same trapezoidal sum."""
    s = np.asarray(s, dtype=float)
    st = solve_state(s, mu, g, opts, kappa=kappa)
    return integrate(st.theta) - c * integrate(GridField(g, s)), st


def bathtub_nodal(sw: SwitchingData, kappa: float, tie_tol: float) -> np.ndarray:
    grad = sw.gradient.values
    return np.where(grad > tie_tol, kappa, np.where(grad < -tie_tol, 0.0, sw.m.values))


def bathtub_update(sw: SwitchingData, kappa: float, tie_tol: float = 1e-9) -> ResourceProfile:
    """kappa where ``phi - c > tie_tol``, 0 where ``< -tie_tol``, previous value on ties."""
    return from_cells(sw.gradient.grid, bathtub_nodal(sw, kappa, tie_tol), kappa)


def jump_adjacent(s: np.ndarray) -> np.ndarray:
    """Nodes whose cell borders a change of the nodal resource."""
    d = s[1:] != s[:-1]
    mask = np.zeros(len(s), dtype=bool)
    mask[:-1] |= d
    mask[1:] |= d
    return mask


def hamiltonian_flatness(H: np.ndarray, s: np.ndarray) -> float:
    keep = ~jump_adjacent(s)
    if not np.any(keep):
        return float("nan")
    h = H[keep]
    return float((h.max() - h.min()) / (1 + np.abs(h).max()))


def _diagnostics(g, s, kappa, st, adj, sw, c, history, its, converged, reason, mismatch):
    m_star = from_cells(g, s, kappa)
    w = g.weights
    bb = (s <= 1e-8 * kappa) | (s >= kappa * (1 - 1e-8))
    if sw is not None:
        flat = hamiltonian_flatness(sw.hamiltonian.values, s)
        phi = sw.phi
    else:
        flat = float("nan")
        phi = GridField(g, np.zeros(g.n + 1))
    return OptimizerResult(
        m_star=m_star,
        F_value=objective(m_star, st.mu, c, g),
        iterations=its,
        converged=converged,
        bang_bang_fraction=float(np.dot(w, bb) / g.length),
        hamiltonian_flatness=flat,
        jump_count=jump_count(m_star),
        theta=st,
        phi=phi,
        adjoint=adj,
        switching=sw,
        history=history,
        reason=reason,
        mismatch_measure=mismatch,
    )


def pontryagin_maximize(cfg: OptimizerConfig, m0: ResourceProfile) -> OptimizerResult:
    g = cfg.grid
    kappa, c, mu = cfg.kappa, cfg.c, cfg.mu
    # half a cell: any switched cell, end cells included, keeps iterating
    m_tol = 0.5 * g.h if cfg.m_tol is None else cfg.m_tol
    w = g.weights
    s = sample_resource(m0, g).values.copy()
    F, st = objective_nodal(s, mu, c, g, kappa, cfg.solver)
    history = [F]
    if not np.any(s > 0):
        raise SingularSystem("seed has zero mass: the adjoint is undefined at theta == 0")

    adj = sw = None
    reason, converged, mismatch = "max_outer reached", False, 0.0
    its = 0
    for its in range(1, cfg.max_outer + 1):
        if not np.any(s > 0):
            adj = sw = None
            reason, converged = "reached m == 0 (adjoint undefined there)", True
            break
        adj = solve_adjoint(st)
        sw = switching(st, adj, c)
        target = bathtub_nodal(sw, kappa, cfg.tie_tol)
        changed = np.flatnonzero(target != s)
        mismatch = float(w[changed].sum())
        if mismatch < m_tol:
            reason, converged = "bathtub fixed point", True
            break
        accepted = _try_switch(s, target, changed, sw, F, mu, c, g, kappa, cfg)
        if accepted is None:
            # no partial switch raises F: only cells hugging a jump may remain
            tie_band = jump_adjacent(s)[changed].all()
            reason = "retraction exhausted" + ("" if tie_band else " away from jumps")
            converged = bool(tie_band)
            break
        s, F, st = accepted
        history.append(F)
    else:
        its = cfg.max_outer
        if sw is None or not np.array_equal(s, sw.m.values):
            adj = solve_adjoint(st)
            sw = switching(st, adj, c)

    res = _diagnostics(g, s, kappa, st, adj, sw, c, history, its, converged, reason, mismatch)
    log.debug("pontryagin: F=%.12g its=%d %s", res.F_value, its, reason)
    return res


def _try_switch(s, target, changed, sw, F, mu, c, g, kappa, cfg):
    """Full bathtub step, then ranked partial switches with halving fractions."""
    order = changed[np.argsort(-np.abs(sw.gradient.values[changed]), kind="stable")]
    total = len(order)
    counts = [total]
    frac = cfg.switch_fraction
    while counts[-1] > 1:
        k = int(np.ceil(frac * total))
        if k < counts[-1]:
            counts.append(k)
        frac *= 0.5
    # an all-zero iterate ends the iteration (no adjoint there), so it is
    # taken only when no partial switch keeping some resource ascends
    if not np.any(target > 0):
        counts = counts[1:] + counts[:1]
    for count in counts:
        trial = s.copy()
        idx = order[:count]
        trial[idx] = target[idx]
        F_new, st_new = objective_nodal(trial, mu, c, g, kappa, cfg.solver)
        if F_new >= F - ASCENT_TOL:
            return trial, F_new, st_new
    return None


def _stationary(cfg: OptimizerConfig, m0: ResourceProfile, reason: str) -> OptimizerResult:
    """Diagnostics for a seed the iteration cannot move (no adjoint at theta == 0)."""
    g = cfg.grid
    s = sample_resource(m0, g).values.copy()
    F, st = objective_nodal(s, cfg.mu, cfg.c, g, cfg.kappa, cfg.solver)
    return _diagnostics(g, s, cfg.kappa, st, None, None, cfg.c, [F], 0, False, reason, 0.0)


def _run_seed(args):
    """``(result, error)``; a zero-mass seed gives both: it stays put and is flagged."""
    cfg, seed = args
    try:
        return pontryagin_maximize(cfg, seed), None
    except SingularSystem as exc:
        err = f"SingularSystem: {exc}"
        if mass(seed) == 0:
            return _stationary(cfg, seed, "zero-mass seed, not improved"), err
        return None, err
    except KPPError as exc:
        return None, f"{type(exc).__name__}: {exc}"


def multistart(cfg: OptimizerConfig, seeds, jobs: int = 1) -> OptimizerResult:
    """Best of ``pontryagin_maximize`` over the seeds.

    Ties go to a converged run, then to the earliest seed.
    """
    seeds = list(seeds)
    if not seeds:
        raise InvalidInput("multistart needs at least one seed")
    tasks = [(cfg, m0) for m0 in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_seed, tasks))
    else:
        outcomes = [_run_seed(t) for t in tasks]
    best, errors = None, {}
    for i, (res, err) in enumerate(outcomes):
        if err is not None:
            errors[i] = err
        if res is None:
            continue
        if (best is None or res.F_value > best.F_value
                or (res.F_value == best.F_value and res.converged and not best.converged)):
            best, best_i = res, i
    if best is None:
        raise NonConvergence("every multistart seed failed: " + "; ".join(errors.values()))
    best.seed_index = best_i
    best.seed_errors = errors
    return best


MAX_TILES = 64


def default_seeds(cfg: OptimizerConfig, rng_seed: int = 0, mu_bar_guess: float | None = None,
                  tiles: bool = True) -> list[ResourceProfile]:
    """Crenels, k-symmetric tiles of the best crenel at ``k^2 mu``, two random profiles.

    Tiles go up to ``k = ceil(2 sqrt(mu_bar_guess / mu))``, twice the number
    of periods expected near the best crenel diffusivity; ``None`` estimates
    that diffusivity with a coarse sweep.
    """
    from .crenels import estimate_mu_bar, maximize_over_crenels
    from .symmetry import tile_k_symmetric

    kappa = cfg.kappa
    seeds = [crenel(ell, kappa) for ell in np.round(np.arange(1, 10) / 10, 12)]
    if tiles:
        if mu_bar_guess is None:
            mu_bar_guess = estimate_mu_bar(cfg.c, kappa)
        k_max = min(int(np.ceil(2 * np.sqrt(mu_bar_guess / cfg.mu))), MAX_TILES)
        for k in range(1, k_max + 1):
            mu_k = k * k * cfg.mu
            gk = Grid(auto_grid_size(mu_k, 256))
            ell, _ = maximize_over_crenels(mu_k, cfg.c, kappa, gk, tol=1e-3)
            if 0 < ell < 1:
                seeds.append(tile_k_symmetric(crenel(ell, kappa), k))
    rng = np.random.default_rng(rng_seed)
    seeds += [random_bang_bang(rng, int(rng.integers(4, 12)), kappa) for _ in range(2)]
    return seeds


def scaling_check_Bmu(m: ResourceProfile, mu: float, B: float, c: float, g: Grid,
                      opts: SolverOptions | None = None) -> tuple[float, float]:
    """Both sides of ``F_{B mu}(B m) = B F_mu(m)``; the bound kappa scales with m."""
    if not B > 0:
        raise InvalidInput("B must be positive")
    lhs = objective(m.scaled(B), B * mu, c, g, opts)
    rhs = B * objective(m, mu, c, g, opts)
    return lhs, rhs


def with_grid(cfg: OptimizerConfig, n: int) -> OptimizerConfig:
    return replace(cfg, grid_n=n)
