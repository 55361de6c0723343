"""Positive steady state of ``-mu theta'' = theta (m - theta)`` with Neumann ends.

Second-order finite differences on the node grid; the Neumann condition is
imposed with a reflected ghost node, which turns the first and last rows
into ``2 (theta_0 - theta_1) / h^2``.  Every linear solve is tridiagonal.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .errors import InvalidInput, NonConvergence
from .grid import Grid, GridField, ResourceProfile, mass, sample_resource

EPS = np.finfo(float).eps


class Method(str, enum.Enum):
    NEWTON = "newton"
    MONOTONE = "monotone"
    EXACT = "exact"


@dataclass(frozen=True)
class SolverOptions:
    tol_residual: float = 1e-11
    max_newton: int = 50
    max_monotone: int = 5000
    damping_min: float = 2.0 ** -20
    positive_floor: float = 0.0

    def __post_init__(self):
        if not (self.tol_residual > 0 and self.damping_min > 0):
            raise InvalidInput("solver tolerances must be positive")
        if self.max_newton < 1 or self.max_monotone < 1:
            raise InvalidInput("iteration caps must be >= 1")


@dataclass(frozen=True)
class StateSolution:
    theta: GridField
    mu: float
    m: GridField
    residual_norm: float
    iterations: int
    method: Method

    @property
    def grid(self) -> Grid:
        return self.theta.grid


def laplacian_bands(g: Grid, mu: float) -> np.ndarray:
    """Banded storage of ``mu * A`` where ``A`` is the Neumann ``-D2``."""
    n, k = g.n, mu / g.h ** 2
    ab = np.zeros((3, n + 1))
    ab[0, 1:] = -k
    ab[0, 1] = -2 * k
    ab[1, :] = 2 * k
    ab[2, :-1] = -k
    ab[2, -2] = -2 * k
    return ab


def apply_laplacian(g: Grid, mu: float, u: np.ndarray) -> np.ndarray:
    k = mu / g.h ** 2
    out = np.empty_like(u)
    out[1:-1] = k * (2 * u[1:-1] - u[:-2] - u[2:])
    out[0] = 2 * k * (u[0] - u[1])
    out[-1] = 2 * k * (u[-1] - u[-2])
    return out


def _residual(g, mu, s, theta):
    return apply_laplacian(g, mu, theta) - theta * (s - theta)


def roundoff_floor(g: Grid, mu: float, scale: float) -> float:
    """Smallest residual the stencil can resolve in double precision."""
    return 32 * EPS * scale * (4 * mu / g.h ** 2 + scale)


def _as_samples(m, g):
    if isinstance(m, ResourceProfile):
        return sample_resource(m, g).values, m.kappa
    s = np.asarray(m.values if isinstance(m, GridField) else m, dtype=float)
    return s, float(s.max()) if s.size else 0.0


def solve_state(m, mu: float, g: Grid, opts: SolverOptions | None = None,
                kappa: float | None = None) -> StateSolution:
    """Positive solution for a resource profile (or raw nodal samples).

    Newton starts from the constant supersolution ``kappa`` and halves the
    step until the residual decreases; a stalled Newton hands over to the
    monotone iteration, which descends from the same supersolution.
    """
    opts = opts or SolverOptions()
    if not (np.isfinite(mu) and mu > 0):
        raise InvalidInput("mu must be positive")
    s, kap = _as_samples(m, g)
    if kappa is not None:
        kap = float(kappa)
    if s.shape != (g.n + 1,):
        raise InvalidInput("resource samples do not match the grid")
    s_field = GridField(g, s)

    if isinstance(m, ResourceProfile) and mass(m) == 0.0 or not np.any(s > 0):
        return StateSolution(GridField(g, np.zeros_like(s)), mu, s_field, 0.0, 0, Method.EXACT)
    if isinstance(m, ResourceProfile) and len(m.values) == 1 or np.all(s == s[0]):
        # constant resource: theta = m is the positive solution, exactly
        return StateSolution(GridField(g, s.copy()), mu, s_field, 0.0, 0, Method.EXACT)

    scale = max(kap, float(s.max()))
    tol = max(opts.tol_residual, roundoff_floor(g, mu, scale))
    theta, res, its, ok = _newton(g, mu, s, scale, tol, opts)
    method = Method.NEWTON
    if not ok:
        theta, res, its2, ok = _monotone(g, mu, s, scale, tol, opts)
        its += its2
        method = Method.MONOTONE
        if not ok:
            raise NonConvergence(f"state solve did not converge (residual {res:.3e})",
                                 best=theta, residual=res)
    if opts.positive_floor > 0:
        theta = np.maximum(theta, opts.positive_floor)
    lo, hi = theta.min(), theta.max()
    if lo < -1e-10 or hi > s.max() + 1e-10:
        raise NonConvergence(
            f"maximum principle violated: theta in [{lo:.3e}, {hi:.3e}]", best=theta, residual=res)
    return StateSolution(GridField(g, np.clip(theta, 0.0, None)), mu, s_field, res, its, method)


def _newton(g, mu, s, scale, tol, opts):
    # tol is the requested tolerance raised to the stencil's round-off
    # floor; near that floor only a negligible step certifies convergence
    ab0 = laplacian_bands(g, mu)
    theta = np.full(g.n + 1, scale)
    r = _residual(g, mu, s, theta)
    rn = np.abs(r).max()
    step_norm = np.inf
    for it in range(1, opts.max_newton + 1):
        if rn <= opts.tol_residual or (rn <= tol and step_norm <= 1e-13 * scale):
            return theta, rn, it - 1, True
        ab = ab0.copy()
        ab[1] -= s - 2 * theta
        step = solve_banded((1, 1), ab, -r, check_finite=False)
        step_norm = np.abs(step).max()
        t = 1.0
        while True:
            trial = theta + t * step
            r_trial = _residual(g, mu, s, trial)
            rn_trial = np.abs(r_trial).max()
            if rn_trial < rn or rn_trial <= tol:
                break
            t *= 0.5
            if t < opts.damping_min:
                return theta, rn, it, rn <= tol
        theta, r, rn = trial, r_trial, rn_trial
    return theta, rn, opts.max_newton, rn <= tol


def _monotone(g, mu, s, scale, tol, opts):
    K = 2.0 * scale
    ab = laplacian_bands(g, mu)
    ab[1] += K
    theta = np.full(g.n + 1, scale)
    rn = np.inf
    for it in range(1, opts.max_monotone + 1):
        theta = solve_banded((1, 1), ab, theta * (s - theta) + K * theta, check_finite=False)
        rn = np.abs(_residual(g, mu, s, theta)).max()
        if rn <= tol:
            return theta, rn, it, True
    return theta, rn, opts.max_monotone, False


def monotone_iterates(m, mu: float, g: Grid, steps: int) -> np.ndarray:
    """First ``steps`` iterates of the monotone scheme, one per row."""
    s, kap = _as_samples(m, g)
    scale = max(kap, float(s.max()))
    K = 2.0 * scale
    ab = laplacian_bands(g, mu)
    ab[1] += K
    out = np.empty((steps + 1, g.n + 1))
    out[0] = scale
    for k in range(steps):
        t = out[k]
        out[k + 1] = solve_banded((1, 1), ab, t * (s - t) + K * t, check_finite=False)
    return out


def newton_from(m, mu: float, g: Grid, theta0, opts: SolverOptions | None = None) -> np.ndarray:
    """Undamped Newton from an arbitrary start; used to probe uniqueness."""
    opts = opts or SolverOptions()
    s, kap = _as_samples(m, g)
    tol = max(opts.tol_residual, roundoff_floor(g, mu, max(kap, s.max())))
    ab0 = laplacian_bands(g, mu)
    theta = np.array(theta0, dtype=float) * np.ones(g.n + 1)
    for _ in range(opts.max_newton):
        r = _residual(g, mu, s, theta)
        if np.abs(r).max() <= tol:
            return theta
        ab = ab0.copy()
        ab[1] -= s - 2 * theta
        theta = theta + solve_banded((1, 1), ab, -r, check_finite=False)
    raise NonConvergence("Newton probe did not converge", best=theta)


def state_residual(theta: GridField, m, mu: float) -> float:
    """Infinity norm of the discrete residual, Neumann rows included."""
    g = theta.grid
    s, _ = _as_samples(m, g)
    return float(np.abs(_residual(g, mu, s, theta.values)).max())
