"""Adjoint state, switching function and Hamiltonian.

The adjoint solves ``-mu p'' - (m - 2 theta) p = 1`` with the same ghost-node
Neumann stencil as the state.  Because the trapezoidal weights symmetrise
that stencil, this ``p`` is also the exact discrete adjoint of
``F_h = trapz(theta) - c * mass``: the nodal derivative of ``F_h`` with
respect to the cell sample ``s_i`` is ``w_i (p_i theta_i - c)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, solve_banded

from .errors import InvalidInput, SingularSystem
from .grid import GridField, derivative, integrate
from .state import StateSolution, apply_laplacian, laplacian_bands, roundoff_floor


@dataclass(frozen=True)
class AdjointSolution:
    p: GridField
    mu: float
    residual_norm: float

    @property
    def positive(self) -> bool:
        return bool(self.p.values.min() > -1e-12)


@dataclass(frozen=True)
class SwitchingData:
    phi: GridField
    gradient: GridField
    hamiltonian: GridField
    c: float
    m: GridField  # the nodal resource the fields were computed for


def adjoint_residual(p: np.ndarray, state: StateSolution) -> float:
    g, mu = state.grid, state.mu
    s, th = state.m.values, state.theta.values
    return float(np.abs(apply_laplacian(g, mu, p) - (s - 2 * th) * p - 1.0).max())


def solve_adjoint(state: StateSolution, m=None, mu: float | None = None, g=None) -> AdjointSolution:
    """Direct tridiagonal solve of the linearised Neumann problem.

    ``m``, ``mu`` and ``g`` are optional consistency checks against the
    state; the state already carries its nodal resource.
    """
    g = g or state.grid
    mu = state.mu if mu is None else mu
    if g != state.grid or mu != state.mu:
        raise InvalidInput("adjoint grid/mu differ from the state's")
    s, th = state.m.values, state.theta.values
    if m is not None:
        from .grid import sample_resource
        from .state import state_residual

        if not np.array_equal(sample_resource(m, g).values, s):
            raise InvalidInput("resource does not match the state")
        scale = max(float(s.max()), 1e-300)
        if state_residual(state.theta, s, mu) > 10 * max(1e-11, roundoff_floor(g, mu, scale)):
            raise InvalidInput("theta is not a converged state for this resource")
    if not np.any(th > 0):
        raise SingularSystem("theta == 0: the Neumann problem -mu p'' = 1 has no solution")
    ab = laplacian_bands(g, mu)
    ab[1] -= s - 2 * th
    try:
        p = solve_banded((1, 1), ab, np.ones(g.n + 1), check_finite=False)
    except LinAlgError as exc:
        raise SingularSystem(f"adjoint operator is singular: {exc}") from None
    if not np.all(np.isfinite(p)):
        raise SingularSystem("adjoint solve produced non-finite values")
    res = adjoint_residual(p, state)
    scale = max(float(np.abs(p).max()), 1.0)
    if res > 1e-6 * scale * (1 + mu / g.h ** 2):
        raise SingularSystem(f"adjoint operator is numerically singular (residual {res:.3e})")
    return AdjointSolution(GridField(g, p), mu, res)


def hamiltonian(state: StateSolution, adj: AdjointSolution, c: float) -> GridField:
    """``mu p' theta' + p theta (m - theta) + theta - c m`` with grid derivatives."""
    th, p, s = state.theta.values, adj.p.values, state.m.values
    dth = derivative(state.theta).values
    dp = derivative(adj.p).values
    return GridField(state.grid, state.mu * dp * dth + p * th * (s - th) + th - c * s)


def switching(state: StateSolution, adj: AdjointSolution, c: float) -> SwitchingData:
    if adj.p.grid != state.grid:
        raise InvalidInput("state and adjoint live on different grids")
    phi = adj.p.values * state.theta.values
    return SwitchingData(
        phi=GridField(state.grid, phi),
        gradient=GridField(state.grid, phi - c),
        hamiltonian=hamiltonian(state, adj, c),
        c=float(c),
        m=state.m,
    )


def gateaux_gradient(sw: SwitchingData) -> GridField:
    """L2 gradient of F at m: ``dF[h] = integral (phi - c) h``."""
    return sw.gradient


def directional_derivative(sw: SwitchingData, direction) -> float:
    """``dF[h]`` for a nodal direction (array, field or profile)."""
    from .grid import ResourceProfile, sample_resource

    g = sw.gradient.grid
    if isinstance(direction, ResourceProfile):
        direction = sample_resource(direction, g).values
    h = np.asarray(getattr(direction, "values", direction), dtype=float)
    return integrate(GridField(g, sw.gradient.values * h))
