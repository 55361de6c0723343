"""Reference solutions computed independently of the finite-difference solver.

``crenel_state_bvp`` splits [0,1] at the resource jump and solves both pieces
as one collocation problem (scipy ``solve_bvp``), matching value and flux
at the jump.  No code from the package is used.
"""

import numpy as np
from scipy.integrate import solve_bvp, quad


def crenel_state_bvp(ell, mu, kappa=1.0, tol=1e-10, nodes=2001):
    """theta for m = kappa on [0, ell), 0 after; returns callables and the integral."""
    L1, L2 = ell, 1.0 - ell

    def rhs(t, y):
        # y = (theta_1, theta_1', theta_2, theta_2') in x-units, t in [0, 1]
        t1, d1, t2, d2 = y
        return np.vstack([
            L1 * d1, L1 * (-t1 * (kappa - t1) / mu),
            L2 * d2, L2 * (-t2 * (0.0 - t2) / mu),
        ])

    def bc(ya, yb):
        return np.array([ya[1], yb[3], yb[0] - ya[2], yb[1] - ya[3]])

    t = np.linspace(0, 1, nodes)
    y0 = np.vstack([np.full_like(t, kappa * 0.9), np.zeros_like(t),
                    np.full_like(t, kappa * 0.5), np.zeros_like(t)])
    sol = solve_bvp(rhs, bc, t, y0, tol=tol, max_nodes=10 ** 6)
    if not sol.success:
        raise RuntimeError(sol.message)

    def theta(x):
        x = np.asarray(x, dtype=float)
        left = sol.sol(np.clip(x / L1, 0, 1))[0]
        right = sol.sol(np.clip((x - L1) / L2, 0, 1))[2]
        return np.where(x < L1, left, right)

    i1 = quad(lambda s: sol.sol(s)[0], 0, 1, epsabs=1e-13, limit=200)[0] * L1
    i2 = quad(lambda s: sol.sol(s)[2], 0, 1, epsabs=1e-13, limit=200)[0] * L2
    return theta, i1 + i2


def richardson(coarse, fine, order=2):
    """Extrapolate two values on grids h and h/2."""
    return fine + (fine - coarse) / (2 ** order - 1)


def crenel_adjoint_bvp(ell, mu, kappa=1.0, tol=1e-9, nodes=2001):
    """State and adjoint ``-mu p'' - (m - 2 theta) p = 1`` for a crenel, jointly collocated.

    Returns a callable x -> (theta, p).
    """
    L = (ell, 1.0 - ell)
    mvals = (kappa, 0.0)

    def rhs(t, y):
        out = []
        for j in range(2):
            th, dth, p, dp = y[4 * j:4 * j + 4]
            out += [L[j] * dth, L[j] * (-th * (mvals[j] - th) / mu),
                    L[j] * dp, L[j] * (-(1.0 + (mvals[j] - 2 * th) * p) / mu)]
        return np.vstack(out)

    def bc(ya, yb):
        return np.array([ya[1], yb[5], yb[0] - ya[4], yb[1] - ya[5],
                         ya[3], yb[7], yb[2] - ya[6], yb[3] - ya[7]])

    t = np.linspace(0, 1, nodes)
    y0 = np.vstack([np.full_like(t, 0.9 * kappa), 0 * t, np.full_like(t, 1.0 / kappa), 0 * t,
                    np.full_like(t, 0.5 * kappa), 0 * t, np.full_like(t, 1.0 / kappa), 0 * t])
    sol = solve_bvp(rhs, bc, t, y0, tol=tol, max_nodes=10 ** 6)
    if not sol.success:
        raise RuntimeError(sol.message)

    def fields(x):
        x = np.asarray(x, dtype=float)
        a = sol.sol(np.clip(x / L[0], 0, 1))
        b = sol.sol(np.clip((x - L[0]) / L[1], 0, 1))
        left = x < L[0]
        return np.where(left, a[0], b[4]), np.where(left, a[2], b[6])

    return fields
