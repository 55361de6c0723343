"""Executable identities and bounds, shared by ``kppopt verify`` and the tests.

Each check returns :class:`Check` records: both sides, the tolerance and the
verdict.  Tolerances are fixed here, next to the checks that use them.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .adjoint import directional_derivative, solve_adjoint, switching
from .grid import (Grid, auto_grid_size, constant, crenel, mass, random_bang_bang,
                   random_profile)
from .optimize import objective, objective_nodal, scaling_check_Bmu
from .state import solve_state
from .symmetry import dilation_identity_check, ksym_identity_check


@dataclass(frozen=True)
class Check:
    name: str
    lhs: float
    rhs: float
    tolerance: float
    passed: bool
    detail: str = ""

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.name}: lhs={self.lhs:.12g} rhs={self.rhs:.12g} tol={self.tolerance:.3g} {self.detail}".rstrip()

    def to_dict(self) -> dict:
        return {k: (bool(v) if k == "passed" else v) for k, v in asdict(self).items()}


def _rel(lhs, rhs, floor=0.0):
    return abs(lhs - rhs) / max(abs(lhs), abs(rhs), floor)


def check_constants(c: float = 2.0, kappa: float = 1.0, n: int = 1024) -> list[Check]:
    out = []
    for a in (0.3, 1.0):
        for mu in (0.01, 1.0, 100.0):
            F = objective(constant(a, kappa), mu, c, Grid(n))
            exact = (1 - c) * a
            out.append(Check(f"constant a={a} mu={mu}", F, exact, 1e-10, abs(F - exact) <= 1e-10))
    return out


def check_dilation(n: int = 2 ** 13, mu: float = 0.05, lam: float = 2.0, c: float = 2.0,
                   ell: float = 0.3) -> list[Check]:
    """Relative mismatch at n, and its decrease under n -> 2n (second order: about 4x)."""
    m = crenel(ell)
    l1, r1 = dilation_identity_check(m, mu, lam, c, n)
    l2, r2 = dilation_identity_check(m, mu, lam, c, 2 * n)
    e1, e2 = _rel(l1, r1), _rel(l2, r2)
    ratio = e1 / e2 if e2 > 0 else np.inf
    return [
        Check(f"dilation lam={lam} n={n}", l1, r1, 1e-6, e1 <= 1e-6, f"rel={e1:.3e}"),
        Check(f"dilation refinement n={n}->{2 * n}", e1, e2, 0.0, 2.0 <= ratio <= 8.0,
              f"ratio={ratio:.3g} (accepted band [2, 8] around 4)"),
    ]


def check_ksym(n: int = 2 ** 14, ks=(2, 4, 8), k2mu: float = 0.25, c: float = 2.0,
               ell: float = 0.4) -> list[Check]:
    out = []
    for k in ks:
        mu = k2mu / k ** 2
        l1, r1 = ksym_identity_check(crenel(ell), k, mu, c, n)
        l2, r2 = ksym_identity_check(crenel(ell), k, mu, c, 2 * n)
        e1 = abs(l1 - r1) / (1 + abs(r1))
        e2 = abs(l2 - r2) / (1 + abs(r2))
        ratio = e1 / e2 if e2 > 0 else np.inf
        out.append(Check(f"k-symmetric k={k} n={n}", l1, r1, 2e-5, e1 <= 2e-5, f"err={e1:.3e}"))
        out.append(Check(f"k-symmetric k={k} refinement", e1, e2, 0.0, 2.0 <= ratio <= 8.0,
                         f"ratio={ratio:.3g} (accepted band [2, 8] around 4)"))
    return out


def check_bscaling(n: int = 2 ** 13, Bs=(0.5, 2.5), mu: float = 0.02, c: float = 2.0,
                   ell: float = 0.4) -> list[Check]:
    out = []
    for B in Bs:
        lhs, rhs = scaling_check_Bmu(crenel(ell), mu, B, c, Grid(n))
        e = _rel(lhs, rhs)
        out.append(Check(f"B-scaling B={B}", lhs, rhs, 1e-6, e <= 1e-6, f"rel={e:.3e}"))
    return out


def check_gradient(n: int = 2 ** 12, mu: float = 0.1, c: float = 2.0, eps: float = 1e-5,
                   directions: int = 5, rng_seed: int = 7, kappa: float = 1.0) -> list[Check]:
    """Adjoint directional derivative against central differences.

    Directions point into the admissible set at the bang-bang base point
    (down where m = kappa, up where m = 0); the central difference steps
    ``eps`` outside it, where the state equation is still well posed.
    """
    rng = np.random.default_rng(rng_seed)
    g = Grid(n)
    m = random_bang_bang(rng, 6, kappa)
    st = solve_state(m, mu, g)
    sw = switching(st, solve_adjoint(st, m), c)
    s = st.m.values
    out = []
    for j in range(directions):
        mag = random_profile(rng, 8, 1.0)
        u = 0.2 + 0.8 * mag(g.nodes)
        d = np.where(s > 0.5 * kappa, -u, u)
        fp, _ = objective_nodal(s + eps * d, mu, c, g, kappa)
        fm, _ = objective_nodal(s - eps * d, mu, c, g, kappa)
        fd = (fp - fm) / (2 * eps)
        an = directional_derivative(sw, d)
        e = _rel(fd, an)
        out.append(Check(f"adjoint gradient direction {j}", an, fd, 1e-4, e <= 1e-4, f"rel={e:.3e}"))
    return out


def check_derivative_bounds(samples: int = 5, rng_seed: int = 11, c: float = 2.0,
                            kappa: float = 1.0, n_min: int = 2 ** 11) -> list[Check]:
    """Upper bound on dF/dmu and the lower bound under mu -> mu (1-r)^2."""
    rng = np.random.default_rng(rng_seed)
    out = []
    s_step = 1e-3
    for j in range(samples):
        m = random_profile(rng, int(rng.integers(3, 9)), kappa)
        mu = float(10 ** rng.uniform(-2.5, 0.0))
        r = float(rng.uniform(0.05, 0.5))
        g = Grid(auto_grid_size(mu * (1 - r) ** 2, n_min))
        F0 = objective(m, mu, c, g)
        F1 = objective(m, mu * (1 + s_step), c, g)
        slope = (F1 - F0) / (mu * s_step)
        bound = kappa / mu * (1 + 1e-3)
        out.append(Check(f"dF/dmu <= kappa/mu (mu={mu:.3g})", slope, bound, 0.0, slope <= bound))
        Fr = objective(m, mu * (1 - r) ** 2, c, g)
        diff = Fr - F0
        low = -2 * kappa * r - 1e-6
        out.append(Check(f"F_mu(1-r)^2 - F_mu >= -2 kappa r (mu={mu:.3g}, r={r:.3f})",
                         diff, low, 1e-6, diff >= low))
    return out


def check_flattening(ell: float = 0.5, kappa: float = 1.0, n: int = 1024) -> list[Check]:
    m = crenel(ell, kappa)
    g = Grid(n)
    vals = {}
    for mu in (1.0, 10.0, 100.0, 1000.0):
        th = solve_state(m, mu, g).theta.values
        vals[mu] = float(np.abs(th - mass(m)).max() * np.sqrt(mu))
    detail = " ".join(f"mu={k:g}:{v:.3e}" for k, v in vals.items())
    return [Check("flattening sqrt(mu)*|theta - mass| (mu=1000 vs 4x mu=1)",
                  vals[1000.0], 4 * vals[1.0], 0.0, vals[1000.0] <= 4 * vals[1.0], detail)]


SUITES = {
    "constants": check_constants,
    "dilation": check_dilation,
    "ksym": check_ksym,
    "bscaling": check_bscaling,
    "gradient": check_gradient,
    "bounds": check_derivative_bounds,
    "flattening": check_flattening,
}


def run_suites(names=None, n: int | None = None) -> list[Check]:
    """Run the named suites (all by default); ``n`` overrides the identity grids."""
    names = list(SUITES) if not names else list(names)
    out = []
    for name in names:
        fn = SUITES[name]
        if n is not None and name in ("dilation", "bscaling"):
            out += fn(n=n)
        elif n is not None and name == "ksym":
            out += fn(n=max(n, 2 ** 13))
        else:
            out += fn()
    return out
