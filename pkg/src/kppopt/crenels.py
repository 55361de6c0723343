"""Best crenel value ``G(mu) = sup_ell F_mu(crenel(ell))`` and its sweep over mu."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput, KPPError
from .grid import Grid, auto_grid_size, crenel
from .optimize import objective
from .state import SolverOptions

log = logging.getLogger(__name__)

INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0


def golden_section_max(f, a: float, b: float, tol: float = 1e-5):
    """Maximise a unimodal ``f`` on ``[a, b]`` until the bracket is below ``tol``."""
    x1 = b - INV_PHI * (b - a)
    x2 = a + INV_PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - INV_PHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + INV_PHI * (b - a)
            f2 = f(x2)
    return (x1, f1) if f1 >= f2 else (x2, f2)


def maximize_over_crenels(mu: float, c: float, kappa: float, g: Grid,
                          tol: float = 1e-5, scan: int = 64,
                          opts: SolverOptions | None = None) -> tuple[float, float]:
    """Coarse scan over ``ell = j / scan`` then golden-section refinement.

    Returns ``(ell_star, G)``; ties in the scan go to the smaller ``ell``.
    """
    if not mu > 0:
        raise InvalidInput("mu must be positive")
    cache = {}

    def F(ell):
        ell = float(min(max(ell, 0.0), 1.0))
        if ell not in cache:
            cache[ell] = objective(crenel(ell, kappa, g.length), mu, c, g, opts)
        return cache[ell]

    ells = np.arange(scan + 1) / scan
    vals = np.array([F(e) for e in ells])
    j = int(np.argmax(vals))
    best_ell, best = float(ells[j]), float(vals[j])
    lo, hi = ells[max(j - 1, 0)], ells[min(j + 1, scan)]
    ell, val = golden_section_max(F, lo, hi, tol)
    if val > best:
        best_ell, best = float(ell), float(val)
    return best_ell, best


@dataclass(frozen=True)
class SweepRecord:
    mu: float
    ell_star: float
    G_value: float
    n: int
    status: str = "ok"


@dataclass
class SweepResult:
    records: list
    G_max: float
    mu_bar_l: float
    mu_bar_r: float
    argmax_band_tol: float
    failures: dict = field(default_factory=dict)

    def band(self) -> dict:
        return {
            "G_max": self.G_max,
            "mu_bar_l": self.mu_bar_l,
            "mu_bar_r": self.mu_bar_r,
            "argmax_band_tol": self.argmax_band_tol,
            "failures": {str(k): v for k, v in self.failures.items()},
        }

    @property
    def mu_star(self) -> float:
        """Grid argmax of G (smallest mu on ties)."""
        return self.mu_bar_l


def argmax_band(mus, G, band_tol: float | None = None):
    """``(G_max, mu_bar_l, mu_bar_r, tol)`` for a sampled G curve."""
    mus = np.asarray(mus, dtype=float)
    G = np.asarray(G, dtype=float)
    ok = np.isfinite(G)
    if not np.any(ok):
        raise InvalidInput("no finite G values in the sweep")
    G_max = float(G[ok].max())
    tol = 1e-6 * max(1.0, abs(G_max)) if band_tol is None else band_tol
    inband = mus[ok & (G >= G_max - tol)]
    return G_max, float(inband.min()), float(inband.max()), tol


def _sweep_point(args):
    mu, c, kappa, n_req, tol = args
    n = auto_grid_size(mu, n_req)
    try:
        ell, G = maximize_over_crenels(mu, c, kappa, Grid(n), tol=tol)
        return SweepRecord(mu, ell, G, n)
    except KPPError as exc:
        return SweepRecord(mu, float("nan"), float("nan"), n, f"{type(exc).__name__}: {exc}")


def sweep_G(mu_grid, c: float, kappa: float = 1.0, n: int = 1024, tol: float = 1e-5,
            band_tol: float | None = None, jobs: int = 1) -> SweepResult:
    """G on each mu of a sorted grid; ``n`` is raised per point by the boundary-layer rule."""
    mus = np.asarray(mu_grid, dtype=float)
    if len(mus) < 8 or np.any(mus <= 0) or np.any(np.diff(mus) <= 0):
        raise InvalidInput("mu grid must be sorted, positive, with at least 8 points")
    tasks = [(float(mu), c, kappa, n, tol) for mu in mus]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_sweep_point, tasks))
    else:
        records = [_sweep_point(t) for t in tasks]
    failures = {r.mu: r.status for r in records if r.status != "ok"}
    G_max, l, r, tol_b = argmax_band(mus, [rec.G_value for rec in records], band_tol)
    return SweepResult(records, G_max, l, r, tol_b, failures)


def log_mu_grid(start: float, stop: float, count: int) -> np.ndarray:
    return np.logspace(np.log10(start), np.log10(stop), count)


def estimate_mu_bar(c: float, kappa: float = 1.0, count: int = 17, n: int = 512) -> float:
    """Coarse grid argmax of G over ``mu / kappa`` in [1e-4, 10].

    Cheap (low resolution, loose golden tolerance); used only to decide how
    many k-symmetric tiles to seed the optimiser with.
    """
    mus = kappa * log_mu_grid(1e-4, 10.0, count)
    res = sweep_G(mus, c, kappa, n=n, tol=1e-3)
    return res.mu_star
