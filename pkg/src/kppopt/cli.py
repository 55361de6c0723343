"""Batch command line: ``kppopt {solve,optimize,sweep-g,quasi,verify}``.

Parameters come from built-in defaults, then an optional ``--config`` JSON
file, then command-line flags (flags win).  Every command writes into
``--out`` and records the grid size actually used.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .checks import SUITES, run_suites
from .crenels import log_mu_grid, sweep_G
from .errors import DegenerateState, KPPError, StructureViolation
from .grid import (Grid, ResourceProfile, auto_grid_size, constant, crenel, integrate, mass,
                   write_columns)
from .optimize import OptimizerConfig, default_seeds, multistart
from .state import solve_state
from .symmetry import quasi_pipeline

log = logging.getLogger("kppopt")

EXIT_OK, EXIT_VERIFY, EXIT_FAIL, EXIT_DEGENERATE = 0, 1, 2, 3

GRID_RULE = "n = smallest power of two >= max(requested n, ceil(10/sqrt(mu)))"

DEFAULTS = {
    "common": {"out": "out", "n": None, "mu": None, "c": None, "kappa": 1.0, "jobs": 1,
               "rng_seed": 0},
    "solve": {"n": 1024, "profile": None, "crenel": None, "constant": None},
    "optimize": {"n": 4096, "c": 2.0, "max_outer": 200, "mu_bar_guess": None, "tiles": True,
                 "seed_profile": None},
    "sweep-g": {"n": 1024, "c": 2.0, "mu_start": 1e-3, "mu_stop": 10.0, "mu_count": 33,
                "golden_tol": 1e-5},
    "quasi": {"n": 4096, "c": 2.0, "max_outer": 200, "mu_bar_guess": None, "tiles": True,
              "seed_profile": None},
    "verify": {"n": 2 ** 13, "suite": None},
}


class CLIError(Exception):
    def __init__(self, code: int, kind: str, message: str):
        super().__init__(message)
        self.code, self.kind = code, kind


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file of parameters; flags override it")
    p.add_argument("--out", help="output directory (default: out)")
    p.add_argument("--n", type=int, help="requested grid intervals (raised by the grid rule)")
    p.add_argument("--mu", type=float, help="diffusivity")
    p.add_argument("--c", type=float, help="resource cost")
    p.add_argument("--kappa", type=float, help="resource bound")
    p.add_argument("--jobs", type=int, help="worker processes for seeds / sweep points")
    p.add_argument("--rng-seed", dest="rng_seed", type=int, help="seed for random profiles")


def _seed_flags(p):
    p.add_argument("--max-outer", dest="max_outer", type=int)
    p.add_argument("--mu-bar-guess", dest="mu_bar_guess", type=float,
                   help="diffusivity of the best crenel (default: coarse estimate)")
    p.add_argument("--no-tiles", dest="tiles", action="store_const", const=False,
                   help="skip the k-symmetric tile seeds")
    p.add_argument("--seed-profile", dest="seed_profile",
                   help="extra seed profile (inline JSON or path)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kppopt", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve the state equation for one resource profile")
    _common(p)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--profile", help="resource profile (inline JSON or path)")
    g.add_argument("--crenel", type=float, help="crenel kappa * 1[0, ELL)")
    g.add_argument("--constant", type=float, help="constant resource")

    p = sub.add_parser("optimize", help="multistart maximisation of F")
    _common(p)
    _seed_flags(p)

    p = sub.add_parser("sweep-g", help="best crenel value G over a log grid of mu")
    _common(p)
    p.add_argument("--mu-start", dest="mu_start", type=float)
    p.add_argument("--mu-stop", dest="mu_stop", type=float)
    p.add_argument("--mu-count", dest="mu_count", type=int)
    p.add_argument("--golden-tol", dest="golden_tol", type=float)

    p = sub.add_parser("quasi", help="optimise, then build the k-symmetric quasi-maximiser")
    _common(p)
    _seed_flags(p)

    p = sub.add_parser("verify", help="run identity and bound checks")
    _common(p)
    p.add_argument("--suite", action="append", choices=sorted(SUITES),
                   help="suite to run (repeatable; default: all)")
    return ap


def resolve(args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then explicit flags."""
    cfg = dict(DEFAULTS["common"])
    cfg.update(DEFAULTS[args.command])
    if args.config:
        try:
            extra = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise CLIError(EXIT_FAIL, "InvalidInput", f"cannot read config: {exc}") from None
        if not isinstance(extra, dict):
            raise CLIError(EXIT_FAIL, "InvalidInput", "config must be a JSON object")
        cfg.update({k.replace("-", "_"): v for k, v in extra.items()})
    for k, v in vars(args).items():
        if v is not None and k not in ("config", "command", "verbose"):
            cfg[k] = v
    return cfg


def _positive(cfg, key, required=True):
    v = cfg.get(key)
    if v is None:
        if required:
            raise CLIError(EXIT_FAIL, "InvalidInput", f"{key} is required")
        return None
    if not (isinstance(v, (int, float)) and np.isfinite(v) and v > 0):
        raise CLIError(EXIT_FAIL, "InvalidInput", f"{key} must be positive")
    return float(v)


def _finite(cfg, key):
    v = cfg.get(key)
    if v is None:
        return None
    if not (isinstance(v, (int, float)) and np.isfinite(v)):
        raise CLIError(EXIT_FAIL, "InvalidInput", f"{key} must be finite")
    return float(v)


def _grid_record(n_req, n):
    return {"n": n, "n_requested": n_req, "grid_rule": GRID_RULE}


def _load_profile(source):
    """A profile from a dict (config file), inline JSON text or a JSON path."""
    if isinstance(source, dict):
        return ResourceProfile.from_dict(source)
    return ResourceProfile.from_json(source)


def _dump(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def _clean(x):
    """NaN and inf are not JSON; write them as null."""
    if isinstance(x, float) and not np.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return x


def cmd_solve(cfg: dict, out: Path) -> int:
    mu = _positive(cfg, "mu")
    kappa = _positive(cfg, "kappa")
    c = _finite(cfg, "c")
    if cfg.get("profile") is not None:
        m = _load_profile(cfg["profile"])
    elif cfg.get("crenel") is not None:
        m = crenel(float(cfg["crenel"]), kappa)
    elif cfg.get("constant") is not None:
        m = constant(float(cfg["constant"]), kappa)
    else:
        raise CLIError(EXIT_FAIL, "InvalidInput", "one of profile, crenel or constant is required")
    n_req = int(cfg["n"])
    n = auto_grid_size(mu, n_req)
    g = Grid(n, m.length)
    st = solve_state(m, mu, g)
    write_columns(out / "fields.csv", {"x": g.nodes, "m": st.m.values, "theta": st.theta.values})
    summary = {"mu": mu, "kappa": m.kappa, "mass": mass(m), "residual": st.residual_norm,
               "iterations": st.iterations, "method": st.method.value,
               "integral_theta": integrate(st.theta), **_grid_record(n_req, n)}
    if c is not None:
        summary["c"] = c
        summary["F"] = summary["integral_theta"] - c * summary["mass"]
    _dump(out / "summary.json", _clean(summary))
    return EXIT_OK


def _optimizer_setup(cfg):
    mu = _positive(cfg, "mu")
    kappa = _positive(cfg, "kappa")
    c = _finite(cfg, "c")
    n_req = int(cfg["n"])
    n = auto_grid_size(mu, n_req)
    ocfg = OptimizerConfig(mu=mu, c=c, kappa=kappa, grid_n=n, max_outer=int(cfg["max_outer"]))
    seeds = default_seeds(ocfg, rng_seed=int(cfg["rng_seed"]), mu_bar_guess=cfg["mu_bar_guess"],
                          tiles=bool(cfg["tiles"]))
    if cfg.get("seed_profile") is not None:
        seeds.append(_load_profile(cfg["seed_profile"]))
    return ocfg, seeds, _grid_record(n_req, n)


def _write_fields(path, res):
    g = res.theta.grid
    sw = res.switching
    cols = {"x": g.nodes, "m": res.theta.m.values, "theta": res.theta.theta.values}
    nan = np.full(g.n + 1, np.nan)
    cols["p"] = res.adjoint.p.values if res.adjoint is not None else nan
    cols["phi"] = res.phi.values if sw is not None else nan
    cols["H"] = sw.hamiltonian.values if sw is not None else nan
    write_columns(path, cols)


def cmd_optimize(cfg: dict, out: Path) -> int:
    ocfg, seeds, grid_rec = _optimizer_setup(cfg)
    res = multistart(ocfg, seeds, jobs=int(cfg["jobs"]))
    res.m_star.to_json(out / "maximizer.json")
    _write_fields(out / "fields.csv", res)
    report = {"mu": ocfg.mu, "c": ocfg.c, "kappa": ocfg.kappa, "seeds": len(seeds),
              "rng_seed": int(cfg["rng_seed"]), **res.summary(), **grid_rec}
    _dump(out / "report.json", _clean(report))
    return EXIT_OK


def cmd_sweep_g(cfg: dict, out: Path) -> int:
    kappa = _positive(cfg, "kappa")
    c = _finite(cfg, "c")
    start, stop = _positive(cfg, "mu_start"), _positive(cfg, "mu_stop")
    count = int(cfg["mu_count"])
    if not stop > start:
        raise CLIError(EXIT_FAIL, "InvalidInput", "mu_stop must exceed mu_start")
    mus = log_mu_grid(start, stop, count)
    res = sweep_G(mus, c, kappa, n=int(cfg["n"]), tol=float(cfg["golden_tol"]),
                  jobs=int(cfg["jobs"]))
    write_columns(out / "g_curve.csv", {
        "mu": [r.mu for r in res.records],
        "ell_star": [r.ell_star for r in res.records],
        "G": [r.G_value for r in res.records],
        "n": [r.n for r in res.records],
        "status": [r.status for r in res.records],
    })
    band = {"c": c, "kappa": kappa, "mu_grid": {"start": start, "stop": stop, "count": count},
            "n_requested": int(cfg["n"]), "grid_rule": GRID_RULE, **res.band()}
    _dump(out / "band.json", _clean(band))
    return EXIT_OK


def cmd_quasi(cfg: dict, out: Path) -> int:
    ocfg, seeds, grid_rec = _optimizer_setup(cfg)
    res, rep = quasi_pipeline(ocfg, seeds, jobs=int(cfg["jobs"]))
    rep.m_bar.to_json(out / "m_bar.json")
    rep.m_hat.to_json(out / "m_hat.json")
    report = {**rep.to_dict(), "optimizer": res.summary(), **grid_rec}
    _dump(out / "quasi_report.json", _clean(report))
    return EXIT_OK


def cmd_verify(cfg: dict, out: Path) -> int:
    n = int(cfg["n"])
    checks = run_suites(cfg.get("suite"), n=n)
    for chk in checks:
        log.info(chk.line())
    ok = all(chk.passed for chk in checks)
    _dump(out / "verify.json", _clean({"n": n, "all_passed": ok,
                                        "checks": [c.to_dict() for c in checks]}))
    return EXIT_OK if ok else EXIT_VERIFY


COMMANDS = {"solve": cmd_solve, "optimize": cmd_optimize, "sweep-g": cmd_sweep_g,
            "quasi": cmd_quasi, "verify": cmd_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(message)s", stream=sys.stderr)
    out = None
    try:
        cfg = resolve(args)
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out)
    except CLIError as exc:
        return _fail(out, exc.code, exc.kind, str(exc))
    except (DegenerateState, StructureViolation) as exc:
        return _fail(out, EXIT_DEGENERATE, type(exc).__name__, str(exc))
    except KPPError as exc:
        return _fail(out, EXIT_FAIL, type(exc).__name__, str(exc))
    except OSError as exc:
        return _fail(None, EXIT_FAIL, "OSError", str(exc))


def _fail(out, code, kind, message) -> int:
    diag = {"error": kind, "message": message, "exit_code": code}
    print(json.dumps(diag), file=sys.stderr)
    if out is not None:
        try:
            _dump(out / "error.json", diag)
        except OSError:
            pass
    return code
