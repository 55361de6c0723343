"""Uniform node-centred grid, exact piecewise-constant resources, quadrature.

Resources are stored by their breakpoints and never resampled except
through :func:`sample_resource`, which hands the solvers one cell average
per node.  The node cell of node ``i`` is ``[x_i - h/2, x_i + h/2]``
clipped to the domain, so the two end cells are half cells and the
trapezoidal weights coincide with the cell widths.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInput

MIN_NODES = 16
# pieces narrower than this (relative to the domain) are rounding debris
_SLIVER = 1e-13


@dataclass(frozen=True)
class Grid:
    n: int
    length: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < MIN_NODES:
            raise InvalidInput(f"grid needs n >= {MIN_NODES} intervals, got {self.n}")
        if not self.length > 0:
            raise InvalidInput("grid length must be positive")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "length", float(self.length))

    @property
    def h(self) -> float:
        return self.length / self.n

    @property
    def nodes(self) -> np.ndarray:
        x = np.arange(self.n + 1) * self.h
        x[-1] = self.length
        return x

    @property
    def edges(self) -> np.ndarray:
        """Boundaries of the node cells, ``n + 2`` values from 0 to length."""
        e = np.empty(self.n + 2)
        e[0] = 0.0
        e[1:-1] = (np.arange(1, self.n + 1) - 0.5) * self.h
        e[-1] = self.length
        return e

    @property
    def weights(self) -> np.ndarray:
        w = np.full(self.n + 1, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w


def make_grid(n: int, length: float = 1.0) -> Grid:
    return Grid(n, length)


def auto_grid_size(mu: float, requested: int = MIN_NODES) -> int:
    """Power of two >= max(requested, ceil(10/sqrt(mu))).

    Keeps at least ten cells across a boundary layer of width sqrt(mu).
    """
    need = max(int(requested), int(np.ceil(10.0 / np.sqrt(mu))), MIN_NODES)
    return 1 << int(np.ceil(np.log2(need)))


@dataclass(frozen=True)
class GridField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n + 1,):
            raise InvalidInput(f"field has {v.shape} values, grid expects {self.grid.n + 1}")
        if not np.all(np.isfinite(v)):
            raise InvalidInput("field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def to_csv(self, path, name="value"):
        write_columns(path, {"x": self.grid.nodes, name: self.values})


def write_columns(path, columns: dict):
    """CSV with every float in 17-significant-digit scientific notation."""
    names = list(columns)
    cols = [np.asarray(columns[k]) for k in names]
    lines = [",".join(names)]
    for row in zip(*cols):
        lines.append(",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.16e}"


def integrate(f: GridField) -> float:
    """Composite trapezoidal rule, summed without cancellation loss (fsum)."""
    return math.fsum(f.grid.weights * f.values)


def derivative(f: GridField) -> GridField:
    """Central differences inside, second-order one-sided at both ends."""
    return GridField(f.grid, np.gradient(f.values, f.grid.h, edge_order=2))


@dataclass(frozen=True)
class ResourceProfile:
    """Piecewise-constant resource: ``values[j]`` on ``(breakpoints[j], breakpoints[j+1])``.

    Adjacent equal values are merged on construction, so ``jump_count`` is
    the number of interior breakpoints.  The domain is ``[0, breakpoints[-1]]``.
    """

    breakpoints: np.ndarray
    values: np.ndarray
    kappa: float = 1.0
    _cum: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        b = np.array(self.breakpoints, dtype=float).ravel()
        v = np.array(self.values, dtype=float).ravel()
        kappa = float(self.kappa)
        if not kappa > 0:
            raise InvalidInput("kappa must be positive")
        if len(b) != len(v) + 1 or len(v) == 0:
            raise InvalidInput("need len(breakpoints) == len(values) + 1 >= 2")
        if b[0] != 0.0:
            raise InvalidInput("first breakpoint must be 0")
        if not np.all(np.isfinite(b)) or not np.all(np.isfinite(v)):
            raise InvalidInput("breakpoints and values must be finite")
        if np.any(np.diff(b) <= 0):
            raise InvalidInput("breakpoints must be strictly increasing")
        slack = 1e-12 * kappa
        if np.any(v < -slack) or np.any(v > kappa + slack):
            raise InvalidInput("values must lie in [0, kappa]")
        v = np.clip(v, 0.0, kappa)
        b, v = _merge(*_drop_slivers(b, v))
        b.setflags(write=False)
        v.setflags(write=False)
        cum = np.concatenate([[0.0], np.cumsum(v * np.diff(b))])
        cum.setflags(write=False)
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "_cum", cum)

    @property
    def length(self) -> float:
        return float(self.breakpoints[-1])

    def __call__(self, x):
        """Right-continuous point evaluation."""
        x = np.asarray(x, dtype=float)
        j = np.searchsorted(self.breakpoints, x, side="right") - 1
        return self.values[np.clip(j, 0, len(self.values) - 1)]

    def cumulative(self, x):
        """Integral of the profile from 0 to ``x`` (exact, piecewise linear)."""
        return np.interp(x, self.breakpoints, self._cum)

    def integral(self, a: float, b: float) -> float:
        return float(self.cumulative(b) - self.cumulative(a))

    def is_bang_bang(self, tol: float = 1e-8) -> bool:
        v = self.values
        return bool(np.all((v <= tol * self.kappa) | (v >= self.kappa * (1 - tol))))

    def restrict(self, a: float, b: float) -> "ResourceProfile":
        """The profile on ``(a, b)``, mapped linearly onto ``[0, 1]``."""
        if not 0 <= a < b <= self.length:
            raise InvalidInput(f"bad restriction interval ({a}, {b})")
        inner = self.breakpoints[(self.breakpoints > a) & (self.breakpoints < b)]
        pts = np.concatenate([[a], inner, [b]])
        mids = 0.5 * (pts[:-1] + pts[1:])
        return ResourceProfile((pts - a) / (b - a), self(mids), self.kappa)

    def reflect(self) -> "ResourceProfile":
        """``x -> L - x``."""
        L = self.length
        b = L - self.breakpoints[::-1]
        b[0], b[-1] = 0.0, L
        return ResourceProfile(b, self.values[::-1], self.kappa)

    def dilate(self, lam: float) -> "ResourceProfile":
        """``x -> m(lam * x)`` on ``[0, L / lam]``."""
        if not lam > 0:
            raise InvalidInput("dilation factor must be positive")
        return ResourceProfile(self.breakpoints / lam, self.values, self.kappa)

    def scaled(self, factor: float) -> "ResourceProfile":
        """``factor * m`` with the bound scaled alike."""
        if not factor > 0:
            raise InvalidInput("scale factor must be positive")
        return ResourceProfile(self.breakpoints, self.values * factor, self.kappa * factor)

    def to_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "breakpoints": [float(x) for x in self.breakpoints],
            "values": [float(x) for x in self.values],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ResourceProfile":
        try:
            return cls(d["breakpoints"], d["values"], d["kappa"])
        except KeyError as exc:
            raise InvalidInput(f"profile JSON lacks {exc.args[0]!r}") from None

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    @classmethod
    def from_json(cls, text_or_path) -> "ResourceProfile":
        s = str(text_or_path).strip()
        if not s.startswith("{"):
            s = Path(s).read_text()
        return cls.from_dict(json.loads(s))


def _drop_slivers(b, v):
    L = b[-1]
    while len(v) > 1:
        w = np.diff(b)
        j = int(np.argmin(w))
        if w[j] > _SLIVER * L:
            break
        # absorb the sliver into a neighbour, keeping the domain ends fixed
        if j == len(v) - 1:
            b = np.delete(b, j)
        else:
            b = np.delete(b, j + 1)
        v = np.delete(v, j)
    return b, v


def _merge(b, v):
    keep = np.concatenate([[True], v[1:] != v[:-1]])
    v = v[keep]
    b = np.concatenate([b[:-1][keep], b[-1:]])
    return b, v


def constant(a: float, kappa: float = 1.0, length: float = 1.0) -> ResourceProfile:
    return ResourceProfile([0.0, length], [a], kappa)


def crenel(ell: float, kappa: float = 1.0, length: float = 1.0) -> ResourceProfile:
    """``kappa`` on ``[0, ell]``, zero on ``(ell, length]``."""
    if not 0 <= ell <= length:
        raise InvalidInput("crenel length must lie in [0, length]")
    if ell <= _SLIVER * length:
        return constant(0.0, kappa, length)
    if ell >= length * (1 - _SLIVER):
        return constant(kappa, kappa, length)
    return ResourceProfile([0.0, ell, length], [kappa, 0.0], kappa)


def from_cells(grid: Grid, s, kappa: float) -> ResourceProfile:
    """Profile constant on every node cell, taking the nodal value ``s[i]``."""
    return ResourceProfile(grid.edges, np.asarray(s, dtype=float), kappa)


def random_bang_bang(rng: np.random.Generator, pieces: int, kappa: float = 1.0,
                     length: float = 1.0) -> ResourceProfile:
    """Alternating 0/kappa profile with ``pieces`` random-width pieces."""
    inner = np.sort(rng.uniform(0.05, 0.95, size=pieces - 1)) * length
    b = np.concatenate([[0.0], inner, [length]])
    start = int(rng.integers(2))
    v = kappa * ((np.arange(pieces) + start) % 2)
    return ResourceProfile(b, v, kappa)


def random_profile(rng: np.random.Generator, pieces: int, kappa: float = 1.0,
                   length: float = 1.0) -> ResourceProfile:
    inner = np.sort(rng.uniform(0.0, 1.0, size=pieces - 1)) * length
    b = np.concatenate([[0.0], inner, [length]])
    return ResourceProfile(b, rng.uniform(0.0, kappa, size=pieces), kappa)


def mass(m: ResourceProfile) -> float:
    return math.fsum(m.values * np.diff(m.breakpoints))


def total_variation(m: ResourceProfile) -> float:
    return float(np.abs(np.diff(m.values)).sum())


def jump_count(m: ResourceProfile) -> int:
    return len(m.values) - 1


def l1_distance(m1: ResourceProfile, m2: ResourceProfile) -> float:
    """Exact L1 distance between two profiles on the same domain."""
    if abs(m1.length - m2.length) > 1e-12 * m1.length:
        raise InvalidInput("profiles live on different domains")
    pts = np.union1d(m1.breakpoints, m2.breakpoints)
    pts = pts[pts <= m1.length]
    mids = 0.5 * (pts[:-1] + pts[1:])
    return float(np.sum(np.abs(m1(mids) - m2(mids)) * np.diff(pts)))


def sample_resource(m: ResourceProfile, g: Grid) -> GridField:
    """Average of ``m`` over each node cell.

    Cells containing no breakpoint receive the piece value verbatim, so
    constant and grid-aligned profiles are sampled without rounding.
    """
    if abs(m.length - g.length) > 1e-12 * g.length:
        raise InvalidInput(f"profile on [0,{m.length}] does not match grid on [0,{g.length}]")
    e = g.edges
    avg = np.diff(m.cumulative(e)) / np.diff(e)
    b = m.breakpoints
    inside = np.searchsorted(b, e[1:], side="left") - np.searchsorted(b, e[:-1], side="right")
    clean = inside <= 0
    avg[clean] = m(0.5 * (e[:-1] + e[1:]))[clean]
    return GridField(g, np.clip(avg, 0.0, m.kappa))
