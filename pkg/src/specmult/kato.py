"""Radial potentials and their Kato-class analytics.

For a radial potential the Coulomb-weighted integral
``x -> int |V(y)| / |x - y| dy`` is largest at the origin, where it equals
``4 pi int_0^inf r |V(r)| dr``.  On a grid this is ``sum_j w_j |V_j| / r_j``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import ClassMembershipError, ParameterError
from .radial import RadialGrid, lorentz_norm

__all__ = [
    "Potential",
    "KatoSplit",
    "kato_norm",
    "weak32_norm",
    "kato_split",
    "is_k0",
    "zero_potential",
    "well_potential",
    "gaussian_potential",
    "exp_potential",
    "potential_from_spec",
    "load_potential_csv",
    "parse_family",
]


@dataclass(frozen=True, eq=False)
class Potential:
    """Real potential samples on a grid.

    The Kato and weak-``L^{3/2}`` norms are computed on first access and
    cached.
    """

    grid: RadialGrid
    values: np.ndarray
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ParameterError("potential samples do not match the grid")
        if not np.all(np.isfinite(v)):
            raise ParameterError("potential samples must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @cached_property
    def kato_norm(self) -> float:
        return float(np.sum(self.grid.weights * np.abs(self.values) / self.grid.nodes))

    @cached_property
    def weak32_norm(self) -> float:
        return lorentz_norm(np.abs(self.values), (1.5, np.inf), self.grid.weights)

    @cached_property
    def l1_norm(self) -> float:
        return float(np.sum(self.grid.weights * np.abs(self.values)))

    @cached_property
    def support(self) -> np.ndarray:
        """Indices where ``|V|`` is not negligible."""
        a = np.abs(self.values)
        top = a.max(initial=0.0)
        if top == 0:
            return np.zeros(0, dtype=int)
        return np.flatnonzero(a > 1e-18 * top)

    @property
    def is_zero(self) -> bool:
        return self.support.size == 0

    @property
    def support_radius(self) -> float:
        s = self.support
        return float(self.grid.edges[s[-1] + 1]) if s.size else 0.0

    def describe(self) -> dict:
        return {"name": self.name, **self.params}

    def label(self) -> str:
        if not self.params:
            return self.name
        inner = ",".join(f"{k}={v:g}" if isinstance(v, float) else f"{k}={v}" for k, v in self.params.items())
        return f"{self.name}:{inner}"

    def on(self, grid: RadialGrid) -> "Potential":
        """Same family rebuilt on another grid (file potentials are re-interpolated)."""
        if self.name == "file":
            return load_potential_csv(self.params["path"], grid)
        if self.name.endswith("*"):
            params = dict(self.params)
            factor = params.pop("factor")
            return Potential(self.grid, self.values / factor, self.name[:-1], params).on(grid).scaled(factor)
        if self.name == "custom":
            vals = np.interp(grid.nodes, self.grid.nodes, self.values, right=0.0)
            return Potential(grid, vals, "custom")
        return potential_from_spec(self.label(), grid)

    def scaled(self, factor: float) -> "Potential":
        return Potential(self.grid, factor * self.values, self.name + "*", dict(self.params, factor=factor))


def kato_norm(V: Potential) -> float:
    """Global Kato norm ``sup_x int |V(y)|/|x-y| dy``, attained at ``x = 0``."""
    return V.kato_norm


def weak32_norm(V: Potential) -> float:
    """``||V||_{L^{3/2, inf}}`` on the discrete measure."""
    return V.weak32_norm


@dataclass(frozen=True, eq=False)
class KatoSplit:
    """``V = V1 + V2`` with ``V1`` bounded and compactly supported."""

    V1: Potential
    V2: Potential
    epsilon: float
    radius: float
    height: float


def _default_r_ladder(grid: RadialGrid, r_cap: float) -> np.ndarray:
    ladder = r_cap * 2.0 ** -np.arange(16, -1, -1.0)
    return np.r_[0.0, ladder]


def kato_split(
    V: Potential,
    epsilon: float,
    r_cap: float | None = None,
    r_ladder=None,
    m_ladder=None,
) -> KatoSplit:
    """Split ``V`` into a truncated part and a small-Kato remainder.

    ``V1 = V 1_{r <= R} 1_{|V| <= M}`` for the first ``(R, M)`` on the
    ladders, ordered by ``R`` then ``M``, with ``||V - V1||_K <= epsilon``.
    Potentials supported inside ``r_cap`` are returned whole as ``V1``.

    Parameters
    ----------
    V : Potential
    epsilon : float
        Target bound for the Kato norm of the remainder.
    r_cap : float, optional
        Largest admissible truncation radius, the grid radius by default.
        :func:`is_k0` uses ``r_max / 2``: a remainder that cannot be made
        small inside half the grid means the sampled potential does not
        behave like a member of the closure of bounded compactly supported
        functions.

    Raises
    ------
    ClassMembershipError
        When no ladder element reaches ``epsilon``.
    """
    if not (epsilon > 0):
        raise ParameterError("epsilon must be positive")
    grid = V.grid
    r_cap = grid.r_max if r_cap is None else float(r_cap)
    absV = np.abs(V.values)
    zero = np.zeros_like(V.values)
    if V.support_radius <= r_cap:
        height = float(absV.max(initial=0.0))
        return KatoSplit(V, Potential(grid, zero, "remainder"), epsilon, V.support_radius, height)
    r = grid.nodes
    w_over_r = grid.weights / r
    top = float(absV.max())
    R_ladder = _default_r_ladder(grid, r_cap) if r_ladder is None else np.sort(np.asarray(r_ladder, float))
    M_ladder = top * 2.0 ** -np.arange(20, -1, -1.0) if m_ladder is None else np.sort(np.asarray(m_ladder, float))
    for R in R_ladder:
        if R > r_cap * (1 + 1e-12):
            break
        inside = r <= R
        for M in M_ladder:
            keep = inside & (absV <= M)
            rest = float(np.sum(w_over_r[~keep] * absV[~keep]))
            if rest <= epsilon:
                v1 = np.where(keep, V.values, 0.0)
                return KatoSplit(
                    Potential(grid, v1, "truncated"),
                    Potential(grid, V.values - v1, "remainder"),
                    epsilon,
                    float(R),
                    float(M),
                )
    raise ClassMembershipError(
        f"no truncation with radius <= {r_cap:g} leaves a Kato remainder below {epsilon:g}"
    )


def is_k0(V: Potential, r_cap: float | None = None) -> bool:
    """Numerical membership test: splits exist for epsilon in {1, 0.1, 0.01} times ``||V||_K``.

    Truncation radii are limited to ``r_cap``, ``r_max / 2`` by default.
    """
    if V.is_zero:
        return True
    r_cap = 0.5 * V.grid.r_max if r_cap is None else r_cap
    try:
        for frac in (1.0, 0.1, 0.01):
            kato_split(V, frac * V.kato_norm, r_cap=r_cap)
    except ClassMembershipError:
        return False
    return True


# -- families ---------------------------------------------------------------


def zero_potential(grid: RadialGrid) -> Potential:
    return Potential(grid, np.zeros(grid.n), "zero")


def well_potential(grid: RadialGrid, depth: float, radius: float = 1.0) -> Potential:
    """``-depth`` on ``r <= radius``."""
    vals = np.where(grid.nodes <= radius, -float(depth), 0.0)
    return Potential(grid, vals, "well", {"depth": float(depth), "radius": float(radius)})


def gaussian_potential(grid: RadialGrid, depth: float, width: float = 1.0) -> Potential:
    """``-depth * exp(-r^2 / (2 width^2))``."""
    vals = -float(depth) * np.exp(-0.5 * (grid.nodes / width) ** 2)
    return Potential(grid, vals, "gaussian", {"depth": float(depth), "width": float(width)})


def exp_potential(grid: RadialGrid, depth: float, rate: float = 1.0) -> Potential:
    """``-depth * exp(-rate * r)``."""
    vals = -float(depth) * np.exp(-float(rate) * grid.nodes)
    return Potential(grid, vals, "exp", {"depth": float(depth), "rate": float(rate)})


_FAMILIES = {
    "well": (well_potential, {"depth": 3.0, "radius": 1.0}),
    "gaussian": (gaussian_potential, {"depth": 3.0, "width": 1.0}),
    "exp": (exp_potential, {"depth": 1.0, "rate": 1.0}),
}


def parse_family(text: str) -> tuple[str, dict]:
    """Parse ``name:key=value,key=value`` into a name and a dict of strings."""
    name, _, rest = text.strip().partition(":")
    opts = {}
    if rest:
        for item in rest.split(","):
            if not item.strip():
                continue
            key, sep, val = item.partition("=")
            if not sep:
                raise ParameterError(f"malformed option {item!r} in {text!r}")
            opts[key.strip()] = val.strip()
    return name.strip(), opts


def potential_from_spec(text: str, grid: RadialGrid) -> Potential:
    """Build a potential from a family string.

    Examples: ``zero``, ``well:depth=3,radius=1``, ``gaussian:depth=3,width=1``,
    ``exp:depth=1,rate=1``, ``file:path=pot.csv`` (or ``file:pot.csv``).
    """
    if text.strip().startswith("file:"):
        rest = text.strip()[5:]
        return load_potential_csv(rest[5:] if rest.startswith("path=") else rest, grid)
    name, opts = parse_family(text)
    if name == "zero":
        return zero_potential(grid)
    if name not in _FAMILIES:
        raise ParameterError(f"unknown potential family {name!r}")
    builder, defaults = _FAMILIES[name]
    kwargs = dict(defaults)
    for key, val in opts.items():
        if key not in defaults:
            raise ParameterError(f"unknown option {key!r} for potential {name!r}")
        kwargs[key] = float(val)
    return builder(grid, **kwargs)


def load_potential_csv(path, grid: RadialGrid) -> Potential:
    """Read a two-column ``r, V`` CSV and interpolate it onto ``grid``.

    Interpolation is piecewise linear; below the first sample the first
    value is held and beyond the last sample the potential is zero.  A
    header line is skipped if present.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"potential file not found: {path}")
    rs, vs = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                r, v = float(row[0]), float(row[1])
            except (ValueError, IndexError):
                if rs:
                    raise ParameterError(f"bad row {row!r} in {path}")
                continue
            rs.append(r)
            vs.append(v)
    if len(rs) < 2:
        raise ParameterError(f"{path} needs at least two samples")
    rs, vs = np.asarray(rs), np.asarray(vs)
    order = np.argsort(rs)
    vals = np.interp(grid.nodes, rs[order], vs[order], left=vs[order][0], right=0.0)
    return Potential(grid, vals, "file", {"path": str(path)})
