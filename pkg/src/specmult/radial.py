"""Radial grids, sampled fields and the norm machinery built on them.

Every field is a radial function on R^3 sampled at the nodes of a
:class:`RadialGrid`.  The grid weights carry the volume element
``4 pi r^2 dr``, so sums against them approximate integrals over R^3 and
all norms, rearrangements and operator norms share one discrete measure.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ParameterError

__all__ = [
    "RadialGrid",
    "RadialField",
    "LorentzParams",
    "build_grid",
    "lp_norm",
    "lorentz_norm",
    "holder_lorentz",
    "fractional_integral",
    "fractional_kernel",
    "radial_derivative",
    "radial_gradient_norm",
]


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Midpoint nodes and volume weights on the ball of radius ``r_max``.

    Attributes
    ----------
    nodes : ndarray
        Cell midpoints, strictly increasing and positive.
    weights : ndarray
        ``4 pi r_j^2 dr_j`` for each cell.
    r_max : float
        Outer radius.
    edges : ndarray
        Cell boundaries, ``edges[0] == 0`` and ``edges[-1] == r_max``.
    scheme : str
        ``"uniform"`` or ``"graded"``.
    """

    nodes: np.ndarray
    weights: np.ndarray
    r_max: float
    edges: np.ndarray
    scheme: str = "uniform"

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def h_max(self) -> float:
        """Largest cell width; sets the resolvable wavenumber."""
        return float(self.widths.max())

    @property
    def k_nyquist(self) -> float:
        return float(np.pi / self.h_max)

    def describe(self) -> dict:
        return {"n": self.n, "r_max": self.r_max, "scheme": self.scheme}

    def extended(self, factor: int) -> "RadialGrid":
        """Uniform grid with the same spacing on ``factor * r_max``."""
        if self.scheme != "uniform":
            raise ParameterError("only uniform grids can be extended")
        return build_grid(self.r_max * factor, self.n * factor, "uniform")

    def __eq__(self, other):
        if not isinstance(other, RadialGrid):
            return NotImplemented
        return (
            self.scheme == other.scheme
            and self.n == other.n
            and self.r_max == other.r_max
            and np.array_equal(self.nodes, other.nodes)
        )

    __hash__ = object.__hash__


def build_grid(r_max: float, n: int, scheme: str = "uniform", gamma: float = 2.0) -> RadialGrid:
    """Build a radial grid.

    Parameters
    ----------
    r_max : float
        Truncation radius, positive.
    n : int
        Number of cells, at least 16.
    scheme : {"uniform", "graded"}
        ``graded`` places the cell edges at ``r_max (j/n)**gamma`` so that
        cells shrink towards the origin.
    gamma : float
        Grading exponent for the graded scheme.

    Returns
    -------
    RadialGrid
    """
    if not np.isfinite(r_max) or r_max <= 0:
        raise ParameterError(f"r_max must be positive, got {r_max}")
    if int(n) != n or n < 16:
        raise ParameterError(f"n must be an integer >= 16, got {n}")
    n = int(n)
    s = np.arange(n + 1) / n
    if scheme == "uniform":
        edges = r_max * s
    elif scheme == "graded":
        if gamma < 1:
            raise ParameterError("gamma must be >= 1")
        edges = r_max * s**gamma
    else:
        raise ParameterError(f"unknown grid scheme {scheme!r}")
    nodes = 0.5 * (edges[1:] + edges[:-1])
    weights = 4.0 * np.pi * nodes**2 * np.diff(edges)
    return RadialGrid(nodes, weights, float(r_max), edges, scheme)


@dataclass(frozen=True, eq=False)
class RadialField:
    """Complex samples of a radial function on a grid."""

    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.shape != (self.grid.n,):
            raise ParameterError(
                f"field has {vals.shape} samples, grid has {self.grid.n} nodes"
            )
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, grid: RadialGrid, func: Callable[[np.ndarray], np.ndarray]):
        return cls(grid, np.asarray(func(grid.nodes), dtype=complex))

    def with_values(self, values) -> "RadialField":
        return RadialField(self.grid, np.asarray(values))

    def __add__(self, other):
        return self.with_values(self.values + _vals(other))

    def __sub__(self, other):
        return self.with_values(self.values - _vals(other))

    def __mul__(self, other):
        return self.with_values(self.values * _vals(other))

    __rmul__ = __mul__

    def conj(self) -> "RadialField":
        return self.with_values(np.conj(self.values))

    def to_csv(self, path) -> None:
        """Write columns ``r, re, im``."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            out = csv.writer(fh)
            out.writerow(["r", "re", "im"])
            for r, v in zip(self.grid.nodes, np.asarray(self.values, dtype=complex)):
                out.writerow([f"{r:.17g}", f"{v.real:.17g}", f"{v.imag:.17g}"])


def _vals(x):
    return x.values if isinstance(x, RadialField) else x


def _split(f, weights=None):
    if isinstance(f, RadialField):
        return np.asarray(f.values), f.grid.weights
    if weights is None:
        raise ParameterError("raw arrays need explicit weights")
    return np.asarray(f), np.asarray(weights)


@dataclass(frozen=True)
class LorentzParams:
    """Exponents of a Lorentz space ``L^{p,q}``."""

    p: float
    q: float

    def __post_init__(self):
        for name, v in (("p", self.p), ("q", self.q)):
            if not (v >= 1):
                raise ParameterError(f"Lorentz exponent {name}={v} must lie in [1, inf]")
        if np.isinf(self.p) and not np.isinf(self.q):
            raise ParameterError("L^{inf,q} is trivial for q < inf")


def lp_norm(f, p: float, weights=None) -> float:
    """``(sum |f_j|^p w_j)^(1/p)``, or ``max |f_j|`` for ``p = inf``."""
    if not (p >= 1):
        raise ParameterError(f"p={p} must be >= 1")
    vals, w = _split(f, weights)
    a = np.abs(vals)
    if np.isinf(p):
        return float(a.max(initial=0.0))
    top = a.max(initial=0.0)
    if top == 0:
        return 0.0
    # scale to avoid overflow for large p
    return float(top * np.sum(w * (a / top) ** p) ** (1.0 / p))


def _rearrangement(vals, w):
    """Distinct levels of ``|f|`` in decreasing order and their cumulative measure."""
    a = np.abs(vals)
    order = np.argsort(-a, kind="stable")
    a = a[order]
    cum = np.cumsum(w[order])
    keep = a > 0
    a, cum = a[keep], cum[keep]
    if a.size == 0:
        return a, cum
    # merge ties so that each level carries the full measure of {|f| >= level}
    last = np.r_[a[1:] != a[:-1], True]
    return a[last], cum[last]


def lorentz_norm(f, params: LorentzParams | tuple, weights=None) -> float:
    """Lorentz quasi-norm evaluated exactly on the discrete measure.

    With ``a_1 > a_2 > ...`` the distinct values of ``|f|`` and ``S_k`` the
    measure of ``{|f| >= a_k}``, the distribution function is a step
    function and

    ``||f||_{p,q}^q = p * sum_k S_k^{q/p} (a_k^q - a_{k+1}^q) / q``

    with ``a_{K+1} = 0``.  For ``q = inf`` the value is
    ``max_k a_k S_k^{1/p}``.
    """
    if not isinstance(params, LorentzParams):
        params = LorentzParams(*params)
    p, q = float(params.p), float(params.q)
    vals, w = _split(f, weights)
    a, S = _rearrangement(vals, w)
    if a.size == 0:
        return 0.0
    if np.isinf(p):
        return float(a[0])
    if np.isinf(q):
        return float(np.max(a * S ** (1.0 / p)))
    top = a[0]
    b = a / top
    nxt = np.r_[b[1:], 0.0]
    total = np.sum(S ** (q / p) * (b**q - nxt**q)) / q
    return float(top * (p * total) ** (1.0 / q))


def _inv(x):
    return 0.0 if np.isinf(x) else 1.0 / x


def holder_lorentz(f, g, split, weights=None) -> float:
    """Ratio ``||fg||_{p,q} / (||f||_{p1,q1} ||g||_{p2,q2})``.

    ``split`` is ``(p1, q1, p2, q2)``; the target exponents follow from
    ``1/p = 1/p1 + 1/p2`` and ``1/q = 1/q1 + 1/q2``.  Returns 0 when the
    product vanishes.
    """
    p1, q1, p2, q2 = split
    ip, iq = _inv(p1) + _inv(p2), _inv(q1) + _inv(q2)
    if ip > 1 + 1e-12 or iq > 1 + 1e-12:
        raise ParameterError(f"exponents {split} give a target space below L^1")
    p = np.inf if ip == 0 else 1.0 / ip
    q = np.inf if iq == 0 else 1.0 / iq
    fv, w = _split(f, weights)
    gv, _ = _split(g, w)
    num = lorentz_norm(fv * gv, (max(p, 1.0), max(q, 1.0)), w)
    if num == 0:
        return 0.0
    den = lorentz_norm(fv, (p1, q1), w) * lorentz_norm(gv, (p2, q2), w)
    return float(num / den)


def fractional_kernel(grid: RadialGrid, s: float) -> np.ndarray:
    """Angular average of ``|x - y|^{-(3-s)}`` over spheres, as a kernel matrix.

    Averaging over the sphere ``|y| = r'`` in the cosine variable has the
    closed form ``((r+r')^{s-1} - |r-r'|^{s-1}) / (2 r r' (s-1))`` (a log
    for ``s = 1``).  The diagonal, where the kernel is singular for
    ``s <= 1``, is replaced by its average over the cell.
    """
    if not (0 < s < 3):
        raise ParameterError(f"order s={s} must lie in (0, 3)")
    r = grid.nodes
    R, Rp = r[:, None], r[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        if abs(s - 1) < 1e-12:
            K = (np.log(R + Rp) - np.log(np.abs(R - Rp))) / (2 * R * Rp)
        else:
            K = ((R + Rp) ** (s - 1) - np.abs(R - Rp) ** (s - 1)) / (2 * R * Rp * (s - 1))
    half = 0.5 * grid.widths
    if abs(s - 1) < 1e-12:
        diag = (np.log(2 * r) - (np.log(half) - 1.0)) / (2 * r**2)
    else:
        diag = ((2 * r) ** (s - 1) - half ** (s - 1) / s) / (2 * r**2 * (s - 1))
    K[np.diag_indices_from(K)] = diag
    return K


def fractional_integral(f: RadialField, s: float) -> RadialField:
    """``x -> int f(y) |x-y|^{-(3-s)} dy`` for radial ``f``."""
    K = fractional_kernel(f.grid, s)
    return f.with_values(K @ (f.values * f.grid.weights))


def radial_derivative(values: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """Second-order finite-difference ``d/dr`` on the grid nodes."""
    if grid.n < 3:
        raise ParameterError("need at least three nodes")
    return np.gradient(values, grid.nodes, edge_order=2, axis=-1)


def radial_gradient_norm(f: RadialField, p: float) -> float:
    """``L^p`` norm of ``|grad f| = |df/dr|`` for a radial field."""
    return lp_norm(f.with_values(radial_derivative(f.values, f.grid)), p)
