"""Spectral multipliers ``m(H) P_c`` and their dyadic perturbation pieces.

The continuous part of the spectral measure of ``H`` is carried by the
outgoing scattering states.  For radial functions and ``k = sqrt(lambda)``

``Im R_V^+(lambda)(r, r') = (k / 4 pi) psi_k(r) conj(psi_k(r'))``

where ``psi_k = j0(k r) - R_0^+ V psi_k`` solves the Lippmann-Schwinger
equation and ``j0(x) = sin(x)/x``.  Integrating ``m(lambda) dE(lambda)``
in ``k`` gives ``m(H) P_c = sum_q c_q m(k_q^2) psi_q psi_q^*`` with
quadrature weights ``c_q = W_q k_q^2 / (2 pi^2)``.

The perturbation ``m(H) P_c - m(-Delta)`` is split into dyadic pieces
``Pb_N`` whose resolvent factor is expanded by a Born series (high
energies), around zero energy (low energies) or around a ladder of anchors
glued by a smooth partition of unity (intermediate energies).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    ParameterError,
    RegimeError,
    SymbolError,
    ThresholdError,
)
from .kato import Potential
from .radial import RadialGrid
from .resolvent import (
    KernelOperator,
    SupportBlock,
    resolvent_matrix,
)

__all__ = [
    "smooth_step",
    "chi",
    "window",
    "SymbolSpec",
    "constant_symbol",
    "imaginary_power",
    "dyadic_bump",
    "heat",
    "riesz",
    "symbol_from_spec",
    "h_norm",
    "StoneQuadrature",
    "stone_quadrature",
    "default_k_cut",
    "ScatteringStates",
    "scattering_states",
    "stone_multiplier",
    "stone_apply",
    "fourier_multiplier",
    "littlewood_paley",
    "DyadicPiece",
    "RegimePlan",
    "regime_plan",
    "pb_assemble",
    "oscillatory_integral",
    "DyadicSumResult",
    "dyadic_sum_check",
    "dyadic_sum_envelope",
    "BornTermReport",
    "born_term_kernel",
]


# -- the fixed bump -------------------------------------------------------------


def smooth_step(t):
    """``C^inf`` step rising from 0 at ``t <= 0`` to 1 at ``t >= 1``."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def chi(x):
    """Dyadic bump supported in ``[1/2, 2]`` with ``sum_j chi(x / 2^j) = 1`` for ``x > 0``.

    In the variable ``u = log2 x`` it rises as ``s(u + 1)`` on ``[-1, 0]``
    and falls as ``1 - s(u)`` on ``[0, 1]``, ``s`` being :func:`smooth_step`.
    """
    x = np.asarray(x, dtype=float)
    pos = x > 0
    u = np.log2(np.where(pos, x, 1.0))
    val = np.where(u <= 0, smooth_step(u + 1.0), 1.0 - smooth_step(u))
    return np.where(pos & (u >= -1) & (u <= 1), val, 0.0)


def window(x):
    """``1 - s(|x|)``: supported in ``|x| < 1`` and its integer shifts sum to one."""
    return 1.0 - smooth_step(np.abs(np.asarray(x, dtype=float)))


# -- symbols ------------------------------------------------------------------


@dataclass(eq=False)
class SymbolSpec:
    """A bounded function of the energy.

    Parameters
    ----------
    func : callable
        Vectorized ``m(lambda)`` for ``lambda >= 0``.
    name, params : str, dict
        Identification for reports.
    order : float
        Default regularity order ``s`` of the Hormander norm.
    point_func : callable, optional
        Values at negative eigenvalues.  ``func`` is used if omitted.
    """

    func: Callable[[np.ndarray], np.ndarray]
    name: str = "custom"
    params: dict = field(default_factory=dict)
    order: float = 6.0
    point_func: Callable[[np.ndarray], np.ndarray] | None = None
    _norms: dict = field(default_factory=dict, repr=False)

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        vals = np.asarray(self.func(lam), dtype=complex) * np.ones(lam.shape)
        return vals

    def at_point(self, lam):
        lam = np.asarray(lam, dtype=float)
        f = self.point_func or self.func
        with np.errstate(all="ignore"):
            vals = np.asarray(f(lam), dtype=complex) * np.ones(lam.shape)
        if not np.all(np.isfinite(vals)):
            raise SymbolError(f"{self.label()} is undefined at a negative eigenvalue")
        return vals

    def h_norm(self, s: float | None = None) -> float:
        s = self.order if s is None else float(s)
        if s not in self._norms:
            self._norms[s] = h_norm(self, s)
        return self._norms[s]

    def label(self) -> str:
        if not self.params:
            return self.name
        return self.name + ":" + ",".join(f"{k}={v:g}" for k, v in self.params.items())

    def times(self, other: Callable, name: str | None = None) -> "SymbolSpec":
        """Pointwise product with another function of the energy."""
        return SymbolSpec(
            lambda lam: self(lam) * np.asarray(other(lam)),
            name or f"{self.name}*",
            dict(self.params),
            self.order,
        )


def constant_symbol(value: float = 1.0) -> SymbolSpec:
    c = complex(value)
    return SymbolSpec(lambda lam: c * np.ones_like(lam), "constant", {"value": float(value)} if value != 1 else {})


def imaginary_power(alpha: float) -> SymbolSpec:
    """``lambda^{i alpha}``; zero at ``lambda = 0``, principal branch below zero."""
    a = float(alpha)

    def f(lam):
        lam = np.asarray(lam, dtype=float)
        mag = np.abs(lam)
        with np.errstate(divide="ignore"):
            out = np.exp(1j * a * np.log(np.where(mag > 0, mag, 1.0)))
        return np.where(mag > 0, out, 0.0)

    def point(lam):
        return f(lam) * np.where(np.asarray(lam) < 0, np.exp(-np.pi * a), 1.0)

    return SymbolSpec(f, "imaginary_power", {"alpha": a}, point_func=point)


def dyadic_bump(N: float) -> SymbolSpec:
    """``chi(sqrt(lambda) / N)``; zero on negative energies."""
    N = float(N)
    if not N > 0:
        raise ParameterError("N must be positive")
    return SymbolSpec(
        lambda lam: chi(np.sqrt(np.maximum(lam, 0.0)) / N),
        "dyadic_bump",
        {"N": N},
        point_func=lambda lam: np.zeros_like(lam),
    )


def heat(t: float) -> SymbolSpec:
    t = float(t)
    if not t >= 0:
        raise ParameterError("heat time must be >= 0")
    return SymbolSpec(lambda lam: np.exp(-t * lam), "heat", {"t": t})


def riesz(s: float, a: float = 1.0) -> SymbolSpec:
    """``(a + lambda)^{-s/2}``."""
    s, a = float(s), float(a)
    if not a > 0:
        raise ParameterError("riesz shift a must be positive")

    def f(lam):
        base = a + np.asarray(lam, dtype=float)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(base > 0, np.abs(base) ** (-s / 2), np.nan)

    return SymbolSpec(f, "riesz", {"s": s, "a": a})


_SYMBOLS = {
    "constant": (constant_symbol, {"value": 1.0}),
    "imaginary_power": (imaginary_power, {"alpha": 1.0}),
    "dyadic_bump": (dyadic_bump, {"N": 1.0}),
    "heat": (heat, {"t": 0.5}),
    "riesz": (riesz, {"s": 1.0, "a": 1.0}),
}


def symbol_from_spec(text: str) -> SymbolSpec:
    """Parse ``name:key=value,...``, e.g. ``imaginary_power:alpha=2`` or ``heat:t=0.5``."""
    from .kato import parse_family

    name, opts = parse_family(text)
    if name not in _SYMBOLS:
        raise ParameterError(f"unknown symbol {name!r}; choose from {sorted(_SYMBOLS)}")
    builder, defaults = _SYMBOLS[name]
    kwargs = dict(defaults)
    for key, val in opts.items():
        if key not in defaults:
            raise ParameterError(f"unknown option {key!r} for symbol {name!r}")
        kwargs[key] = float(val)
    return builder(**kwargs)


# -- Hormander norm -----------------------------------------------------------


def _dilation_grid(lam_min: float, lam_max: float, per_decade: int) -> np.ndarray:
    t_lo, t_hi = lam_max**-0.5, lam_min**-0.5
    decades = math.log10(t_hi / t_lo)
    return np.geomspace(t_lo, t_hi, int(math.ceil(per_decade * decades)) + 1)


def h_norm(
    m: Callable,
    s: float,
    lam_min: float = 2.0**-16,
    lam_max: float = 2.0**16,
    per_decade: int = 33,
    length: float = 8.0,
    size: int = 2**14,
    floor: float = 1e-14,
) -> float:
    """``sup_t ||chi(x) m((t x)^2)||_{W^{s,2}}`` over a logarithmic grid of dilations.

    The Sobolev norm is evaluated from the discrete Fourier transform of the
    bump on ``[0, length)`` with ``size`` samples, weighting ``|g^(xi)|^2`` by
    ``(1 + xi^2)^s``.  Frequencies beyond the last coefficient above
    ``floor`` times the peak are rounding noise and are dropped: amplified by
    ``xi^{2s}`` they would otherwise dominate for large ``s``.

    Raises
    ------
    SymbolError
        If the symbol is not finite on the support of the bump.
    """
    if not s >= 0:
        raise ParameterError("order s must be >= 0")
    x = np.arange(size) * (length / size)
    bump = chi(x)
    xi = 2 * np.pi * np.fft.fftfreq(size, length / size)
    weight = (1.0 + xi**2) ** s
    order = np.argsort(np.abs(xi), kind="stable")
    best = 0.0
    for t in _dilation_grid(lam_min, lam_max, per_decade):
        vals = np.asarray(m((t * x) ** 2), dtype=complex) * np.ones(size)
        g = bump * np.where(bump > 0, vals, 0.0)
        if not np.all(np.isfinite(g)):
            raise SymbolError("symbol is unbounded on the sampled range")
        G = np.abs(np.fft.fft(g)) * (length / size)
        top = G.max()
        if top == 0:
            continue
        above = np.flatnonzero(G[order] > floor * top)
        keep = order[: above[-1] + 1]
        val = math.sqrt(float(np.sum(weight[keep] * G[keep] ** 2)) / length)
        best = max(best, val)
    return best


# -- Stone quadrature and scattering states -----------------------------------


def _gl_panels(edges: np.ndarray, order: int):
    x, wt = np.polynomial.legendre.leggauss(order)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (a + b) + 0.5 * (b - a) * x[None, :]
    weights = 0.5 * (b - a) * wt[None, :]
    return nodes.ravel(), weights.ravel()


@dataclass(frozen=True, eq=False)
class StoneQuadrature:
    """Gauss-Legendre nodes in ``k = sqrt(lambda)`` up to the cut ``k_cut``."""

    k: np.ndarray
    weights: np.ndarray
    k_cut: float

    @property
    def spectral_weights(self) -> np.ndarray:
        """``c_q = W_q k_q^2 / (2 pi^2)``, the density of ``dE`` against ``psi psi^*``."""
        return self.weights * self.k**2 / (2 * np.pi**2)

    @property
    def size(self) -> int:
        return self.k.size


def default_k_cut(grid: RadialGrid, lam_max: float = 2.0**16) -> float:
    """``min(sqrt(lam_max), 0.95 pi / h)``: beyond that the grid cannot resolve ``j0(kr)``."""
    return float(min(math.sqrt(lam_max), 0.95 * grid.k_nyquist))


def stone_quadrature(
    grid: RadialGrid,
    k_cut: float | None = None,
    order: int = 24,
    k_min: float = 2.0**-8,
    panel: float | None = None,
) -> StoneQuadrature:
    """Quadrature for the energy integral.

    Dyadic panels ``[2^-8, 2^-7], ..., [1/4, 1/2]`` resolve the ``k^2``
    vanishing at the threshold; beyond ``1/2`` the panels are uniform with
    width at most ``min(1/2, 10/r_max)`` so that the oscillation
    ``e^{ik(r + r')}`` is resolved across the grid.
    """
    k_cut = default_k_cut(grid) if k_cut is None else float(k_cut)
    if not k_cut > k_min:
        raise ParameterError("k_cut must exceed k_min")
    panel = min(0.5, 10.0 / grid.r_max) if panel is None else float(panel)
    dyadic = 2.0 ** np.arange(math.log2(k_min), -1.0 + 1e-9)
    dyadic = dyadic[dyadic < k_cut]
    start = 0.5 if k_cut > 0.5 else dyadic[-1]
    count = max(1, int(math.ceil((k_cut - start) / panel)))
    uniform = np.linspace(start, k_cut, count + 1) if k_cut > start else np.array([start])
    edges = np.unique(np.r_[dyadic, uniform])
    k, w = _gl_panels(edges, order)
    return StoneQuadrature(k, w, k_cut)


@dataclass(frozen=True, eq=False)
class ScatteringStates:
    """Outgoing scattering states ``psi_q`` at the quadrature nodes, one per column."""

    grid: RadialGrid
    quad: StoneQuadrature
    psi: np.ndarray
    potential: Potential | None
    stats: dict = field(default_factory=dict)

    def coefficients(self, F) -> np.ndarray:
        """``<psi_q, f>`` for fields stacked by row; returns ``(Q, F)``."""
        F = np.atleast_2d(np.asarray(getattr(F, "values", F)))
        return self.psi.conj().T @ (F * self.grid.weights).T


def _neumann_vector(S0, B, rhs, tol=1e-14, max_terms=200):
    """``S0 sum_m (-B S0)^m rhs`` summed until the terms are negligible."""
    term = S0 @ rhs
    acc = term.copy()
    scale = np.abs(acc).sum()
    for n in range(1, max_terms + 1):
        term = -(S0 @ (B @ term))
        acc += term
        if np.abs(term).sum() <= tol * max(scale, 1e-300):
            return acc, n
    return acc, max_terms


def scattering_states(
    V: Potential,
    quad: StoneQuadrature | None = None,
    anchor_spacing: float = 0.125,
    guard: float = 0.5,
) -> ScatteringStates:
    """Solve ``(I + V R_0^+) (V j0) = ...`` for every quadrature node.

    The Lippmann-Schwinger unknown is ``s = V psi`` on the support of ``V``:
    ``(I + V R_0^+(k)) s = V j0``.  The inverse is expanded around anchors
    ``k_a`` spaced by ``anchor_spacing``; where the guard
    ``||S_{k_a}|| ||V (R_0^+(k) - R_0^+(k_a))|| <= guard`` fails the node is
    solved directly.

    Raises
    ------
    SpectralAssumptionError
        If ``I + V R_0^+`` is singular at an anchor (zero-energy resonance or
        embedded eigenvalue within grid resolution).
    """
    grid = V.grid
    quad = stone_quadrature(grid) if quad is None else quad
    r = grid.nodes
    J = np.sinc(np.outer(r, quad.k) / np.pi).astype(complex)
    if V.is_zero:
        return ScatteringStates(grid, quad, J, V, {"anchors": 0, "direct": 0})
    sb = SupportBlock(V)
    psi = J.copy()
    anchor_of = np.round(quad.k / anchor_spacing).astype(int)
    n_direct = 0
    n_terms = 0
    for a in np.unique(anchor_of):
        k0 = a * anchor_spacing
        S0 = sb.dense_solve_matrix(k0)
        nS0 = sb.l1_block(S0)
        A0 = sb.block(k0)
        for q in np.flatnonzero(anchor_of == a):
            k = quad.k[q]
            A = sb.block(k)
            rhs = sb.v * J[sb.idx, q]
            B = A - A0
            if nS0 * sb.l1_block(B) <= guard:
                s, used = _neumann_vector(S0, B, rhs)
                n_terms = max(n_terms, used)
            else:
                s = np.linalg.solve(np.eye(sb.m) + A, rhs)
                n_direct += 1
            psi[:, q] -= resolvent_matrix(r, sb.r, k) @ (sb.w * s)
    stats = {"anchors": int(np.unique(anchor_of).size), "direct": n_direct, "max_terms": n_terms}
    return ScatteringStates(grid, quad, psi, V, stats)


def _symbol_on(m: Callable, k: np.ndarray) -> np.ndarray:
    vals = np.asarray(m(k**2), dtype=complex) * np.ones(k.shape)
    if not np.all(np.isfinite(vals)):
        raise SymbolError("symbol is not finite on the quadrature nodes")
    return vals


def stone_multiplier(
    m: Callable,
    V: Potential,
    quad: StoneQuadrature | None = None,
    states: ScatteringStates | None = None,
) -> KernelOperator:
    """Kernel of ``m(H) P_c`` assembled from the scattering states.

    ``meta`` records the energy cut and ``|m|`` there, which measures the
    truncation of the energy integral.
    """
    if states is None:
        states = scattering_states(V, quad)
    quad = states.quad
    coef = quad.spectral_weights * _symbol_on(m, quad.k)
    K = (states.psi * coef) @ states.psi.conj().T
    tail = float(np.abs(_symbol_on(m, np.array([quad.k_cut])))[0])
    return KernelOperator(states.grid, K, {"k_cut": quad.k_cut, "symbol_at_cut": tail, **states.stats})


def stone_apply(m: Callable, states: ScatteringStates, F) -> np.ndarray:
    """``m(H) P_c f`` for fields stacked by row without forming the kernel."""
    coef = states.quad.spectral_weights * _symbol_on(m, states.quad.k)
    c = states.coefficients(F)
    return (states.psi @ (coef[:, None] * c)).T


def fourier_multiplier(m: Callable, grid: RadialGrid, quad: StoneQuadrature | None = None) -> KernelOperator:
    """Kernel of ``m(-Delta)`` on radial functions by the same energy quadrature."""
    zero = Potential(grid, np.zeros(grid.n), "zero")
    return stone_multiplier(m, zero, quad)


def littlewood_paley(
    N: float,
    V: Potential,
    quad: StoneQuadrature | None = None,
    states: ScatteringStates | None = None,
) -> KernelOperator:
    """``P_N = chi(sqrt(H) / N) P_c``."""
    return stone_multiplier(dyadic_bump(N), V, quad, states)


# -- dyadic pieces -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DyadicPiece:
    """One dyadic perturbation piece ``Pb_N``."""

    N: float
    kernel: KernelOperator
    regime: str
    series_terms: int
    residual: float
    info: dict = field(default_factory=dict)


@dataclass(frozen=True)
class RegimePlan:
    """Which expansion is used for each dyadic frequency.

    ``high`` needs the whole band ``[N/2, 2N]`` above ``N1``, i.e. ``N >= 2 N1``.
    """

    N1: float
    N0: float

    def regime(self, N: float) -> str:
        if N >= 2 * self.N1:
            return "high"
        if N <= self.N0:
            return "low"
        return "medium"


def regime_plan(V: Potential, N1: float | None = None, N0: float | None = None) -> RegimePlan:
    """Thresholds for the regimes: ``high`` from ``N >= 2 N1``, ``low`` up to ``N0``."""
    from .resolvent import find_N0, find_N1

    N1 = find_N1(V) if N1 is None else float(N1)
    if N0 is None:
        try:
            N0 = min(find_N0(V), N1)
        except ThresholdError:
            N0 = 0.0
    return RegimePlan(N1, float(N0))


def _band_quadrature(N: float, grid: RadialGrid, k_cut: float, order: int = 24):
    lo, hi = 0.5 * N, min(2.0 * N, k_cut)
    if hi <= lo:
        return np.zeros(0), np.zeros(0)
    panel = min(0.5, 10.0 / grid.r_max, 0.25 * N)
    count = max(4, int(math.ceil((hi - lo) / panel)))
    return _gl_panels(np.linspace(lo, hi, count + 1), order)


def _born_inverse(sb: SupportBlock, A: np.ndarray, tol: float, n_max: int):
    """``sum_j (-A)^j`` with a residual bound from the norm of ``A^4``."""
    eye = np.eye(sb.m, dtype=complex)
    powers = [eye]
    for _ in range(4):
        powers.append(powers[-1] @ A)
    q4 = sb.l1_block(powers[4])
    if q4 >= 1:
        raise RegimeError(f"Born series diverges: ||(V R_0)^4|| = {q4:.4g} >= 1")
    head = sum(sb.l1_block(P) for P in powers[:4])
    P = eye - powers[1] + powers[2] - powers[3]
    acc = P.copy()
    block = powers[4]
    groups = 1
    resid = head * q4 / (1 - q4)
    while resid > tol and groups < n_max:
        acc += block @ P
        block = block @ powers[4]
        groups += 1
        resid = head * q4**groups / (1 - q4)
    return acc, 4 * groups, resid, q4


def _anchored_inverse(S0: np.ndarray, nS0: float, B: np.ndarray, nB: float, tol: float, n_max: int):
    """``S0 sum_n (-B S0)^n`` truncated once ``||S0|| q^{n+1}/(1-q)`` reaches ``tol``."""
    q = nS0 * nB
    if q >= 1:
        raise RegimeError(f"anchored guard ||S0|| ||B|| = {q:.4g} >= 1")
    C = -B @ S0
    acc = np.eye(S0.shape[0], dtype=complex)
    term = acc.copy()
    n = 0
    resid = nS0 * q / (1 - q) if q > 0 else 0.0
    while resid > tol and n < n_max:
        term = term @ C
        acc += term
        n += 1
        resid = nS0 * q ** (n + 1) / (1 - q)
    return S0 @ acc, n, resid


def _medium_anchors(sb: SupportBlock, ks: np.ndarray, guard: float, delta0: float, min_delta: float):
    """Largest ``delta = delta0 / 2^j`` for which every node passes the guard at both anchors."""
    lam = ks**2
    delta = delta0
    while delta >= min_delta:
        cache = {}
        ok = True
        for lam_q, k in zip(lam, ks):
            j0 = int(math.floor(lam_q / delta))
            A = sb.block(k)
            for j in (j0, j0 + 1):
                if window(lam_q / delta - j) <= 0:
                    continue
                if j not in cache:
                    kj = math.sqrt(j * delta)
                    Sj = sb.dense_solve_matrix(kj)
                    cache[j] = (Sj, sb.l1_block(Sj), sb.block(kj))
                Sj, nSj, Aj = cache[j]
                if nSj * sb.l1_block(A - Aj) > guard:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            return delta, cache
        delta *= 0.5
    raise RegimeError(f"no anchor spacing >= {min_delta:g} satisfies the guard {guard}")


def pb_assemble(
    m: Callable,
    V: Potential,
    N: float,
    regime: str | None = None,
    plan: RegimePlan | None = None,
    k_cut: float | None = None,
    tol: float = 1e-10,
    n_max: int = 40,
    guard: float = 0.5,
    order: int = 24,
) -> DyadicPiece:
    """Assemble ``Pb_N = -(1/pi) int m chi_N(sqrt(lambda)) Im[R_0 S_lambda V R_0] dlambda``.

    ``S_lambda = (I + V R_0^+(lambda))^{-1}`` is expanded according to the
    regime: plain Born terms (``high``), around zero energy (``low``), or
    around anchors ``lambda_j = j delta`` combined with windows
    ``psi(lambda / delta - j)`` (``medium``).  The energy integral runs over
    the band ``sqrt(lambda) in [N/2, min(2N, k_cut)]``.

    Raises
    ------
    RegimeError
        If the regime's guard fails or a series does not converge.
    """
    grid = V.grid
    k_cut = default_k_cut(grid) if k_cut is None else float(k_cut)
    if regime is None:
        plan = regime_plan(V) if plan is None else plan
        regime = plan.regime(N)
    if regime not in ("low", "medium", "high"):
        raise ParameterError(f"unknown regime {regime!r}")
    n = grid.n
    if V.is_zero:
        return DyadicPiece(N, KernelOperator(grid, np.zeros((n, n))), regime, 0, 0.0)
    if plan is not None:
        if regime == "high" and N < 2 * plan.N1:
            raise RegimeError(f"high regime needs N >= 2 N1 = {2 * plan.N1:g}, got {N:g}")
        if regime == "low" and N > plan.N0:
            raise RegimeError(f"low regime needs N <= N0 = {plan.N0:g}, got {N:g}")
    ks, wk = _band_quadrature(N, grid, k_cut, order)
    sb = SupportBlock(V)
    r = grid.nodes
    total = np.zeros((n, n))
    terms, resid = 0, 0.0
    info: dict = {}
    if regime == "low":
        S0 = sb.dense_solve_matrix(0.0)
        nS0 = sb.l1_block(S0)
        A0 = sb.block(0.0)
    elif regime == "medium" and ks.size:
        lam_hi = ks[-1] ** 2
        delta0 = 2.0 ** math.floor(math.log2(lam_hi))
        delta, cache = _medium_anchors(sb, ks, guard, delta0, 2.0**-40)
        info["delta"] = delta
        info["anchors"] = len(cache)
    for k, W in zip(ks, wk):
        A = sb.block(k)
        if regime == "high":
            S, used, res, q4 = _born_inverse(sb, A, tol, n_max)
            info["max_q4"] = max(info.get("max_q4", 0.0), q4)
        elif regime == "low":
            B = A - A0
            S, used, res = _anchored_inverse(S0, nS0, B, sb.l1_block(B), tol, n_max)
        else:
            lam = k * k
            j0 = int(math.floor(lam / delta))
            S = np.zeros((sb.m, sb.m), complex)
            used, res = 0, 0.0
            for j in (j0, j0 + 1):
                wgt = float(window(lam / delta - j))
                if wgt <= 0:
                    continue
                Sj, nSj, Aj = cache[j]
                B = A - Aj
                Sp, u, rr = _anchored_inverse(Sj, nSj, B, sb.l1_block(B), tol, n_max)
                S += wgt * Sp
                used, res = max(used, u), max(res, rr)
        terms, resid = max(terms, used), max(resid, res)
        Kcol = resolvent_matrix(r, sb.r, k)  # R_0 (r, support)
        right = sb.v[:, None] * Kcol.T  # V R_0 (support, r)
        G = (Kcol * sb.w[None, :]) @ (S @ right)
        amp = m(np.array([k * k]))[0] * chi(k / N)
        total = total + (-(1.0 / np.pi) * W * 2 * k) * (amp * G.imag)
    kernel = KernelOperator(grid, total, {"N": N, "regime": regime, "nodes": int(ks.size)})
    return DyadicPiece(N, kernel, regime, terms, resid, info)


# -- oscillatory integrals and dyadic sums --------------------------------------


def oscillatory_integral(m: Callable, N: float, sigma: float, s: float, order: int = 16):
    """``int m(lambda) chi(sqrt(lambda)/N) sin(sqrt(lambda) sigma) dlambda`` and its bound ratio.

    After ``lambda = N^2 mu^2`` the integral is
    ``N^2 int_{1/2}^2 2 mu m(N^2 mu^2) chi(mu) sin(N mu sigma) dmu``, evaluated
    by Gauss-Legendre panels fine enough for the oscillation.

    Returns
    -------
    value : float or complex
    ratio : float
        ``|value| / (N^2 ||m||_{H(s)} <N sigma>^{-s})``.
    """
    N, sigma = float(N), float(sigma)
    osc = N * abs(sigma)
    count = int(8 + 3.0 * osc / np.pi)
    mu, w = _gl_panels(np.linspace(0.5, 2.0, count + 1), order)
    vals = np.asarray(m((N * mu) ** 2), dtype=complex) * np.ones(mu.shape)
    value = N**2 * np.sum(w * 2 * mu * vals * chi(mu) * np.sin(N * mu * sigma))
    value = complex(value)
    norm = m.h_norm(s) if isinstance(m, SymbolSpec) else h_norm(m, s)
    denom = N**2 * norm * (1 + osc**2) ** (-s / 2)
    ratio = abs(value) / denom if denom > 0 else (0.0 if value == 0 else float("inf"))
    return value, float(ratio)


@dataclass(frozen=True)
class DyadicSumResult:
    lhs: float
    rhs: float
    ratio: float
    tail: float
    n_terms: int


def _binary_exponent(v: float) -> int:
    """Exponent ``e`` with ``2^(e-1) <= v < 2^e``, exact in floating point."""
    return math.frexp(v)[1]


def dyadic_sum_check(x: float, y: float, eps: float, extra: int = 40) -> DyadicSumResult:
    """``sum_N N^2 / (<Nx>^2 <Ny>)`` over dyadic ``N`` against ``x^{eps-2} y^{-eps}``.

    The summation range ``[N_lo, N_hi]`` extends ``extra`` octaves beyond
    ``1 / max(x, y)`` and ``1 / min(x, y)``; the neglected tails are
    bounded by ``N_lo^2 / 3`` below and ``1 / (x^2 y N_hi)`` above.  The
    range is built from binary exponents so that ``(x, y) -> (2x, 2y)``
    shifts it by exactly one octave.
    """
    if not (x > 0 and y > 0):
        raise ParameterError("x and y must be positive")
    if not (0 < eps < 2):
        raise ParameterError("eps must lie in (0, 2)")
    lo_exp = -_binary_exponent(max(x, y)) - extra
    hi_exp = -_binary_exponent(min(x, y)) + 1 + extra
    N = np.ldexp(1.0, np.arange(lo_exp, hi_exp + 1))
    terms = N**2 / ((1 + (N * x) ** 2) * np.sqrt(1 + (N * y) ** 2))
    lhs = float(np.sum(terms))
    tail = float(N[0] ** 2 / 3 + 1.0 / (x * x * y * N[-1]))
    rhs = float(x ** (eps - 2) * y ** (-eps))
    return DyadicSumResult(lhs, rhs, lhs / rhs, tail, int(N.size))


def dyadic_sum_envelope(eps: float) -> float:
    """Upper bound of ``dyadic_sum_check(...).ratio`` valid for ``0 < eps <= 1``.

    Splitting the sum at ``1/x`` and ``1/y`` gives four geometric series;
    their sums bound the ratio by
    ``4/3 + 1/(1 - 2^-eps) + 1/(1 - 2^(eps-2)) + 2``.
    """
    if not (0 < eps <= 1):
        raise ParameterError("the envelope holds for 0 < eps <= 1")
    return 4.0 / 3 + 1.0 / (1 - 2.0**-eps) + 1.0 / (1 - 2.0 ** (eps - 2)) + 2.0


# -- Born terms on a ray ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BornTermReport:
    """Intermediate kernels of the ``n``-th Born term and their diagnostics."""

    n: int
    N: float
    values: np.ndarray
    tuples: np.ndarray
    decay_ratio: float
    summability_ratio: float
    kdec_norm: float
    kdec_bound: float
    ksum_norms: np.ndarray
    ksum_rate: float


def _born_power(V: Potential, k: float, n: int) -> np.ndarray:
    """Kernel of ``(V R_0^+(k^2))^n`` on the full grid (identity kernel for ``n = 0``)."""
    grid = V.grid
    K = V.values[:, None] * resolvent_matrix(grid.nodes, grid.nodes, k)
    T = np.diag(1.0 / grid.weights).astype(complex)
    for _ in range(n):
        T = K @ (grid.weights[:, None] * T)
    return T


def born_term_kernel(
    n: int,
    N: float,
    m: Callable,
    V: Potential,
    samples: int = 64,
    seed: int = 42,
    s: tuple[float, float] = (2.0, 2.0),
    lam_samples: int = 8,
    n_range: int = 12,
    N1: float | None = None,
    order: int = 16,
) -> BornTermReport:
    """``Pb_N^n(x, a, b, y) = int m chi_N Im[e^{ik(|x-a| + |b-y|)} T_n(a, b)] dlambda`` on a ray.

    ``T_n`` is the kernel of ``(V R_0^+)^n``; for ``n = 0`` only the trace
    ``a = b`` is meaningful and the term reduces to an oscillatory integral.
    Points are drawn from the grid nodes with the given seed.

    Diagnostics
    -----------
    decay_ratio
        max over tuples of ``|Pb_N^n| / (N^2 ||m|| <N(x-a)>^{-s1} <N(b-y)>^{-s2} K_dec^n(a, b))``
        with ``K_dec^n = (|V| R_0(0))^n``.
    kdec_norm, kdec_bound
        ``L^1`` norm of ``K_dec^n`` and ``(||V||_K / 4 pi)^n``.
    ksum_norms, ksum_rate
        Norms of ``K_sum^j = D^{floor(j/4)} (|V| R_0(0))^{j mod 4}`` for
        ``j < n_range`` with ``D`` the entrywise maximum of ``|T_4|`` over
        energies above ``N1``, and the fitted geometric rate per factor.
    """
    if n < 0:
        raise ParameterError("n must be >= 0")
    grid = V.grid
    r, w = grid.nodes, grid.weights
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, grid.n, size=(samples, 4))
    if n == 0:
        idx[:, 2] = idx[:, 1]
    pts = r[idx]
    x, a, b, y = pts.T
    k_cut = default_k_cut(grid)
    mu, wmu = _gl_panels(np.linspace(0.5, 2.0, int(8 + 3 * N * 2 * grid.r_max / np.pi) + 1), order)
    ks = N * mu
    keep = ks <= k_cut
    ks, wk = ks[keep], N * wmu[keep]
    dist = np.abs(x - a) + np.abs(b - y)
    vals = np.zeros(samples, dtype=complex)
    amp = np.asarray(m(ks**2), dtype=complex) * chi(ks / N) * 2 * ks * wk
    for k, c in zip(ks, amp):
        if n == 0:
            Tab = np.ones(samples)
        else:
            T = _born_power(V, k, n)
            Tab = T[idx[:, 1], idx[:, 2]]
        vals += c * np.imag(np.exp(1j * k * dist) * Tab)
    K0 = 1.0 / (4 * np.pi * np.maximum(r[:, None], r[None, :]))
    absV = np.abs(V.values)
    base = absV[:, None] * K0
    Kdec = np.diag(1.0 / w)
    for _ in range(n):
        Kdec = base @ (w[:, None] * Kdec)
    norm_m = m.h_norm(max(s)) if isinstance(m, SymbolSpec) else h_norm(m, max(s))
    bracket = (1 + (N * (x - a)) ** 2) ** (-s[0] / 2) * (1 + (N * (b - y)) ** 2) ** (-s[1] / 2)
    kd = Kdec[idx[:, 1], idx[:, 2]] if n else np.ones(samples)
    denom = N**2 * norm_m * bracket * kd
    with np.errstate(divide="ignore", invalid="ignore"):
        dec = np.where(denom > 0, np.abs(vals) / denom, 0.0)
    kdec_norm = float(np.max(w @ np.abs(Kdec))) if n else 1.0
    # summability: K_sum^j built from the empirical fourth-power majorant
    if N1 is None:
        from .resolvent import find_N1

        N1 = find_N1(V)
    lams = np.geomspace(N1**2, k_cut**2, lam_samples)
    D = np.zeros((grid.n, grid.n))
    for lam in lams:
        D = np.maximum(D, np.abs(_born_power(V, math.sqrt(lam), 4)))
    norms = []
    for j in range(n_range):
        Kj = np.diag(1.0 / w)
        for _ in range(j % 4):
            Kj = base @ (w[:, None] * Kj)
        for _ in range(j // 4):
            Kj = D @ (w[:, None] * Kj)
        norms.append(float(np.max(w @ np.abs(Kj))))
    norms = np.asarray(norms)
    groups = norms[::4]
    pos = groups > 0
    rate = float(np.exp(np.polyfit(np.arange(groups.size)[pos], np.log(groups[pos]), 1)[0])) if pos.sum() > 1 else 0.0
    ksum_n = norms[n] if n < norms.size else float("nan")
    summ = float(np.max(np.abs(vals)) / (N**2 * norm_m * ksum_n)) if ksum_n > 0 else 0.0
    return BornTermReport(
        n,
        float(N),
        vals,
        pts,
        float(np.max(dec)),
        summ,
        kdec_norm,
        float((V.kato_norm / (4 * np.pi)) ** n),
        norms,
        rate,
    )
