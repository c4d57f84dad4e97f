"""Quintic Schrodinger equation ``i u_t = H u + sign |u|^4 u`` by Duhamel iteration.

Everything is carried in the eigenbasis of the discretized ``H``.  The
linear group is exact there, and the Duhamel integral
``u(t) = e^{-itH} u0 - i sign int_0^t e^{-i(t-s)H} |u|^4 u(s) ds`` becomes a
cumulative sum of ``e^{i lambda s} <phi, |u|^4 u(s)>`` over midpoint
sub-steps.  Values of the iterate between time slices are interpolated
linearly in the interaction picture ``w(t) = e^{itH} v(t)``, which is
slowly varying when the nonlinearity is small.

``sign = +1`` is the defocusing equation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .errors import NoContractionError, ParameterError
from .oracle import SpectralDecomposition
from .radial import RadialField, RadialGrid, lp_norm, radial_derivative

__all__ = [
    "NlsState",
    "ContractionBall",
    "time_grid",
    "linear_flow",
    "duhamel_map",
    "fixed_point_solve",
    "strichartz_tracker",
    "continuity_check",
    "pilot_constant",
    "contraction_ball",
    "gaussian_data",
    "mass_check",
    "scaling_check",
    "time_reversal_check",
]

GRAD_EXPONENT = 30.0 / 13.0


@dataclass(frozen=True, eq=False)
class NlsState:
    """Fields ``u(t_m)`` on the computational box, one slice per row."""

    grid: RadialGrid
    times: np.ndarray
    fields: np.ndarray

    def __post_init__(self):
        if self.fields.shape != (self.times.size, self.grid.n):
            raise ParameterError("fields do not match the time grid and the spatial grid")
        if np.any(np.diff(np.abs(self.times)) <= 0) or self.times[0] != 0:
            raise ParameterError("times must start at 0 and increase in |t|")

    def slice(self, m: int) -> RadialField:
        return RadialField(self.grid, self.fields[m])


@dataclass(frozen=True)
class ContractionBall:
    """Radii of the contraction ball and the constants they come from.

    ``b = 2 A C``, ``a = min((2C)^{-1/4}, (2 C b)^{-1/3})``, ``delta = a / 2``.
    """

    a: float
    b: float
    delta: float
    A: float
    C: float
    second_branch: bool

    def as_dict(self) -> dict:
        return {
            "a": self.a,
            "b": self.b,
            "delta": self.delta,
            "A": self.A,
            "C": self.C,
            "second_branch_binds": self.second_branch,
        }


def contraction_ball(A: float, C: float) -> ContractionBall:
    if not (A > 0 and C > 0):
        raise ParameterError("A and C must be positive")
    b = 2 * A * C
    first, second = (2 * C) ** -0.25, (2 * C * b) ** (-1.0 / 3.0)
    a = min(first, second)
    return ContractionBall(a, b, a / 2, A, C, second < first)


def time_grid(T: float, slices: int = 256) -> np.ndarray:
    if T == 0 or not np.isfinite(T):
        raise ParameterError("T must be finite and non-zero")
    if slices < 2:
        raise ParameterError("need at least two slices")
    return np.linspace(0.0, T, slices + 1)


def _box_values(spec: SpectralDecomposition, u0) -> np.ndarray:
    return spec.extend(np.asarray(getattr(u0, "values", u0), dtype=complex)).astype(complex)


def linear_flow(u0, times: np.ndarray, spec: SpectralDecomposition) -> NlsState:
    """``e^{-itH} u0`` on the time grid (full spectrum)."""
    c = spec.coefficients(_box_values(spec, u0))
    phases = np.exp(-1j * np.outer(times, spec.eigenvalues))
    return NlsState(spec.box, np.asarray(times, float), spec.synthesize(phases * c, full=True))


def duhamel_map(
    u0,
    v: NlsState,
    sign: int,
    spec: SpectralDecomposition,
    substeps: int = 4,
) -> NlsState:
    """``Phi(v)(t) = e^{-itH} u0 - i sign int_0^t e^{-i(t-s)H} |v|^4 v(s) ds``.

    The time integral uses ``substeps`` midpoint nodes per slice.

    Raises
    ------
    ParameterError
        If ``v`` does not live on the box of ``spec`` or ``sign`` is not +-1.
    """
    if sign not in (1, -1):
        raise ParameterError("sign must be +1 or -1")
    if v.grid.n != spec.box.n:
        raise ParameterError("iterate is not sampled on the decomposition's box")
    lam = spec.eigenvalues
    t = v.times
    dt = np.diff(t)
    if not np.allclose(dt, dt[0], rtol=1e-12, atol=0):
        raise ParameterError("the time grid must be uniform")
    c0 = spec.coefficients(_box_values(spec, u0))
    cv = spec.coefficients(v.fields)  # (M+1, n)
    cw = np.exp(1j * np.outer(t, lam)) * cv
    theta = (np.arange(substeps) + 0.5) / substeps
    M = t.size - 1
    # sub-step times and interpolated interaction-picture coefficients
    s = (t[:-1, None] + theta[None, :] * dt[0]).ravel()
    cws = ((1 - theta)[None, :, None] * cw[:-1, None, :] + theta[None, :, None] * cw[1:, None, :]).reshape(
        M * substeps, -1
    )
    vs = spec.synthesize(np.exp(-1j * np.outer(s, lam)) * cws, full=True)
    nonlin = np.abs(vs) ** 4 * vs
    cn = np.exp(1j * np.outer(s, lam)) * spec.coefficients(nonlin) * (dt[0] / substeps)
    per_slice = cn.reshape(M, substeps, -1).sum(axis=1)
    integral = np.vstack([np.zeros((1, lam.size), complex), np.cumsum(per_slice, axis=0)])
    coeffs = np.exp(-1j * np.outer(t, lam)) * (c0[None, :] - 1j * sign * integral)
    return NlsState(spec.box, t, spec.synthesize(coeffs, full=True))


def _l10(state: NlsState, values=None) -> float:
    """``L_t^10 L_x^10`` by the trapezoid rule in time."""
    f = state.fields if values is None else values
    w = state.grid.weights
    per = np.sum(np.abs(f) ** 10 * w, axis=1)
    return float(abs(trapezoid(per, state.times)) ** 0.1)


def _grad_norm(state: NlsState) -> float:
    """``L_t^10 L_x^{30/13}`` of the radial gradient."""
    g = radial_derivative(state.fields, state.grid)
    w = state.grid.weights
    per = np.array([lp_norm(row, GRAD_EXPONENT, w) ** 10 for row in g])
    return float(abs(trapezoid(per, state.times)) ** 0.1)


def _h1(values: np.ndarray, grid: RadialGrid) -> np.ndarray:
    g = radial_derivative(np.atleast_2d(values), grid)
    return np.sqrt(np.sum(np.abs(g) ** 2 * grid.weights, axis=-1))


def strichartz_tracker(state: NlsState, ball: ContractionBall | None = None) -> dict:
    """Space-time norms of a state and, given a ball, the bookkeeping inequalities.

    The inequalities are ``||Phi||_{L^10} <= delta + C a^4 b`` and
    ``||grad Phi||_{L^10 L^{30/13}} <= C A + C a^4 b``.
    """
    w = state.grid.weights
    mass = np.sum(np.abs(state.fields) ** 2 * w, axis=1)
    h1 = _h1(state.fields, state.grid)
    rec = {
        "L10": _l10(state),
        "grad_strichartz": _grad_norm(state),
        "mass": mass,
        "h1": h1,
        "slice_L10": np.array([lp_norm(row, 10.0, w) for row in state.fields]),
    }
    if ball is not None:
        extra = ball.C * ball.a**4 * ball.b
        rec["bound_L10"] = ball.delta + extra
        rec["bound_grad"] = ball.C * ball.A + extra
        rec["bookkeeping_ok"] = bool(rec["L10"] <= rec["bound_L10"] and rec["grad_strichartz"] <= rec["bound_grad"])
    return rec


def pilot_constant(u0, times: np.ndarray, spec: SpectralDecomposition) -> tuple[float, NlsState]:
    """Fitted Strichartz constant from the linear flow.

    ``C = max(||e^{-itH} u0||_{L^10}, ||grad e^{-itH} u0||_{L^10 L^{30/13}}) / ||grad u0||_2``.
    """
    lin = linear_flow(u0, times, spec)
    A = float(_h1(lin.fields[0], lin.grid)[0])
    if A == 0:
        return 1.0, lin
    return max(_l10(lin), _grad_norm(lin)) / A, lin


def gaussian_data(grid: RadialGrid, A: float = 0.1, width: float = 1.0, center: float = 0.0) -> RadialField:
    """Gaussian profile scaled so that ``||grad u0||_2 = A``."""
    f = np.exp(-0.5 * ((grid.nodes - center) / width) ** 2).astype(complex)
    g = float(_h1(f, grid)[0])
    return RadialField(grid, A * f / g)


def fixed_point_solve(
    u0,
    T: float,
    tol: float,
    spec: SpectralDecomposition,
    sign: int = 1,
    slices: int = 256,
    substeps: int = 4,
    max_iter: int = 60,
    C: float | None = None,
    noise: float = 1e-13,
) -> tuple[NlsState, dict]:
    """Iterate ``v -> Phi(v)`` from the linear flow until successive iterates are ``tol`` apart.

    The contraction factor is the largest ratio of successive ``L^10_{t,x}``
    distances among iterations whose distance exceeds ``noise`` times the
    size of the iterate; below that level the ratios only measure rounding.

    Raises
    ------
    NoContractionError
        If an iterate leaves the ball, the factor reaches 1, or ``max_iter``
        is exhausted.  The partial record is attached.
    """
    times = time_grid(T, slices)
    C_fit, lin = pilot_constant(u0, times, spec)
    C = C_fit if C is None else C
    A = float(_h1(lin.fields[0], lin.grid)[0])
    record: dict = {"T": T, "tol": tol, "sign": sign, "slices": slices, "substeps": substeps, "A": A}
    if A == 0:
        zero = NlsState(spec.box, times, np.zeros_like(lin.fields))
        record.update({"iterations": 1, "theta": 0.0, "distances": [0.0], "ball": None, "in_ball": True})
        return zero, record
    ball = contraction_ball(A, C)
    record["ball"] = ball.as_dict()
    lin_norm = _l10(lin)
    record["linear_L10"] = lin_norm
    record["hypothesis_ok"] = bool(lin_norm < ball.delta)
    v = lin
    dists, ratios = [], []
    in_ball = True
    for it in range(1, max_iter + 1):
        nxt = duhamel_map(u0, v, sign, spec, substeps)
        d = _l10(nxt, nxt.fields - v.fields)
        size = _l10(nxt)
        dists.append(d)
        if len(dists) > 1 and dists[-2] > noise * size:
            ratios.append(d / dists[-2])
        l10, grad = size, _grad_norm(nxt)
        if l10 > ball.a or grad > ball.b:
            in_ball = False
        v = nxt
        theta = max(ratios) if ratios else 0.0
        record.update({"iterations": it, "theta": theta, "distances": dists, "in_ball": in_ball})
        if not in_ball:
            raise NoContractionError(
                f"iterate {it} left the ball (L10={l10:.4g} vs a={ball.a:.4g}, grad={grad:.4g} vs b={ball.b:.4g}); "
                "try a shorter time or smaller data",
                record,
            )
        if theta >= 1:
            raise NoContractionError(f"contraction factor {theta:.4g} >= 1; try a shorter time or smaller data", record)
        if d < tol:
            break
    else:
        raise NoContractionError(f"no convergence to {tol:g} within {max_iter} iterations", record)
    record["final_L10"] = _l10(v)
    record["final_grad"] = _grad_norm(v)
    record["below_2delta"] = bool(record["final_L10"] < 2 * ball.delta)
    return v, record


def mass_check(u0, state: NlsState, spec: SpectralDecomposition, sign: int = 1, floor: float = 1e-12) -> dict:
    """Mass drift against ten times the time-quadrature error of the Duhamel map.

    The quadrature error is estimated by comparing two and four sub-steps on
    the converged state, ``err = max_m ||Phi_4(u) - Phi_2(u)||_2``; the mass
    changes by at most about ``2 ||u|| err``.
    """
    w = state.grid.weights
    mass = np.sum(np.abs(state.fields) ** 2 * w, axis=1)
    drift = float(np.max(np.abs(mass - mass[0])))
    p4 = duhamel_map(u0, state, sign, spec, 4).fields
    p2 = duhamel_map(u0, state, sign, spec, 2).fields
    err = float(np.max(np.sqrt(np.sum(np.abs(p4 - p2) ** 2 * w, axis=1))))
    bound = 10 * (2 * math.sqrt(mass.max()) * err) + floor
    return {"drift": drift, "quadrature_error": err, "bound": bound, "pass": bool(drift <= bound)}


def continuity_check(state: NlsState) -> dict:
    """``max_m ||u(t_{m+1}) - u(t_m)||_{H^1-dot} / |dt|`` and the ``H^1-dot`` norm range."""
    diffs = np.diff(state.fields, axis=0)
    dt = np.abs(np.diff(state.times))
    mod = _h1(diffs, state.grid) / dt
    h1 = _h1(state.fields, state.grid)
    return {
        "modulus": float(mod.max()),
        "h1_min": float(h1.min()),
        "h1_max": float(h1.max()),
        "h1_variation": float((h1.max() - h1.min()) / max(h1.max(), 1e-300)),
    }


def scaling_check(V, u0_func, T: float, n: int, r_max: float, mu: float = 2.0, tol: float = 1e-10, **kw) -> dict:
    """Quintic scaling for ``V = 0``.

    With ``u_mu(t, r) = mu^{1/2} u(mu^2 t, mu r)`` the solution on the grid
    ``r_max / mu`` over time ``T / mu^2`` must reproduce ``mu^{1/2}`` times the
    original samples.  The discretization is scale-covariant, so the match
    is exact up to rounding.
    """
    from .kato import zero_potential
    from .oracle import discretize_h
    from .radial import build_grid

    g1 = build_grid(r_max, n)
    g2 = build_grid(r_max / mu, n)
    s1 = discretize_h(zero_potential(g1))
    s2 = discretize_h(zero_potential(g2))
    u1 = RadialField(g1, np.asarray(u0_func(g1.nodes), complex))
    u2 = RadialField(g2, math.sqrt(mu) * np.asarray(u0_func(mu * g2.nodes), complex))
    a, _ = fixed_point_solve(u1, T, tol, s1, **kw)
    b, _ = fixed_point_solve(u2, T / mu**2, tol, s2, **kw)
    err = float(np.max(np.abs(b.fields - math.sqrt(mu) * a.fields)) / np.max(np.abs(math.sqrt(mu) * a.fields)))
    return {"mu": mu, "relative_error": err}


def time_reversal_check(u0, T: float, tol: float, spec: SpectralDecomposition, sign: int = 1, **kw) -> dict:
    """``u`` from ``conj(u0)`` on ``[0, -T]`` equals ``conj`` of ``u`` from ``u0`` on ``[0, T]``."""
    fwd, _ = fixed_point_solve(u0, T, tol, spec, sign=sign, **kw)
    u0c = np.conj(np.asarray(getattr(u0, "values", u0)))
    bwd, _ = fixed_point_solve(u0c, -T, tol, spec, sign=sign, **kw)
    err = float(np.max(np.abs(bwd.fields - np.conj(fwd.fields))) / max(np.max(np.abs(fwd.fields)), 1e-300))
    return {"relative_error": err}
