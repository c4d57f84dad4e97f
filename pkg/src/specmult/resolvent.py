"""Free resolvent kernels and inversion of ``I + V R_0^+(lambda)``.

Kernels are stored as matrices ``K[i, j] ~ K(r_i, r_j)`` and act by
``(K f)(r_i) = sum_j K[i, j] f_j w_j``.  Composition therefore carries a
weight, ``(K o L)[i, j] = sum_k K[i, k] w_k L[k, j]``, and the
``L^1 -> L^1`` norm of a kernel is ``max_j sum_i |K[i, j]| w_i``.

The spherical average of ``e^{ik|x-y|} / (4 pi |x-y|)`` over ``|y| = r'``
is ``e^{ik r_>} sin(k r_<) / (4 pi k r_< r_>)``, which is ``1/(4 pi r_>)``
at ``k = 0``.  Every product with ``V`` only has rows on the support of
``V``, so the linear algebra below is carried out on that support.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import (
    ClassMembershipError,
    DivergenceError,
    ParameterError,
    SpectralAssumptionError,
    ThresholdError,
)
from .kato import Potential, kato_split
from .radial import RadialGrid

__all__ = [
    "KernelOperator",
    "EnergyPoint",
    "ThresholdReport",
    "SupportBlock",
    "resolvent_matrix",
    "free_resolvent",
    "v_r0",
    "l1_opnorm",
    "l1_opnorm_with_identity",
    "difference_op",
    "dominating_kernel",
    "find_delta",
    "fourth_power_norm",
    "find_N1",
    "find_N0",
    "invert_plain",
    "invert_anchored",
    "dense_inverse",
    "inversion_residual",
    "s_tilde_sup",
    "resonance_indicator",
    "energy_cap",
    "energy_samples",
    "thresholds",
    "DYADIC_LADDER",
]

DYADIC_LADDER = tuple(2.0**j for j in range(-8, 9))


@dataclass(frozen=True, eq=False)
class KernelOperator:
    """Integral kernel on a radial grid with weighted apply semantics."""

    grid: RadialGrid
    matrix: np.ndarray
    meta: dict = field(default_factory=dict)

    def apply(self, f):
        vals = getattr(f, "values", f)
        out = self.matrix @ (np.asarray(vals) * self.grid.weights)
        if hasattr(f, "with_values"):
            return f.with_values(out)
        return out

    __call__ = apply

    def compose(self, other: "KernelOperator") -> "KernelOperator":
        return KernelOperator(self.grid, self.matrix @ (self.grid.weights[:, None] * other.matrix))

    def operator_matrix(self) -> np.ndarray:
        """Matrix acting directly on sample vectors."""
        return self.matrix * self.grid.weights[None, :]

    @property
    def l1_opnorm(self) -> float:
        return l1_opnorm(self)

    def __add__(self, other):
        return KernelOperator(self.grid, self.matrix + other.matrix)

    def __sub__(self, other):
        return KernelOperator(self.grid, self.matrix - other.matrix)

    def __mul__(self, c):
        return KernelOperator(self.grid, c * self.matrix)

    __rmul__ = __mul__

    def imag(self) -> "KernelOperator":
        return KernelOperator(self.grid, self.matrix.imag.copy())


@dataclass(frozen=True)
class EnergyPoint:
    """Spectral parameter ``lambda >= 0`` on the ``+i0`` branch, ``k = sqrt(lambda)``."""

    lam: float

    def __post_init__(self):
        if not (self.lam >= 0) or not np.isfinite(self.lam):
            raise ParameterError(f"energy {self.lam} must be finite and >= 0")

    @property
    def k(self) -> float:
        return float(np.sqrt(self.lam))

    @classmethod
    def from_k(cls, k: float) -> "EnergyPoint":
        return cls(float(k) ** 2)


def _k(z) -> float:
    if isinstance(z, EnergyPoint):
        return z.k
    lam = float(z)
    if lam < 0:
        raise ParameterError(f"energy {lam} must be >= 0")
    return float(np.sqrt(lam))


@dataclass(frozen=True)
class ThresholdReport:
    """Frequency thresholds and constants of the resolvent analysis."""

    N1: float
    N0: float
    delta: float
    S_tilde: float
    epsilon: float = float("nan")

    def as_dict(self) -> dict:
        return {
            "N1": self.N1,
            "N0": self.N0,
            "delta": self.delta,
            "S_tilde": self.S_tilde,
            "epsilon": self.epsilon,
        }


# -- kernels ------------------------------------------------------------------


def _radial_parts(r: np.ndarray, k: float):
    outgoing = np.exp(1j * k * r) / (4.0 * np.pi * r)
    regular = np.sinc(k * r / np.pi)
    return outgoing, regular


def resolvent_matrix(rows: np.ndarray, cols: np.ndarray, k: float) -> np.ndarray:
    """Radial free resolvent kernel ``R_0^+(k^2)(r_i, r'_j)``.

    The kernel is semi-separable: ``out(r_>) reg(r_<)`` with
    ``out(r) = e^{ikr}/(4 pi r)`` and ``reg(r) = sin(kr)/(kr)``.
    """
    o_r, g_r = _radial_parts(rows, k)
    o_c, g_c = _radial_parts(cols, k)
    return np.where(
        rows[:, None] >= cols[None, :],
        o_r[:, None] * g_c[None, :],
        g_r[:, None] * o_c[None, :],
    )


def free_resolvent(grid: RadialGrid, z) -> KernelOperator:
    """``R_0^+(lambda)`` as a radial kernel."""
    k = _k(z)
    return KernelOperator(grid, resolvent_matrix(grid.nodes, grid.nodes, k), {"k": k})


def v_r0(z, V: Potential) -> KernelOperator:
    """Kernel of ``V R_0^+(lambda)``."""
    K = resolvent_matrix(V.grid.nodes, V.grid.nodes, _k(z))
    return KernelOperator(V.grid, V.values[:, None] * K, {"k": _k(z)})


def l1_opnorm(K: KernelOperator) -> float:
    """``max_j sum_i |K_ij| w_i``, the ``L^1 -> L^1`` norm."""
    if K.matrix.size == 0:
        return 0.0
    return float(np.max(K.grid.weights @ np.abs(K.matrix)))


def l1_opnorm_with_identity(S_tilde: KernelOperator) -> float:
    """``L^1 -> L^1`` norm of ``I + S_tilde``."""
    w = S_tilde.grid.weights
    A = np.abs(S_tilde.matrix) * w[:, None]
    diag = np.abs(1.0 + w * np.diag(S_tilde.matrix))
    cols = A.sum(axis=0) - np.diag(A) + diag
    return float(cols.max())


def difference_op(z, z0, V: Potential) -> KernelOperator:
    """``B = V (R_0^+(lambda) - R_0^+(lambda_0))``."""
    r = V.grid.nodes
    k, k0 = _k(z), _k(z0)
    if k == k0:
        return KernelOperator(V.grid, np.zeros((r.size, r.size), complex))
    D = resolvent_matrix(r, r, k) - resolvent_matrix(r, r, k0)
    return KernelOperator(V.grid, V.values[:, None] * D)


# -- support-restricted linear algebra -----------------------------------------


class SupportBlock:
    """Operators ``V R_0^+`` restricted to the support of ``V``.

    With ``S`` the support indices, the operator matrix of ``V R_0^+`` has
    non-zero rows only on ``S``; ``block(k)`` returns the ``S x S`` part
    and ``rows(k)`` the ``S x n`` kernel rows.
    """

    def __init__(self, V: Potential):
        self.V = V
        self.grid = V.grid
        self.idx = V.support
        self.r = V.grid.nodes[self.idx]
        self.v = V.values[self.idx]
        self.w = V.grid.weights[self.idx]
        self.m = self.idx.size

    def kernel_block(self, k: float) -> np.ndarray:
        return resolvent_matrix(self.r, self.r, k)

    def block(self, k: float) -> np.ndarray:
        """Operator matrix of ``V R_0^+`` on the support, ``v_i K_ij w_j``."""
        return self.v[:, None] * self.kernel_block(k) * self.w[None, :]

    def rows(self, k: float) -> np.ndarray:
        """Kernel rows ``v_i K(r_i, r_j)`` for ``i`` in the support, all ``j``."""
        return self.v[:, None] * resolvent_matrix(self.r, self.grid.nodes, k)

    def embed(self, rows: np.ndarray) -> np.ndarray:
        full = np.zeros((self.grid.n, rows.shape[1]), dtype=rows.dtype)
        full[self.idx] = rows
        return full

    def l1_rows(self, rows: np.ndarray) -> float:
        """``L^1`` norm of a kernel supported on the rows of ``S``."""
        if rows.size == 0:
            return 0.0
        return float(np.max(self.w @ np.abs(rows)))

    def l1_block(self, op: np.ndarray) -> float:
        """``L^1`` norm of an operator matrix on the support."""
        if op.size == 0:
            return 0.0
        return float(np.max((self.w @ np.abs(op)) / self.w))

    def identity_plus_l1(self, op: np.ndarray) -> float:
        """``L^1`` norm of ``I + op`` on the support."""
        return self.l1_block(np.eye(self.m) + op)

    def dense_solve_matrix(self, k: float) -> np.ndarray:
        """``(I + V R_0^+)^{-1}`` on the support, with a conditioning check."""
        M = np.eye(self.m) + self.block(k)
        cond = np.linalg.cond(M, 1)
        if not np.isfinite(cond) or cond > 1e12:
            raise SpectralAssumptionError(
                f"I + V R_0^+ is singular at k={k:.6g} (condition {cond:.3g})"
            )
        return np.linalg.inv(M)


def _support(V: Potential) -> SupportBlock:
    return SupportBlock(V)


# -- smallness thresholds ------------------------------------------------------


def dominating_kernel(V: Potential, epsilon: float, split=None) -> KernelOperator:
    """Entrywise majorant of ``V (R_0^+(lambda) - R_0^+(lambda_0))``.

    ``eps |V1(r)| / (4 pi ||V1||_1) + |V2(r)| / (2 pi r_>)`` for the split
    ``V = V1 + V2`` with ``||V2||_K <= eps``.
    """
    split = kato_split(V, epsilon) if split is None else split
    grid = V.grid
    r = grid.nodes
    v1 = np.abs(split.V1.values)
    v2 = np.abs(split.V2.values)
    l1 = split.V1.l1_norm
    part1 = (epsilon / (4 * np.pi * l1)) * v1 if l1 > 0 else np.zeros_like(v1)
    rmax = np.maximum(r[:, None], r[None, :])
    B = part1[:, None] + v2[:, None] / (2 * np.pi * rmax)
    return KernelOperator(grid, B, {"split_radius": split.radius})


def energy_cap(grid: RadialGrid, lam_max: float = 2.0**16) -> float:
    """Largest energy resolved by the grid, ``(0.95 pi / h)^2`` capped by ``lam_max``."""
    return float(min(lam_max, (0.95 * grid.k_nyquist) ** 2))


def energy_samples(grid: RadialGrid, count: int = 64, lam_max: float = 2.0**16) -> np.ndarray:
    """Energies uniform in ``k = sqrt(lambda)`` from 0 to the grid cap."""
    k = np.linspace(0.0, np.sqrt(energy_cap(grid, lam_max)), int(count))
    return k**2


def _domination_holds(V, B_eps, delta, lam0s):
    r = V.grid.nodes
    sup = V.support
    bound = B_eps.matrix[sup]
    for lam0 in lam0s:
        k0, k1 = np.sqrt(lam0), np.sqrt(lam0 + delta)
        D = resolvent_matrix(r[sup], r, k1) - resolvent_matrix(r[sup], r, k0)
        diff = np.abs(V.values[sup][:, None] * D)
        if np.any(diff > bound * (1 + 1e-10) + 1e-300):
            return False
    return True


def find_delta(
    V: Potential,
    epsilon: float,
    n_pairs: int = 20,
    top_exp: int = 8,
    min_exp: int = -60,
) -> float:
    """Largest ``delta = 2^j`` on the ladder for which ``B_eps`` dominates.

    Domination of ``|V (R_0^+(lambda) - R_0^+(lambda_0))|`` by the kernel of
    :func:`dominating_kernel` is checked entrywise on ``n_pairs`` energy pairs
    with ``lambda - lambda_0 = delta``, including ``lambda_0 = 0`` where the
    square root varies fastest.  The ladder exponent is located by
    bisection after checking the top.
    """
    if not (epsilon > 0):
        raise ParameterError("epsilon must be positive")
    top = 2.0**top_exp
    if V.is_zero:
        return top
    B_eps = dominating_kernel(V, epsilon)
    if l1_opnorm(B_eps) > epsilon * (1 + 1e-12):
        raise ClassMembershipError("dominating kernel exceeds epsilon; split failed")
    cap = energy_cap(V.grid)
    lam0s = np.r_[0.0, np.geomspace(1e-3, cap, n_pairs - 1)]

    def ok(j):
        return _domination_holds(V, B_eps, 2.0**j, lam0s)

    if ok(top_exp):
        return top
    if not ok(min_exp):
        raise ClassMembershipError(f"no delta >= 2^{min_exp} gives domination")
    lo, hi = min_exp, top_exp  # ok(lo) holds, ok(hi) fails
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return 2.0**lo


def fourth_power_norm(z, V: Potential) -> float:
    """``L^1`` norm of ``(V R_0^+(lambda))^4``."""
    if V.is_zero:
        return 0.0
    sb = _support(V)
    k = _k(z)
    A = sb.block(k)
    rows = sb.rows(k)
    return sb.l1_rows(A @ (A @ (A @ rows)))


def find_N1(
    V: Potential,
    ladder=DYADIC_LADDER,
    n_samples: int = 16,
    lam_max: float = 2.0**16,
    level: float = 0.5,
) -> float:
    """Smallest dyadic ``N`` with ``||(V R_0^+(lambda))^4|| <= level`` at sampled ``lambda >= N^2``.

    The samples are ``n_samples`` energies geometrically spaced from ``N^2``
    to the grid cap.

    Raises
    ------
    ThresholdError
        When no ladder value passes below the grid energy cap.
    """
    cap = energy_cap(V.grid, lam_max)
    for N in ladder:
        if N**2 > cap:
            break
        lams = np.geomspace(N**2, cap, n_samples)
        # the smallest energy is the most likely to fail, test it first
        if fourth_power_norm(lams[0], V) > level:
            continue
        if all(fourth_power_norm(lam, V) <= level for lam in lams[1:]):
            return float(N)
    raise ThresholdError(
        f"fourth power of V R_0 stays above {level} up to lambda={cap:.4g}; "
        "refine the grid or weaken the potential"
    )


def find_N0(
    V: Potential,
    ladder=DYADIC_LADDER,
    n_samples: int = 8,
    level: float = 0.5,
) -> float:
    """Largest dyadic ``N`` such that the expansion anchored at zero energy has ratio <= level.

    The ratio is ``||S_0|| ||V (R_0^+(lambda) - R_0^+(0))||`` sampled on
    ``0 < lambda <= (2N)^2``, the spectral support of the ``N``-th piece.
    """
    if V.is_zero:
        return float(ladder[-1])
    sb = _support(V)
    S0 = sb.dense_solve_matrix(0.0)
    nS0 = sb.l1_block(S0)
    K0 = sb.kernel_block(0.0)
    best = None
    for N in ladder:
        ks = np.linspace(0, 2 * N, n_samples + 1)[1:]
        ratio = max(
            nS0 * sb.l1_block(sb.v[:, None] * (sb.kernel_block(k) - K0) * sb.w[None, :])
            for k in ks
        )
        if ratio > level:
            break
        best = float(N)
    if best is None:
        raise ThresholdError("zero-energy expansion fails on the whole ladder")
    return best


# -- inversion ------------------------------------------------------------------


def _rows_to_kernel(sb: SupportBlock, rows: np.ndarray, meta: dict) -> KernelOperator:
    return KernelOperator(sb.grid, sb.embed(rows), meta)


def dense_inverse(z, V: Potential) -> KernelOperator:
    """``S_tilde`` with ``(I + V R_0^+)^{-1} = I + S_tilde`` from a dense solve."""
    grid = V.grid
    if V.is_zero:
        return KernelOperator(grid, np.zeros((grid.n, grid.n), complex), {"identity": True})
    sb = _support(V)
    k = _k(z)
    Sinv = sb.dense_solve_matrix(k)
    return _rows_to_kernel(sb, -Sinv @ sb.rows(k), {"identity": True, "k": k, "method": "dense"})


def invert_plain(z, V: Potential, n_terms: int = 12) -> KernelOperator:
    """Grouped Born series ``(I - T + T^2 - T^3) sum_{m <= n_terms} T^{4m}``, ``T = V R_0^+``.

    Returns the integral part ``S_tilde``; ``meta["residual_bound"]`` is
    ``q^{n_terms+1}`` with ``q`` the fourth-power norm, which bounds the
    ``L^1`` norm of ``(I + T)(I + S_tilde) - I``.

    Raises
    ------
    DivergenceError
        If the fourth power of ``T`` has norm >= 1.
    """
    grid = V.grid
    if V.is_zero:
        return KernelOperator(grid, np.zeros((grid.n, grid.n), complex), {"identity": True, "residual_bound": 0.0})
    sb = _support(V)
    k = _k(z)
    A = sb.block(k)
    rows = sb.rows(k)
    q = sb.l1_rows(A @ (A @ (A @ rows)))
    if q >= 1:
        raise DivergenceError(
            f"||(V R_0)^4|| = {q:.4g} >= 1 at k={k:.4g}; use the anchored inversion"
        )
    total = 4 * (n_terms + 1)
    # P = sum_{j < total} (-A)^j, so that S_tilde rows = -P @ rows
    P = np.eye(sb.m, dtype=complex)
    term = np.eye(sb.m, dtype=complex)
    for _ in range(total - 1):
        term = -term @ A
        P += term
    meta = {"identity": True, "k": k, "q": q, "n_terms": n_terms, "residual_bound": q ** (n_terms + 1), "method": "plain"}
    return _rows_to_kernel(sb, -P @ rows, meta)


def invert_anchored(z, z0, V: Potential, n_terms: int | None = None, tol: float = 1e-12) -> KernelOperator:
    """``S_lambda = S_{lambda_0} sum_m (-B S_{lambda_0})^m`` around a dense anchor.

    ``B = V (R_0^+(lambda) - R_0^+(lambda_0))``.  Without ``n_terms`` the
    series is cut once the geometric tail ``||S_0|| q^{n+1} / (1 - q)``
    drops below ``tol``, where ``q = ||S_0|| ||B||``.

    Raises
    ------
    DivergenceError
        If ``||S_{lambda_0}|| ||B|| >= 1``.
    """
    grid = V.grid
    if V.is_zero:
        return KernelOperator(grid, np.zeros((grid.n, grid.n), complex), {"identity": True, "residual_bound": 0.0})
    sb = _support(V)
    k, k0 = _k(z), _k(z0)
    S0 = sb.dense_solve_matrix(k0)  # (I + A0)^{-1} on the support
    nS0 = sb.l1_block(S0)
    Bblock = sb.v[:, None] * (sb.kernel_block(k) - sb.kernel_block(k0)) * sb.w[None, :]
    nB = sb.l1_block(Bblock)
    q = nS0 * nB
    if q >= 1:
        raise DivergenceError(f"anchored guard ||S0|| ||B|| = {q:.4g} >= 1; shrink |lambda - lambda0|")
    if n_terms is None:
        n_terms = 0
        while q > 0 and nS0 * q ** (n_terms + 1) / (1 - q) > tol and n_terms < 400:
            n_terms += 1
    # On the support, S = S0 sum_m (-B S0)^m applied to the right-hand side rows.
    C = -Bblock @ S0
    acc = np.eye(sb.m, dtype=complex)
    term = np.eye(sb.m, dtype=complex)
    for _ in range(n_terms):
        term = term @ C
        acc += term
    S_block = S0 @ acc  # (I + A)^{-1} on the support
    rows = sb.rows(k)
    resid = nS0 * q ** (n_terms + 1) / (1 - q)
    meta = {"identity": True, "k": k, "k0": k0, "q": q, "n_terms": n_terms, "residual_bound": resid, "method": "anchored"}
    return _rows_to_kernel(sb, -S_block @ rows, meta)


def inversion_residual(z, V: Potential, S_tilde: KernelOperator) -> float:
    """``L^1`` norm of ``(I + V R_0^+)(I + S_tilde) - I``."""
    T = v_r0(z, V)
    R = T + S_tilde + T.compose(S_tilde)
    return l1_opnorm(R)


def s_tilde_sup(V: Potential, lam_samples=None) -> float:
    """``max_lambda ||S_tilde_lambda||`` over the samples (dense solves)."""
    if V.is_zero:
        return 0.0
    if lam_samples is None:
        lam_samples = energy_samples(V.grid)
    sb = _support(V)
    best = 0.0
    for lam in np.atleast_1d(lam_samples):
        k = _k(lam)
        rows = -sb.dense_solve_matrix(k) @ sb.rows(k)
        best = max(best, sb.l1_rows(rows))
    return best


def resonance_indicator(V: Potential) -> float:
    """Smallest singular value of ``I + V R_0^+(0)`` in ``L^1``-isometric coordinates.

    On the grid the ``L^1`` isometry is ``f -> w f``, which turns the
    operator into ``I + diag(w V) K_0``.  Values near zero flag a zero
    energy eigenvalue or resonance; the identity gives 1.
    """
    grid = V.grid
    if V.is_zero:
        return 1.0
    K0 = resolvent_matrix(grid.nodes, grid.nodes, 0.0).real
    M = np.eye(grid.n) + (grid.weights * V.values)[:, None] * K0
    return float(sla.svdvals(M)[-1])


def thresholds(V: Potential, lam_samples=None) -> ThresholdReport:
    """``N1``, ``N0``, ``delta`` and ``S_tilde`` for a potential.

    ``delta`` comes from :func:`find_delta` at
    ``eps = ((S_tilde + 1)^2 ||V||_K)^{-1}``.  ``N0`` is clamped to ``N1``,
    and is 0 when the zero-energy expansion fails on the whole ladder (near
    a zero-energy resonance), so that no frequency is treated as low.
    """
    if V.is_zero:
        N = DYADIC_LADDER[0]
        return ThresholdReport(N, N, 2.0**8, 0.0, float("inf"))
    N1 = find_N1(V)
    S = s_tilde_sup(V, lam_samples)
    eps = 1.0 / ((S + 1) ** 2 * V.kato_norm)
    delta = find_delta(V, eps)
    try:
        N0 = min(find_N0(V), N1)
    except ThresholdError:
        N0 = 0.0
    return ThresholdReport(N1, N0, delta, S, eps)
