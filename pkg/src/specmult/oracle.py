"""Finite-difference ground truth for ``H = -Delta + V`` on radial functions.

With ``u = r f`` the radial operator is ``-u'' + V u`` on the half-line.
It is discretized by the three-point Laplacian on the cell midpoints with
odd reflections at both ends, so ``u`` vanishes at ``r = 0`` and at the
outer radius.  The outer radius may be a multiple ``pad`` of the working
radius: the potential is extended by zero there, fields are extended by
zero, and results are read back on the working grid.  Padding pushes the
box reflections far away from the region under study.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import GridError, ParameterError, SymbolError
from .kato import Potential
from .radial import RadialField, RadialGrid, build_grid, lp_norm, radial_derivative

__all__ = [
    "SpectralDecomposition",
    "discretize_h",
    "oracle_multiplier",
    "propagator",
    "eigenfunction_diagnostics",
    "radial_laplacian",
    "export_eigenvalues",
]


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Eigenpairs of the discretized ``H``.

    Attributes
    ----------
    grid : RadialGrid
        Working grid on which fields are given and returned.
    box : RadialGrid
        Grid of the full computational box, ``pad`` times larger.
    eigenvalues : ndarray
        Ascending.
    eigenvectors : ndarray
        ``eigenvectors[:, k]`` is the radial eigenfunction on ``box``,
        orthonormal for ``sum |phi|^2 w``.
    bound_count : int
        Number of eigenvalues classified as negative.
    potential : ndarray
        Potential samples on ``box``.
    """

    grid: RadialGrid
    box: RadialGrid
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    bound_count: int
    potential: np.ndarray
    pad: int = 1

    @property
    def continuum(self) -> np.ndarray:
        return np.arange(self.eigenvalues.size) >= self.bound_count

    @property
    def n_box(self) -> int:
        return self.box.n

    def extend(self, values) -> np.ndarray:
        """Zero-extend working-grid samples to the box (box samples pass through)."""
        vals = np.asarray(getattr(values, "values", values))
        if vals.shape[-1] == self.box.n:
            return vals
        if vals.shape[-1] != self.grid.n:
            raise ParameterError("field does not live on this decomposition's grid")
        out = np.zeros(vals.shape[:-1] + (self.box.n,), dtype=np.result_type(vals, float))
        out[..., : self.grid.n] = vals
        return out

    def coefficients(self, f) -> np.ndarray:
        """``<phi_k, f>`` for all eigenfunctions; batches are stacked along the first axis."""
        return (self.extend(f) * self.box.weights) @ self.eigenvectors

    def synthesize(self, coeffs, full: bool = False) -> np.ndarray:
        """Inverse of :meth:`coefficients`, restricted to the working grid unless ``full``."""
        out = coeffs @ self.eigenvectors.T
        return out if full else out[..., : self.grid.n]

    def apply_h(self, f) -> np.ndarray:
        """Direct tridiagonal application of ``H`` on the box."""
        vals = self.extend(f)
        h = self.box.widths[0]
        r = self.box.nodes
        u = r * vals
        lap = np.empty_like(u)
        lap[1:-1] = u[:-2] - 2 * u[1:-1] + u[2:]
        lap[0] = -3 * u[0] + u[1]
        lap[-1] = u[-2] - 3 * u[-1]
        return (-lap / h**2 + self.potential * u) / r

    def gram_residual(self) -> float:
        P = self.eigenvectors
        G = P.T @ (P * self.box.weights[:, None])
        return float(np.max(np.abs(G - np.eye(G.shape[0]))))


def discretize_h(V: Potential, pad: int = 1, scale: float | None = None) -> SpectralDecomposition:
    """Diagonalize the three-point discretization of ``-u'' + V u``.

    Parameters
    ----------
    V : Potential
        On a uniform grid.
    pad : int
        The box radius is ``pad * r_max`` with ``V = 0`` outside ``r_max``.
    scale : float, optional
        Eigenvalues below ``-1e-8 * scale`` count as bound states; the
        default is the spectral radius bound ``4 / h^2``.
    """
    grid = V.grid
    if grid.scheme != "uniform":
        raise GridError("the finite-difference oracle needs a uniform grid")
    pad = int(pad)
    if pad < 1:
        raise ParameterError("pad must be a positive integer")
    box = grid if pad == 1 else build_grid(grid.r_max * pad, grid.n * pad)
    h = grid.widths[0]
    pot = np.zeros(box.n)
    pot[: grid.n] = V.values
    diag = 2.0 / h**2 + pot
    diag[0] += 1.0 / h**2
    diag[-1] += 1.0 / h**2
    off = -np.ones(box.n - 1) / h**2
    lam, U = eigh_tridiagonal(diag, off)
    phi = U / (box.nodes[:, None] * np.sqrt(4 * np.pi * h))
    # fix the sign so that each eigenfunction is positive near the origin
    phi *= np.where(phi[0] < 0, -1.0, 1.0)[None, :]
    scale = 4.0 / h**2 if scale is None else scale
    bound = int(np.sum(lam < -1e-8 * scale))
    return SpectralDecomposition(grid, box, lam, phi, bound, pot, pad)


def _symbol_values(m, lam: np.ndarray, negative: bool) -> np.ndarray:
    with np.errstate(all="ignore"):
        vals = m.at_point(lam) if negative and hasattr(m, "at_point") else m(lam)
        vals = np.asarray(vals, dtype=complex) * np.ones_like(lam)
    if not np.all(np.isfinite(vals)):
        raise SymbolError("symbol is not finite at a needed eigenvalue")
    return vals


def oracle_multiplier(m, spec: SpectralDecomposition, f, include_point: bool = False, full: bool = False):
    """``sum_k m(lambda_k) <phi_k, f> phi_k`` over the continuum (and bound states if asked).

    ``m`` is any vectorized callable of the energy; for bound states a
    ``m.at_point`` method is used when present.  ``f`` may be a
    :class:`RadialField`, a sample vector, or a stack of sample vectors
    with one field per row.
    """
    vals = getattr(f, "values", f)
    c = spec.coefficients(vals)
    lam = spec.eigenvalues
    J = spec.bound_count
    mult = np.zeros(lam.size, dtype=complex)
    mult[J:] = _symbol_values(m, lam[J:], False)
    if include_point and J:
        mult[:J] = _symbol_values(m, lam[:J], True)
    out = spec.synthesize(c * mult, full)
    if isinstance(f, RadialField) and not full:
        return f.with_values(out)
    return out


def propagator(t: float, spec: SpectralDecomposition, f, project: bool = False, full: bool = False):
    """``e^{-itH} f``, or ``e^{-itH} P_c f`` with ``project``."""
    vals = getattr(f, "values", f)
    c = spec.coefficients(vals)
    phase = np.exp(-1j * t * spec.eigenvalues)
    if project:
        phase[: spec.bound_count] = 0
    out = spec.synthesize(c * phase, full)
    if isinstance(f, RadialField) and not full:
        return f.with_values(out)
    return out


def eigenfunction_diagnostics(spec: SpectralDecomposition) -> list[dict]:
    """Decay rate and Lebesgue norms of every bound state.

    The decay rate is the slope of ``-log|r phi(r)|`` fitted outside the
    support of the potential, where the exact exterior solution is
    ``e^{-sqrt|lambda| r} / r``.
    """
    if spec.bound_count < 1:
        raise ParameterError("no bound states to diagnose")
    box = spec.box
    r = box.nodes
    supp = np.flatnonzero(np.abs(spec.potential) > 0)
    r_out = r[supp[-1]] + 1.0 if supp.size else 1.0
    reports = []
    for j in range(spec.bound_count):
        phi = spec.eigenvectors[:, j]
        kappa = np.sqrt(-spec.eigenvalues[j])
        u = np.abs(r * phi)
        mask = (r >= r_out) & (r <= r_out + 8.0 / kappa) & (r <= 0.8 * r[-1]) & (u > 1e-12 * u.max())
        if mask.sum() >= 3:
            rate = -np.polyfit(r[mask], np.log(u[mask]), 1)[0]
        else:
            rate = float("nan")
        field = RadialField(box, phi.astype(complex))
        grad = radial_derivative(phi, box)
        reports.append(
            {
                "index": j,
                "eigenvalue": float(spec.eigenvalues[j]),
                "expected_rate": float(kappa),
                "decay_rate": float(rate),
                "lp_norms": {str(p): lp_norm(field, p) for p in (6 / 5, 2.0, 10 / 9, 10.0)},
                "gradient_norms": {str(q): lp_norm(grad, q, box.weights) for q in (1.2, 2.0, 2.9)},
            }
        )
    return reports


def radial_laplacian(values: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """``-Delta f`` for radial ``f`` via ``-(r f)'' / r`` with an odd reflection at the origin.

    The last node uses a one-sided stencil and is only indicative.
    """
    if grid.scheme != "uniform":
        raise GridError("needs a uniform grid")
    h = grid.widths[0]
    r = grid.nodes
    u = r * np.asarray(values)
    lap = np.empty_like(u)
    lap[1:-1] = u[:-2] - 2 * u[1:-1] + u[2:]
    lap[0] = -3 * u[0] + u[1]
    lap[-1] = u[-3] - 2 * u[-2] + u[-1]
    return -lap / (h**2 * r)


def export_eigenvalues(spec: SpectralDecomposition, path) -> None:
    """CSV of ``k, lambda_k``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(["k", "lambda"])
        for k, lam in enumerate(spec.eigenvalues):
            out.writerow([k, f"{lam:.17g}"])
