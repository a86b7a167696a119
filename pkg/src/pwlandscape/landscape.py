"""Landscape function: solve ``H U = I_0`` in the plane-wave basis, evaluate
``u`` on real-space grids and form ``|V_eff| = 1/|u|``."""
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import kernels
from .errors import ComplexResidue, IndefiniteMatrix, NotConverged, SizeMismatch

log = logging.getLogger(__name__)

U_FIELD = "u"
VEFF = "veff_abs"
POTENTIAL = "potential"
DENSITY = "density"


@dataclass(frozen=True, eq=False)
class RealSpaceGrid:
    """Regular grid with points ``origin + i * spacing``, i < counts."""

    origin: tuple
    spacing: tuple
    counts: tuple

    @classmethod
    def from_window(cls, lo, hi, h=None, W=None):
        """Cell-centred grid covering ``[lo, hi]`` per axis.

        The spacing is the largest value <= ``h`` that tiles the window; ``h``
        defaults to ``pi / (4 W)``.
        """
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if h is None:
            if W is None:
                raise ValueError("need either h or W")
            h = np.pi / (4 * W)
        ext = hi - lo
        if np.any(ext <= 0):
            raise ValueError("window must have positive extent")
        counts = np.ceil(ext / h - 1e-9).astype(int)
        spacing = ext / counts
        origin = lo + 0.5 * spacing
        return cls(tuple(origin.tolist()), tuple(spacing.tolist()), tuple(int(c) for c in counts))

    @property
    def dim(self):
        return len(self.counts)

    @property
    def shape(self):
        return self.counts

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    @property
    def volume(self):
        return self.cell_volume * int(np.prod(self.counts))

    @property
    def window(self):
        o, h, n = np.array(self.origin), np.array(self.spacing), np.array(self.counts)
        return (o - 0.5 * h).tolist(), (o + (n - 0.5) * h).tolist()

    def axes(self):
        return [o + h * np.arange(n) for o, h, n in zip(self.origin, self.spacing, self.counts)]

    def points(self):
        """All points, shape (P, d), row-major (last axis fastest)."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)


@dataclass(eq=False)
class ScalarField:
    grid: RealSpaceGrid
    values: np.ndarray
    label: str
    meta: dict = field(default_factory=dict)

    def positions(self, flat_indices):
        return self.grid.points()[np.asarray(flat_indices, dtype=int)]


@dataclass(eq=False)
class LandscapeCoefficients:
    basis: object
    U: np.ndarray
    iterations: int
    residual: float
    method: str

    def stats(self):
        return {"method": self.method, "iterations": self.iterations, "residual": self.residual}


def _field_values(coef, q, grid):
    vals = kernels.grid_fourier_sum(coef, q, grid.origin, grid.spacing, grid.counts)
    return vals.reshape(grid.counts)


def _real_part(vals, rtol, what):
    resid = np.abs(vals.imag)
    bad = resid >= rtol * (1 + np.abs(vals.real))
    if bad.any():
        raise ComplexResidue(f"{what}: imaginary residue {resid.max():.3g} breaks real-valuedness")
    return np.ascontiguousarray(vals.real), float(resid.max(initial=0.0))


def potential_field(potentials, grid):
    """Sum of layer potentials sampled on ``grid``."""
    total = np.zeros(grid.counts, dtype=np.complex128)
    for pot in potentials:
        total += _field_values(pot.coefficients, pot.vectors, grid)
    vals, resid = _real_part(total, 1e-10, "potential")
    return ScalarField(grid, vals, POTENTIAL, {"max_imag": resid})


def _rhs(basis):
    b = np.zeros(basis.size)
    b[basis.origin_index] = 1.0
    return b


def _pcg(A, b, dinv, tol, max_iter):
    """Jacobi-preconditioned conjugate gradients for Hermitian positive A.

    Restarts from the true residual whenever the recursive residual claims
    convergence but the true one disagrees.
    """
    bnorm = np.linalg.norm(b)
    x = np.zeros_like(b)
    r = b.copy()
    it = 0
    best = (np.inf, x.copy())
    while it < max_iter:
        z = dinv * r
        p = z.copy()
        rz = np.vdot(r, z).real
        while it < max_iter:
            Ap = A @ p
            pAp = np.vdot(p, Ap).real
            if not pAp > 0:
                raise IndefiniteMatrix(f"non-positive curvature p^H A p = {pAp:.3g} at iteration {it}")
            alpha = rz / pAp
            x = x + alpha * p
            r = r - alpha * Ap
            it += 1
            if np.linalg.norm(r) <= tol * bnorm:
                break
            z = dinv * r
            rz_new = np.vdot(r, z).real
            p = z + (rz_new / rz) * p
            rz = rz_new
        r = b - A @ x
        res = np.linalg.norm(r) / bnorm
        if res < best[0]:
            best = (res, x.copy())
        if res <= tol:
            return x, it, res
    return best[1], it, best[0]


def solve_landscape(H, basis, method="iterative", tol=1e-12, max_iter=None):
    """Fourier coefficients of the landscape function.

    ``method="iterative"`` runs diagonal-preconditioned CG, ``"dense"`` a
    Cholesky factorisation.  Raises IndefiniteMatrix when ``H`` is not
    positive definite and NotConverged (carrying the best iterate) when the
    iteration budget runs out.
    """
    if H.size != basis.size:
        raise SizeMismatch("Hamiltonian and basis sizes differ")
    if not 0 < tol < 1:
        raise ValueError("tol must lie in (0, 1)")
    b = _rhs(basis)
    A = H.matrix
    if method == "dense":
        try:
            c, low = sla.cho_factor(A.toarray(), lower=True)
        except sla.LinAlgError as exc:
            raise IndefiniteMatrix(f"Cholesky failed: {exc}") from exc
        U = sla.cho_solve((c, low), b.astype(A.dtype))
        res = float(np.linalg.norm(b - A @ U))
        return LandscapeCoefficients(basis, U, 0, res, method)
    if method != "iterative":
        raise ValueError(f"unknown method {method!r}")
    diag = H.diagonal
    if np.any(diag <= 0):
        raise IndefiniteMatrix("non-positive diagonal entry; Jacobi preconditioner undefined")
    if max_iter is None:
        max_iter = 10 * basis.size + 100
    U, its, res = _pcg(A, b.astype(A.dtype), 1.0 / diag, tol, max_iter)
    out = LandscapeCoefficients(basis, U, its, float(res), method)
    if res > tol:
        raise NotConverged(f"CG stopped at relative residual {res:.3g} after {its} iterations", result=out)
    return out


def eval_field(coeffs, basis, grid):
    """Evaluate ``u(x) = sum U_k exp(i q_k . x)`` on ``grid``."""
    if len(coeffs.U) != basis.size:
        raise SizeMismatch("coefficient vector does not match the basis")
    if max(grid.spacing) > np.pi / basis.W:
        log.warning("grid spacing %.3g exceeds pi/W = %.3g; u is under-resolved", max(grid.spacing), np.pi / basis.W)
    vals, resid = _real_part(_field_values(coeffs.U, basis.q, grid), 1e-8, "landscape function")
    return ScalarField(grid, vals, U_FIELD, {"max_imag": resid})


def effective_potential(u_field, cap=1e6):
    """``min(1/|u|, cap)``; points with ``|u| <= 1/cap`` or ``u <= 0`` are counted."""
    if cap <= 0:
        raise ValueError("cap must be positive")
    u = u_field.values
    flagged = (np.abs(u) <= 1.0 / cap) | (u <= 0)
    with np.errstate(divide="ignore"):
        vals = np.minimum(1.0 / np.abs(u), cap)
    n_flagged = int(flagged.sum())
    if n_flagged:
        log.warning("%d grid points have u <= 0 or |u| <= 1/cap; |V_eff| clamped", n_flagged)
    return ScalarField(u_field.grid, vals, VEFF, {"n_flagged": n_flagged, "cap": cap})


def total_variation(field):
    """Sum of absolute differences between neighbouring samples, all axes."""
    v = field.values
    return float(sum(np.abs(np.diff(v, axis=a)).sum() for a in range(v.ndim)))
