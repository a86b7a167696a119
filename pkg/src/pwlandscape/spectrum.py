"""Eigenpairs of the plane-wave Hamiltonian, eigenvalue counting, Fermi-Dirac
weights and the electron density."""
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from . import kernels
from .errors import ConvergenceFailure, IncompleteSpectrum
from .landscape import DENSITY, ScalarField

log = logging.getLogger(__name__)

FULL = "full"
PARTIAL = "partial"

COUNTING = "counting"
WEYL_STANDARD = "weyl_standard"
WEYL_EFFECTIVE = "weyl_effective"

DENSE_LIMIT = 8000
VERIFY_DENSE_LIMIT = 3000
UNIT_BALL = {1: 2.0, 2: np.pi}


@dataclass(eq=False)
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    mode: str = FULL
    e_max: float = np.inf

    def __len__(self):
        return len(self.eigenvalues)


@dataclass(eq=False)
class IDoSCurve:
    energies: np.ndarray
    values: np.ndarray
    kind: str
    scale: float = 1.0
    convention: str | None = None
    meta: dict = field(default_factory=dict)

    def scaled(self, c):
        return IDoSCurve(self.energies, c * self.values, self.kind, self.scale * c, self.convention, dict(self.meta))


def _check_residuals(A, lam, vecs, sample=8):
    if len(lam) == 0:
        return
    picks = np.unique(np.linspace(0, len(lam) - 1, min(sample, len(lam))).astype(int))
    r = A @ vecs[:, picks] - vecs[:, picks] * lam[picks]
    res = np.linalg.norm(r, axis=0)
    bound = 1e-8 * (1 + np.abs(lam[picks]))
    if np.any(res > bound):
        raise ConvergenceFailure("eigenpair residuals exceed 1e-8 (1+|lambda|)", residuals=res.tolist())


def _count_below(A, e):
    """Number of eigenvalues < e, by dense eigvalsh or Sylvester inertia."""
    n = A.shape[0]
    dense = A.toarray()
    if n <= VERIFY_DENSE_LIMIT:
        return int(np.sum(sla.eigvalsh(dense) < e))
    _, d, _ = sla.ldl(dense - e * np.eye(n), hermitian=True)
    return int(np.sum(sla.eigvalsh(d) < 0))


def eigensolve(H, mode=FULL, e_max=None):
    """All eigenpairs (``full``) or all pairs with eigenvalue <= ``e_max``.

    The partial mode grows a Lanczos window until it passes ``e_max`` and then
    verifies completeness by an independent count below ``e_max``.
    """
    A = H.matrix
    n = A.shape[0]
    if mode == FULL:
        lam, vecs = sla.eigh(A.toarray())
        _check_residuals(A, lam, vecs)
        return Spectrum(lam, vecs, FULL)
    if mode != PARTIAL:
        raise ValueError(f"unknown mode {mode!r}")
    if e_max is None or not np.isfinite(e_max):
        raise ValueError("partial mode needs a finite e_max")
    k = min(n - 2, 32)
    while True:
        if k >= n - 2:
            lam, vecs = sla.eigh(A.toarray())
            break
        try:
            lam, vecs = spla.eigsh(A, k=k, which="SA", tol=1e-12)
        except spla.ArpackNoConvergence as exc:
            raise ConvergenceFailure(f"Lanczos did not converge for k={k}") from exc
        order = np.argsort(lam)
        lam, vecs = lam[order], vecs[:, order]
        if lam[-1] > e_max:
            break
        k = min(n - 2, 2 * k)
    keep = lam <= e_max
    lam, vecs = lam[keep], vecs[:, keep]
    # orthonormalise within near-degenerate clusters returned by ARPACK
    vecs, _ = np.linalg.qr(vecs)
    rayleigh = vecs.conj().T @ (A @ vecs)
    lam, rot = sla.eigh(0.5 * (rayleigh + rayleigh.conj().T))
    vecs = vecs @ rot
    _check_residuals(A, lam, vecs)
    expected = _count_below(A, e_max + 1e-10 * (1 + abs(e_max)))
    if expected != len(lam):
        raise ConvergenceFailure(f"partial solve found {len(lam)} eigenvalues <= {e_max}, inertia count says {expected}")
    return Spectrum(lam, vecs, PARTIAL, float(e_max))


def auto_mode(size):
    return FULL if size <= DENSE_LIMIT else PARTIAL


def counting_function(spectrum, energies):
    """``N(E) = #{lambda_j <= E}`` on an ascending energy grid."""
    e = np.asarray(energies, dtype=float)
    if np.any(np.diff(e) < 0):
        raise ValueError("energy grid must be ascending")
    if spectrum.mode == PARTIAL and e.size and e[-1] > spectrum.e_max:
        raise IncompleteSpectrum(f"energies reach {e[-1]} but the spectrum stops at {spectrum.e_max}")
    vals = np.searchsorted(spectrum.eigenvalues, e, side="right").astype(float)
    return IDoSCurve(e, vals, COUNTING)


def fermi_dirac(E, mu, beta):
    """``1 / (1 + exp((E - mu) beta))`` without overflow."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    x = (np.asarray(E, dtype=float) - mu) * beta
    ex = np.exp(-np.abs(x))
    out = np.where(x >= 0, ex / (1 + ex), 1 / (1 + ex))
    return out if out.ndim else float(out)


def default_s_norm(dim, L):
    """Unit-ball volume times ``(L / 2 pi)^d``."""
    return UNIT_BALL[dim] * L**dim / (2 * np.pi) ** dim


def electron_density(spectrum, basis, grid, mu, beta, s_norm=None, weight_floor=1e-12):
    """Fermi-Dirac weighted sum of ``|psi_j(x)|^2`` divided by ``s_norm``.

    Eigenpairs whose weight is below ``weight_floor`` times the largest weight
    are skipped.
    """
    if s_norm is None:
        s_norm = default_s_norm(basis.dim, basis.L)
    if s_norm <= 0:
        raise ValueError("s_norm must be positive")
    if spectrum.mode == PARTIAL and spectrum.e_max < mu + 30.0 / beta:
        raise IncompleteSpectrum(f"partial spectrum stops at {spectrum.e_max}; need >= mu + 30/beta = {mu + 30 / beta}")
    w = fermi_dirac(spectrum.eigenvalues, mu, beta)
    w = np.atleast_1d(w)
    if w.size == 0 or w.max() == 0:
        vals = np.zeros(grid.counts)
        used = 0
    else:
        sel = np.flatnonzero(w > weight_floor * w.max())
        vals = kernels.grid_density(spectrum.eigenvectors[:, sel], w[sel], basis.q,
                                    grid.origin, grid.spacing, grid.counts).reshape(grid.counts)
        vals = np.maximum(vals, 0.0) / s_norm
        used = len(sel)
    return ScalarField(grid, vals, DENSITY, {"mu": mu, "beta": beta, "s_norm": s_norm, "n_states": used})


def eigenfunction_values(spectrum, basis, grid, j):
    """Complex ``psi_j`` on the grid."""
    vals = kernels.grid_fourier_sum(spectrum.eigenvectors[:, j], basis.q, grid.origin, grid.spacing, grid.counts)
    return vals.reshape(grid.counts)
