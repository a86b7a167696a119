"""Layer potentials stored as Fourier coefficients on a reciprocal lattice."""
from dataclasses import dataclass

import numpy as np

from .errors import AmbiguousMatch, ComplexResidue, ConjugateSymmetryError, DimensionMismatch, EmptyPotential
from .lattice import RECIPROCAL

# exp(-745) underflows to zero in double precision
_UNDERFLOW_LOG = 745.0


@dataclass(frozen=True, eq=False)
class FourierPotential:
    """``V(x) = sum_m c_m exp(i G_m . x)`` with ``G_m = B n_m``.

    ``indices`` is an (M, d) integer array, ``coefficients`` an (M,) complex
    array.  The raw constructor does no validation; use
    :func:`gaussian_potential` or :func:`potential_from_modes`.
    """

    lattice: object
    indices: np.ndarray
    coefficients: np.ndarray

    @property
    def dim(self):
        return self.lattice.dim

    @property
    def vectors(self):
        return self.lattice.vectors(self.indices)

    @property
    def zero_mode(self):
        hit = np.flatnonzero(~self.indices.any(axis=1))
        return complex(self.coefficients[hit[0]]) if len(hit) else 0j

    def coefficient_map(self):
        return {tuple(int(v) for v in n): complex(c) for n, c in zip(self.indices, self.coefficients)}


def _index_box(lattice, radius):
    """All integer n with |B n| <= radius (B the reciprocal basis)."""
    binv = np.linalg.inv(lattice.basis)
    bounds = np.floor(radius * np.linalg.norm(binv, axis=1) + 1e-9).astype(int)
    axes = [np.arange(-b, b + 1) for b in bounds]
    n = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, lattice.dim)
    return n


def gaussian_potential(reciprocal_lattice, s, gamma, eps_cut=1e-12):
    """Coefficients ``s * exp(-gamma |G|^2)``, keeping those >= ``eps_cut``."""
    if reciprocal_lattice.kind != RECIPROCAL:
        raise DimensionMismatch("gaussian_potential expects a reciprocal lattice")
    if s <= 0 or gamma <= 0 or eps_cut < 0:
        raise ValueError("need s > 0, gamma > 0, eps_cut >= 0")
    if s < eps_cut:
        raise EmptyPotential(f"s={s} is below eps_cut={eps_cut}; no mode survives")
    log_ratio = np.log(s / eps_cut) if eps_cut > 0 else np.log(s) + _UNDERFLOW_LOG
    radius = np.sqrt(max(log_ratio, 0.0) / gamma)
    n = _index_box(reciprocal_lattice, radius)
    g2 = (reciprocal_lattice.vectors(n) ** 2).sum(axis=1)
    coef = s * np.exp(-gamma * g2)
    keep = (coef >= eps_cut) & (coef > 0)
    n, coef = n[keep], coef[keep]
    # |G| is negation-symmetric bit for bit, so the retained set is too
    order = np.lexsort(n.T[::-1])
    return FourierPotential(reciprocal_lattice, n[order], coef[order].astype(np.complex128))


def potential_from_modes(reciprocal_lattice, modes, rtol=1e-12):
    """Build from ``[(n, re, im), ...]`` with ``n`` an int (1D) or a pair (2D).

    Raises ConjugateSymmetryError unless every mode ``n`` has a partner ``-n``
    carrying the complex-conjugate coefficient.
    """
    d = reciprocal_lattice.dim
    idx, coef = [], []
    for mode in modes:
        n, re, im = mode
        n = np.atleast_1d(np.asarray(n, dtype=np.int64))
        if n.shape != (d,):
            raise DimensionMismatch(f"mode index {n.tolist()} does not have {d} components")
        idx.append(n)
        coef.append(complex(re, im))
    if not idx:
        raise EmptyPotential("no modes given")
    pot = FourierPotential(reciprocal_lattice, np.array(idx), np.array(coef, dtype=np.complex128))
    cmap = pot.coefficient_map()
    if len(cmap) != len(idx):
        raise ValueError("duplicate mode indices")
    for n, c in cmap.items():
        partner = cmap.get(tuple(-v for v in n))
        if partner is None or abs(partner - c.conjugate()) > rtol * max(abs(c), 1e-300):
            raise ConjugateSymmetryError(f"mode {list(n)} lacks a conjugate partner at {[-v for v in n]}")
    return pot


def eval_potential(potentials, points):
    """Sum of the given potentials at real-space points (P, d) or (P,)."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None] if potentials[0].dim == 1 else pts[None, :]
    total = np.zeros(pts.shape[0], dtype=np.complex128)
    for pot in potentials:
        if pot.dim != pts.shape[1]:
            raise DimensionMismatch("potential and points differ in dimension")
        total += np.exp(1j * pts @ pot.vectors.T) @ pot.coefficients
    bad = np.abs(total.imag) >= 1e-10 * (1 + np.abs(total.real))
    if bad.any():
        raise ComplexResidue(f"imaginary residue {np.abs(total.imag).max():.3g}; conjugate symmetry is broken")
    return total.real


def coefficient_lookup(potential, delta_g, tol=None):
    """Coefficient of the mode whose wave vector equals ``delta_g`` within tol."""
    if tol is None:
        tol = 1e-8 * potential.lattice.spacing
    if tol <= 0:
        raise ValueError("tol must be positive")
    dg = np.atleast_1d(np.asarray(delta_g, dtype=np.float64))
    dist = np.linalg.norm(potential.vectors - dg, axis=1)
    hits = np.flatnonzero(dist <= tol)
    if len(hits) > 1:
        raise AmbiguousMatch(f"{len(hits)} modes lie within {tol:g} of {dg.tolist()}")
    return complex(potential.coefficients[hits[0]]) if len(hits) else 0j
