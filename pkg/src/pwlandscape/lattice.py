"""Bravais lattices, reciprocal lattices, rotations and a numeric
incommensurability check.

Lattice vectors are the *columns* of the basis matrix ``A``; the reciprocal
lattice has basis ``2*pi*A^{-T}``.
"""
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd

import numpy as np

from .errors import DimensionMismatch, SingularBasis

DIRECT = "direct"
RECIPROCAL = "reciprocal"

_EPS = np.finfo(float).eps


@dataclass(frozen=True, eq=False)
class LatticeSpec:
    dim: int
    basis: np.ndarray
    kind: str = DIRECT
    condition: float = field(default=1.0, compare=False)

    @property
    def volume(self):
        """Cell length (1D) or area (2D)."""
        return abs(float(np.linalg.det(self.basis)))

    @property
    def spacing(self):
        """Shortest basis-vector length; used as a length/reciprocal scale."""
        return float(np.min(np.linalg.norm(self.basis, axis=0)))

    def vectors(self, n):
        """Map integer coordinates (..., d) to lattice vectors (..., d)."""
        return np.asarray(n, dtype=np.float64) @ self.basis.T

    def same_as(self, other, rtol=1e-12):
        if self.dim != other.dim or self.kind != other.kind:
            return False
        scale = max(np.abs(self.basis).max(), np.abs(other.basis).max())
        return bool(np.abs(self.basis - other.basis).max() <= rtol * scale)


def _build(basis, kind):
    a = np.array(basis, dtype=np.float64, ndmin=2)
    if a.shape[0] != a.shape[1] or a.shape[0] not in (1, 2):
        raise DimensionMismatch(f"basis must be 1x1 or 2x2, got shape {a.shape}")
    d = a.shape[0]
    scale = float(np.max(np.linalg.norm(a, axis=0)))
    det = float(np.linalg.det(a))
    if not np.isfinite(det) or abs(det) <= 1e-14 * scale**d:
        raise SingularBasis(f"lattice basis is singular (det={det:g})")
    a.setflags(write=False)
    return LatticeSpec(dim=d, basis=a, kind=kind, condition=float(np.linalg.cond(a)))


def make_lattice(dim, basis_matrix):
    """Direct lattice from a scalar length (1D) or a 2x2 column basis."""
    lat = _build(basis_matrix, DIRECT)
    if lat.dim != dim:
        raise DimensionMismatch(f"dim={dim} but basis is {lat.dim}x{lat.dim}")
    return lat


def reciprocal(lattice):
    kind = RECIPROCAL if lattice.kind == DIRECT else DIRECT
    return _build(2 * np.pi * np.linalg.inv(lattice.basis).T, kind)


def rotation_matrix(angle_degrees):
    t = np.deg2rad(angle_degrees)
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, -s], [s, c]])


def rotate(lattice, angle_degrees):
    if lattice.dim != 2:
        raise DimensionMismatch("rotation needs a 2D lattice")
    if angle_degrees == 0:
        return lattice
    return _build(rotation_matrix(angle_degrees) @ lattice.basis, lattice.kind)


# ---------------------------------------------------------------------------
# incommensurability
# ---------------------------------------------------------------------------

INCOMMENSURATE = "incommensurate"
COMMENSURATE = "commensurate"
UNDECIDED = "undecided"


@dataclass(frozen=True)
class IncommensurabilityReport:
    verdict: str
    witness: tuple | None
    residual: float
    depth: int

    def as_dict(self):
        w = self.witness
        if w is not None:
            w = [np.asarray(x).tolist() for x in w]
        return {"verdict": self.verdict, "witness": w, "residual": self.residual, "depth": self.depth}


def _convergents(x, depth):
    """Yield continued-fraction convergents (p, q) of x."""
    a = np.floor(x)
    p_prev, p = 1, int(a)
    q_prev, q = 0, 1
    frac = x - a
    yield p, q
    for _ in range(depth - 1):
        if frac == 0:
            return
        x = 1.0 / frac
        a = np.floor(x)
        frac = x - a
        ai = int(a)
        p_prev, p = p, ai * p + p_prev
        q_prev, q = q, ai * q + q_prev
        yield p, q


def _rational_entry(x, tol, depth):
    """Smallest-denominator convergent p/q with |q x - p| < tol.

    Returns (Fraction or None, best residual, precision_exhausted).
    """
    best = np.inf
    for p, q in _convergents(x, depth):
        # residual below this is indistinguishable from rounding noise
        noise = 8 * q * _EPS * max(1.0, abs(x))
        r = abs(q * x - p)
        best = min(best, r)
        if r < tol:
            return Fraction(p, q), r, False
        if noise > 0.1 * tol:
            return None, best, True
    return None, best, False


def check_incommensurate(lat1, lat2, tol=1e-10, depth=30):
    """Search for an integer relation between two lattices.

    1D: continued fraction of a1/a2, witness ``(m, n)`` with ``m*a1 = n*a2``.
    2D: every entry of ``M = A2^{-1} A1`` is tested for rationality; the
    witness is ``(m, m*M)`` with ``m`` the common denominator, so that
    ``m * A1 = A2 @ (m*M)``.

    The result is advisory: ``undecided`` means floating-point precision ran
    out before the depth did, ``incommensurate`` that no relation exists up to
    the searched depth.
    """
    if lat1.dim != lat2.dim:
        raise DimensionMismatch("lattices differ in dimension")
    m = np.linalg.solve(lat2.basis, lat1.basis)
    entries = m.reshape(-1)
    denom = 1
    for x in entries:
        frac, resid, ran_out = _rational_entry(float(x), tol, depth)
        if frac is None:
            return IncommensurabilityReport(UNDECIDED if ran_out else INCOMMENSURATE, None, float(resid), depth)
        denom = denom * frac.denominator // gcd(denom, frac.denominator)
    counts = np.rint(denom * m).astype(np.int64)
    residual = float(np.abs(denom * m - counts).max())
    if residual >= tol * max(1, denom):
        return IncommensurabilityReport(UNDECIDED, None, residual, depth)
    if lat1.dim == 1:
        witness = (int(denom), int(counts[0, 0]))
    else:
        witness = (int(denom), counts)
    return IncommensurabilityReport(COMMENSURATE, witness, residual, depth)
